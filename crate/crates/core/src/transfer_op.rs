//! The perturbed transfer operator
//! `Φ_{θ,q}[g](ω) = (1/q) Σ_{k<q} e^{θ f((ω+k)/q)} g((ω+k)/q)`
//! discretized by collocation with piecewise-linear interpolation, and its
//! dominant eigenvalue `λ_θ`, giving `Λ_q(θ) = log λ_θ`.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::fnmodel::PeriodicFunctionSpec;
use crate::sequence::GapSequence;

pub const POWER_TOL: f64 = 1e-13;
pub const POWER_MAX_ITER: usize = 100_000;
/// Relative change of `λ` under grid doubling accepted as converged.
pub const GRID_TOL: f64 = 1e-9;
/// Initial and maximal number of grid intervals `N - 1`; grids are nested dyadic.
pub const GRID_START: usize = 64;
pub const GRID_CAP: usize = 16384;
/// Step of the central difference for `Λ_q'`.
pub const DERIVATIVE_STEP: f64 = 1e-4;
/// `|θ|` beyond which results are flagged as outside the routine working range.
pub const THETA_WORKING_RANGE: f64 = 16.0;

const RESIDUAL_FLOOR: f64 = 1e-11;
const POWER_RESIDUAL_TOL: f64 = 1e-10;

/// Sparse collocation matrix of `Φ_{θ,q}` on the nodes `i/(N-1)`.
///
/// Row `i` has `2q` entries: for each branch `k`, the two interpolation
/// weights at `(ω_i + k)/q`, multiplied by `e^{θf - s}/q`. The common factor
/// `e^{s}` is kept separately as `log_scale` so large `θ` cannot overflow.
#[derive(Debug, Clone)]
pub struct OperatorDiscretization {
    pub q: usize,
    pub theta: f64,
    pub n: usize,
    pub log_scale: f64,
    cols: Vec<u32>,
    vals: Vec<f64>,
}

impl OperatorDiscretization {
    fn row_len(&self) -> usize {
        2 * self.q
    }

    pub fn nodes(&self) -> Vec<f64> {
        nodes(self.n)
    }

    /// `e^{-s} A g`.
    pub fn apply(&self, g: &[f64], out: &mut [f64]) {
        let r = self.row_len();
        out.par_iter_mut()
            .zip(self.cols.par_chunks(r).zip(self.vals.par_chunks(r)))
            .for_each(|(o, (c, v))| {
                *o = c.iter().zip(v).map(|(&j, &w)| w * g[j as usize]).sum();
            });
    }

    /// `e^{-s} Aᵀ g`.
    pub fn apply_transpose(&self, g: &[f64], out: &mut [f64]) {
        out.iter_mut().for_each(|o| *o = 0.0);
        let r = self.row_len();
        for (i, (c, v)) in self.cols.chunks(r).zip(self.vals.chunks(r)).enumerate() {
            for (&j, &w) in c.iter().zip(v) {
                out[j as usize] += w * g[i];
            }
        }
    }

    /// The full matrix `A` (including the scale factor), row-major.
    pub fn to_dense(&self) -> Vec<Vec<f64>> {
        let scale = self.log_scale.exp();
        let r = self.row_len();
        let mut m = vec![vec![0.0; self.n]; self.n];
        for (i, (c, v)) in self.cols.chunks(r).zip(self.vals.chunks(r)).enumerate() {
            for (&j, &w) in c.iter().zip(v) {
                m[i][j as usize] += w * scale;
            }
        }
        m
    }
}

fn nodes(n: usize) -> Vec<f64> {
    (0..n).map(|i| i as f64 / (n - 1) as f64).collect()
}

/// Trapezoid weights for the nodes `i/(N-1)`.
pub fn trapezoid_weights(n: usize) -> Vec<f64> {
    let h = 1.0 / (n - 1) as f64;
    let mut w = vec![h; n];
    w[0] = 0.5 * h;
    w[n - 1] = 0.5 * h;
    w
}

pub fn build_operator(
    spec: &PeriodicFunctionSpec,
    q: usize,
    theta: f64,
    n: usize,
) -> Result<OperatorDiscretization> {
    if q < 2 {
        return Err(Error::arg(format!("q must be at least 2 (got {q})")));
    }
    if n < 2 * q {
        return Err(Error::arg(format!("grid size {n} is below 2q = {}", 2 * q)));
    }
    if n > u32::MAX as usize {
        return Err(Error::arg("grid size too large"));
    }
    if !spec.lipschitz_bound().is_finite() || !theta.is_finite() {
        return Err(Error::arg("operator needs a Lipschitz function and finite theta"));
    }
    let last = (n - 1) as f64;
    // preimage (ω_i + k)/q sits at grid position (i + k(N-1))/q: an exact rational
    let mut exps = Vec::with_capacity(n * q);
    let mut pos = Vec::with_capacity(n * q);
    for i in 0..n {
        for k in 0..q {
            let num = i + k * (n - 1);
            let y = num as f64 / (last * q as f64);
            exps.push(theta * spec.evaluate(y.min(1.0)));
            pos.push((num / q, (num % q) as f64 / q as f64));
        }
    }
    let log_scale = exps.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let mut cols = Vec::with_capacity(2 * n * q);
    let mut vals = Vec::with_capacity(2 * n * q);
    for (&(j, t), &e) in pos.iter().zip(&exps) {
        let weight = (e - log_scale).exp() / q as f64;
        let (j, t) = if j >= n - 1 { (n - 2, 1.0) } else { (j, t) };
        cols.push(j as u32);
        vals.push(weight * (1.0 - t));
        cols.push((j + 1) as u32);
        vals.push(weight * t);
    }
    Ok(OperatorDiscretization {
        q,
        theta,
        n,
        log_scale,
        cols,
        vals,
    })
}

/// Dominant eigen-data of a discretized operator.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct SpectralResult {
    pub lambda_theta: f64,
    pub log_lambda: f64,
    /// `h_θ` at the nodes, scaled to unit sup norm.
    pub right_eigvec: Vec<f64>,
    /// Density `ν_θ` at the nodes with `Σ ν_i w_i = 1` for trapezoid weights `w`.
    pub left_eigvec: Vec<f64>,
    /// Estimate of `|λ₂|/λ_θ` from the decay of power-iteration residuals.
    pub gap_ratio: f64,
    pub n_used: usize,
    pub iterations: usize,
}

struct PowerResult {
    log_lambda: f64,
    vector: Vec<f64>,
    gap_ratio: f64,
    iterations: usize,
}

fn power_iteration<F>(n: usize, apply: F, log_scale: f64, what: &str) -> Result<PowerResult>
where
    F: Fn(&[f64], &mut [f64]),
{
    let mut v = vec![1.0; n];
    let mut w = vec![0.0; n];
    let mut rho_prev = f64::NAN;
    let mut residuals: Vec<f64> = Vec::new();
    let mut last_change = f64::INFINITY;
    for it in 1..=POWER_MAX_ITER {
        apply(&v, &mut w);
        let vw: f64 = v.iter().zip(&w).map(|(a, b)| a * b).sum();
        let vv: f64 = v.iter().map(|a| a * a).sum();
        let rho = vw / vv;
        if !(rho > 0.0) || !rho.is_finite() {
            return Err(Error::NonConvergence {
                what: format!("{what}: Rayleigh quotient {rho}"),
                residual: f64::NAN,
            });
        }
        let res = v
            .iter()
            .zip(&w)
            .map(|(a, b)| (b - rho * a).abs())
            .fold(0.0f64, f64::max)
            / rho;
        residuals.push(res);
        let sup = w.iter().fold(0.0f64, |m, x| m.max(x.abs()));
        for (vi, wi) in v.iter_mut().zip(&w) {
            *vi = wi / sup;
        }
        last_change = ((rho - rho_prev) / rho).abs();
        rho_prev = rho;
        // the quotient can settle before the vector does; require a small residual too
        if (last_change < POWER_TOL && res < POWER_RESIDUAL_TOL) || res == 0.0 {
            // one more product to get the eigenvalue of the normalized vector
            apply(&v, &mut w);
            let vw: f64 = v.iter().zip(&w).map(|(a, b)| a * b).sum();
            let vv: f64 = v.iter().map(|a| a * a).sum();
            return Ok(PowerResult {
                log_lambda: (vw / vv).ln() + log_scale,
                vector: v,
                gap_ratio: decay_rate(&residuals),
                iterations: it,
            });
        }
    }
    Err(Error::NonConvergence {
        what: format!("{what}: power iteration"),
        residual: last_change,
    })
}

/// Geometric mean of successive residual ratios above the noise floor,
/// taken over the later half of the run.
fn decay_rate(residuals: &[f64]) -> f64 {
    let ratios: Vec<f64> = residuals
        .windows(2)
        .filter(|w| w[0] > RESIDUAL_FLOOR && w[1] > RESIDUAL_FLOOR)
        .map(|w| w[1] / w[0])
        .collect();
    if ratios.is_empty() {
        return 0.0;
    }
    let tail = &ratios[ratios.len() / 2..];
    (tail.iter().map(|r| r.ln()).sum::<f64>() / tail.len() as f64).exp()
}

/// Power iteration for `λ_θ` and `h_θ`, then on the transpose for `ν_θ`.
pub fn dominant_spectrum(op: &OperatorDiscretization) -> Result<SpectralResult> {
    let right = power_iteration(op.n, |g, o| op.apply(g, o), op.log_scale, "right eigenvector")?;
    let left = power_iteration(
        op.n,
        |g, o| op.apply_transpose(g, o),
        op.log_scale,
        "left eigenvector",
    )?;
    let w = trapezoid_weights(op.n);
    // left iterate is a measure; divide by the weights for its density
    let mass: f64 = left.vector.iter().sum();
    let density = left
        .vector
        .iter()
        .zip(&w)
        .map(|(u, wi)| u / (mass * wi))
        .collect();
    Ok(SpectralResult {
        lambda_theta: right.log_lambda.exp(),
        log_lambda: right.log_lambda,
        right_eigvec: right.vector,
        left_eigvec: density,
        gap_ratio: right.gap_ratio,
        n_used: op.n,
        iterations: right.iterations,
    })
}

fn log_lambda(spec: &PeriodicFunctionSpec, q: usize, theta: f64, n: usize) -> Result<(f64, f64)> {
    let op = build_operator(spec, q, theta, n)?;
    let r = power_iteration(n, |g, o| op.apply(g, o), op.log_scale, "dominant eigenvalue")?;
    Ok((r.log_lambda, r.gap_ratio))
}

/// `Λ_q(θ) = log λ_θ` with grid refinement and a central-difference derivative.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct GeometricCgfSample {
    pub theta: f64,
    pub value: f64,
    pub derivative: f64,
    pub n_used: usize,
    pub lambda: f64,
    pub gap_ratio: f64,
    /// Whether the value is the `h²` Richardson extrapolation of the last two grids.
    pub extrapolated: bool,
    /// `|θ|` exceeds [`THETA_WORKING_RANGE`].
    pub outside_working_range: bool,
}

fn richardson_h2(n1: usize, v1: f64, n2: usize, v2: f64) -> f64 {
    let h1 = 1.0 / (n1 - 1) as f64;
    let h2 = 1.0 / (n2 - 1) as f64;
    (v2 * h1 * h1 - v1 * h2 * h2) / (h1 * h1 - h2 * h2)
}

/// Whether `levels[..=k]` converge at second order when stepping `p`
/// doublings at a time (for `q = 2^j` the error can alternate with the
/// parity of the grid level, so single doublings need not be monotone).
fn second_order(levels: &[(usize, f64)], k: usize, p: usize) -> bool {
    if k < 2 * p {
        return false;
    }
    let d1 = levels[k - p].1 - levels[k - 2 * p].1;
    let d2 = levels[k].1 - levels[k - p].1;
    if d2 == 0.0 {
        return false;
    }
    let expected = 4f64.powi(p as i32);
    (0.75 * expected..=1.375 * expected).contains(&(d1 / d2))
}

fn extrapolate(levels: &[(usize, f64)], k: usize, p: usize) -> f64 {
    let (n1, v1) = levels[k - p];
    let (n2, v2) = levels[k];
    richardson_h2(n1, v1, n2, v2)
}

const MAX_PERIOD: usize = 3;

/// Doubles the interval count `N - 1` from 64 until `log λ` changes by less
/// than [`GRID_TOL`], capped at [`GRID_CAP`] intervals.
///
/// Once three grids `p` doublings apart show second-order convergence, the
/// `h²` Richardson extrapolation of the last such pair is used instead, and its
/// change between levels is accepted as the convergence measure.
pub fn cgf_geometric(spec: &PeriodicFunctionSpec, q: usize, theta: f64) -> Result<GeometricCgfSample> {
    let mut start = GRID_START;
    while start + 1 < 2 * q {
        start *= 2;
    }
    let mut levels: Vec<(usize, f64)> = Vec::new();
    let mut gap;
    let mut n = start + 1;
    // (value, coarse grid paired with n for extrapolation)
    let (value, coarse) = loop {
        let (v, g) = log_lambda(spec, q, theta, n)?;
        gap = g;
        levels.push((n, v));
        let k = levels.len() - 1;
        if k >= 1 {
            let raw_delta = (levels[k].1 - levels[k - 1].1).abs();
            let clean = (1..=MAX_PERIOD).find(|&p| second_order(&levels, k, p));
            if raw_delta < GRID_TOL {
                break match clean {
                    Some(p) => (extrapolate(&levels, k, p), Some(levels[k - p].0)),
                    None => (v, None),
                };
            }
            let settled = (1..=MAX_PERIOD).find(|&p| {
                second_order(&levels, k, p)
                    && k > p
                    && (extrapolate(&levels, k, p) - extrapolate(&levels, k - 1, p)).abs() < GRID_TOL
            });
            if let Some(p) = settled {
                break (extrapolate(&levels, k, p), Some(levels[k - p].0));
            }
            if n - 1 >= GRID_CAP {
                return Err(Error::NonConvergence {
                    what: format!("grid refinement for theta = {theta}, q = {q} at N = {n}"),
                    residual: raw_delta,
                });
            }
        }
        n = 2 * (n - 1) + 1;
    };
    let eval = |t: f64| -> Result<f64> {
        let (v2, _) = log_lambda(spec, q, t, n)?;
        match coarse {
            Some(n1) => {
                let (v1, _) = log_lambda(spec, q, t, n1)?;
                Ok(richardson_h2(n1, v1, n, v2))
            }
            None => Ok(v2),
        }
    };
    let derivative = (eval(theta + DERIVATIVE_STEP)? - eval(theta - DERIVATIVE_STEP)?)
        / (2.0 * DERIVATIVE_STEP);
    // E[e^{0·S_n}] = 1 for every n
    let value = if theta == 0.0 { 0.0 } else { value };
    Ok(GeometricCgfSample {
        theta,
        value,
        derivative,
        n_used: n,
        lambda: value.exp(),
        gap_ratio: gap,
        extrapolated: coarse.is_some(),
        outside_working_range: theta.abs() > THETA_WORKING_RANGE,
    })
}

/// `Λ_q` sampled on a θ grid, evaluated in parallel and collected in order.
pub fn cgf_geometric_curve(
    spec: &PeriodicFunctionSpec,
    q: usize,
    grid: &[f64],
) -> Result<Vec<GeometricCgfSample>> {
    if grid.is_empty() {
        return Err(Error::arg("theta grid is empty"));
    }
    grid.par_iter().map(|&t| cgf_geometric(spec, q, t)).collect()
}

/// Convergence of `r_n = E[e^{θS_n}] / λ_θ^n` for `a_k = q^k`.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct RatioLimitReport {
    pub q: usize,
    pub theta: f64,
    pub lambda: f64,
    /// `(n, r_n)` for `n = 1..=n_max`.
    pub ratios: Vec<(usize, f64)>,
    /// `Σ h w / Σ h ν w`.
    pub predicted_limit: f64,
    /// `|r_{n_max} − predicted|`.
    pub final_error: f64,
    /// `|r_{n+1} − r_n|`.
    pub successive_differences: Vec<f64>,
    /// Ratios of consecutive entries of `successive_differences`.
    pub decay_ratios: Vec<f64>,
    /// Geometric mean of the later half of `decay_ratios`.
    pub fitted_decay: f64,
    pub gap_ratio: f64,
    /// `(1/n) log E[e^{θS_n}] − log λ_θ`.
    pub scaled_cgf_gaps: Vec<(usize, f64)>,
}

pub fn ratio_limit_check(
    spec: &PeriodicFunctionSpec,
    q: usize,
    theta: f64,
    n_max: usize,
) -> Result<RatioLimitReport> {
    if n_max < 1 {
        return Err(Error::arg("n_max must be at least 1"));
    }
    let sample = cgf_geometric(spec, q, theta)?;
    let op = build_operator(spec, q, theta, sample.n_used)?;
    let spectrum = dominant_spectrum(&op)?;
    let w = trapezoid_weights(op.n);
    let hw: f64 = spectrum.right_eigvec.iter().zip(&w).map(|(h, w)| h * w).sum();
    let hnw: f64 = spectrum
        .right_eigvec
        .iter()
        .zip(&spectrum.left_eigvec)
        .zip(&w)
        .map(|((h, nu), w)| h * nu * w)
        .sum();
    let predicted_limit = hw / hnw;

    let seq = GapSequence::Geometric { q: q as u64 };
    let records = (1..=n_max)
        .map(|n| crate::empirical::exact_mgf(spec, &seq, n, theta))
        .collect::<Result<Vec<_>>>()?;
    let ratios: Vec<(usize, f64)> = records
        .iter()
        .map(|r| (r.n, (r.log_value - r.n as f64 * sample.value).exp()))
        .collect();
    let scaled_cgf_gaps = records
        .iter()
        .map(|r| (r.n, r.log_value / r.n as f64 - sample.value))
        .collect();
    let successive_differences: Vec<f64> =
        ratios.windows(2).map(|w| (w[1].1 - w[0].1).abs()).collect();
    let decay_ratios: Vec<f64> = successive_differences
        .windows(2)
        .filter(|w| w[0] > 0.0)
        .map(|w| w[1] / w[0])
        .collect();
    let fitted_decay = if decay_ratios.is_empty() {
        0.0
    } else {
        let tail = &decay_ratios[decay_ratios.len() / 2..];
        (tail.iter().map(|r| r.max(f64::MIN_POSITIVE).ln()).sum::<f64>() / tail.len() as f64).exp()
    };
    Ok(RatioLimitReport {
        q,
        theta,
        lambda: sample.lambda,
        final_error: (ratios[ratios.len() - 1].1 - predicted_limit).abs(),
        ratios,
        predicted_limit,
        successive_differences,
        decay_ratios,
        fitted_decay,
        gap_ratio: spectrum.gap_ratio,
        scaled_cgf_gaps,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::fnmodel::Builtin;

    #[test]
    fn rows_sum_to_one_at_zero_theta() {
        let op = build_operator(&PeriodicFunctionSpec::cosine(), 2, 0.0, 8).unwrap();
        let ones = vec![1.0; 8];
        let mut out = vec![0.0; 8];
        op.apply(&ones, &mut out);
        for o in out {
            assert!((o - 1.0).abs() < 1e-12);
        }
        assert!(op.to_dense().iter().flatten().all(|&x| x >= 0.0));
    }

    #[test]
    fn constant_function_scales_matrix() {
        let c = PeriodicFunctionSpec::constant(0.7);
        let a0 = build_operator(&c, 3, 0.0, 12).unwrap().to_dense();
        let a = build_operator(&c, 3, 2.0, 12).unwrap().to_dense();
        let f = (2.0f64 * 0.7).exp();
        for (r0, r) in a0.iter().zip(&a) {
            for (x0, x) in r0.iter().zip(r) {
                assert!((x - f * x0).abs() < 1e-12);
            }
        }
    }

    #[test]
    fn rejects_bad_arguments() {
        let s = PeriodicFunctionSpec::cosine();
        assert!(build_operator(&s, 1, 0.0, 64).is_err());
        assert!(build_operator(&s, 4, 0.0, 7).is_err());
    }

    #[test]
    fn zero_theta_spectrum() {
        let op = build_operator(&PeriodicFunctionSpec::cosine(), 2, 0.0, 64).unwrap();
        let s = dominant_spectrum(&op).unwrap();
        assert!(s.log_lambda.abs() < 1e-15);
        assert!(s.right_eigvec.iter().all(|&h| (h - 1.0).abs() < 1e-14));
        let dev = s.left_eigvec.iter().fold(0.0f64, |m, v| m.max((v - 1.0).abs()));
        assert!(dev < 1e-10, "{dev:e}");
    }

    #[test]
    fn large_q_cosine_matches_bessel() {
        // the branch average is a 32-point trapezoid rule for ∫e^{cos}, exact to rounding
        let s = cgf_geometric(&PeriodicFunctionSpec::cosine(), 32, 1.0).unwrap();
        assert!((s.value - 1.2660658777520082f64.ln()).abs() < 1e-9, "{}", s.value);
    }

    #[test]
    fn telescoping_has_unit_eigenvalue() {
        let s = cgf_geometric(&PeriodicFunctionSpec::Builtin(Builtin::Telescoping), 2, 1.5).unwrap();
        assert!(s.value.abs() < 1e-8, "{}", s.value);
    }
}
