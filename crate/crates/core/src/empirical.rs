//! Direct evaluation of `E[e^{θS_n}]` and tail probabilities of
//! `S_n(ω) = Σ_{k=1}^n f(a_k ω)`.

use num_bigint::BigUint;
use num_traits::{ToPrimitive, Zero};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::fnmodel::PeriodicFunctionSpec;
use crate::quadrature::{pairwise_sum, GaussLegendre};
use crate::sequence::GapSequence;

/// Default seed of every Monte-Carlo routine.
pub const DEFAULT_SEED: u64 = 0x1AC0;
/// Upper bound on the number of quadrature panels, `8·a_n`.
pub const PANEL_BUDGET: u64 = 1 << 22;
pub const PANELS_PER_PERIOD: u64 = 8;
const GL_NODES: usize = 8;
const PANEL_CHUNK: u64 = 4096;
const MC_BATCH: usize = 1 << 16;
const WILSON_Z: f64 = 1.959_963_984_540_054;

/// A sequence term, kept exact.
#[derive(Debug, Clone, PartialEq, Eq)]
enum Term {
    Small(u64),
    Big(BigUint),
}

/// `a_1..a_n` prepared for evaluating `S_n` with exact argument reduction.
#[derive(Debug, Clone)]
pub struct LacunaryTerms {
    terms: Vec<Term>,
}

impl LacunaryTerms {
    pub fn new(seq: &GapSequence, n: usize) -> Result<Self> {
        if n < 1 {
            return Err(Error::arg("n must be at least 1"));
        }
        let terms = seq
            .terms(n)?
            .into_iter()
            .map(|a| match a.to_u64() {
                Some(s) => Term::Small(s),
                None => Term::Big(a),
            })
            .collect();
        Ok(Self { terms })
    }

    pub fn len(&self) -> usize {
        self.terms.len()
    }

    pub fn is_empty(&self) -> bool {
        self.terms.is_empty()
    }

    /// `S_n(ω)`, reducing each `a_k ω` modulo 1 exactly.
    pub fn sum(&self, spec: &PeriodicFunctionSpec, omega: f64) -> f64 {
        let reduced = ExactOmega::new(omega);
        self.terms.iter().map(|a| spec.evaluate(reduced.times(a))).sum()
    }
}

/// `ω = M · 2^{-E}` as an exact dyadic rational.
struct ExactOmega {
    mantissa: u64,
    exp: u32,
    integral: bool,
}

impl ExactOmega {
    fn new(omega: f64) -> Self {
        let omega = omega - omega.floor();
        if omega == 0.0 {
            return Self { mantissa: 0, exp: 0, integral: true };
        }
        let bits = omega.to_bits();
        let raw_exp = ((bits >> 52) & 0x7ff) as i64;
        let (mut m, mut e) = if raw_exp == 0 {
            (bits & ((1 << 52) - 1), 1074i64)
        } else {
            ((bits & ((1 << 52) - 1)) | (1 << 52), 1075 - raw_exp)
        };
        let tz = m.trailing_zeros() as i64;
        let shift = tz.min(e);
        m >>= shift;
        e -= shift;
        Self { mantissa: m, exp: e as u32, integral: e <= 0 }
    }

    /// `a·ω mod 1`.
    fn times(&self, a: &Term) -> f64 {
        if self.integral {
            return 0.0;
        }
        let e = self.exp;
        if e <= 64 {
            let modulus_mask: u128 = if e == 64 { u64::MAX as u128 } else { (1u128 << e) - 1 };
            let a_mod: u128 = match a {
                Term::Small(s) => *s as u128 & modulus_mask,
                Term::Big(b) => {
                    let low = b.iter_u64_digits().next().unwrap_or(0);
                    low as u128 & modulus_mask
                }
            };
            let r = (a_mod * self.mantissa as u128) & modulus_mask;
            return r as f64 * (-(e as f64)).exp2();
        }
        let modulus = BigUint::from(1u8) << e;
        let a_big = match a {
            Term::Small(s) => BigUint::from(*s),
            Term::Big(b) => b.clone(),
        };
        let r = (a_big * self.mantissa) % &modulus;
        if r.is_zero() {
            return 0.0;
        }
        // scale to 60 significant bits before converting
        let bits = r.bits();
        let drop = bits.saturating_sub(60);
        let top = (r >> drop).to_f64().unwrap_or(0.0);
        top * (drop as f64 - e as f64).exp2()
    }
}

/// `Σ_{k=1}^n f(a_k ω)`.
pub fn lacunary_sum(spec: &PeriodicFunctionSpec, seq: &GapSequence, n: usize, omega: f64) -> Result<f64> {
    Ok(LacunaryTerms::new(seq, n)?.sum(spec, omega))
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum MgfMethod {
    ExactQuadrature,
    MonteCarlo,
}

/// One evaluation of `E[e^{θS_n}]`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct MgfRecord {
    pub n: usize,
    pub theta: f64,
    pub value: f64,
    /// `log E[e^{θS_n}]`, finite even where `value` overflows.
    pub log_value: f64,
    pub method: MgfMethod,
    pub error_estimate: f64,
}

/// Running `log Σ e^{x_i}` as `(max, Σ e^{x_i - max})`.
#[derive(Debug, Clone, Copy)]
struct LogSum {
    max: f64,
    sum: f64,
}

impl LogSum {
    const EMPTY: LogSum = LogSum { max: f64::NEG_INFINITY, sum: 0.0 };

    fn merge(self, other: LogSum) -> LogSum {
        if other.sum == 0.0 {
            return self;
        }
        if self.sum == 0.0 {
            return other;
        }
        if self.max >= other.max {
            LogSum { max: self.max, sum: self.sum + other.sum * (other.max - self.max).exp() }
        } else {
            LogSum { max: other.max, sum: other.sum + self.sum * (self.max - other.max).exp() }
        }
    }

    fn from_weighted(xs: &[(f64, f64)]) -> LogSum {
        let max = xs.iter().map(|p| p.0).fold(f64::NEG_INFINITY, f64::max);
        let terms: Vec<f64> = xs.iter().map(|(x, w)| w * (x - max).exp()).collect();
        LogSum { max, sum: pairwise_sum(&terms) }
    }

    /// Merges in a balanced tree so rounding grows like `log` of the count.
    fn merge_all(parts: &[LogSum]) -> LogSum {
        match parts.len() {
            0 => LogSum::EMPTY,
            1 => parts[0],
            len => LogSum::merge_all(&parts[..len / 2]).merge(LogSum::merge_all(&parts[len / 2..])),
        }
    }

    fn log(&self) -> f64 {
        self.max + self.sum.ln()
    }
}

/// Largest `n` with `8·a_n` within the panel budget.
fn max_feasible_n(seq: &GapSequence, per_period: u64) -> usize {
    let limit = seq.available().unwrap_or(usize::MAX).min(4096);
    let mut n = 0;
    while n < limit {
        match seq.terms(n + 1) {
            Ok(t) => match t[n].to_u64() {
                Some(a) if a.checked_mul(per_period).is_some_and(|p| p <= PANEL_BUDGET) => n += 1,
                _ => break,
            },
            Err(_) => break,
        }
    }
    n
}

fn log_mgf_quadrature(
    spec: &PeriodicFunctionSpec,
    terms: &[u64],
    theta: f64,
    per_period: u64,
    rule: &GaussLegendre,
) -> f64 {
    let panels = per_period * terms[terms.len() - 1];
    let chunks = panels.div_ceil(PANEL_CHUNK);
    let parts: Vec<LogSum> = (0..chunks)
        .into_par_iter()
        .map(|c| {
            let mut buf = Vec::with_capacity((PANEL_CHUNK as usize) * rule.len());
            for p in c * PANEL_CHUNK..((c + 1) * PANEL_CHUNK).min(panels) {
                for (t, w) in rule.nodes.iter().zip(&rule.weights) {
                    // ω = (p + t)/P, so a ω = (a p mod P)/P + a t/P exactly up to the final rounding
                    let s: f64 = terms
                        .iter()
                        .map(|&a| {
                            let whole = ((a as u128 * p as u128) % panels as u128) as f64;
                            spec.evaluate((whole + a as f64 * t) / panels as f64)
                        })
                        .sum();
                    buf.push((theta * s, *w));
                }
            }
            LogSum::from_weighted(&buf)
        })
        .collect();
    LogSum::merge_all(&parts).log() - (panels as f64).ln()
}

/// `E[e^{θS_n}]` by composite 8-node Gauss–Legendre quadrature with
/// `per_period` panels per period of the fastest term; the error estimate is
/// the difference to the run with half as many panels.
pub fn exact_mgf_with(
    spec: &PeriodicFunctionSpec,
    seq: &GapSequence,
    n: usize,
    theta: f64,
    per_period: u64,
) -> Result<MgfRecord> {
    if n < 1 {
        return Err(Error::arg("n must be at least 1"));
    }
    if per_period < 2 {
        return Err(Error::arg("need at least two panels per period"));
    }
    let big = seq.terms(n)?;
    let fits = big[n - 1]
        .to_u64()
        .and_then(|a| a.checked_mul(per_period))
        .is_some_and(|p| p <= PANEL_BUDGET);
    if !fits {
        return Err(Error::Budget {
            message: format!(
                "{per_period}·a_n exceeds the panel budget 2^22 for {} at n = {n}",
                seq.label()
            ),
            max_feasible_n: max_feasible_n(seq, per_period),
        });
    }
    let terms: Vec<u64> = big.iter().map(|a| a.to_u64().unwrap_or(u64::MAX)).collect();
    let rule = GaussLegendre::new(GL_NODES);
    let fine = log_mgf_quadrature(spec, &terms, theta, per_period, &rule);
    let coarse = log_mgf_quadrature(spec, &terms, theta, per_period / 2, &rule);
    let value = fine.exp();
    Ok(MgfRecord {
        n,
        theta,
        value,
        log_value: fine,
        method: MgfMethod::ExactQuadrature,
        error_estimate: (value - coarse.exp()).abs(),
    })
}

/// [`exact_mgf_with`] at the default 8 panels per period.
pub fn exact_mgf(spec: &PeriodicFunctionSpec, seq: &GapSequence, n: usize, theta: f64) -> Result<MgfRecord> {
    exact_mgf_with(spec, seq, n, theta, PANELS_PER_PERIOD)
}

fn uniforms(seed: u64, batch: usize, len: usize) -> impl Iterator<Item = f64> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(batch as u64);
    (0..len).map(move |_| rng.gen::<f64>())
}

fn batches(samples: usize) -> impl ParallelIterator<Item = (usize, usize)> {
    let count = samples.div_ceil(MC_BATCH);
    (0..count)
        .into_par_iter()
        .map(move |b| (b, MC_BATCH.min(samples - b * MC_BATCH)))
}

/// Monte-Carlo mean of `e^{θS_n(U)}`; batch `b` draws from ChaCha8 stream `b`
/// of `seed`, so results depend only on `(seed, samples)`.
pub fn mc_mgf(
    spec: &PeriodicFunctionSpec,
    seq: &GapSequence,
    n: usize,
    theta: f64,
    samples: usize,
    seed: u64,
) -> Result<MgfRecord> {
    if samples < 1 {
        return Err(Error::arg("need at least one sample"));
    }
    let terms = LacunaryTerms::new(seq, n)?;
    let parts: Vec<(LogSum, LogSum)> = batches(samples)
        .map(|(b, len)| {
            let xs: Vec<f64> = uniforms(seed, b, len).map(|u| theta * terms.sum(spec, u)).collect();
            let first: Vec<(f64, f64)> = xs.iter().map(|&x| (x, 1.0)).collect();
            let second: Vec<(f64, f64)> = xs.iter().map(|&x| (2.0 * x, 1.0)).collect();
            (LogSum::from_weighted(&first), LogSum::from_weighted(&second))
        })
        .collect();
    let (s1, s2) = parts
        .into_iter()
        .fold((LogSum::EMPTY, LogSum::EMPTY), |(a1, a2), (b1, b2)| (a1.merge(b1), a2.merge(b2)));
    let nf = samples as f64;
    let log_mean = s1.log() - nf.ln();
    // variance relative to mean², computed in the scaled domain
    let rel_second = (s2.log() - nf.ln() - 2.0 * log_mean).exp();
    let rel_var = if samples > 1 {
        ((rel_second - 1.0) * nf / (nf - 1.0)).max(0.0)
    } else {
        0.0
    };
    let value = log_mean.exp();
    Ok(MgfRecord {
        n,
        theta,
        value,
        log_value: log_mean,
        method: MgfMethod::MonteCarlo,
        error_estimate: value * (rel_var / nf).sqrt(),
    })
}

/// `(1/n) log E[e^{θS_n}]` along a list of `n`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ScaledCgfSequence {
    pub theta: f64,
    /// `(n, (1/n) log E[e^{θS_n}])`.
    pub values: Vec<(usize, f64)>,
    /// `c_0` of the least-squares fit `c_0 + c_1/n` on the last three points.
    pub extrapolated: Option<f64>,
    /// Largest residual of that fit.
    pub fit_residual: Option<f64>,
}

/// How [`scaled_cgf_sequence`] evaluates each moment generating function.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum MgfEvaluation {
    Exact,
    MonteCarlo { samples: usize, seed: u64 },
}

pub fn scaled_cgf_sequence(
    spec: &PeriodicFunctionSpec,
    seq: &GapSequence,
    theta: f64,
    n_list: &[usize],
    how: MgfEvaluation,
) -> Result<ScaledCgfSequence> {
    if n_list.is_empty() {
        return Err(Error::arg("n list is empty"));
    }
    let values = n_list
        .iter()
        .map(|&n| {
            let r = match how {
                MgfEvaluation::Exact => exact_mgf(spec, seq, n, theta)?,
                MgfEvaluation::MonteCarlo { samples, seed } => mc_mgf(spec, seq, n, theta, samples, seed)?,
            };
            Ok((n, r.log_value / n as f64))
        })
        .collect::<Result<Vec<_>>>()?;
    let (extrapolated, fit_residual) = match fit_inverse_n(&values) {
        Some((c0, res)) => (Some(c0), Some(res)),
        None => (None, None),
    };
    Ok(ScaledCgfSequence { theta, values, extrapolated, fit_residual })
}

/// Least-squares `c_0 + c_1/n` through the last three points.
fn fit_inverse_n(values: &[(usize, f64)]) -> Option<(f64, f64)> {
    if values.len() < 3 {
        return None;
    }
    let pts = &values[values.len() - 3..];
    let xs: Vec<f64> = pts.iter().map(|p| 1.0 / p.0 as f64).collect();
    let ys: Vec<f64> = pts.iter().map(|p| p.1).collect();
    let mx = xs.iter().sum::<f64>() / 3.0;
    let my = ys.iter().sum::<f64>() / 3.0;
    let sxx: f64 = xs.iter().map(|x| (x - mx).powi(2)).sum();
    if sxx == 0.0 {
        return None;
    }
    let sxy: f64 = xs.iter().zip(&ys).map(|(x, y)| (x - mx) * (y - my)).sum();
    let c1 = sxy / sxx;
    let c0 = my - c1 * mx;
    let res = xs
        .iter()
        .zip(&ys)
        .map(|(x, y)| (y - c0 - c1 * x).abs())
        .fold(0.0f64, f64::max);
    Some((c0, res))
}

/// Monte-Carlo estimate of `P[S_n/n ≥ t]`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TailEstimate {
    pub n: usize,
    pub t: f64,
    pub samples: usize,
    pub hits: usize,
    /// `hits/samples`; `None` when there were no hits.
    pub probability: Option<f64>,
    /// 95% Wilson score interval.
    pub interval: (f64, f64),
    /// `-(1/n) log p̂` when `p̂ > 0`.
    pub rate_estimate: Option<f64>,
    /// With no hits: `-(1/n) log` of the interval's upper end, a lower bound for the rate.
    pub rate_lower_bound: Option<f64>,
}

pub fn tail_probability(
    spec: &PeriodicFunctionSpec,
    seq: &GapSequence,
    n: usize,
    t: f64,
    samples: usize,
    seed: u64,
) -> Result<TailEstimate> {
    if samples < 1 {
        return Err(Error::arg("need at least one sample"));
    }
    let terms = LacunaryTerms::new(seq, n)?;
    let threshold = t * n as f64;
    let hits: usize = batches(samples)
        .map(|(b, len)| uniforms(seed, b, len).filter(|&u| terms.sum(spec, u) >= threshold).count())
        .sum();
    let nf = samples as f64;
    let p = hits as f64 / nf;
    let z2 = WILSON_Z * WILSON_Z;
    let centre = (p + z2 / (2.0 * nf)) / (1.0 + z2 / nf);
    let half = WILSON_Z * (p * (1.0 - p) / nf + z2 / (4.0 * nf * nf)).sqrt() / (1.0 + z2 / nf);
    let interval = ((centre - half).max(0.0), (centre + half).min(1.0));
    let (probability, rate_estimate, rate_lower_bound) = if hits == 0 {
        (None, None, Some(-interval.1.ln() / n as f64))
    } else {
        (Some(p), Some(-p.ln() / n as f64), None)
    };
    Ok(TailEstimate { n, t, samples, hits, probability, interval, rate_estimate, rate_lower_bound })
}

/// Exact moment generating functions of two sequences side by side.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct MgfComparison {
    pub first: MgfRecord,
    pub second: MgfRecord,
    pub difference: f64,
    pub relative_difference: f64,
}

pub fn compare_exact_mgf(
    spec: &PeriodicFunctionSpec,
    first: &GapSequence,
    second: &GapSequence,
    n: usize,
    theta: f64,
) -> Result<MgfComparison> {
    let a = exact_mgf(spec, first, n, theta)?;
    let b = exact_mgf(spec, second, n, theta)?;
    Ok(MgfComparison {
        first: a,
        second: b,
        difference: a.value - b.value,
        relative_difference: (a.value - b.value) / b.value,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn exact_reduction_handles_huge_terms() {
        // a = 3^40 at ω = 1/3 + tiny dyadic offset: compare with exact BigUint arithmetic
        let omega = 0.3125; // 5/16
        let t = ExactOmega::new(omega);
        let a = BigUint::from(3u32).pow(40);
        let expected = ((&a * 5u32) % 16u32).to_f64().unwrap() / 16.0;
        assert_eq!(t.times(&Term::Big(a)), expected);
        let t = ExactOmega::new(1e-30);
        let r = t.times(&Term::Small(1 << 40));
        assert!((r - 1e-30 * (1u64 << 40) as f64).abs() < 1e-30);
    }

    #[test]
    fn zero_theta_mgf_is_one() {
        let seq = GapSequence::geometric(2);
        let r = exact_mgf(&PeriodicFunctionSpec::cosine(), &seq, 6, 0.0).unwrap();
        assert!((r.value - 1.0).abs() < 1e-13);
        let r = mc_mgf(&PeriodicFunctionSpec::cosine(), &seq, 6, 0.0, 1000, DEFAULT_SEED).unwrap();
        assert_eq!(r.value, 1.0);
    }

    #[test]
    fn budget_error_names_max_n() {
        let err = exact_mgf(&PeriodicFunctionSpec::cosine(), &GapSequence::geometric(2), 20, 1.0).unwrap_err();
        match err {
            Error::Budget { max_feasible_n, .. } => assert_eq!(max_feasible_n, 19),
            other => panic!("unexpected {other}"),
        }
    }

    #[test]
    fn inverse_n_fit_is_exact_on_model() {
        let v: Vec<(usize, f64)> = (4..=8).map(|n| (n, 0.3 + 0.7 / n as f64)).collect();
        let (c0, res) = fit_inverse_n(&v).unwrap();
        assert!((c0 - 0.3).abs() < 1e-14 && res < 1e-14);
    }

    #[test]
    fn monte_carlo_is_reproducible() {
        let seq = GapSequence::geometric(3);
        let spec = PeriodicFunctionSpec::cosine();
        let a = mc_mgf(&spec, &seq, 5, 0.5, 70_000, 7).unwrap();
        let b = mc_mgf(&spec, &seq, 5, 0.5, 70_000, 7).unwrap();
        assert_eq!(a.value.to_bits(), b.value.to_bits());
        let c = mc_mgf(&spec, &seq, 5, 0.5, 70_000, 8).unwrap();
        assert_ne!(a.value.to_bits(), c.value.to_bits());
    }
}
