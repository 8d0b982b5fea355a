//! 1-periodic real functions: trigonometric polynomials, named builtins and
//! their combinations, Fourier coefficients and uniform approximation.

use std::f64::consts::PI;

use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::quadrature::pairwise_sum;

/// Number of uniform points used for Fourier quadrature.
pub const FOURIER_QUADRATURE_POINTS: usize = 1 << 14;
/// Number of uniform points used for grid-based range and Lipschitz estimates.
pub const DENSE_GRID_POINTS: usize = 1 << 16;

/// Reduces `x` to `[0, 1)`.
#[inline]
pub fn frac(x: f64) -> f64 {
    let r = x - x.floor();
    if r >= 1.0 {
        0.0
    } else {
        r
    }
}

/// Real trigonometric polynomial `Σ_{|j|≤m} c_j e^{2πijx}` stored by its
/// coefficients `c_0..c_m`; `c_{-j}` is the conjugate of `c_j`.
#[derive(Debug, Clone, PartialEq)]
pub struct TrigPolynomial {
    coeffs: Vec<Complex64>,
}

impl TrigPolynomial {
    /// Builds a polynomial from `c_0..c_m`. `c_0` must be real.
    pub fn new(mut coeffs: Vec<Complex64>) -> Result<Self> {
        if coeffs.is_empty() {
            coeffs.push(Complex64::new(0.0, 0.0));
        }
        if coeffs.iter().any(|c| !c.re.is_finite() || !c.im.is_finite()) {
            return Err(Error::config("trigonometric coefficients must be finite"));
        }
        if coeffs[0].im.abs() > 1e-14 * (1.0 + coeffs[0].re.abs()) {
            return Err(Error::config(format!(
                "c_0 must be real for a real-valued polynomial (got imaginary part {})",
                coeffs[0].im
            )));
        }
        coeffs[0].im = 0.0;
        Ok(Self { coeffs })
    }

    pub(crate) fn from_real_parts(coeffs: Vec<Complex64>) -> Self {
        let mut coeffs = coeffs;
        if coeffs.is_empty() {
            coeffs.push(Complex64::new(0.0, 0.0));
        }
        coeffs[0].im = 0.0;
        Self { coeffs }
    }

    pub fn constant(c: f64) -> Self {
        Self::from_real_parts(vec![Complex64::new(c, 0.0)])
    }

    /// `cos(2πx)`.
    pub fn cosine() -> Self {
        Self::from_real_parts(vec![Complex64::new(0.0, 0.0), Complex64::new(0.5, 0.0)])
    }

    pub fn degree(&self) -> usize {
        self.coeffs.len() - 1
    }

    /// Coefficients `c_0..c_m`.
    pub fn coeffs(&self) -> &[Complex64] {
        &self.coeffs
    }

    /// `c_j` for any integer `j` (zero outside `[-m, m]`).
    pub fn coeff(&self, j: i64) -> Complex64 {
        let idx = j.unsigned_abs() as usize;
        match self.coeffs.get(idx) {
            Some(c) if j >= 0 => *c,
            Some(c) => c.conj(),
            None => Complex64::new(0.0, 0.0),
        }
    }

    pub fn evaluate(&self, x: f64) -> f64 {
        let x = frac(x);
        let mut acc = self.coeffs[0].re;
        if self.coeffs.len() > 1 {
            let step = Complex64::from_polar(1.0, 2.0 * PI * x);
            let mut rot = step;
            for (j, c) in self.coeffs.iter().enumerate().skip(1) {
                if j > 1 {
                    // re-anchor periodically to stop drift of the rotation
                    rot = if j % 16 == 0 {
                        Complex64::from_polar(1.0, 2.0 * PI * frac(j as f64 * x))
                    } else {
                        rot * step
                    };
                }
                acc += 2.0 * (c * rot).re;
            }
        }
        acc
    }

    /// Full complex sum over `j = -m..m`; the imaginary part vanishes up to rounding.
    pub fn evaluate_complex(&self, x: f64) -> Complex64 {
        let m = self.degree() as i64;
        (-m..=m)
            .map(|j| self.coeff(j) * Complex64::from_polar(1.0, 2.0 * PI * frac(j as f64 * x)))
            .sum()
    }

    /// `2π Σ_{|j|≤m} |j| |c_j|`, an upper bound for the Lipschitz constant.
    pub fn lipschitz_bound(&self) -> f64 {
        4.0 * PI
            * self
                .coeffs
                .iter()
                .enumerate()
                .map(|(j, c)| j as f64 * c.norm())
                .sum::<f64>()
    }

    /// `Σ_{|j|≤m} |c_j|`, an upper bound for the sup norm.
    pub fn sup_norm_bound(&self) -> f64 {
        self.coeffs[0].norm() + 2.0 * self.coeffs[1..].iter().map(|c| c.norm()).sum::<f64>()
    }

    /// `x ↦ p(d x)`.
    pub fn dilate(&self, d: i64) -> Self {
        if d == 0 {
            return Self::constant(self.evaluate(0.0));
        }
        let m = self.degree();
        let da = d.unsigned_abs() as usize;
        let mut out = vec![Complex64::new(0.0, 0.0); m * da + 1];
        for (j, c) in self.coeffs.iter().enumerate() {
            out[j * da] = if d > 0 { *c } else { c.conj() };
        }
        Self::from_real_parts(out)
    }

    pub fn scale(&self, c: f64) -> Self {
        Self::from_real_parts(self.coeffs.iter().map(|z| z * c).collect())
    }

    pub fn add(&self, other: &Self) -> Self {
        let n = self.coeffs.len().max(other.coeffs.len());
        let out = (0..n)
            .map(|j| {
                self.coeffs.get(j).copied().unwrap_or_default()
                    + other.coeffs.get(j).copied().unwrap_or_default()
            })
            .collect();
        Self::from_real_parts(out)
    }
}

/// Named functions with closed forms.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Builtin {
    /// `cos(2πω)`
    Cosine,
    /// `cos(2πω) + cos(4πω)`
    CosinePlusDouble,
    /// `cos(2πω) - cos(4πω)`; telescopes along `ω ↦ 2ω`.
    Telescoping,
    /// Triangle wave `4|ω - 1/2| - 1`: Lipschitz but not smooth, `|c_k| ~ k^-2`.
    Triangle,
    /// `exp(cos(2πω))`, smooth with Bessel-function Fourier coefficients.
    ExpCosine,
    Constant(f64),
}

impl Builtin {
    pub const NAMES: [&'static str; 6] = [
        "cosine",
        "cosine_plus_double",
        "telescoping",
        "triangle",
        "exp_cosine",
        "constant",
    ];

    pub fn from_name(name: &str, params: &[f64]) -> Result<Self> {
        let no_params = |b: Builtin| {
            if params.is_empty() {
                Ok(b)
            } else {
                Err(Error::config(format!("builtin '{name}' takes no parameters")))
            }
        };
        match name {
            "cosine" => no_params(Builtin::Cosine),
            "cosine_plus_double" => no_params(Builtin::CosinePlusDouble),
            "telescoping" => no_params(Builtin::Telescoping),
            "triangle" => no_params(Builtin::Triangle),
            "exp_cosine" => no_params(Builtin::ExpCosine),
            "constant" => match params {
                [c] if c.is_finite() => Ok(Builtin::Constant(*c)),
                _ => Err(Error::config("builtin 'constant' takes exactly one finite parameter")),
            },
            other => Err(Error::config(format!(
                "unknown builtin '{other}' (expected one of {})",
                Self::NAMES.join(", ")
            ))),
        }
    }

    pub fn name(&self) -> &'static str {
        match self {
            Builtin::Cosine => "cosine",
            Builtin::CosinePlusDouble => "cosine_plus_double",
            Builtin::Telescoping => "telescoping",
            Builtin::Triangle => "triangle",
            Builtin::ExpCosine => "exp_cosine",
            Builtin::Constant(_) => "constant",
        }
    }

    pub fn params(&self) -> Vec<f64> {
        match self {
            Builtin::Constant(c) => vec![*c],
            _ => Vec::new(),
        }
    }

    fn evaluate(&self, x: f64) -> f64 {
        let x = frac(x);
        match self {
            Builtin::Cosine => (2.0 * PI * x).cos(),
            Builtin::CosinePlusDouble => (2.0 * PI * x).cos() + (2.0 * PI * frac(2.0 * x)).cos(),
            Builtin::Telescoping => (2.0 * PI * x).cos() - (2.0 * PI * frac(2.0 * x)).cos(),
            Builtin::Triangle => 4.0 * (x - 0.5).abs() - 1.0,
            Builtin::ExpCosine => (2.0 * PI * x).cos().exp(),
            Builtin::Constant(c) => *c,
        }
    }

    fn trig_polynomial(&self) -> Option<TrigPolynomial> {
        let c = |v: f64| Complex64::new(v, 0.0);
        match self {
            Builtin::Cosine => Some(TrigPolynomial::cosine()),
            Builtin::CosinePlusDouble => {
                Some(TrigPolynomial::from_real_parts(vec![c(0.0), c(0.5), c(0.5)]))
            }
            Builtin::Telescoping => {
                Some(TrigPolynomial::from_real_parts(vec![c(0.0), c(0.5), c(-0.5)]))
            }
            Builtin::Constant(v) => Some(TrigPolynomial::constant(*v)),
            Builtin::Triangle | Builtin::ExpCosine => None,
        }
    }

    fn analytic_coefficient(&self, k: i64) -> Option<Complex64> {
        match self {
            Builtin::Triangle => {
                let ka = k.unsigned_abs();
                let v = if ka % 2 == 1 {
                    4.0 / (PI * PI * (ka * ka) as f64)
                } else {
                    0.0
                };
                Some(Complex64::new(v, 0.0))
            }
            Builtin::ExpCosine => None,
            _ => self.trig_polynomial().map(|p| p.coeff(k)),
        }
    }

    fn lipschitz_bound(&self) -> f64 {
        match self {
            Builtin::Cosine => 2.0 * PI,
            Builtin::CosinePlusDouble | Builtin::Telescoping => 6.0 * PI,
            Builtin::Triangle => 4.0,
            Builtin::ExpCosine => 2.0 * PI * std::f64::consts::E,
            Builtin::Constant(_) => 0.0,
        }
    }

    fn range(&self) -> Option<(f64, f64)> {
        match self {
            Builtin::Cosine | Builtin::Triangle => Some((-1.0, 1.0)),
            // min of cos t + cos 2t is at cos t = -1/4
            Builtin::CosinePlusDouble => Some((-1.125, 2.0)),
            // cos t - cos 2t peaks at cos t = 1/4, bottoms out at t = π
            Builtin::Telescoping => Some((-2.0, 1.125)),
            Builtin::ExpCosine => Some(((-1.0f64).exp(), 1.0f64.exp())),
            Builtin::Constant(c) => Some((*c, *c)),
        }
    }
}

/// Declarative description of a continuous 1-periodic real function.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "SpecRepr", into = "SpecRepr")]
pub enum PeriodicFunctionSpec {
    TrigPoly(TrigPolynomial),
    Builtin(Builtin),
    /// `c · inner`
    Scaled { c: f64, inner: Box<PeriodicFunctionSpec> },
    /// `Σ g_i(d_i ω)` over `(d_i, g_i)`.
    SumOfDilates(Vec<(i64, PeriodicFunctionSpec)>),
}

impl PeriodicFunctionSpec {
    pub fn cosine() -> Self {
        Self::Builtin(Builtin::Cosine)
    }

    pub fn constant(c: f64) -> Self {
        Self::Builtin(Builtin::Constant(c))
    }

    /// Parses the JSON function document (`{"type": "builtin", "name": "cosine"}`, ...).
    pub fn from_json(text: &str) -> Result<Self> {
        serde_json::from_str(text).map_err(|e| Error::config(format!("function spec: {e}")))
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string(self).expect("function specs always serialize")
    }

    /// `f(x mod 1)`.
    pub fn evaluate(&self, x: f64) -> f64 {
        match self {
            Self::TrigPoly(p) => p.evaluate(x),
            Self::Builtin(b) => b.evaluate(x),
            Self::Scaled { c, inner } => c * inner.evaluate(x),
            Self::SumOfDilates(terms) => {
                let x = frac(x);
                terms
                    .iter()
                    .map(|(d, g)| g.evaluate(frac(*d as f64 * x)))
                    .sum()
            }
        }
    }

    /// Exact trigonometric-polynomial form, when the function has one.
    pub fn to_trig_polynomial(&self) -> Option<TrigPolynomial> {
        match self {
            Self::TrigPoly(p) => Some(p.clone()),
            Self::Builtin(b) => b.trig_polynomial(),
            Self::Scaled { c, inner } => inner.to_trig_polynomial().map(|p| p.scale(*c)),
            Self::SumOfDilates(terms) => {
                let mut acc = TrigPolynomial::constant(0.0);
                for (d, g) in terms {
                    acc = acc.add(&g.to_trig_polynomial()?.dilate(*d));
                }
                Some(acc)
            }
        }
    }

    /// Closed-form Fourier coefficient `c_k`, when available.
    pub fn analytic_coefficient(&self, k: i64) -> Option<Complex64> {
        match self {
            Self::TrigPoly(p) => Some(p.coeff(k)),
            Self::Builtin(b) => b.analytic_coefficient(k),
            Self::Scaled { c, inner } => inner.analytic_coefficient(k).map(|z| z * c),
            Self::SumOfDilates(terms) => {
                let mut acc = Complex64::new(0.0, 0.0);
                for (d, g) in terms {
                    if *d == 0 {
                        if k == 0 {
                            acc += g.evaluate(0.0);
                        }
                        // still require the inner function to be analytic
                        g.analytic_coefficient(0)?;
                    } else if k % d == 0 {
                        acc += g.analytic_coefficient(k / d)?;
                    } else {
                        g.analytic_coefficient(0)?;
                    }
                }
                Some(acc)
            }
        }
    }

    /// Upper bound for the Lipschitz constant, from the structure of the function.
    pub fn lipschitz_bound(&self) -> f64 {
        match self {
            Self::TrigPoly(p) => p.lipschitz_bound(),
            Self::Builtin(b) => b.lipschitz_bound(),
            Self::Scaled { c, inner } => c.abs() * inner.lipschitz_bound(),
            Self::SumOfDilates(terms) => terms
                .iter()
                .map(|(d, g)| d.unsigned_abs() as f64 * g.lipschitz_bound())
                .sum(),
        }
    }

    /// `(min f, max f)`: exact for builtins, otherwise a dense-grid estimate.
    pub fn value_range(&self) -> (f64, f64) {
        match self {
            Self::Builtin(b) => b.range().expect("every builtin has a known range"),
            Self::Scaled { c, inner } if *c >= 0.0 => {
                let (lo, hi) = inner.value_range();
                (c * lo, c * hi)
            }
            Self::Scaled { c, inner } => {
                let (lo, hi) = inner.value_range();
                (c * hi, c * lo)
            }
            _ => {
                let n = DENSE_GRID_POINTS;
                (0..n).fold((f64::INFINITY, f64::NEG_INFINITY), |(lo, hi), i| {
                    let v = self.evaluate(i as f64 / n as f64);
                    (lo.min(v), hi.max(v))
                })
            }
        }
    }

    /// `max |f|`.
    pub fn sup_norm(&self) -> f64 {
        let (lo, hi) = self.value_range();
        lo.abs().max(hi.abs())
    }
}

/// Dense-grid Lipschitz estimate with the slack that grid spacing can hide.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LipschitzEstimate {
    /// Largest difference quotient over neighbouring grid points.
    pub estimate: f64,
    /// Largest change of the difference quotient between neighbouring cells.
    pub slack: f64,
}

pub fn lipschitz_grid_estimate(spec: &PeriodicFunctionSpec) -> LipschitzEstimate {
    let n = DENSE_GRID_POINTS;
    let h = 1.0 / n as f64;
    let vals: Vec<f64> = (0..=n).map(|i| spec.evaluate(i as f64 * h)).collect();
    let slopes: Vec<f64> = vals.windows(2).map(|w| (w[1] - w[0]) / h).collect();
    let estimate = slopes.iter().fold(0.0f64, |m, s| m.max(s.abs()));
    let mut slack = 0.0f64;
    for i in 0..slopes.len() {
        let next = slopes[(i + 1) % slopes.len()];
        slack = slack.max((next - slopes[i]).abs());
    }
    LipschitzEstimate { estimate, slack }
}

/// Fitted decay `|c_k| ≤ M |k|^{-β}`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct DecayFit {
    pub m: f64,
    pub beta: f64,
}

/// Fourier coefficients `c_k`, `|k| ≤ K`, stored for `k ≥ 0`.
#[derive(Debug, Clone, PartialEq)]
pub struct FourierCoefficients {
    coeffs: Vec<Complex64>,
    pub decay: Option<DecayFit>,
}

impl FourierCoefficients {
    pub fn new(coeffs: Vec<Complex64>) -> Self {
        Self {
            coeffs,
            decay: None,
        }
    }

    pub fn max_index(&self) -> usize {
        self.coeffs.len() - 1
    }

    pub fn get(&self, k: i64) -> Complex64 {
        let idx = k.unsigned_abs() as usize;
        match self.coeffs.get(idx) {
            Some(c) if k >= 0 => *c,
            Some(c) => c.conj(),
            None => Complex64::new(0.0, 0.0),
        }
    }

    /// Coefficients for `k = 0..=K`.
    pub fn non_negative(&self) -> &[Complex64] {
        &self.coeffs
    }

    /// `Σ_{|k|≤K} |c_k|²`.
    pub fn energy(&self) -> f64 {
        self.coeffs[0].norm_sqr() + 2.0 * self.coeffs[1..].iter().map(|c| c.norm_sqr()).sum::<f64>()
    }

    /// Least-squares fit of `log|c_k|` against `log k` over the non-negligible
    /// coefficients, with `M` raised so that the bound holds at every `k`.
    pub fn fit_decay(&self) -> Option<DecayFit> {
        let pts: Vec<(f64, f64)> = self
            .coeffs
            .iter()
            .enumerate()
            .skip(1)
            .filter(|(_, c)| c.norm() > 1e-13)
            .map(|(k, c)| ((k as f64).ln(), c.norm().ln()))
            .collect();
        if pts.len() < 2 {
            return None;
        }
        let n = pts.len() as f64;
        let mx = pts.iter().map(|p| p.0).sum::<f64>() / n;
        let my = pts.iter().map(|p| p.1).sum::<f64>() / n;
        let sxx: f64 = pts.iter().map(|p| (p.0 - mx).powi(2)).sum();
        if sxx == 0.0 {
            return None;
        }
        let sxy: f64 = pts.iter().map(|p| (p.0 - mx) * (p.1 - my)).sum();
        let beta = -sxy / sxx;
        let m = self
            .coeffs
            .iter()
            .enumerate()
            .skip(1)
            .map(|(k, c)| c.norm() * (k as f64).powf(beta))
            .fold(0.0f64, f64::max);
        Some(DecayFit { m, beta })
    }

    pub fn with_decay_fit(mut self) -> Self {
        self.decay = self.fit_decay();
        self
    }
}

/// `c_k = ∫_0^1 f(ω) e^{-2πikω} dω` for `|k| ≤ K`.
///
/// Trigonometric polynomials and builtins with closed-form coefficients pass
/// through exactly; everything else uses the periodic trapezoid rule on
/// [`FOURIER_QUADRATURE_POINTS`] points.
pub fn fourier_coefficients(spec: &PeriodicFunctionSpec, k_max: usize) -> FourierCoefficients {
    if let Some(p) = spec.to_trig_polynomial() {
        return FourierCoefficients::new((0..=k_max as i64).map(|k| p.coeff(k)).collect());
    }
    if let Some(c) = (0..=k_max as i64)
        .map(|k| spec.analytic_coefficient(k))
        .collect::<Option<Vec<_>>>()
    {
        return FourierCoefficients::new(c);
    }
    let m = FOURIER_QUADRATURE_POINTS;
    let samples: Vec<f64> = (0..m).map(|i| spec.evaluate(i as f64 / m as f64)).collect();
    let table: Vec<(f64, f64)> = (0..m)
        .map(|i| {
            let a = 2.0 * PI * i as f64 / m as f64;
            (a.cos(), a.sin())
        })
        .collect();
    let mut coeffs = Vec::with_capacity(k_max + 1);
    let mut re = vec![0.0; m];
    let mut im = vec![0.0; m];
    for k in 0..=k_max {
        for i in 0..m {
            let (c, s) = table[(k * i) % m];
            re[i] = samples[i] * c;
            im[i] = -samples[i] * s;
        }
        let mut z = Complex64::new(pairwise_sum(&re) / m as f64, pairwise_sum(&im) / m as f64);
        if k == 0 {
            z.im = 0.0;
        }
        coeffs.push(z);
    }
    FourierCoefficients::new(coeffs)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum TruncationMode {
    PartialSum,
    Fejer,
}

/// Degree-`m` partial Fourier sum or Fejér mean of `spec`.
pub fn truncate_fourier(
    spec: &PeriodicFunctionSpec,
    m: usize,
    mode: TruncationMode,
) -> TrigPolynomial {
    let c = fourier_coefficients(spec, m);
    let coeffs = c
        .non_negative()
        .iter()
        .enumerate()
        .map(|(j, z)| match mode {
            TruncationMode::PartialSum => *z,
            TruncationMode::Fejer => z * (1.0 - j as f64 / (m as f64 + 1.0)),
        })
        .collect();
    TrigPolynomial::from_real_parts(coeffs)
}

/// Result of [`check_fourier_decay`]; indices are positive (`c_{-k}` mirrors `c_k`).
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct DecayCheck {
    pub holds: bool,
    /// Smallest `k` with `|c_k| > M k^{-β}`.
    pub first_violation: Option<i64>,
    /// `k` maximising `|c_k| / (M k^{-β})` among violations.
    pub worst_violation: Option<i64>,
}

/// Checks `|c_k| ≤ M |k|^{-β}` for every computed `k ≠ 0`.
pub fn check_fourier_decay(coeffs: &FourierCoefficients, m: f64, beta: f64) -> Result<DecayCheck> {
    if !(beta > 1.0) || !(m > 0.0) {
        return Err(Error::arg(format!(
            "decay check needs beta > 1 and M > 0 (got beta = {beta}, M = {m})"
        )));
    }
    let mut first = None;
    let mut worst: Option<(i64, f64)> = None;
    for (k, c) in coeffs.non_negative().iter().enumerate().skip(1) {
        let bound = m * (k as f64).powf(-beta);
        // relative slack absorbs rounding in fitted bounds
        if c.norm() > bound * (1.0 + 1e-12) {
            let ratio = c.norm() / bound;
            first.get_or_insert(k as i64);
            if worst.map_or(true, |(_, r)| ratio > r) {
                worst = Some((k as i64, ratio));
            }
        }
    }
    Ok(DecayCheck {
        holds: first.is_none(),
        first_violation: first,
        worst_violation: worst.map(|w| w.0),
    })
}

// JSON representation

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(tag = "type", rename_all = "snake_case", deny_unknown_fields)]
enum SpecRepr {
    Trigpoly {
        coeffs: Vec<[f64; 2]>,
    },
    Builtin {
        name: String,
        #[serde(default, skip_serializing_if = "Vec::is_empty")]
        params: Vec<f64>,
    },
    Scaled {
        c: f64,
        inner: Box<SpecRepr>,
    },
    SumOfDilates {
        terms: Vec<(i64, SpecRepr)>,
    },
}

impl TryFrom<SpecRepr> for PeriodicFunctionSpec {
    type Error = Error;

    fn try_from(r: SpecRepr) -> Result<Self> {
        Ok(match r {
            SpecRepr::Trigpoly { coeffs } => PeriodicFunctionSpec::TrigPoly(TrigPolynomial::new(
                coeffs.into_iter().map(|[re, im]| Complex64::new(re, im)).collect(),
            )?),
            SpecRepr::Builtin { name, params } => {
                PeriodicFunctionSpec::Builtin(Builtin::from_name(&name, &params)?)
            }
            SpecRepr::Scaled { c, inner } => {
                if !c.is_finite() {
                    return Err(Error::config("scale factor must be finite"));
                }
                PeriodicFunctionSpec::Scaled {
                    c,
                    inner: Box::new(PeriodicFunctionSpec::try_from(*inner)?),
                }
            }
            SpecRepr::SumOfDilates { terms } => {
                if terms.is_empty() {
                    return Err(Error::config("sum_of_dilates needs at least one term"));
                }
                PeriodicFunctionSpec::SumOfDilates(
                    terms
                        .into_iter()
                        .map(|(d, g)| Ok((d, PeriodicFunctionSpec::try_from(g)?)))
                        .collect::<Result<_>>()?,
                )
            }
        })
    }
}

impl From<PeriodicFunctionSpec> for SpecRepr {
    fn from(s: PeriodicFunctionSpec) -> Self {
        match s {
            PeriodicFunctionSpec::TrigPoly(p) => SpecRepr::Trigpoly {
                coeffs: p.coeffs.iter().map(|c| [c.re, c.im]).collect(),
            },
            PeriodicFunctionSpec::Builtin(b) => SpecRepr::Builtin {
                name: b.name().to_string(),
                params: b.params(),
            },
            PeriodicFunctionSpec::Scaled { c, inner } => SpecRepr::Scaled {
                c,
                inner: Box::new((*inner).into()),
            },
            PeriodicFunctionSpec::SumOfDilates(terms) => SpecRepr::SumOfDilates {
                terms: terms.into_iter().map(|(d, g)| (d, g.into())).collect(),
            },
        }
    }
}
