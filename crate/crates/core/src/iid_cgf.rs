//! The i.i.d. cumulant generating function `Λ̃(θ) = log ∫_0^1 e^{θ f(ω)} dω`.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::fnmodel::PeriodicFunctionSpec;
use crate::legendre::{ConvexFunction, ScalarCurve};
use crate::quadrature::adaptive_gk15;

pub const QUADRATURE_TOL: f64 = 1e-12;
pub const MAX_PANELS: usize = 1 << 20;
const INITIAL_PANELS: usize = 16;
const SHIFT_GRID: usize = 4096;

/// `Λ̃(θ)` with its first two derivatives.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CgfSample {
    pub theta: f64,
    pub value: f64,
    pub derivative: f64,
    /// Variance of `f` under the tilted density `e^{θf - Λ̃(θ)}`.
    pub second_derivative: f64,
}

/// Evaluates `Λ̃` and its derivatives at `theta`.
///
/// The three integrals `∫e^{θf}`, `∫f e^{θf}`, `∫f² e^{θf}` share one adaptive
/// panel set. The exponent is shifted by a grid maximum of `θf` so the
/// integrands stay `O(1)` for large `|θ|`.
pub fn cgf_iid(spec: &PeriodicFunctionSpec, theta: f64) -> CgfSample {
    if theta == 0.0 {
        let r = adaptive_gk15(
            |w| {
                let v = spec.evaluate(w);
                [v, v * v]
            },
            0.0,
            1.0,
            QUADRATURE_TOL,
            INITIAL_PANELS,
            MAX_PANELS,
        );
        let mean = r.value[0];
        return CgfSample {
            theta,
            value: 0.0,
            derivative: mean,
            second_derivative: (r.value[1] - mean * mean).max(0.0),
        };
    }
    let shift = (0..=SHIFT_GRID)
        .map(|i| theta * spec.evaluate(i as f64 / SHIFT_GRID as f64))
        .fold(f64::NEG_INFINITY, f64::max);
    // the integrand is ≤ e^{small} after the shift, so absolute and relative tolerance coincide
    let r = adaptive_gk15(
        |w| {
            let v = spec.evaluate(w);
            let e = (theta * v - shift).exp();
            [e, v * e, v * v * e]
        },
        0.0,
        1.0,
        QUADRATURE_TOL,
        INITIAL_PANELS,
        MAX_PANELS,
    );
    let [z, z1, z2] = r.value;
    let mean = z1 / z;
    CgfSample {
        theta,
        value: shift + z.ln(),
        derivative: mean,
        second_derivative: (z2 / z - mean * mean).max(0.0),
    }
}

/// `Λ̃` evaluated directly by quadrature, for Legendre transforms without sampling.
#[derive(Debug, Clone, Copy)]
pub struct IidCgf<'a>(pub &'a PeriodicFunctionSpec);

impl ConvexFunction for IidCgf<'_> {
    fn value(&self, theta: f64) -> Result<f64> {
        Ok(cgf_iid(self.0, theta).value)
    }
    fn derivative(&self, theta: f64) -> Result<f64> {
        Ok(cgf_iid(self.0, theta).derivative)
    }
}

/// Default θ grid `[-8, 8]` with step `0.125`.
pub fn default_theta_grid() -> Vec<f64> {
    (0..=128).map(|i| -8.0 + 0.125 * i as f64).collect()
}

/// `Λ̃` sampled on `grid` (evaluated in parallel, collected in grid order).
pub fn cgf_curve(spec: &PeriodicFunctionSpec, grid: &[f64]) -> Result<ScalarCurve> {
    if grid.is_empty() {
        return Err(Error::arg("theta grid is empty"));
    }
    let samples: Vec<CgfSample> = grid.par_iter().map(|&t| cgf_iid(spec, t)).collect();
    ScalarCurve::new(
        grid.to_vec(),
        samples.iter().map(|s| s.value).collect(),
        Some(samples.iter().map(|s| s.derivative).collect()),
    )
}
