//! Legendre–Fenchel transforms of convex scalar functions and sampled curves.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{CurvePoint, Error, Result};

/// Default half-width `Θ` of the working interval `[-Θ, Θ]`.
pub const DEFAULT_THETA_MAX: f64 = 50.0;
/// Target accuracy `|Λ'(θ*) - x|` of the bisection.
pub const BISECTION_TOL: f64 = 1e-10;
pub const BISECTION_MAX_ITER: usize = 200;
/// Discrete second differences above `-CONVEXITY_SLACK` count as convex.
pub const CONVEXITY_SLACK: f64 = 1e-9;
/// A derivative range narrower than this is treated as affine.
pub const AFFINE_TOL: f64 = 1e-8;

/// A convex, differentiable function of one variable.
pub trait ConvexFunction: Sync {
    fn value(&self, theta: f64) -> Result<f64>;
    fn derivative(&self, theta: f64) -> Result<f64>;
    /// Closed interval on which the function is defined.
    fn domain(&self) -> (f64, f64) {
        (f64::NEG_INFINITY, f64::INFINITY)
    }
    /// A triple of points witnessing non-convexity, if one is known.
    fn convexity_violation(&self) -> Option<[CurvePoint; 3]> {
        None
    }
}

/// Convex function given by closures for the value and derivative.
pub struct ClosureFunction<F, G> {
    pub value: F,
    pub derivative: G,
    pub domain: (f64, f64),
}

impl<F, G> ClosureFunction<F, G>
where
    F: Fn(f64) -> f64 + Sync,
    G: Fn(f64) -> f64 + Sync,
{
    pub fn new(value: F, derivative: G) -> Self {
        Self {
            value,
            derivative,
            domain: (f64::NEG_INFINITY, f64::INFINITY),
        }
    }
}

impl<F, G> ConvexFunction for ClosureFunction<F, G>
where
    F: Fn(f64) -> f64 + Sync,
    G: Fn(f64) -> f64 + Sync,
{
    fn value(&self, theta: f64) -> Result<f64> {
        Ok((self.value)(theta))
    }
    fn derivative(&self, theta: f64) -> Result<f64> {
        Ok((self.derivative)(theta))
    }
    fn domain(&self) -> (f64, f64) {
        self.domain
    }
}

/// A real function sampled on a strictly increasing grid.
///
/// Between nodes the curve is the cubic Hermite interpolant of the values and
/// node derivatives. Node derivatives are either supplied or estimated by
/// central differences with one Richardson step.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ScalarCurve {
    pub grid: Vec<f64>,
    pub values: Vec<f64>,
    pub derivatives: Vec<f64>,
    pub is_convex: bool,
    /// `(Λ'(first node), Λ'(last node))`.
    pub derivative_range: (f64, f64),
    #[serde(skip)]
    violation: Option<[CurvePoint; 3]>,
}

impl ScalarCurve {
    pub fn new(grid: Vec<f64>, values: Vec<f64>, derivatives: Option<Vec<f64>>) -> Result<Self> {
        if grid.is_empty() {
            return Err(Error::arg("curve grid is empty"));
        }
        if grid.len() != values.len() {
            return Err(Error::arg("curve grid and values differ in length"));
        }
        if grid.windows(2).any(|w| !(w[0] < w[1])) {
            return Err(Error::arg("curve grid must be strictly increasing"));
        }
        if grid.iter().chain(&values).any(|v| !v.is_finite()) {
            return Err(Error::arg("curve samples must be finite"));
        }
        let derivatives = match derivatives {
            Some(d) if d.len() == grid.len() => d,
            Some(_) => return Err(Error::arg("curve derivatives differ in length")),
            None => node_derivatives(&grid, &values),
        };
        let mut violation = None;
        let mut worst = -CONVEXITY_SLACK;
        for i in 1..grid.len().saturating_sub(1) {
            let d2 = second_difference(&grid[i - 1..=i + 1], &values[i - 1..=i + 1]);
            if d2 < worst {
                worst = d2;
                violation = Some([
                    CurvePoint { x: grid[i - 1], y: values[i - 1] },
                    CurvePoint { x: grid[i], y: values[i] },
                    CurvePoint { x: grid[i + 1], y: values[i + 1] },
                ]);
            }
        }
        let derivative_range = (derivatives[0], derivatives[derivatives.len() - 1]);
        Ok(Self {
            is_convex: violation.is_none(),
            grid,
            values,
            derivatives,
            derivative_range,
            violation,
        })
    }

    pub fn len(&self) -> usize {
        self.grid.len()
    }

    pub fn is_empty(&self) -> bool {
        self.grid.is_empty()
    }

    /// The triple with the most negative second difference, if any.
    pub fn violation(&self) -> Option<[CurvePoint; 3]> {
        self.violation
    }

    fn locate(&self, theta: f64) -> Result<usize> {
        let (lo, hi) = (self.grid[0], self.grid[self.grid.len() - 1]);
        if !(theta >= lo && theta <= hi) {
            return Err(Error::arg(format!(
                "{theta} lies outside the sampled interval [{lo}, {hi}]"
            )));
        }
        let i = self.grid.partition_point(|&g| g <= theta);
        Ok(i.saturating_sub(1).min(self.grid.len().saturating_sub(2)))
    }

    fn hermite(&self, theta: f64) -> Result<(f64, f64)> {
        if self.grid.len() == 1 {
            return if theta == self.grid[0] {
                Ok((self.values[0], self.derivatives[0]))
            } else {
                Err(Error::arg("single-point curve evaluated off its node"))
            };
        }
        let i = self.locate(theta)?;
        let h = self.grid[i + 1] - self.grid[i];
        let t = (theta - self.grid[i]) / h;
        let (y0, y1) = (self.values[i], self.values[i + 1]);
        let (m0, m1) = (self.derivatives[i] * h, self.derivatives[i + 1] * h);
        let t2 = t * t;
        let t3 = t2 * t;
        let v = (2.0 * t3 - 3.0 * t2 + 1.0) * y0
            + (t3 - 2.0 * t2 + t) * m0
            + (-2.0 * t3 + 3.0 * t2) * y1
            + (t3 - t2) * m1;
        let dv = ((6.0 * t2 - 6.0 * t) * y0
            + (3.0 * t2 - 4.0 * t + 1.0) * m0
            + (-6.0 * t2 + 6.0 * t) * y1
            + (3.0 * t2 - 2.0 * t) * m1)
            / h;
        Ok((v, dv))
    }
}

impl ConvexFunction for ScalarCurve {
    fn value(&self, theta: f64) -> Result<f64> {
        self.hermite(theta).map(|r| r.0)
    }
    fn derivative(&self, theta: f64) -> Result<f64> {
        self.hermite(theta).map(|r| r.1)
    }
    fn domain(&self) -> (f64, f64) {
        (self.grid[0], self.grid[self.grid.len() - 1])
    }
    fn convexity_violation(&self) -> Option<[CurvePoint; 3]> {
        self.violation
    }
}

/// `2·(linear interpolant at the middle node − middle value)`; equals
/// `y_{i+1} - 2y_i + y_{i-1}` on a uniform grid.
fn second_difference(x: &[f64], y: &[f64]) -> f64 {
    let w = (x[1] - x[0]) / (x[2] - x[0]);
    2.0 * ((1.0 - w) * y[0] + w * y[2] - y[1])
}

fn three_point(x: [f64; 3], y: [f64; 3], at: usize) -> f64 {
    // derivative of the quadratic through three points, at node `at`
    let (x0, x1, x2) = (x[0], x[1], x[2]);
    let xa = x[at];
    let l0 = (2.0 * xa - x1 - x2) / ((x0 - x1) * (x0 - x2));
    let l1 = (2.0 * xa - x0 - x2) / ((x1 - x0) * (x1 - x2));
    let l2 = (2.0 * xa - x0 - x1) / ((x2 - x0) * (x2 - x1));
    l0 * y[0] + l1 * y[1] + l2 * y[2]
}

/// Node derivatives of sampled data.
pub fn node_derivatives(grid: &[f64], values: &[f64]) -> Vec<f64> {
    let n = grid.len();
    if n == 1 {
        return vec![0.0];
    }
    if n == 2 {
        let s = (values[1] - values[0]) / (grid[1] - grid[0]);
        return vec![s, s];
    }
    (0..n)
        .map(|i| {
            if i == 0 {
                three_point([grid[0], grid[1], grid[2]], [values[0], values[1], values[2]], 0)
            } else if i == n - 1 {
                three_point(
                    [grid[n - 3], grid[n - 2], grid[n - 1]],
                    [values[n - 3], values[n - 2], values[n - 1]],
                    2,
                )
            } else {
                let d1 = three_point(
                    [grid[i - 1], grid[i], grid[i + 1]],
                    [values[i - 1], values[i], values[i + 1]],
                    1,
                );
                if i >= 2 && i + 2 < n {
                    let h1 = grid[i + 1] - grid[i];
                    let uniform = [grid[i] - grid[i - 1], grid[i + 2] - grid[i + 1], grid[i - 1] - grid[i - 2]]
                        .iter()
                        .all(|h| (h - h1).abs() <= 1e-12 * h1.abs());
                    if uniform {
                        let d2 = (values[i + 2] - values[i - 2]) / (4.0 * h1);
                        return (4.0 * d1 - d2) / 3.0;
                    }
                }
                d1
            }
        })
        .collect()
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum RateKind {
    /// `θ*` is interior to the working interval.
    Interior,
    /// `x` sits at `Λ'(±Θ)`; the value may underestimate the true supremum.
    Boundary,
    /// `x` lies outside the derivative range; `value` is a finite lower bound.
    Infinite,
}

/// `I(x) = sup_θ [θx − Λ(θ)]` at one point.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct RatePoint {
    pub x: f64,
    pub value: f64,
    pub theta_star: f64,
    pub kind: RateKind,
}

impl RatePoint {
    pub fn is_infinite(&self) -> bool {
        self.kind == RateKind::Infinite
    }
}

/// Legendre–Fenchel transform of `lambda` at `x`, searching `θ` in
/// `[-theta_max, theta_max]` intersected with the domain of `lambda`.
pub fn legendre_transform<F: ConvexFunction + ?Sized>(
    lambda: &F,
    x: f64,
    theta_max: f64,
) -> Result<RatePoint> {
    if let Some(triple) = lambda.convexity_violation() {
        return Err(Error::NonConvex { triple });
    }
    if !(theta_max > 0.0) || !x.is_finite() {
        return Err(Error::arg(format!(
            "transform needs theta_max > 0 and finite x (got {theta_max}, {x})"
        )));
    }
    let (dlo, dhi) = lambda.domain();
    let a = dlo.max(-theta_max);
    let b = dhi.min(theta_max);
    if !(a < b) {
        return Err(Error::arg("working interval is empty"));
    }
    let da = lambda.derivative(a)?;
    let db = lambda.derivative(b)?;
    if da > db + BISECTION_TOL {
        let m = 0.5 * (a + b);
        return Err(Error::NonConvex {
            triple: [point(lambda, a)?, point(lambda, m)?, point(lambda, b)?],
        });
    }
    let at = |theta: f64, kind: RateKind| -> Result<RatePoint> {
        Ok(RatePoint {
            x,
            value: theta * x - lambda.value(theta)?,
            theta_star: theta,
            kind,
        })
    };

    if db - da <= AFFINE_TOL {
        // affine Λ: I is finite only at the slope
        let slope = 0.5 * (da + db);
        if (x - slope).abs() <= AFFINE_TOL {
            let t = 0.0f64.clamp(a, b);
            return at(t, RateKind::Interior);
        }
        let end = if x > slope { b } else { a };
        return at(end, RateKind::Infinite);
    }
    if x < da {
        return at(a, RateKind::Infinite);
    }
    if x > db {
        return at(b, RateKind::Infinite);
    }
    if x == da {
        return at(a, RateKind::Boundary);
    }
    if x == db {
        return at(b, RateKind::Boundary);
    }

    let (mut lo, mut hi) = (a, b);
    let (mut dlo_v, mut dhi_v) = (da, db);
    let mut theta = 0.5 * (lo + hi);
    for _ in 0..BISECTION_MAX_ITER {
        theta = 0.5 * (lo + hi);
        let d = lambda.derivative(theta)?;
        if d < dlo_v - BISECTION_TOL || d > dhi_v + BISECTION_TOL {
            return Err(Error::NonConvex {
                triple: [point(lambda, lo)?, point(lambda, theta)?, point(lambda, hi)?],
            });
        }
        let g = d - x;
        if g.abs() <= BISECTION_TOL || hi - lo <= f64::EPSILON * theta.abs().max(1.0) {
            break;
        }
        if g < 0.0 {
            lo = theta;
            dlo_v = d;
        } else {
            hi = theta;
            dhi_v = d;
        }
    }
    at(theta, RateKind::Interior)
}

fn point<F: ConvexFunction + ?Sized>(f: &F, x: f64) -> Result<CurvePoint> {
    Ok(CurvePoint { x, y: f.value(x)? })
}

/// The conjugate `I = Λ*` as a function of `x`, with `I'(x) = θ*(x)`.
///
/// Its domain is the open derivative range of `Λ` on the working interval.
pub struct Conjugate<'a, F: ConvexFunction + ?Sized> {
    inner: &'a F,
    theta_max: f64,
    domain: (f64, f64),
}

impl<'a, F: ConvexFunction + ?Sized> Conjugate<'a, F> {
    pub fn new(inner: &'a F, theta_max: f64) -> Result<Self> {
        let (dlo, dhi) = inner.domain();
        let a = dlo.max(-theta_max);
        let b = dhi.min(theta_max);
        Ok(Self {
            inner,
            theta_max,
            domain: (inner.derivative(a)?, inner.derivative(b)?),
        })
    }

    fn point(&self, x: f64) -> Result<RatePoint> {
        let p = legendre_transform(self.inner, x, self.theta_max)?;
        if p.is_infinite() {
            return Err(Error::arg(format!("{x} lies outside the conjugate's domain")));
        }
        Ok(p)
    }
}

impl<F: ConvexFunction + ?Sized> ConvexFunction for Conjugate<'_, F> {
    fn value(&self, x: f64) -> Result<f64> {
        self.point(x).map(|p| p.value)
    }
    fn derivative(&self, x: f64) -> Result<f64> {
        self.point(x).map(|p| p.theta_star)
    }
    fn domain(&self) -> (f64, f64) {
        self.domain
    }
}

/// A rate function sampled on an `x` grid.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RateFunctionCurve {
    pub points: Vec<RatePoint>,
    /// `Λ'(0)`, where the rate vanishes.
    pub zero_location: f64,
}

impl RateFunctionCurve {
    pub fn x_grid(&self) -> Vec<f64> {
        self.points.iter().map(|p| p.x).collect()
    }
}

/// Pointwise transform of a sampled CGF; the curve must pass through `(0, 0)`.
pub fn gartner_ellis_rate<F: ConvexFunction + ?Sized>(
    lambda: &F,
    x_grid: &[f64],
    theta_max: f64,
) -> Result<RateFunctionCurve> {
    if let Some(triple) = lambda.convexity_violation() {
        return Err(Error::NonConvex { triple });
    }
    let (lo, hi) = lambda.domain();
    if !(lo <= 0.0 && hi >= 0.0) {
        return Err(Error::arg("CGF curve must contain θ = 0"));
    }
    let at_zero = lambda.value(0.0)?;
    if at_zero.abs() > 1e-8 {
        return Err(Error::arg(format!("CGF must vanish at θ = 0 (got {at_zero:e})")));
    }
    let zero_location = lambda.derivative(0.0)?;
    let points = x_grid
        .par_iter()
        .map(|&x| legendre_transform(lambda, x, theta_max))
        .collect::<Result<Vec<_>>>()?;
    Ok(RateFunctionCurve {
        points,
        zero_location,
    })
}
