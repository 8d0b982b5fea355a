//! Quadrature rules shared by the CGF, Fourier and moment-generating computations.

use std::cmp::Ordering;
use std::collections::BinaryHeap;
use std::f64::consts::PI;

/// Gauss–Legendre rule on `[0, 1]`.
#[derive(Debug, Clone)]
pub struct GaussLegendre {
    pub nodes: Vec<f64>,
    pub weights: Vec<f64>,
}

impl GaussLegendre {
    /// `n`-point rule, nodes by Newton iteration on `P_n` from the Chebyshev guess.
    pub fn new(n: usize) -> Self {
        assert!(n >= 1, "Gauss-Legendre rule needs at least one node");
        let mut nodes = vec![0.0; n];
        let mut weights = vec![0.0; n];
        let nf = n as f64;
        for i in 0..(n + 1) / 2 {
            let mut x = (PI * (i as f64 + 0.75) / (nf + 0.5)).cos();
            let mut dp = 0.0;
            for _ in 0..100 {
                let (p, d) = legendre_with_derivative(n, x);
                dp = d;
                let dx = p / d;
                x -= dx;
                if dx.abs() < 1e-16 {
                    break;
                }
            }
            let (_, d) = legendre_with_derivative(n, x);
            if d != 0.0 {
                dp = d;
            }
            let w = 2.0 / ((1.0 - x * x) * dp * dp);
            // map [-1, 1] -> [0, 1]
            nodes[i] = 0.5 * (1.0 - x);
            nodes[n - 1 - i] = 0.5 * (1.0 + x);
            weights[i] = 0.5 * w;
            weights[n - 1 - i] = 0.5 * w;
        }
        Self { nodes, weights }
    }

    pub fn len(&self) -> usize {
        self.nodes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.nodes.is_empty()
    }
}

fn legendre_with_derivative(n: usize, x: f64) -> (f64, f64) {
    let mut p0 = 1.0;
    let mut p1 = x;
    for k in 2..=n {
        let kf = k as f64;
        let p2 = ((2.0 * kf - 1.0) * x * p1 - (kf - 1.0) * p0) / kf;
        p0 = p1;
        p1 = p2;
    }
    let pn = if n == 0 { 1.0 } else { p1 };
    let pn1 = if n == 0 { 0.0 } else { p0 };
    let d = n as f64 * (x * pn - pn1) / (x * x - 1.0);
    (pn, d)
}

// Kronrod 15-point abscissae / weights and the embedded 7-point Gauss weights.
const XGK: [f64; 8] = [
    0.991_455_371_120_812_639_206_854_697_526_329,
    0.949_107_912_342_758_524_526_189_684_047_851,
    0.864_864_423_359_769_072_789_712_788_640_926,
    0.741_531_185_599_394_439_863_864_773_280_788,
    0.586_087_235_467_691_130_294_144_845_693_013,
    0.405_845_151_377_397_166_906_606_412_076_961,
    0.207_784_955_007_898_467_600_689_403_773_245,
    0.0,
];
const WGK: [f64; 8] = [
    0.022_935_322_010_529_224_963_732_008_058_970,
    0.063_092_092_629_978_553_290_700_663_189_204,
    0.104_790_010_322_250_183_839_876_322_541_518,
    0.140_653_259_715_525_918_745_189_590_510_238,
    0.169_004_726_639_267_902_826_583_426_598_550,
    0.190_350_578_064_785_409_913_256_402_421_014,
    0.204_432_940_075_298_892_414_161_999_234_649,
    0.209_482_141_084_727_828_012_999_174_891_714,
];
const WG: [f64; 4] = [
    0.129_484_966_168_869_693_270_611_432_679_082,
    0.279_705_391_489_276_667_901_467_771_423_780,
    0.381_830_050_505_118_944_950_369_775_488_975,
    0.417_959_183_673_469_387_755_102_040_816_327,
];

#[derive(Debug, Clone)]
struct Panel<const D: usize> {
    a: f64,
    b: f64,
    value: [f64; D],
    error: f64,
}

impl<const D: usize> PartialEq for Panel<D> {
    fn eq(&self, other: &Self) -> bool {
        self.cmp(other) == Ordering::Equal
    }
}
impl<const D: usize> Eq for Panel<D> {}
impl<const D: usize> PartialOrd for Panel<D> {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}
impl<const D: usize> Ord for Panel<D> {
    fn cmp(&self, other: &Self) -> Ordering {
        self.error
            .total_cmp(&other.error)
            .then_with(|| other.a.total_cmp(&self.a))
    }
}

fn gk15_panel<const D: usize, F>(f: &F, a: f64, b: f64) -> Panel<D>
where
    F: Fn(f64) -> [f64; D],
{
    let c = 0.5 * (a + b);
    let h = 0.5 * (b - a);
    let fc = f(c);
    let mut kron = [0.0; D];
    let mut gauss = [0.0; D];
    let mut samples = Vec::with_capacity(15);
    for d in 0..D {
        kron[d] = WGK[7] * fc[d];
        gauss[d] = WG[3] * fc[d];
    }
    samples.push(fc);
    for j in 0..7 {
        let dx = h * XGK[j];
        let f1 = f(c - dx);
        let f2 = f(c + dx);
        for d in 0..D {
            kron[d] += WGK[j] * (f1[d] + f2[d]);
            if j % 2 == 1 {
                gauss[d] += WG[j / 2] * (f1[d] + f2[d]);
            }
        }
        samples.push(f1);
        samples.push(f2);
    }
    let mut error = 0.0f64;
    let mut value = [0.0; D];
    for d in 0..D {
        value[d] = kron[d] * h;
        let mean = kron[d] * 0.5;
        // resasc: K15 estimate of ∫|f - mean| on the panel
        let mut resasc = WGK[7] * (fc[d] - mean).abs();
        for j in 0..7 {
            let f1 = samples[1 + 2 * j][d];
            let f2 = samples[2 + 2 * j][d];
            resasc += WGK[j] * ((f1 - mean).abs() + (f2 - mean).abs());
        }
        resasc *= h.abs();
        let mut err = ((kron[d] - gauss[d]) * h).abs();
        if resasc != 0.0 && err != 0.0 {
            err = resasc * (200.0 * err / resasc).powf(1.5).min(1.0);
        }
        error = error.max(err);
    }
    Panel { a, b, value, error }
}

/// Outcome of [`adaptive_gk15`].
#[derive(Debug, Clone, Copy)]
pub struct AdaptiveResult<const D: usize> {
    pub value: [f64; D],
    pub error: f64,
    pub panels: usize,
}

/// Globally adaptive Gauss–Kronrod (7/15) integration of a vector integrand.
///
/// All components share one panel set; refinement targets the panel with the
/// largest error of any component until the summed error is below `tol` or
/// `max_panels` is reached. Panel sums are accumulated in left-to-right order,
/// so results are reproducible.
pub fn adaptive_gk15<const D: usize, F>(
    f: F,
    a: f64,
    b: f64,
    tol: f64,
    initial_panels: usize,
    max_panels: usize,
) -> AdaptiveResult<D>
where
    F: Fn(f64) -> [f64; D],
{
    let initial = initial_panels.max(1);
    let width = (b - a) / initial as f64;
    let mut heap = BinaryHeap::with_capacity(initial * 2);
    let mut total_error = 0.0;
    for i in 0..initial {
        let lo = a + width * i as f64;
        let hi = if i + 1 == initial { b } else { lo + width };
        let p = gk15_panel(&f, lo, hi);
        total_error += p.error;
        heap.push(p);
    }
    while total_error > tol && heap.len() < max_panels {
        let worst = match heap.pop() {
            Some(p) => p,
            None => break,
        };
        let mid = 0.5 * (worst.a + worst.b);
        if mid <= worst.a || mid >= worst.b {
            // interval exhausted at machine precision
            heap.push(worst);
            break;
        }
        let left = gk15_panel(&f, worst.a, mid);
        let right = gk15_panel(&f, mid, worst.b);
        total_error += left.error + right.error - worst.error;
        heap.push(left);
        heap.push(right);
    }
    let mut panels = heap.into_vec();
    panels.sort_by(|p, q| p.a.total_cmp(&q.a));
    let mut value = [0.0; D];
    let mut error = 0.0;
    for p in &panels {
        for d in 0..D {
            value[d] += p.value[d];
        }
        error += p.error;
    }
    AdaptiveResult {
        value,
        error,
        panels: panels.len(),
    }
}

/// Trapezoid rule for a 1-periodic integrand over one period with `m` points.
pub fn periodic_trapezoid<F: Fn(f64) -> f64>(f: F, m: usize) -> f64 {
    let h = 1.0 / m as f64;
    pairwise_sum((0..m).map(|i| f(i as f64 * h)).collect::<Vec<_>>().as_slice()) * h
}

/// Pairwise (cascade) summation; error grows like `log n` rather than `n`.
pub fn pairwise_sum(xs: &[f64]) -> f64 {
    if xs.len() <= 32 {
        return xs.iter().sum();
    }
    let mid = xs.len() / 2;
    pairwise_sum(&xs[..mid]) + pairwise_sum(&xs[mid..])
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn gauss_legendre_integrates_polynomials_exactly() {
        let rule = GaussLegendre::new(8);
        assert_eq!(rule.len(), 8);
        let wsum: f64 = rule.weights.iter().sum();
        assert!((wsum - 1.0).abs() < 1e-15);
        // ∫_0^1 x^15 = 1/16
        let v: f64 = rule
            .nodes
            .iter()
            .zip(&rule.weights)
            .map(|(x, w)| w * x.powi(15))
            .sum();
        assert!((v - 1.0 / 16.0).abs() < 1e-15, "{v}");
        assert!(rule.nodes.windows(2).all(|w| w[0] < w[1]));
    }

    #[test]
    fn gk15_handles_peaked_integrand() {
        // ∫_0^1 exp(-1e4 (x-0.3)^2) = sqrt(pi)/100 (tails negligible)
        let r = adaptive_gk15(
            |x| [(-1e4 * (x - 0.3) * (x - 0.3)).exp()],
            0.0,
            1.0,
            1e-13,
            4,
            1 << 16,
        );
        let exact = PI.sqrt() / 100.0;
        assert!((r.value[0] - exact).abs() < 1e-13, "{:e}", r.value[0] - exact);
    }

    #[test]
    fn trapezoid_is_spectral_for_trig_polynomials() {
        let v = periodic_trapezoid(|x| (2.0 * PI * 3.0 * x).cos().powi(2), 16);
        assert!((v - 0.5).abs() < 1e-15);
    }
}
