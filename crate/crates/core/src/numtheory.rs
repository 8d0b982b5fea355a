//! Exact counting of `Σ j_k a_k = 0` with bounded `j_k`, the gap condition
//! `a_{k+1}/a_k ≥ md+1`, and the product identity
//! `∫ Π_{k>k_0} p_d(θ f(a_k ω)) dω = b_0(θ,d)^{n-k_0}` for trigonometric `f`.

use std::collections::{BTreeMap, HashMap};
use std::hash::Hash;

use num_bigint::{BigInt, BigUint};
use num_complex::Complex64;
use num_traits::{Signed, ToPrimitive, Zero};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::fnmodel::TrigPolynomial;

/// Maximum number of stored partial sums in the meet-in-the-middle table.
pub const STATE_BUDGET: usize = 1 << 24;
/// Maximum number of enumeration nodes visited per top-level branch of the streamed half.
pub const NODE_BUDGET: u64 = 1 << 30;
/// Maximum number of Fourier modes kept in the product convolution.
pub const MODE_BUDGET: usize = 1 << 22;

/// Integer type usable as a partial-sum key.
trait Key: Signed + Ord + Hash + Clone + Send + Sync + From<i64> {
    fn from_bigint(b: &BigInt) -> Option<Self>;
}

impl Key for i128 {
    fn from_bigint(b: &BigInt) -> Option<Self> {
        b.to_i128()
    }
}

impl Key for BigInt {
    fn from_bigint(b: &BigInt) -> Option<Self> {
        Some(b.clone())
    }
}

/// Number of tuples `(j_1..j_n) ∈ [-m, m]^n` with `Σ j_k a_k = 0`.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct SolutionCount {
    pub n: usize,
    pub m: u64,
    /// The terms counted over, as decimal strings.
    pub sequence: Vec<String>,
    pub total: u128,
    pub nontrivial: u128,
}

/// Largest `n` with `(2m+1)^{⌈n/2⌉}` within [`STATE_BUDGET`].
pub fn max_nominal_n(m: u64) -> usize {
    let base = 2 * m as u128 + 1;
    let mut half = 0u32;
    while base.pow(half + 1) <= STATE_BUDGET as u128 {
        half += 1;
    }
    2 * half as usize
}

/// Counts solutions over `sequence`, or over the 1-based inclusive
/// `window = (k_start, k_end)` of it.
///
/// Meet in the middle: partial sums of the larger half are tabulated, the
/// smaller half is streamed against the table. Both enumerations discard
/// branches whose sum can no longer be cancelled by the remaining terms.
pub fn count_solutions(
    sequence: &[BigUint],
    m: u64,
    window: Option<(usize, usize)>,
) -> Result<SolutionCount> {
    if m < 1 {
        return Err(Error::arg("coefficient bound m must be at least 1"));
    }
    if m > i64::MAX as u64 / 2 {
        return Err(Error::arg("coefficient bound too large"));
    }
    let terms: &[BigUint] = match window {
        None => sequence,
        Some((a, b)) => {
            if a < 1 || b > sequence.len() || a > b + 1 {
                return Err(Error::arg(format!(
                    "window ({a}, {b}) is not inside 1..={}",
                    sequence.len()
                )));
            }
            &sequence[a - 1..b]
        }
    };
    let signed: Vec<BigInt> = terms.iter().map(|t| BigInt::from(t.clone())).collect();
    let bound: BigInt = signed.iter().sum::<BigInt>() * BigInt::from(m);
    // i128 suffices when every partial sum is far from overflow
    let total = if bound.bits() < 120 {
        let t: Vec<i128> = signed.iter().map(|b| i128::from_bigint(b).expect("fits")).collect();
        count_mitm(&t, m as i64)?
    } else {
        count_mitm(&signed, m as i64)?
    };
    Ok(SolutionCount {
        n: terms.len(),
        m,
        sequence: terms.iter().map(|t| t.to_string()).collect(),
        total,
        nontrivial: total - 1,
    })
}

/// Depth-first enumeration of `s + Σ_{t≥i} j_t a_t` keeping only branches
/// that can still land in `[lo, hi]`.
#[allow(clippy::too_many_arguments)]
fn dfs<T: Key, F: FnMut(&T) -> Result<()>>(
    terms: &[T],
    reach: &[T],
    i: usize,
    s: T,
    lo: &T,
    hi: &T,
    m: i64,
    nodes: &mut u64,
    visit: &mut F,
) -> Result<()> {
    *nodes += 1;
    if *nodes > NODE_BUDGET {
        return Err(Error::Budget {
            message: "enumeration visited too many partial sums".into(),
            max_feasible_n: 0,
        });
    }
    if i == terms.len() {
        return visit(&s);
    }
    for j in -m..=m {
        let next = s.clone() + terms[i].clone() * T::from(j);
        let r = &reach[i + 1];
        if next.clone() + r.clone() < *lo || next.clone() - r.clone() > *hi {
            continue;
        }
        dfs(terms, reach, i + 1, next, lo, hi, m, nodes, visit)?;
    }
    Ok(())
}

/// `reach[i] = m Σ_{t≥i} |a_t|`.
fn reach<T: Key>(terms: &[T], m: i64) -> Vec<T> {
    let mut r = vec![T::zero(); terms.len() + 1];
    for i in (0..terms.len()).rev() {
        r[i] = r[i + 1].clone() + terms[i].abs() * T::from(m);
    }
    r
}

fn count_mitm<T: Key>(terms: &[T], m: i64) -> Result<u128> {
    let n = terms.len();
    if n == 0 {
        return Ok(1);
    }
    let mut sorted = terms.to_vec();
    sorted.sort_by(|a, b| b.abs().cmp(&a.abs()));
    // tabulate the ⌈n/2⌉ largest terms
    let split = n.div_ceil(2);
    let (high, low) = sorted.split_at(split);
    let low_reach = reach(low, m);
    let high_reach = reach(high, m);
    let slack = low_reach[0].clone();

    let mut table: HashMap<T, u128> = HashMap::new();
    let mut nodes = 0u64;
    let budget_err = || Error::Budget {
        message: format!(
            "more than 2^24 partial sums to store for n = {n}, m = {m}"
        ),
        max_feasible_n: max_nominal_n(m as u64),
    };
    let neg_slack = -slack.clone();
    dfs(high, &high_reach, 0, T::zero(), &neg_slack, &slack, m, &mut nodes, &mut |s: &T| {
        *table.entry(s.clone()).or_insert(0) += 1;
        if table.len() > STATE_BUDGET {
            return Err(budget_err());
        }
        Ok(())
    })
    .map_err(|e| match e {
        Error::Budget { .. } => budget_err(),
        other => other,
    })?;
    if table.is_empty() {
        return Ok(0);
    }
    let kmin = table.keys().min().cloned().expect("non-empty");
    let kmax = table.keys().max().cloned().expect("non-empty");
    let (lo, hi) = (-kmax, -kmin);
    if low.is_empty() {
        return Ok(table.get(&T::zero()).copied().unwrap_or(0));
    }
    // stream the smaller half, split across the first coordinate
    let counts = (-m..=m)
        .into_par_iter()
        .map(|j| {
            let first = low[0].clone() * T::from(j);
            if first.clone() + low_reach[1].clone() < lo || first.clone() - low_reach[1].clone() > hi {
                return Ok(0u128);
            }
            let mut found = 0u128;
            let mut nodes = 0u64;
            dfs(low, &low_reach, 1, first, &lo, &hi, m, &mut nodes, &mut |s: &T| {
                if let Some(c) = table.get(&-s.clone()) {
                    found += c;
                }
                Ok(())
            })
            .map_err(|e| match e {
                Error::Budget { .. } => Error::Budget {
                    message: format!("streamed enumeration too large for n = {n}, m = {m}"),
                    max_feasible_n: max_nominal_n(m as u64),
                },
                other => other,
            })?;
            Ok(found)
        })
        .collect::<Result<Vec<u128>>>()?;
    Ok(counts.iter().sum())
}

/// Outcome of [`verify_gap_condition`].
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct GapCondition {
    /// Smallest `k_0` with `a_{k+1} ≥ (md+1) a_k` for all `k ≥ k_0` in range;
    /// `None` when the last available ratio already fails.
    pub k0: Option<usize>,
    /// No nontrivial solution with `|j_k| ≤ dm` over `a_{k_0+1}..a_n`.
    pub certified: bool,
    /// `min_ℓ (a_ℓ − dm Σ_{k_0<k<ℓ} a_k) > 0` over the window.
    pub lower_bound_ok: bool,
}

pub fn verify_gap_condition(sequence: &[BigUint], m: u64, d: u64) -> Result<GapCondition> {
    let n = sequence.len();
    let factor = m
        .checked_mul(d)
        .and_then(|x| x.checked_add(1))
        .ok_or_else(|| Error::arg("m·d + 1 overflows"))?;
    if sequence.windows(2).any(|w| w[0] >= w[1]) {
        return Err(Error::arg("sequence must be strictly increasing"));
    }
    let last_fail = (1..n)
        .rev()
        .find(|&k| sequence[k] < &sequence[k - 1] * factor);
    let k0 = match last_fail {
        None => Some(0),
        Some(k) if k == n - 1 => None,
        // ratio index k (1-based) is a_{k+1}/a_k; the condition then holds from k+1
        Some(k) => Some(k + 1),
    };
    let Some(k0) = k0 else {
        return Ok(GapCondition { k0: None, certified: false, lower_bound_ok: false });
    };
    let dm = m * d;
    let certified = if dm == 0 || k0 >= n {
        true
    } else {
        count_solutions(sequence, dm, Some((k0 + 1, n)))?.nontrivial == 0
    };
    let lower_bound_ok = extremal_lower_bound(&sequence[k0.min(n)..], dm).is_positive();
    Ok(GapCondition { k0: Some(k0), certified, lower_bound_ok })
}

/// `min_ℓ (a_ℓ − dm Σ_{k<ℓ} a_k)` over the given terms (positive when empty).
pub fn extremal_lower_bound(terms: &[BigUint], dm: u64) -> BigInt {
    let mut prefix = BigInt::zero();
    let mut min: Option<BigInt> = None;
    for a in terms {
        let a = BigInt::from(a.clone());
        let v = &a - &prefix * BigInt::from(dm);
        if min.as_ref().is_none_or(|mm| v < *mm) {
            min = Some(v);
        }
        prefix += a;
    }
    min.unwrap_or_else(|| BigInt::from(1))
}

/// Coefficients `b_j(θ,d)` of `p_d(θ f) = Σ_{i≤d} (θf)^i / i!` for `j = -dm..=dm`.
pub fn pd_coefficients(trig: &TrigPolynomial, theta: f64, d: u32) -> BTreeMap<i64, Complex64> {
    let m = trig.degree() as i64;
    let base: BTreeMap<i64, Complex64> = (-m..=m)
        .map(|j| (j, trig.coeff(j)))
        .filter(|(_, c)| *c != Complex64::zero())
        .collect();
    let mut out: BTreeMap<i64, Complex64> = BTreeMap::new();
    out.insert(0, Complex64::new(1.0, 0.0));
    let mut power: BTreeMap<i64, Complex64> = BTreeMap::from([(0, Complex64::new(1.0, 0.0))]);
    let mut scale = 1.0;
    for i in 1..=d {
        power = convolve(&power, &base);
        scale *= theta / i as f64;
        for (j, c) in &power {
            *out.entry(*j).or_insert_with(Complex64::zero) += c * scale;
        }
    }
    out
}

fn convolve<K: Ord + Clone + std::ops::Add<Output = K>>(
    a: &BTreeMap<K, Complex64>,
    b: &BTreeMap<K, Complex64>,
) -> BTreeMap<K, Complex64> {
    let mut out = BTreeMap::new();
    for (ka, ca) in a {
        for (kb, cb) in b {
            *out.entry(ka.clone() + kb.clone()).or_insert_with(Complex64::zero) += ca * cb;
        }
    }
    out
}

/// `b_0(θ,d) = Σ_{i≤d} θ^i/i! c_0^{(i)}` with `c^{(i)}` the coefficients of `f^i`.
pub fn b0_coefficient(trig: &TrigPolynomial, theta: f64, d: u32) -> f64 {
    pd_coefficients(trig, theta, d)
        .get(&0)
        .map_or(0.0, |c| c.re)
}

/// Both sides of the product identity.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ProductIntegral {
    /// Zero-frequency coefficient of `Π_{k_0<k≤n} p_d(θ f(a_k ω))`.
    pub lhs: f64,
    /// `b_0(θ,d)^{n-k_0}`.
    pub rhs: f64,
    pub b0: f64,
    pub modes: usize,
}

/// Evaluates `∫ Π_{k=k_0+1}^n p_d(θ f(a_k ω)) dω` by sparse Fourier convolution
/// keyed by exact integer frequency, and `b_0^{n-k_0}`.
///
/// Frequencies are exact; coefficient values are `f64`. Refuses to run unless
/// the gap condition certifies `k_0` for `a_1..a_n`.
pub fn product_integral_exact(
    trig: &TrigPolynomial,
    sequence: &[BigUint],
    theta: f64,
    d: u32,
    k0: usize,
    n: usize,
) -> Result<ProductIntegral> {
    if n > sequence.len() || k0 > n {
        return Err(Error::arg(format!(
            "need k0 ≤ n ≤ {} (got k0 = {k0}, n = {n})",
            sequence.len()
        )));
    }
    let m = trig.degree() as u64;
    let gap = verify_gap_condition(&sequence[..n], m, d as u64)?;
    match gap.k0 {
        Some(k) if k <= k0 && gap.certified => {}
        Some(k) => {
            return Err(Error::Uncertified(format!(
                "gap condition with md+1 = {} holds from k0 = {k} (requested {k0}, certified = {})",
                m * d as u64 + 1,
                gap.certified
            )))
        }
        None => {
            return Err(Error::Uncertified(format!(
                "ratio md+1 = {} is not reached at the end of the sequence",
                m * d as u64 + 1
            )))
        }
    }
    let factor = pd_coefficients(trig, theta, d);
    let b0 = factor.get(&0).map_or(0.0, |c| c.re);
    let window: Vec<BigInt> = sequence[k0..n].iter().map(|a| BigInt::from(a.clone())).collect();
    let freq_bound: BigInt = window.iter().sum::<BigInt>() * BigInt::from(d as u64 * m);
    let (lhs, modes) = if freq_bound.bits() < 120 {
        let w: Vec<i128> = window.iter().map(|a| a.to_i128().expect("fits")).collect();
        product_zero_mode(&factor, &w)?
    } else {
        product_zero_mode(&factor, &window)?
    };
    Ok(ProductIntegral {
        lhs,
        rhs: b0.powi((n - k0) as i32),
        b0,
        modes,
    })
}

fn product_zero_mode<T: Key>(factor: &BTreeMap<i64, Complex64>, window: &[T]) -> Result<(f64, usize)> {
    let mut acc: BTreeMap<T, Complex64> = BTreeMap::from([(T::zero(), Complex64::new(1.0, 0.0))]);
    for a in window {
        let dilated: BTreeMap<T, Complex64> = factor
            .iter()
            .map(|(j, c)| (a.clone() * T::from(*j), *c))
            .collect();
        if acc.len().saturating_mul(dilated.len()) > MODE_BUDGET * 4 {
            return Err(Error::Budget {
                message: "product convolution exceeds the mode budget".into(),
                max_feasible_n: 0,
            });
        }
        acc = convolve(&acc, &dilated);
        if acc.len() > MODE_BUDGET {
            return Err(Error::Budget {
                message: format!("product support exceeds 2^22 modes ({})", acc.len()),
                max_feasible_n: 0,
            });
        }
    }
    let modes = acc.len();
    Ok((acc.get(&T::zero()).map_or(0.0, |c| c.re), modes))
}

/// `b_0(θ,d)` along `d_list` against `∫ e^{θf}`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct B0Limit {
    pub target: f64,
    /// `(d, b_0(θ,d), |b_0 − target|)`.
    pub values: Vec<(u32, f64, f64)>,
    /// Whether the gaps are non-increasing from some index on to the end.
    pub eventually_monotone: bool,
}

pub fn b0_limit_check(trig: &TrigPolynomial, theta: f64, d_list: &[u32]) -> Result<B0Limit> {
    if d_list.windows(2).any(|w| w[0] >= w[1]) {
        return Err(Error::arg("d list must be strictly increasing"));
    }
    let spec = crate::fnmodel::PeriodicFunctionSpec::TrigPoly(trig.clone());
    let target = crate::iid_cgf::cgf_iid(&spec, theta).value.exp();
    let values: Vec<(u32, f64, f64)> = d_list
        .iter()
        .map(|&d| {
            let b = b0_coefficient(trig, theta, d);
            (d, b, (b - target).abs())
        })
        .collect();
    // decreasing over the second half, allowing for the rounding floor
    let tail = &values[values.len() / 2..];
    let eventually_monotone = tail
        .windows(2)
        .all(|w| w[1].2 <= w[0].2 || w[1].2 < 1e-14 * target.abs().max(1.0));
    Ok(B0Limit { target, values, eventually_monotone })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::sequence::GapSequence;

    fn big(v: &[u64]) -> Vec<BigUint> {
        v.iter().map(|&x| BigUint::from(x)).collect()
    }

    #[test]
    fn small_counts() {
        assert_eq!(count_solutions(&big(&[2, 4]), 1, None).unwrap().total, 1);
        assert_eq!(count_solutions(&big(&[2, 4]), 2, None).unwrap().total, 3);
        // j_1 + 2 j_2 + 3 j_3 = 0: zero, ±(1, 1, -1)
        assert_eq!(count_solutions(&big(&[1, 2, 3]), 1, None).unwrap().total, 3);
    }

    #[test]
    fn gap_condition_examples() {
        let g5 = GapSequence::geometric(5).terms(10).unwrap();
        let r = verify_gap_condition(&g5, 1, 3).unwrap();
        assert_eq!(r.k0, Some(0));
        assert!(r.certified && r.lower_bound_ok);

        let g2 = GapSequence::geometric(2).terms(10).unwrap();
        assert_eq!(verify_gap_condition(&g2, 1, 3).unwrap().k0, None);

        let fac = GapSequence::Factorial.terms(20).unwrap();
        let r = verify_gap_condition(&fac, 2, 2).unwrap();
        assert_eq!(r.k0, Some(4));
        assert!(r.certified && r.lower_bound_ok);
    }

    #[test]
    fn product_identity_small_case() {
        let seq = GapSequence::geometric(5).terms(4).unwrap();
        let r = product_integral_exact(&TrigPolynomial::cosine(), &seq, 1.0, 3, 0, 4).unwrap();
        assert!((r.lhs - r.rhs).abs() < 1e-12, "{} vs {}", r.lhs, r.rhs);
        // p_3 of cos at θ = 1: 1 + 0 + 1/4 + 0
        assert!((r.b0 - 1.25).abs() < 1e-15);
    }

    #[test]
    fn refuses_uncertified_k0() {
        let seq = GapSequence::geometric(2).terms(4).unwrap();
        let err = product_integral_exact(&TrigPolynomial::cosine(), &seq, 1.0, 3, 0, 4).unwrap_err();
        assert!(matches!(err, Error::Uncertified(_)));
    }

    #[test]
    fn d_zero_is_trivial() {
        let seq = GapSequence::geometric(2).terms(5).unwrap();
        let r = product_integral_exact(&TrigPolynomial::cosine(), &seq, 1.0, 0, 0, 5).unwrap();
        assert_eq!((r.lhs, r.rhs), (1.0, 1.0));
    }

    #[test]
    fn huge_terms_use_big_integers() {
        let seq = GapSequence::SuperExp { base: 2 }.terms(12).unwrap();
        let r = count_solutions(&seq, 3, None).unwrap();
        assert_eq!(r.total, 1);
    }
}
