//! Integer gap sequences `a_1 < a_2 < ...`.

use num_bigint::BigUint;
use num_integer::Integer;
use num_traits::{One, ToPrimitive, Zero};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Generator of strictly increasing positive integer sequences, indexed from 1.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "type", rename_all = "snake_case", deny_unknown_fields)]
pub enum GapSequence {
    /// `a_k = q^k`
    Geometric { q: u64 },
    /// `a_k = q^k + shift`
    ShiftedGeometric { q: u64, shift: u64 },
    Explicit { terms: Vec<u64> },
    /// `a_k = k!`
    Factorial,
    /// `a_k = base^{k²}`
    SuperExp { base: u64 },
}

impl GapSequence {
    pub fn geometric(q: u64) -> Self {
        GapSequence::Geometric { q }
    }

    pub fn explicit(terms: Vec<u64>) -> Self {
        GapSequence::Explicit { terms }
    }

    /// Checks the generator parameters.
    pub fn validate(&self) -> Result<()> {
        match self {
            GapSequence::Geometric { q } | GapSequence::ShiftedGeometric { q, .. } if *q < 2 => {
                Err(Error::config(format!("geometric ratio must be at least 2 (got {q})")))
            }
            GapSequence::SuperExp { base } if *base < 2 => {
                Err(Error::config(format!("super-exponential base must be at least 2 (got {base})")))
            }
            GapSequence::Explicit { terms } => {
                if terms.first() == Some(&0) {
                    return Err(Error::config("sequence terms must be positive"));
                }
                if terms.windows(2).any(|w| w[0] >= w[1]) {
                    return Err(Error::config("sequence terms must be strictly increasing"));
                }
                Ok(())
            }
            _ => Ok(()),
        }
    }

    /// Number of available terms (`None` when unbounded).
    pub fn available(&self) -> Option<usize> {
        match self {
            GapSequence::Explicit { terms } => Some(terms.len()),
            _ => None,
        }
    }

    /// `a_1..a_n` as exact integers.
    pub fn terms(&self, n: usize) -> Result<Vec<BigUint>> {
        self.validate()?;
        if let Some(avail) = self.available() {
            if n > avail {
                return Err(Error::arg(format!(
                    "explicit sequence has {avail} terms, {n} requested"
                )));
            }
        }
        let mut out = Vec::with_capacity(n);
        match self {
            GapSequence::Geometric { q } => {
                let mut a = BigUint::one();
                for _ in 0..n {
                    a *= *q;
                    out.push(a.clone());
                }
            }
            GapSequence::ShiftedGeometric { q, shift } => {
                let mut a = BigUint::one();
                for _ in 0..n {
                    a *= *q;
                    out.push(&a + *shift);
                }
            }
            GapSequence::Explicit { terms } => {
                out.extend(terms[..n].iter().map(|&t| BigUint::from(t)));
            }
            GapSequence::Factorial => {
                let mut a = BigUint::one();
                for k in 1..=n as u64 {
                    a *= k;
                    out.push(a.clone());
                }
            }
            GapSequence::SuperExp { base } => {
                let b = BigUint::from(*base);
                for k in 1..=n as u32 {
                    out.push(b.pow(k * k));
                }
            }
        }
        Ok(out)
    }

    /// Terms that fit in `u64`; errors otherwise.
    pub fn terms_u64(&self, n: usize) -> Result<Vec<u64>> {
        self.terms(n)?
            .iter()
            .map(|a| {
                a.to_u64()
                    .ok_or_else(|| Error::arg(format!("sequence term {a} exceeds 64 bits")))
            })
            .collect()
    }

    /// `true` for the families with `a_{k+1}/a_k → ∞`.
    pub fn is_large_gap(&self) -> bool {
        matches!(self, GapSequence::Factorial | GapSequence::SuperExp { .. })
    }

    /// Human-readable label used in reports.
    pub fn label(&self) -> String {
        match self {
            GapSequence::Geometric { q } => format!("geometric({q})"),
            GapSequence::ShiftedGeometric { q, shift } => format!("shifted_geometric({q},{shift})"),
            GapSequence::Explicit { terms } => format!("explicit({terms:?})"),
            GapSequence::Factorial => "factorial".to_string(),
            GapSequence::SuperExp { base } => format!("super_exp({base})"),
        }
    }
}

/// `min_k a_{k+1}/a_k` over the given terms (`None` for fewer than two terms).
pub fn min_ratio(terms: &[BigUint]) -> Option<f64> {
    terms
        .windows(2)
        .map(|w| ratio_f64(&w[1], &w[0]))
        .min_by(|a, b| a.total_cmp(b))
}

/// `num / den` as `f64`, accurate for arbitrarily large operands.
pub fn ratio_f64(num: &BigUint, den: &BigUint) -> f64 {
    if den.is_zero() {
        return f64::INFINITY;
    }
    let (quot, rem) = num.div_rem(den);
    let whole = quot.to_f64().unwrap_or(f64::INFINITY);
    let shift = den.bits().saturating_sub(60);
    let frac = (rem >> shift).to_f64().unwrap_or(0.0) / (den >> shift).to_f64().unwrap_or(1.0);
    whole + frac
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn geometric_ratios_are_exact() {
        let t = GapSequence::geometric(3).terms(10).unwrap();
        assert_eq!(t[0], BigUint::from(3u32));
        for w in t.windows(2) {
            assert_eq!(&w[0] * 3u32, w[1]);
        }
        assert_eq!(min_ratio(&t), Some(3.0));
    }

    #[test]
    fn factorial_ratio_diverges() {
        let t = GapSequence::Factorial.terms(30).unwrap();
        for (k, w) in t.windows(2).enumerate() {
            assert_eq!(ratio_f64(&w[1], &w[0]), (k + 2) as f64);
        }
        assert!(GapSequence::Factorial.is_large_gap());
        assert!(!GapSequence::geometric(2).is_large_gap());
    }

    #[test]
    fn shifted_and_super_exponential() {
        let t = GapSequence::ShiftedGeometric { q: 2, shift: 1 }.terms_u64(4).unwrap();
        assert_eq!(t, vec![3, 5, 9, 17]);
        let t = GapSequence::SuperExp { base: 2 }.terms(3).unwrap();
        assert_eq!(t[2], BigUint::from(512u32));
    }

    #[test]
    fn rejects_bad_sequences() {
        assert!(GapSequence::explicit(vec![4, 2]).terms(2).is_err());
        assert!(GapSequence::explicit(vec![2, 4]).terms(3).is_err());
        assert!(GapSequence::geometric(1).terms(2).is_err());
        let json = r#"{"type":"geometric","q":2,"extra":0}"#;
        assert!(serde_json::from_str::<GapSequence>(json).is_err());
    }
}
