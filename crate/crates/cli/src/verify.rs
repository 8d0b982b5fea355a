//! The named regression checks behind `lacldp verify`.

use lacunary_ldp::empirical::{compare_exact_mgf, exact_mgf, mc_mgf, scaled_cgf_sequence, MgfEvaluation};
use lacunary_ldp::iid_cgf::{cgf_iid, default_theta_grid, IidCgf};
use lacunary_ldp::legendre::{gartner_ellis_rate, legendre_transform, Conjugate, ScalarCurve, DEFAULT_THETA_MAX};
use lacunary_ldp::numtheory::{count_solutions, product_integral_exact, verify_gap_condition};
use lacunary_ldp::transfer_op::{cgf_geometric, cgf_geometric_curve, ratio_limit_check};
use lacunary_ldp::{Builtin, GapSequence, PeriodicFunctionSpec, TrigPolynomial};
use num_bigint::BigUint;
use serde_json::{json, Value};

use crate::commands::{jnum, rate_distance};
use crate::config::range_grid;

pub struct Check {
    pub name: &'static str,
    pub passed: bool,
    pub details: Value,
}

pub struct Report {
    pub seed: u64,
    pub checks: Vec<Check>,
}

impl Report {
    pub fn failed(&self) -> Vec<String> {
        self.checks.iter().filter(|c| !c.passed).map(|c| c.name.to_string()).collect()
    }

    pub fn to_json(&self) -> Value {
        json!({
            "seed": self.seed,
            "all_passed": self.checks.iter().all(|c| c.passed),
            "checks": self.checks.iter().map(|c| json!({
                "name": c.name,
                "passed": c.passed,
                "details": c.details,
            })).collect::<Vec<_>>(),
        })
    }
}

type CheckResult = Result<(bool, Value), lacunary_ldp::Error>;

fn cos() -> PeriodicFunctionSpec {
    PeriodicFunctionSpec::cosine()
}

/// `Λ_2''(0) = 1/2` for the cosine (the dilates are uncorrelated) while
/// `Λ_2(1)` sits well above `log I_0(1)`.
fn example1_variance() -> CheckResult {
    let h = 0.01;
    let l = |t: f64| cgf_geometric(&cos(), 2, t).map(|s| s.value);
    let second = (l(h)? - 2.0 * l(0.0)? + l(-h)?) / (h * h);
    let at_one = l(1.0)?;
    let iid = cgf_iid(&cos(), 1.0).value;
    let passed = (second - 0.5).abs() < 1e-3 && at_one - iid > 0.1;
    Ok((passed, json!({
        "second_difference_at_0": jnum(second),
        "lambda_2_at_1": jnum(at_one),
        "iid_at_1": jnum(iid),
    })))
}

fn example2_scaling() -> CheckResult {
    let f = PeriodicFunctionSpec::Builtin(Builtin::CosinePlusDouble);
    let mut worst = 0.0f64;
    let mut rows = Vec::new();
    for theta in [0.5, 1.0, 2.0] {
        let a = cgf_geometric(&f, 2, theta)?.value;
        let b = cgf_geometric(&cos(), 2, 2.0 * theta)?.value;
        worst = worst.max((a - b).abs());
        rows.push(json!({"theta": theta, "lhs": jnum(a), "rhs": jnum(b)}));
    }
    Ok((worst < 1e-6, json!({"max_difference": jnum(worst), "rows": rows})))
}

fn example3_telescoping() -> CheckResult {
    let f = PeriodicFunctionSpec::Builtin(Builtin::Telescoping);
    let mut worst = 0.0f64;
    for theta in [-2.0, -1.0, 1.0, 2.0] {
        worst = worst.max(cgf_geometric(&f, 2, theta)?.value.abs());
    }
    Ok((worst < 1e-7, json!({"max_abs_log_lambda": jnum(worst)})))
}

/// Reported, not asserted equal.
fn example4_shifted_sequence() -> CheckResult {
    let f = PeriodicFunctionSpec::Builtin(Builtin::CosinePlusDouble);
    let c = compare_exact_mgf(
        &f,
        &GapSequence::Geometric { q: 2 },
        &GapSequence::ShiftedGeometric { q: 2, shift: 1 },
        6,
        1.0,
    )?;
    let passed = c.first.value.is_finite() && c.second.value.is_finite() && c.first.value > 0.0 && c.second.value > 0.0;
    Ok((passed, json!({
        "n": 6,
        "theta": 1.0,
        "geometric": jnum(c.first.value),
        "geometric_error_estimate": jnum(c.first.error_estimate),
        "shifted_geometric": jnum(c.second.value),
        "shifted_geometric_error_estimate": jnum(c.second.error_estimate),
        "difference": jnum(c.difference),
        "relative_difference": jnum(c.relative_difference),
    })))
}

fn lemma1_identity() -> CheckResult {
    let terms = GapSequence::Geometric { q: 5 }.terms(4)?;
    let gap = verify_gap_condition(&terms, 1, 3)?;
    let counts = count_solutions(&terms, 3, None)?;
    let r = product_integral_exact(&TrigPolynomial::cosine(), &terms, 1.0, 3, gap.k0.unwrap_or(0), 4)?;
    let err = (r.lhs - r.rhs).abs();
    let passed = err < 1e-12 && gap.k0 == Some(0) && gap.certified && counts.nontrivial == 0;
    Ok((passed, json!({
        "integral": jnum(r.lhs),
        "b0_power": jnum(r.rhs),
        "abs_difference": jnum(err),
        "k0": gap.k0,
        "nontrivial_solutions": counts.nontrivial.to_string(),
    })))
}

fn ratio_limit() -> CheckResult {
    let r = ratio_limit_check(&cos(), 2, 1.0, 14)?;
    let passed = r.fitted_decay < 1.0 && r.final_error < 1e-5 && r.gap_ratio < 1.0;
    Ok((passed, json!({
        "predicted_limit": jnum(r.predicted_limit),
        "final_error": jnum(r.final_error),
        "fitted_decay": jnum(r.fitted_decay),
        "gap_ratio": jnum(r.gap_ratio),
    })))
}

/// `n |(1/n) log E[e^{θS_n}] − log λ_θ|` stays within twice its `n = 8` value.
fn oracle_equivalence() -> CheckResult {
    let mut passed = true;
    let mut rows = Vec::new();
    for theta in [-1.0, -0.5, 0.5, 1.0] {
        let r = ratio_limit_check(&cos(), 2, theta, 14)?;
        let scaled: Vec<f64> = r
            .scaled_cgf_gaps
            .iter()
            .filter(|(n, _)| *n >= 8)
            .map(|(n, g)| *n as f64 * g.abs())
            .collect();
        let max = scaled.iter().copied().fold(0.0f64, f64::max);
        let ok = max < 2.0 * scaled[0] && r.fitted_decay < 1.0;
        passed &= ok;
        rows.push(json!({
            "theta": theta, "at_8": jnum(scaled[0]), "max": jnum(max),
            "fitted_decay": jnum(r.fitted_decay), "passed": ok,
        }));
    }
    Ok((passed, json!({"rows": rows})))
}

fn theorem_a_large_gap() -> CheckResult {
    let n_list: Vec<usize> = (1..=8).collect();
    let mut passed = true;
    let mut rows = Vec::new();
    for theta in [0.5, 1.0] {
        let s = scaled_cgf_sequence(&cos(), &GapSequence::Factorial, theta, &n_list, MgfEvaluation::Exact)?;
        let target = cgf_iid(&cos(), theta).value;
        let err = s.extrapolated.map_or(f64::INFINITY, |e| (e - target).abs());
        passed &= err < 5e-3;
        rows.push(json!({
            "theta": theta,
            "extrapolated": s.extrapolated.map(jnum),
            "iid": jnum(target),
            "abs_difference": jnum(err),
        }));
    }
    Ok((passed, json!({"rows": rows})))
}

fn theorem_b_sweep() -> CheckResult {
    let xs = range_grid(-0.8, 0.8, 0.05).expect("fixed grid is valid");
    let grid = default_theta_grid();
    let iid = gartner_ellis_rate(&IidCgf(&cos()), &xs, DEFAULT_THETA_MAX)?;
    let mut dist = Vec::new();
    for q in [2usize, 32] {
        let samples = cgf_geometric_curve(&cos(), q, &grid)?;
        let curve = ScalarCurve::new(
            grid.clone(),
            samples.iter().map(|s| s.value).collect(),
            Some(samples.iter().map(|s| s.derivative).collect()),
        )?;
        let rate = gartner_ellis_rate(&curve, &xs, DEFAULT_THETA_MAX)?;
        dist.push(rate_distance(&rate, &iid));
    }
    let passed = dist[1].sup < dist[0].sup && dist[1].sup < 0.05;
    Ok((passed, json!({
        "q2_sup_distance": jnum(dist[0].sup),
        "q2_finite_sup_distance": jnum(dist[0].finite_sup),
        "q2_infinite_mismatches": dist[0].mismatched,
        "q32_sup_distance": jnum(dist[1].sup),
    })))
}

fn legendre_biconjugation() -> CheckResult {
    let lambda = IidCgf(&PeriodicFunctionSpec::cosine());
    let rate = Conjugate::new(&lambda, DEFAULT_THETA_MAX)?;
    let mut worst = 0.0f64;
    for i in -12..=12 {
        let theta = 0.25 * i as f64;
        let back = legendre_transform(&rate, theta, 1.0)?;
        worst = worst.max((back.value - cgf_iid(&cos(), theta).value).abs());
    }
    Ok((worst < 1e-6, json!({"max_difference": jnum(worst)})))
}

fn diophantine_counts() -> CheckResult {
    let a = vec![BigUint::from(2u32), BigUint::from(4u32)];
    let one = count_solutions(&a, 1, None)?;
    let two = count_solutions(&a, 2, None)?;
    Ok((one.total == 1 && two.total == 3, json!({
        "m1_total": one.total.to_string(),
        "m2_total": two.total.to_string(),
    })))
}

fn mc_cross_check(seed: u64) -> CheckResult {
    let seq = GapSequence::Geometric { q: 2 };
    let exact = exact_mgf(&cos(), &seq, 6, 1.0)?;
    let mc = mc_mgf(&cos(), &seq, 6, 1.0, 200_000, seed)?;
    let z = (mc.value - exact.value).abs() / mc.error_estimate;
    Ok((z < 5.0, json!({
        "exact": jnum(exact.value),
        "monte_carlo": jnum(mc.value),
        "standard_error": jnum(mc.error_estimate),
        "z_score": jnum(z),
        "samples": 200_000,
    })))
}

pub fn run_checks(seed: u64) -> Report {
    let table: Vec<(&'static str, Box<dyn Fn() -> CheckResult>)> = vec![
        ("example1_variance", Box::new(example1_variance)),
        ("example2_scaling", Box::new(example2_scaling)),
        ("example3_telescoping", Box::new(example3_telescoping)),
        ("example4_shifted_sequence", Box::new(example4_shifted_sequence)),
        ("lemma1_identity", Box::new(lemma1_identity)),
        ("ratio_limit", Box::new(ratio_limit)),
        ("oracle_equivalence", Box::new(oracle_equivalence)),
        ("theorem_a_large_gap", Box::new(theorem_a_large_gap)),
        ("theorem_b_sweep", Box::new(theorem_b_sweep)),
        ("legendre_biconjugation", Box::new(legendre_biconjugation)),
        ("diophantine_counts", Box::new(diophantine_counts)),
        ("mc_cross_check", Box::new(move || mc_cross_check(seed))),
    ];
    let checks = table
        .into_iter()
        .map(|(name, f)| match f() {
            Ok((passed, details)) => Check { name, passed, details },
            Err(e) => Check { name, passed: false, details: json!({"error": e.to_string()}) },
        })
        .collect();
    Report { seed, checks }
}
