use lacunary_ldp::empirical::exact_mgf;
use lacunary_ldp::fnmodel::{Builtin, PeriodicFunctionSpec, TrigPolynomial};
use lacunary_ldp::iid_cgf::cgf_iid;
use lacunary_ldp::transfer_op::{
    build_operator, cgf_geometric, cgf_geometric_curve, dominant_spectrum, ratio_limit_check,
    trapezoid_weights,
};
use lacunary_ldp::GapSequence;
use num_complex::Complex64;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

fn cos() -> PeriodicFunctionSpec {
    PeriodicFunctionSpec::cosine()
}

fn apply_dense(a: &[Vec<f64>], g: &[f64]) -> Vec<f64> {
    a.iter().map(|row| row.iter().zip(g).map(|(x, y)| x * y).sum()).collect()
}

/// Least-squares fit of `c0 + c1/n`; returns `c0`.
fn inverse_n_intercept(points: &[(usize, f64)]) -> f64 {
    let xs: Vec<f64> = points.iter().map(|p| 1.0 / p.0 as f64).collect();
    let k = xs.len() as f64;
    let mx = xs.iter().sum::<f64>() / k;
    let my = points.iter().map(|p| p.1).sum::<f64>() / k;
    let sxx: f64 = xs.iter().map(|x| (x - mx).powi(2)).sum();
    let sxy: f64 = xs.iter().zip(points).map(|(x, p)| (x - mx) * (p.1 - my)).sum();
    my - sxy / sxx * mx
}

#[test]
fn zero_theta_operator_is_stochastic() {
    for q in [2usize, 3, 5] {
        for n in [2 * q, 17, 64] {
            let a = build_operator(&cos(), q, 0.0, n).unwrap().to_dense();
            let ones = apply_dense(&a, &vec![1.0; n]);
            assert!(ones.iter().all(|v| (v - 1.0).abs() < 1e-12));
            assert!(a.iter().flatten().all(|&x| x >= 0.0));
        }
    }
}

#[test]
fn entries_non_negative_for_any_theta() {
    for theta in [-12.0, -1.0, 0.5, 7.0] {
        let a = build_operator(&PeriodicFunctionSpec::Builtin(Builtin::Triangle), 3, theta, 31)
            .unwrap()
            .to_dense();
        assert!(a.iter().flatten().all(|&x| x >= 0.0));
    }
}

#[test]
fn rejects_bad_parameters() {
    assert!(build_operator(&cos(), 1, 0.0, 64).is_err());
    assert!(build_operator(&cos(), 4, 0.0, 7).is_err());
}

#[test]
fn zero_theta_spectrum() {
    for n in [8usize, 65, 257, 1025] {
        let s = dominant_spectrum(&build_operator(&cos(), 2, 0.0, n).unwrap()).unwrap();
        assert!(s.log_lambda.abs() < 1e-14, "N = {n}: {}", s.log_lambda);
        assert!(s.right_eigvec.iter().all(|h| (h - 1.0).abs() < 1e-12));
        assert!(s.gap_ratio < 1.0);
    }
    assert_eq!(cgf_geometric(&cos(), 2, 0.0).unwrap().value, 0.0);
}

#[test]
fn trapezoid_integral_is_preserved() {
    let mut rng = ChaCha8Rng::seed_from_u64(20);
    for trial in 0..20 {
        let coeffs: Vec<Complex64> = (0..5)
            .map(|j| {
                let im = if j == 0 { 0.0 } else { rng.gen_range(-1.0..1.0) };
                Complex64::new(rng.gen_range(-1.0..1.0), im)
            })
            .collect();
        let g = TrigPolynomial::new(coeffs).unwrap();
        let q = 2 + trial % 4;
        let n = 129;
        let op = build_operator(&cos(), q, 0.0, n).unwrap();
        let gv: Vec<f64> = op.nodes().iter().map(|&x| g.evaluate(x)).collect();
        let ag = apply_dense(&op.to_dense(), &gv);
        let w = trapezoid_weights(n);
        let before: f64 = gv.iter().zip(&w).map(|(a, b)| a * b).sum();
        let after: f64 = ag.iter().zip(&w).map(|(a, b)| a * b).sum();
        assert!((before - after).abs() < 1e-10, "trial {trial}: {before} vs {after}");
    }
}

#[test]
fn eigenvectors_are_positive_and_normalized() {
    for theta in [-4.0, -1.0, 1.0, 4.0] {
        let op = build_operator(&cos(), 3, theta, 301).unwrap();
        let s = dominant_spectrum(&op).unwrap();
        assert!(s.lambda_theta > 0.0);
        assert!(s.right_eigvec.iter().all(|&h| h > 0.0));
        assert!(s.left_eigvec.iter().all(|&v| v >= 0.0));
        let w = trapezoid_weights(op.n);
        let mass: f64 = s.left_eigvec.iter().zip(&w).map(|(a, b)| a * b).sum();
        assert!((mass - 1.0).abs() < 1e-12);
        assert!(s.gap_ratio < 1.0);
        // λ h = A h at the nodes
        let a = op.to_dense();
        let ah = apply_dense(&a, &s.right_eigvec);
        for (x, h) in ah.iter().zip(&s.right_eigvec) {
            assert!((x - s.lambda_theta * h).abs() < 1e-9 * s.lambda_theta);
        }
    }
}

#[test]
fn telescoping_function_has_unit_eigenvalue() {
    let tele = PeriodicFunctionSpec::Builtin(Builtin::Telescoping);
    let s = cgf_geometric(&tele, 2, 1.5).unwrap();
    assert!((s.lambda - 1.0).abs() < 1e-8, "{}", s.lambda);
}

#[test]
fn grid_doubling_self_consistency() {
    let s = cgf_geometric(&cos(), 2, 1.0).unwrap();
    let raw = |n: usize| dominant_spectrum(&build_operator(&cos(), 2, 1.0, n).unwrap()).unwrap().log_lambda;
    let finer = 2 * (s.n_used - 1) + 1;
    let (coarse, fine) = (raw(s.n_used), raw(finer));
    // h² extrapolation of the doubled pair
    let next = (4.0 * fine - coarse) / 3.0;
    assert!(s.extrapolated);
    assert!((next - s.value).abs() < 1e-9, "{} vs {next}", s.value);
}

#[test]
fn eigenvalue_matches_exact_mgf_extrapolation() {
    let seq = GapSequence::geometric(2);
    let points: Vec<(usize, f64)> = (14..=18)
        .map(|n| (n, exact_mgf(&cos(), &seq, n, 1.0).unwrap().log_value / n as f64))
        .collect();
    let oracle = inverse_n_intercept(&points);
    let s = cgf_geometric(&cos(), 2, 1.0).unwrap();
    assert!((s.value - oracle).abs() < 1e-6, "{} vs {oracle}", s.value);
}

#[test]
fn example_two_scaling() {
    let f = PeriodicFunctionSpec::SumOfDilates(vec![(1, cos()), (2, cos())]);
    for theta in [0.5, 1.0, 2.0] {
        let a = cgf_geometric(&f, 2, theta).unwrap().value;
        let b = cgf_geometric(&cos(), 2, 2.0 * theta).unwrap().value;
        assert!((a - b).abs() < 1e-7, "θ = {theta}: {a} vs {b}");
    }
}

#[test]
fn large_q_approaches_iid() {
    let s = cgf_geometric(&cos(), 32, 1.0).unwrap();
    let iid = cgf_iid(&cos(), 1.0).value;
    assert!((s.value - iid).abs() < 2e-3);
}

#[test]
fn log_lambda_is_convex() {
    let grid: Vec<f64> = (-16..=16).map(|i| 0.25 * i as f64).collect();
    for q in [2usize, 3] {
        let curve = cgf_geometric_curve(&cos(), q, &grid).unwrap();
        for w in curve.windows(3) {
            assert!(w[1].value <= 0.5 * (w[0].value + w[2].value) + 1e-8);
        }
        assert!(curve.iter().all(|s| s.lambda > 0.0 && !s.outside_working_range));
    }
    assert!(cgf_geometric_curve(&cos(), 2, &[]).is_err());
}

#[test]
fn ratio_limit_trivial_cases() {
    let r = ratio_limit_check(&cos(), 2, 0.0, 6).unwrap();
    assert!(r.ratios.iter().all(|(_, v)| (v - 1.0).abs() < 1e-12));
    assert!((r.predicted_limit - 1.0).abs() < 1e-12);
    let c = ratio_limit_check(&PeriodicFunctionSpec::constant(0.4), 3, 1.3, 5).unwrap();
    assert!(c.ratios.iter().all(|(_, v)| (v - 1.0).abs() < 1e-10));
}

#[test]
fn ratio_limit_decays_geometrically() {
    let r = ratio_limit_check(&cos(), 2, 1.0, 14).unwrap();
    assert!(r.fitted_decay > 0.0 && r.fitted_decay < 0.6, "{}", r.fitted_decay);
    assert!(r.final_error < 1e-5);
    let tail = &r.decay_ratios[r.decay_ratios.len() / 2..];
    assert!(tail.iter().all(|&d| d < 0.6));
    assert!(r.gap_ratio > 0.0 && r.gap_ratio < 1.0);
}

#[test]
fn scaled_cgf_gap_is_order_one_over_n() {
    for (q, n_max, n0) in [(2usize, 14usize, 8usize), (3, 9, 5)] {
        for theta in [-1.0, -0.5, 0.5, 1.0] {
            let r = ratio_limit_check(&cos(), q, theta, n_max).unwrap();
            let scaled: Vec<f64> = r
                .scaled_cgf_gaps
                .iter()
                .filter(|(n, _)| *n >= n0)
                .map(|(n, d)| *n as f64 * d.abs())
                .collect();
            let bound = 2.0 * scaled[0];
            assert!(
                scaled.iter().all(|&v| v < bound),
                "q = {q}, θ = {theta}: {scaled:?}"
            );
        }
    }
}
