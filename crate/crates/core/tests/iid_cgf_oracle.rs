use lacunary_ldp::fnmodel::{Builtin, PeriodicFunctionSpec};
use lacunary_ldp::iid_cgf::{cgf_curve, cgf_iid, default_theta_grid};
use proptest::prelude::*;

/// `I_0(θ) = Σ_k (θ/2)^{2k} / (k!)²`, summed until terms vanish.
fn bessel_i0(theta: f64) -> f64 {
    let x = 0.25 * theta * theta;
    let mut term = 1.0;
    let mut sum = 0.0;
    let mut k = 0.0;
    while term > sum * 1e-18 || k < 5.0 {
        sum += term;
        k += 1.0;
        term *= x / (k * k);
    }
    sum
}

fn specs() -> Vec<PeriodicFunctionSpec> {
    vec![
        PeriodicFunctionSpec::cosine(),
        PeriodicFunctionSpec::Builtin(Builtin::CosinePlusDouble),
        PeriodicFunctionSpec::Builtin(Builtin::Telescoping),
        PeriodicFunctionSpec::Builtin(Builtin::Triangle),
        PeriodicFunctionSpec::Builtin(Builtin::ExpCosine),
    ]
}

#[test]
fn cosine_matches_bessel_series() {
    for theta in [-8.0, -3.0, -1.0, -0.25, 0.5, 1.0, 2.0, 5.0, 8.0, 20.0] {
        let got = cgf_iid(&PeriodicFunctionSpec::cosine(), theta).value;
        let want = bessel_i0(theta).ln();
        assert!((got - want).abs() < 1e-11, "θ = {theta}: {got} vs {want}");
    }
    let at_one = cgf_iid(&PeriodicFunctionSpec::cosine(), 1.0).value;
    assert!((at_one - 1.2660658777520082f64.ln()).abs() < 1e-12);
}

#[test]
fn zero_theta_gives_zero_and_mean() {
    for spec in specs() {
        let s = cgf_iid(&spec, 0.0);
        assert_eq!(s.value, 0.0);
        let n = 1 << 14;
        let mean = (0..n).map(|i| spec.evaluate(i as f64 / n as f64)).sum::<f64>() / n as f64;
        assert!((s.derivative - mean).abs() < 1e-10, "{}", spec.to_json());
    }
}

#[test]
fn constant_function() {
    let s = cgf_iid(&PeriodicFunctionSpec::constant(1.75), 2.0);
    assert!((s.value - 3.5).abs() < 1e-12);
    assert!((s.derivative - 1.75).abs() < 1e-12);
    assert!(s.second_derivative.abs() < 1e-10);
}

#[test]
fn curve_is_symmetric_and_convex() {
    let cos = PeriodicFunctionSpec::cosine();
    let c = cgf_curve(&cos, &[-1.0, 0.0, 1.0]).unwrap();
    assert!((c.values[0] - c.values[2]).abs() < 1e-14);
    let zero = cgf_curve(&PeriodicFunctionSpec::constant(0.0), &default_theta_grid()).unwrap();
    assert!(zero.values.iter().all(|v| *v == 0.0));
    for spec in specs() {
        let curve = cgf_curve(&spec, &default_theta_grid()).unwrap();
        assert!(curve.is_convex);
        let v = &curve.values;
        for i in 1..v.len() - 1 {
            assert!(v[i] <= 0.5 * (v[i - 1] + v[i + 1]) + 1e-10);
        }
    }
    assert!(cgf_curve(&cos, &[]).is_err());
}

#[test]
fn tilted_variance_is_non_negative() {
    for spec in specs() {
        for theta in default_theta_grid() {
            assert!(cgf_iid(&spec, theta).second_derivative >= -1e-10);
        }
    }
}

#[test]
fn bounded_by_extreme_values() {
    for spec in specs() {
        let (lo, hi) = spec.value_range();
        for theta in default_theta_grid() {
            let v = cgf_iid(&spec, theta).value;
            let (a, b) = if theta >= 0.0 { (theta * lo, theta * hi) } else { (theta * hi, theta * lo) };
            assert!(v >= a - 1e-10 && v <= b + 1e-10, "{}: θ = {theta}", spec.to_json());
        }
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn derivative_matches_finite_difference(theta in -5.0f64..5.0, which in 0usize..5) {
        let spec = &specs()[which];
        let h = 1e-5;
        let s = cgf_iid(spec, theta);
        let fd = (cgf_iid(spec, theta + h).value - cgf_iid(spec, theta - h).value) / (2.0 * h);
        prop_assert!((s.derivative - fd).abs() < 1e-6);
        let fd2 = (cgf_iid(spec, theta + h).derivative - cgf_iid(spec, theta - h).derivative) / (2.0 * h);
        prop_assert!((s.second_derivative - fd2).abs() < 1e-5);
    }

    #[test]
    fn scaling_the_function_scales_theta(theta in -4.0f64..4.0, c in -2.5f64..2.5) {
        let base = PeriodicFunctionSpec::Builtin(Builtin::Triangle);
        let scaled = PeriodicFunctionSpec::Scaled { c, inner: Box::new(base.clone()) };
        let a = cgf_iid(&scaled, theta).value;
        let b = cgf_iid(&base, c * theta).value;
        prop_assert!((a - b).abs() < 1e-10);
    }
}
