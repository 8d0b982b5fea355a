//! Acceptance criteria 1-10. Prints one PASS/FAIL line per criterion and exits
//! non-zero when any criterion fails.

use std::panic::{self, AssertUnwindSafe};
use std::process::{Command, ExitCode};
use std::time::{Duration, Instant};

use lacunary_ldp::empirical::exact_mgf;
use lacunary_ldp::iid_cgf::{default_theta_grid, IidCgf};
use lacunary_ldp::legendre::{gartner_ellis_rate, legendre_transform, Conjugate, ScalarCurve, DEFAULT_THETA_MAX};
use lacunary_ldp::numtheory::{count_solutions, product_integral_exact, verify_gap_condition};
use lacunary_ldp::transfer_op::{cgf_geometric, cgf_geometric_curve};
use lacunary_ldp::{Builtin, GapSequence, PeriodicFunctionSpec, TrigPolynomial};
use num_bigint::BigUint;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

type Outcome = Result<String, String>;

fn ensure(cond: bool, msg: impl Into<String>) -> Result<(), String> {
    if cond {
        Ok(())
    } else {
        Err(msg.into())
    }
}

fn cos() -> PeriodicFunctionSpec {
    PeriodicFunctionSpec::cosine()
}

// ---------- oracles ----------

/// `log I_0(θ)` from `Σ (θ²/4)^k / (k!)²`.
fn log_bessel_i0(theta: f64) -> f64 {
    let x = 0.25 * theta * theta;
    let (mut term, mut sum, mut k) = (1.0f64, 0.0f64, 0.0f64);
    while term > sum * 1e-18 || k < 5.0 {
        sum += term;
        k += 1.0;
        term *= x / (k * k);
    }
    sum.ln()
}

/// Kahan-summed periodic trapezoid rule on `points` nodes.
fn trapezoid(points: usize, g: impl Fn(f64) -> f64) -> f64 {
    let (mut s, mut c) = (0.0f64, 0.0f64);
    for i in 0..points {
        let y = g(i as f64 / points as f64) - c;
        let t = s + y;
        c = (t - s) - y;
        s = t;
    }
    s / points as f64
}

/// `∫ exp(θ Σ_k f(a_k ω)) dω` for a trigonometric polynomial `f` of degree
/// `deg`; the integrand is entire, so 64 nodes per period of the fastest
/// frequency leave only rounding error.
fn mgf_oracle(f: impl Fn(f64) -> f64, a: &[u64], deg: u64, theta: f64) -> f64 {
    let top = a.iter().max().copied().unwrap_or(1) * deg;
    let points = (64 * top as usize).next_power_of_two().max(1024);
    trapezoid(points, |w| {
        let s: f64 = a.iter().map(|&ak| f(((ak as f64) * w).fract())).sum();
        (theta * s).exp()
    })
}

fn cos2pi(x: f64) -> f64 {
    (2.0 * std::f64::consts::PI * x).cos()
}

/// `sup_θ [θx − log I_0(θ)]` over a uniform grid.
fn dense_sup(x: f64, lo: f64, hi: f64, step: f64) -> f64 {
    let n = ((hi - lo) / step).round() as usize;
    (0..=n)
        .map(|i| {
            let t = lo + step * i as f64;
            t * x - log_bessel_i0(t)
        })
        .fold(f64::NEG_INFINITY, f64::max)
}

/// Exhaustive count of `j ∈ [-m, m]^n` with `Σ j_k a_k = 0`.
fn naive_count(a: &[i64], m: i64) -> u128 {
    fn go(a: &[i64], m: i64, acc: i64) -> u128 {
        match a.split_first() {
            None => (acc == 0) as u128,
            Some((&x, rest)) => (-m..=m).map(|j| go(rest, m, acc + j * x)).sum(),
        }
    }
    go(a, m, 0)
}

fn big(xs: &[u64]) -> Vec<BigUint> {
    xs.iter().map(|&x| BigUint::from(x)).collect()
}

// ---------- criteria ----------

fn criterion_1() -> Outcome {
    let f = PeriodicFunctionSpec::Builtin(Builtin::Telescoping);
    let mut worst = 0.0f64;
    for theta in [-2.0, -1.0, 1.0, 2.0] {
        let v = cgf_geometric(&f, 2, theta).map_err(|e| e.to_string())?.value;
        worst = worst.max(v.abs());
    }
    ensure(worst < 1e-7, format!("max |log λ| = {worst:e}"))?;
    Ok(format!("max |log λ| = {worst:.3e}"))
}

fn criterion_2() -> Outcome {
    let f = PeriodicFunctionSpec::SumOfDilates(vec![(1, cos()), (2, cos())]);
    let mut worst = 0.0f64;
    for theta in [0.5, 1.0, 2.0] {
        let a = cgf_geometric(&f, 2, theta).map_err(|e| e.to_string())?.value;
        let b = cgf_geometric(&cos(), 2, 2.0 * theta).map_err(|e| e.to_string())?.value;
        worst = worst.max((a - b).abs());
    }
    ensure(worst < 1e-6, format!("max difference {worst:e}"))?;
    Ok(format!("max difference {worst:.3e}"))
}

fn criterion_3() -> Outcome {
    let mut summary = Vec::new();
    for theta in [-1.0, -0.5, 0.5, 1.0] {
        let log_lambda = cgf_geometric(&cos(), 2, theta).map_err(|e| e.to_string())?.value;
        let mut a = Vec::new();
        let mut log_mgf = Vec::new();
        for n in 1..=14usize {
            a.push(1u64 << n);
            log_mgf.push(mgf_oracle(cos2pi, &a, 1, theta).ln());
        }
        let scaled: Vec<f64> = (8..=14)
            .map(|n| n as f64 * (log_mgf[n - 1] / n as f64 - log_lambda).abs())
            .collect();
        let max = scaled.iter().copied().fold(0.0f64, f64::max);
        ensure(max < 2.0 * scaled[0], format!("θ = {theta}: max {max:e} vs 2×{:e}", scaled[0]))?;

        let r: Vec<f64> = log_mgf
            .iter()
            .enumerate()
            .map(|(i, l)| (l - (i + 1) as f64 * log_lambda).exp())
            .collect();
        let diffs: Vec<f64> = r.windows(2).map(|w| (w[1] - w[0]).abs()).collect();
        let ratios: Vec<f64> = diffs.windows(2).map(|w| w[1] / w[0]).collect();
        let tail = &ratios[ratios.len() / 2..];
        let geo = tail.iter().map(|x| x.ln()).sum::<f64>() / tail.len() as f64;
        let decay = geo.exp();
        ensure(
            decay < 0.8 && tail.iter().all(|&x| x < 1.0),
            format!("θ = {theta}: decay ratios {tail:?}"),
        )?;
        summary.push(format!("θ={theta}: n·gap≤{max:.2e}, decay {decay:.2}"));
    }
    Ok(summary.join("; "))
}

fn criterion_4() -> Outcome {
    let mut summary = Vec::new();
    for theta in [0.5, 1.0] {
        let vals: Vec<(f64, f64)> = (1..=8usize)
            .map(|n| {
                let r = exact_mgf(&cos(), &GapSequence::Factorial, n, theta).map_err(|e| e.to_string())?;
                Ok((1.0 / n as f64, r.log_value / n as f64))
            })
            .collect::<Result<_, String>>()?;
        // least-squares c0 + c1/n through n = 6, 7, 8
        let pts = &vals[5..];
        let mx = pts.iter().map(|p| p.0).sum::<f64>() / 3.0;
        let my = pts.iter().map(|p| p.1).sum::<f64>() / 3.0;
        let sxx: f64 = pts.iter().map(|p| (p.0 - mx).powi(2)).sum();
        let sxy: f64 = pts.iter().map(|p| (p.0 - mx) * (p.1 - my)).sum();
        let c0 = my - sxy / sxx * mx;
        let target = log_bessel_i0(theta);
        let err = (c0 - target).abs();
        ensure(err < 5e-3, format!("θ = {theta}: {c0} vs log I_0 = {target}"))?;
        summary.push(format!("θ={theta}: |Δ|={err:.2e}"));
    }
    Ok(summary.join("; "))
}

fn criterion_5() -> Outcome {
    let a = [5u64, 25, 125, 625];
    let terms = big(&a);
    let gap = verify_gap_condition(&terms, 1, 3).map_err(|e| e.to_string())?;
    ensure(gap.k0 == Some(0) && gap.certified, format!("gap condition {gap:?}"))?;
    let r = product_integral_exact(&TrigPolynomial::cosine(), &terms, 1.0, 3, 0, 4).map_err(|e| e.to_string())?;
    let err = (r.lhs - r.rhs).abs();
    ensure(err < 1e-12, format!("|∫Πp_d − b_0^n| = {err:e}"))?;
    // p_3(θ cos) summed directly
    let p3 = |x: f64| 1.0 + x + x * x / 2.0 + x * x * x / 6.0;
    let direct = trapezoid(8192, |w| a.iter().map(|&ak| p3(cos2pi((ak as f64 * w).fract()))).product());
    ensure((direct - r.lhs).abs() < 1e-10, format!("quadrature {direct} vs {}", r.lhs))?;
    let c = count_solutions(&terms, 3, None).map_err(|e| e.to_string())?;
    let naive = naive_count(&[5, 25, 125, 625], 3);
    ensure(c.nontrivial == 0 && c.total == 1 && naive == 1, format!("counts {} / naive {naive}", c.total))?;
    Ok(format!("|∫Πp_d − b_0^n| = {err:.2e}, nontrivial solutions 0"))
}

fn criterion_6() -> Outcome {
    let xs: Vec<f64> = (-16..=16).map(|i| 0.05 * i as f64).collect();
    let oracle: Vec<f64> = xs.iter().map(|&x| dense_sup(x, -30.0, 30.0, 1e-3)).collect();
    let grid = default_theta_grid();
    let mut dist = Vec::new();
    for q in [2usize, 32] {
        let s = cgf_geometric_curve(&cos(), q, &grid).map_err(|e| e.to_string())?;
        let curve = ScalarCurve::new(
            grid.clone(),
            s.iter().map(|p| p.value).collect(),
            Some(s.iter().map(|p| p.derivative).collect()),
        )
        .map_err(|e| e.to_string())?;
        let rate = gartner_ellis_rate(&curve, &xs, DEFAULT_THETA_MAX).map_err(|e| e.to_string())?;
        let d = rate
            .points
            .iter()
            .zip(&oracle)
            .map(|(p, o)| if p.is_infinite() { f64::INFINITY } else { (p.value - o).abs() })
            .fold(0.0f64, f64::max);
        dist.push(d);
    }
    ensure(dist[1] < dist[0], format!("distance(32) = {} not below distance(2) = {}", dist[1], dist[0]))?;
    ensure(dist[1] < 0.05, format!("distance(32) = {}", dist[1]))?;
    Ok(format!("sup distance q=2: {:.3e}, q=32: {:.3e}", dist[0], dist[1]))
}

fn criterion_7() -> Outcome {
    let lambda = IidCgf(&PeriodicFunctionSpec::cosine());
    let rate = Conjugate::new(&lambda, DEFAULT_THETA_MAX).map_err(|e| e.to_string())?;
    let mut worst_bi = 0.0f64;
    for i in -30..=30 {
        let theta = 0.1 * i as f64;
        let back = legendre_transform(&rate, theta, 1.0).map_err(|e| e.to_string())?;
        worst_bi = worst_bi.max((back.value - log_bessel_i0(theta)).abs());
    }
    ensure(worst_bi < 1e-6, format!("biconjugate error {worst_bi:e}"))?;
    let mut rng = ChaCha8Rng::seed_from_u64(7);
    let mut worst_sup = 0.0f64;
    for _ in 0..20 {
        let x = rng.gen_range(-0.95..0.95);
        let p = legendre_transform(&lambda, x, DEFAULT_THETA_MAX).map_err(|e| e.to_string())?;
        let o = dense_sup(x, -30.0, 30.0, 1e-4);
        worst_sup = worst_sup.max((p.value - o).abs());
    }
    ensure(worst_sup < 1e-6, format!("dense-sup error {worst_sup:e}"))?;
    Ok(format!("biconjugate {worst_bi:.2e}, dense sup {worst_sup:.2e}"))
}

fn criterion_8() -> Outcome {
    let pair = big(&[2, 4]);
    for (m, want) in [(1u64, 1u128), (2, 3)] {
        let got = count_solutions(&pair, m, None).map_err(|e| e.to_string())?.total;
        let naive = naive_count(&[2, 4], m as i64);
        ensure(got == want && naive == want, format!("[2,4], m={m}: {got} (naive {naive})"))?;
    }
    let mut rng = ChaCha8Rng::seed_from_u64(8);
    for i in 0..50 {
        let n = rng.gen_range(1..=6);
        let m = rng.gen_range(1..=3u64);
        let mut a: Vec<u64> = (0..n).map(|_| rng.gen_range(1..64)).collect();
        a.sort_unstable();
        a.dedup();
        let signed: Vec<i64> = a.iter().map(|&x| x as i64).collect();
        let got = count_solutions(&big(&a), m, None).map_err(|e| e.to_string())?.total;
        let naive = naive_count(&signed, m as i64);
        ensure(got == naive, format!("instance {i}: {a:?}, m={m}: {got} vs {naive}"))?;
    }
    Ok("[2,4]: 1 and 3; 50 random instances agree".into())
}

struct VerifyRuns {
    first: Vec<u8>,
    second: Vec<u8>,
}

fn run_verify(dir: &std::path::Path) -> Result<Vec<u8>, String> {
    let out = Command::new(env!("CARGO_BIN_EXE_lacldp"))
        .args(["verify", "--seed", "6848", "--out"])
        .arg(dir)
        .output()
        .map_err(|e| e.to_string())?;
    if !out.status.success() {
        return Err(format!("verify exited with {:?}: {}", out.status.code(), String::from_utf8_lossy(&out.stderr)));
    }
    std::fs::read(dir.join("verify.json")).map_err(|e| e.to_string())
}

fn verify_runs() -> Result<VerifyRuns, String> {
    let tmp = tempfile::tempdir().map_err(|e| e.to_string())?;
    let first = run_verify(&tmp.path().join("a"))?;
    let second = run_verify(&tmp.path().join("b"))?;
    Ok(VerifyRuns { first, second })
}

fn criterion_9(runs: &Result<VerifyRuns, String>) -> Outcome {
    let runs = runs.as_ref().map_err(|e| e.clone())?;
    let doc: serde_json::Value = serde_json::from_slice(&runs.first).map_err(|e| e.to_string())?;
    let check = doc["checks"]
        .as_array()
        .and_then(|c| c.iter().find(|c| c["name"] == "example4_shifted_sequence"))
        .ok_or("example4_shifted_sequence missing from verify.json")?;
    let d = &check["details"];
    let (g, s, diff) = (d["geometric"].as_f64(), d["shifted_geometric"].as_f64(), d["difference"].as_f64());
    let (Some(g), Some(s), Some(diff)) = (g, s, diff) else {
        return Err(format!("incomplete report: {d}"));
    };
    // the JSON parser is not guaranteed correctly rounded
    ensure((diff - (g - s)).abs() <= 1e-12 * g.abs().max(s.abs()), "difference is not geometric − shifted")?;
    let f = |x: f64| cos2pi(x) + cos2pi((2.0 * x).fract());
    let geo: Vec<u64> = (1..=6).map(|k| 1u64 << k).collect();
    let shifted: Vec<u64> = geo.iter().map(|a| a + 1).collect();
    let og = mgf_oracle(f, &geo, 2, 1.0);
    let os = mgf_oracle(f, &shifted, 2, 1.0);
    ensure((g - og).abs() < 1e-9 * og, format!("geometric {g} vs oracle {og}"))?;
    ensure((s - os).abs() < 1e-9 * os, format!("shifted {s} vs oracle {os}"))?;
    let again: serde_json::Value = serde_json::from_slice(&runs.second).map_err(|e| e.to_string())?;
    ensure(again["checks"] == doc["checks"], "report differs between runs")?;
    Ok(format!("geometric {g:.10}, shifted {s:.10}, difference {diff:.6}"))
}

fn criterion_10(runs: &Result<VerifyRuns, String>) -> Outcome {
    let runs = runs.as_ref().map_err(|e| e.clone())?;
    ensure(runs.first == runs.second, "verify.json differs between runs")?;
    Ok(format!("{} identical bytes", runs.first.len()))
}

fn run(id: usize, desc: &str, limit: Option<Duration>, f: impl FnOnce() -> Outcome) -> bool {
    let start = Instant::now();
    let result = panic::catch_unwind(AssertUnwindSafe(f)).unwrap_or_else(|p| {
        Err(p
            .downcast_ref::<String>()
            .cloned()
            .or_else(|| p.downcast_ref::<&str>().map(|s| s.to_string()))
            .unwrap_or_else(|| "panic".into()))
    });
    let elapsed = start.elapsed();
    let result = match (result, limit) {
        (Ok(_), Some(l)) if elapsed > l => Err(format!("took {elapsed:.1?}, limit {l:?}")),
        (r, _) => r,
    };
    let (tag, msg) = match &result {
        Ok(m) => ("PASS", m.as_str()),
        Err(m) => ("FAIL", m.as_str()),
    };
    println!("{tag} criterion {id:>2} [{desc}] ({:.2}s): {msg}", elapsed.as_secs_f64());
    result.is_ok()
}

fn main() -> ExitCode {
    let secs = Duration::from_secs;
    let mut ok = true;
    ok &= run(1, "telescoping eigenvalue", Some(secs(10)), criterion_1);
    ok &= run(2, "dilation scaling", Some(secs(30)), criterion_2);
    ok &= run(3, "operator vs oracle", Some(secs(120)), criterion_3);
    ok &= run(4, "large-gap limit", Some(secs(60)), criterion_4);
    ok &= run(5, "product identity", Some(secs(30)), criterion_5);
    ok &= run(6, "q sweep", Some(secs(300)), criterion_6);
    ok &= run(7, "Legendre duality", None, criterion_7);
    ok &= run(8, "Diophantine counts", Some(secs(10)), criterion_8);
    let runs = verify_runs();
    ok &= run(9, "shifted-sequence report", None, || criterion_9(&runs));
    ok &= run(10, "verify determinism", None, || criterion_10(&runs));
    if ok {
        println!("all acceptance criteria passed");
        ExitCode::SUCCESS
    } else {
        println!("some acceptance criteria failed");
        ExitCode::FAILURE
    }
}
