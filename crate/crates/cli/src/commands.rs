//! One function per subcommand; each writes its tables into the output directory.

use std::path::PathBuf;

use lacunary_ldp::empirical::{exact_mgf, mc_mgf, MgfMethod, MgfRecord};
use lacunary_ldp::iid_cgf::{cgf_iid, IidCgf};
use lacunary_ldp::legendre::{gartner_ellis_rate, RateFunctionCurve, ScalarCurve};
use lacunary_ldp::numtheory::{count_solutions, extremal_lower_bound, verify_gap_condition};
use lacunary_ldp::transfer_op::{cgf_geometric_curve, GeometricCgfSample};
use lacunary_ldp::{Error, PeriodicFunctionSpec};
use serde_json::{json, Value};

use crate::config::{Command, Format, Mode, RunConfig};
use crate::output::{num, sha256_hex, OutputDir, Table};
use crate::plot::{flagged_intervals, render, Plot, Series};
use crate::{verify, CliError};

pub fn dispatch(cfg: &RunConfig) -> Result<Vec<PathBuf>, CliError> {
    let mut out = OutputDir::new(&cfg.output)?;
    match cfg.command {
        Command::Cgf => cmd_cgf(cfg, &mut out)?,
        Command::Rate => cmd_rate(cfg, &mut out)?,
        Command::SweepQ => cmd_sweep_q(cfg, &mut out)?,
        Command::Empirical => cmd_empirical(cfg, &mut out)?,
        Command::Dio => cmd_dio(cfg, &mut out)?,
        Command::Verify => {
            let report = verify::run_checks(cfg.seed);
            out.write_json("verify.json", &report.to_json())?;
            let failed = report.failed();
            if !failed.is_empty() {
                return Err(CliError::VerifyFailed(failed));
            }
        }
    }
    Ok(out.written)
}

/// `f64` for JSON, with non-finite values spelled out as strings.
pub fn jnum(v: f64) -> Value {
    if v.is_finite() {
        json!(v)
    } else {
        json!(num(v))
    }
}

fn header(cfg: &RunConfig) -> Value {
    json!({
        "command": cfg.command.name(),
        "function": serde_json::to_value(&cfg.function).expect("function specs serialize"),
    })
}

/// Writes `name.csv`, `name.json` and `name.svg` as requested; the SVG carries
/// the checksum of the CSV text whether or not the CSV itself is written.
fn emit(
    cfg: &RunConfig,
    out: &mut OutputDir,
    name: &str,
    table: &Table,
    json: Value,
    plot: Option<Plot>,
) -> Result<(), CliError> {
    let csv = table.to_csv();
    if cfg.wants(Format::Csv) {
        out.write(&format!("{name}.csv"), csv.as_bytes())?;
    }
    if cfg.wants(Format::Json) {
        out.write_json(&format!("{name}.json"), &json)?;
    }
    if let (true, Some(plot)) = (cfg.wants(Format::Svg), plot) {
        out.write(&format!("{name}.svg"), render(&plot, &sha256_hex(csv.as_bytes())).as_bytes())?;
    }
    Ok(())
}

fn geometric_curve(spec: &PeriodicFunctionSpec, q: usize, grid: &[f64]) -> Result<(Vec<GeometricCgfSample>, ScalarCurve), CliError> {
    let samples = cgf_geometric_curve(spec, q, grid)?;
    let curve = ScalarCurve::new(
        grid.to_vec(),
        samples.iter().map(|s| s.value).collect(),
        Some(samples.iter().map(|s| s.derivative).collect()),
    )?;
    Ok((samples, curve))
}

fn mode_label(cfg: &RunConfig) -> String {
    match cfg.mode {
        Mode::Iid => "iid".to_string(),
        Mode::Geometric => format!("geometric q={}", cfg.q),
    }
}

pub fn cmd_cgf(cfg: &RunConfig, out: &mut OutputDir) -> Result<(), CliError> {
    let mut table = Table::new(&["theta", "value", "derivative", "n_used"]);
    let mut rows = Vec::new();
    let mut points = Vec::new();
    match cfg.mode {
        Mode::Iid => {
            for &t in &cfg.theta_grid {
                let s = cgf_iid(&cfg.function, t);
                table.push(vec![num(t), num(s.value), num(s.derivative), "0".into()]);
                rows.push(json!({
                    "theta": t, "value": jnum(s.value), "derivative": jnum(s.derivative),
                    "second_derivative": jnum(s.second_derivative), "n_used": 0,
                }));
                points.push((t, s.value));
            }
        }
        Mode::Geometric => {
            for s in cgf_geometric_curve(&cfg.function, cfg.q, &cfg.theta_grid)? {
                table.push(vec![num(s.theta), num(s.value), num(s.derivative), s.n_used.to_string()]);
                rows.push(json!({
                    "theta": s.theta, "value": jnum(s.value), "derivative": jnum(s.derivative),
                    "n_used": s.n_used, "lambda": jnum(s.lambda), "gap_ratio": jnum(s.gap_ratio),
                    "extrapolated": s.extrapolated, "outside_working_range": s.outside_working_range,
                }));
                points.push((s.theta, s.value));
            }
        }
    }
    let mut doc = header(cfg);
    doc["mode"] = json!(cfg.mode);
    doc["q"] = if cfg.mode == Mode::Geometric { json!(cfg.q) } else { Value::Null };
    doc["rows"] = json!(rows);
    let mut plot = Plot::new(&format!("CGF ({})", mode_label(cfg)), "theta", "Lambda(theta)");
    plot.series.push(Series { label: mode_label(cfg), points });
    emit(cfg, out, "cgf", &table, doc, Some(plot))
}

fn rate_table(curve: &RateFunctionCurve) -> Table {
    let mut t = Table::new(&["x", "value", "is_infinite", "zero_location"]);
    for p in &curve.points {
        let v = if p.is_infinite() { f64::INFINITY } else { p.value };
        t.push(vec![num(p.x), num(v), p.is_infinite().to_string(), num(curve.zero_location)]);
    }
    t
}

fn rate_rows(curve: &RateFunctionCurve) -> Value {
    json!(curve
        .points
        .iter()
        .map(|p| json!({
            "x": p.x,
            "value": if p.is_infinite() { jnum(f64::INFINITY) } else { jnum(p.value) },
            "is_infinite": p.is_infinite(),
            "kind": p.kind,
            "lower_bound": jnum(p.value),
            "theta_star": jnum(p.theta_star),
        }))
        .collect::<Vec<_>>())
}

fn rate_points(curve: &RateFunctionCurve) -> Vec<(f64, f64)> {
    curve
        .points
        .iter()
        .map(|p| (p.x, if p.is_infinite() { f64::INFINITY } else { p.value }))
        .collect()
}

/// Sup-norm distance between two rate curves on the same grid.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Distance {
    /// `+∞` when one curve is infinite where the other is finite.
    pub sup: f64,
    /// Sup over points where both are finite.
    pub finite_sup: f64,
    /// `x` attaining `finite_sup`.
    pub argmax: f64,
    /// Points where exactly one curve is infinite.
    pub mismatched: usize,
}

pub fn rate_distance(a: &RateFunctionCurve, b: &RateFunctionCurve) -> Distance {
    let mut d = Distance { sup: 0.0, finite_sup: 0.0, argmax: f64::NAN, mismatched: 0 };
    for (p, r) in a.points.iter().zip(&b.points) {
        match (p.is_infinite(), r.is_infinite()) {
            (true, true) => {}
            (false, false) => {
                let e = (p.value - r.value).abs();
                if e > d.finite_sup || d.argmax.is_nan() {
                    d.finite_sup = e;
                    d.argmax = p.x;
                }
            }
            _ => d.mismatched += 1,
        }
    }
    d.sup = if d.mismatched > 0 { f64::INFINITY } else { d.finite_sup };
    d
}

fn geometric_rate(cfg: &RunConfig, q: usize) -> Result<RateFunctionCurve, CliError> {
    let (_, curve) = geometric_curve(&cfg.function, q, &cfg.theta_grid)?;
    Ok(gartner_ellis_rate(&curve, &cfg.x_grid, cfg.theta_max)?)
}

fn iid_rate(cfg: &RunConfig) -> Result<RateFunctionCurve, CliError> {
    Ok(gartner_ellis_rate(&IidCgf(&cfg.function), &cfg.x_grid, cfg.theta_max)?)
}

pub fn cmd_rate(cfg: &RunConfig, out: &mut OutputDir) -> Result<(), CliError> {
    let curve = match cfg.mode {
        Mode::Iid => iid_rate(cfg)?,
        Mode::Geometric => geometric_rate(cfg, cfg.q)?,
    };
    let mut doc = header(cfg);
    doc["mode"] = json!(cfg.mode);
    doc["zero_location"] = jnum(curve.zero_location);
    doc["rows"] = rate_rows(&curve);
    let mut plot = Plot::new(&format!("Rate function ({})", mode_label(cfg)), "x", "I(x)");
    plot.series.push(Series { label: mode_label(cfg), points: rate_points(&curve) });
    if cfg.mode == Mode::Geometric {
        let iid = iid_rate(cfg)?;
        let d = rate_distance(&curve, &iid);
        doc["q"] = json!(cfg.q);
        doc["sup_difference_vs_iid"] = jnum(d.sup);
        doc["finite_sup_difference_vs_iid"] = jnum(d.finite_sup);
        doc["argmax_x"] = jnum(d.argmax);
        doc["infinite_mismatches"] = json!(d.mismatched);
        plot.series.push(Series { label: "iid".into(), points: rate_points(&iid) });
    }
    let flags: Vec<bool> = curve.points.iter().map(|p| p.is_infinite()).collect();
    plot.shaded = flagged_intervals(&curve.x_grid(), &flags);
    plot.shaded_label = "I = +inf".into();
    emit(cfg, out, "rate", &rate_table(&curve), doc, Some(plot))
}

pub fn cmd_sweep_q(cfg: &RunConfig, out: &mut OutputDir) -> Result<(), CliError> {
    let iid = iid_rate(cfg)?;
    let mut table = Table::new(&["q", "sup_distance", "finite_sup_distance", "argmax_x", "infinite_mismatches"]);
    let mut curves = Table::new(&["curve", "x", "value", "is_infinite"]);
    let mut rows = Vec::new();
    let mut plot = Plot::new("Rate functions by q", "x", "I(x)");
    let mut push_curve = |label: &str, c: &RateFunctionCurve, curves: &mut Table| {
        for p in &c.points {
            let v = if p.is_infinite() { f64::INFINITY } else { p.value };
            curves.push(vec![label.to_string(), num(p.x), num(v), p.is_infinite().to_string()]);
        }
        plot.series.push(Series { label: label.to_string(), points: rate_points(c) });
    };
    push_curve("iid", &iid, &mut curves);
    for &q in &cfg.q_list {
        let rate = geometric_rate(cfg, q)?;
        let d = rate_distance(&rate, &iid);
        table.push(vec![
            q.to_string(),
            num(d.sup),
            num(d.finite_sup),
            num(d.argmax),
            d.mismatched.to_string(),
        ]);
        rows.push(json!({
            "q": q, "sup_distance": jnum(d.sup), "finite_sup_distance": jnum(d.finite_sup),
            "argmax_x": jnum(d.argmax), "infinite_mismatches": d.mismatched,
        }));
        push_curve(&format!("q={q}"), &rate, &mut curves);
    }
    let mut doc = header(cfg);
    doc["x_range"] = json!([cfg.x_grid[0], cfg.x_grid[cfg.x_grid.len() - 1]]);
    doc["rows"] = json!(rows);
    let curves_csv = curves.to_csv();
    if cfg.wants(Format::Csv) {
        out.write("sweep_curves.csv", curves_csv.as_bytes())?;
    }
    if cfg.wants(Format::Svg) {
        out.write("sweep.svg", render(&plot, &sha256_hex(curves_csv.as_bytes())).as_bytes())?;
    }
    emit(cfg, out, "sweep", &table, doc, None)
}

fn method_name(m: MgfMethod) -> &'static str {
    match m {
        MgfMethod::ExactQuadrature => "exact_quadrature",
        MgfMethod::MonteCarlo => "monte_carlo",
    }
}

/// Exact quadrature when within budget, Monte Carlo otherwise.
pub fn mgf_auto(cfg: &RunConfig, n: usize, theta: f64) -> Result<MgfRecord, CliError> {
    match exact_mgf(&cfg.function, &cfg.sequence, n, theta) {
        Err(Error::Budget { .. }) => Ok(mc_mgf(&cfg.function, &cfg.sequence, n, theta, cfg.samples, cfg.seed)?),
        r => Ok(r?),
    }
}

pub fn cmd_empirical(cfg: &RunConfig, out: &mut OutputDir) -> Result<(), CliError> {
    let mut table = Table::new(&["n", "theta", "mgf", "log_mgf", "scaled_cgf", "method", "error_estimate"]);
    let mut rows = Vec::new();
    let mut plot = Plot::new(
        &format!("(1/n) log E[exp(theta S_n)], {}", cfg.sequence.label()),
        "theta",
        "scaled CGF",
    );
    for n in 1..=cfg.n {
        let mut points = Vec::new();
        for &t in &cfg.theta_grid {
            let r = mgf_auto(cfg, n, t)?;
            let scaled = r.log_value / n as f64;
            table.push(vec![
                n.to_string(),
                num(t),
                num(r.value),
                num(r.log_value),
                num(scaled),
                method_name(r.method).into(),
                num(r.error_estimate),
            ]);
            rows.push(json!({
                "n": n, "theta": t, "mgf": jnum(r.value), "log_mgf": jnum(r.log_value),
                "scaled_cgf": jnum(scaled), "method": r.method, "error_estimate": jnum(r.error_estimate),
            }));
            points.push((t, scaled));
        }
        plot.series.push(Series { label: format!("n={n}"), points });
    }
    let mut doc = header(cfg);
    doc["sequence"] = json!(cfg.sequence);
    doc["seed"] = json!(cfg.seed);
    doc["samples"] = json!(cfg.samples);
    doc["rows"] = json!(rows);
    emit(cfg, out, "empirical", &table, doc, Some(plot))
}

pub fn cmd_dio(cfg: &RunConfig, out: &mut OutputDir) -> Result<(), CliError> {
    let n = match (cfg.sequence.available(), cfg.n_given) {
        (Some(avail), None) => avail,
        _ => cfg.n,
    };
    let terms = cfg.sequence.terms(n)?;
    let mut table = Table::new(&["n", "m", "total", "nontrivial"]);
    let mut rows = Vec::new();
    let mut points = Vec::new();
    let mut record = |c: lacunary_ldp::numtheory::SolutionCount, table: &mut Table| {
        table.push(vec![c.n.to_string(), c.m.to_string(), c.total.to_string(), c.nontrivial.to_string()]);
        points.push((c.n as f64, (c.total as f64).log10()));
        rows.push(json!({
            "n": c.n, "m": c.m, "terms": c.sequence,
            "total": c.total.to_string(), "nontrivial": c.nontrivial.to_string(),
        }));
    };
    match cfg.window {
        Some(w) => record(count_solutions(&terms, cfg.m, Some(w))?, &mut table),
        None => {
            // the full count first, so an infeasible n fails before the prefixes run
            let full = count_solutions(&terms, cfg.m, None)?;
            for k in 1..n {
                record(count_solutions(&terms[..k], cfg.m, None)?, &mut table);
            }
            record(full, &mut table);
        }
    }
    let mut doc = header(cfg);
    doc.as_object_mut().expect("header is an object").remove("function");
    doc["sequence"] = json!(cfg.sequence);
    doc["rows"] = json!(rows);
    if let Some(d) = cfg.d {
        let g = verify_gap_condition(&terms, cfg.m, d)?;
        let dm = cfg.m * d;
        let bound = extremal_lower_bound(&terms[g.k0.unwrap_or(0).min(n)..], dm);
        doc["gap_condition"] = json!({
            "m": cfg.m, "d": d, "k0": g.k0, "certified": g.certified,
            "lower_bound_ok": g.lower_bound_ok, "extremal_lower_bound": bound.to_string(),
        });
    }
    let mut plot = Plot::new(&format!("Solution counts, m={}", cfg.m), "n", "log10(total)");
    plot.series.push(Series { label: cfg.sequence.label(), points });
    emit(cfg, out, "dio", &table, doc, Some(plot))
}
