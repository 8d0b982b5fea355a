//! Run configuration: a strict JSON file merged with command-line flags.

use std::collections::BTreeSet;
use std::fs;
use std::path::{Path, PathBuf};

use clap::{Args, ValueEnum};
use lacunary_ldp::empirical::DEFAULT_SEED;
use lacunary_ldp::iid_cgf::default_theta_grid;
use lacunary_ldp::legendre::DEFAULT_THETA_MAX;
use lacunary_ldp::{GapSequence, PeriodicFunctionSpec};
use serde::{Deserialize, Serialize};

use crate::CliError;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Command {
    Cgf,
    Rate,
    SweepQ,
    Empirical,
    Verify,
    Dio,
}

impl Command {
    pub fn name(&self) -> &'static str {
        match self {
            Command::Cgf => "cgf",
            Command::Rate => "rate",
            Command::SweepQ => "sweep-q",
            Command::Empirical => "empirical",
            Command::Verify => "verify",
            Command::Dio => "dio",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, ValueEnum)]
#[serde(rename_all = "snake_case")]
pub enum Mode {
    Iid,
    Geometric,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Format {
    Csv,
    Json,
    Svg,
}

impl Format {
    fn parse(s: &str) -> Result<Self, CliError> {
        match s.trim() {
            "csv" => Ok(Format::Csv),
            "json" => Ok(Format::Json),
            "svg" => Ok(Format::Svg),
            other => Err(CliError::config(format!("unknown format '{other}' (expected csv, json, svg)"))),
        }
    }
}

/// A grid written as `"lo:hi:step"`, a single number, an explicit list or `{lo, hi, step}`.
#[derive(Debug, Clone, PartialEq, Deserialize)]
#[serde(untagged)]
pub enum GridSpec {
    Text(String),
    Value(f64),
    List(Vec<f64>),
    Range(RangeSpec),
}

#[derive(Debug, Clone, Copy, PartialEq, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RangeSpec {
    pub lo: f64,
    pub hi: f64,
    pub step: f64,
}

pub fn range_grid(lo: f64, hi: f64, step: f64) -> Result<Vec<f64>, CliError> {
    if !(lo.is_finite() && hi.is_finite() && step.is_finite()) {
        return Err(CliError::config("grid bounds must be finite"));
    }
    if lo > hi {
        return Err(CliError::config(format!("grid lower bound {lo} exceeds upper bound {hi}")));
    }
    if lo == hi {
        return Ok(vec![lo]);
    }
    if !(step > 0.0) {
        return Err(CliError::config("grid step must be positive"));
    }
    let steps = (hi - lo) / step;
    let count = steps.round();
    if (steps - count).abs() > 1e-9 * steps.max(1.0) {
        return Err(CliError::config(format!(
            "grid {lo}:{hi}:{step} does not divide into whole steps"
        )));
    }
    if count > 1e6 {
        return Err(CliError::config("grid has more than a million points"));
    }
    let count = count as usize;
    Ok((0..=count)
        .map(|i| if i == count { hi } else { lo + step * i as f64 })
        .collect())
}

impl GridSpec {
    pub fn parse_text(s: &str) -> Result<Vec<f64>, CliError> {
        let num = |t: &str| {
            t.trim()
                .parse::<f64>()
                .map_err(|_| CliError::config(format!("bad number '{t}' in grid '{s}'")))
        };
        let parts: Vec<&str> = s.split(':').collect();
        match parts.as_slice() {
            [v] => Ok(vec![num(v)?]),
            [lo, hi, step] => range_grid(num(lo)?, num(hi)?, num(step)?),
            _ => Err(CliError::config(format!("grid '{s}' is not of the form lo:hi:step"))),
        }
    }

    pub fn resolve(&self) -> Result<Vec<f64>, CliError> {
        let grid = match self {
            GridSpec::Text(s) => Self::parse_text(s)?,
            GridSpec::Value(v) => vec![*v],
            GridSpec::List(v) => v.clone(),
            GridSpec::Range(r) => range_grid(r.lo, r.hi, r.step)?,
        };
        if grid.is_empty() {
            return Err(CliError::config("grid is empty"));
        }
        if grid.iter().any(|v| !v.is_finite()) {
            return Err(CliError::config("grid values must be finite"));
        }
        if grid.windows(2).any(|w| !(w[0] < w[1])) {
            return Err(CliError::config("grid must be strictly increasing"));
        }
        Ok(grid)
    }
}

/// Overrides for module defaults.
#[derive(Debug, Clone, Default, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Tolerances {
    pub theta_max: Option<f64>,
}

/// The JSON config file; every key is optional and unknown keys are rejected.
#[derive(Debug, Clone, Default, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ConfigFile {
    pub command: Option<Command>,
    pub function: Option<serde_json::Value>,
    pub mode: Option<Mode>,
    pub q: Option<usize>,
    pub q_list: Option<Vec<usize>>,
    pub sequence: Option<serde_json::Value>,
    pub theta_grid: Option<GridSpec>,
    pub x_grid: Option<GridSpec>,
    pub n: Option<usize>,
    pub m: Option<u64>,
    pub d: Option<u64>,
    pub window: Option<(usize, usize)>,
    pub samples: Option<usize>,
    pub seed: Option<u64>,
    pub output: Option<PathBuf>,
    pub formats: Option<Vec<Format>>,
    pub tolerances: Option<Tolerances>,
}

impl ConfigFile {
    pub fn load(path: &Path) -> Result<Self, CliError> {
        let text = fs::read_to_string(path)
            .map_err(|e| CliError::config(format!("cannot read config {}: {e}", path.display())))?;
        Self::parse(&text)
    }

    pub fn parse(text: &str) -> Result<Self, CliError> {
        serde_json::from_str(text).map_err(|e| CliError::config(format!("config: {e}")))
    }
}

/// Flags shared by every subcommand; each overrides the matching config key.
#[derive(Debug, Clone, Default, Args)]
pub struct CommonArgs {
    /// JSON config file.
    #[arg(long, value_name = "PATH")]
    pub config: Option<PathBuf>,
    /// Function as JSON, `@file`, or a builtin name.
    #[arg(long, value_name = "JSON|@FILE|NAME")]
    pub function: Option<String>,
    #[arg(long, value_enum)]
    pub mode: Option<Mode>,
    /// Ratio of the geometric sequence `a_k = q^k`.
    #[arg(long)]
    pub q: Option<usize>,
    /// Comma-separated list of ratios for sweep-q.
    #[arg(long, value_name = "Q,Q,...")]
    pub q_list: Option<String>,
    /// `geometric:Q`, `shifted_geometric:Q:S`, `factorial`, `super_exp:B`,
    /// comma-separated terms, or a JSON object.
    #[arg(long)]
    pub sequence: Option<String>,
    #[arg(long, value_name = "LO:HI:STEP")]
    pub theta_grid: Option<String>,
    #[arg(long, value_name = "LO:HI:STEP")]
    pub x_grid: Option<String>,
    #[arg(long)]
    pub n: Option<usize>,
    /// Coefficient bound for Diophantine counts.
    #[arg(long)]
    pub m: Option<u64>,
    /// Polynomial degree for the gap condition.
    #[arg(long)]
    pub d: Option<u64>,
    /// 1-based inclusive term window `START:END` for dio.
    #[arg(long, value_name = "START:END")]
    pub window: Option<String>,
    /// Monte-Carlo sample count.
    #[arg(long)]
    pub samples: Option<usize>,
    #[arg(long)]
    pub seed: Option<u64>,
    #[arg(long, value_name = "DIR")]
    pub out: Option<PathBuf>,
    /// Comma-separated subset of csv, json, svg.
    #[arg(long = "format", value_name = "csv,json,svg")]
    pub format: Option<String>,
}

/// Fully resolved settings for one command.
#[derive(Debug, Clone)]
pub struct RunConfig {
    pub command: Command,
    pub function: PeriodicFunctionSpec,
    pub mode: Mode,
    pub q: usize,
    pub q_list: Vec<usize>,
    pub sequence: GapSequence,
    pub theta_grid: Vec<f64>,
    pub x_grid: Vec<f64>,
    pub n: usize,
    /// `n` as given, before defaults.
    pub n_given: Option<usize>,
    pub m: u64,
    pub d: Option<u64>,
    pub window: Option<(usize, usize)>,
    pub samples: usize,
    pub seed: u64,
    pub output: PathBuf,
    pub formats: BTreeSet<Format>,
    pub theta_max: f64,
}

pub const DEFAULT_Q_LIST: [usize; 5] = [2, 4, 8, 16, 32];
pub const DEFAULT_SAMPLES: usize = 100_000;

pub fn parse_function(text: &str) -> Result<PeriodicFunctionSpec, CliError> {
    let text = text.trim();
    if let Some(path) = text.strip_prefix('@') {
        let body = fs::read_to_string(path)
            .map_err(|e| CliError::config(format!("cannot read function file {path}: {e}")))?;
        return Ok(PeriodicFunctionSpec::from_json(&body)?);
    }
    if text.starts_with('{') {
        return Ok(PeriodicFunctionSpec::from_json(text)?);
    }
    Ok(PeriodicFunctionSpec::from_json(&serde_json::json!({"type": "builtin", "name": text}).to_string())?)
}

fn function_from_value(v: &serde_json::Value) -> Result<PeriodicFunctionSpec, CliError> {
    match v {
        serde_json::Value::String(s) => parse_function(s),
        other => Ok(PeriodicFunctionSpec::from_json(&other.to_string())?),
    }
}

pub fn parse_sequence(text: &str) -> Result<GapSequence, CliError> {
    let text = text.trim();
    let int = |t: &str| {
        t.trim()
            .parse::<u64>()
            .map_err(|_| CliError::config(format!("bad integer '{t}' in sequence '{text}'")))
    };
    let seq = if text.starts_with('{') {
        serde_json::from_str(text).map_err(|e| CliError::config(format!("sequence: {e}")))?
    } else {
        let parts: Vec<&str> = text.split(':').collect();
        match parts.as_slice() {
            ["geometric", q] => GapSequence::Geometric { q: int(q)? },
            ["shifted_geometric", q, s] => GapSequence::ShiftedGeometric { q: int(q)?, shift: int(s)? },
            ["factorial"] => GapSequence::Factorial,
            ["super_exp", b] => GapSequence::SuperExp { base: int(b)? },
            [list] if list.contains(',') || list.trim().parse::<u64>().is_ok() => {
                GapSequence::Explicit { terms: list.split(',').map(int).collect::<Result<_, _>>()? }
            }
            _ => return Err(CliError::config(format!("unrecognised sequence '{text}'"))),
        }
    };
    seq.validate()?;
    Ok(seq)
}

fn sequence_from_value(v: &serde_json::Value) -> Result<GapSequence, CliError> {
    match v {
        serde_json::Value::String(s) => parse_sequence(s),
        serde_json::Value::Array(_) => {
            let terms: Vec<u64> = serde_json::from_value(v.clone())
                .map_err(|e| CliError::config(format!("sequence: {e}")))?;
            let seq = GapSequence::Explicit { terms };
            seq.validate()?;
            Ok(seq)
        }
        other => {
            let seq: GapSequence = serde_json::from_value(other.clone())
                .map_err(|e| CliError::config(format!("sequence: {e}")))?;
            seq.validate()?;
            Ok(seq)
        }
    }
}

fn parse_list<T: std::str::FromStr>(s: &str, what: &str) -> Result<Vec<T>, CliError> {
    s.split(',')
        .map(|t| t.trim().parse::<T>().map_err(|_| CliError::config(format!("bad {what} '{t}'"))))
        .collect()
}

/// `x` grid spanning the range of `f`: shrunk by 10% of its width at both
/// ends for sweeps (32 steps), widened by 10% for rate curves (48 steps).
pub fn default_x_grid(spec: &PeriodicFunctionSpec, command: Command) -> Vec<f64> {
    let (lo, hi) = spec.value_range();
    let w = hi - lo;
    if !(w > 1e-12) {
        return vec![0.5 * (lo + hi)];
    }
    let (a, b, steps) = match command {
        Command::SweepQ => (lo + 0.1 * w, hi - 0.1 * w, 32),
        _ => (lo - 0.1 * w, hi + 0.1 * w, 48),
    };
    (0..=steps)
        .map(|i| if i == steps { b } else { a + (b - a) * i as f64 / steps as f64 })
        .collect()
}

impl RunConfig {
    pub fn resolve(command: Command, args: &CommonArgs) -> Result<Self, CliError> {
        let file = match &args.config {
            Some(p) => ConfigFile::load(p)?,
            None => ConfigFile::default(),
        };
        Self::merge(command, file, args)
    }

    pub fn merge(command: Command, file: ConfigFile, args: &CommonArgs) -> Result<Self, CliError> {
        if let Some(c) = file.command {
            if c != command {
                return Err(CliError::config(format!(
                    "config is for '{}' but '{}' was requested",
                    c.name(),
                    command.name()
                )));
            }
        }
        let function = match (&args.function, &file.function) {
            (Some(s), _) => parse_function(s)?,
            (None, Some(v)) => function_from_value(v)?,
            (None, None) => PeriodicFunctionSpec::cosine(),
        };
        let mode = args.mode.or(file.mode).unwrap_or(Mode::Iid);
        let q = args.q.or(file.q).unwrap_or(2);
        if q < 2 {
            return Err(CliError::config("q must be at least 2"));
        }
        let q_list = match (&args.q_list, file.q_list) {
            (Some(s), _) => parse_list(s, "q")?,
            (None, Some(l)) => l,
            (None, None) => match args.q.or(file.q) {
                Some(q) => vec![q],
                None => DEFAULT_Q_LIST.to_vec(),
            },
        };
        if q_list.is_empty() || q_list.iter().any(|&q| q < 2) {
            return Err(CliError::config("q list must be non-empty with every q at least 2"));
        }
        let sequence = match (&args.sequence, &file.sequence) {
            (Some(s), _) => parse_sequence(s)?,
            (None, Some(v)) => sequence_from_value(v)?,
            (None, None) => GapSequence::Geometric { q: q as u64 },
        };
        let theta_grid = match (&args.theta_grid, &file.theta_grid) {
            (Some(s), _) => GridSpec::Text(s.clone()).resolve()?,
            (None, Some(g)) => g.resolve()?,
            (None, None) if command == Command::Empirical => range_grid(-2.0, 2.0, 0.5)?,
            (None, None) => default_theta_grid(),
        };
        let x_grid = match (&args.x_grid, &file.x_grid) {
            (Some(s), _) => GridSpec::Text(s.clone()).resolve()?,
            (None, Some(g)) => g.resolve()?,
            (None, None) => default_x_grid(&function, command),
        };
        let n = args.n.or(file.n).unwrap_or(match command {
            Command::Dio => 4,
            _ => 8,
        });
        if n < 1 {
            return Err(CliError::config("n must be at least 1"));
        }
        let m = args.m.or(file.m).unwrap_or(1);
        let window = match (&args.window, file.window) {
            (Some(s), _) => {
                let v: Vec<usize> = s
                    .split(':')
                    .map(|t| t.trim().parse().map_err(|_| CliError::config(format!("bad window '{s}'"))))
                    .collect::<Result<_, _>>()?;
                match v.as_slice() {
                    [a, b] => Some((*a, *b)),
                    _ => return Err(CliError::config(format!("window '{s}' is not START:END"))),
                }
            }
            (None, w) => w,
        };
        let formats: BTreeSet<Format> = match (&args.format, file.formats) {
            (Some(s), _) => s.split(',').map(Format::parse).collect::<Result<_, _>>()?,
            (None, Some(f)) => f.into_iter().collect(),
            (None, None) => [Format::Csv, Format::Json, Format::Svg].into_iter().collect(),
        };
        if formats.is_empty() {
            return Err(CliError::config("no output formats selected"));
        }
        let theta_max = file
            .tolerances
            .and_then(|t| t.theta_max)
            .unwrap_or(DEFAULT_THETA_MAX);
        if !(theta_max > 0.0 && theta_max.is_finite()) {
            return Err(CliError::config("tolerances.theta_max must be positive and finite"));
        }
        let samples = args.samples.or(file.samples).unwrap_or(DEFAULT_SAMPLES);
        if samples < 1 {
            return Err(CliError::config("samples must be at least 1"));
        }
        Ok(RunConfig {
            command,
            function,
            mode,
            q,
            q_list,
            sequence,
            theta_grid,
            x_grid,
            n,
            n_given: args.n.or(file.n),
            m,
            d: args.d.or(file.d),
            window,
            samples,
            seed: args.seed.or(file.seed).unwrap_or(DEFAULT_SEED),
            output: args.out.clone().or(file.output).unwrap_or_else(|| PathBuf::from("out")),
            formats,
            theta_max,
        })
    }

    pub fn wants(&self, f: Format) -> bool {
        self.formats.contains(&f)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn text_grids() {
        assert_eq!(GridSpec::parse_text("0").unwrap(), vec![0.0]);
        assert_eq!(GridSpec::parse_text("-1:1:0.5").unwrap(), vec![-1.0, -0.5, 0.0, 0.5, 1.0]);
        assert!(GridSpec::parse_text("0:1:0.3").is_err());
        assert!(GridSpec::parse_text("1:0:0.5").is_err());
        assert!(GridSpec::parse_text("a:b").is_err());
    }

    #[test]
    fn unknown_keys_are_rejected() {
        assert!(ConfigFile::parse(r#"{"thetagrid": "0:1:0.5"}"#).is_err());
        assert!(ConfigFile::parse(r#"{"tolerances": {"grid_tol": 1e-9}}"#).is_err());
        let c = ConfigFile::parse(r#"{"theta_grid": {"lo": 0, "hi": 1, "step": 0.5}, "q": 3}"#).unwrap();
        assert_eq!(c.q, Some(3));
    }

    #[test]
    fn flags_override_file() {
        let file = ConfigFile::parse(r#"{"q": 3, "mode": "geometric", "seed": 5}"#).unwrap();
        let args = CommonArgs { q: Some(4), ..Default::default() };
        let c = RunConfig::merge(Command::Cgf, file, &args).unwrap();
        assert_eq!((c.q, c.mode, c.seed), (4, Mode::Geometric, 5));
    }

    #[test]
    fn sweep_default_x_grid() {
        let g = default_x_grid(&PeriodicFunctionSpec::cosine(), Command::SweepQ);
        assert_eq!(g.len(), 33);
        assert!((g[0] + 0.8).abs() < 1e-15 && (g[32] - 0.8).abs() < 1e-15);
        assert!((g[1] - g[0] - 0.05).abs() < 1e-12);
    }

    #[test]
    fn sequences() {
        assert_eq!(parse_sequence("2,4").unwrap(), GapSequence::explicit(vec![2, 4]));
        assert_eq!(parse_sequence("geometric:3").unwrap(), GapSequence::geometric(3));
        assert_eq!(parse_sequence("factorial").unwrap(), GapSequence::Factorial);
        assert!(parse_sequence("4,2").is_err());
        assert!(parse_sequence("geometric:1").is_err());
    }
}
