//! Batch front-end for the `lacunary-ldp` library: configs in, CSV/JSON/SVG out.

pub mod commands;
pub mod config;
pub mod output;
pub mod plot;
pub mod verify;

use std::fmt;

use clap::{Parser, Subcommand};

pub use config::{Command, CommonArgs, RunConfig};

#[derive(Debug, Parser)]
#[command(name = "lacldp", version, about = "Large-deviation rate functions for lacunary sums")]
pub struct Cli {
    #[command(subcommand)]
    pub command: CliCommand,
}

#[derive(Debug, Subcommand)]
pub enum CliCommand {
    /// Cumulant generating function on a θ grid.
    Cgf(CommonArgs),
    /// Rate function on an x grid.
    Rate(CommonArgs),
    /// Distance between the geometric and i.i.d. rate functions for several q.
    SweepQ(CommonArgs),
    /// Exact or Monte-Carlo moment generating functions of S_n.
    Empirical(CommonArgs),
    /// Run the named regression checks and write verify.json.
    Verify(CommonArgs),
    /// Diophantine solution counts.
    Dio(CommonArgs),
}

impl CliCommand {
    pub fn split(&self) -> (Command, &CommonArgs) {
        match self {
            CliCommand::Cgf(a) => (Command::Cgf, a),
            CliCommand::Rate(a) => (Command::Rate, a),
            CliCommand::SweepQ(a) => (Command::SweepQ, a),
            CliCommand::Empirical(a) => (Command::Empirical, a),
            CliCommand::Verify(a) => (Command::Verify, a),
            CliCommand::Dio(a) => (Command::Dio, a),
        }
    }
}

#[derive(Debug)]
pub enum CliError {
    Core(lacunary_ldp::Error),
    Config(String),
    Io(std::io::Error),
    /// Names of the checks that failed.
    VerifyFailed(Vec<String>),
}

impl CliError {
    pub fn config(msg: impl Into<String>) -> Self {
        CliError::Config(msg.into())
    }

    /// 1 verification failure, 2 configuration/input error, 3 numerical failure.
    pub fn exit_code(&self) -> i32 {
        use lacunary_ldp::Error as E;
        match self {
            CliError::VerifyFailed(_) => 1,
            CliError::Config(_) | CliError::Io(_) => 2,
            CliError::Core(E::NonConvergence { .. } | E::NonConvex { .. }) => 3,
            CliError::Core(_) => 2,
        }
    }

    pub fn kind(&self) -> &'static str {
        use lacunary_ldp::Error as E;
        match self {
            CliError::VerifyFailed(_) => "verification_failed",
            CliError::Config(_) => "config",
            CliError::Io(_) => "io",
            CliError::Core(e) => match e {
                E::Config(_) => "config",
                E::Argument(_) => "argument",
                E::NonConvex { .. } => "non_convex",
                E::NonConvergence { .. } => "non_convergence",
                E::Budget { .. } => "budget",
                E::Uncertified(_) => "uncertified",
            },
        }
    }

    /// One-line JSON document for standard error.
    pub fn to_json_line(&self) -> String {
        let mut v = serde_json::json!({
            "error": self.kind(),
            "message": self.to_string(),
            "exit_code": self.exit_code(),
        });
        if let CliError::VerifyFailed(names) = self {
            v["failed_checks"] = serde_json::json!(names);
        }
        v.to_string()
    }
}

impl fmt::Display for CliError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            CliError::Core(e) => write!(f, "{e}"),
            CliError::Config(m) => write!(f, "configuration error: {m}"),
            CliError::Io(e) => write!(f, "i/o error: {e}"),
            CliError::VerifyFailed(names) => write!(f, "failed checks: {}", names.join(", ")),
        }
    }
}

impl std::error::Error for CliError {}

impl From<lacunary_ldp::Error> for CliError {
    fn from(e: lacunary_ldp::Error) -> Self {
        CliError::Core(e)
    }
}

impl From<std::io::Error> for CliError {
    fn from(e: std::io::Error) -> Self {
        CliError::Io(e)
    }
}

/// Resolves the configuration and runs one command; returns the written paths.
pub fn run(cli: &Cli) -> Result<Vec<std::path::PathBuf>, CliError> {
    let (command, args) = cli.command.split();
    let cfg = RunConfig::resolve(command, args)?;
    commands::dispatch(&cfg)
}
