//! Subcommand orchestration behind the `kosolve` binary.
//!
//! Exit codes: 0 success, 1 configuration or validation error, 2 solver
//! non-convergence (or unmet verification tolerances), 3 blow-up.

mod classify;
mod config;
mod solve;
mod sweep;

use std::path::{Path, PathBuf};

pub use classify::{
    classify, cmd_classify, summarize, ClassifyReport, SUMMARY_BOUNDED, SUMMARY_INCONCLUSIVE, SUMMARY_KO_FAILS, SUMMARY_LARGE,
};
pub use config::{
    expand_sweep, fmt_num, ConditionsConfig, Format, GridConfig, OracleConfig, OutputConfig, RunConfig, SolverConfig,
    SweepAxis, SweepConfig,
};
pub use solve::{cmd_solve, cmd_verify, SolveArtifact, VerifyReport, VerifyRow};
pub use sweep::{cmd_sweep, plateau_ratio, sweep_rows, SweepRow};

use crate::conditions::ConditionError;
use crate::oracle::OracleError;
use crate::quadrature::NumericError;
use crate::solver::SolveError;

pub const EXIT_OK: i32 = 0;
pub const EXIT_CONFIG: i32 = 1;
pub const EXIT_NONCONVERGENCE: i32 = 2;
pub const EXIT_OVERFLOW: i32 = 3;

#[derive(Debug, thiserror::Error)]
pub enum CliError {
    #[error("configuration: {0}")]
    Config(String),
    #[error("writing {path}: {message}")]
    Output { path: PathBuf, message: String },
    #[error(transparent)]
    Numeric(#[from] NumericError),
    #[error(transparent)]
    Condition(#[from] ConditionError),
}

impl CliError {
    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Numeric(NumericError::Overflow { .. }) => EXIT_OVERFLOW,
            _ => EXIT_CONFIG,
        }
    }
}

impl From<OracleError> for CliError {
    fn from(e: OracleError) -> Self {
        match e {
            OracleError::Numeric(n) => CliError::Numeric(n),
            OracleError::Overflow { radius, .. } => {
                CliError::Numeric(NumericError::Overflow { radius, what: "oracle state".into() })
            }
            other => CliError::Config(other.to_string()),
        }
    }
}

impl From<SolveError> for CliError {
    fn from(e: SolveError) -> Self {
        match e {
            SolveError::Numeric(n) => CliError::Numeric(n),
            SolveError::Overflow { radius, .. } => {
                CliError::Numeric(NumericError::Overflow { radius, what: "iterate".into() })
            }
            other => CliError::Config(other.to_string()),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Command {
    Solve,
    Classify,
    Verify,
    Sweep,
}

/// Where artifacts go: the explicit override, else the configured
/// directory, else the working directory.
pub fn output_dir(cfg: &RunConfig, out: Option<&Path>) -> PathBuf {
    out.map(Path::to_path_buf).or_else(|| cfg.output.directory.clone()).unwrap_or_else(|| PathBuf::from("."))
}

pub(crate) fn write_file(path: &Path, bytes: &[u8]) -> Result<(), CliError> {
    if let Some(dir) = path.parent() {
        std::fs::create_dir_all(dir).map_err(|e| CliError::Output { path: dir.into(), message: e.to_string() })?;
    }
    std::fs::write(path, bytes).map_err(|e| CliError::Output { path: path.into(), message: e.to_string() })
}

pub(crate) fn write_json<T: serde::Serialize>(path: &Path, value: &T) -> Result<(), CliError> {
    let mut text = serde_json::to_string_pretty(value).map_err(|e| CliError::Output {
        path: path.into(),
        message: e.to_string(),
    })?;
    text.push('\n');
    write_file(path, text.as_bytes())
}

/// Runs one subcommand and returns the process exit code. Diagnostics go to
/// the log (standard error).
pub fn run(cmd: Command, config: &Path, out: Option<&Path>) -> i32 {
    let cfg = match RunConfig::load(config) {
        Ok(c) => c,
        Err(e) => {
            log::error!("{e}");
            return EXIT_CONFIG;
        }
    };
    let dir = output_dir(&cfg, out);
    let result = match cmd {
        Command::Solve => cmd_solve(&cfg, &dir),
        Command::Classify => cmd_classify(&cfg, &dir),
        Command::Verify => cmd_verify(&cfg, &dir),
        Command::Sweep => cmd_sweep(&cfg, &dir),
    };
    match result {
        Ok(code) => code,
        Err(e) => {
            log::error!("{e}");
            e.exit_code()
        }
    }
}
