use std::path::Path;

use serde::Serialize;

use crate::model::{AuditSampling, ProblemSpec, Warning};
use crate::oracle::{
    flux_from_profile, flux_integral, ivp_shoot_full, relative_sup_distance, residual_ode, write_profile_csv,
    ResidualReport,
};
use crate::quadrature::{NumericError, RadialGrid};
use crate::solver::{solve_with, SolveError, SolveReport};

use super::{
    write_file, write_json, CliError, Format, RunConfig, EXIT_NONCONVERGENCE, EXIT_OK, EXIT_OVERFLOW,
};

/// Relative sup distance allowed between the fixed point and the oracle.
pub const ORACLE_TOL: f64 = 1e-4;
/// Integral residual allowed, in units of the solver tolerance.
pub const INTEGRAL_RESIDUAL_FACTOR: f64 = 10.0;
/// Relative flux mismatch allowed between differencing and integration.
pub const FLUX_TOL: f64 = 1e-3;

/// Contents of `report.json`.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SolveArtifact {
    pub solve: SolveReport,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub residual: Option<ResidualReport>,
    pub warnings: Vec<Warning>,
}

/// Solver outcome with the exit code it maps to.
pub(super) struct SolveOutcome {
    pub report: SolveReport,
    pub code: i32,
}

pub(super) fn run_solver(cfg: &RunConfig, spec: &ProblemSpec, grid: &RadialGrid) -> Result<SolveOutcome, CliError> {
    match solve_with(spec, grid, &cfg.solve_options()?) {
        Ok(report) => Ok(SolveOutcome { report, code: EXIT_OK }),
        Err(SolveError::NonConvergence(report)) => Ok(SolveOutcome { report: *report, code: EXIT_NONCONVERGENCE }),
        Err(SolveError::Overflow { report, .. }) => Ok(SolveOutcome { report: *report, code: EXIT_OVERFLOW }),
        Err(SolveError::Numeric(NumericError::Overflow { radius, what })) => {
            Err(CliError::Numeric(NumericError::Overflow { radius, what }))
        }
        Err(e) => Err(CliError::Config(e.to_string())),
    }
}

pub(super) fn profile_csv(report: &SolveReport) -> Result<Vec<u8>, CliError> {
    let mut buf = Vec::new();
    write_profile_csv(&mut buf, &report.final_profile, &report.final_derivative)
        .map_err(|e| CliError::Config(e.to_string()))?;
    Ok(buf)
}

pub fn cmd_solve(cfg: &RunConfig, dir: &Path) -> Result<i32, CliError> {
    let spec = cfg.spec()?;
    let grid = cfg.radial_grid()?;
    let SolveOutcome { mut report, code } = run_solver(cfg, &spec, &grid)?;
    let residual = if code == EXIT_OK {
        let r = residual_ode(&spec, &report.final_profile)?;
        report.residual_norm = Some(r.integral_residual);
        Some(r)
    } else {
        None
    };
    match code {
        EXIT_OK => log::info!("converged in {} iterations", report.iterations),
        EXIT_NONCONVERGENCE => log::error!("no convergence after {} iterations", report.iterations),
        _ => log::error!("blow-up near r = {}", report.blowup_radius.unwrap_or(f64::NAN)),
    }
    if cfg.output.wants(Format::Csv) {
        write_file(&dir.join("solution.csv"), &profile_csv(&report)?)?;
    }
    if cfg.output.wants(Format::Json) {
        let warnings = spec.validate(&AuditSampling { r_max: grid.r_max(), ..Default::default() }).warnings;
        write_json(&dir.join("report.json"), &SolveArtifact { solve: report, residual, warnings })?;
    }
    Ok(code)
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct VerifyRow {
    pub check: String,
    pub value: f64,
    pub tolerance: f64,
    pub pass: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct OrderRow {
    pub resolution: usize,
    pub error: f64,
    /// `error(previous) / error(this)`.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub ratio: Option<f64>,
}

/// Contents of `verify.json`.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct VerifyReport {
    pub pass: bool,
    pub rows: Vec<VerifyRow>,
    /// Fixed-point error against the oracle at `M/4, M/2, M`.
    pub grid_order: Vec<OrderRow>,
    /// Oracle difference from the full run at `steps/400, steps/200, steps/100`
    /// (finer runs sit at roundoff).
    pub step_order: Vec<OrderRow>,
    pub residual: ResidualReport,
}

fn with_ratios(rows: Vec<(usize, f64)>) -> Vec<OrderRow> {
    let mut out: Vec<OrderRow> = Vec::with_capacity(rows.len());
    for (resolution, error) in rows {
        let ratio = out.last().map(|p| p.error / error);
        out.push(OrderRow { resolution, error, ratio });
    }
    out
}

fn row(check: &str, value: f64, tolerance: f64) -> VerifyRow {
    VerifyRow { check: check.into(), value, tolerance, pass: value <= tolerance }
}

pub fn cmd_verify(cfg: &RunConfig, dir: &Path) -> Result<i32, CliError> {
    let spec = cfg.spec()?;
    let grid = cfg.radial_grid()?;
    let steps = cfg.oracle_steps()?;
    let SolveOutcome { report, code } = run_solver(cfg, &spec, &grid)?;
    if code != EXIT_OK {
        log::error!("solver did not converge; nothing to verify");
        return Ok(code);
    }
    let prof = &report.final_profile;
    let oracle = ivp_shoot_full(&spec, cfg.grid.r_max, steps)?;
    let residual = residual_ode(&spec, prof)?;

    let wd = flux_from_profile(&spec, prof)?;
    let wi = flux_integral(&spec, prof)?;
    let flux_err = (0..2)
        .map(|j| {
            let scale = wi[j].iter().fold(0.0f64, |a, b| a.max(b.abs()));
            let err = wd[j].iter().zip(&wi[j]).map(|(a, b)| (a - b).abs()).fold(0.0, f64::max);
            if scale > 0.0 {
                err / scale
            } else {
                err
            }
        })
        .fold(0.0, f64::max);

    let rows = vec![
        row("oracle_agreement", relative_sup_distance(&oracle.profile, prof), ORACLE_TOL),
        row("integral_residual", residual.integral_residual, INTEGRAL_RESIDUAL_FACTOR * cfg.solver.tol),
        row("flux_recovery", flux_err, FLUX_TOL),
    ];

    let mut grid_errors = Vec::new();
    for m in [cfg.grid.m / 4, cfg.grid.m / 2] {
        if m < 2 {
            continue;
        }
        let coarse = RadialGrid::graded(cfg.grid.r_max, m, cfg.grid.gamma)?;
        let r = run_solver(cfg, &spec, &coarse)?;
        if r.code == EXIT_OK {
            grid_errors.push((m, relative_sup_distance(&oracle.profile, &r.report.final_profile)));
        }
    }
    grid_errors.push((cfg.grid.m, rows[0].value));

    let mut step_errors = Vec::new();
    for d in [400, 200, 100] {
        let s = steps / d;
        if steps % d == 0 && s >= crate::oracle::MIN_STEPS {
            let coarse = ivp_shoot_full(&spec, cfg.grid.r_max, s)?;
            step_errors.push((s, relative_sup_distance(&oracle.profile, &coarse.profile)));
        }
    }

    let pass = rows.iter().all(|r| r.pass);
    for r in &rows {
        log::info!("{}: {:e} (tolerance {:e}) {}", r.check, r.value, r.tolerance, if r.pass { "pass" } else { "FAIL" });
    }
    let out = VerifyReport {
        pass,
        rows,
        grid_order: with_ratios(grid_errors),
        step_order: with_ratios(step_errors),
        residual,
    };
    if cfg.output.wants(Format::Json) {
        write_json(&dir.join("verify.json"), &out)?;
    }
    Ok(if pass { EXIT_OK } else { EXIT_NONCONVERGENCE })
}
