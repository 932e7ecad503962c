use std::path::Path;

use serde::Serialize;

use crate::conditions::Status;
use crate::exec::Execution;
use crate::operator::ProfilePair;

use super::classify::{run_classify, ClassifyReport};
use super::solve::{profile_csv, run_solver, SolveOutcome};
use super::{
    expand_sweep, fmt_num, write_file, write_json, CliError, Format, RunConfig, EXIT_NONCONVERGENCE, EXIT_OK,
    EXIT_OVERFLOW,
};

/// `max_j u_j(R) / u_j(R/2)`.
pub fn plateau_ratio(prof: &ProfilePair) -> f64 {
    let r = prof.grid.r_max();
    (0..2)
        .map(|j| {
            let u = prof.component(j);
            u[u.len() - 1] / prof.grid.interpolate(u, r / 2.0)
        })
        .fold(f64::NEG_INFINITY, f64::max)
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SweepRow {
    pub parameters: Vec<(String, f64)>,
    pub ko: Status,
    pub lzz: Status,
    pub large12: [Status; 2],
    pub nonexistence5b: [Status; 2],
    pub bounded5_some: bool,
    pub necessary13_all: bool,
    pub summary: String,
    pub solve_status: String,
    pub iterations: usize,
    pub u_at_rmax: [f64; 2],
    pub plateau_ratio: f64,
    pub plateau_threshold: f64,
    /// `bounded` or `large` from the plateau test; `undetermined` without a solution.
    pub empirical: String,
    /// `bounded`, `large` or `inconclusive` from the verdicts.
    pub verdict: String,
    pub agreement: String,
}

fn verdict_label(c: &ClassifyReport) -> &'static str {
    let large = c.large12.iter().all(|v| v.status == Status::Divergent);
    match (large, c.bounded5.aggregate) {
        (true, false) => "large",
        (false, true) => "bounded",
        (true, true) => "conflicting",
        (false, false) => "inconclusive",
    }
}

fn status_name(s: Status) -> &'static str {
    match s {
        Status::Divergent => "Divergent",
        Status::Convergent => "Convergent",
        Status::Inconclusive => "Inconclusive",
    }
}

struct Cell {
    row: SweepRow,
    classify: ClassifyReport,
    solution: Option<Vec<u8>>,
}

fn run_cell(params: &[(String, f64)], cfg: &RunConfig, threshold: f64, exec: Execution) -> Result<Cell, CliError> {
    let spec = cfg.spec()?;
    let grid = cfg.radial_grid()?;
    let classify = run_classify(cfg, exec)?;
    let SolveOutcome { report, code } = run_solver(cfg, &spec, &grid)?;
    let (solve_status, ratio, empirical) = match code {
        EXIT_OK => {
            let ratio = plateau_ratio(&report.final_profile);
            let label = if ratio < 1.0 + threshold { "bounded" } else { "large" };
            ("converged", ratio, label)
        }
        EXIT_OVERFLOW => ("overflow", f64::INFINITY, "large"),
        _ => ("nonconvergence", f64::NAN, "undetermined"),
    };
    let verdict = verdict_label(&classify);
    let agreement = match (verdict, empirical) {
        ("inconclusive" | "conflicting", _) | (_, "undetermined") => "n/a",
        (v, e) if v == e => "agree",
        _ => "disagree",
    };
    let solution = if code == EXIT_NONCONVERGENCE || code == EXIT_OK { Some(profile_csv(&report)?) } else { None };
    let row = SweepRow {
        parameters: params.to_vec(),
        ko: classify.ko[0].status,
        lzz: classify.lzz.status,
        large12: [classify.large12[0].status, classify.large12[1].status],
        nonexistence5b: [classify.nonexistence5b[0].status, classify.nonexistence5b[1].status],
        bounded5_some: classify.bounded5.aggregate,
        necessary13_all: classify.necessary13.aggregate,
        summary: classify.summary.clone(),
        solve_status: solve_status.into(),
        iterations: report.iterations,
        u_at_rmax: report.u_at_rmax,
        plateau_ratio: ratio,
        plateau_threshold: threshold,
        empirical: empirical.into(),
        verdict: verdict.into(),
        agreement: agreement.into(),
    };
    Ok(Cell { row, classify, solution })
}

/// Evaluates every cell of the sweep. Cells run concurrently under the
/// configured policy; rows come back in cell order.
pub fn sweep_rows(cfg: &RunConfig) -> Result<Vec<(SweepRow, ClassifyReport)>, CliError> {
    Ok(sweep_cells(cfg)?.into_iter().map(|c| (c.row, c.classify)).collect())
}

fn sweep_cells(cfg: &RunConfig) -> Result<Vec<Cell>, CliError> {
    let cells = expand_sweep(cfg)?;
    let threshold = cfg.sweep.as_ref().map(|s| s.plateau_threshold).unwrap_or(1e-3);
    for (_, c) in &cells {
        c.spec()?;
    }
    let exec = cfg.solver.execution;
    // cells fan out; each cell runs its own numerics sequentially
    exec.map_jobs(&cells, |(params, c)| run_cell(params, c, threshold, Execution::Sequential))
        .into_iter()
        .collect()
}

fn regimes_csv(rows: &[SweepRow]) -> Result<Vec<u8>, CliError> {
    let err = |e: csv::Error| CliError::Config(e.to_string());
    let mut w = csv::Writer::from_writer(Vec::new());
    let mut header: Vec<String> = rows[0].parameters.iter().map(|(n, _)| n.clone()).collect();
    header.extend(
        [
            "KO",
            "LZZ",
            "Large12_1",
            "Large12_2",
            "NoBounded5b_1",
            "NoBounded5b_2",
            "Bounded5_some_eps",
            "Necessary13_all_eps",
            "summary",
            "solve_status",
            "iterations",
            "u1_rmax",
            "u2_rmax",
            "plateau_ratio",
            "plateau_threshold",
            "empirical_label",
            "verdict_label",
            "agreement",
        ]
        .map(String::from),
    );
    w.write_record(&header).map_err(err)?;
    for r in rows {
        let mut rec: Vec<String> = r.parameters.iter().map(|(_, v)| fmt_num(*v)).collect();
        rec.extend([
            status_name(r.ko).to_string(),
            status_name(r.lzz).to_string(),
            status_name(r.large12[0]).to_string(),
            status_name(r.large12[1]).to_string(),
            status_name(r.nonexistence5b[0]).to_string(),
            status_name(r.nonexistence5b[1]).to_string(),
            r.bounded5_some.to_string(),
            r.necessary13_all.to_string(),
            r.summary.clone(),
            r.solve_status.clone(),
            r.iterations.to_string(),
            fmt_num(r.u_at_rmax[0]),
            fmt_num(r.u_at_rmax[1]),
            fmt_num(r.plateau_ratio),
            fmt_num(r.plateau_threshold),
            r.empirical.clone(),
            r.verdict.clone(),
            r.agreement.clone(),
        ]);
        w.write_record(&rec).map_err(err)?;
    }
    w.into_inner().map_err(|e| CliError::Config(e.to_string()))
}

pub fn cmd_sweep(cfg: &RunConfig, dir: &Path) -> Result<i32, CliError> {
    let cells = sweep_cells(cfg)?;
    let rows: Vec<SweepRow> = cells.iter().map(|c| c.row.clone()).collect();
    for (k, c) in cells.iter().enumerate() {
        if cfg.output.wants(Format::Csv) {
            if let Some(sol) = &c.solution {
                write_file(&dir.join("cells").join(format!("cell_{k:03}_solution.csv")), sol)?;
            }
        }
        if cfg.output.wants(Format::Json) {
            write_json(&dir.join("cells").join(format!("cell_{k:03}_verdicts.json")), &c.classify)?;
        }
    }
    if cfg.output.wants(Format::Csv) {
        write_file(&dir.join("regimes.csv"), &regimes_csv(&rows)?)?;
    }
    if cfg.output.wants(Format::Json) {
        write_json(&dir.join("regimes.json"), &rows)?;
    }
    Ok(EXIT_OK)
}
