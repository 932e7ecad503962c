use std::path::Path;

use serde::Serialize;

use crate::conditions::{
    check_bounded5, check_ko, check_large12, check_lzz, check_necessary13, check_nonexistence5b,
    check_weight_monotone, ConditionError, ConditionId, ConditionVerdict, EpsilonVerdicts, Horizons, Status,
    WeightMonotoneReport,
};
use crate::exec::Execution;
use crate::model::{AuditSampling, ProblemSpec, ValidationReport};
use crate::quadrature::RadialGrid;

use super::{write_json, CliError, Format, RunConfig, EXIT_OK};

/// Nodes used for the weight monotonicity audit on `[0, T_last]`.
const MONOTONE_CELLS: usize = 4000;

pub const SUMMARY_KO_FAILS: &str = "existence machinery inapplicable (KO fails)";
pub const SUMMARY_LARGE: &str = "large solutions indicated";
pub const SUMMARY_BOUNDED: &str = "bounded solutions indicated";
pub const SUMMARY_INCONCLUSIVE: &str = "inconclusive";

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ClassifyReport {
    pub summary: String,
    pub indications: Vec<String>,
    /// One verdict per requested exponent `q`; the first drives the summary.
    pub ko: Vec<ConditionVerdict>,
    pub lzz: ConditionVerdict,
    pub large12: [ConditionVerdict; 2],
    pub nonexistence5b: [ConditionVerdict; 2],
    pub bounded5: EpsilonVerdicts,
    pub necessary13: EpsilonVerdicts,
    pub weight_monotone: Option<WeightMonotoneReport>,
    pub validation: ValidationReport,
}

fn or_unavailable(id: ConditionId, r: Result<ConditionVerdict, ConditionError>) -> ConditionVerdict {
    r.unwrap_or_else(|e| ConditionVerdict::unavailable(id, e.to_string()))
}

fn pair_or_unavailable(
    id: ConditionId,
    r: Result<[ConditionVerdict; 2], ConditionError>,
) -> [ConditionVerdict; 2] {
    r.unwrap_or_else(|e| [0, 1].map(|j| ConditionVerdict::unavailable(id, e.to_string()).with_component(j)))
}

fn eps_or_unavailable(
    id: ConditionId,
    epsilons: &[f64],
    r: Result<EpsilonVerdicts, ConditionError>,
) -> EpsilonVerdicts {
    r.unwrap_or_else(|e| EpsilonVerdicts {
        verdicts: epsilons.iter().map(|&x| ConditionVerdict::unavailable(id, e.to_string()).with_epsilon(x)).collect(),
        aggregate: false,
    })
}

/// Evaluates every condition. A check that cannot be evaluated becomes an
/// Inconclusive verdict carrying the reason.
pub fn classify(
    spec: &ProblemSpec,
    qs: &[f64],
    epsilons: &[f64],
    horizons: &Horizons,
    exec: Execution,
) -> ClassifyReport {
    let ((ko, lzz), ((large12, nonexistence5b), (bounded5, necessary13))) = exec.join(
        || {
            let ko = exec.map_jobs(qs, |&q| or_unavailable(ConditionId::KO, check_ko(spec, q, horizons)).with_q(q));
            (ko, or_unavailable(ConditionId::LZZ, check_lzz(spec, horizons)))
        },
        || {
            exec.join(
                || {
                    exec.join(
                        || pair_or_unavailable(ConditionId::Large12, check_large12(spec, horizons)),
                        || pair_or_unavailable(ConditionId::NoBounded5b, check_nonexistence5b(spec, horizons)),
                    )
                },
                || {
                    exec.join(
                        || eps_or_unavailable(ConditionId::Bounded5, epsilons, check_bounded5(spec, epsilons, horizons)),
                        || {
                            eps_or_unavailable(
                                ConditionId::Necessary13,
                                epsilons,
                                check_necessary13(spec, epsilons, horizons),
                            )
                        },
                    )
                },
            )
        },
    );
    let weight_monotone = RadialGrid::graded(horizons.last(), MONOTONE_CELLS, 2.0)
        .ok()
        .and_then(|g| check_weight_monotone(spec, horizons.values[0], &g).ok());
    let validation = spec.validate(&AuditSampling { r_max: horizons.last(), ..AuditSampling::default() });
    let mut report = ClassifyReport {
        summary: String::new(),
        indications: Vec::new(),
        ko,
        lzz,
        large12,
        nonexistence5b,
        bounded5,
        necessary13,
        weight_monotone,
        validation,
    };
    let (summary, indications) = summarize(&report);
    report.summary = summary;
    report.indications = indications;
    report
}

fn both(v: &[ConditionVerdict; 2], s: Status) -> bool {
    v.iter().all(|x| x.status == s)
}

/// Headline summary and the list of individual indications.
pub fn summarize(r: &ClassifyReport) -> (String, Vec<String>) {
    let mut notes = Vec::new();
    let ko = &r.ko[0];
    let q = ko.q.map(|q| q.to_string()).unwrap_or_default();
    match ko.status {
        Status::Divergent => notes.push(format!("KO (q={q}) divergent: existence machinery applies")),
        Status::Convergent => notes.push(format!("KO (q={q}) convergent: existence machinery inapplicable")),
        Status::Inconclusive => notes.push(format!("KO (q={q}) inconclusive")),
    }
    if r.lzz.status == Status::Divergent {
        notes.push("LZZ divergent".into());
    }
    if both(&r.large12, Status::Divergent) {
        notes.push("Large12 divergent for both components: large solutions".into());
    }
    if r.bounded5.aggregate {
        let eps: Vec<String> = r
            .bounded5
            .verdicts
            .iter()
            .filter(|v| v.status == Status::Convergent)
            .filter_map(|v| v.epsilon.map(|e| e.to_string()))
            .collect();
        notes.push(format!("Bounded5 convergent at ε ∈ {{{}}}: bounded solutions", eps.join(", ")));
    }
    if r.nonexistence5b.iter().any(|v| v.status == Status::Divergent) {
        notes.push("NoBounded5b divergent: no nontrivial bounded entire solution".into());
    }
    if r.necessary13.aggregate {
        notes.push("Necessary13 divergent for every tested ε".into());
    } else if r.necessary13.verdicts.iter().any(|v| v.status == Status::Convergent) {
        notes.push("Necessary13 convergent for some ε: no large solution".into());
    }
    match &r.weight_monotone {
        Some(w) if w.holds => notes.push(format!("weight nondecreasing on [{}, {}]", w.r_from, w.r_to)),
        Some(w) => notes.push(format!(
            "weight decreases near r = {} (monotonicity hypothesis fails)",
            w.first_violation.unwrap_or(f64::NAN)
        )),
        None => notes.push("weight monotonicity not evaluated".into()),
    }
    if !r.validation.warnings.is_empty() {
        notes.push(format!("{} hypothesis warning(s)", r.validation.warnings.len()));
    }

    let summary = if ko.status == Status::Convergent {
        SUMMARY_KO_FAILS
    } else if both(&r.large12, Status::Divergent) {
        SUMMARY_LARGE
    } else if r.bounded5.aggregate {
        SUMMARY_BOUNDED
    } else {
        SUMMARY_INCONCLUSIVE
    };
    (summary.to_string(), notes)
}

pub(super) fn run_classify(cfg: &RunConfig, exec: Execution) -> Result<ClassifyReport, CliError> {
    let spec = cfg.spec()?;
    let horizons = cfg.horizons()?;
    Ok(classify(&spec, &cfg.ko_exponents()?, &cfg.epsilons()?, &horizons, exec))
}

pub fn cmd_classify(cfg: &RunConfig, dir: &Path) -> Result<i32, CliError> {
    let report = run_classify(cfg, cfg.solver.execution)?;
    log::info!("classification: {}", report.summary);
    if cfg.output.wants(Format::Json) {
        write_json(&dir.join("verdicts.json"), &report)?;
    }
    Ok(EXIT_OK)
}
