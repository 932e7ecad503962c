//! JSON run configuration. Every section except `problem` has defaults and
//! unknown keys are rejected at every level.

use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::conditions::{Horizons, DEFAULT_DELTA, DEFAULT_PER_DECADE};
use crate::exec::Execution;
use crate::model::{ProblemSpec, ProblemText};
use crate::quadrature::RadialGrid;
use crate::solver::{SolveOptions, DEFAULT_MAX_ITER, DEFAULT_TOL};

use super::CliError;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunConfig {
    pub problem: ProblemText,
    #[serde(default)]
    pub grid: GridConfig,
    #[serde(default)]
    pub solver: SolverConfig,
    #[serde(default)]
    pub conditions: ConditionsConfig,
    #[serde(default)]
    pub oracle: OracleConfig,
    #[serde(default)]
    pub output: OutputConfig,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub sweep: Option<SweepConfig>,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GridConfig {
    #[serde(rename = "R_max")]
    pub r_max: f64,
    #[serde(rename = "M")]
    pub m: usize,
    #[serde(default = "default_gamma")]
    pub gamma: f64,
}

fn default_gamma() -> f64 {
    2.0
}

impl Default for GridConfig {
    fn default() -> Self {
        GridConfig { r_max: 2.0, m: 2000, gamma: default_gamma() }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct SolverConfig {
    pub tol: f64,
    pub max_iter: usize,
    pub execution: Execution,
}

impl Default for SolverConfig {
    fn default() -> Self {
        SolverConfig { tol: DEFAULT_TOL, max_iter: DEFAULT_MAX_ITER, execution: Execution::default() }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct ConditionsConfig {
    pub epsilons: Vec<f64>,
    pub horizons: Vec<f64>,
    /// KO exponents; `None` means `{2, p}`.
    pub q: Option<Vec<f64>>,
    pub per_decade: usize,
    pub delta: f64,
}

impl Default for ConditionsConfig {
    fn default() -> Self {
        ConditionsConfig {
            epsilons: vec![0.1, 0.5, 1.0],
            horizons: Horizons::default().values,
            q: None,
            per_decade: DEFAULT_PER_DECADE,
            delta: DEFAULT_DELTA,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct OracleConfig {
    pub steps: usize,
}

impl Default for OracleConfig {
    fn default() -> Self {
        OracleConfig { steps: 100_000 }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Format {
    Csv,
    Json,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct OutputConfig {
    pub directory: Option<PathBuf>,
    pub formats: Vec<Format>,
}

impl Default for OutputConfig {
    fn default() -> Self {
        OutputConfig { directory: None, formats: vec![Format::Csv, Format::Json] }
    }
}

impl OutputConfig {
    pub fn wants(&self, f: Format) -> bool {
        self.formats.contains(&f)
    }
}

/// Cartesian product of the axes. A parameter named `p`, `N` or `b` sets that
/// field; any other name replaces `{name}` in the expression strings.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SweepConfig {
    pub axes: Vec<SweepAxis>,
    #[serde(default = "default_plateau")]
    pub plateau_threshold: f64,
}

fn default_plateau() -> f64 {
    1e-3
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SweepAxis {
    pub parameter: String,
    pub values: Vec<f64>,
}

impl RunConfig {
    pub fn from_json(text: &str) -> Result<Self, CliError> {
        serde_json::from_str(text).map_err(|e| CliError::Config(e.to_string()))
    }

    pub fn load(path: &Path) -> Result<Self, CliError> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| CliError::Config(format!("reading {}: {e}", path.display())))?;
        Self::from_json(&text)
    }

    pub fn spec(&self) -> Result<ProblemSpec, CliError> {
        let spec = ProblemSpec::from_text(&self.problem).map_err(|e| CliError::Config(e.to_string()))?;
        spec.ensure_valid().map_err(|e| CliError::Config(e.to_string()))?;
        Ok(spec)
    }

    pub fn radial_grid(&self) -> Result<RadialGrid, CliError> {
        RadialGrid::graded(self.grid.r_max, self.grid.m, self.grid.gamma).map_err(|e| CliError::Config(e.to_string()))
    }

    pub fn solve_options(&self) -> Result<SolveOptions, CliError> {
        let s = &self.solver;
        if !(s.tol > 0.0 && s.tol.is_finite()) || s.max_iter == 0 {
            return Err(CliError::Config(format!("solver needs tol > 0 and max_iter >= 1, got {} and {}", s.tol, s.max_iter)));
        }
        Ok(SolveOptions { tol: s.tol, max_iter: s.max_iter, exec: s.execution, guard: true })
    }

    pub fn horizons(&self) -> Result<Horizons, CliError> {
        let c = &self.conditions;
        let h = Horizons { values: c.horizons.clone(), per_decade: c.per_decade, delta: c.delta };
        h.validate().map_err(|e| CliError::Config(e.to_string()))?;
        Ok(h)
    }

    /// Exponents for the KO check, deduplicated in order.
    pub fn ko_exponents(&self) -> Result<Vec<f64>, CliError> {
        let list = self.conditions.q.clone().unwrap_or_else(|| vec![2.0, self.problem.p]);
        if let Some(q) = list.iter().find(|&&q| !(q > 1.0 && q.is_finite())) {
            return Err(CliError::Config(format!("KO exponent q must exceed 1, got {q}")));
        }
        let mut out: Vec<f64> = Vec::new();
        for q in list {
            if !out.contains(&q) {
                out.push(q);
            }
        }
        if out.is_empty() {
            return Err(CliError::Config("KO exponent list is empty".into()));
        }
        Ok(out)
    }

    pub fn epsilons(&self) -> Result<Vec<f64>, CliError> {
        let e = &self.conditions.epsilons;
        if e.is_empty() || e.iter().any(|&x| !(x > 0.0 && x.is_finite())) {
            return Err(CliError::Config(format!("epsilons must be a nonempty list of positive numbers, got {e:?}")));
        }
        Ok(e.clone())
    }

    pub fn oracle_steps(&self) -> Result<usize, CliError> {
        if self.oracle.steps < crate::oracle::MIN_STEPS {
            return Err(CliError::Config(format!(
                "oracle.steps must be at least {}, got {}",
                crate::oracle::MIN_STEPS,
                self.oracle.steps
            )));
        }
        Ok(self.oracle.steps)
    }
}

/// Shortest round-trip decimal, as used in every output file. Exponent
/// notation outside `[1e-5, 1e16)`.
pub fn fmt_num(x: f64) -> String {
    crate::oracle::fmt_num(x)
}

/// One sweep cell: the axis values and the derived configuration.
pub fn expand_sweep(base: &RunConfig) -> Result<Vec<(Vec<(String, f64)>, RunConfig)>, CliError> {
    let sweep = base.sweep.as_ref().ok_or_else(|| CliError::Config("config has no sweep section".into()))?;
    if sweep.axes.is_empty() {
        return Err(CliError::Config("sweep axis list is empty".into()));
    }
    if !(sweep.plateau_threshold > 0.0 && sweep.plateau_threshold.is_finite()) {
        return Err(CliError::Config(format!("plateau_threshold must be positive, got {}", sweep.plateau_threshold)));
    }
    let texts = |p: &ProblemText| [p.a1.clone(), p.a2.clone(), p.h1.clone(), p.h2.clone(), p.f1.clone(), p.f2.clone()];
    for axis in &sweep.axes {
        if axis.values.is_empty() {
            return Err(CliError::Config(format!("sweep axis `{}` has no values", axis.parameter)));
        }
        let placeholder = format!("{{{}}}", axis.parameter);
        let scalar = matches!(axis.parameter.as_str(), "p" | "N" | "b");
        if !scalar && !texts(&base.problem).iter().any(|t| t.contains(&placeholder)) {
            return Err(CliError::Config(format!(
                "sweep parameter `{}` is neither p, N, b nor a {placeholder} placeholder in the problem",
                axis.parameter
            )));
        }
        if axis.parameter == "N" && axis.values.iter().any(|v| v.fract() != 0.0 || *v < 1.0) {
            return Err(CliError::Config("sweep values for N must be positive integers".into()));
        }
    }
    let mut cells: Vec<Vec<(String, f64)>> = vec![Vec::new()];
    for axis in &sweep.axes {
        cells = cells
            .into_iter()
            .flat_map(|prefix| {
                axis.values.iter().map(move |&v| {
                    let mut c = prefix.clone();
                    c.push((axis.parameter.clone(), v));
                    c
                })
            })
            .collect();
    }
    Ok(cells
        .into_iter()
        .map(|params| {
            let mut cfg = base.clone();
            cfg.sweep = None;
            let pr = &mut cfg.problem;
            for (name, v) in &params {
                match name.as_str() {
                    "p" => pr.p = *v,
                    "N" => pr.n = *v as u32,
                    "b" => pr.b = *v,
                    _ => {
                        let placeholder = format!("{{{name}}}");
                        let value = format!("({})", fmt_num(*v));
                        for t in [&mut pr.a1, &mut pr.a2, &mut pr.h1, &mut pr.h2, &mut pr.f1, &mut pr.f2] {
                            *t = t.replace(&placeholder, &value);
                        }
                    }
                }
            }
            (params, cfg)
        })
        .collect())
}
