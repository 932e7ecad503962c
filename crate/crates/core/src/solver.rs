//! Successive approximation `u^0 = b/2`, `u^k = S(u^{k-1})`.
//!
//! The iterates increase pointwise and each is non-decreasing in `r`, so the
//! sums `u_1^k(R) + u_2^k(R)` are monitored against the a priori bound
//!
//! ```text
//! Σ_i u_i^k(R) <= I^{-1}( (p 2^{p-1}/(p-1) Σ_i a_i^R)^{1/p} R + I(b) ),   a_i^R = max_{[0,R]} a_i
//! ```
//!
//! with `I` taken at exponent `1/p`.

use serde::Serialize;

use crate::conditions::{build_f, ConditionError, ITable};
use crate::exec::Execution;
use crate::model::ProblemSpec;
use crate::operator::{IntegralOperator, ProfilePair};
use crate::quadrature::{sample_coefficient, NumericError, RadialGrid};

pub const DEFAULT_TOL: f64 = 1e-10;
pub const DEFAULT_MAX_ITER: usize = 200;
/// Quadrature slack allowed on the bound.
pub const BOUND_SLACK: f64 = 1e-2;
/// Iterates beyond this are treated as blow-up.
pub const BLOWUP_LEVEL: f64 = 1e150;

const SUP_CELLS: usize = 2000;
const F_CELLS_PER_DECADE: usize = 400;
const S_MAX_LIMIT: f64 = 1e150;
/// Growth of the `F` table between attempts; resolution is per decade, so
/// the factor only affects cost.
const S_MAX_GROWTH: f64 = 1e5;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum SolveStatus {
    Converged,
    NonConvergence,
    Overflow,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SolveReport {
    pub status: SolveStatus,
    pub converged: bool,
    pub iterations: usize,
    #[serde(skip)]
    pub final_profile: ProfilePair,
    /// `u_j'` of the final iterate, i.e. `K_j^{1/(p-1)}` of the previous one.
    #[serde(skip)]
    pub final_derivative: [Vec<f64>; 2],
    pub u_at_rmax: [f64; 2],
    pub sup_change_history: Vec<f64>,
    /// `u_1^k(R_max) + u_2^k(R_max)` for every iterate `k >= 1`.
    pub sum_at_rmax_history: Vec<f64>,
    pub apriori_bound_at_rmax: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub bound_note: Option<String>,
    pub bound_violated: bool,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub blowup_radius: Option<f64>,
    pub residual_norm: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum SolveError {
    #[error(transparent)]
    Numeric(#[from] NumericError),
    #[error("no convergence after {} iterations (last change {:e})", .0.iterations, .0.sup_change_history.last().copied().unwrap_or(f64::NAN))]
    NonConvergence(Box<SolveReport>),
    #[error("blow-up near r = {radius}")]
    Overflow { radius: f64, report: Box<SolveReport> },
    #[error("invalid solver options: {0}")]
    Options(String),
}

impl SolveError {
    pub fn report(&self) -> Option<&SolveReport> {
        match self {
            SolveError::NonConvergence(r) | SolveError::Overflow { report: r, .. } => Some(r),
            _ => None,
        }
    }
}

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum BoundError {
    #[error(transparent)]
    Numeric(#[from] NumericError),
    #[error("a priori bound unavailable: {0}")]
    BoundUnavailable(String),
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SolveOptions {
    pub tol: f64,
    pub max_iter: usize,
    pub exec: Execution,
    /// Evaluate the a priori bound and flag iterates exceeding it.
    pub guard: bool,
}

impl Default for SolveOptions {
    fn default() -> Self {
        SolveOptions { tol: DEFAULT_TOL, max_iter: DEFAULT_MAX_ITER, exec: Execution::default(), guard: true }
    }
}

/// `2^{p-1} (x_1^p + x_2^p)`, an upper bound for `(x_1 + x_2)^p` when
/// `x_i >= 0` and `p >= 1`.
pub fn power_mean_bound(x1: f64, x2: f64, p: f64) -> f64 {
    2f64.powf(p - 1.0) * (x1.powf(p) + x2.powf(p))
}

/// `max a_j` over the nodes of a uniform mesh of `[0, R]`.
pub fn sup_coefficient(spec: &ProblemSpec, j: usize, r: f64) -> Result<f64, NumericError> {
    let grid = RadialGrid::uniform(r, SUP_CELLS)?;
    sup_on_nodes(spec, j, grid.nodes())
}

fn sup_on_nodes(spec: &ProblemSpec, j: usize, nodes: &[f64]) -> Result<f64, NumericError> {
    let a = sample_coefficient(&spec.a[j], &format!("a{}", j + 1), nodes)?;
    Ok(a.into_iter().fold(f64::NEG_INFINITY, f64::max))
}

/// The a priori bound on `Σ_i u_i^k(R)`, uniform in `k`. The `F` table is
/// enlarged until `I^{-1}` is defined at the required argument.
pub fn a_priori_bound(spec: &ProblemSpec, r: f64) -> Result<f64, BoundError> {
    spec.ensure_valid().map_err(NumericError::from)?;
    let sum_a = sup_coefficient(spec, 0, r)? + sup_coefficient(spec, 1, r)?;
    let p = spec.p;
    let y = (p * 2f64.powf(p - 1.0) / (p - 1.0) * sum_a.max(0.0)).powf(1.0 / p) * r;
    if !y.is_finite() {
        return Err(BoundError::BoundUnavailable(format!("argument of I^{{-1}} is not finite ({y})")));
    }
    if y == 0.0 {
        return Ok(spec.b);
    }
    let mut s_max = 10.0 * spec.b;
    while s_max <= S_MAX_LIMIT {
        let table = build_f(spec, s_max, F_CELLS_PER_DECADE).map_err(unavailable)?;
        let itab = ITable::new(&table, p).map_err(unavailable)?;
        match itab.inverse(y) {
            Ok(v) => return Ok(v),
            Err(ConditionError::RangeExhausted { .. }) => s_max *= S_MAX_GROWTH,
            Err(e) => return Err(unavailable(e)),
        }
    }
    Err(BoundError::BoundUnavailable(format!("I stays below {y} up to s = {S_MAX_LIMIT:e}")))
}

fn unavailable(e: ConditionError) -> BoundError {
    match e {
        ConditionError::Numeric(n) => BoundError::Numeric(n),
        other => BoundError::BoundUnavailable(other.to_string()),
    }
}

/// The Picard iterates `u^1, u^2, ...` of an operator, without stopping rule.
pub struct Iterates<'a> {
    op: &'a IntegralOperator,
    current: ProfilePair,
}

impl<'a> Iterates<'a> {
    pub fn new(op: &'a IntegralOperator) -> Self {
        let current = ProfilePair::constant(op.grid(), op.spec().central_value());
        Iterates { op, current }
    }
}

impl Iterator for Iterates<'_> {
    type Item = Result<ProfilePair, NumericError>;

    fn next(&mut self) -> Option<Self::Item> {
        match self.op.apply(&self.current) {
            Ok(next) => {
                self.current = next.clone();
                Some(Ok(next))
            }
            Err(e) => Some(Err(e)),
        }
    }
}

fn first_blowup(prof: &ProfilePair) -> Option<f64> {
    let nodes = prof.grid.nodes();
    (0..nodes.len()).find(|&m| prof.u1[m] > BLOWUP_LEVEL || prof.u2[m] > BLOWUP_LEVEL).map(|m| nodes[m])
}

pub fn solve_fixed_point(spec: &ProblemSpec, grid: &RadialGrid, tol: f64, max_iter: usize) -> Result<SolveReport, SolveError> {
    solve_with(spec, grid, &SolveOptions { tol, max_iter, ..Default::default() })
}

pub fn solve_with(spec: &ProblemSpec, grid: &RadialGrid, opts: &SolveOptions) -> Result<SolveReport, SolveError> {
    if !(opts.tol > 0.0) || opts.max_iter == 0 {
        return Err(SolveError::Options(format!("need tol > 0 and max_iter >= 1, got {} and {}", opts.tol, opts.max_iter)));
    }
    let op = IntegralOperator::new(spec, grid, opts.exec)?;
    let (bound, bound_note) = if opts.guard {
        match a_priori_bound(spec, grid.r_max()) {
            Ok(b) => (Some(b), None),
            Err(BoundError::BoundUnavailable(msg)) => {
                log::warn!("running without the a priori guard: {msg}");
                (None, Some(msg))
            }
            Err(BoundError::Numeric(e)) => return Err(e.into()),
        }
    } else {
        (None, Some("guard disabled".to_string()))
    };

    let b2 = spec.central_value();
    let n = grid.len();
    let mut report = SolveReport {
        status: SolveStatus::NonConvergence,
        converged: false,
        iterations: 0,
        final_profile: ProfilePair::constant(grid, b2),
        final_derivative: [vec![0.0; n], vec![0.0; n]],
        u_at_rmax: [b2, b2],
        sup_change_history: Vec::new(),
        sum_at_rmax_history: Vec::new(),
        apriori_bound_at_rmax: bound,
        bound_note,
        bound_violated: false,
        blowup_radius: None,
        residual_norm: None,
    };

    for k in 1..=opts.max_iter {
        let applied = match op.apply_with_derivative(&report.final_profile) {
            Ok(a) => a,
            Err(NumericError::Overflow { radius, .. }) => return Err(blowup(report, radius)),
            Err(e) => return Err(e.into()),
        };
        let change = applied.profile.mixed_change(&report.final_profile);
        let sum = applied.profile.sum_at_end();
        report.iterations = k;
        report.sup_change_history.push(change);
        report.sum_at_rmax_history.push(sum);
        if let Some(b) = bound {
            if sum > b * (1.0 + BOUND_SLACK) && !report.bound_violated {
                log::warn!("iterate {k}: u1 + u2 = {sum} at R_max exceeds the a priori bound {b}");
                report.bound_violated = true;
            }
        }
        let blown = first_blowup(&applied.profile);
        report.u_at_rmax = [applied.profile.u1[n - 1], applied.profile.u2[n - 1]];
        report.final_profile = applied.profile;
        report.final_derivative = [applied.du1, applied.du2];
        if let Some(radius) = blown {
            return Err(blowup(report, radius));
        }
        if change <= opts.tol {
            report.converged = true;
            report.status = SolveStatus::Converged;
            return Ok(report);
        }
    }
    Err(SolveError::NonConvergence(Box::new(report)))
}

fn blowup(mut report: SolveReport, radius: f64) -> SolveError {
    report.status = SolveStatus::Overflow;
    report.blowup_radius = Some(radius);
    SolveError::Overflow { radius, report: Box::new(report) }
}
