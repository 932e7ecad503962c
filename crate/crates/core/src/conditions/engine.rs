//! Finite-horizon verdicts for improper integrals `∫_lower^∞ g`.
//!
//! Partial integrals `P(T_k)` are taken on a [`TailGrid`] and the per-horizon
//! increments `d_k = P(T_k) - P(T_{k-1})` are examined in two stages:
//!
//! 1. Power tail: `σ` is the log-log slope of `d_k` against `T_k` over the
//!    last window, minus one, so that `g ~ t^σ`. `σ >= -1 + δ` or
//!    non-decreasing increments give `Divergent`; `σ <= -1 - δ` with
//!    geometrically shrinking increments gives `Convergent`.
//! 2. Logarithmic tail, only when stage 1 is undecided: `β` is minus the
//!    slope of `ln d_k` against `ln ℓ_k`, `ℓ_k` the log-mean of `ln T` over
//!    the k-th interval, so that `g ~ 1/(t (ln t)^β)`. `β <= 1 + δ/2` gives
//!    `Divergent`, `β >= 1 + δ` gives `Convergent`.
//!
//! Anything else is `Inconclusive`.

use serde::{Deserialize, Serialize};

use super::ConditionError;
use crate::quadrature::cumulative_trapezoid;

pub const DEFAULT_DELTA: f64 = 0.1;
pub const DEFAULT_PER_DECADE: usize = 512;
const HEAD_CELLS: usize = 512;
const WINDOW: usize = 3;
const LOG_STAGE_MIN_INCREMENTS: usize = 5;
/// Relative tolerance for "increments do not decrease".
const FLAT_TOL: f64 = 1e-9;
/// Allowed growth of consecutive increment ratios for "shrinks geometrically".
const RATIO_SLACK: f64 = 1.05;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Status {
    Divergent,
    Convergent,
    Inconclusive,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum ConditionId {
    KO,
    KO1,
    LZZ,
    Bounded5,
    Large12,
    NoBounded5b,
    Necessary13,
    WeightMonotone,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ConditionVerdict {
    pub condition: ConditionId,
    pub status: Status,
    /// `(T, P(T))` for every horizon.
    pub partial_values: Vec<(f64, f64)>,
    /// Fitted power-tail exponent `σ` (`g ~ t^σ`).
    pub tail_slope: Option<f64>,
    /// Fitted logarithmic exponent `β` (`g ~ 1/(t (ln t)^β)`), when stage 2 ran.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub log_slope: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub epsilon: Option<f64>,
    /// 1-based component index for per-component conditions.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub component: Option<usize>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub q: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub note: Option<String>,
}

impl ConditionVerdict {
    pub fn from_fit(condition: ConditionId, fit: DivergenceFit) -> Self {
        ConditionVerdict {
            condition,
            status: fit.status,
            partial_values: fit.partial_values,
            tail_slope: fit.tail_slope,
            log_slope: fit.log_slope,
            epsilon: None,
            component: None,
            q: None,
            note: fit.note,
        }
    }

    /// Inconclusive verdict for a check that could not be evaluated.
    pub fn unavailable(condition: ConditionId, note: String) -> Self {
        ConditionVerdict {
            condition,
            status: Status::Inconclusive,
            partial_values: Vec::new(),
            tail_slope: None,
            log_slope: None,
            epsilon: None,
            component: None,
            q: None,
            note: Some(note),
        }
    }

    pub fn with_epsilon(mut self, eps: f64) -> Self {
        self.epsilon = Some(eps);
        self
    }

    pub fn with_component(mut self, j: usize) -> Self {
        self.component = Some(j + 1);
        self
    }

    pub fn with_q(mut self, q: f64) -> Self {
        self.q = Some(q);
        self
    }
}

/// Geometric list of horizons and the sampling density used between them.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Horizons {
    pub values: Vec<f64>,
    pub per_decade: usize,
    pub delta: f64,
}

impl Default for Horizons {
    fn default() -> Self {
        Horizons { values: vec![1e1, 1e2, 1e3, 1e4], per_decade: DEFAULT_PER_DECADE, delta: DEFAULT_DELTA }
    }
}

impl Horizons {
    pub fn new(values: Vec<f64>) -> Result<Self, ConditionError> {
        let h = Horizons { values, ..Default::default() };
        h.validate()?;
        Ok(h)
    }

    /// `10^lo, 10^{lo+1}, ..., 10^hi`.
    pub fn decades(lo: i32, hi: i32) -> Self {
        Horizons { values: (lo..=hi).map(|k| 10f64.powi(k)).collect(), ..Default::default() }
    }

    pub fn validate(&self) -> Result<(), ConditionError> {
        if self.values.is_empty() {
            return Err(ConditionError::Horizons("horizon list is empty".into()));
        }
        if self.values.iter().any(|&t| !(t > 0.0 && t.is_finite())) {
            return Err(ConditionError::Horizons("horizons must be positive and finite".into()));
        }
        if self.values.windows(2).any(|w| w[1] <= w[0]) {
            return Err(ConditionError::Horizons("horizons must be strictly increasing".into()));
        }
        if self.per_decade < 8 {
            return Err(ConditionError::Horizons("need at least 8 samples per decade".into()));
        }
        if !(self.delta > 0.0 && self.delta < 1.0) {
            return Err(ConditionError::Horizons(format!("dead band δ must lie in (0, 1), got {}", self.delta)));
        }
        Ok(())
    }

    pub fn last(&self) -> f64 {
        *self.values.last().unwrap()
    }
}

/// Nodes on `[0, T_last]`: graded on `[0, lower]` (or `[0, T_0]` when the
/// lower limit is the origin), geometric beyond. The head is kept for inner
/// integrals that start at the origin.
#[derive(Debug, Clone, PartialEq)]
pub struct TailGrid {
    nodes: Vec<f64>,
    lower_idx: usize,
    horizon_idx: Vec<usize>,
    horizons: Vec<f64>,
}

impl TailGrid {
    pub fn new(lower: f64, horizons: &Horizons) -> Result<Self, ConditionError> {
        horizons.validate()?;
        let first = horizons.values[0];
        if !(lower >= 0.0 && lower < first) {
            return Err(ConditionError::Horizons(format!("lower limit {lower} must lie in [0, {first})")));
        }
        let mut nodes = vec![0.0];
        let graded = |nodes: &mut Vec<f64>, end: f64| {
            for m in 1..=HEAD_CELLS {
                let x = (m as f64 / HEAD_CELLS as f64).powi(2);
                nodes.push(if m == HEAD_CELLS { end } else { end * x });
            }
        };
        let geometric = |nodes: &mut Vec<f64>, from: f64, to: f64, min_cells: usize| {
            let cells = ((to / from).log10() * horizons.per_decade as f64).ceil().max(min_cells as f64) as usize;
            let ratio = (to / from).ln();
            for m in 1..=cells {
                nodes.push(if m == cells { to } else { from * (ratio * m as f64 / cells as f64).exp() });
            }
        };

        let lower_idx;
        if lower > 0.0 {
            graded(&mut nodes, lower);
            lower_idx = nodes.len() - 1;
            geometric(&mut nodes, lower, first, 16);
        } else {
            lower_idx = 0;
            graded(&mut nodes, first);
        }
        let mut horizon_idx = vec![nodes.len() - 1];
        for w in horizons.values.windows(2) {
            geometric(&mut nodes, w[0], w[1], 8);
            horizon_idx.push(nodes.len() - 1);
        }
        Ok(TailGrid { nodes, lower_idx, horizon_idx, horizons: horizons.values.clone() })
    }

    pub fn nodes(&self) -> &[f64] {
        &self.nodes
    }

    pub fn lower_index(&self) -> usize {
        self.lower_idx
    }

    pub fn lower(&self) -> f64 {
        self.nodes[self.lower_idx]
    }

    pub fn horizons(&self) -> &[f64] {
        &self.horizons
    }

    pub fn sample(&self, g: impl Fn(f64) -> f64) -> Vec<f64> {
        self.nodes.iter().map(|&t| g(t)).collect()
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct DivergenceFit {
    pub status: Status,
    pub partial_values: Vec<(f64, f64)>,
    pub tail_slope: Option<f64>,
    pub log_slope: Option<f64>,
    pub note: Option<String>,
}

impl DivergenceFit {
    fn bare(status: Status, partial_values: Vec<(f64, f64)>, note: impl Into<String>) -> Self {
        DivergenceFit { status, partial_values, tail_slope: None, log_slope: None, note: Some(note.into()) }
    }
}

/// Least-squares slope of `y` against `x`.
fn ls_slope(x: &[f64], y: &[f64]) -> f64 {
    let n = x.len() as f64;
    let mx = x.iter().sum::<f64>() / n;
    let my = y.iter().sum::<f64>() / n;
    let sxy: f64 = x.iter().zip(y).map(|(a, b)| (a - mx) * (b - my)).sum();
    let sxx: f64 = x.iter().map(|a| (a - mx) * (a - mx)).sum();
    sxy / sxx
}

/// Verdict for `∫_lower^∞ g` from samples of `g` at the tail-grid nodes.
/// Samples below the lower limit are ignored. `+∞` samples count as
/// divergence; negative or NaN samples make the verdict inconclusive.
pub fn check_divergence(tail: &TailGrid, samples: &[f64], delta: f64) -> DivergenceFit {
    assert_eq!(samples.len(), tail.nodes.len(), "samples must match the tail grid");
    let lo = tail.lower_idx;
    let g = &samples[lo..];
    let partial_at = |values: &[f64]| -> Vec<(f64, f64)> {
        tail.horizon_idx.iter().zip(&tail.horizons).map(|(&i, &t)| (t, values[i])).collect()
    };

    if let Some(k) = g.iter().position(|v| v.is_nan() || *v < 0.0) {
        let at = tail.nodes[lo + k];
        return DivergenceFit::bare(
            Status::Inconclusive,
            Vec::new(),
            format!("integrand is negative or undefined at t = {at}"),
        );
    }
    if let Some(k) = g.iter().position(|v| v.is_infinite()) {
        let at = tail.nodes[lo + k];
        let partial = tail
            .horizon_idx
            .iter()
            .zip(&tail.horizons)
            .map(|(&i, &t)| (t, if i >= lo + k { f64::INFINITY } else { f64::NAN }))
            .collect();
        return DivergenceFit::bare(Status::Divergent, partial, format!("integrand overflows at t = {at}"));
    }

    let mut cum = vec![0.0; lo];
    cum.extend(cumulative_trapezoid(&tail.nodes[lo..], g));
    let partial = partial_at(&cum);
    if partial.iter().any(|(_, p)| p.is_infinite()) {
        return DivergenceFit::bare(Status::Divergent, partial, "partial integral overflows");
    }

    let incr: Vec<f64> = partial.windows(2).map(|w| w[1].1 - w[0].1).collect();
    let ends: Vec<f64> = tail.horizons[1..].to_vec();
    if incr.is_empty() {
        return DivergenceFit::bare(Status::Inconclusive, partial, "need at least two horizons");
    }
    if *incr.last().unwrap() <= 0.0 {
        return DivergenceFit::bare(Status::Convergent, partial, "integrand vanishes on the last interval");
    }
    if incr.len() < 2 {
        return DivergenceFit::bare(Status::Inconclusive, partial, "need at least two increments");
    }

    let w0 = incr.len().saturating_sub(WINDOW);
    let (win, win_t) = (&incr[w0..], &ends[w0..]);
    if win.iter().any(|&d| d <= 0.0) {
        return DivergenceFit::bare(Status::Inconclusive, partial, "integrand vanishes inside the tail window");
    }
    let ln_t: Vec<f64> = win_t.iter().map(|t| t.ln()).collect();
    let ln_d: Vec<f64> = win.iter().map(|d| d.ln()).collect();
    let sigma = ls_slope(&ln_t, &ln_d) - 1.0;
    let mut fit = DivergenceFit { status: Status::Inconclusive, partial_values: partial, tail_slope: Some(sigma), log_slope: None, note: None };

    let non_decreasing = win.windows(2).all(|w| w[1] >= w[0] * (1.0 - FLAT_TOL));
    let ratios: Vec<f64> = win.windows(2).map(|w| w[1] / w[0]).collect();
    let geometric = ratios.iter().all(|&r| r < 1.0) && ratios.windows(2).all(|w| w[1] <= w[0] * RATIO_SLACK);
    if non_decreasing || sigma >= -1.0 + delta {
        fit.status = Status::Divergent;
        return fit;
    }
    if sigma <= -1.0 - delta && geometric {
        fit.status = Status::Convergent;
        return fit;
    }

    if incr.len() >= LOG_STAGE_MIN_INCREMENTS && tail.horizons[0] > 1.0 {
        if incr.iter().any(|&d| d <= 0.0) {
            return fit;
        }
        let ln_l: Vec<f64> = tail
            .horizons
            .windows(2)
            .map(|w| {
                let (a, b) = (w[0].ln(), w[1].ln());
                ((b - a) / (b / a).ln()).ln()
            })
            .collect();
        let ln_d: Vec<f64> = incr.iter().map(|d| d.ln()).collect();
        let beta = -ls_slope(&ln_l, &ln_d);
        fit.log_slope = Some(beta);
        if beta <= 1.0 + delta / 2.0 {
            fit.status = Status::Divergent;
        } else if beta >= 1.0 + delta {
            fit.status = Status::Convergent;
        }
    }
    fit
}

/// [`check_divergence`] for a closure.
pub fn check_divergence_fn(
    g: impl Fn(f64) -> f64,
    lower: f64,
    horizons: &Horizons,
) -> Result<DivergenceFit, ConditionError> {
    let tail = TailGrid::new(lower, horizons)?;
    let samples = tail.sample(g);
    Ok(check_divergence(&tail, &samples, horizons.delta))
}
