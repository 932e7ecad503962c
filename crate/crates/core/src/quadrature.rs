//! Radial meshes, cumulative trapezoid integrals and the singular inner
//! kernel
//!
//! ```text
//! K_j(t) = e^{-H_j(t)} t^{1-N} ∫_0^t s^{N-1} e^{H_j(s)} a_j(s) g(s) ds,   H_j(t) = ∫_0^t h_j
//! ```
//!
//! shared by the integral operator, the largeness condition and the oracle.

use std::sync::Arc;

use crate::expr::{ExprError, Expression};
use crate::model::{ModelError, ProblemSpec};

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum NumericError {
    #[error(transparent)]
    Model(#[from] ModelError),
    #[error("invalid grid: {0}")]
    Grid(String),
    #[error("evaluating {function} at {at:?}: {source}")]
    Eval { function: String, at: Vec<f64>, source: ExprError },
    #[error("overflow near r = {radius}: {what}")]
    Overflow { radius: f64, what: String },
}

impl NumericError {
    /// Maps expression overflow onto [`NumericError::Overflow`] at `radius`.
    pub fn from_eval(function: &str, at: &[f64], radius: f64, source: ExprError) -> Self {
        match source {
            ExprError::Overflow(what) => NumericError::Overflow { radius, what: format!("{function}: {what}") },
            source => NumericError::Eval { function: function.to_string(), at: at.to_vec(), source },
        }
    }
}

/// Strictly increasing nodes `0 = r_0 < r_1 < ... < r_M`. Cheap to clone.
#[derive(Debug, Clone, PartialEq)]
pub struct RadialGrid {
    nodes: Arc<[f64]>,
    grading: f64,
}

impl RadialGrid {
    /// `r_m = r_max (m/M)^gamma`.
    pub fn graded(r_max: f64, cells: usize, gamma: f64) -> Result<Self, NumericError> {
        if !(r_max > 0.0 && r_max.is_finite()) {
            return Err(NumericError::Grid(format!("R_max must be positive and finite, got {r_max}")));
        }
        if cells < 2 {
            return Err(NumericError::Grid(format!("need at least 2 cells, got {cells}")));
        }
        if !(gamma >= 1.0 && gamma.is_finite()) {
            return Err(NumericError::Grid(format!("grading exponent must be >= 1, got {gamma}")));
        }
        let nodes: Vec<f64> = (0..=cells)
            .map(|m| if m == cells { r_max } else { r_max * (m as f64 / cells as f64).powf(gamma) })
            .collect();
        let grid = Self::from_nodes(nodes)?;
        Ok(RadialGrid { grading: gamma, ..grid })
    }

    pub fn uniform(r_max: f64, cells: usize) -> Result<Self, NumericError> {
        Self::graded(r_max, cells, 1.0)
    }

    pub fn from_nodes(nodes: Vec<f64>) -> Result<Self, NumericError> {
        if nodes.len() < 3 {
            return Err(NumericError::Grid("need at least 3 nodes".into()));
        }
        if nodes[0] != 0.0 {
            return Err(NumericError::Grid(format!("first node must be 0, got {}", nodes[0])));
        }
        if let Some(w) = nodes.windows(2).find(|w| !(w[1] > w[0]) || !w[1].is_finite()) {
            return Err(NumericError::Grid(format!("nodes not strictly increasing at {} -> {}", w[0], w[1])));
        }
        Ok(RadialGrid { nodes: nodes.into(), grading: f64::NAN })
    }

    pub fn nodes(&self) -> &[f64] {
        &self.nodes
    }

    pub fn len(&self) -> usize {
        self.nodes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.nodes.is_empty()
    }

    pub fn r_max(&self) -> f64 {
        *self.nodes.last().unwrap()
    }

    /// Grading exponent; NaN for grids built from explicit nodes.
    pub fn grading(&self) -> f64 {
        self.grading
    }

    /// Linear interpolation of node values at `r` (clamped to the grid).
    pub fn interpolate(&self, values: &[f64], r: f64) -> f64 {
        let nodes = self.nodes();
        if r <= 0.0 {
            return values[0];
        }
        if r >= self.r_max() {
            return values[values.len() - 1];
        }
        let k = nodes.partition_point(|&x| x <= r) - 1;
        let w = (r - nodes[k]) / (nodes[k + 1] - nodes[k]);
        values[k] + w * (values[k + 1] - values[k])
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct ScalarSamples {
    pub grid: RadialGrid,
    pub values: Vec<f64>,
}

impl ScalarSamples {
    pub fn new(grid: RadialGrid, values: Vec<f64>) -> Self {
        assert_eq!(grid.len(), values.len(), "samples must match grid length");
        ScalarSamples { grid, values }
    }

    pub fn from_fn(grid: &RadialGrid, f: impl Fn(f64) -> f64) -> Self {
        let values = grid.nodes().iter().map(|&r| f(r)).collect();
        ScalarSamples { grid: grid.clone(), values }
    }
}

/// `out[m] = Σ_{k<m} (x_{k+1}-x_k)(g_k+g_{k+1})/2`, `out[0] = 0`.
pub fn cumulative_trapezoid(nodes: &[f64], values: &[f64]) -> Vec<f64> {
    let mut out = Vec::with_capacity(nodes.len());
    let mut acc = 0.0;
    out.push(0.0);
    for k in 1..nodes.len() {
        acc += 0.5 * (nodes[k] - nodes[k - 1]) * (values[k] + values[k - 1]);
        out.push(acc);
    }
    out
}

pub fn cumulative_integral(g: &ScalarSamples) -> ScalarSamples {
    ScalarSamples { grid: g.grid.clone(), values: cumulative_trapezoid(g.grid.nodes(), &g.values) }
}

pub(crate) fn sample_coefficient(e: &Expression, name: &str, nodes: &[f64]) -> Result<Vec<f64>, NumericError> {
    nodes
        .iter()
        .map(|&r| e.eval(&[r]).map_err(|err| NumericError::from_eval(name, &[r], r, err)))
        .collect()
}

/// `H_j(t) = ∫_0^t h_j` on the grid.
pub fn weight_h(spec: &ProblemSpec, j: usize, grid: &RadialGrid) -> Result<ScalarSamples, NumericError> {
    let h = sample_coefficient(&spec.h[j], &format!("h{}", j + 1), grid.nodes())?;
    Ok(ScalarSamples { grid: grid.clone(), values: cumulative_trapezoid(grid.nodes(), &h) })
}

/// Iteration-invariant data of one component: `a_j` and `H_j` at the nodes
/// and the kernel weights built from them.
#[derive(Debug, Clone, PartialEq)]
pub struct ComponentWeights {
    pub a: Vec<f64>,
    pub big_h: Vec<f64>,
    pub rule: KernelRule,
}

impl ComponentWeights {
    pub fn sample(spec: &ProblemSpec, j: usize, grid: &RadialGrid) -> Result<Self, NumericError> {
        let a = sample_coefficient(&spec.a[j], &format!("a{}", j + 1), grid.nodes())?;
        let big_h = weight_h(spec, j, grid)?.values;
        Ok(Self::from_samples(grid.nodes(), spec.n, a, big_h))
    }

    pub fn from_samples(nodes: &[f64], n: u32, a: Vec<f64>, big_h: Vec<f64>) -> Self {
        let rule = KernelRule::new(nodes, n, &big_h);
        ComponentWeights { a, big_h, rule }
    }
}

/// 8-point Gauss-Legendre on `[0, 1]`.
const GAUSS_X: [f64; 8] = [
    0.019855071751231912,
    0.10166676129318664,
    0.2372337950418355,
    0.4082826787521751,
    0.5917173212478248,
    0.7627662049581645,
    0.8983332387068134,
    0.9801449282487681,
];
const GAUSS_W: [f64; 8] = [
    0.050614268145188344,
    0.11119051722668717,
    0.15685332293894352,
    0.18134189168918088,
    0.18134189168918088,
    0.15685332293894352,
    0.11119051722668717,
    0.050614268145188344,
];
const GAUSS_PANELS: usize = 4;
/// `e^{-CUTOFF}` is below double precision relative to the cell's peak weight.
const EXP_CUTOFF: f64 = 40.0;

/// Product rule for `∫_{r_{m-1}}^{r_m} s^{N-1} e^{H(s)-H(r_m)} φ(s) ds`.
///
/// On every cell `H` is linear (it is a trapezoid integral of nodal `h`) and
/// `φ = a g` is replaced by its linear interpolant; the weight
/// `s^{N-1} e^{H(s)-H(r_m)}` is integrated by composite Gauss-Legendre.
/// Both nodal weights are nonnegative. The rule is exact, up to rounding, for
/// constant `φ` and constant `h`, and stays accurate when `h Δr >> 1`.
#[derive(Debug, Clone, PartialEq)]
pub struct KernelRule {
    /// Weights of nodes `m-1` and `m` on cell `m` (`m >= 1`).
    left: Vec<f64>,
    right: Vec<f64>,
    /// `e^{H(r_{m-1}) - H(r_m)}`.
    decay: Vec<f64>,
    r_pow: Vec<f64>,
}

impl KernelRule {
    pub fn new(nodes: &[f64], n: u32, big_h: &[f64]) -> Self {
        let d = n.saturating_sub(1) as i32;
        let len = nodes.len();
        let (mut left, mut right, mut decay) = (vec![0.0; len], vec![0.0; len], vec![1.0; len]);
        for m in 1..len {
            let (x1, dx) = (nodes[m], nodes[m] - nodes[m - 1]);
            let z = (big_h[m] - big_h[m - 1]).max(0.0);
            // σ = (x1 - s)/Δr, so node m-1 carries σ and node m carries 1-σ.
            let span = if z > EXP_CUTOFF { EXP_CUTOFF / z } else { 1.0 };
            let panel = span / GAUSS_PANELS as f64;
            let (mut l, mut r) = (0.0, 0.0);
            for k in 0..GAUSS_PANELS {
                for (x, w) in GAUSS_X.iter().zip(GAUSS_W) {
                    let sigma = (k as f64 + x) * panel;
                    let weight = w * panel * (x1 - dx * sigma).powi(d) * (-z * sigma).exp();
                    l += weight * sigma;
                    r += weight * (1.0 - sigma);
                }
            }
            left[m] = dx * l;
            right[m] = dx * r;
            decay[m] = (-z).exp();
        }
        let r_pow = nodes.iter().map(|&r| r.powi(d)).collect();
        KernelRule { left, right, decay, r_pow }
    }

    pub fn len(&self) -> usize {
        self.r_pow.len()
    }

    pub fn is_empty(&self) -> bool {
        self.r_pow.is_empty()
    }
}

/// Kernel values at every node for source samples `g`.
///
/// The running integral is carried as `J_m = e^{-H(r_m)} ∫_0^{r_m} ...`, so
/// only the factors `e^{H(s)-H(r_m)} <= 1` appear and `t^{1-N}` is never
/// evaluated at the origin: `K(0) = 0`, and `K(r_1) -> r_1 a(0) g(0) / N`
/// as `r_1 -> 0`.
pub fn kernel_from_weights(nodes: &[f64], weights: &ComponentWeights, g: &[f64]) -> Result<Vec<f64>, NumericError> {
    let rule = &weights.rule;
    let a = &weights.a;
    let mut out = vec![0.0; rule.len()];
    let mut j_acc = 0.0;
    for m in 1..rule.len() {
        j_acc = rule.decay[m] * j_acc + rule.left[m] * a[m - 1] * g[m - 1] + rule.right[m] * a[m] * g[m];
        let k = j_acc / rule.r_pow[m];
        if !k.is_finite() {
            return Err(NumericError::Overflow { radius: nodes[m], what: "inner kernel is not finite".into() });
        }
        out[m] = k;
    }
    Ok(out)
}

pub fn inner_kernel(
    spec: &ProblemSpec,
    j: usize,
    grid: &RadialGrid,
    fvals: &ScalarSamples,
) -> Result<ScalarSamples, NumericError> {
    spec.ensure_valid()?;
    let weights = ComponentWeights::sample(spec, j, grid)?;
    let k = kernel_from_weights(grid.nodes(), &weights, &fvals.values)?;
    Ok(ScalarSamples { grid: grid.clone(), values: k })
}
