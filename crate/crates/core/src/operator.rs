//! The radial integral operator
//!
//! ```text
//! (S u)_j(r) = b/2 + ∫_0^r K_j(t)^{1/(p-1)} dt
//! ```
//!
//! where `K_j` is the inner kernel of [`crate::quadrature`] evaluated with
//! source `f_j(u_1, u_2)`. Fixed points of `S` are radial solutions with
//! central values `b/2`; the derivative of `(S u)_j` is `K_j^{1/(p-1)}`.

use crate::exec::Execution;
use crate::model::ProblemSpec;
use crate::quadrature::{cumulative_trapezoid, kernel_from_weights, ComponentWeights, NumericError, RadialGrid};

#[derive(Debug, Clone, PartialEq)]
pub struct ProfilePair {
    pub grid: RadialGrid,
    pub u1: Vec<f64>,
    pub u2: Vec<f64>,
}

impl ProfilePair {
    pub fn new(grid: RadialGrid, u1: Vec<f64>, u2: Vec<f64>) -> Self {
        assert_eq!(grid.len(), u1.len(), "u1 must match grid length");
        assert_eq!(grid.len(), u2.len(), "u2 must match grid length");
        ProfilePair { grid, u1, u2 }
    }

    pub fn constant(grid: &RadialGrid, value: f64) -> Self {
        let n = grid.len();
        ProfilePair { grid: grid.clone(), u1: vec![value; n], u2: vec![value; n] }
    }

    pub fn component(&self, j: usize) -> &[f64] {
        match j {
            0 => &self.u1,
            1 => &self.u2,
            _ => panic!("component index {j} out of range"),
        }
    }

    /// `u_1(R_max) + u_2(R_max)`.
    pub fn sum_at_end(&self) -> f64 {
        self.u1[self.u1.len() - 1] + self.u2[self.u2.len() - 1]
    }

    /// `max_{m,j} |u_j(r_m) - v_j(r_m)| / (1 + |u_j(r_m)|)`.
    pub fn mixed_change(&self, previous: &ProfilePair) -> f64 {
        let comp = |a: &[f64], b: &[f64]| {
            a.iter().zip(b).map(|(x, y)| (x - y).abs() / (1.0 + x.abs())).fold(0.0, f64::max)
        };
        comp(&self.u1, &previous.u1).max(comp(&self.u2, &previous.u2))
    }

    /// Pointwise `self <= other` in both components.
    pub fn le(&self, other: &ProfilePair) -> bool {
        self.u1.iter().zip(&other.u1).all(|(a, b)| a <= b) && self.u2.iter().zip(&other.u2).all(|(a, b)| a <= b)
    }
}

/// `S` applied once, together with the derivative `K_j^{1/(p-1)}` of each
/// output component.
#[derive(Debug, Clone, PartialEq)]
pub struct Applied {
    pub profile: ProfilePair,
    pub du1: Vec<f64>,
    pub du2: Vec<f64>,
}

/// `S` on a fixed grid. The iteration-invariant samples of `a_j`, `H_j` and
/// the kernel weights are computed once.
#[derive(Debug, Clone)]
pub struct IntegralOperator {
    spec: ProblemSpec,
    grid: RadialGrid,
    weights: [ComponentWeights; 2],
    exec: Execution,
}

impl IntegralOperator {
    pub fn new(spec: &ProblemSpec, grid: &RadialGrid, exec: Execution) -> Result<Self, NumericError> {
        spec.ensure_valid()?;
        let (w1, w2) = exec.join(|| ComponentWeights::sample(spec, 0, grid), || ComponentWeights::sample(spec, 1, grid));
        Ok(IntegralOperator {
            spec: spec.clone(),
            grid: grid.clone(),
            weights: [w1?, w2?],
            exec,
        })
    }

    pub fn spec(&self) -> &ProblemSpec {
        &self.spec
    }

    pub fn grid(&self) -> &RadialGrid {
        &self.grid
    }

    pub fn execution(&self) -> Execution {
        self.exec
    }

    pub fn apply(&self, prof: &ProfilePair) -> Result<ProfilePair, NumericError> {
        self.apply_with_derivative(prof).map(|a| a.profile)
    }

    pub fn apply_with_derivative(&self, prof: &ProfilePair) -> Result<Applied, NumericError> {
        if prof.grid != self.grid {
            return Err(NumericError::Grid("profile lives on a different grid than the operator".into()));
        }
        let u1 = clamp_nonnegative(&prof.u1, "u1");
        let u2 = clamp_nonnegative(&prof.u2, "u2");
        let (c1, c2) = self.exec.join(|| self.component(0, &u1, &u2), || self.component(1, &u1, &u2));
        let (v1, du1) = c1?;
        let (v2, du2) = c2?;
        Ok(Applied { profile: ProfilePair { grid: self.grid.clone(), u1: v1, u2: v2 }, du1, du2 })
    }

    /// `(S u)_j` and its derivative.
    fn component(&self, j: usize, u1: &[f64], u2: &[f64]) -> Result<(Vec<f64>, Vec<f64>), NumericError> {
        let nodes = self.grid.nodes();
        let f = &self.spec.f[j];
        let name = if j == 0 { "f1" } else { "f2" };
        let fvals = self
            .exec
            .map_range(nodes.len(), |m| {
                let at = [u1[m], u2[m]];
                f.eval(&at).map_err(|e| NumericError::from_eval(name, &at, nodes[m], e))
            })
            .into_iter()
            .collect::<Result<Vec<f64>, _>>()?;

        let kernel = kernel_from_weights(nodes, &self.weights[j], &fvals)?;
        let q = self.spec.outer_exponent();
        let mut negative = 0usize;
        let du: Vec<f64> = kernel
            .iter()
            .map(|&k| {
                if k < 0.0 {
                    negative += 1;
                    0.0
                } else {
                    k.powf(q)
                }
            })
            .collect();
        if negative > 0 {
            log::warn!("component {}: kernel negative at {negative} node(s), clamped to 0", j + 1);
        }

        let integral = cumulative_trapezoid(nodes, &du);
        let b2 = self.spec.central_value();
        let mut out = Vec::with_capacity(nodes.len());
        for (m, v) in integral.into_iter().enumerate() {
            let u = b2 + v;
            if !u.is_finite() || !du[m].is_finite() {
                return Err(NumericError::Overflow { radius: nodes[m], what: format!("component {} is not finite", j + 1) });
            }
            out.push(u);
        }
        Ok((out, du))
    }
}

fn clamp_nonnegative(u: &[f64], name: &str) -> Vec<f64> {
    let negative = u.iter().filter(|&&x| x < 0.0).count();
    if negative == 0 {
        return u.to_vec();
    }
    log::warn!("{name}: {negative} negative node value(s) clamped to 0");
    u.iter().map(|&x| x.max(0.0)).collect()
}

/// One application of `S` with a fresh operator.
pub fn apply_s(spec: &ProblemSpec, prof: &ProfilePair) -> Result<ProfilePair, NumericError> {
    IntegralOperator::new(spec, &prof.grid, Execution::default())?.apply(prof)
}
