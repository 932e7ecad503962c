//! Integral conditions on the nonlinearities and weights, each decided by
//! the finite-horizon divergence engine.
//!
//! | id | integrand | reading |
//! |----|-----------|---------|
//! | `KO` | `F(s)^{-1/q}` on `[b, ∞)` | existence machinery applies when divergent |
//! | `KO1` | scalar form of `KO` | |
//! | `LZZ` | `1 / Σ f_i(s,s)` on `[b, ∞)` | divergent implies `KO` divergent |
//! | `Bounded5` | `t^{1+ε} (Σ e^{p H_j/(p-1)} a_j)^{2/p}` | convergent for some ε: bounded solutions |
//! | `Large12` | `K_j(t)^{1/(p-1)}` with unit source | divergent for both j: large solutions |
//! | `NoBounded5b` | `(e^{-H_j} t a_j / N)^{1/(p-1)}` | divergent: no bounded solutions |
//! | `Necessary13` | same as `Bounded5` | divergent for all ε if a large solution exists |
//!
//! Overflow while sampling an integrand is treated as `+∞`.

mod engine;
mod ko;
mod weights;

pub use engine::{
    check_divergence, check_divergence_fn, ConditionId, ConditionVerdict, DivergenceFit, Horizons, Status, TailGrid,
    DEFAULT_DELTA, DEFAULT_PER_DECADE,
};
pub use ko::{build_f, check_ko, check_ko1, check_lzz, i_inverse, i_of, DiagonalF, ITable};
pub use weights::{
    check_bounded5, check_large12, check_necessary13, check_nonexistence5b, check_weight_monotone, EpsilonVerdicts,
    WeightMonotoneReport,
};

use crate::expr::{ExprError, Expression};
use crate::quadrature::NumericError;

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum ConditionError {
    #[error(transparent)]
    Numeric(#[from] NumericError),
    #[error("invalid horizons: {0}")]
    Horizons(String),
    #[error("I^{{-1}}({y}) is beyond the tabulated range I(s_max) = {max}")]
    RangeExhausted { y: f64, max: f64 },
    #[error("F vanishes at s = {at}; I is undefined")]
    FVanishes { at: f64 },
    #[error("{0}")]
    InvalidArgument(String),
}

/// Evaluates `e` with overflow mapped to `+∞`; other failures are errors.
pub(crate) fn eval_or_inf(e: &Expression, name: &str, at: &[f64]) -> Result<f64, ConditionError> {
    match e.eval(at) {
        Ok(v) => Ok(v),
        Err(ExprError::Overflow(_)) => Ok(f64::INFINITY),
        Err(err) => Err(NumericError::Eval { function: name.to_string(), at: at.to_vec(), source: err }.into()),
    }
}
