//! Sample-based audits of the structural hypotheses on coefficients and
//! nonlinearities. An empty violation list means "nothing found on the
//! lattice", never a proof.

use serde::Serialize;

use super::{ExprError, Expression};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum Property {
    /// Value is >= 0 at every sample point.
    NonnegOnRay,
    /// Value does not decrease when any single variable increases.
    NondecreasingEachVar,
    /// Value is > 0 at every sample point with some coordinate > 0.
    PositiveWhenPositive,
}

/// Uniform lattice `[lo, hi]^d` with `points` samples per axis, where `d`
/// is the number of allowed variables of the audited expression.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SampleSpec {
    pub lo: f64,
    pub hi: f64,
    pub points: usize,
}

impl SampleSpec {
    pub fn new(lo: f64, hi: f64, points: usize) -> Self {
        SampleSpec { lo, hi, points: points.max(2) }
    }

    fn coord(&self, i: usize) -> f64 {
        if i + 1 == self.points {
            self.hi
        } else {
            self.lo + (self.hi - self.lo) * i as f64 / (self.points - 1) as f64
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Violation {
    pub property: Property,
    /// Coordinates in allowed-variable order.
    pub point: Vec<f64>,
    pub value: f64,
    pub detail: String,
}

pub fn check_sampled_properties(
    expr: &Expression,
    property: Property,
    sample: &SampleSpec,
) -> Result<Vec<Violation>, ExprError> {
    let dims = expr.allowed_variables().len();
    let n = sample.points;
    let total = n.pow(dims as u32);
    let index_to_point = |mut idx: usize| -> Vec<f64> {
        let mut pt = vec![0.0; dims];
        for d in (0..dims).rev() {
            pt[d] = sample.coord(idx % n);
            idx /= n;
        }
        pt
    };

    let mut values = Vec::with_capacity(total);
    for idx in 0..total {
        values.push(expr.eval(&index_to_point(idx))?);
    }

    let mut out = Vec::new();
    match property {
        Property::NonnegOnRay => {
            for (idx, &v) in values.iter().enumerate() {
                if v < 0.0 {
                    out.push(Violation {
                        property,
                        point: index_to_point(idx),
                        value: v,
                        detail: format!("negative value {v}"),
                    });
                }
            }
        }
        Property::PositiveWhenPositive => {
            for (idx, &v) in values.iter().enumerate() {
                let pt = index_to_point(idx);
                if pt.iter().any(|&x| x > 0.0) && v <= 0.0 {
                    out.push(Violation { property, point: pt, value: v, detail: format!("value {v} is not positive") });
                }
            }
        }
        Property::NondecreasingEachVar => {
            // Along each axis compare every sample with its predecessor.
            for idx in 0..total {
                let mut stride = 1;
                for d in (0..dims).rev() {
                    let coord = (idx / stride) % n;
                    if coord > 0 {
                        let prev = values[idx - stride];
                        let cur = values[idx];
                        if cur < prev - 1e-12 * (1.0 + prev.abs()) {
                            out.push(Violation {
                                property,
                                point: index_to_point(idx),
                                value: cur,
                                detail: format!(
                                    "decreases along `{}`: {prev} -> {cur}",
                                    expr.allowed_variables()[d]
                                ),
                            });
                        }
                    }
                    stride *= n;
                }
            }
        }
    }
    Ok(out)
}
