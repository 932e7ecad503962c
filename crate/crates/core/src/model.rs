//! Problem instances for the radial system
//!
//! ```text
//! Δ_p u_j + h_j(r) |∇u_j|^{p-1} = a_j(r) f_j(u_1, u_2),   j = 1, 2,  in R^N
//! ```
//!
//! with central values `u_j(0) = b/2`.

use std::fmt;

use serde::{Deserialize, Serialize};

use crate::expr::{check_sampled_properties, ExprError, Expression, Property, SampleSpec};

/// Smallest admissible exponent. The outer power `1/(p-1)` overflows for
/// anything closer to 1.
pub const P_GUARD: f64 = 1.0 + 1e-3;

pub const COEFF_VARS: [&str; 1] = ["r"];
pub const NONLIN_VARS: [&str; 2] = ["u", "v"];

/// Source strings for a problem, as they appear in the JSON config.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ProblemText {
    pub p: f64,
    #[serde(rename = "N", alias = "n")]
    pub n: u32,
    pub b: f64,
    pub a1: String,
    pub a2: String,
    #[serde(default = "zero")]
    pub h1: String,
    #[serde(default = "zero")]
    pub h2: String,
    pub f1: String,
    pub f2: String,
}

fn zero() -> String {
    "0".to_string()
}

impl ProblemText {
    /// Both components share the same coefficient strings.
    pub fn symmetric(p: f64, n: u32, b: f64, a: &str, h: &str, f: &str) -> Self {
        ProblemText {
            p,
            n,
            b,
            a1: a.into(),
            a2: a.into(),
            h1: h.into(),
            h2: h.into(),
            f1: f.into(),
            f2: f.into(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum ModelError {
    #[error("cannot parse `{field}`: {source}")]
    Parse { field: &'static str, source: ExprError },
    #[error("invalid problem: {}", join_errors(.0))]
    Invalid(Vec<HardError>),
}

fn join_errors(errs: &[HardError]) -> String {
    errs.iter().map(|e| e.to_string()).collect::<Vec<_>>().join("; ")
}

/// Violated structural invariants. Any of these rejects the instance.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum HardError {
    PNotAboveOne { p: f64 },
    PBelowGuard { p: f64 },
    PAboveNMinusOne { p: f64, n: u32 },
    DimensionTooSmall { n: u32 },
    NonPositiveCentralValue { b: f64 },
    NonFiniteParameter,
}

impl fmt::Display for HardError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            HardError::PNotAboveOne { p } => write!(f, "p ≤ 1 (p = {p})"),
            HardError::PBelowGuard { p } => write!(f, "p < 1 + 1e-3 (p = {p}); the exponent 1/(p-1) is numerically unusable"),
            HardError::PAboveNMinusOne { p, n } => write!(f, "p > N−1 (p = {p}, N = {n})"),
            HardError::DimensionTooSmall { n } => write!(f, "N < 3 (N = {n})"),
            HardError::NonPositiveCentralValue { b } => write!(f, "b ≤ 0 (b = {b})"),
            HardError::NonFiniteParameter => write!(f, "p and b must be finite"),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Warning {
    pub function: String,
    pub message: String,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize)]
pub struct ValidationReport {
    pub hard_errors: Vec<HardError>,
    pub warnings: Vec<Warning>,
}

impl ValidationReport {
    pub fn is_valid(&self) -> bool {
        self.hard_errors.is_empty()
    }
}

/// Where the sampled audits look: `[0, r_max]` for coefficients and
/// `[0, u_max]^2` for nonlinearities, `points` per axis.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct AuditSampling {
    pub r_max: f64,
    pub u_max: f64,
    pub points: usize,
}

impl Default for AuditSampling {
    fn default() -> Self {
        AuditSampling { r_max: 100.0, u_max: 10.0, points: 33 }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct ProblemSpec {
    pub p: f64,
    pub n: u32,
    pub b: f64,
    pub a: [Expression; 2],
    pub h: [Expression; 2],
    pub f: [Expression; 2],
    text: ProblemText,
}

impl ProblemSpec {
    /// Parses all six expressions. Structural checks are left to
    /// [`ProblemSpec::validate`] so that a report can list every problem at once.
    pub fn from_text(text: &ProblemText) -> Result<Self, ModelError> {
        let coeff = |field: &'static str, s: &str| {
            Expression::parse(s, &COEFF_VARS).map_err(|source| ModelError::Parse { field, source })
        };
        let nonlin = |field: &'static str, s: &str| {
            Expression::parse(s, &NONLIN_VARS).map_err(|source| ModelError::Parse { field, source })
        };
        Ok(ProblemSpec {
            p: text.p,
            n: text.n,
            b: text.b,
            a: [coeff("a1", &text.a1)?, coeff("a2", &text.a2)?],
            h: [coeff("h1", &text.h1)?, coeff("h2", &text.h2)?],
            f: [nonlin("f1", &text.f1)?, nonlin("f2", &text.f2)?],
            text: text.clone(),
        })
    }

    pub fn text(&self) -> &ProblemText {
        &self.text
    }

    pub fn dim(&self) -> f64 {
        self.n as f64
    }

    /// Outer exponent `1/(p-1)`.
    pub fn outer_exponent(&self) -> f64 {
        1.0 / (self.p - 1.0)
    }

    pub fn central_value(&self) -> f64 {
        self.b / 2.0
    }

    pub fn hard_errors(&self) -> Vec<HardError> {
        let mut errs = Vec::new();
        if !self.p.is_finite() || !self.b.is_finite() {
            errs.push(HardError::NonFiniteParameter);
            return errs;
        }
        if self.p <= 1.0 {
            errs.push(HardError::PNotAboveOne { p: self.p });
        } else if self.p < P_GUARD {
            errs.push(HardError::PBelowGuard { p: self.p });
        }
        if self.n < 3 {
            errs.push(HardError::DimensionTooSmall { n: self.n });
        }
        if self.p > self.n as f64 - 1.0 {
            errs.push(HardError::PAboveNMinusOne { p: self.p, n: self.n });
        }
        if self.b <= 0.0 {
            errs.push(HardError::NonPositiveCentralValue { b: self.b });
        }
        errs
    }

    /// Fails fast with the same error identities [`ProblemSpec::validate`] reports.
    pub fn ensure_valid(&self) -> Result<(), ModelError> {
        let errs = self.hard_errors();
        if errs.is_empty() {
            Ok(())
        } else {
            Err(ModelError::Invalid(errs))
        }
    }

    pub fn validate(&self, sampling: &AuditSampling) -> ValidationReport {
        let mut warnings = Vec::new();
        let ray = SampleSpec::new(0.0, sampling.r_max, sampling.points);
        let lattice = SampleSpec::new(0.0, sampling.u_max, sampling.points);

        let mut audit = |name: String, e: &Expression, prop: Property, s: &SampleSpec| {
            match check_sampled_properties(e, prop, s) {
                Ok(v) if v.is_empty() => {}
                Ok(v) => {
                    let first = &v[0];
                    warnings.push(Warning {
                        function: name,
                        message: format!(
                            "{:?} violated at {} sample(s); first at {:?}: {}",
                            prop,
                            v.len(),
                            first.point,
                            first.detail
                        ),
                    });
                }
                Err(e) => warnings.push(Warning { function: name, message: format!("evaluation failed: {e}") }),
            }
        };

        for j in 0..2 {
            audit(format!("a{}", j + 1), &self.a[j], Property::NonnegOnRay, &ray);
            audit(format!("h{}", j + 1), &self.h[j], Property::NonnegOnRay, &ray);
            audit(format!("f{}", j + 1), &self.f[j], Property::NonnegOnRay, &lattice);
            audit(format!("f{}", j + 1), &self.f[j], Property::NondecreasingEachVar, &lattice);
            audit(format!("f{}", j + 1), &self.f[j], Property::PositiveWhenPositive, &lattice);
        }

        for j in 0..2 {
            let all_zero = (0..ray.points)
                .map(|i| ray.lo + (ray.hi - ray.lo) * i as f64 / (ray.points - 1) as f64)
                .all(|r| matches!(self.a[j].eval(&[r]), Ok(v) if v == 0.0));
            if all_zero {
                warnings.push(Warning {
                    function: format!("a{}", j + 1),
                    message: "identically zero on the sampled ray (trivial weight)".into(),
                });
            }
        }

        ValidationReport { hard_errors: self.hard_errors(), warnings }
    }
}
