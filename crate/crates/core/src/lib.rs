//! Radial entire solutions of quasilinear elliptic systems
//!
//! ```text
//! Δ_p u_j + h_j(r) |∇u_j|^{p-1} = a_j(r) f_j(u_1, u_2),   j = 1, 2,  in R^N
//! ```
//!
//! computed by monotone successive approximation of the radial integral
//! operator, with a priori bounds, divergence-based condition classifiers
//! and an independent shooting oracle.

pub mod exec;
pub mod expr;
pub mod model;
pub mod quadrature;
pub mod operator;
pub mod conditions;
pub mod solver;
pub mod oracle;
pub mod cli;
