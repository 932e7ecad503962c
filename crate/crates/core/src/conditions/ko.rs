//! Keller-Osserman type conditions on the diagonal of the nonlinearity.
//!
//! `F(s) = ∫_0^s Σ_i f_i(t,t) dt` and `I(r) = ∫_b^r F(s)^{-1/q} ds`.

use super::engine::{check_divergence, ConditionId, ConditionVerdict, Horizons, Status, TailGrid};
use super::{eval_or_inf, ConditionError};
use crate::expr::Expression;
use crate::model::ProblemSpec;
use crate::quadrature::cumulative_trapezoid;

/// `Σ_i f_i(t,t)`.
fn diagonal_sum(spec: &ProblemSpec, t: f64) -> Result<f64, ConditionError> {
    Ok(eval_or_inf(&spec.f[0], "f1", &[t, t])? + eval_or_inf(&spec.f[1], "f2", &[t, t])?)
}

/// Tabulated `F` on `[0, s_max]`; `b` is a node.
#[derive(Debug, Clone, PartialEq)]
pub struct DiagonalF {
    pub b: f64,
    pub s: Vec<f64>,
    pub big_f: Vec<f64>,
    b_idx: usize,
}

impl DiagonalF {
    /// Graded on `[0, b]` with `m_s` cells, geometric beyond with `m_s`
    /// cells per decade (at least `m_s`).
    pub fn from_fn(
        b: f64,
        s_max: f64,
        m_s: usize,
        diag: impl Fn(f64) -> Result<f64, ConditionError>,
    ) -> Result<Self, ConditionError> {
        if !(b > 0.0 && s_max > b && s_max.is_finite()) {
            return Err(ConditionError::InvalidArgument(format!("need 0 < b < s_max, got b = {b}, s_max = {s_max}")));
        }
        if m_s < 2 {
            return Err(ConditionError::InvalidArgument("need at least 2 cells".into()));
        }
        let mut s: Vec<f64> = (0..=m_s).map(|m| if m == m_s { b } else { b * (m as f64 / m_s as f64).powi(2) }).collect();
        let b_idx = m_s;
        let cells = ((s_max / b).log10() * m_s as f64).ceil().max(m_s as f64) as usize;
        let ratio = (s_max / b).ln();
        s.extend((1..=cells).map(|m| if m == cells { s_max } else { b * (ratio * m as f64 / cells as f64).exp() }));
        let vals = s.iter().map(|&t| diag(t)).collect::<Result<Vec<_>, _>>()?;
        let big_f = cumulative_trapezoid(&s, &vals);
        Ok(DiagonalF { b, s, big_f, b_idx })
    }

    pub fn s_max(&self) -> f64 {
        *self.s.last().unwrap()
    }

    /// `F` at a node `s`, or linear interpolation between nodes.
    pub fn value(&self, x: f64) -> f64 {
        let k = self.s.partition_point(|&t| t <= x).clamp(1, self.s.len() - 1);
        let (s0, s1) = (self.s[k - 1], self.s[k]);
        let w = ((x - s0) / (s1 - s0)).clamp(0.0, 1.0);
        self.big_f[k - 1] + w * (self.big_f[k] - self.big_f[k - 1])
    }
}

pub fn build_f(spec: &ProblemSpec, s_max: f64, m_s: usize) -> Result<DiagonalF, ConditionError> {
    DiagonalF::from_fn(spec.b, s_max, m_s, |t| diagonal_sum(spec, t))
}

/// `I` on the nodes of a [`DiagonalF`] at or beyond `b`. Between nodes the
/// integrand is linear, so `I` is piecewise quadratic and inverted exactly.
#[derive(Debug, Clone, PartialEq)]
pub struct ITable {
    pub q: f64,
    s: Vec<f64>,
    g: Vec<f64>,
    i: Vec<f64>,
}

impl ITable {
    pub fn new(table: &DiagonalF, q: f64) -> Result<Self, ConditionError> {
        if !(q > 1.0) {
            return Err(ConditionError::InvalidArgument(format!("exponent q must exceed 1, got {q}")));
        }
        let s = table.s[table.b_idx..].to_vec();
        let big_f = &table.big_f[table.b_idx..];
        if let Some(k) = big_f.iter().position(|&f| !(f > 0.0)) {
            return Err(ConditionError::FVanishes { at: s[k] });
        }
        let g: Vec<f64> = big_f.iter().map(|f| f.powf(-1.0 / q)).collect();
        let i = cumulative_trapezoid(&s, &g);
        Ok(ITable { q, s, g, i })
    }

    pub fn b(&self) -> f64 {
        self.s[0]
    }

    pub fn s_max(&self) -> f64 {
        *self.s.last().unwrap()
    }

    /// `I(s_max)`.
    pub fn max_value(&self) -> f64 {
        *self.i.last().unwrap()
    }

    fn cell(&self, k: usize) -> (f64, f64, f64, f64) {
        let dx = self.s[k + 1] - self.s[k];
        (self.s[k], self.i[k], self.g[k], (self.g[k + 1] - self.g[k]) / (2.0 * dx))
    }

    pub fn value(&self, r: f64) -> Result<f64, ConditionError> {
        if r < self.b() || r > self.s_max() || r.is_nan() {
            return Err(ConditionError::InvalidArgument(format!(
                "r = {r} outside the tabulated range [{}, {}]",
                self.b(),
                self.s_max()
            )));
        }
        let k = (self.s.partition_point(|&t| t <= r) - 1).min(self.s.len() - 2);
        let (s0, i0, g0, a) = self.cell(k);
        let t = r - s0;
        Ok(i0 + g0 * t + a * t * t)
    }

    pub fn inverse(&self, y: f64) -> Result<f64, ConditionError> {
        if y.is_nan() || y < 0.0 {
            return Err(ConditionError::InvalidArgument(format!("I^{{-1}} needs y >= 0, got {y}")));
        }
        if y >= self.max_value() {
            return Err(ConditionError::RangeExhausted { y, max: self.max_value() });
        }
        let k = (self.i.partition_point(|&v| v <= y) - 1).min(self.s.len() - 2);
        let (s0, i0, g0, a) = self.cell(k);
        // a t^2 + g0 t = c, root on the increasing branch
        let c = y - i0;
        let disc = (g0 * g0 + 4.0 * a * c).max(0.0);
        let t = if c == 0.0 { 0.0 } else { 2.0 * c / (g0 + disc.sqrt()) };
        Ok((s0 + t).min(self.s[k + 1]))
    }
}

pub fn i_of(table: &DiagonalF, r: f64, q: f64) -> Result<f64, ConditionError> {
    ITable::new(table, q)?.value(r)
}

pub fn i_inverse(table: &DiagonalF, y: f64, q: f64) -> Result<f64, ConditionError> {
    ITable::new(table, q)?.inverse(y)
}

/// `∫_lower^∞ (∫_0^s d(t) dt)^{-1/q} ds` for a sampled diagonal `d`.
fn ko_verdict(
    id: ConditionId,
    lower: f64,
    q: f64,
    horizons: &Horizons,
    diag: impl Fn(f64) -> Result<f64, ConditionError>,
) -> Result<ConditionVerdict, ConditionError> {
    if !(q > 1.0) {
        return Err(ConditionError::InvalidArgument(format!("exponent q must exceed 1, got {q}")));
    }
    let tail = TailGrid::new(lower, horizons)?;
    let vals = tail.nodes().iter().map(|&t| diag(t)).collect::<Result<Vec<_>, _>>()?;
    let big_f = cumulative_trapezoid(tail.nodes(), &vals);
    let lo = tail.lower_index();
    if !(big_f[lo] > 0.0) {
        let fit = super::engine::DivergenceFit {
            status: Status::Inconclusive,
            partial_values: Vec::new(),
            tail_slope: None,
            log_slope: None,
            note: Some(format!("F vanishes at the lower limit {lower}")),
        };
        return Ok(ConditionVerdict::from_fit(id, fit).with_q(q));
    }
    let samples: Vec<f64> =
        big_f.iter().enumerate().map(|(k, f)| if k < lo { 0.0 } else { f.powf(-1.0 / q) }).collect();
    Ok(ConditionVerdict::from_fit(id, check_divergence(&tail, &samples, horizons.delta)).with_q(q))
}

/// `∫_b^∞ F(s)^{-1/q} ds = ∞`.
pub fn check_ko(spec: &ProblemSpec, q: f64, horizons: &Horizons) -> Result<ConditionVerdict, ConditionError> {
    ko_verdict(ConditionId::KO, spec.b, q, horizons, |t| diagonal_sum(spec, t))
}

/// Scalar form `∫_{u0}^∞ (∫_0^t f(s) ds)^{-1/2} dt = ∞` for `f` over `u`.
pub fn check_ko1(f: &Expression, u0: f64, horizons: &Horizons) -> Result<ConditionVerdict, ConditionError> {
    if f.allowed_variables().len() != 1 {
        return Err(ConditionError::InvalidArgument("the scalar form needs an expression in one variable".into()));
    }
    ko_verdict(ConditionId::KO1, u0, 2.0, horizons, |t| eval_or_inf(f, "f", &[t]))
}

/// `∫_b^∞ ds / (f_1(s,s) + f_2(s,s)) = ∞`.
pub fn check_lzz(spec: &ProblemSpec, horizons: &Horizons) -> Result<ConditionVerdict, ConditionError> {
    let tail = TailGrid::new(spec.b, horizons)?;
    let lo = tail.lower_index();
    let samples = tail
        .nodes()
        .iter()
        .enumerate()
        .map(|(k, &t)| if k < lo { Ok(0.0) } else { diagonal_sum(spec, t).map(|d| 1.0 / d) })
        .collect::<Result<Vec<_>, _>>()?;
    Ok(ConditionVerdict::from_fit(ConditionId::LZZ, check_divergence(&tail, &samples, horizons.delta)))
}
