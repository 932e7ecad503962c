//! Conditions on the weights `a_j` and drifts `h_j`. All exponentials are
//! combined in log space so that `e^{H}` never overflows on its own.

use serde::Serialize;

use super::engine::{check_divergence, ConditionId, ConditionVerdict, Horizons, Status, TailGrid};
use super::{eval_or_inf, ConditionError};
use crate::model::ProblemSpec;
use crate::quadrature::{cumulative_trapezoid, kernel_from_weights, ComponentWeights, NumericError, RadialGrid};

/// `(a_j, H_j)` at the given nodes, which must start at the origin.
fn sample_weights(spec: &ProblemSpec, j: usize, nodes: &[f64]) -> Result<(Vec<f64>, Vec<f64>), ConditionError> {
    let (an, hn) = (format!("a{}", j + 1), format!("h{}", j + 1));
    let a = nodes.iter().map(|&t| eval_or_inf(&spec.a[j], &an, &[t])).collect::<Result<Vec<_>, _>>()?;
    let h = nodes.iter().map(|&t| eval_or_inf(&spec.h[j], &hn, &[t])).collect::<Result<Vec<_>, _>>()?;
    Ok((a, cumulative_trapezoid(nodes, &h)))
}

/// `ln Σ_j e^{c H_j} a_j` at every node; `-∞` where every term vanishes and
/// NaN where some `a_j < 0`.
fn log_weighted_sum(spec: &ProblemSpec, nodes: &[f64]) -> Result<Vec<f64>, ConditionError> {
    let c = spec.p / (spec.p - 1.0);
    let (a1, h1) = sample_weights(spec, 0, nodes)?;
    let (a2, h2) = sample_weights(spec, 1, nodes)?;
    Ok((0..nodes.len())
        .map(|m| {
            let x1 = c * h1[m] + a1[m].ln();
            let x2 = c * h2[m] + a2[m].ln();
            let hi = x1.max(x2);
            if x1.is_nan() || x2.is_nan() {
                f64::NAN
            } else if hi == f64::NEG_INFINITY || hi == f64::INFINITY {
                hi
            } else {
                hi + ((x1 - hi).exp() + (x2 - hi).exp()).ln()
            }
        })
        .collect())
}

/// Per-ε verdicts with their aggregate: "some tested ε convergent" for
/// boundedness and "every tested ε divergent" for the necessary condition.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct EpsilonVerdicts {
    pub verdicts: Vec<ConditionVerdict>,
    pub aggregate: bool,
}

fn epsilon_family(
    spec: &ProblemSpec,
    id: ConditionId,
    epsilons: &[f64],
    horizons: &Horizons,
) -> Result<Vec<ConditionVerdict>, ConditionError> {
    if let Some(e) = epsilons.iter().find(|&&e| !(e > 0.0 && e.is_finite())) {
        return Err(ConditionError::InvalidArgument(format!("ε must be positive, got {e}")));
    }
    let tail = TailGrid::new(0.0, horizons)?;
    let ln_s = log_weighted_sum(spec, tail.nodes())?;
    let outer = 2.0 / spec.p;
    Ok(epsilons
        .iter()
        .map(|&eps| {
            let samples: Vec<f64> = tail
                .nodes()
                .iter()
                .zip(&ln_s)
                .map(|(&t, &ls)| if t == 0.0 { 0.0 } else { ((1.0 + eps) * t.ln() + outer * ls).exp() })
                .collect();
            ConditionVerdict::from_fit(id, check_divergence(&tail, &samples, horizons.delta)).with_epsilon(eps)
        })
        .collect())
}

/// `∫_0^∞ t^{1+ε} (Σ_j e^{p H_j/(p-1)} a_j)^{2/p} dt < ∞` for some tested ε.
pub fn check_bounded5(spec: &ProblemSpec, epsilons: &[f64], horizons: &Horizons) -> Result<EpsilonVerdicts, ConditionError> {
    let verdicts = epsilon_family(spec, ConditionId::Bounded5, epsilons, horizons)?;
    let aggregate = verdicts.iter().any(|v| v.status == Status::Convergent);
    Ok(EpsilonVerdicts { verdicts, aggregate })
}

/// The same integral `= ∞` for every tested ε.
pub fn check_necessary13(spec: &ProblemSpec, epsilons: &[f64], horizons: &Horizons) -> Result<EpsilonVerdicts, ConditionError> {
    let verdicts = epsilon_family(spec, ConditionId::Necessary13, epsilons, horizons)?;
    let aggregate = !verdicts.is_empty() && verdicts.iter().all(|v| v.status == Status::Divergent);
    Ok(EpsilonVerdicts { verdicts, aggregate })
}

/// `∫_0^∞ K_j(t)^{1/(p-1)} dt = ∞` with unit source, per component.
pub fn check_large12(spec: &ProblemSpec, horizons: &Horizons) -> Result<[ConditionVerdict; 2], ConditionError> {
    let tail = TailGrid::new(0.0, horizons)?;
    let nodes = tail.nodes();
    let q = spec.outer_exponent();
    let one = vec![1.0; nodes.len()];
    let verdict = |j: usize| -> Result<ConditionVerdict, ConditionError> {
        let (a, big_h) = sample_weights(spec, j, nodes)?;
        let weights = ComponentWeights::from_samples(nodes, spec.n, a, big_h);
        let samples = match kernel_from_weights(nodes, &weights, &one) {
            Ok(k) => k.iter().map(|v| v.powf(q)).collect(),
            Err(NumericError::Overflow { radius, .. }) => {
                // the kernel is cumulative, so everything past the overflow is infinite
                let k = nodes.partition_point(|&t| t < radius);
                let mut s = vec![0.0; nodes.len()];
                s[k..].iter_mut().for_each(|v| *v = f64::INFINITY);
                s
            }
            Err(e) => return Err(e.into()),
        };
        Ok(ConditionVerdict::from_fit(ConditionId::Large12, check_divergence(&tail, &samples, horizons.delta))
            .with_component(j))
    };
    Ok([verdict(0)?, verdict(1)?])
}

/// `∫_0^∞ (e^{-H_j(t)} t a_j(t) / N)^{1/(p-1)} dt = ∞`, per component. When
/// divergent, no nontrivial bounded entire solution exists.
pub fn check_nonexistence5b(spec: &ProblemSpec, horizons: &Horizons) -> Result<[ConditionVerdict; 2], ConditionError> {
    let tail = TailGrid::new(0.0, horizons)?;
    let nodes = tail.nodes();
    let q = spec.outer_exponent();
    let ln_n = spec.dim().ln();
    let verdict = |j: usize| -> Result<ConditionVerdict, ConditionError> {
        let (a, big_h) = sample_weights(spec, j, nodes)?;
        let samples: Vec<f64> = nodes
            .iter()
            .enumerate()
            .map(|(m, &t)| if t == 0.0 { 0.0 } else { (q * (-big_h[m] + t.ln() + a[m].ln() - ln_n)).exp() })
            .collect();
        Ok(ConditionVerdict::from_fit(ConditionId::NoBounded5b, check_divergence(&tail, &samples, horizons.delta))
            .with_component(j))
    };
    Ok([verdict(0)?, verdict(1)?])
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct WeightMonotoneReport {
    pub condition: ConditionId,
    pub holds: bool,
    pub first_violation: Option<f64>,
    pub r_from: f64,
    pub r_to: f64,
}

/// Sampled check that `W(r) = r^{p(N-1)/(p-1)} Σ_j e^{p H_j/(p-1)} a_j` does
/// not decrease on `[r_from, R_max]` of `grid`.
pub fn check_weight_monotone(
    spec: &ProblemSpec,
    r_from: f64,
    grid: &RadialGrid,
) -> Result<WeightMonotoneReport, ConditionError> {
    let nodes = grid.nodes();
    let ln_s = log_weighted_sum(spec, nodes)?;
    let power = spec.p * (spec.dim() - 1.0) / (spec.p - 1.0);
    let start = nodes.partition_point(|&r| r < r_from).max(1);
    let mut first_violation = None;
    let mut prev = f64::NAN;
    for m in start..nodes.len() {
        let lw = power * nodes[m].ln() + ln_s[m];
        if lw.is_nan() {
            first_violation = Some(nodes[m]);
            break;
        }
        if m > start && lw < prev - 1e-12 * (1.0 + prev.abs()) {
            first_violation = Some(nodes[m]);
            break;
        }
        prev = lw;
    }
    Ok(WeightMonotoneReport {
        condition: ConditionId::WeightMonotone,
        holds: first_violation.is_none(),
        first_violation,
        r_from,
        r_to: grid.r_max(),
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::ProblemText;

    fn spec(p: f64, n: u32, a: &str, h: &str) -> ProblemSpec {
        ProblemSpec::from_text(&ProblemText::symmetric(p, n, 1.0, a, h, "u+v")).unwrap()
    }

    fn statuses(v: &[ConditionVerdict]) -> Vec<Status> {
        v.iter().map(|v| v.status).collect()
    }

    #[test]
    fn bounded5_catalog() {
        let h = Horizons::default();
        let r = check_bounded5(&spec(2.0, 3, "(1+r)^(-4)", "0"), &[0.5], &h).unwrap();
        assert_eq!(statuses(&r.verdicts), vec![Status::Convergent]);
        assert!(r.aggregate);
        let r = check_bounded5(&spec(2.0, 3, "1", "0"), &[0.1, 0.5, 1.0], &h).unwrap();
        assert_eq!(statuses(&r.verdicts), vec![Status::Divergent; 3]);
        assert!(!r.aggregate);
        let r = check_bounded5(&spec(2.0, 3, "exp(-4*r)", "1"), &[0.5], &h).unwrap();
        assert_eq!(statuses(&r.verdicts), vec![Status::Convergent]);
    }

    #[test]
    fn large12_catalog() {
        let h = Horizons::default();
        for n in [3, 5] {
            let r = check_large12(&spec(2.0, n, "1", "0"), &h).unwrap();
            assert_eq!(statuses(&r), vec![Status::Divergent; 2]);
        }
        let r = check_large12(&spec(2.0, 3, "(1+r)^(-4)", "0"), &h).unwrap();
        assert_eq!(statuses(&r), vec![Status::Convergent; 2]);
        let r = check_large12(&spec(2.0, 3, "1", "1"), &Horizons::decades(1, 3)).unwrap();
        assert_eq!(statuses(&r), vec![Status::Divergent; 2]);
        // the integrand tends to 1
        let (t, p) = r[0].partial_values[2];
        let (t0, p0) = r[0].partial_values[1];
        assert!(((p - p0) / (t - t0) - 1.0).abs() < 0.01);
    }

    #[test]
    fn nonexistence5b_catalog() {
        let h = Horizons::default();
        assert_eq!(statuses(&check_nonexistence5b(&spec(2.0, 3, "1", "0"), &h).unwrap()), vec![Status::Divergent; 2]);
        assert_eq!(
            statuses(&check_nonexistence5b(&spec(2.0, 3, "(1+r)^(-4)", "0"), &h).unwrap()),
            vec![Status::Convergent; 2]
        );
        assert_eq!(
            statuses(&check_nonexistence5b(&spec(2.0, 3, "exp(2*r)", "1"), &h).unwrap()),
            vec![Status::Divergent; 2]
        );
    }

    #[test]
    fn necessary13_catalog() {
        let h = Horizons::default();
        let eps = [0.1, 0.5, 1.0];
        assert!(check_necessary13(&spec(2.0, 3, "1", "0"), &eps, &h).unwrap().aggregate);
        let r = check_necessary13(&spec(2.0, 3, "(1+r)^(-4)", "0"), &[0.5], &h).unwrap();
        assert_eq!(r.verdicts[0].status, Status::Convergent);
        assert!(!r.aggregate);
    }

    #[test]
    fn weight_monotone_catalog() {
        let g = RadialGrid::graded(100.0, 2000, 2.0).unwrap();
        assert!(check_weight_monotone(&spec(2.0, 3, "1", "0"), 1.0, &g).unwrap().holds);
        assert!(check_weight_monotone(&spec(2.0, 3, "(1+r)^(-4)", "0"), 1.0, &g).unwrap().holds);
        let r = check_weight_monotone(&spec(2.0, 3, "exp(-r*r)", "0"), 1.0, &g).unwrap();
        assert!(!r.holds);
        // W = r^4 e^{-r^2} peaks at r = √2
        let at = r.first_violation.unwrap();
        assert!((at - 2f64.sqrt()).abs() < 0.05, "{at}");
    }
}
