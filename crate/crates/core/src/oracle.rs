//! Independent checks on computed profiles.
//!
//! [`ivp_shoot`] integrates the radial ODE as an initial value problem with
//! classical RK4 in the variables `(u_j, ψ_j, H_j)`, `ψ_j = (u_j')^{p-1}`:
//!
//! ```text
//! u_j' = ψ_j^{1/(p-1)},   ψ_j' = a_j f_j(u_1, u_2) - (h_j + (N-1)/t) ψ_j,   H_j' = h_j
//! ```
//!
//! from `(b/2, 0, 0)`. At `t = 0` the right-hand side takes its limit
//! `ψ_j' = a_j(0) f_j / N`. The flux `w_j = t^{N-1} e^{H_j} ψ_j` is recovered
//! afterwards. [`residual_ode`] measures how well a profile satisfies the
//! differential and the integral forms of the system.

use std::io::Write;

use serde::Serialize;

use crate::expr::ExprError;
use crate::model::ProblemSpec;
use crate::operator::{apply_s, ProfilePair};
use crate::quadrature::{cumulative_trapezoid, weight_h, NumericError, RadialGrid};
use crate::solver::BLOWUP_LEVEL;

pub const MIN_STEPS: usize = 100;
/// Below this `u'` the `(u')^{p-2}` factor is treated as singular when `p < 2`.
const SINGULAR_DERIVATIVE: f64 = 1e-12;

#[derive(Debug, Clone, PartialEq)]
pub struct IvpSolution {
    pub profile: ProfilePair,
    pub du: [Vec<f64>; 2],
    pub flux: [Vec<f64>; 2],
}

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum OracleError {
    #[error(transparent)]
    Numeric(#[from] NumericError),
    #[error("need at least {MIN_STEPS} steps, got {0}")]
    TooFewSteps(usize),
    #[error("blow-up near r = {radius}")]
    Overflow { radius: f64, reached: usize },
    #[error("profile has {0} nodes; need at least 5")]
    TooFewNodes(usize),
    #[error("csv: {0}")]
    Csv(String),
}

type State = [f64; 6];

struct Rhs<'a> {
    spec: &'a ProblemSpec,
    q: f64,
}

impl Rhs<'_> {
    fn coefficient(&self, which: &str, j: usize, t: f64) -> Result<f64, NumericError> {
        let e = if which == "a" { &self.spec.a[j] } else { &self.spec.h[j] };
        e.eval(&[t]).map_err(|err| NumericError::from_eval(&format!("{which}{}", j + 1), &[t], t, err))
    }

    fn eval(&self, t: f64, y: &State) -> Result<State, NumericError> {
        let n = self.spec.dim();
        let args = [y[0].max(0.0), y[1].max(0.0)];
        let mut out = [0.0; 6];
        for j in 0..2 {
            let a = self.coefficient("a", j, t)?;
            let h = self.coefficient("h", j, t)?;
            let name = if j == 0 { "f1" } else { "f2" };
            let f = self.spec.f[j].eval(&args).map_err(|err| match err {
                ExprError::Overflow(w) => NumericError::Overflow { radius: t, what: format!("{name}: {w}") },
                err => NumericError::Eval { function: name.into(), at: args.to_vec(), source: err },
            })?;
            let psi = y[2 + j];
            if t == 0.0 {
                out[j] = 0.0;
                out[2 + j] = a * f / n;
            } else {
                out[j] = psi.max(0.0).powf(self.q);
                out[2 + j] = a * f - (h + (n - 1.0) / t) * psi;
            }
            out[4 + j] = h;
        }
        Ok(out)
    }
}

fn axpy(y: &State, k: &State, s: f64) -> State {
    let mut out = *y;
    for i in 0..6 {
        out[i] += s * k[i];
    }
    out
}

fn blown(y: &State) -> bool {
    y.iter().any(|v| !v.is_finite()) || y[0].abs() > BLOWUP_LEVEL || y[1].abs() > BLOWUP_LEVEL
}

/// Fixed-step RK4 on a uniform mesh of `[0, r_max]` with `steps` cells.
pub fn ivp_shoot_full(spec: &ProblemSpec, r_max: f64, steps: usize) -> Result<IvpSolution, OracleError> {
    spec.ensure_valid().map_err(NumericError::from)?;
    if steps < MIN_STEPS {
        return Err(OracleError::TooFewSteps(steps));
    }
    let grid = RadialGrid::uniform(r_max, steps)?;
    let nodes = grid.nodes();
    let rhs = Rhs { spec, q: spec.outer_exponent() };
    let b2 = spec.central_value();
    let mut y: State = [b2, b2, 0.0, 0.0, 0.0, 0.0];
    let mut states = Vec::with_capacity(nodes.len());
    states.push(y);
    let overflow = |reached: usize, radius: f64| OracleError::Overflow { radius, reached };
    for m in 0..steps {
        let (t, dt) = (nodes[m], nodes[m + 1] - nodes[m]);
        let step = || -> Result<State, NumericError> {
            let k1 = rhs.eval(t, &y)?;
            let k2 = rhs.eval(t + dt / 2.0, &axpy(&y, &k1, dt / 2.0))?;
            let k3 = rhs.eval(t + dt / 2.0, &axpy(&y, &k2, dt / 2.0))?;
            let k4 = rhs.eval(t + dt, &axpy(&y, &k3, dt))?;
            let mut next = y;
            for i in 0..6 {
                next[i] += dt / 6.0 * (k1[i] + 2.0 * k2[i] + 2.0 * k3[i] + k4[i]);
            }
            Ok(next)
        };
        y = match step() {
            Ok(next) => next,
            Err(NumericError::Overflow { .. }) => return Err(overflow(m, nodes[m + 1])),
            Err(e) => return Err(e.into()),
        };
        if blown(&y) {
            return Err(overflow(m, nodes[m + 1]));
        }
        states.push(y);
    }

    let q = spec.outer_exponent();
    let n1 = spec.dim() - 1.0;
    let col = |i: usize| states.iter().map(|s| s[i]).collect::<Vec<f64>>();
    let du = [0, 1].map(|j| states.iter().map(|s| s[2 + j].max(0.0).powf(q)).collect::<Vec<f64>>());
    let flux = [0, 1].map(|j| {
        nodes.iter().zip(&states).map(|(&t, s)| (n1 * t.ln() + s[4 + j]).exp() * s[2 + j]).collect::<Vec<f64>>()
    });
    let flux = flux.map(|mut w| {
        w[0] = 0.0;
        w
    });
    Ok(IvpSolution { profile: ProfilePair::new(grid.clone(), col(0), col(1)), du, flux })
}

pub fn ivp_shoot(spec: &ProblemSpec, r_max: f64, steps: usize) -> Result<ProfilePair, OracleError> {
    ivp_shoot_full(spec, r_max, steps).map(|s| s.profile)
}

/// Relative sup distance `max |u - v| / max |v|` after interpolating `u`
/// onto the nodes of `reference`. Pass the finer profile as `u`.
pub fn relative_sup_distance(u: &ProfilePair, reference: &ProfilePair) -> f64 {
    let mut num: f64 = 0.0;
    let mut den: f64 = 0.0;
    for (m, &r) in reference.grid.nodes().iter().enumerate() {
        for j in 0..2 {
            let v = reference.component(j)[m];
            num = num.max((u.grid.interpolate(u.component(j), r) - v).abs());
            den = den.max(v.abs());
        }
    }
    num / den
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ComponentResidual {
    /// `(r, LHS - RHS)` at the evaluated interior nodes.
    #[serde(skip)]
    pub values: Vec<(f64, f64)>,
    pub sup: f64,
    pub l2: f64,
    /// Radii where the differential form was not evaluated.
    pub skipped: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ResidualReport {
    pub components: [ComponentResidual; 2],
    /// `max |prof - S(prof)|` over nodes and components.
    pub integral_residual: f64,
}

impl ResidualReport {
    pub fn sup(&self) -> f64 {
        self.components[0].sup.max(self.components[1].sup)
    }
}

/// Central first and second differences at interior node `m` of a
/// possibly non-uniform mesh.
fn differences(x: &[f64], u: &[f64], m: usize) -> (f64, f64) {
    let (h1, h2) = (x[m] - x[m - 1], x[m + 1] - x[m]);
    let d1 = -h2 / (h1 * (h1 + h2)) * u[m - 1] + (h2 - h1) / (h1 * h2) * u[m] + h1 / (h2 * (h1 + h2)) * u[m + 1];
    let d2 = 2.0 * (u[m - 1] / (h1 * (h1 + h2)) - u[m] / (h1 * h2) + u[m + 1] / (h2 * (h1 + h2)));
    (d1, d2)
}

fn signed_pow(x: f64, e: f64) -> f64 {
    x.signum() * x.abs().powf(e)
}

pub fn residual_ode(spec: &ProblemSpec, prof: &ProfilePair) -> Result<ResidualReport, OracleError> {
    let nodes = prof.grid.nodes();
    if nodes.len() < 5 {
        return Err(OracleError::TooFewNodes(nodes.len()));
    }
    let (p, n1) = (spec.p, spec.dim() - 1.0);
    let component = |j: usize| -> Result<ComponentResidual, OracleError> {
        let u = prof.component(j);
        let (an, hn, fname) = (format!("a{}", j + 1), format!("h{}", j + 1), format!("f{}", j + 1));
        let mut values = Vec::new();
        let mut skipped = vec![nodes[0]];
        let mut l2 = 0.0;
        for m in 1..nodes.len() - 1 {
            let r = nodes[m];
            let (d1, d2) = differences(nodes, u, m);
            if p < 2.0 && d1 <= SINGULAR_DERIVATIVE {
                skipped.push(r);
                continue;
            }
            let a = spec.a[j].eval(&[r]).map_err(|e| NumericError::from_eval(&an, &[r], r, e))?;
            let h = spec.h[j].eval(&[r]).map_err(|e| NumericError::from_eval(&hn, &[r], r, e))?;
            let at = [prof.u1[m].max(0.0), prof.u2[m].max(0.0)];
            let f = spec.f[j].eval(&at).map_err(|e| NumericError::from_eval(&fname, &at, r, e))?;
            let lhs = (p - 1.0) * d1.abs().powf(p - 2.0) * d2 + (n1 / r + h) * signed_pow(d1, p - 1.0);
            let res = lhs - a * f;
            if !res.is_finite() {
                skipped.push(r);
                continue;
            }
            l2 += res * res * 0.5 * (nodes[m + 1] - nodes[m - 1]);
            values.push((r, res));
        }
        skipped.push(nodes[nodes.len() - 1]);
        let sup = values.iter().map(|(_, v)| v.abs()).fold(0.0, f64::max);
        Ok(ComponentResidual { values, sup, l2: l2.sqrt(), skipped })
    };
    let components = [component(0)?, component(1)?];
    let image = apply_s(spec, prof)?;
    let integral_residual = (0..nodes.len())
        .map(|m| (prof.u1[m] - image.u1[m]).abs().max((prof.u2[m] - image.u2[m]).abs()))
        .fold(0.0, f64::max);
    Ok(ResidualReport { components, integral_residual })
}

/// `w_j = t^{N-1} e^{H_j} (u_j')^{p-1}` with `u_j'` from central differences
/// (extrapolated from the previous node at the last one, zero at the origin).
pub fn flux_from_profile(spec: &ProblemSpec, prof: &ProfilePair) -> Result<[Vec<f64>; 2], NumericError> {
    let nodes = prof.grid.nodes();
    let n = nodes.len();
    let mut out = [vec![0.0; n], vec![0.0; n]];
    for (j, w) in out.iter_mut().enumerate() {
        let big_h = weight_h(spec, j, &prof.grid)?.values;
        let u = prof.component(j);
        for m in 1..n {
            let d1 = if m + 1 < n {
                differences(nodes, u, m).0
            } else {
                let (d1, d2) = differences(nodes, u, m - 1);
                d1 + (nodes[m] - nodes[m - 1]) * d2
            };
            w[m] = ((spec.dim() - 1.0) * nodes[m].ln() + big_h[m]).exp() * signed_pow(d1, spec.p - 1.0);
        }
    }
    Ok(out)
}

/// `∫_0^t s^{N-1} e^{H_j(s)} a_j(s) f_j(u_1(s), u_2(s)) ds` by trapezoid.
pub fn flux_integral(spec: &ProblemSpec, prof: &ProfilePair) -> Result<[Vec<f64>; 2], NumericError> {
    let nodes = prof.grid.nodes();
    let mut out = [Vec::new(), Vec::new()];
    for (j, w) in out.iter_mut().enumerate() {
        let big_h = weight_h(spec, j, &prof.grid)?.values;
        let mut g = Vec::with_capacity(nodes.len());
        for (m, &r) in nodes.iter().enumerate() {
            let a = spec.a[j].eval(&[r]).map_err(|e| NumericError::from_eval("a", &[r], r, e))?;
            let at = [prof.u1[m].max(0.0), prof.u2[m].max(0.0)];
            let f = spec.f[j].eval(&at).map_err(|e| NumericError::from_eval("f", &at, r, e))?;
            g.push(if r == 0.0 { 0.0 } else { ((spec.dim() - 1.0) * r.ln() + big_h[m]).exp() * a * f });
        }
        *w = cumulative_trapezoid(nodes, &g);
    }
    Ok(out)
}

/// Shortest round-trip decimal with exponent notation outside `[1e-5, 1e16)`.
pub fn fmt_num(x: f64) -> String {
    format!("{x:?}")
}

/// Writes `r,u1,u2,du1,du2` with shortest round-trip formatting.
pub fn write_profile_csv<W: Write>(out: W, prof: &ProfilePair, du: &[Vec<f64>; 2]) -> Result<(), OracleError> {
    let mut w = csv::Writer::from_writer(out);
    let err = |e: csv::Error| OracleError::Csv(e.to_string());
    w.write_record(["r", "u1", "u2", "du1", "du2"]).map_err(err)?;
    for (m, r) in prof.grid.nodes().iter().enumerate() {
        let row = [*r, prof.u1[m], prof.u2[m], du[0][m], du[1][m]];
        w.write_record(row.iter().map(|&v| fmt_num(v))).map_err(err)?;
    }
    w.flush().map_err(|e| OracleError::Csv(e.to_string()))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::ProblemText;
    use crate::solver::solve_fixed_point;

    fn spec(p: f64, n: u32, a: &str, h: &str, f: &str) -> ProblemSpec {
        ProblemSpec::from_text(&ProblemText::symmetric(p, n, 1.0, a, h, f)).unwrap()
    }

    fn sinh_profile(r: f64) -> f64 {
        let x = 2f64.sqrt() * r;
        if x == 0.0 {
            0.5
        } else {
            0.5 * x.sinh() / x
        }
    }

    #[test]
    fn constant_source_exact() {
        let sol = ivp_shoot_full(&spec(2.0, 3, "1", "0", "1"), 2.0, 200).unwrap();
        for (r, u) in sol.profile.grid.nodes().iter().zip(&sol.profile.u1) {
            assert!((u - (0.5 + r * r / 6.0)).abs() < 1e-12);
        }
        for (r, d) in sol.profile.grid.nodes().iter().zip(&sol.du[1]) {
            assert!((d - r / 3.0).abs() < 1e-12);
        }
    }

    #[test]
    fn fourth_order_on_sinh_case() {
        let s = spec(2.0, 3, "1", "0", "u+v");
        let err = |steps: usize| {
            let p = ivp_shoot(&s, 2.0, steps).unwrap();
            p.grid.nodes().iter().zip(&p.u1).map(|(&r, u)| (u - sinh_profile(r)).abs()).fold(0.0, f64::max)
        };
        for steps in [100, 200] {
            let ratio = err(steps) / err(2 * steps);
            assert!((12.0..=20.0).contains(&ratio), "ratio {ratio} at {steps} steps");
        }
    }

    #[test]
    fn too_few_steps() {
        assert_eq!(ivp_shoot(&spec(2.0, 3, "1", "0", "1"), 1.0, 50), Err(OracleError::TooFewSteps(50)));
    }

    #[test]
    fn cubic_blows_up() {
        match ivp_shoot(&spec(2.0, 3, "1", "0", "u*u*u"), 20.0, 20_000) {
            Err(OracleError::Overflow { radius, .. }) => assert!(radius > 1.0 && radius < 20.0, "{radius}"),
            other => panic!("{other:?}"),
        }
    }

    #[test]
    fn oracle_matches_fixed_point() {
        let s = spec(1.7, 4, "1/(1+r)", "0.5", "u + 0.5*v*v");
        let g = RadialGrid::graded(1.5, 1000, 2.0).unwrap();
        let fp = solve_fixed_point(&s, &g, 1e-12, 200).unwrap();
        let ivp = ivp_shoot(&s, 1.5, 4000).unwrap();
        let d = relative_sup_distance(&ivp, &fp.final_profile);
        assert!(d < 1e-4, "{d}");
    }

    #[test]
    fn oracle_flux_matches_integral() {
        let s = spec(2.5, 4, "1", "r", "u+v");
        let sol = ivp_shoot_full(&s, 1.0, 2000).unwrap();
        let w = flux_integral(&s, &sol.profile).unwrap();
        for (a, b) in sol.flux[0].iter().zip(&w[0]) {
            assert!((a - b).abs() < 1e-5 * (1.0 + b.abs()), "{a} vs {b}");
        }
    }

    #[test]
    fn residual_of_constant_profile_is_zero() {
        let s = spec(1.5, 3, "0", "0", "u+v");
        let g = RadialGrid::graded(2.0, 100, 2.0).unwrap();
        let r = residual_ode(&s, &ProfilePair::constant(&g, 0.5)).unwrap();
        assert_eq!(r.integral_residual, 0.0);
        // p < 2 and u' = 0 everywhere, so every node is skipped
        assert!(r.components[0].values.is_empty());
        let s = spec(2.0, 3, "0", "0", "u+v");
        let r = residual_ode(&s, &ProfilePair::constant(&g, 0.5)).unwrap();
        // only roundoff in the differences near the origin survives
        assert!(r.sup() < 1e-6, "{}", r.sup());
        assert_eq!(r.components[0].values.len(), 99);
    }

    #[test]
    fn residual_second_order_on_sinh_profile() {
        let s = spec(2.0, 3, "1", "0", "u+v");
        let sup = |m: usize| {
            let g = RadialGrid::uniform(2.0, m).unwrap();
            let u: Vec<f64> = g.nodes().iter().map(|&r| sinh_profile(r)).collect();
            residual_ode(&s, &ProfilePair::new(g, u.clone(), u)).unwrap().sup()
        };
        for m in [100, 200, 400] {
            let ratio = sup(m) / sup(2 * m);
            assert!((3.0..=5.0).contains(&ratio), "ratio {ratio} at M={m}");
        }
    }

    #[test]
    fn fixed_point_flux_matches_integral() {
        let s = spec(2.0, 3, "1", "1", "u+v");
        let g = RadialGrid::graded(2.0, 2000, 2.0).unwrap();
        let fp = solve_fixed_point(&s, &g, 1e-12, 200).unwrap();
        let wd = flux_from_profile(&s, &fp.final_profile).unwrap();
        let wi = flux_integral(&s, &fp.final_profile).unwrap();
        for j in 0..2 {
            let scale = wi[j].iter().fold(0.0f64, |a, b| a.max(b.abs()));
            let err = wd[j].iter().zip(&wi[j]).map(|(a, b)| (a - b).abs()).fold(0.0, f64::max);
            assert!(err < 1e-4 * scale, "component {j}: {err} vs scale {scale}");
        }
        let res = residual_ode(&s, &fp.final_profile).unwrap();
        assert!(res.integral_residual <= 10.0 * 1e-12 * (1.0 + fp.u_at_rmax[0]));
    }

    #[test]
    fn number_format() {
        assert_eq!(fmt_num(0.5), "0.5");
        assert_eq!(fmt_num(1.5e150), "1.5e150");
        assert_eq!(fmt_num(1.0 / 3.0).parse::<f64>().unwrap(), 1.0 / 3.0);
    }

    #[test]
    fn csv_round_trip() {
        let g = RadialGrid::graded(1.0, 10, 2.0).unwrap();
        let p = ProfilePair::new(g.clone(), g.nodes().iter().map(|r| 0.1 + r / 3.0).collect(), vec![0.5; 11]);
        let mut buf = Vec::new();
        write_profile_csv(&mut buf, &p, &[vec![1.0 / 3.0; 11], vec![0.0; 11]]).unwrap();
        let text = String::from_utf8(buf).unwrap();
        let mut lines = text.lines();
        assert_eq!(lines.next(), Some("r,u1,u2,du1,du2"));
        let second: Vec<f64> = lines.nth(1).unwrap().split(',').map(|x| x.parse().unwrap()).collect();
        assert_eq!(second, vec![g.nodes()[1], p.u1[1], 0.5, 1.0 / 3.0, 0.0]);
    }
}
