//! Acceptance suite. Every criterion prints one PASS/FAIL line; the test
//! fails if any criterion fails. Run with
//! `cargo test --release --test acceptance -- --nocapture` to see the lines.

use std::time::{Duration, Instant};

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use kosolve::cli::{sweep_rows, RunConfig};
use kosolve::conditions::{
    build_f, check_bounded5, check_divergence_fn, check_ko, check_large12, check_lzz, check_necessary13,
    check_nonexistence5b, check_weight_monotone, i_inverse, i_of, Horizons, Status,
};
use kosolve::exec::Execution;
use kosolve::model::{ProblemSpec, ProblemText};
use kosolve::operator::{IntegralOperator, ProfilePair};
use kosolve::oracle::{ivp_shoot, relative_sup_distance, residual_ode};
use kosolve::quadrature::{cumulative_trapezoid, NumericError, RadialGrid};
use kosolve::solver::{a_priori_bound, solve_fixed_point, Iterates};

type Check = Result<String, String>;

macro_rules! ensure {
    ($cond:expr, $($msg:tt)+) => {
        if !$cond {
            return Err(format!($($msg)+));
        }
    };
}

fn spec(p: f64, n: u32, a: &str, h: &str, f: &str) -> ProblemSpec {
    ProblemSpec::from_text(&ProblemText::symmetric(p, n, 1.0, a, h, f)).unwrap()
}

fn within(start: Instant, limit: Duration, what: &str) -> Result<(), String> {
    let took = start.elapsed();
    if took > limit {
        return Err(format!("{what} took {took:?}, limit {limit:?}"));
    }
    Ok(())
}

fn sinh_profile(r: f64) -> f64 {
    let x = 2f64.sqrt() * r;
    if x == 0.0 {
        0.5
    } else {
        0.5 * x.sinh() / x
    }
}

fn sup_rel_error(prof: &ProfilePair, exact: impl Fn(f64) -> f64) -> f64 {
    let nodes = prof.grid.nodes();
    (0..2)
        .flat_map(|j| {
            let u = prof.component(j);
            nodes.iter().zip(u).map(|(&r, v)| ((v - exact(r)) / exact(r)).abs()).collect::<Vec<_>>()
        })
        .fold(0.0, f64::max)
}

fn c1_constant_source() -> Check {
    let mut worst: f64 = 0.0;
    for (p, n) in [(2.0, 3u32), (3.0, 4), (1.5, 3)] {
        let start = Instant::now();
        let s = spec(p, n, "1", "0", "1");
        let g = RadialGrid::graded(2.0, 2000, 2.0).unwrap();
        let r = solve_fixed_point(&s, &g, 1e-10, 200).map_err(|e| e.to_string())?;
        let exact =
            |r: f64| 0.5 + (1.0 / n as f64).powf(1.0 / (p - 1.0)) * ((p - 1.0) / p) * r.powf(p / (p - 1.0));
        let err = sup_rel_error(&r.final_profile, exact);
        ensure!(err <= 1e-5, "(p, N) = ({p}, {n}): sup relative error {err:e}");
        within(start, Duration::from_secs(5), &format!("(p, N) = ({p}, {n})"))?;
        worst = worst.max(err);
    }
    Ok(format!("worst sup relative error {worst:.2e}"))
}

fn c2_oracle_equivalence() -> Check {
    let start = Instant::now();
    let s = spec(2.0, 3, "1", "0", "u+v");
    let g = RadialGrid::graded(2.0, 2000, 2.0).unwrap();
    let fp = solve_fixed_point(&s, &g, 1e-10, 200).map_err(|e| e.to_string())?;
    let ivp = ivp_shoot(&s, 2.0, 100_000).map_err(|e| e.to_string())?;
    let d = relative_sup_distance(&ivp, &fp.final_profile);
    ensure!(d <= 1e-4, "relative sup distance {d:e}");
    within(start, Duration::from_secs(10), "oracle comparison")?;
    Ok(format!("relative sup distance {d:.2e}"))
}

fn random_spec(rng: &mut ChaCha8Rng) -> (ProblemSpec, f64) {
    let n: u32 = rng.gen_range(3..=5);
    let p = rng.gen_range(1.2..(n as f64 - 1.0).min(4.0));
    let b = rng.gen_range(0.5..2.0);
    let coeff = |rng: &mut ChaCha8Rng| format!("{:.3}*(1+r)^({:.3})", rng.gen_range(0.2..2.0), rng.gen_range(-3.0..1.0));
    let a = [coeff(rng), coeff(rng)];
    let h = [0, 1].map(|_| format!("{:.3}*(1+r)^({:.3})", rng.gen_range(0.0..2.0), rng.gen_range(-1.0..1.0)));
    let f = [0, 1].map(|_| {
        format!(
            "{:.3}*u^{:.3} + {:.3}*v^{:.3} + {:.3}",
            rng.gen_range(0.0..1.0),
            rng.gen_range(0.0..2.0),
            rng.gen_range(0.0..1.0),
            rng.gen_range(0.0..2.0),
            rng.gen_range(0.0..0.5)
        )
    });
    let text = ProblemText {
        p,
        n,
        b,
        a1: a[0].clone(),
        a2: a[1].clone(),
        h1: h[0].clone(),
        h2: h[1].clone(),
        f1: f[0].clone(),
        f2: f[1].clone(),
    };
    (ProblemSpec::from_text(&text).unwrap(), rng.gen_range(0.5..2.0))
}

fn c3_monotone_iterates() -> Check {
    let mut rng = ChaCha8Rng::seed_from_u64(20_241_019);
    let mut iterations = 0;
    for case in 0..10 {
        let (s, r_max) = random_spec(&mut rng);
        s.ensure_valid().map_err(|e| format!("case {case}: {e}"))?;
        let g = RadialGrid::graded(r_max, 300, 2.0).unwrap();
        let op = IntegralOperator::new(&s, &g, Execution::default()).map_err(|e| e.to_string())?;
        let b2 = s.central_value();
        let mut prev = ProfilePair::constant(&g, b2);
        for (k, it) in Iterates::new(&op).take(60).enumerate() {
            let cur = match it {
                Ok(c) => c,
                Err(NumericError::Overflow { .. }) => break,
                Err(e) => return Err(format!("case {case}: {e}")),
            };
            iterations += 1;
            for j in 0..2 {
                let (u, v) = (cur.component(j), prev.component(j));
                ensure!(u[0] == b2, "case {case} iterate {k}: u_{}(0) = {} != {b2}", j + 1, u[0]);
                ensure!(
                    u.iter().zip(v).all(|(a, b)| *a >= *b - 1e-12 * (1.0 + b.abs())),
                    "case {case} iterate {k}: not above the previous iterate"
                );
                ensure!(u.windows(2).all(|w| w[1] >= w[0]), "case {case} iterate {k}: decreasing in r");
            }
            let done = cur.mixed_change(&prev) <= 1e-12;
            prev = cur;
            if done {
                break;
            }
        }
    }
    Ok(format!("10 random specs, {iterations} iterates checked"))
}

fn c4_bound_guard() -> Check {
    let h = Horizons::default();
    let r_max = 2.0;
    let mut guarded = Vec::new();
    for f in ["u", "u+v", "1", "sqrt(u)+v", "u*log(exp(1)+v)^2", "3*u*u", "u*u*u"] {
        let s = spec(2.0, 3, "1", "0", f);
        let ko = check_ko(&s, s.p, &h).map_err(|e| e.to_string())?;
        if ko.status != Status::Divergent {
            continue;
        }
        let bound = a_priori_bound(&s, r_max).map_err(|e| format!("f = {f}: {e}"))?;
        let g = RadialGrid::graded(r_max, 1000, 2.0).unwrap();
        let r = solve_fixed_point(&s, &g, 1e-10, 200).map_err(|e| format!("f = {f}: {e}"))?;
        ensure!(
            r.sum_at_rmax_history.iter().all(|&v| v <= bound * 1.01),
            "f = {f}: iterate exceeds bound {bound}"
        );
        guarded.push(f);
    }
    ensure!(guarded.len() >= 3, "only {} catalog specs had a divergent KO integral", guarded.len());
    let b = a_priori_bound(&spec(2.0, 3, "1", "0", "u"), r_max).map_err(|e| e.to_string())?;
    let exact = (8f64.sqrt() * r_max).exp();
    ensure!((b / exact - 1.0).abs() <= 1e-2, "analytic bound {b} vs {exact}");
    Ok(format!("{} guarded specs; analytic bound off by {:.2e}", guarded.len(), (b / exact - 1.0).abs()))
}

fn c5_condition_catalog() -> Check {
    let start = Instant::now();
    let d = Horizons::default();
    let mut n = 0;
    let mut expect = |what: &str, got: Status, want: Status| -> Result<(), String> {
        n += 1;
        ensure!(got == want, "{what}: got {got:?}, want {want:?}");
        Ok(())
    };
    use Status::{Convergent as C, Divergent as D, Inconclusive as I};
    let fit = |g: fn(f64) -> f64, lower: f64, h: &Horizons| check_divergence_fn(g, lower, h).unwrap().status;
    expect("1/t", fit(|t| 1.0 / t, 1.0, &d), D)?;
    expect("1/t^2", fit(|t| 1.0 / (t * t), 1.0, &d), C)?;
    expect("1/(t ln t), default horizons", fit(|t| 1.0 / (t * t.ln()), std::f64::consts::E, &d), I)?;

    let ko = |f: &str, h: &Horizons| check_ko(&spec(2.0, 3, "1", "0", f), 2.0, h).unwrap().status;
    let lzz = |f: &str, h: &Horizons| check_lzz(&spec(2.0, 3, "1", "0", f), h).unwrap().status;
    expect("KO f=t", ko("u", &d), D)?;
    expect("KO f=3t^2", ko("3*u*u", &d), C)?;
    expect("LZZ f=s", lzz("u", &d), D)?;
    expect("LZZ f=s^2", lzz("u*u", &d), C)?;
    let wide = Horizons::decades(1, 8);
    expect("KO f=t ln(e+t)^2 to 1e8", ko("u*log(exp(1)+v)^2", &wide), D)?;
    expect("LZZ f=s ln(e+s)^2 to 1e8", lzz("u*log(exp(1)+v)^2", &wide), C)?;

    let ws = |p: f64, a: &str, h: &str| spec(p, 3, a, h, "u+v");
    let b5 = |s: ProblemSpec, eps: &[f64]| check_bounded5(&s, eps, &d).unwrap();
    expect("Bounded5 a=(1+t)^-4 eps=0.5", b5(ws(2.0, "(1+r)^(-4)", "0"), &[0.5]).verdicts[0].status, C)?;
    for v in b5(ws(2.0, "1", "0"), &[0.1, 0.5, 1.0]).verdicts {
        expect("Bounded5 a=1", v.status, D)?;
    }
    expect("Bounded5 h=1 a=e^-4t eps=0.5", b5(ws(2.0, "exp(-4*r)", "1"), &[0.5]).verdicts[0].status, C)?;

    for n3 in [3, 5] {
        for v in check_large12(&spec(2.0, n3, "1", "0", "u+v"), &d).unwrap() {
            expect(&format!("Large12 a=1 N={n3}"), v.status, D)?;
        }
    }
    for v in check_large12(&ws(2.0, "(1+r)^(-4)", "0"), &d).unwrap() {
        expect("Large12 a=(1+t)^-4", v.status, C)?;
    }
    for v in check_large12(&ws(2.0, "1", "1"), &Horizons::decades(1, 3)).unwrap() {
        expect("Large12 h=1 a=1 to 1e3", v.status, D)?;
    }

    for (a, h, want) in [("1", "0", D), ("(1+r)^(-4)", "0", C), ("exp(2*r)", "1", D)] {
        for v in check_nonexistence5b(&ws(2.0, a, h), &d).unwrap() {
            expect(&format!("NoBounded5b a={a} h={h}"), v.status, want)?;
        }
    }

    let n13 = check_necessary13(&ws(2.0, "1", "0"), &[0.1, 0.5, 1.0], &d).unwrap();
    for v in &n13.verdicts {
        expect("Necessary13 a=1", v.status, D)?;
    }
    ensure!(n13.aggregate, "Necessary13 aggregate for a=1");
    let n13 = check_necessary13(&ws(2.0, "(1+r)^(-4)", "0"), &[0.5], &d).unwrap();
    expect("Necessary13 a=(1+t)^-4 eps=0.5", n13.verdicts[0].status, C)?;
    ensure!(!n13.aggregate, "Necessary13 aggregate for a=(1+t)^-4");

    let g = RadialGrid::graded(100.0, 2000, 2.0).unwrap();
    let wm = |a: &str| check_weight_monotone(&ws(2.0, a, "0"), 1.0, &g).unwrap();
    ensure!(wm("1").holds && wm("(1+r)^(-4)").holds, "weight monotonicity should hold");
    let v = wm("exp(-r*r)");
    ensure!(!v.holds && v.first_violation.is_some(), "weight exp(-r^2) should decrease");

    let t = build_f(&spec(2.0, 3, "1", "0", "u"), 100.0, 2000).unwrap();
    ensure!(t.s.iter().zip(&t.big_f).all(|(s, f)| (f - s * s).abs() <= 1e-12 * (1.0 + s * s)), "F(s) = s^2");
    let t1 = build_f(&spec(2.0, 3, "1", "0", "1"), 100.0, 200).unwrap();
    ensure!(t1.s.iter().zip(&t1.big_f).all(|(s, f)| (f - 2.0 * s).abs() <= 1e-12 * (1.0 + s)), "F(s) = 2s");
    ensure!(i_of(&t, 1.0, 2.0).unwrap() == 0.0, "I(b) = 0");
    ensure!((i_of(&t, std::f64::consts::E, 2.0).unwrap() - 1.0).abs() < 1e-5, "I(e) = 1");
    ensure!(i_inverse(&t, 0.0, 2.0).unwrap() == 1.0, "I^-1(0) = b");
    ensure!((i_inverse(&t, 1.0, 2.0).unwrap() - std::f64::consts::E).abs() < 1e-5, "I^-1(1) = e");
    let t3 = build_f(&spec(2.0, 3, "1", "0", "3*u*u"), 1e4, 400).unwrap();
    let i3 = i_of(&t3, 1e4, 2.0).unwrap();
    ensure!((i3 - 2f64.sqrt() * 0.99).abs() < 1e-4, "I for F = 2s^3: {i3}");
    let mut rng = ChaCha8Rng::seed_from_u64(7);
    for _ in 0..100 {
        let r = rng.gen_range(1.0..90.0);
        let back = i_inverse(&t, i_of(&t, r, 2.0).unwrap(), 2.0).unwrap();
        let k = t.s.partition_point(|&x| x <= r).min(t.s.len() - 1);
        let cell = t.s[k] - t.s[k - 1];
        ensure!((back - r).abs() <= 2.0 * cell, "round trip at {r}: {back}");
    }
    within(start, Duration::from_secs(30), "condition catalog")?;
    Ok(format!("{n} verdicts reproduced, plus F, I and I^-1 examples"))
}

fn c6_lzz_implies_ko() -> Check {
    let h = Horizons::decades(1, 8);
    let catalog = ["u", "u+v", "1", "u*u", "3*u*u", "u*u*u", "sqrt(u)", "u^1.5", "u*log(exp(1)+v)^2", "u*log(1+v)"];
    let mut witness = false;
    for f in catalog {
        let s = spec(2.0, 3, "1", "0", f);
        let ko = check_ko(&s, 2.0, &h).map_err(|e| e.to_string())?.status;
        let lzz = check_lzz(&s, &h).map_err(|e| e.to_string())?.status;
        ensure!(!(lzz == Status::Divergent && ko == Status::Convergent), "f = {f}: LZZ divergent but KO convergent");
        if f == "u*log(exp(1)+v)^2" {
            witness = ko == Status::Divergent && lzz == Status::Convergent;
        }
    }
    ensure!(witness, "s ln(e+s)^2 does not separate KO from LZZ");
    Ok(format!("{} nonlinearities; s ln(e+s)^2 separates KO from LZZ", catalog.len()))
}

fn ratios(errors: &[f64]) -> Vec<f64> {
    errors.windows(2).map(|w| w[0] / w[1]).collect()
}

fn c7_order_checks() -> Check {
    let in_band = |rs: &[f64], lo: f64, hi: f64| rs.iter().all(|r| (lo..=hi).contains(r));

    let trap: Vec<f64> = [100, 200, 400]
        .iter()
        .map(|&m| {
            let g = RadialGrid::uniform(2.0, m).unwrap();
            let vals: Vec<f64> = g.nodes().iter().map(|r| r.cos()).collect();
            let cum = cumulative_trapezoid(g.nodes(), &vals);
            g.nodes().iter().zip(&cum).map(|(r, c)| (c - r.sin()).abs()).fold(0.0, f64::max)
        })
        .collect();
    let trap = ratios(&trap);
    ensure!(in_band(&trap, 3.0, 5.0), "trapezoid ratios {trap:?}");

    let s = spec(2.0, 3, "1", "0", "u+v");
    let res: Vec<f64> = [100, 200, 400]
        .iter()
        .map(|&m| {
            let g = RadialGrid::uniform(2.0, m).unwrap();
            let u: Vec<f64> = g.nodes().iter().map(|&r| sinh_profile(r)).collect();
            residual_ode(&s, &ProfilePair::new(g, u.clone(), u)).unwrap().sup()
        })
        .collect();
    let res = ratios(&res);
    ensure!(in_band(&res, 3.0, 5.0), "difference residual ratios {res:?}");

    let fp: Vec<f64> = [250, 500, 1000]
        .iter()
        .map(|&m| {
            let g = RadialGrid::graded(2.0, m, 2.0).unwrap();
            sup_rel_error(&solve_fixed_point(&s, &g, 1e-13, 200).unwrap().final_profile, sinh_profile)
        })
        .collect();
    let fp = ratios(&fp);
    ensure!(in_band(&fp, 3.0, 5.0), "fixed-point grid ratios {fp:?}");

    let rk: Vec<f64> = [100, 200, 400]
        .iter()
        .map(|&n| sup_rel_error(&ivp_shoot(&s, 2.0, n).unwrap(), sinh_profile))
        .collect();
    let rk = ratios(&rk);
    ensure!(in_band(&rk, 12.0, 20.0), "oracle step-halving ratios {rk:?}");
    let f = |v: &[f64]| v.iter().map(|x| format!("{x:.2}")).collect::<Vec<_>>().join("/");
    Ok(format!("trapezoid {}, residual {}, fixed point {}, RK4 {}", f(&trap), f(&res), f(&fp), f(&rk)))
}

fn c8_regime_flip() -> Check {
    let start = Instant::now();
    let cfg = RunConfig::from_json(
        r#"{"problem": {"p": 2, "N": 3, "b": 1, "a1": "(1+r)^(-{sigma})", "a2": "(1+r)^(-{sigma})",
                        "f1": "u+v", "f2": "u+v"},
            "grid": {"R_max": 100000, "M": 4000},
            "sweep": {"axes": [{"parameter": "sigma", "values": [0, 1, 2, 3, 4, 5]}]}}"#,
    )
    .map_err(|e| e.to_string())?;
    let rows = sweep_rows(&cfg).map_err(|e| e.to_string())?;
    ensure!(rows.len() == 6, "{} sweep rows", rows.len());
    let (first, c0) = &rows[0];
    ensure!(
        first.large12.iter().all(|&s| s == Status::Divergent),
        "σ = 0: Large12 {:?}",
        first.large12
    );
    ensure!(
        first.nonexistence5b.iter().all(|&s| s == Status::Divergent),
        "σ = 0: NoBounded5b {:?}",
        first.nonexistence5b
    );
    ensure!(!c0.bounded5.aggregate, "σ = 0 should not look bounded");
    for (row, _) in &rows[4..] {
        ensure!(row.bounded5_some, "σ = {}: Bounded5 not convergent", row.parameters[0].1);
    }
    for (row, _) in &rows {
        if row.verdict == "large" || row.verdict == "bounded" {
            ensure!(
                row.empirical == row.verdict,
                "σ = {}: verdict {} but plateau label {} (ratio {})",
                row.parameters[0].1,
                row.verdict,
                row.empirical,
                row.plateau_ratio
            );
        }
    }
    within(start, Duration::from_secs(120), "sweep")?;
    let labels: Vec<&str> = rows.iter().map(|(r, _)| r.empirical.as_str()).collect();
    Ok(format!("labels by σ: {}", labels.join(", ")))
}

fn c9_mutual_exclusion() -> Check {
    let h = Horizons::default();
    let eps = [0.1, 0.5, 1.0, 2.0];
    let mut compared = 0;
    for a in ["1", "(1+r)^(-1)", "(1+r)^(-2)", "(1+r)^(-3)", "(1+r)^(-4)", "exp(-r)", "exp(-4*r)", "r*r"] {
        for hh in ["0", "1", "1/(1+r)"] {
            for p in [1.5, 2.0] {
                let s = spec(p, 3, a, hh, "u+v");
                let b5 = check_bounded5(&s, &eps, &h).map_err(|e| e.to_string())?;
                let n13 = check_necessary13(&s, &eps, &h).map_err(|e| e.to_string())?;
                for (x, y) in b5.verdicts.iter().zip(&n13.verdicts) {
                    if x.status == Status::Inconclusive || y.status == Status::Inconclusive {
                        continue;
                    }
                    compared += 1;
                    ensure!(
                        !(x.status == Status::Convergent && y.status == Status::Divergent),
                        "a = {a}, h = {hh}, p = {p}, ε = {:?}: Bounded5 convergent and Necessary13 divergent",
                        x.epsilon
                    );
                }
            }
        }
    }
    ensure!(compared > 0, "no decided pairs");
    Ok(format!("{compared} decided (spec, ε) pairs"))
}

#[test]
fn acceptance() {
    let criteria: [(&str, fn() -> Check); 9] = [
        ("closed-form constant source", c1_constant_source),
        ("oracle equivalence", c2_oracle_equivalence),
        ("monotone iterates", c3_monotone_iterates),
        ("a priori bound guard", c4_bound_guard),
        ("condition catalog", c5_condition_catalog),
        ("LZZ implies KO", c6_lzz_implies_ko),
        ("quadrature and oracle order", c7_order_checks),
        ("regime flip", c8_regime_flip),
        ("mutual exclusion", c9_mutual_exclusion),
    ];
    let mut failed = Vec::new();
    for (k, (name, check)) in criteria.iter().enumerate() {
        let start = Instant::now();
        let outcome = check();
        let took = start.elapsed().as_secs_f64();
        match outcome {
            Ok(detail) => println!("PASS {}. {name}: {detail} [{took:.2}s]", k + 1),
            Err(why) => {
                println!("FAIL {}. {name}: {why} [{took:.2}s]", k + 1);
                failed.push(k + 1);
            }
        }
    }
    assert!(failed.is_empty(), "failed criteria: {failed:?}");
}
