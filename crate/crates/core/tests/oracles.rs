//! Reference values checked against computations that do not share code with
//! the solver: quadrature, finite differences, vertex and grid enumeration.

use dcmip::dca::{run_scmip, scmip_step, stationarity_residual, SolverConfig};
use dcmip::expr::{ConvexExpr, SmoothingKernel};
use dcmip::io::{ExprDoc, ProblemDoc};
use dcmip::lp::{solve_lp, LpInstance, LpStatus};
use dcmip::minlp::{self, SubproblemSpec, SubproblemTolerances};
use dcmip::oracle::{
    check_no_gap, check_toland_singer_1d, convex_closure_1d, legendre_transform_1d, GridFunction,
};
use dcmip::problem::{FeasibleSet, MidcProblem};
use dcmip::{corpus, Error};
use serde_json::json;

fn expr(dim: usize, v: serde_json::Value) -> ConvexExpr {
    serde_json::from_value::<ExprDoc>(v)
        .unwrap()
        .build(dim, "e")
        .unwrap()
}

fn aff(c: f64, b: f64) -> serde_json::Value {
    json!({"kind": "affine", "coef": [c], "offset": b})
}

fn sq(c: f64) -> serde_json::Value {
    json!({"kind": "quadratic", "q": [[2.0 * c]]})
}

fn simpson(f: impl Fn(f64) -> f64, a: f64, b: f64, n: usize) -> f64 {
    let h = (b - a) / n as f64;
    let mut s = f(a) + f(b);
    for i in 1..n {
        let w = if i % 2 == 1 { 4.0 } else { 2.0 };
        s += w * f(a + i as f64 * h);
    }
    s * h / 3.0
}

fn logistic_density(s: f64) -> f64 {
    let e = (-s.abs()).exp();
    e / ((1.0 + e) * (1.0 + e))
}

fn convolution_smoothing(t: f64, mu: f64) -> f64 {
    simpson(
        |s| (t - mu * s).max(0.0) * logistic_density(s),
        -60.0,
        60.0,
        240_000,
    )
}

fn fd(f: impl Fn(f64) -> f64, x: f64, h: f64) -> f64 {
    (f(x + h) - f(x - h)) / (2.0 * h)
}

fn example1(which: &str) -> MidcProblem {
    corpus::load(which).unwrap().to_problem().unwrap()
}

#[test]
fn neural_kernel_matches_logistic_convolution() {
    let plus = expr(1, json!({"kind": "plus", "arg": aff(1.0, 0.0)}));
    let at0 = plus.smoothed_evaluate(&[0.0], 1.0).unwrap();
    assert!((at0 - std::f64::consts::LN_2).abs() < 1e-12);
    assert!((convolution_smoothing(0.0, 1.0) - at0).abs() < 1e-9);
    for &(t, mu) in &[(-2.0, 0.5), (0.3, 1.0), (1.5, 0.1), (-0.2, 3.0)] {
        let k = SmoothingKernel::Neural.plus(t, mu);
        assert!(
            (convolution_smoothing(t, mu) - k).abs() < 1e-8,
            "t={t} mu={mu}"
        );
    }
}

#[test]
fn kernel_kappa_is_sup_of_scaled_error() {
    let sup = (-40_000..=40_000)
        .map(|i| {
            let t = i as f64 * 1e-4;
            SmoothingKernel::Neural.plus(t, 1.0) - t.max(0.0)
        })
        .fold(f64::NEG_INFINITY, f64::max);
    assert!((sup - SmoothingKernel::Neural.kappa()).abs() < 1e-12);
    assert!((SmoothingKernel::Neural.kappa() - std::f64::consts::LN_2).abs() < 1e-15);
}

#[test]
fn expression_kappa_bounds_match_sup_grid() {
    let ln2 = std::f64::consts::LN_2;
    let single = expr(1, json!({"kind": "plus", "arg": aff(1.0, 0.0)}));
    let combo = expr(
        1,
        json!({"kind": "sum", "terms": [
            {"kind": "scale", "alpha": 3.0, "arg": {"kind": "plus", "arg": aff(1.0, 0.0)}},
            {"kind": "plus", "arg": aff(-1.0, 0.0)},
        ]}),
    );
    for (e, want) in [(single, ln2), (combo, 4.0 * ln2)] {
        assert!((e.kappa_bound() - want).abs() < 1e-12);
        let mu = 0.5;
        let sup = (-4000..=4000)
            .map(|i| {
                let x = i as f64 * 1e-3;
                (e.smoothed_evaluate(&[x], mu).unwrap() - e.evaluate(&[x]).unwrap()) / mu
            })
            .fold(f64::NEG_INFINITY, f64::max);
        assert!((sup - want).abs() < 1e-9, "sup {sup} want {want}");
    }
}

#[test]
fn smoothed_gradients_match_finite_differences() {
    let plus = expr(1, json!({"kind": "plus", "arg": aff(1.0, 0.0)}));
    let g = plus.smoothed_gradient(&[0.0], 1.0).unwrap()[0];
    assert_eq!(g, 0.5);
    assert!((fd(|x| plus.smoothed_evaluate(&[x], 1.0).unwrap(), 0.0, 1e-5) - g).abs() < 1e-9);

    let e = expr(
        1,
        json!({"kind": "sum", "terms": [
            {"kind": "max", "args": [aff(1.0, 0.0), {"kind": "constant", "value": 0.0}]},
            sq(1.0),
        ]}),
    );
    let g = e.smoothed_gradient(&[-10.0], 0.01).unwrap()[0];
    assert!((g + 20.0).abs() < 1e-12);
    assert!((fd(|x| e.smoothed_evaluate(&[x], 0.01).unwrap(), -10.0, 1e-6) - g).abs() < 1e-6);
}

#[test]
fn subgradients_satisfy_the_inequality_on_a_grid() {
    let plus = expr(1, json!({"kind": "plus", "arg": aff(1.0, 0.0)}));
    let mx = expr(
        1,
        json!({"kind": "max", "args": [aff(2.0, 0.0), aff(1.0, 1.0)]}),
    );
    for (e, x, want) in [(plus, 0.0, 0.0), (mx, 1.0, 2.0)] {
        let s = e.subgradient(&[x]).unwrap()[0];
        assert_eq!(s, want);
        let fx = e.evaluate(&[x]).unwrap();
        for i in -300..=300 {
            let z = i as f64 * 0.01;
            assert!(e.evaluate(&[z]).unwrap() >= fx + s * (z - x) - 1e-12);
        }
    }
}

#[test]
fn strong_convexity_moduli_match_sampling() {
    let e = expr(
        1,
        json!({"kind": "sum", "terms": [sq(1.0), {"kind": "plus", "arg": aff(1.0, 0.0)}]}),
    );
    assert_eq!(e.strong_convexity_modulus(), 2.0);
    let mut tightest = f64::INFINITY;
    for i in -20..=20 {
        for j in -20..=20 {
            let (x, z) = (i as f64 * 0.25, j as f64 * 0.25);
            if x == z {
                continue;
            }
            let m = 0.5 * (x + z);
            let lhs = 0.5 * e.evaluate(&[x]).unwrap() + 0.5 * e.evaluate(&[z]).unwrap()
                - e.evaluate(&[m]).unwrap();
            tightest = tightest.min(lhs / (0.125 * (x - z) * (x - z)));
        }
    }
    assert!((tightest - 2.0).abs() < 1e-9);

    let r = example1("example1_dc2").regularize(1.0).unwrap();
    assert_eq!(r.h().strong_convexity_modulus(), 3.0);
}

#[test]
fn penalty_adds_tau_times_violation() {
    let p = MidcProblem::new(
        expr(1, sq(1.0)),
        ConvexExpr::zero(1),
        vec![],
        FeasibleSet::boxed(vec![-5.0], vec![5.0]).unwrap(),
    )
    .unwrap();
    let g1 = expr(1, aff(1.0, 2.0));
    let g2 = expr(1, aff(1.0, 0.0));
    let q = p.penalize_dc_constraint(&g1, &g2, 5.0).unwrap();
    let x = [0.7];
    assert!((q.objective(&x).unwrap() - p.objective(&x).unwrap() - 10.0).abs() < 1e-12);
}

fn enumerate_lp_vertices(inst: &LpInstance) -> Vec<(f64, Vec<f64>)> {
    // 2-D only: every pair of tight constraints (rows and box faces).
    let mut lines: Vec<([f64; 2], f64)> = inst
        .rows
        .iter()
        .zip(&inst.rhs)
        .map(|(r, &b)| ([r[0], r[1]], b))
        .collect();
    for j in 0..2 {
        let mut e = [0.0; 2];
        e[j] = 1.0;
        lines.push((e, inst.upper[j]));
        lines.push(([-e[0], -e[1]], -inst.lower[j]));
    }
    let mut out = Vec::new();
    for a in 0..lines.len() {
        for b in a + 1..lines.len() {
            let ((p, r), (q, s)) = (lines[a], lines[b]);
            let det = p[0] * q[1] - p[1] * q[0];
            if det.abs() < 1e-12 {
                continue;
            }
            let x = [(r * q[1] - p[1] * s) / det, (p[0] * s - r * q[0]) / det];
            if lines
                .iter()
                .all(|(c, d)| c[0] * x[0] + c[1] * x[1] <= d + 1e-9)
            {
                out.push((inst.cost[0] * x[0] + inst.cost[1] * x[1], x.to_vec()));
            }
        }
    }
    out
}

#[test]
fn lp_optimum_matches_vertex_enumeration() {
    let inst = LpInstance::new(
        vec![-1.0, -1.0],
        vec![vec![1.0, 1.0]],
        vec![1.0],
        vec![0.0; 2],
        vec![f64::INFINITY; 2],
    )
    .unwrap();
    let r = solve_lp(&inst, None).unwrap();
    assert_eq!(r.status, LpStatus::Optimal);
    assert_eq!(r.objective, -1.0);
    assert_eq!(r.x, vec![1.0, 0.0]);

    use rand::{Rng, SeedableRng};
    let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(3);
    for _ in 0..200 {
        let m = rng.gen_range(0..5);
        let rows: Vec<Vec<f64>> = (0..m)
            .map(|_| vec![rng.gen_range(-2.0..2.0), rng.gen_range(-2.0..2.0)])
            .collect();
        let rhs: Vec<f64> = (0..m).map(|_| rng.gen_range(0.0..3.0)).collect();
        let cost = vec![rng.gen_range(-3.0..3.0), rng.gen_range(-3.0..3.0)];
        let inst = LpInstance::new(cost, rows, rhs, vec![-2.0; 2], vec![3.0; 2]).unwrap();
        let best = enumerate_lp_vertices(&inst)
            .into_iter()
            .map(|v| v.0)
            .fold(f64::INFINITY, f64::min);
        let r = solve_lp(&inst, None).unwrap();
        assert_eq!(r.status, LpStatus::Optimal);
        assert!(
            (r.objective - best).abs() < 1e-9,
            "{} vs {}",
            r.objective,
            best
        );
    }
}

fn spec(g: ConvexExpr, lo: Vec<f64>, hi: Vec<f64>, integers: Vec<usize>) -> SubproblemSpec {
    let s = FeasibleSet::boxed(lo, hi).unwrap();
    SubproblemSpec::new(g, 0.0, s, integers, SubproblemTolerances::default()).unwrap()
}

#[test]
fn subproblem_reference_values() {
    let r = minlp::solve(&spec(
        expr(
            1,
            json!({"kind": "sum", "terms": [sq(1.0), aff(-1.0, 0.0)]}),
        ),
        vec![-1.0],
        vec![1.0],
        vec![],
    ))
    .unwrap();
    assert!((r.x[0] - 0.5).abs() < 1e-4);
    assert!((r.objective + 0.25).abs() < 1e-8);

    let r = minlp::solve(&spec(
        expr(1, json!({"kind": "sum", "terms": [sq(1.0), aff(1.0, 0.0)]})),
        vec![-1.0],
        vec![1.0],
        vec![0],
    ))
    .unwrap();
    let values: Vec<f64> = [-1.0, 0.0, 1.0f64].iter().map(|x| x * x + x).collect();
    assert_eq!(values, vec![0.0, 0.0, 2.0]);
    assert_eq!(r.x, vec![-1.0]);
    assert_eq!(r.objective, 0.0);

    let g = expr(
        2,
        json!({"kind": "sum", "terms": [
            {"kind": "quadratic", "q": [[2.0, 0.0], [0.0, 2.0]]},
            {"kind": "affine", "coef": [0.0, -0.8], "offset": 0.16},
        ]}),
    );
    let r = minlp::solve(&spec(g, vec![-1.0; 2], vec![1.0; 2], vec![0])).unwrap();
    assert_eq!(r.x[0], 0.0);
    assert!((r.x[1] - 0.4).abs() < 1e-4);
}

#[test]
fn example1_dca_steps_by_hand() {
    let tol = SubproblemTolerances::default();
    let p = example1("example1_dc2");
    let s = scmip_step(&p, &[0.0], [0.0; 2], &tol).unwrap();
    assert_eq!((s.y[0], s.x_next[0]), (0.0, -1.0));
    let s = scmip_step(&p, &[-1.0], [0.0; 2], &tol).unwrap();
    assert_eq!((s.y[0], s.x_next[0]), (-2.0, -1.0));

    // From 0.4: x² + x − 0.8x on {−1, 0, 1} is {0.8, 0, 1.2}.
    let s = scmip_step(&p, &[0.4], [0.0; 2], &tol).unwrap();
    assert_eq!(s.x_next, vec![0.0]);
    let mut cfg = SolverConfig::scmip();
    cfg.x0 = Some(vec![0.4]);
    let out = run_scmip(&p, &cfg).unwrap();
    let path: Vec<f64> = out.trace.records.iter().map(|r| r.x[0]).collect();
    assert_eq!(&path[..3], &[0.4, 0.0, -1.0]);
    assert_eq!(out.objective, -1.0);

    assert_eq!(stationarity_residual(&p, &[-1.0], &tol).unwrap(), 0.0);
    assert_eq!(stationarity_residual(&p, &[0.5], &tol).unwrap(), 0.5);
}

#[test]
fn smoothed_mixed_instance_agrees_with_grid_search() {
    let doc = ProblemDoc::parse(
        &json!({
            "dimension": 2,
            "integer": [0],
            "lower": [-2, -2],
            "upper": [2, 2],
            "g": {"kind": "sum", "terms": [
                {"kind": "quadratic", "q": [[2, 0], [0, 2]]},
                {"kind": "abs", "arg": {"kind": "affine", "coef": [1, 0], "offset": -0.5}},
            ]},
            "h": {"kind": "quadratic", "q": [[2, 0], [0, 0]]},
        })
        .to_string(),
    )
    .unwrap();
    let p = doc.to_problem().unwrap();
    // x₁ ∈ {−2..2}: g − h = |x₁ − 0.5| + x₂², minimized at x₁ ∈ {0, 1}, x₂ = 0.
    let mut best = f64::INFINITY;
    for z in -2..=2 {
        for j in -400..=400 {
            let x = [z as f64, j as f64 * 0.005];
            best = best.min(p.objective(&x).unwrap());
        }
    }
    assert!((best - 0.5).abs() < 1e-12);
    let tol = SubproblemTolerances::default();
    let mut cfg = doc.solver_config(dcmip::Mode::Smoothing);
    for (x0, reaches_best) in [
        (vec![-2.0, -2.0], false),
        (vec![1.0, 1.0], true),
        (vec![0.0, 0.3], true),
    ] {
        cfg.x0 = Some(x0.clone());
        let out = dcmip::run_smoothing_scmip(&p, &cfg).unwrap();
        let recs = &out.trace.records;
        assert_eq!(out.status, dcmip::Status::Converged);
        assert!(recs.last().unwrap().merit <= recs[0].merit);
        assert!(out.trace.descent_violations().is_empty());
        assert!(stationarity_residual(&out.problem, &out.x, &tol).unwrap() <= cfg.eps_x);
        assert!(out.objective >= best - 1e-12);
        if reaches_best {
            assert!(
                out.objective - best < 1e-6,
                "from {x0:?}: {}",
                out.objective
            );
        }
    }
}

#[test]
fn closure_and_conjugates() {
    let phi = GridFunction::new(vec![-1.0, 0.0, 1.0], vec![0.0, 5.0, 0.0]).unwrap();
    let c = convex_closure_1d(&phi).unwrap();
    assert_eq!(
        c.vertices().collect::<Vec<_>>(),
        vec![(-1.0, 0.0), (1.0, 0.0)]
    );
    assert_eq!(c.evaluate(0.0), 0.0);

    let step = 1e-3;
    let half_sq = GridFunction::uniform(-4.0, 4.0, 8000, |x| 0.5 * x * x).unwrap();
    let ys: Vec<f64> = (-300..=300).map(|i| i as f64 * 0.01).collect();
    let star = legendre_transform_1d(&half_sq, &ys).unwrap();
    for (&y, &v) in ys.iter().zip(star.values()) {
        assert!((v - 0.5 * y * y).abs() <= step * step);
    }

    let indicator = GridFunction::uniform(-1.0, 1.0, 2000, |_| 0.0).unwrap();
    let star = legendre_transform_1d(&indicator, &ys).unwrap();
    for (&y, &v) in ys.iter().zip(star.values()) {
        assert!((v - y.abs()).abs() < 1e-12);
    }
}

#[test]
fn no_gap_reference_instances() {
    let r = check_no_gap(&example1("example1_dc2"), 1e-3).unwrap();
    assert!((r.v_discrete + 1.0).abs() < 1e-12);
    assert!((r.v_relax + 1.0).abs() < 1e-6);

    let p = MidcProblem::new(
        expr(
            1,
            json!({"kind": "sum", "terms": [sq(1.0), aff(-1.0, 0.25)]}),
        ),
        ConvexExpr::zero(1),
        vec![0],
        FeasibleSet::boxed(vec![0.0], vec![2.0]).unwrap(),
    )
    .unwrap();
    let r = check_no_gap(&p, 1e-3).unwrap();
    assert!((r.v_discrete - 0.25).abs() < 1e-12);
    assert!(r.v_naive.abs() < 1e-6);
    assert!((r.v_relax - 0.25).abs() < 1e-6);
    assert!(r.passed);
}

#[test]
fn toland_singer_reference_instances() {
    let grid = |f: &dyn Fn(f64) -> f64| GridFunction::uniform(-5.0, 5.0, 10_000, f).unwrap();
    let r = check_toland_singer_1d(&grid(&|x| x * x), &grid(&|x| 0.5 * x * x), &[]).unwrap();
    assert!(r.primal.abs() < 1e-12 && r.dual.abs() < 1e-6);

    let r = check_toland_singer_1d(&grid(&|x: f64| x.abs()), &grid(&|x| 0.5 * x * x), &[]).unwrap();
    let direct = (-10_000..=10_000)
        .map(|i| {
            let x = i as f64 * 5e-4;
            x.abs() - 0.5 * x * x
        })
        .fold(f64::INFINITY, f64::min);
    assert!((r.primal - direct).abs() < 1e-9);
    assert!(r.gap <= 1e-4);
}

#[test]
fn indefinite_quadratic_is_rejected_with_its_path() {
    let doc = ProblemDoc::parse(
        &json!({
            "dimension": 2,
            "integer": [],
            "lower": [-1, -1],
            "upper": [1, 1],
            "g": {"kind": "sum", "terms": [{"kind": "affine", "coef": [0, 0], "offset": 0}, {"kind": "quadratic", "q": [[1, 0], [0, -1]]}]},
            "h": {"kind": "constant", "value": 0},
        })
        .to_string(),
    )
    .unwrap();
    match doc.to_problem() {
        Err(Error::NotConvex(msg)) => assert!(msg.contains("g.terms[1]"), "{msg}"),
        other => panic!("expected a convexity error, got {other:?}"),
    }
}
