//! Seeded randomized property suites.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use serde_json::{json, Value};

use crate::corpus;
use crate::dca::{run_scmip, run_smoothing_scmip, SolverConfig, Status};
use crate::error::{Error, Result};
use crate::io::{ExprDoc, ProblemDoc};
use crate::minlp::{self, SubproblemSpec, SubproblemTolerances};
use crate::oracle::{brute_force_min, check_no_gap, check_toland_singer_1d, GridFunction};
use crate::problem::FEAS_TOL;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Suite {
    Nogap,
    Toland,
    SmoothingProps,
    Descent,
    Subsolver,
}

impl Suite {
    pub const ALL: [Suite; 5] = [
        Suite::Nogap,
        Suite::Toland,
        Suite::SmoothingProps,
        Suite::Descent,
        Suite::Subsolver,
    ];

    pub fn name(self) -> &'static str {
        match self {
            Suite::Nogap => "nogap",
            Suite::Toland => "toland",
            Suite::SmoothingProps => "smoothing-props",
            Suite::Descent => "descent",
            Suite::Subsolver => "subsolver",
        }
    }
}

impl std::str::FromStr for Suite {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        Suite::ALL
            .into_iter()
            .find(|v| v.name() == s)
            .ok_or_else(|| Error::InvalidArgument(format!("unknown suite {s}")))
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct InstanceReport {
    pub index: usize,
    pub passed: bool,
    pub metrics: Value,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub failure: Option<String>,
    /// Full instance, present only on failure.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub instance: Option<Value>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SuiteReport {
    pub suite: Suite,
    pub seed: u64,
    pub count: usize,
    pub passed: usize,
    pub failed: usize,
    pub instances: Vec<InstanceReport>,
}

impl SuiteReport {
    pub fn all_passed(&self) -> bool {
        self.failed == 0
    }
}

/// Generator state for instance `index` of a run seeded with `seed`.
pub fn instance_rng(seed: u64, index: usize) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(index as u64);
    rng
}

pub fn run_suite(suite: Suite, seed: u64, count: usize) -> SuiteReport {
    let instances: Vec<InstanceReport> = (0..count)
        .into_par_iter()
        .map(|i| {
            let mut rng = instance_rng(seed, i);
            let r = match suite {
                Suite::Nogap => nogap_instance(&mut rng),
                Suite::Toland => toland_instance(&mut rng),
                Suite::SmoothingProps => smoothing_instance(&mut rng),
                Suite::Descent => descent_instance(&mut rng, i),
                Suite::Subsolver => subsolver_instance(&mut rng),
            };
            let mut r = r.unwrap_or_else(|e| Outcome::fail(json!({}), e.to_string(), Value::Null));
            if r.passed {
                r.instance = None;
            }
            InstanceReport {
                index: i,
                passed: r.passed,
                metrics: r.metrics,
                failure: r.failure,
                instance: r.instance,
            }
        })
        .collect();
    let passed = instances.iter().filter(|r| r.passed).count();
    SuiteReport {
        suite,
        seed,
        count,
        passed,
        failed: count - passed,
        instances,
    }
}

struct Outcome {
    passed: bool,
    metrics: Value,
    failure: Option<String>,
    instance: Option<Value>,
}

impl Outcome {
    fn new(metrics: Value, failures: Vec<String>, instance: Value) -> Self {
        Outcome {
            passed: failures.is_empty(),
            metrics,
            failure: (!failures.is_empty()).then(|| failures.join("; ")),
            instance: Some(instance),
        }
    }

    fn fail(metrics: Value, msg: String, instance: Value) -> Self {
        Outcome::new(metrics, vec![msg], instance)
    }
}

fn to_value<T: Serialize>(v: &T) -> Value {
    serde_json::to_value(v).expect("report types serialize")
}

fn aff(coef: Vec<f64>, offset: f64) -> ExprDoc {
    ExprDoc::Affine { coef, offset }
}

fn sum(terms: Vec<ExprDoc>) -> ExprDoc {
    ExprDoc::Sum { terms }
}

fn round3(v: f64) -> f64 {
    (v * 1000.0).round() / 1000.0
}

/// Random 1-D convex function: quadratic plus a few kinks.
fn convex_1d(rng: &mut ChaCha8Rng, max_curv: f64, kinks: usize, span: f64) -> ExprDoc {
    let a = round3(rng.gen_range(0.0..max_curv));
    let mut terms = vec![
        ExprDoc::Quadratic {
            q: vec![vec![2.0 * a]],
        },
        aff(vec![round3(rng.gen_range(-3.0..3.0))], 0.0),
    ];
    for _ in 0..rng.gen_range(0..=kinks) {
        let t = round3(rng.gen_range(-span..span));
        let w = round3(rng.gen_range(0.0..2.0));
        let kink = if rng.gen_bool(0.5) {
            ExprDoc::Plus {
                arg: Box::new(aff(vec![1.0], -t)),
            }
        } else {
            ExprDoc::Abs {
                arg: Box::new(aff(vec![1.0], -t)),
            }
        };
        terms.push(ExprDoc::Scale {
            alpha: w,
            arg: Box::new(kink),
        });
    }
    sum(terms)
}

fn pure_integer_1d(lo: f64, hi: f64, g: ExprDoc, h: ExprDoc) -> ProblemDoc {
    ProblemDoc {
        name: None,
        dimension: 1,
        integer: vec![0],
        lower: vec![Some(lo)],
        upper: vec![Some(hi)],
        constraints: Vec::new(),
        g,
        h,
        dc_constraint: None,
        solver: None,
    }
}

pub const NOGAP_STEP: f64 = 1e-3;

fn nogap_instance(rng: &mut ChaCha8Rng) -> Result<Outcome> {
    let lo = rng.gen_range(-10..=-1) as f64;
    let hi = rng.gen_range(1..=10) as f64;
    let g = convex_1d(rng, 2.0, 3, 10.0);
    let h = convex_1d(rng, 1.0, 2, 10.0);
    let doc = pure_integer_1d(lo, hi, g, h);
    let r = check_no_gap(&doc.to_problem()?, NOGAP_STEP)?;
    let mut failures = Vec::new();
    if !r.passed {
        failures.push(format!(
            "|v_discrete - v_relax| = {:e} > {:e}",
            r.gap, r.tol
        ));
    }
    Ok(Outcome::new(to_value(&r), failures, to_value(&doc)))
}

pub const TOLAND_STEPS: usize = 10_000;
pub const TOLAND_TOL: f64 = 1e-4;

fn toland_instance(rng: &mut ChaCha8Rng) -> Result<Outcome> {
    let g = convex_1d(rng, 2.0, 3, 5.0);
    let h = convex_1d(rng, 2.0, 2, 5.0);
    let ge = g.build(1, "g")?;
    let he = h.build(1, "h")?;
    let eval = |e: &crate::ConvexExpr, x: f64| e.evaluate(&[x]).expect("1-D expression");
    let gs = GridFunction::uniform(-5.0, 5.0, TOLAND_STEPS, |x| eval(&ge, x))?;
    let hs = GridFunction::uniform(-5.0, 5.0, TOLAND_STEPS, |x| eval(&he, x))?;
    let uniform: Vec<f64> = (0..=400).map(|i| -50.0 + i as f64 * 0.25).collect();
    let r = check_toland_singer_1d(&gs, &hs, &uniform)?;
    let mut failures = Vec::new();
    if !(r.gap <= TOLAND_TOL) {
        failures.push(format!("duality gap {:e} > {TOLAND_TOL:e}", r.gap));
    }
    Ok(Outcome::new(
        to_value(&r),
        failures,
        json!({ "g": g, "h": h, "grid": [-5.0, 5.0, TOLAND_STEPS] }),
    ))
}

/// Random convex expression tree on `ℝ^n`.
pub fn random_expr(rng: &mut ChaCha8Rng, n: usize, depth: usize) -> ExprDoc {
    let coef = |rng: &mut ChaCha8Rng, n: usize| -> Vec<f64> {
        (0..n).map(|_| round3(rng.gen_range(-2.0..2.0))).collect()
    };
    let leaf = depth == 0 || rng.gen_bool(0.25);
    if leaf {
        return match rng.gen_range(0..4) {
            0 => aff(coef(rng, n), round3(rng.gen_range(-1.0..1.0))),
            1 => {
                let b: Vec<Vec<f64>> = (0..n).map(|_| coef(rng, n)).collect();
                let q = (0..n)
                    .map(|i| {
                        (0..n)
                            .map(|j| (0..n).map(|k| 0.5 * b[k][i] * b[k][j]).sum())
                            .collect()
                    })
                    .collect();
                ExprDoc::Quadratic { q }
            }
            2 => ExprDoc::Sqnorm {
                rho: round3(rng.gen_range(0.0..2.0)),
            },
            _ => ExprDoc::Constant {
                value: round3(rng.gen_range(-1.0..1.0)),
            },
        };
    }
    let d = depth - 1;
    match rng.gen_range(0..7) {
        0 => ExprDoc::Plus {
            arg: Box::new(random_expr(rng, n, d)),
        },
        1 => ExprDoc::Abs {
            arg: Box::new(aff(coef(rng, n), round3(rng.gen_range(-1.0..1.0)))),
        },
        2 => ExprDoc::Max {
            args: vec![random_expr(rng, n, d), random_expr(rng, n, d)],
        },
        3 => sum((0..rng.gen_range(2..=3))
            .map(|_| random_expr(rng, n, d))
            .collect()),
        4 => ExprDoc::Scale {
            alpha: round3(rng.gen_range(0.0..2.0)),
            arg: Box::new(random_expr(rng, n, d)),
        },
        5 => {
            let m = rng.gen_range(1..=2);
            ExprDoc::Compose {
                matrix: (0..m).map(|_| coef(rng, n)).collect(),
                offset: coef(rng, m),
                arg: Box::new(random_expr(rng, m, d)),
            }
        }
        _ => ExprDoc::Plus {
            arg: Box::new(aff(coef(rng, n), round3(rng.gen_range(-1.0..1.0)))),
        },
    }
}

pub const SMOOTHING_POINTS: usize = 100;
pub const GRADIENT_RTOL: f64 = 1e-6;

fn smoothing_instance(rng: &mut ChaCha8Rng) -> Result<Outcome> {
    let n = rng.gen_range(1..=3);
    let doc = random_expr(rng, n, 3);
    let e = doc.build(n, "expr")?;
    let kappa = e.kappa_bound();
    let point =
        |rng: &mut ChaCha8Rng| -> Vec<f64> { (0..n).map(|_| rng.gen_range(-3.0..3.0)).collect() };
    let mut failures = Vec::new();
    let mut worst = [0.0_f64; 5];
    for _ in 0..SMOOTHING_POINTS {
        let x = point(rng);
        let z = point(rng);
        let g0 = e.evaluate(&x)?;
        let scale = 1.0 + g0.abs();
        let tol = 1e-9 * scale;

        let mu = rng.gen_range(1e-6..10.0);
        let gm = e.smoothed_evaluate(&x, mu)?;
        let d = gm - g0;
        worst[0] = worst[0].max(-d).max(d - kappa * mu);
        if d < -tol || d > kappa * mu + tol {
            failures.push(format!(
                "sandwich: G_mu - g = {d:e} outside [0, {:e}]",
                kappa * mu
            ));
        }

        let (ma, mb) = {
            let a = rng.gen_range(0.0..10.0);
            let b = rng.gen_range(0.0..10.0);
            if a <= b {
                (a, b)
            } else {
                (b, a)
            }
        };
        let (ga, gb) = (e.smoothed_evaluate(&x, ma)?, e.smoothed_evaluate(&x, mb)?);
        worst[1] = worst[1].max(ga - gb);
        if ga > gb + tol {
            failures.push(format!("monotonicity: G({ma}) - G({mb}) = {:e}", ga - gb));
        }

        let alpha = rng.gen_range(0.0..=1.0);
        let mid: Vec<f64> = x
            .iter()
            .zip(&z)
            .map(|(a, b)| alpha * a + (1.0 - alpha) * b)
            .collect();
        for m in [0.0, mu] {
            let fx = e.smoothed_evaluate(&x, m)?;
            let fz = e.smoothed_evaluate(&z, m)?;
            let fm = e.smoothed_evaluate(&mid, m)?;
            let slack = alpha * fx + (1.0 - alpha) * fz - fm;
            let ctol = 1e-9 * (1.0 + fx.abs() + fz.abs());
            worst[2] = worst[2].max(-slack);
            if slack < -ctol {
                failures.push(format!("convexity at mu = {m}: slack {slack:e}"));
            }
        }

        let s = e.subgradient(&x)?;
        let fz = e.evaluate(&z)?;
        let lin = g0
            + s.iter()
                .zip(z.iter().zip(&x))
                .map(|(si, (a, b))| si * (a - b))
                .sum::<f64>();
        worst[3] = worst[3].max(lin - fz);
        if fz - lin < -1e-9 * (1.0 + fz.abs() + g0.abs()) {
            failures.push(format!("subgradient inequality slack {:e}", fz - lin));
        }

        let mu_g = 10f64.powf(rng.gen_range(-1.0..1.0));
        let grad = e.smoothed_gradient(&x, mu_g)?;
        let norm = grad.iter().fold(1.0_f64, |m, v| m.max(v.abs()));
        for i in 0..n {
            let step = 1e-5;
            let mut xp = x.clone();
            let mut xm = x.clone();
            xp[i] += step;
            xm[i] -= step;
            let fd =
                (e.smoothed_evaluate(&xp, mu_g)? - e.smoothed_evaluate(&xm, mu_g)?) / (2.0 * step);
            let err = (fd - grad[i]).abs() / norm;
            worst[4] = worst[4].max(err);
            if err > GRADIENT_RTOL {
                failures.push(format!(
                    "gradient[{i}] at mu = {mu_g}: relative error {err:e}"
                ));
            }
        }
    }
    failures.truncate(5);
    let metrics = json!({
        "dimension": n,
        "kappa": kappa,
        "tau": e.strong_convexity_modulus(),
        "worst_sandwich": worst[0],
        "worst_monotonicity": worst[1],
        "worst_convexity": worst[2],
        "worst_subgradient": worst[3],
        "worst_gradient_rel": worst[4],
    });
    Ok(Outcome::new(
        metrics,
        failures,
        json!({ "dimension": n, "expr": doc }),
    ))
}

fn descent_instance(rng: &mut ChaCha8Rng, index: usize) -> Result<Outcome> {
    let names = corpus::MIXED;
    let name = names[index % names.len()];
    let smoothing = (index / names.len()).is_multiple_of(2);
    let doc = corpus::load(name)?;
    let p = doc.to_problem()?;
    let s = p.feasible_set();
    let x0: Vec<f64> = (0..p.dim())
        .map(|i| round3(rng.gen_range(s.lower()[i]..=s.upper()[i])))
        .collect();
    let cfg = SolverConfig {
        rho: 1.0,
        x0: Some(x0.clone()),
        ..if smoothing {
            SolverConfig::smoothing()
        } else {
            SolverConfig::scmip()
        }
    };
    let out = if smoothing {
        run_smoothing_scmip(&p, &cfg)?
    } else {
        run_scmip(&p, &cfg)?
    };
    let violations = out.trace.descent_violations();
    let mut failures = Vec::new();
    if out.status != Status::Converged {
        failures.push(format!("status {:?}", out.status));
    }
    if !violations.is_empty() {
        failures.push(format!(
            "{} merit descent violations, first at k = {}",
            violations.len(),
            violations[0].k
        ));
    }
    let infeasible = out
        .trace
        .records
        .iter()
        .skip(1)
        .filter(|r| !out.problem.is_feasible(&r.x, FEAS_TOL))
        .count();
    if infeasible > 0 || !out.problem.is_feasible(&out.x, FEAS_TOL) {
        failures.push("infeasible iterate".into());
    }
    if out.plateau_start >= cfg.max_iter {
        failures.push(format!("integer plateau starts at {}", out.plateau_start));
    }
    if !(out.residual <= cfg.eps_x) {
        failures.push(format!(
            "fixed-point residual {:e} > {:e}",
            out.residual, cfg.eps_x
        ));
    }
    let metrics = json!({
        "problem": name,
        "mode": if smoothing { "smoothing" } else { "scmip" },
        "status": out.status,
        "iterations": out.trace.records.len(),
        "x": out.x,
        "f": out.objective,
        "residual": out.residual,
        "plateau_start": out.plateau_start,
        "violations": violations,
    });
    Ok(Outcome::new(
        metrics,
        failures,
        json!({ "problem": doc, "x0": x0, "smoothing": smoothing }),
    ))
}

fn subsolver_instance(rng: &mut ChaCha8Rng) -> Result<Outcome> {
    let n = rng.gen_range(1..=3);
    let b: Vec<Vec<f64>> = (0..n)
        .map(|_| (0..n).map(|_| round3(rng.gen_range(-1.5..1.5))).collect())
        .collect();
    let q: Vec<Vec<f64>> = (0..n)
        .map(|i| {
            (0..n)
                .map(|j| (0..n).map(|k| b[k][i] * b[k][j]).sum())
                .collect()
        })
        .collect();
    let mut terms = vec![
        ExprDoc::Quadratic { q },
        aff(
            (0..n).map(|_| round3(rng.gen_range(-4.0..4.0))).collect(),
            0.0,
        ),
    ];
    if rng.gen_bool(0.5) {
        let c = (0..n).map(|_| round3(rng.gen_range(-2.0..2.0))).collect();
        terms.push(ExprDoc::Abs {
            arg: Box::new(aff(c, round3(rng.gen_range(-2.0..2.0)))),
        });
    }
    if rng.gen_bool(0.5) {
        let c = (0..n).map(|_| round3(rng.gen_range(-2.0..2.0))).collect();
        terms.push(ExprDoc::Plus {
            arg: Box::new(aff(c, round3(rng.gen_range(-2.0..2.0)))),
        });
    }
    let doc = ProblemDoc {
        name: None,
        dimension: n,
        integer: (0..n).collect(),
        lower: vec![Some(-5.0); n],
        upper: vec![Some(5.0); n],
        constraints: Vec::new(),
        g: sum(terms),
        h: ExprDoc::Constant { value: 0.0 },
        dc_constraint: None,
        solver: None,
    };
    let p = doc.to_problem()?;
    let tol = SubproblemTolerances::default();
    let spec = SubproblemSpec::new(
        p.g().clone(),
        0.0,
        p.feasible_set().clone(),
        p.integers().to_vec(),
        tol,
    )?;
    let sub = minlp::solve(&spec)?;
    let brute = brute_force_min(&p, 1.0, tol.eps_sub)?;
    let mut failures = Vec::new();
    let diff = (sub.objective - brute.value).abs();
    if diff > tol.eps_sub {
        failures.push(format!(
            "value {} vs enumeration {}",
            sub.objective, brute.value
        ));
    }
    if sub.x != brute.x {
        failures.push(format!("argmin {:?} vs enumeration {:?}", sub.x, brute.x));
    }
    let metrics = json!({
        "dimension": n,
        "value": sub.objective,
        "enumerated": brute.value,
        "x": sub.x,
        "nodes": sub.nodes,
        "cuts": sub.cuts,
    });
    Ok(Outcome::new(metrics, failures, to_value(&doc)))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn suite_names_round_trip() {
        for s in Suite::ALL {
            assert_eq!(s.name().parse::<Suite>().unwrap(), s);
        }
        assert!("bogus".parse::<Suite>().is_err());
    }

    #[test]
    fn small_runs_pass_and_are_ordered() {
        for s in Suite::ALL {
            let r = run_suite(s, 3, 4);
            assert!(r.all_passed(), "{s:?}: {:?}", r.instances);
            assert_eq!(
                r.instances.iter().map(|i| i.index).collect::<Vec<_>>(),
                vec![0, 1, 2, 3]
            );
        }
    }

    #[test]
    fn reports_are_reproducible() {
        let a = serde_json::to_string(&run_suite(Suite::SmoothingProps, 11, 3)).unwrap();
        let b = serde_json::to_string(&run_suite(Suite::SmoothingProps, 11, 3)).unwrap();
        assert_eq!(a, b);
    }
}
