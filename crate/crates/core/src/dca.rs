//! SCMIP and Smoothing SCMIP outer iterations.

use serde::{Deserialize, Serialize};

use crate::error::{check_dim, Error, Result};
use crate::expr::{dot, ConvexExpr};
use crate::minlp::{
    self, SubproblemResult, SubproblemSpec, SubproblemStatus, SubproblemTolerances,
};
use crate::problem::{MidcProblem, DEFAULT_RHO, FEAS_TOL};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Mode {
    Scmip,
    Smoothing,
}

#[derive(Debug, Clone, PartialEq)]
pub struct SolverConfig {
    /// Regularization added when `h` is not strongly convex; 0 disables it.
    pub rho: f64,
    /// Initial smoothing parameters `(μ₁⁰, μ₂⁰)`.
    pub mu0: [f64; 2],
    pub gamma: f64,
    pub eps_x: f64,
    pub eps_mu: f64,
    pub max_iter: usize,
    pub subproblem: SubproblemTolerances,
    /// Starting point; a feasible point from validation when absent.
    pub x0: Option<Vec<f64>>,
}

impl SolverConfig {
    pub fn scmip() -> Self {
        SolverConfig {
            rho: 0.0,
            mu0: [0.0, 0.0],
            gamma: 0.5,
            eps_x: 1e-6,
            eps_mu: 1e-8,
            max_iter: 500,
            subproblem: SubproblemTolerances::default(),
            x0: None,
        }
    }

    pub fn smoothing() -> Self {
        SolverConfig {
            rho: DEFAULT_RHO,
            mu0: [1.0, 1.0],
            ..SolverConfig::scmip()
        }
    }

    pub fn for_mode(mode: Mode) -> Self {
        match mode {
            Mode::Scmip => SolverConfig::scmip(),
            Mode::Smoothing => SolverConfig::smoothing(),
        }
    }

    pub fn check(&self) -> Result<()> {
        let bad = |what: &str| Err(Error::InvalidArgument(what.to_string()));
        if !(self.rho >= 0.0 && self.rho.is_finite()) {
            return bad("rho must be finite and >= 0");
        }
        if self.mu0.iter().any(|m| !(*m >= 0.0 && m.is_finite())) {
            return bad("mu0 entries must be finite and >= 0");
        }
        if !(self.gamma > 0.0 && self.gamma < 1.0) {
            return bad("gamma must lie strictly inside (0, 1)");
        }
        if !(self.eps_x > 0.0) || !(self.eps_mu > 0.0) {
            return bad("eps_x and eps_mu must be > 0");
        }
        if self.max_iter == 0 {
            return bad("max_iter must be >= 1");
        }
        Ok(())
    }
}

impl Default for SolverConfig {
    fn default() -> Self {
        SolverConfig::scmip()
    }
}

#[derive(Debug, Clone)]
pub struct Step {
    pub y: Vec<f64>,
    pub x_next: Vec<f64>,
    pub subproblem: SubproblemResult,
}

/// One outer step at `x` with smoothing parameters `u = (μ₁, μ₂)`.
pub fn scmip_step(
    p: &MidcProblem,
    x: &[f64],
    u: [f64; 2],
    tol: &SubproblemTolerances,
) -> Result<Step> {
    check_dim(p.dim(), x.len())?;
    let [mu1, mu2] = u;
    if !(mu1 >= 0.0 && mu2 >= 0.0) {
        return Err(Error::InvalidArgument(
            "smoothing parameters must be >= 0".into(),
        ));
    }
    let y = if mu2 > 0.0 {
        p.h().smoothed_gradient(x, mu2)?
    } else {
        p.h().subgradient(x)?
    };
    let linear = ConvexExpr::affine(y.iter().map(|v| -v).collect(), dot(&y, x))?;
    let spec = SubproblemSpec::new(
        p.g().add(&linear)?,
        mu1,
        p.feasible_set().clone(),
        p.integers().to_vec(),
        *tol,
    )?;
    let sub = minlp::solve(&spec).map_err(|e| match e {
        Error::Subproblem(m) => Error::Subproblem(m),
        Error::NodeLimit { .. } => e,
        other => Error::Subproblem(other.to_string()),
    })?;
    if sub.status == SubproblemStatus::Infeasible {
        return Err(Error::Subproblem("subproblem has no feasible point".into()));
    }
    Ok(Step {
        y,
        x_next: sub.x.clone(),
        subproblem: sub,
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Status {
    Converged,
    IterationLimit,
    SubproblemFailure,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct IterationRecord {
    pub k: usize,
    pub x: Vec<f64>,
    pub y: Vec<f64>,
    pub f: f64,
    pub f_u: f64,
    pub mu1: f64,
    pub mu2: f64,
    /// `‖x^{k+1} − x^k‖∞`.
    pub step: f64,
    /// `‖x^{k+1} − x^k‖₂²`.
    pub step_sq: f64,
    pub merit: f64,
    pub sub_nodes: usize,
    pub sub_cuts: usize,
    pub sub_objective: f64,
    pub sub_lower_bound: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TerminalRecord {
    pub status: Status,
    pub iterations: usize,
    pub x: Vec<f64>,
    pub f: f64,
    pub f_u: f64,
    pub mu1: f64,
    pub mu2: f64,
    pub merit: f64,
    #[serde(deserialize_with = "crate::io::f64_or_inf")]
    pub residual: f64,
    /// First iterate index from which the integer part no longer changes.
    pub plateau_start: usize,
    pub message: Option<String>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Trace {
    pub kappa: f64,
    pub tau: f64,
    pub eps_sub: f64,
    pub records: Vec<IterationRecord>,
    pub terminal: TerminalRecord,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct DescentViolation {
    pub k: usize,
    pub merit_next: f64,
    pub bound: f64,
}

impl Trace {
    fn merit_at(&self, k: usize) -> Option<f64> {
        match k.cmp(&self.records.len()) {
            std::cmp::Ordering::Less => Some(self.records[k].merit),
            std::cmp::Ordering::Equal => Some(self.terminal.merit),
            std::cmp::Ordering::Greater => None,
        }
    }

    /// Checks `merit(k+1) ≤ merit(k) − (τ/2)‖Δx‖² + 2ε_sub` for `k ≥ 1`.
    pub fn descent_violations(&self) -> Vec<DescentViolation> {
        let mut out = Vec::new();
        for r in self.records.iter().skip(1) {
            let Some(next) = self.merit_at(r.k + 1) else {
                continue;
            };
            if self.terminal.status == Status::SubproblemFailure && r.k + 1 == self.records.len() {
                continue;
            }
            let bound = r.merit - 0.5 * self.tau * r.step_sq + 2.0 * self.eps_sub;
            if next > bound {
                out.push(DescentViolation {
                    k: r.k,
                    merit_next: next,
                    bound,
                });
            }
        }
        out
    }
}

#[derive(Debug, Clone)]
pub struct SolveOutcome {
    pub x: Vec<f64>,
    pub objective: f64,
    pub status: Status,
    pub residual: f64,
    pub plateau_start: usize,
    pub trace: Trace,
    /// Problem actually iterated on (after any regularization).
    pub problem: MidcProblem,
}

/// SCMIP: the smoothing schedule with `u ≡ 0`.
pub fn run_scmip(p: &MidcProblem, cfg: &SolverConfig) -> Result<SolveOutcome> {
    let cfg = SolverConfig {
        mu0: [0.0, 0.0],
        ..cfg.clone()
    };
    run(p, &cfg)
}

pub fn run_smoothing_scmip(p: &MidcProblem, cfg: &SolverConfig) -> Result<SolveOutcome> {
    run(p, cfg)
}

fn run(p: &MidcProblem, cfg: &SolverConfig) -> Result<SolveOutcome> {
    cfg.check()?;
    let report = p.validate()?;
    let work = if report.tau_h == 0.0 && cfg.rho > 0.0 {
        p.regularize(cfg.rho)?
    } else {
        p.clone()
    };
    let x0 = match &cfg.x0 {
        Some(x) => {
            check_dim(p.dim(), x.len())?;
            x.clone()
        }
        None => report
            .feasible_point
            .clone()
            .unwrap_or(report.relaxation_point.clone()),
    };
    let kappa = work.h().kappa_bound();
    let tau = work.h().strong_convexity_modulus();
    let tol = cfg.subproblem;
    let merit = |x: &[f64], u: [f64; 2]| -> Result<(f64, f64)> {
        let f_u = work.smoothed_objective(x, u[0], u[1])?;
        Ok((f_u, f_u + kappa * u[1]))
    };

    let mut x = x0;
    let mut u = cfg.mu0;
    let mut records = Vec::new();
    let mut status = Status::IterationLimit;
    let mut message = None;
    for k in 0..cfg.max_iter {
        let step = match scmip_step(&work, &x, u, &tol) {
            Ok(s) => s,
            Err(e) => {
                log::warn!("subproblem failed at iteration {k}: {e}");
                status = Status::SubproblemFailure;
                message = Some(e.to_string());
                break;
            }
        };
        let (f_u, m) = merit(&x, u)?;
        let step_inf = step
            .x_next
            .iter()
            .zip(&x)
            .fold(0.0_f64, |a, (p, q)| a.max((p - q).abs()));
        let step_sq = step
            .x_next
            .iter()
            .zip(&x)
            .map(|(p, q)| (p - q) * (p - q))
            .sum();
        log::debug!(
            "k={k} f_u={f_u:.12e} step={step_inf:.3e} u=({:.3e},{:.3e})",
            u[0],
            u[1]
        );
        records.push(IterationRecord {
            k,
            x: x.clone(),
            y: step.y,
            f: work.objective(&x)?,
            f_u,
            mu1: u[0],
            mu2: u[1],
            step: step_inf,
            step_sq,
            merit: m,
            sub_nodes: step.subproblem.nodes,
            sub_cuts: step.subproblem.cuts,
            sub_objective: step.subproblem.objective,
            sub_lower_bound: step.subproblem.lower_bound,
        });
        let done = step_inf <= cfg.eps_x && u[0].max(u[1]) <= cfg.eps_mu;
        x = step.x_next;
        u = [cfg.gamma * u[0], cfg.gamma * u[1]];
        if done {
            status = Status::Converged;
            break;
        }
    }

    let residual = if status == Status::SubproblemFailure && records.is_empty() {
        f64::INFINITY
    } else {
        match stationarity_residual(&work, &x, &tol) {
            Ok(r) => r,
            Err(e) => {
                if status != Status::SubproblemFailure {
                    status = Status::SubproblemFailure;
                    message = Some(e.to_string());
                }
                f64::INFINITY
            }
        }
    };
    let plateau_start = plateau_start(&records, &x, work.integers());
    let (f_u, m) = merit(&x, u)?;
    let objective = work.objective(&x)?;
    let terminal = TerminalRecord {
        status,
        iterations: records.len(),
        x: x.clone(),
        f: objective,
        f_u,
        mu1: u[0],
        mu2: u[1],
        merit: m,
        residual,
        plateau_start,
        message,
    };
    Ok(SolveOutcome {
        x,
        objective,
        status,
        residual,
        plateau_start,
        trace: Trace {
            kappa,
            tau,
            eps_sub: tol.eps_sub,
            records,
            terminal,
        },
        problem: work,
    })
}

fn plateau_start(records: &[IterationRecord], last: &[f64], integers: &[usize]) -> usize {
    let mut iterates: Vec<&[f64]> = records.iter().map(|r| r.x.as_slice()).collect();
    iterates.push(last);
    let same = |a: &[f64], b: &[f64]| integers.iter().all(|&i| a[i] == b[i]);
    let mut k0 = iterates.len() - 1;
    while k0 > 0 && same(iterates[k0 - 1], last) {
        k0 -= 1;
    }
    k0
}

/// `‖x̂ − x‖∞` where `x̂` solves the unsmoothed subproblem at `y ∈ ∂h(x)`.
pub fn stationarity_residual(
    p: &MidcProblem,
    x: &[f64],
    tol: &SubproblemTolerances,
) -> Result<f64> {
    check_dim(p.dim(), x.len())?;
    if !p.feasible_set().contains(x, FEAS_TOL) {
        return Err(Error::InvalidArgument(
            "stationarity residual needs a point of S".into(),
        ));
    }
    let step = scmip_step(p, x, [0.0, 0.0], tol)?;
    Ok(step
        .x_next
        .iter()
        .zip(x)
        .fold(0.0_f64, |a, (p, q)| a.max((p - q).abs())))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::problem::FeasibleSet;
    use nalgebra::DMatrix;

    fn box1() -> FeasibleSet {
        FeasibleSet::boxed(vec![-1.0], vec![1.0]).unwrap()
    }

    fn dc1() -> MidcProblem {
        MidcProblem::new(
            ConvexExpr::linear(vec![1.0]).unwrap(),
            ConvexExpr::zero(1),
            vec![0],
            box1(),
        )
        .unwrap()
    }

    fn dc2() -> MidcProblem {
        let sq = ConvexExpr::quadratic(DMatrix::from_element(1, 1, 2.0)).unwrap();
        let g = sq.add(&ConvexExpr::linear(vec![1.0]).unwrap()).unwrap();
        MidcProblem::new(g, sq, vec![0], box1()).unwrap()
    }

    fn start(x0: f64) -> SolverConfig {
        SolverConfig {
            x0: Some(vec![x0]),
            ..SolverConfig::scmip()
        }
    }

    #[test]
    fn step_examples() {
        let tol = SubproblemTolerances::default();
        let s = scmip_step(&dc1(), &[0.3], [0.0, 0.0], &tol).unwrap();
        assert_eq!((s.y, s.x_next), (vec![0.0], vec![-1.0]));
        let s = scmip_step(&dc2(), &[0.0], [0.0, 0.0], &tol).unwrap();
        assert_eq!((s.y, s.x_next), (vec![0.0], vec![-1.0]));
        let s = scmip_step(&dc2(), &[-1.0], [0.0, 0.0], &tol).unwrap();
        assert_eq!((s.y, s.x_next), (vec![-2.0], vec![-1.0]));
    }

    #[test]
    fn scmip_first_decomposition() {
        for x0 in [-1.0, 0.0, 1.0, 0.3] {
            let out = run_scmip(&dc1(), &start(x0)).unwrap();
            assert_eq!(out.status, Status::Converged);
            assert_eq!(out.x, vec![-1.0]);
            assert_eq!(out.objective, -1.0);
            assert!(out.trace.records.len() <= 2);
        }
    }

    #[test]
    fn scmip_second_decomposition_from_point_four() {
        let out = run_scmip(&dc2(), &start(0.4)).unwrap();
        let xs: Vec<f64> = out.trace.records.iter().map(|r| r.x[0]).collect();
        assert_eq!(xs, vec![0.4, 0.0, -1.0]);
        assert_eq!(out.x, vec![-1.0]);
        assert_eq!(out.residual, 0.0);
        assert_eq!(out.plateau_start, 2);
    }

    #[test]
    fn residual_examples() {
        let tol = SubproblemTolerances::default();
        assert_eq!(stationarity_residual(&dc2(), &[-1.0], &tol).unwrap(), 0.0);
        assert_eq!(stationarity_residual(&dc2(), &[0.5], &tol).unwrap(), 0.5);
        assert!(stationarity_residual(&dc2(), &[3.0], &tol).is_err());
    }

    #[test]
    fn residual_at_half_in_relaxed_sense() {
        // y = 1 at x = 0.5; min x² over {-1, 0, 1} is 0
        let tol = SubproblemTolerances::default();
        let p = dc2();
        let s = scmip_step(&p, &[0.5], [0.0, 0.0], &tol).unwrap();
        assert_eq!(s.x_next, vec![0.0]);
    }

    #[test]
    fn zero_smoothing_matches_scmip() {
        let cfg = SolverConfig {
            mu0: [0.0, 0.0],
            rho: 0.0,
            ..start(0.4)
        };
        let a = run_smoothing_scmip(&dc2(), &cfg).unwrap();
        let b = run_scmip(&dc2(), &cfg).unwrap();
        assert_eq!(a.trace, b.trace);
    }

    #[test]
    fn constant_objective() {
        let sq = ConvexExpr::quadratic(DMatrix::from_element(1, 1, 2.0)).unwrap();
        let p = MidcProblem::new(sq.clone(), sq, vec![], box1()).unwrap();
        let out = run_scmip(&p, &start(0.25)).unwrap();
        assert_eq!(out.status, Status::Converged);
        assert!(out.trace.records.iter().all(|r| r.f == 0.0));
    }

    #[test]
    fn smoothing_converges_with_merit_descent() {
        let sq = ConvexExpr::squared_norm(1, 2.0).unwrap();
        let a = ConvexExpr::abs(ConvexExpr::affine(vec![1.0], -0.5).unwrap()).unwrap();
        let p = MidcProblem::new(
            sq.add(&a).unwrap(),
            sq,
            vec![0],
            FeasibleSet::boxed(vec![-2.0], vec![2.0]).unwrap(),
        )
        .unwrap();
        let cfg = SolverConfig {
            x0: Some(vec![2.0]),
            ..SolverConfig::smoothing()
        };
        let out = run_smoothing_scmip(&p, &cfg).unwrap();
        assert_eq!(out.status, Status::Converged);
        assert!(out.trace.descent_violations().is_empty());
        assert!(out.trace.terminal.merit <= out.trace.records[0].merit);
    }

    #[test]
    fn iteration_limit_reported() {
        let cfg = SolverConfig {
            max_iter: 1,
            ..start(0.4)
        };
        let out = run_scmip(&dc2(), &cfg).unwrap();
        assert_eq!(out.status, Status::IterationLimit);
        assert_eq!(out.trace.records.len(), 1);
    }

    #[test]
    fn config_checks() {
        let mut c = SolverConfig::smoothing();
        c.gamma = 1.0;
        assert!(c.check().is_err());
    }
}
