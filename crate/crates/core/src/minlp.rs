//! Convex mixed-integer subsolver.
//!
//! Minimizes a convex (possibly smoothed) expression over a polyhedron with
//! some coordinates restricted to integers. Node relaxations are solved by
//! Kelley's cutting-plane method on top of [`crate::lp::Simplex`]; integrality
//! is enforced by best-bound branch-and-bound.

use std::cmp::Ordering;
use std::collections::BinaryHeap;

use crate::error::{check_dim, Error, Result};
use crate::expr::{dot, ConvexExpr};
use crate::lp::{solve_lp, LpStatus, Simplex};
use crate::problem::FeasibleSet;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SubproblemTolerances {
    /// Absolute optimality gap.
    pub eps_sub: f64,
    /// Integrality tolerance.
    pub eps_int: f64,
    pub node_limit: usize,
    /// Cuts per node relaxation.
    pub cut_limit: usize,
    /// Gap targeted when the integer part is fixed, to pin down the
    /// continuous coordinates of the returned point.
    pub polish_gap: f64,
}

impl Default for SubproblemTolerances {
    fn default() -> Self {
        SubproblemTolerances {
            eps_sub: 1e-8,
            eps_int: 1e-6,
            node_limit: 100_000,
            cut_limit: 2_000,
            polish_gap: 1e-13,
        }
    }
}

/// `min objective_μ(x)  s.t.  x ∈ S,  x_N integer`.
#[derive(Debug, Clone)]
pub struct SubproblemSpec {
    pub objective: ConvexExpr,
    /// Smoothing parameter applied to `objective`; 0 means exact.
    pub mu: f64,
    pub feasible: FeasibleSet,
    pub integers: Vec<usize>,
    pub tol: SubproblemTolerances,
}

impl SubproblemSpec {
    pub fn new(
        objective: ConvexExpr,
        mu: f64,
        feasible: FeasibleSet,
        mut integers: Vec<usize>,
        tol: SubproblemTolerances,
    ) -> Result<Self> {
        check_dim(feasible.dim(), objective.dim())?;
        if !(mu >= 0.0) || !mu.is_finite() {
            return Err(Error::InvalidArgument(format!("mu must be >= 0, got {mu}")));
        }
        if !(tol.eps_sub > 0.0) {
            return Err(Error::InvalidArgument("eps_sub must be > 0".into()));
        }
        if !(tol.eps_int > 0.0 && tol.eps_int < 0.5) {
            return Err(Error::InvalidArgument(
                "eps_int must lie in (0, 0.5)".into(),
            ));
        }
        integers.sort_unstable();
        integers.dedup();
        for &i in &integers {
            if i >= feasible.dim() {
                return Err(Error::InvalidArgument(format!(
                    "integer index {i} out of range"
                )));
            }
            if !feasible.lower()[i].is_finite() || !feasible.upper()[i].is_finite() {
                return Err(Error::UnboundedInteger(i));
            }
        }
        Ok(SubproblemSpec {
            objective,
            mu,
            feasible,
            integers,
            tol,
        })
    }

    fn eval(&self, x: &[f64]) -> (f64, Vec<f64>) {
        self.objective
            .value_and_slope(x, self.mu)
            .expect("dimension checked at construction")
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SubproblemStatus {
    Optimal,
    Infeasible,
}

#[derive(Debug, Clone)]
pub struct SubproblemResult {
    pub status: SubproblemStatus,
    pub x: Vec<f64>,
    pub objective: f64,
    pub lower_bound: f64,
    pub nodes: usize,
    pub cuts: usize,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum RelaxationStatus {
    Solved,
    /// Cut budget ran out before the gap closed; the bound is still valid.
    BoundOnly,
    Infeasible,
}

#[derive(Debug, Clone)]
pub struct Relaxation {
    pub status: RelaxationStatus,
    /// Best evaluated point.
    pub x: Vec<f64>,
    pub value: f64,
    pub lower_bound: f64,
    pub cuts_added: usize,
}

/// Linear minorant `t ≥ slope · x + intercept`.
#[derive(Debug, Clone)]
pub struct Cut {
    slope: Vec<f64>,
    intercept: f64,
}

impl Cut {
    fn at(x: &[f64], value: f64, slope: Vec<f64>) -> Self {
        let intercept = value - dot(&slope, x);
        Cut { slope, intercept }
    }
}

const STALL_CUTS: usize = 25;
const MAX_REBUILDS: usize = 2;

/// Kelley relaxation of `spec` over the box `[lower, upper]` (intersected
/// with the rows of `S`). Cuts in `pool` are reused and new ones appended.
pub fn solve_continuous_relaxation(
    spec: &SubproblemSpec,
    lower: &[f64],
    upper: &[f64],
    pool: &mut Vec<Cut>,
) -> Result<Relaxation> {
    kelley(
        spec,
        lower,
        upper,
        pool,
        spec.tol.eps_sub / 2.0,
        spec.tol.cut_limit,
    )
}

fn kelley(
    spec: &SubproblemSpec,
    lower: &[f64],
    upper: &[f64],
    pool: &mut Vec<Cut>,
    target_gap: f64,
    max_cuts: usize,
) -> Result<Relaxation> {
    let n = spec.objective.dim();
    check_dim(n, lower.len())?;
    check_dim(n, upper.len())?;
    if lower.iter().zip(upper).any(|(l, u)| l > u) {
        return Ok(infeasible_relaxation(n));
    }
    let region = spec.feasible.with_box(lower.to_vec(), upper.to_vec())?;
    let probe = solve_lp(&region.lp(vec![0.0; n])?, None)?;
    match probe.status {
        LpStatus::Optimal => {}
        LpStatus::Infeasible => return Ok(infeasible_relaxation(n)),
        s => {
            return Err(Error::Subproblem(format!(
                "feasibility LP ended with status {s:?}"
            )))
        }
    }
    let center = probe.x;
    if lower.iter().zip(upper).all(|(l, u)| l == u) {
        let (value, _) = spec.eval(&center);
        return Ok(Relaxation {
            status: RelaxationStatus::Solved,
            x: center,
            value,
            lower_bound: value,
            cuts_added: 0,
        });
    }

    let mut radius = 10.0 * center.iter().fold(1.0_f64, |m, v| m.max(v.abs()));
    let mut cuts_added = 0;
    let (v0, s0) = spec.eval(&center);
    let mut best_x = center.clone();
    let mut best_value = v0;
    if pool.is_empty() {
        pool.push(Cut::at(&center, v0, s0));
        cuts_added += 1;
    }
    let mut carried_bound = f64::NEG_INFINITY;
    let mut rebuilds = 0;
    'expand: loop {
        let (art_lo, art_hi) = trust_box(lower, upper, &center, radius);
        let mut lo = art_lo.clone();
        let mut hi = art_hi.clone();
        lo.push(f64::NEG_INFINITY);
        hi.push(f64::INFINITY);
        let mut cost = vec![0.0; n + 1];
        cost[n] = 1.0;
        let mut rows: Vec<Vec<f64>> = region
            .rows()
            .iter()
            .map(|r| {
                let mut r = r.clone();
                r.push(0.0);
                r
            })
            .collect();
        let mut rhs = region.rhs().to_vec();
        for c in pool.iter() {
            let mut r = c.slope.clone();
            r.push(-1.0);
            rows.push(r);
            rhs.push(-c.intercept);
        }
        let inst = crate::lp::LpInstance::new(cost, rows, rhs, lo, hi)?;
        let mut lp = Simplex::new(&inst)?;
        let mut lower_bound = std::mem::replace(&mut carried_bound, f64::NEG_INFINITY);
        let mut stall = 0;
        loop {
            let r = lp.solve();
            match r.status {
                LpStatus::Optimal => {}
                LpStatus::NumericallyUnstable if rebuilds < MAX_REBUILDS => {
                    log::debug!(
                        "rebuilding cutting-plane master LP with {} cuts",
                        pool.len()
                    );
                    rebuilds += 1;
                    carried_bound = lower_bound;
                    continue 'expand;
                }
                LpStatus::NumericallyUnstable if lower_bound.is_finite() => {
                    return Ok(Relaxation {
                        status: RelaxationStatus::BoundOnly,
                        x: best_x,
                        value: best_value,
                        lower_bound,
                        cuts_added,
                    });
                }
                s => {
                    return Err(Error::Subproblem(format!(
                        "cutting-plane master LP ended with status {s:?}"
                    )))
                }
            }
            let xhat = &r.x[..n];
            let t = r.x[n];
            let improved_bound = t > lower_bound + 1e-15 * (1.0 + t.abs());
            lower_bound = lower_bound.max(t);
            let (v, s) = spec.eval(xhat);
            let improved_value = v < best_value;
            if improved_value {
                best_value = v;
                best_x = xhat.to_vec();
            }
            if improved_bound || improved_value {
                stall = 0;
            } else {
                stall += 1;
            }
            let gap = best_value - lower_bound;
            let status = if gap <= target_gap {
                Some(RelaxationStatus::Solved)
            } else if cuts_added >= max_cuts || stall >= STALL_CUTS {
                Some(RelaxationStatus::BoundOnly)
            } else {
                None
            };
            if let Some(status) = status {
                if touches(&best_x, &art_lo, &art_hi, lower, upper, radius) {
                    radius *= 10.0;
                    if radius > 1e12 {
                        return Err(Error::Subproblem(
                            "objective does not attain its minimum on the feasible set".into(),
                        ));
                    }
                    continue 'expand;
                }
                return Ok(Relaxation {
                    status,
                    x: best_x,
                    value: best_value,
                    lower_bound,
                    cuts_added,
                });
            }
            let cut = Cut::at(xhat, v, s);
            let mut row = cut.slope.clone();
            row.push(-1.0);
            lp.add_row(row, -cut.intercept)?;
            pool.push(cut);
            cuts_added += 1;
        }
    }
}

fn infeasible_relaxation(n: usize) -> Relaxation {
    Relaxation {
        status: RelaxationStatus::Infeasible,
        x: vec![f64::NAN; n],
        value: f64::INFINITY,
        lower_bound: f64::INFINITY,
        cuts_added: 0,
    }
}

fn trust_box(lower: &[f64], upper: &[f64], center: &[f64], radius: f64) -> (Vec<f64>, Vec<f64>) {
    let lo = lower
        .iter()
        .zip(center)
        .map(|(&l, &c)| if l.is_finite() { l } else { c - radius })
        .collect();
    let hi = upper
        .iter()
        .zip(center)
        .map(|(&u, &c)| if u.is_finite() { u } else { c + radius })
        .collect();
    (lo, hi)
}

fn touches(x: &[f64], lo: &[f64], hi: &[f64], lower: &[f64], upper: &[f64], radius: f64) -> bool {
    let eps = 1e-9 * radius;
    (0..x.len()).any(|i| {
        (!lower[i].is_finite() && x[i] - lo[i] <= eps)
            || (!upper[i].is_finite() && hi[i] - x[i] <= eps)
    })
}

struct Node {
    lower: Vec<f64>,
    upper: Vec<f64>,
    bound: f64,
    seq: usize,
    cuts: Vec<Cut>,
}

impl PartialEq for Node {
    fn eq(&self, other: &Self) -> bool {
        self.cmp(other) == Ordering::Equal
    }
}

impl Eq for Node {}

impl PartialOrd for Node {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}

impl Ord for Node {
    // BinaryHeap is a max-heap: smallest bound first, then oldest node.
    fn cmp(&self, other: &Self) -> Ordering {
        other
            .bound
            .total_cmp(&self.bound)
            .then_with(|| other.seq.cmp(&self.seq))
    }
}

const INHERITED_CUTS: usize = 200;

fn lex_cmp(a: &[f64], b: &[f64]) -> Ordering {
    for (p, q) in a.iter().zip(b) {
        match p.total_cmp(q) {
            Ordering::Equal => continue,
            o => return o,
        }
    }
    Ordering::Equal
}

/// Global minimizer of `spec` within `eps_sub`. Among incumbents whose values
/// lie within `eps_sub` of the best one, the lexicographically smallest is
/// returned.
pub fn solve(spec: &SubproblemSpec) -> Result<SubproblemResult> {
    let n = spec.objective.dim();
    let tol = spec.tol;
    let mut lower = spec.feasible.lower().to_vec();
    let mut upper = spec.feasible.upper().to_vec();
    for &i in &spec.integers {
        lower[i] = lower[i].ceil();
        upper[i] = upper[i].floor();
    }
    let mut heap = BinaryHeap::new();
    let mut seq = 0;
    heap.push(Node {
        lower,
        upper,
        bound: f64::NEG_INFINITY,
        seq,
        cuts: Vec::new(),
    });
    let mut candidates: Vec<(Vec<f64>, f64)> = Vec::new();
    let mut best_value = f64::INFINITY;
    let mut leaf_bound = f64::INFINITY;
    let mut nodes = 0;
    let mut cuts = 0;

    while let Some(mut node) = heap.pop() {
        if node.bound > best_value + tol.eps_sub {
            leaf_bound = leaf_bound.min(node.bound);
            continue;
        }
        nodes += 1;
        if nodes > tol.node_limit {
            let incumbent = select(&candidates, tol.eps_sub);
            return Err(Error::NodeLimit {
                limit: tol.node_limit,
                incumbent_value: incumbent.as_ref().map_or(f64::INFINITY, |c| c.1),
                incumbent: incumbent.map(|c| c.0),
            });
        }
        let relax = solve_continuous_relaxation(spec, &node.lower, &node.upper, &mut node.cuts)?;
        cuts += relax.cuts_added;
        if relax.status == RelaxationStatus::Infeasible {
            continue;
        }
        let bound = relax.lower_bound.max(node.bound);
        if bound > best_value + tol.eps_sub {
            leaf_bound = leaf_bound.min(bound);
            continue;
        }
        let free: Vec<usize> = spec
            .integers
            .iter()
            .copied()
            .filter(|&i| node.lower[i] < node.upper[i])
            .collect();
        let branch = most_fractional(&relax.x, &free);
        let mut inherited = node.cuts;
        if inherited.len() > INHERITED_CUTS {
            inherited.drain(..inherited.len() - INHERITED_CUTS);
        }
        let near_integral = branch.is_none_or(|(_, frac)| frac <= tol.eps_int);
        if near_integral {
            let mut lo = node.lower.clone();
            let mut hi = node.upper.clone();
            for &i in &spec.integers {
                let z = relax.x[i].round().clamp(node.lower[i], node.upper[i]) + 0.0;
                lo[i] = z;
                hi[i] = z;
            }
            let mut pool = inherited.clone();
            let leaf = kelley(spec, &lo, &hi, &mut pool, tol.polish_gap, tol.cut_limit)?;
            cuts += leaf.cuts_added;
            if leaf.status != RelaxationStatus::Infeasible {
                let mut x = leaf.x.clone();
                for &i in &spec.integers {
                    x[i] = lo[i];
                }
                let value = spec.eval(&x).0;
                best_value = best_value.min(value);
                candidates.push((x, value));
                if free.is_empty() {
                    leaf_bound = leaf_bound.min(leaf.lower_bound);
                }
            }
            let Some(&i) = free.first() else { continue };
            // Other integer points of this box may tie with the one just found.
            let z = lo[i];
            let mut parts = Vec::with_capacity(3);
            if z > node.lower[i] {
                parts.push((node.lower[i], z - 1.0));
            }
            parts.push((z, z));
            if z < node.upper[i] {
                parts.push((z + 1.0, node.upper[i]));
            }
            for (a, b) in parts {
                let mut child_lower = node.lower.clone();
                let mut child_upper = node.upper.clone();
                child_lower[i] = a;
                child_upper[i] = b;
                seq += 1;
                heap.push(Node {
                    lower: child_lower,
                    upper: child_upper,
                    bound,
                    seq,
                    cuts: inherited.clone(),
                });
            }
            continue;
        }
        let Some((i, _)) = branch else { unreachable!() };
        let v = relax.x[i].clamp(node.lower[i], node.upper[i]);
        let (down_hi, up_lo) = (v.floor(), v.ceil());
        let mut down_upper = node.upper.clone();
        down_upper[i] = down_hi;
        let mut up_lower = node.lower.clone();
        up_lower[i] = up_lo;
        seq += 1;
        heap.push(Node {
            lower: node.lower.clone(),
            upper: down_upper,
            bound,
            seq,
            cuts: inherited.clone(),
        });
        seq += 1;
        heap.push(Node {
            lower: up_lower,
            upper: node.upper,
            bound,
            seq,
            cuts: inherited,
        });
    }

    match select(&candidates, tol.eps_sub) {
        None => Ok(SubproblemResult {
            status: SubproblemStatus::Infeasible,
            x: vec![f64::NAN; n],
            objective: f64::INFINITY,
            lower_bound: f64::INFINITY,
            nodes,
            cuts,
        }),
        Some((x, value)) => {
            let lower_bound = leaf_bound.min(best_value);
            if value - lower_bound > tol.eps_sub {
                return Err(Error::Subproblem(format!(
                    "optimality gap {:e} exceeds eps_sub {:e}",
                    value - lower_bound,
                    tol.eps_sub
                )));
            }
            Ok(SubproblemResult {
                status: SubproblemStatus::Optimal,
                x,
                objective: value,
                lower_bound,
                nodes,
                cuts,
            })
        }
    }
}

/// Lowest-index integer coordinate with the largest fractionality.
fn most_fractional(x: &[f64], free: &[usize]) -> Option<(usize, f64)> {
    let mut best: Option<(usize, f64)> = None;
    for &i in free {
        let frac = (x[i] - x[i].round()).abs();
        if best.is_none_or(|(_, f)| frac > f) {
            best = Some((i, frac));
        }
    }
    best
}

fn select(candidates: &[(Vec<f64>, f64)], eps: f64) -> Option<(Vec<f64>, f64)> {
    let best = candidates.iter().map(|c| c.1).fold(f64::INFINITY, f64::min);
    candidates
        .iter()
        .filter(|c| c.1 <= best + eps)
        .min_by(|a, b| lex_cmp(&a.0, &b.0))
        .cloned()
}

#[cfg(test)]
mod tests {
    use super::*;
    use nalgebra::DMatrix;

    fn sq1() -> ConvexExpr {
        ConvexExpr::quadratic(DMatrix::from_element(1, 1, 2.0)).unwrap()
    }

    fn spec1(obj: ConvexExpr, lo: f64, hi: f64, integer: bool) -> SubproblemSpec {
        SubproblemSpec::new(
            obj,
            0.0,
            FeasibleSet::boxed(vec![lo], vec![hi]).unwrap(),
            if integer { vec![0] } else { vec![] },
            SubproblemTolerances::default(),
        )
        .unwrap()
    }

    #[test]
    fn relaxation_of_square() {
        let s = spec1(sq1(), -1.0, 1.0, false);
        let r = solve_continuous_relaxation(&s, &[-1.0], &[1.0], &mut Vec::new()).unwrap();
        assert_eq!(r.status, RelaxationStatus::Solved);
        assert!(r.x[0].abs() < 1e-4);
        assert!(r.lower_bound >= -1e-8 && r.lower_bound <= r.value);
    }

    #[test]
    fn relaxation_of_shifted_parabola() {
        let obj = sq1().add(&ConvexExpr::linear(vec![-1.0]).unwrap()).unwrap();
        let s = spec1(obj, -1.0, 1.0, false);
        let r = solve_continuous_relaxation(&s, &[-1.0], &[1.0], &mut Vec::new()).unwrap();
        assert!((r.x[0] - 0.5).abs() < 1e-4);
        assert!((r.value + 0.25).abs() < 1e-8);
    }

    #[test]
    fn relaxation_of_affine_is_exact_after_one_cut() {
        let s = spec1(ConvexExpr::linear(vec![1.0]).unwrap(), -1.0, 1.0, false);
        let r = solve_continuous_relaxation(&s, &[-1.0], &[1.0], &mut Vec::new()).unwrap();
        assert_eq!(r.x, vec![-1.0]);
        assert_eq!(r.value, -1.0);
        assert_eq!(r.lower_bound, -1.0);
        assert_eq!(r.cuts_added, 1);
    }

    #[test]
    fn example_one_subproblems() {
        let obj = sq1().add(&ConvexExpr::linear(vec![1.0]).unwrap()).unwrap();
        let r = solve(&spec1(obj, -1.0, 1.0, true)).unwrap();
        assert_eq!(r.status, SubproblemStatus::Optimal);
        assert_eq!(r.x, vec![-1.0]);
        assert_eq!(r.objective, 0.0);

        let r = solve(&spec1(
            ConvexExpr::linear(vec![1.0]).unwrap(),
            -1.0,
            1.0,
            true,
        ))
        .unwrap();
        assert_eq!(r.x, vec![-1.0]);
        assert_eq!(r.objective, -1.0);
    }

    #[test]
    fn mixed_separable() {
        // x1^2 + (x2 - 0.4)^2, x1 in {-1, 0, 1}, x2 in [-1, 1]
        let q = ConvexExpr::squared_norm(2, 2.0).unwrap();
        let obj = q
            .add(&ConvexExpr::affine(vec![0.0, -0.8], 0.16).unwrap())
            .unwrap();
        let s = SubproblemSpec::new(
            obj,
            0.0,
            FeasibleSet::boxed(vec![-1.0, -1.0], vec![1.0, 1.0]).unwrap(),
            vec![0],
            SubproblemTolerances::default(),
        )
        .unwrap();
        let r = solve(&s).unwrap();
        assert_eq!(r.x[0], 0.0);
        assert!((r.x[1] - 0.4).abs() < 1e-6, "{:?}", r.x);
        assert!(r.objective.abs() < 1e-8);
        assert!(r.objective - r.lower_bound <= 1e-8);
    }

    #[test]
    fn infeasible_integer_box() {
        let s = spec1(sq1(), 0.2, 0.8, true);
        assert_eq!(solve(&s).unwrap().status, SubproblemStatus::Infeasible);
    }

    #[test]
    fn unbounded_continuous_direction_with_linear_rows() {
        // (x - 3)^2 over x >= 0 with no upper bound
        let obj = sq1()
            .add(&ConvexExpr::affine(vec![-6.0], 9.0).unwrap())
            .unwrap();
        let s = spec1(obj, 0.0, f64::INFINITY, false);
        let r = solve(&s).unwrap();
        assert!((r.x[0] - 3.0).abs() < 1e-5, "{:?}", r.x);
    }

    #[test]
    fn rejects_bad_tolerances() {
        let tol = SubproblemTolerances {
            eps_int: 0.5,
            ..Default::default()
        };
        let e = SubproblemSpec::new(
            sq1(),
            0.0,
            FeasibleSet::boxed(vec![-1.0], vec![1.0]).unwrap(),
            vec![0],
            tol,
        );
        assert!(e.is_err());
    }
}
