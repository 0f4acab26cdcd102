//! Mixed-integer DC problem model and its transformations.

use nalgebra::DMatrix;

use crate::error::{check_dim, Error, Result};
use crate::expr::ConvexExpr;
use crate::lp::{solve_lp, LpInstance, LpStatus};

/// Feasibility tolerance for bounds and linear rows.
pub const FEAS_TOL: f64 = 1e-7;

/// Default ρ used when the concave part is not strongly convex.
pub const DEFAULT_RHO: f64 = 1.0;

/// Polyhedral feasible set `{x : l ≤ x ≤ u, A x ≤ b}`.
#[derive(Debug, Clone, PartialEq)]
pub struct FeasibleSet {
    lower: Vec<f64>,
    upper: Vec<f64>,
    rows: Vec<Vec<f64>>,
    rhs: Vec<f64>,
}

impl FeasibleSet {
    pub fn new(
        lower: Vec<f64>,
        upper: Vec<f64>,
        rows: Vec<Vec<f64>>,
        rhs: Vec<f64>,
    ) -> Result<Self> {
        check_dim(lower.len(), upper.len())?;
        check_dim(rows.len(), rhs.len())?;
        let n = lower.len();
        for row in &rows {
            check_dim(n, row.len())?;
            if row.iter().any(|v| !v.is_finite()) {
                return Err(Error::InvalidArgument(
                    "non-finite constraint coefficient".into(),
                ));
            }
        }
        if rhs.iter().any(|v| !v.is_finite()) {
            return Err(Error::InvalidArgument("non-finite constraint rhs".into()));
        }
        for i in 0..n {
            let (l, u) = (lower[i], upper[i]);
            if l.is_nan() || u.is_nan() || l == f64::INFINITY || u == f64::NEG_INFINITY {
                return Err(Error::InvalidArgument(format!(
                    "invalid bounds [{l}, {u}] on variable {i}"
                )));
            }
            if l > u {
                return Err(Error::Infeasible(format!(
                    "empty box [{l}, {u}] on variable {i}"
                )));
            }
        }
        Ok(FeasibleSet {
            lower,
            upper,
            rows,
            rhs,
        })
    }

    /// The box `[lower, upper]` with no linear rows.
    pub fn boxed(lower: Vec<f64>, upper: Vec<f64>) -> Result<Self> {
        Self::new(lower, upper, Vec::new(), Vec::new())
    }

    pub fn dim(&self) -> usize {
        self.lower.len()
    }

    pub fn lower(&self) -> &[f64] {
        &self.lower
    }

    pub fn upper(&self) -> &[f64] {
        &self.upper
    }

    pub fn rows(&self) -> &[Vec<f64>] {
        &self.rows
    }

    pub fn rhs(&self) -> &[f64] {
        &self.rhs
    }

    /// Largest violation of the bounds and rows at `x`.
    pub fn violation(&self, x: &[f64]) -> f64 {
        let mut worst: f64 = 0.0;
        for (i, &xi) in x.iter().enumerate() {
            worst = worst.max(self.lower[i] - xi).max(xi - self.upper[i]);
        }
        for (row, &b) in self.rows.iter().zip(&self.rhs) {
            let act: f64 = row.iter().zip(x).map(|(a, v)| a * v).sum();
            worst = worst.max(act - b);
        }
        worst
    }

    pub fn contains(&self, x: &[f64], tol: f64) -> bool {
        x.len() == self.dim() && self.violation(x) <= tol
    }

    /// Copy with the box replaced.
    pub fn with_box(&self, lower: Vec<f64>, upper: Vec<f64>) -> Result<Self> {
        Self::new(lower, upper, self.rows.clone(), self.rhs.clone())
    }

    pub(crate) fn lp(&self, cost: Vec<f64>) -> Result<LpInstance> {
        LpInstance::new(
            cost,
            self.rows.clone(),
            self.rhs.clone(),
            self.lower.clone(),
            self.upper.clone(),
        )
    }
}

/// `min g(x) − h(x)  s.t.  x ∈ S,  x_i ∈ ℤ for i ∈ N`.
#[derive(Debug, Clone)]
pub struct MidcProblem {
    g: ConvexExpr,
    h: ConvexExpr,
    integers: Vec<usize>,
    feasible: FeasibleSet,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ValidationReport {
    /// Point of the LP relaxation of `S`.
    pub relaxation_point: Vec<f64>,
    /// Mixed-integer feasible point found by rounding the relaxation point.
    pub feasible_point: Option<Vec<f64>>,
    /// Strong convexity modulus of `h`.
    pub tau_h: f64,
    pub warnings: Vec<String>,
}

impl MidcProblem {
    pub fn new(
        g: ConvexExpr,
        h: ConvexExpr,
        mut integers: Vec<usize>,
        feasible: FeasibleSet,
    ) -> Result<Self> {
        let n = feasible.dim();
        check_dim(n, g.dim())?;
        check_dim(n, h.dim())?;
        integers.sort_unstable();
        integers.dedup();
        for &i in &integers {
            if i >= n {
                return Err(Error::InvalidArgument(format!(
                    "integer index {i} out of range for dimension {n}"
                )));
            }
            if !feasible.lower[i].is_finite() || !feasible.upper[i].is_finite() {
                return Err(Error::UnboundedInteger(i));
            }
        }
        Ok(MidcProblem {
            g,
            h,
            integers,
            feasible,
        })
    }

    pub fn dim(&self) -> usize {
        self.feasible.dim()
    }

    pub fn g(&self) -> &ConvexExpr {
        &self.g
    }

    pub fn h(&self) -> &ConvexExpr {
        &self.h
    }

    /// Sorted integer index set `N`.
    pub fn integers(&self) -> &[usize] {
        &self.integers
    }

    /// Sorted continuous index set `M`.
    pub fn continuous(&self) -> Vec<usize> {
        (0..self.dim())
            .filter(|i| self.integers.binary_search(i).is_err())
            .collect()
    }

    pub fn feasible_set(&self) -> &FeasibleSet {
        &self.feasible
    }

    /// `g(x) − h(x)`, ignoring feasibility.
    pub fn objective(&self, x: &[f64]) -> Result<f64> {
        Ok(self.g.evaluate(x)? - self.h.evaluate(x)?)
    }

    /// `G_{μ₁}(x) − H_{μ₂}(x)`.
    pub fn smoothed_objective(&self, x: &[f64], mu1: f64, mu2: f64) -> Result<f64> {
        Ok(self.g.smoothed_evaluate(x, mu1)? - self.h.smoothed_evaluate(x, mu2)?)
    }

    pub fn is_feasible(&self, x: &[f64], tol: f64) -> bool {
        self.feasible.contains(x, tol)
            && self
                .integers
                .iter()
                .all(|&i| (x[i] - x[i].round()).abs() <= tol)
    }

    pub fn validate(&self) -> Result<ValidationReport> {
        let n = self.dim();
        let relax = solve_lp(&self.feasible.lp(vec![0.0; n])?, None)?;
        match relax.status {
            LpStatus::Optimal => {}
            LpStatus::Infeasible => {
                return Err(Error::Infeasible("feasible set S is empty".into()))
            }
            other => {
                return Err(Error::Infeasible(format!(
                    "feasibility LP of S ended with status {other:?}"
                )))
            }
        }
        let mut warnings = Vec::new();
        let feasible_point = self.rounding_probe(&relax.x)?;
        if feasible_point.is_none() && !self.integers.is_empty() {
            warnings.push(
                "rounding the LP relaxation point gave no mixed-integer feasible point".to_string(),
            );
        }
        let tau_h = self.h.strong_convexity_modulus();
        if tau_h == 0.0 {
            warnings.push(
                "h is not strongly convex (tau = 0); convergence guarantees need regularize(rho)"
                    .to_string(),
            );
        }
        Ok(ValidationReport {
            relaxation_point: relax.x,
            feasible_point,
            tau_h,
            warnings,
        })
    }

    fn rounding_probe(&self, point: &[f64]) -> Result<Option<Vec<f64>>> {
        if self.integers.is_empty() {
            return Ok(Some(point.to_vec()));
        }
        let mut lo = self.feasible.lower.clone();
        let mut hi = self.feasible.upper.clone();
        for &i in &self.integers {
            let z = point[i].round().clamp(lo[i].ceil(), hi[i].floor());
            if z < lo[i] || z > hi[i] {
                return Ok(None);
            }
            lo[i] = z;
            hi[i] = z;
        }
        let fixed = self.feasible.with_box(lo, hi)?;
        let r = solve_lp(&fixed.lp(vec![0.0; self.dim()])?, None)?;
        Ok((r.status == LpStatus::Optimal).then_some(r.x))
    }

    /// `(g + ρ‖·‖²/2, h + ρ‖·‖²/2)`: same objective, `h` gains modulus ρ.
    pub fn regularize(&self, rho: f64) -> Result<Self> {
        if !(rho > 0.0) || !rho.is_finite() {
            return Err(Error::InvalidArgument(format!(
                "rho must be > 0, got {rho}"
            )));
        }
        let reg = ConvexExpr::squared_norm(self.dim(), rho)?;
        Ok(MidcProblem {
            g: self.g.add(&reg)?,
            h: self.h.add(&reg)?,
            integers: self.integers.clone(),
            feasible: self.feasible.clone(),
        })
    }

    /// Moves `g1 − g2 ≤ 0` into the objective as `τ max(g1 − g2, 0)`, written
    /// as `(g + τ max(g1, g2)) − (h + τ g2)`.
    pub fn penalize_dc_constraint(
        &self,
        g1: &ConvexExpr,
        g2: &ConvexExpr,
        tau: f64,
    ) -> Result<Self> {
        if !(tau > 0.0) || !tau.is_finite() {
            return Err(Error::InvalidArgument(format!(
                "penalty must be > 0, got {tau}"
            )));
        }
        check_dim(self.dim(), g1.dim())?;
        check_dim(self.dim(), g2.dim())?;
        let penalty = ConvexExpr::scale(tau, ConvexExpr::max(g1.clone(), g2.clone())?)?;
        let shift = ConvexExpr::scale(tau, g2.clone())?;
        Ok(MidcProblem {
            g: self.g.add(&penalty)?,
            h: self.h.add(&shift)?,
            integers: self.integers.clone(),
            feasible: self.feasible.clone(),
        })
    }

    /// Restriction to the continuous variables with `x_N = z`.
    pub fn fix_integers(&self, z: &[f64]) -> Result<Self> {
        check_dim(self.integers.len(), z.len())?;
        for (&i, &zi) in self.integers.iter().zip(z) {
            if zi != zi.round() || zi < self.feasible.lower[i] || zi > self.feasible.upper[i] {
                return Err(Error::InvalidArgument(format!(
                    "value {zi} for integer variable {i} is not an integer inside [{}, {}]",
                    self.feasible.lower[i], self.feasible.upper[i]
                )));
            }
        }
        let cont = self.continuous();
        let n = self.dim();
        let mut embed = DMatrix::zeros(n, cont.len());
        let mut offset = vec![0.0; n];
        for (c, &i) in cont.iter().enumerate() {
            embed[(i, c)] = 1.0;
        }
        for (&i, &zi) in self.integers.iter().zip(z) {
            offset[i] = zi;
        }
        let g = ConvexExpr::compose(embed.clone(), offset.clone(), self.g.clone())?;
        let h = ConvexExpr::compose(embed, offset.clone(), self.h.clone())?;
        let lower = cont.iter().map(|&i| self.feasible.lower[i]).collect();
        let upper = cont.iter().map(|&i| self.feasible.upper[i]).collect();
        let mut rows = Vec::with_capacity(self.feasible.rows.len());
        let mut rhs = Vec::with_capacity(self.feasible.rows.len());
        for (row, &b) in self.feasible.rows.iter().zip(&self.feasible.rhs) {
            let fixed: f64 = self.integers.iter().map(|&i| row[i] * offset[i]).sum();
            rows.push(cont.iter().map(|&i| row[i]).collect());
            rhs.push(b - fixed);
        }
        let feasible = FeasibleSet::new(lower, upper, rows, rhs)?;
        MidcProblem::new(g, h, Vec::new(), feasible)
    }

    /// Full point from continuous values `xm` and integer values `z`.
    pub fn embed(&self, xm: &[f64], z: &[f64]) -> Vec<f64> {
        let mut x = vec![0.0; self.dim()];
        for (&i, &v) in self.continuous().iter().zip(xm) {
            x[i] = v;
        }
        for (&i, &v) in self.integers.iter().zip(z) {
            x[i] = v;
        }
        x
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn lin(c: f64) -> ConvexExpr {
        ConvexExpr::linear(vec![c]).unwrap()
    }

    fn sq() -> ConvexExpr {
        ConvexExpr::quadratic(DMatrix::from_element(1, 1, 2.0)).unwrap()
    }

    fn example1(g: ConvexExpr, h: ConvexExpr) -> MidcProblem {
        MidcProblem::new(
            g,
            h,
            vec![0],
            FeasibleSet::boxed(vec![-1.0], vec![1.0]).unwrap(),
        )
        .unwrap()
    }

    #[test]
    fn validate_warns_for_first_decomposition() {
        let p = example1(lin(1.0), ConvexExpr::zero(1));
        let r = p.validate().unwrap();
        assert_eq!(r.tau_h, 0.0);
        assert_eq!(r.warnings.len(), 1);
        assert!(r.feasible_point.is_some());
    }

    #[test]
    fn validate_is_quiet_for_second_decomposition() {
        let p = example1(sq().add(&lin(1.0)).unwrap(), sq());
        let r = p.validate().unwrap();
        assert_eq!(r.tau_h, 2.0);
        assert!(r.warnings.is_empty());
    }

    #[test]
    fn empty_box_is_infeasible() {
        let e = FeasibleSet::boxed(vec![1.0], vec![0.0]).unwrap_err();
        assert!(matches!(e, Error::Infeasible(_)));
        let s = FeasibleSet::new(vec![0.0], vec![1.0], vec![vec![1.0]], vec![-1.0]).unwrap();
        let p = MidcProblem::new(lin(1.0), ConvexExpr::zero(1), vec![], s).unwrap();
        assert!(matches!(p.validate(), Err(Error::Infeasible(_))));
    }

    #[test]
    fn unboxed_integer_is_rejected() {
        let s = FeasibleSet::boxed(vec![0.0], vec![f64::INFINITY]).unwrap();
        let e = MidcProblem::new(lin(1.0), ConvexExpr::zero(1), vec![0], s).unwrap_err();
        assert!(matches!(e, Error::UnboundedInteger(0)));
    }

    #[test]
    fn regularize_keeps_objective() {
        let p = example1(lin(1.0), ConvexExpr::zero(1));
        let r = p.regularize(2.0).unwrap();
        assert_eq!(r.objective(&[3.0]).unwrap(), 3.0);
        assert_eq!(r.h().strong_convexity_modulus(), 2.0);
        let p2 = example1(sq().add(&lin(1.0)).unwrap(), sq());
        assert_eq!(
            p2.regularize(1.0).unwrap().h().strong_convexity_modulus(),
            3.0
        );
        assert!(p.regularize(0.0).is_err());
    }

    #[test]
    fn penalty_construction() {
        let base = example1(sq(), ConvexExpr::zero(1));
        let p = base
            .penalize_dc_constraint(&lin(1.0), &ConvexExpr::zero(1), 1.0)
            .unwrap();
        for &x in &[-2.0, -0.5, 0.0, 0.7, 3.0] {
            let expect = x * x + f64::max(x, 0.0);
            assert!((p.g().evaluate(&[x]).unwrap() - expect).abs() < 1e-15);
            assert_eq!(p.h().evaluate(&[x]).unwrap(), 0.0);
        }
        // g1 - g2 = 2 at x = 2 with g1 = x, g2 = 0, tau = 5
        let p = base
            .penalize_dc_constraint(&lin(1.0), &ConvexExpr::zero(1), 5.0)
            .unwrap();
        let d = p.objective(&[2.0]).unwrap() - base.objective(&[2.0]).unwrap();
        assert_eq!(d, 10.0);
    }

    #[test]
    fn fix_integers_examples() {
        let p = example1(lin(1.0), ConvexExpr::zero(1));
        let q = p.fix_integers(&[-1.0]).unwrap();
        assert_eq!(q.dim(), 0);
        assert_eq!(q.objective(&[]).unwrap(), -1.0);
        assert!(p.fix_integers(&[2.0]).is_err());

        let g = ConvexExpr::squared_norm(2, 2.0).unwrap();
        let s = FeasibleSet::boxed(vec![-5.0, -5.0], vec![5.0, 5.0]).unwrap();
        let p = MidcProblem::new(g, ConvexExpr::zero(2), vec![1], s).unwrap();
        let q = p.fix_integers(&[3.0]).unwrap();
        assert_eq!(q.dim(), 1);
        assert_eq!(q.objective(&[2.0]).unwrap(), 4.0 + 9.0);
    }
}
