//! Dense bounded-variable primal simplex.
//!
//! Solves `min cᵀx  s.t.  A x ≤ b,  l ≤ x ≤ u` with native handling of
//! (possibly infinite) variable bounds. Every row gets a slack `s ≥ 0` and an
//! artificial column used only by phase 1. Pricing and the ratio test follow
//! Bland's rule, so the pivot sequence is a function of the input alone.
//!
//! [`Simplex`] keeps its basis between solves; [`Simplex::add_row`] appends a
//! cut and the next [`Simplex::solve`] restarts from the previous basis.

use crate::error::{Error, Result};

const FEAS_TOL: f64 = 1e-9;
const DUAL_TOL: f64 = 1e-10;
const PIVOT_TOL: f64 = 1e-10;
const ACCEPT_VIOL: f64 = 1e-7;
const CHECK_EVERY: usize = 50;
const MAX_REFACTOR_ATTEMPTS: usize = 3;

#[derive(Debug, Clone, PartialEq)]
pub struct LpInstance {
    pub cost: Vec<f64>,
    pub rows: Vec<Vec<f64>>,
    pub rhs: Vec<f64>,
    pub lower: Vec<f64>,
    pub upper: Vec<f64>,
}

impl LpInstance {
    pub fn new(
        cost: Vec<f64>,
        rows: Vec<Vec<f64>>,
        rhs: Vec<f64>,
        lower: Vec<f64>,
        upper: Vec<f64>,
    ) -> Result<Self> {
        let inst = LpInstance {
            cost,
            rows,
            rhs,
            lower,
            upper,
        };
        inst.check()?;
        Ok(inst)
    }

    pub fn num_vars(&self) -> usize {
        self.cost.len()
    }

    pub fn num_rows(&self) -> usize {
        self.rows.len()
    }

    fn check(&self) -> Result<()> {
        let n = self.cost.len();
        if self.lower.len() != n || self.upper.len() != n {
            return Err(Error::DimensionMismatch {
                expected: n,
                got: self.lower.len().min(self.upper.len()),
            });
        }
        if self.rhs.len() != self.rows.len() {
            return Err(Error::DimensionMismatch {
                expected: self.rows.len(),
                got: self.rhs.len(),
            });
        }
        for row in &self.rows {
            if row.len() != n {
                return Err(Error::DimensionMismatch {
                    expected: n,
                    got: row.len(),
                });
            }
            if row.iter().any(|v| !v.is_finite()) {
                return Err(Error::InvalidArgument(
                    "non-finite constraint coefficient".into(),
                ));
            }
        }
        if self.cost.iter().chain(&self.rhs).any(|v| !v.is_finite()) {
            return Err(Error::InvalidArgument("non-finite cost or rhs".into()));
        }
        for j in 0..n {
            let (l, u) = (self.lower[j], self.upper[j]);
            if l.is_nan() || u.is_nan() || l > u || l == f64::INFINITY || u == f64::NEG_INFINITY {
                return Err(Error::InvalidArgument(format!(
                    "invalid bounds [{l}, {u}] on variable {j}"
                )));
            }
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum LpStatus {
    Optimal,
    Infeasible,
    Unbounded,
    NumericallyUnstable,
}

/// Basis description over structural columns `0..n` and slacks `n..n+m`.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Basis {
    pub basic: Vec<usize>,
    /// Nonbasic columns resting at their upper bound.
    pub at_upper: Vec<usize>,
}

#[derive(Debug, Clone)]
pub struct LpResult {
    pub status: LpStatus,
    pub x: Vec<f64>,
    pub objective: f64,
    /// Row multipliers; nonpositive at an optimum of a minimization with `≤` rows.
    pub duals: Vec<f64>,
    pub basis: Option<Basis>,
    pub iterations: usize,
}

impl LpResult {
    fn without_solution(status: LpStatus, n: usize, m: usize, iterations: usize) -> Self {
        LpResult {
            status,
            x: vec![f64::NAN; n],
            objective: f64::NAN,
            duals: vec![f64::NAN; m],
            basis: None,
            iterations,
        }
    }
}

/// Solves `inst`, starting from `warm` when it describes a primal feasible
/// basis and from the slack basis otherwise.
pub fn solve_lp(inst: &LpInstance, warm: Option<&Basis>) -> Result<LpResult> {
    inst.check()?;
    let mut s = Simplex::new(inst)?;
    if let Some(b) = warm {
        s.install_basis(b);
    }
    Ok(s.solve())
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
enum Pos {
    Basic(usize),
    Lower,
    Upper,
    Free,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
enum Var {
    Structural(usize),
    Slack(usize),
    Artificial(usize),
}

enum Phase {
    Feasibility,
    Optimality,
}

enum PhaseEnd {
    Optimal,
    Unbounded,
    Unstable,
}

/// Stateful simplex solver.
#[derive(Debug, Clone)]
pub struct Simplex {
    n: usize,
    cost: Vec<f64>,
    rows: Vec<Vec<f64>>,
    rhs: Vec<f64>,
    lo: Vec<f64>,
    hi: Vec<f64>,
    val: Vec<f64>,
    pos: Vec<Pos>,
    basic: Vec<usize>,
    binv: Vec<f64>,
    has_basis: bool,
    iterations: usize,
    max_iterations: usize,
}

impl Simplex {
    pub fn new(inst: &LpInstance) -> Result<Self> {
        inst.check()?;
        let n = inst.num_vars();
        let mut s = Simplex {
            n,
            cost: inst.cost.clone(),
            rows: Vec::new(),
            rhs: Vec::new(),
            lo: inst.lower.clone(),
            hi: inst.upper.clone(),
            val: vec![0.0; n],
            pos: vec![Pos::Free; n],
            basic: Vec::new(),
            binv: Vec::new(),
            has_basis: false,
            iterations: 0,
            max_iterations: 20_000,
        };
        for (row, &b) in inst.rows.iter().zip(&inst.rhs) {
            s.push_row(row.clone(), b);
        }
        Ok(s)
    }

    pub fn num_rows(&self) -> usize {
        self.rows.len()
    }

    pub fn set_iteration_limit(&mut self, limit: usize) {
        self.max_iterations = limit;
    }

    fn push_row(&mut self, row: Vec<f64>, b: f64) {
        self.rows.push(row);
        self.rhs.push(b);
        // slack then artificial
        self.lo.extend([0.0, 0.0]);
        self.hi.extend([f64::INFINITY, 0.0]);
        self.val.extend([0.0, 0.0]);
        self.pos.extend([Pos::Lower, Pos::Lower]);
        self.cost.extend([0.0, 0.0]);
    }

    /// Appends the row `coef · x ≤ rhs`, keeping the current basis.
    pub fn add_row(&mut self, coef: Vec<f64>, rhs: f64) -> Result<()> {
        if coef.len() != self.n {
            return Err(Error::DimensionMismatch {
                expected: self.n,
                got: coef.len(),
            });
        }
        if coef.iter().any(|v| !v.is_finite()) || !rhs.is_finite() {
            return Err(Error::InvalidArgument("non-finite cut".into()));
        }
        let m = self.rows.len();
        let row_basic: Vec<f64> = self
            .basic
            .iter()
            .map(|&v| match self.var(v) {
                Var::Structural(j) => coef[j],
                _ => 0.0,
            })
            .collect();
        let activity: f64 = (0..self.n).map(|j| coef[j] * self.val[j]).sum();
        self.push_row(coef, rhs);
        if !self.has_basis {
            return Ok(());
        }
        // [B 0; aᵀ 1]⁻¹ = [B⁻¹ 0; -aᵀB⁻¹ 1]
        let mut binv = vec![0.0; (m + 1) * (m + 1)];
        for k in 0..m {
            binv[k * (m + 1)..k * (m + 1) + m].copy_from_slice(&self.binv[k * m..(k + 1) * m]);
        }
        for i in 0..m {
            let mut acc = 0.0;
            for k in 0..m {
                acc += row_basic[k] * self.binv[k * m + i];
            }
            binv[m * (m + 1) + i] = -acc;
        }
        binv[m * (m + 1) + m] = 1.0;
        self.binv = binv;
        let slack = self.n + 2 * m;
        let art = slack + 1;
        let residual = rhs - activity;
        if residual >= 0.0 {
            self.basic.push(slack);
            self.pos[slack] = Pos::Basic(m);
            self.val[slack] = residual;
        } else {
            self.basic.push(art);
            self.pos[art] = Pos::Basic(m);
            self.hi[art] = f64::INFINITY;
            self.val[art] = -residual;
            for i in 0..=m {
                self.binv[m * (m + 1) + i] = -self.binv[m * (m + 1) + i];
            }
        }
        Ok(())
    }

    fn var(&self, v: usize) -> Var {
        if v < self.n {
            Var::Structural(v)
        } else if (v - self.n).is_multiple_of(2) {
            Var::Slack((v - self.n) / 2)
        } else {
            Var::Artificial((v - self.n) / 2)
        }
    }

    fn num_total(&self) -> usize {
        self.n + 2 * self.rows.len()
    }

    fn column(&self, v: usize) -> Vec<f64> {
        let m = self.rows.len();
        match self.var(v) {
            Var::Structural(j) => self.rows.iter().map(|r| r[j]).collect(),
            Var::Slack(i) => {
                let mut c = vec![0.0; m];
                c[i] = 1.0;
                c
            }
            Var::Artificial(i) => {
                let mut c = vec![0.0; m];
                c[i] = -1.0;
                c
            }
        }
    }

    fn binv_times_column(&self, v: usize) -> Vec<f64> {
        let m = self.rows.len();
        match self.var(v) {
            Var::Structural(j) => (0..m)
                .map(|k| {
                    let row = &self.binv[k * m..(k + 1) * m];
                    row.iter().zip(&self.rows).map(|(b, r)| b * r[j]).sum()
                })
                .collect(),
            Var::Slack(i) => (0..m).map(|k| self.binv[k * m + i]).collect(),
            Var::Artificial(i) => (0..m).map(|k| -self.binv[k * m + i]).collect(),
        }
    }

    fn reduced_cost(&self, v: usize, c: &[f64], y: &[f64]) -> f64 {
        match self.var(v) {
            Var::Structural(j) => {
                c[v] - self
                    .rows
                    .iter()
                    .zip(y)
                    .map(|(r, yi)| r[j] * yi)
                    .sum::<f64>()
            }
            Var::Slack(i) => c[v] - y[i],
            Var::Artificial(i) => c[v] + y[i],
        }
    }

    fn duals(&self, c: &[f64]) -> Vec<f64> {
        let m = self.rows.len();
        let mut y = vec![0.0; m];
        for (k, &v) in self.basic.iter().enumerate() {
            let cb = c[v];
            if cb != 0.0 {
                for i in 0..m {
                    y[i] += cb * self.binv[k * m + i];
                }
            }
        }
        y
    }

    fn nonbasic_start(&mut self, v: usize) {
        let (l, u) = (self.lo[v], self.hi[v]);
        if l.is_finite() {
            self.pos[v] = Pos::Lower;
            self.val[v] = l;
        } else if u.is_finite() {
            self.pos[v] = Pos::Upper;
            self.val[v] = u;
        } else {
            self.pos[v] = Pos::Free;
            self.val[v] = 0.0;
        }
    }

    /// Slack basis with artificials on violated rows.
    fn cold_start(&mut self) {
        let m = self.rows.len();
        for j in 0..self.n {
            self.nonbasic_start(j);
        }
        self.basic = Vec::with_capacity(m);
        self.binv = vec![0.0; m * m];
        for i in 0..m {
            let slack = self.n + 2 * i;
            let art = slack + 1;
            let activity: f64 = (0..self.n).map(|j| self.rows[i][j] * self.val[j]).sum();
            let r = self.rhs[i] - activity;
            if r >= 0.0 {
                self.basic.push(slack);
                self.pos[slack] = Pos::Basic(i);
                self.val[slack] = r;
                self.pos[art] = Pos::Lower;
                self.val[art] = 0.0;
                self.hi[art] = 0.0;
                self.binv[i * m + i] = 1.0;
            } else {
                self.basic.push(art);
                self.pos[art] = Pos::Basic(i);
                self.val[art] = -r;
                self.hi[art] = f64::INFINITY;
                self.pos[slack] = Pos::Lower;
                self.val[slack] = 0.0;
                self.binv[i * m + i] = -1.0;
            }
        }
        self.has_basis = true;
    }

    fn install_basis(&mut self, b: &Basis) {
        let m = self.rows.len();
        let n = self.n;
        let to_internal = move |c: usize| if c < n { c } else { n + 2 * (c - n) };
        if b.basic.len() != m || b.basic.iter().chain(&b.at_upper).any(|&c| c >= n + m) {
            return;
        }
        for v in 0..self.num_total() {
            if let Var::Artificial(_) = self.var(v) {
                self.pos[v] = Pos::Lower;
                self.val[v] = 0.0;
                self.hi[v] = 0.0;
            } else {
                self.nonbasic_start(v);
            }
        }
        for &c in &b.at_upper {
            let v = to_internal(c);
            if self.hi[v].is_finite() {
                self.pos[v] = Pos::Upper;
                self.val[v] = self.hi[v];
            }
        }
        self.basic = b.basic.iter().map(|&c| to_internal(c)).collect();
        for (k, &v) in self.basic.clone().iter().enumerate() {
            self.pos[v] = Pos::Basic(k);
        }
        self.has_basis = self.refactor();
    }

    /// Recomputes B⁻¹ and the basic values. Returns false on a singular basis.
    fn refactor(&mut self) -> bool {
        let m = self.rows.len();
        let mut a = vec![0.0; m * m];
        for (k, &v) in self.basic.iter().enumerate() {
            let col = self.column(v);
            for i in 0..m {
                a[i * m + k] = col[i];
            }
        }
        let mut inv = vec![0.0; m * m];
        for i in 0..m {
            inv[i * m + i] = 1.0;
        }
        for c in 0..m {
            let mut p = c;
            let mut best = a[c * m + c].abs();
            for r in c + 1..m {
                if a[r * m + c].abs() > best {
                    best = a[r * m + c].abs();
                    p = r;
                }
            }
            if best < 1e-13 {
                return false;
            }
            if p != c {
                for j in 0..m {
                    a.swap(c * m + j, p * m + j);
                    inv.swap(c * m + j, p * m + j);
                }
            }
            let d = a[c * m + c];
            for j in 0..m {
                a[c * m + j] /= d;
                inv[c * m + j] /= d;
            }
            for r in 0..m {
                if r != c {
                    let f = a[r * m + c];
                    if f != 0.0 {
                        for j in 0..m {
                            a[r * m + j] -= f * a[c * m + j];
                            inv[r * m + j] -= f * inv[c * m + j];
                        }
                    }
                }
            }
        }
        self.binv = inv;
        self.recompute_basic_values();
        true
    }

    fn recompute_basic_values(&mut self) {
        let m = self.rows.len();
        let mut r = self.rhs.clone();
        for v in 0..self.num_total() {
            if matches!(self.pos[v], Pos::Basic(_)) || self.val[v] == 0.0 {
                continue;
            }
            let x = self.val[v];
            match self.var(v) {
                Var::Structural(j) => {
                    for i in 0..m {
                        r[i] -= self.rows[i][j] * x;
                    }
                }
                Var::Slack(i) => r[i] -= x,
                Var::Artificial(i) => r[i] += x,
            }
        }
        let apply = |binv: &[f64], r: &[f64]| -> Vec<f64> {
            (0..m)
                .map(|k| {
                    binv[k * m..(k + 1) * m]
                        .iter()
                        .zip(r)
                        .map(|(b, ri)| b * ri)
                        .sum()
                })
                .collect()
        };
        let mut xb = apply(&self.binv, &r);
        let cols: Vec<Vec<f64>> = self.basic.iter().map(|&v| self.column(v)).collect();
        for _ in 0..2 {
            let mut res = r.clone();
            for (col, &x) in cols.iter().zip(&xb) {
                for i in 0..m {
                    res[i] -= col[i] * x;
                }
            }
            if res.iter().all(|&e| e == 0.0) {
                break;
            }
            let d = apply(&self.binv, &res);
            for (x, dx) in xb.iter_mut().zip(d) {
                *x += dx;
            }
        }
        for (k, x) in xb.into_iter().enumerate() {
            let v = self.basic[k];
            self.val[v] = x;
        }
    }

    fn primal_residual(&self) -> f64 {
        let m = self.rows.len();
        let mut worst: f64 = 0.0;
        for i in 0..m {
            let mut act: f64 = (0..self.n).map(|j| self.rows[i][j] * self.val[j]).sum();
            act += self.val[self.n + 2 * i] - self.val[self.n + 2 * i + 1];
            worst = worst.max((act - self.rhs[i]).abs() / (1.0 + self.rhs[i].abs()));
        }
        worst
    }

    fn basic_bound_violation(&self) -> f64 {
        self.basic
            .iter()
            .map(|&v| {
                (self.lo[v] - self.val[v])
                    .max(self.val[v] - self.hi[v])
                    .max(0.0)
            })
            .fold(0.0, f64::max)
    }

    fn phase_cost(&self, phase: &Phase) -> Vec<f64> {
        match phase {
            Phase::Optimality => self.cost.clone(),
            Phase::Feasibility => (0..self.num_total())
                .map(|v| match self.var(v) {
                    Var::Artificial(_) if self.hi[v] > 0.0 => 1.0,
                    _ => 0.0,
                })
                .collect(),
        }
    }

    fn run_phase(&mut self, phase: Phase) -> PhaseEnd {
        let c = self.phase_cost(&phase);
        let m = self.rows.len();
        let mut since_check = 0;
        let mut refactors = 0;
        loop {
            if self.iterations >= self.max_iterations {
                return PhaseEnd::Unstable;
            }
            if since_check >= CHECK_EVERY {
                since_check = 0;
                if self.primal_residual() > 1e-10 {
                    refactors += 1;
                    if refactors > MAX_REFACTOR_ATTEMPTS * 100 || !self.refactor() {
                        return PhaseEnd::Unstable;
                    }
                }
            }
            let y = self.duals(&c);
            let mut entering = None;
            for v in 0..self.num_total() {
                let p = self.pos[v];
                if matches!(p, Pos::Basic(_)) || self.lo[v] == self.hi[v] {
                    continue;
                }
                let d = self.reduced_cost(v, &c, &y);
                let dir = match p {
                    Pos::Lower if d < -DUAL_TOL => 1.0,
                    Pos::Upper if d > DUAL_TOL => -1.0,
                    Pos::Free if d.abs() > DUAL_TOL => -d.signum(),
                    _ => continue,
                };
                entering = Some((v, dir));
                break;
            }
            let Some((q, dir)) = entering else {
                return PhaseEnd::Optimal;
            };
            let alpha = self.binv_times_column(q);
            // (ratio, leaving row or None for a bound flip, leaving variable index)
            let mut best: Option<(f64, Option<usize>, usize)> = None;
            let range = self.hi[q] - self.lo[q];
            if range.is_finite() {
                best = Some((range, None, q));
            }
            let mut min_ratio = range;
            for k in 0..m {
                let a = dir * alpha[k];
                let v = self.basic[k];
                let ratio = if a > PIVOT_TOL && self.lo[v].is_finite() {
                    ((self.val[v] - self.lo[v]) / a).max(0.0)
                } else if a < -PIVOT_TOL && self.hi[v].is_finite() {
                    ((self.hi[v] - self.val[v]) / -a).max(0.0)
                } else {
                    continue;
                };
                min_ratio = min_ratio.min(ratio);
                let better = match best {
                    None => true,
                    Some((r, row, idx)) => {
                        let tie = 1e-12 * r;
                        if ratio < r - tie {
                            true
                        } else if ratio <= r + tie {
                            // Bland: prefer a bound flip, then the lowest variable index
                            row.is_some() && v < idx
                        } else {
                            false
                        }
                    }
                };
                if better {
                    best = Some((ratio, Some(k), v));
                }
            }
            let Some((theta, leave_row, _)) = best else {
                return PhaseEnd::Unbounded;
            };
            // A tie may have picked a slightly larger ratio; never overshoot.
            let theta = theta.min(min_ratio);
            self.iterations += 1;
            since_check += 1;
            self.val[q] += dir * theta;
            for k in 0..m {
                let v = self.basic[k];
                self.val[v] -= dir * theta * alpha[k];
            }
            match leave_row {
                None => {
                    if dir > 0.0 {
                        self.pos[q] = Pos::Upper;
                        self.val[q] = self.hi[q];
                    } else {
                        self.pos[q] = Pos::Lower;
                        self.val[q] = self.lo[q];
                    }
                }
                Some(r) => {
                    let leaving = self.basic[r];
                    let a = dir * alpha[r];
                    if a > 0.0 {
                        self.pos[leaving] = Pos::Lower;
                        self.val[leaving] = self.lo[leaving];
                    } else {
                        self.pos[leaving] = Pos::Upper;
                        self.val[leaving] = self.hi[leaving];
                    }
                    self.basic[r] = q;
                    self.pos[q] = Pos::Basic(r);
                    let piv = alpha[r];
                    for i in 0..m {
                        self.binv[r * m + i] /= piv;
                    }
                    for k in 0..m {
                        if k != r && alpha[k] != 0.0 {
                            let f = alpha[k];
                            for i in 0..m {
                                self.binv[k * m + i] -= f * self.binv[r * m + i];
                            }
                        }
                    }
                }
            }
        }
    }

    fn artificial_total(&self) -> f64 {
        (0..self.rows.len())
            .map(|i| self.val[self.n + 2 * i + 1].max(0.0))
            .sum()
    }

    fn export_basis(&self) -> Option<Basis> {
        let mut basic = Vec::with_capacity(self.basic.len());
        for &v in &self.basic {
            match self.var(v) {
                Var::Structural(j) => basic.push(j),
                Var::Slack(i) => basic.push(self.n + i),
                Var::Artificial(_) => return None,
            }
        }
        let mut at_upper = Vec::new();
        for v in 0..self.num_total() {
            if self.pos[v] == Pos::Upper {
                match self.var(v) {
                    Var::Structural(j) => at_upper.push(j),
                    Var::Slack(i) => at_upper.push(self.n + i),
                    Var::Artificial(_) => {}
                }
            }
        }
        Some(Basis { basic, at_upper })
    }

    pub fn solve(&mut self) -> LpResult {
        let m = self.rows.len();
        let n = self.n;
        if !self.has_basis || self.basic_bound_violation_ignoring_artificials() > FEAS_TOL {
            self.cold_start();
        }
        let mut attempts = 0;
        loop {
            if self.artificial_total() > 0.0 {
                match self.run_phase(Phase::Feasibility) {
                    PhaseEnd::Optimal => {}
                    _ => {
                        return LpResult::without_solution(
                            LpStatus::NumericallyUnstable,
                            n,
                            m,
                            self.iterations,
                        )
                    }
                }
                let scale = 1.0 + self.rhs.iter().fold(0.0_f64, |a, b| a.max(b.abs()));
                if self.artificial_total() > FEAS_TOL * scale {
                    return LpResult::without_solution(LpStatus::Infeasible, n, m, self.iterations);
                }
            }
            for i in 0..m {
                let art = n + 2 * i + 1;
                self.hi[art] = 0.0;
                if !matches!(self.pos[art], Pos::Basic(_)) {
                    self.val[art] = 0.0;
                }
            }
            let end = self.run_phase(Phase::Optimality);
            match end {
                PhaseEnd::Unbounded => {
                    return LpResult::without_solution(LpStatus::Unbounded, n, m, self.iterations)
                }
                PhaseEnd::Unstable => {
                    return LpResult::without_solution(
                        LpStatus::NumericallyUnstable,
                        n,
                        m,
                        self.iterations,
                    )
                }
                PhaseEnd::Optimal => {}
            }
            if self.primal_residual() <= 1e-10 && self.basic_bound_violation() <= ACCEPT_VIOL {
                break;
            }
            attempts += 1;
            if attempts > MAX_REFACTOR_ATTEMPTS || !self.refactor() {
                return LpResult::without_solution(
                    LpStatus::NumericallyUnstable,
                    n,
                    m,
                    self.iterations,
                );
            }
            if self.basic_bound_violation_ignoring_artificials() > ACCEPT_VIOL {
                self.cold_start();
            }
        }
        let x: Vec<f64> = (0..n)
            .map(|j| self.val[j].clamp(self.lo[j], self.hi[j]))
            .collect();
        let objective = x.iter().zip(&self.cost).map(|(a, b)| a * b).sum();
        let duals = self.duals(&self.cost);
        LpResult {
            status: LpStatus::Optimal,
            x,
            objective,
            duals,
            basis: self.export_basis(),
            iterations: self.iterations,
        }
    }

    fn basic_bound_violation_ignoring_artificials(&self) -> f64 {
        self.basic
            .iter()
            .filter(|&&v| !matches!(self.var(v), Var::Artificial(_)))
            .map(|&v| {
                (self.lo[v] - self.val[v])
                    .max(self.val[v] - self.hi[v])
                    .max(0.0)
            })
            .fold(0.0, f64::max)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    const INF: f64 = f64::INFINITY;

    #[test]
    fn box_only() {
        let inst = LpInstance::new(vec![1.0], vec![], vec![], vec![-1.0], vec![1.0]).unwrap();
        let r = solve_lp(&inst, None).unwrap();
        assert_eq!(r.status, LpStatus::Optimal);
        assert_eq!(r.x, vec![-1.0]);
        assert_eq!(r.objective, -1.0);
    }

    #[test]
    fn degenerate_face_follows_bland() {
        let inst = LpInstance::new(
            vec![-1.0, -1.0],
            vec![vec![1.0, 1.0]],
            vec![1.0],
            vec![0.0, 0.0],
            vec![INF, INF],
        )
        .unwrap();
        let r = solve_lp(&inst, None).unwrap();
        assert_eq!(r.status, LpStatus::Optimal);
        assert_eq!(r.objective, -1.0);
        assert_eq!(r.x, vec![1.0, 0.0]);
        assert!((r.duals[0] + 1.0).abs() < 1e-12);
    }

    #[test]
    fn infeasible_rows() {
        // x <= -1 and x >= 0
        let inst =
            LpInstance::new(vec![0.0], vec![vec![1.0]], vec![-1.0], vec![0.0], vec![INF]).unwrap();
        assert_eq!(solve_lp(&inst, None).unwrap().status, LpStatus::Infeasible);
    }

    #[test]
    fn unbounded_ray() {
        let inst = LpInstance::new(
            vec![-1.0],
            vec![vec![-1.0]],
            vec![0.0],
            vec![0.0],
            vec![INF],
        )
        .unwrap();
        assert_eq!(solve_lp(&inst, None).unwrap().status, LpStatus::Unbounded);
    }

    #[test]
    fn free_variables_and_cuts() {
        // min t s.t. t >= x, t >= -x, x in [-2, 3]
        let inst = LpInstance::new(
            vec![0.0, 1.0],
            vec![vec![1.0, -1.0], vec![-1.0, -1.0]],
            vec![0.0, 0.0],
            vec![-2.0, -INF],
            vec![3.0, INF],
        )
        .unwrap();
        let r = solve_lp(&inst, None).unwrap();
        assert_eq!(r.status, LpStatus::Optimal);
        assert!(r.objective.abs() < 1e-12);
        assert!(r.x[0].abs() < 1e-12);
    }

    #[test]
    fn incremental_rows_match_cold_solve() {
        let base = LpInstance::new(
            vec![0.0, 1.0],
            vec![vec![2.0, -1.0]],
            vec![1.0],
            vec![-1.0, -INF],
            vec![1.0, INF],
        )
        .unwrap();
        let mut s = Simplex::new(&base).unwrap();
        let r0 = s.solve();
        assert_eq!(r0.status, LpStatus::Optimal);
        s.add_row(vec![-2.0, -1.0], 1.0).unwrap();
        let warm = s.solve();
        let mut full = base.clone();
        full.rows.push(vec![-2.0, -1.0]);
        full.rhs.push(1.0);
        let cold = solve_lp(&full, None).unwrap();
        assert_eq!(warm.status, LpStatus::Optimal);
        assert!((warm.objective - cold.objective).abs() < 1e-12);
        assert!((warm.objective + 1.0).abs() < 1e-12);
    }

    #[test]
    fn warm_basis_is_reused() {
        let inst = LpInstance::new(
            vec![-1.0, -2.0],
            vec![vec![1.0, 1.0], vec![1.0, -1.0]],
            vec![4.0, 1.0],
            vec![0.0, 0.0],
            vec![3.0, 3.0],
        )
        .unwrap();
        let first = solve_lp(&inst, None).unwrap();
        let again = solve_lp(&inst, first.basis.as_ref()).unwrap();
        assert_eq!(again.status, LpStatus::Optimal);
        assert_eq!(again.iterations, 0);
        assert_eq!(again.x, first.x);
    }

    #[test]
    fn rejects_bad_bounds() {
        assert!(LpInstance::new(vec![0.0], vec![], vec![], vec![1.0], vec![0.0]).is_err());
        assert!(LpInstance::new(
            vec![0.0],
            vec![vec![1.0, 2.0]],
            vec![0.0],
            vec![0.0],
            vec![1.0]
        )
        .is_err());
    }
}
