//! Convex expression DAGs.
//!
//! Every [`ConvexExpr`] is convex by construction: the constructors reject
//! negative scale factors, non-PSD quadratic forms and `abs` of non-affine
//! arguments. Expressions are immutable and share children through `Arc`, so
//! cloning is cheap and evaluation is safe from multiple threads.
//!
//! Besides exact values and subgradients, every expression carries a
//! μ-parameterized smoothing: each plus-part `(t)+` is replaced by the neural
//! kernel `μ ln(1 + exp(t/μ))`, `max(a, b)` is read as `a + (b - a)+` and
//! `|t|` as `(t)+ + (-t)+`. The smoothed expression stays convex, is
//! nondecreasing in μ and exceeds the exact value by at most
//! [`ConvexExpr::kappa_bound`]` * μ`.

use std::f64::consts::LN_2;
use std::sync::Arc;

use nalgebra::{DMatrix, SymmetricEigen};

use crate::error::{check_dim, Error, Result};

/// Smallest eigenvalue accepted for the matrix of a quadratic node.
pub const PSD_FLOOR: f64 = -1e-10;

/// Smoothing kernels for the plus function.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum SmoothingKernel {
    /// `μ ln(1 + exp(t/μ))`, the Chen–Mangasarian function of the logistic density.
    #[default]
    Neural,
}

impl SmoothingKernel {
    /// Lipschitz constant in μ of the smoothed plus function.
    pub fn kappa(self) -> f64 {
        match self {
            SmoothingKernel::Neural => LN_2,
        }
    }

    /// Smoothed plus function; `mu == 0` gives `max(t, 0)`.
    pub fn plus(self, t: f64, mu: f64) -> f64 {
        match self {
            SmoothingKernel::Neural => {
                if mu == 0.0 {
                    t.max(0.0)
                } else {
                    t.max(0.0) + mu * (-t.abs() / mu).exp().ln_1p()
                }
            }
        }
    }

    /// Derivative of [`SmoothingKernel::plus`] in `t` for `mu > 0`.
    pub fn plus_derivative(self, t: f64, mu: f64) -> f64 {
        match self {
            SmoothingKernel::Neural => sigmoid(t / mu),
        }
    }
}

/// Logistic function, evaluated without overflow.
pub fn sigmoid(s: f64) -> f64 {
    if s >= 0.0 {
        1.0 / (1.0 + (-s).exp())
    } else {
        let e = s.exp();
        e / (1.0 + e)
    }
}

/// Smoothing summary of an expression.
#[derive(Debug, Clone, PartialEq)]
pub struct SmoothSpec {
    pub kernel: SmoothingKernel,
    /// One entry per smoothed plus-node (an `abs` node counts as two), each the
    /// accumulated nonnegative scale times the kernel κ.
    pub contributions: Vec<f64>,
    pub kappa: f64,
}

/// Expression node. Built only through the [`ConvexExpr`] constructors.
#[derive(Debug, Clone)]
pub enum Node {
    Constant(f64),
    /// `coef · x + offset`
    Affine {
        coef: Vec<f64>,
        offset: f64,
    },
    /// `½ xᵀ Q x` with `Q` symmetric PSD.
    Quadratic {
        q: DMatrix<f64>,
        min_eigenvalue: f64,
    },
    /// `(arg)+`
    Plus(ConvexExpr),
    /// `|arg|`, arg affine.
    Abs(ConvexExpr),
    Max(ConvexExpr, ConvexExpr),
    Sum(Vec<ConvexExpr>),
    /// `alpha * arg`, alpha ≥ 0.
    Scale(f64, ConvexExpr),
    /// `inner(M x + offset)`
    Compose {
        matrix: DMatrix<f64>,
        offset: Vec<f64>,
        inner: ConvexExpr,
        gram_min_eigenvalue: f64,
    },
    /// `rho ‖x‖² / 2`
    SquaredNorm(f64),
}

/// A closed proper convex function `ℝⁿ → ℝ` represented as an expression DAG.
#[derive(Debug, Clone)]
pub struct ConvexExpr {
    dim: usize,
    node: Arc<Node>,
}

fn finite(v: f64, what: &str) -> Result<()> {
    if v.is_finite() {
        Ok(())
    } else {
        Err(Error::InvalidArgument(format!(
            "{what} must be finite, got {v}"
        )))
    }
}

impl ConvexExpr {
    fn from_node(dim: usize, node: Node) -> Self {
        ConvexExpr {
            dim,
            node: Arc::new(node),
        }
    }

    pub fn constant(dim: usize, value: f64) -> Result<Self> {
        finite(value, "constant")?;
        Ok(Self::from_node(dim, Node::Constant(value)))
    }

    pub fn zero(dim: usize) -> Self {
        Self::from_node(dim, Node::Constant(0.0))
    }

    pub fn affine(coef: Vec<f64>, offset: f64) -> Result<Self> {
        for &c in &coef {
            finite(c, "affine coefficient")?;
        }
        finite(offset, "affine offset")?;
        Ok(Self::from_node(coef.len(), Node::Affine { coef, offset }))
    }

    pub fn linear(coef: Vec<f64>) -> Result<Self> {
        Self::affine(coef, 0.0)
    }

    /// `½ xᵀ Q x`. Rejects asymmetric or non-PSD `Q`.
    pub fn quadratic(q: DMatrix<f64>) -> Result<Self> {
        if q.nrows() != q.ncols() {
            return Err(Error::InvalidArgument(format!(
                "quadratic matrix must be square, got {}x{}",
                q.nrows(),
                q.ncols()
            )));
        }
        let scale = q.iter().fold(1.0_f64, |m, v| m.max(v.abs()));
        for v in q.iter() {
            finite(*v, "quadratic entry")?;
        }
        if (&q - q.transpose()).amax() > 1e-12 * scale {
            return Err(Error::NotConvex("quadratic matrix is not symmetric".into()));
        }
        let min_eigenvalue = min_eigenvalue(&q);
        if min_eigenvalue < PSD_FLOOR {
            return Err(Error::NotConvex(format!(
                "quadratic matrix is not positive semidefinite (min eigenvalue {min_eigenvalue:e})"
            )));
        }
        Ok(Self::from_node(
            q.nrows(),
            Node::Quadratic { q, min_eigenvalue },
        ))
    }

    /// `rho ‖x‖² / 2`.
    pub fn squared_norm(dim: usize, rho: f64) -> Result<Self> {
        finite(rho, "squared-norm weight")?;
        if rho < 0.0 {
            return Err(Error::NotConvex(format!("squared-norm weight {rho} < 0")));
        }
        Ok(Self::from_node(dim, Node::SquaredNorm(rho)))
    }

    pub fn plus(arg: ConvexExpr) -> Self {
        Self::from_node(arg.dim, Node::Plus(arg))
    }

    pub fn abs(arg: ConvexExpr) -> Result<Self> {
        if !arg.is_affine() {
            return Err(Error::NotConvex("abs requires an affine argument".into()));
        }
        Ok(Self::from_node(arg.dim, Node::Abs(arg)))
    }

    pub fn max(a: ConvexExpr, b: ConvexExpr) -> Result<Self> {
        check_dim(a.dim, b.dim)?;
        Ok(Self::from_node(a.dim, Node::Max(a, b)))
    }

    pub fn sum(terms: Vec<ConvexExpr>) -> Result<Self> {
        let dim = terms
            .first()
            .map(|t| t.dim)
            .ok_or_else(|| Error::InvalidArgument("sum needs at least one term".into()))?;
        for t in &terms {
            check_dim(dim, t.dim)?;
        }
        Ok(Self::from_node(dim, Node::Sum(terms)))
    }

    pub fn scale(alpha: f64, arg: ConvexExpr) -> Result<Self> {
        finite(alpha, "scale factor")?;
        if alpha < 0.0 {
            return Err(Error::NotConvex(format!("negative scale factor {alpha}")));
        }
        Ok(Self::from_node(arg.dim, Node::Scale(alpha, arg)))
    }

    /// `inner(M x + offset)`; the result has dimension `M.ncols()`.
    pub fn compose(matrix: DMatrix<f64>, offset: Vec<f64>, inner: ConvexExpr) -> Result<Self> {
        check_dim(inner.dim, matrix.nrows())?;
        check_dim(matrix.nrows(), offset.len())?;
        for v in matrix.iter().chain(offset.iter()) {
            finite(*v, "compose entry")?;
        }
        let gram = matrix.transpose() * &matrix;
        let gram_min_eigenvalue = if matrix.ncols() == 0 {
            0.0
        } else {
            min_eigenvalue(&gram).max(0.0)
        };
        Ok(Self::from_node(
            matrix.ncols(),
            Node::Compose {
                matrix,
                offset,
                inner,
                gram_min_eigenvalue,
            },
        ))
    }

    /// `self + other`.
    pub fn add(&self, other: &ConvexExpr) -> Result<Self> {
        Self::sum(vec![self.clone(), other.clone()])
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn node(&self) -> &Node {
        &self.node
    }

    /// True when the expression is affine (constant, affine, and sums, scales
    /// or compositions thereof).
    pub fn is_affine(&self) -> bool {
        match &*self.node {
            Node::Constant(_) | Node::Affine { .. } => true,
            Node::Sum(ts) => ts.iter().all(|t| t.is_affine()),
            Node::Scale(_, a) => a.is_affine(),
            Node::Compose { inner, .. } => inner.is_affine(),
            Node::SquaredNorm(rho) => *rho == 0.0,
            Node::Quadratic { q, .. } => q.iter().all(|v| *v == 0.0),
            Node::Plus(_) | Node::Abs(_) | Node::Max(..) => false,
        }
    }

    /// True when the expression contains a plus, abs or max node.
    pub fn has_nonsmooth(&self) -> bool {
        match &*self.node {
            Node::Plus(_) | Node::Abs(_) | Node::Max(..) => true,
            Node::Sum(ts) => ts.iter().any(|t| t.has_nonsmooth()),
            Node::Scale(_, a) => a.has_nonsmooth(),
            Node::Compose { inner, .. } => inner.has_nonsmooth(),
            _ => false,
        }
    }

    pub fn evaluate(&self, x: &[f64]) -> Result<f64> {
        check_dim(self.dim, x.len())?;
        Ok(self.value(x))
    }

    /// A subgradient at `x`. At kinks `max` takes the first child attaining
    /// the maximum and `(t)+`, `|t|` take slope 0.
    pub fn subgradient(&self, x: &[f64]) -> Result<Vec<f64>> {
        check_dim(self.dim, x.len())?;
        Ok(self.value_subgradient(x).1)
    }

    pub fn smoothed_evaluate(&self, x: &[f64], mu: f64) -> Result<f64> {
        check_dim(self.dim, x.len())?;
        check_mu(mu)?;
        if mu == 0.0 {
            Ok(self.value(x))
        } else {
            Ok(self.smooth_value(x, mu))
        }
    }

    pub fn smoothed_gradient(&self, x: &[f64], mu: f64) -> Result<Vec<f64>> {
        check_dim(self.dim, x.len())?;
        if !(mu > 0.0) || !mu.is_finite() {
            return Err(Error::InvalidArgument(format!(
                "smoothed gradient needs mu > 0, got {mu}"
            )));
        }
        Ok(self.smooth_value_gradient(x, mu).1)
    }

    /// Value and (sub)gradient of the smoothed expression. `mu == 0` falls
    /// back to the exact value and the tie-rule subgradient.
    pub fn value_and_slope(&self, x: &[f64], mu: f64) -> Result<(f64, Vec<f64>)> {
        check_dim(self.dim, x.len())?;
        check_mu(mu)?;
        if mu == 0.0 {
            Ok(self.value_subgradient(x))
        } else {
            Ok(self.smooth_value_gradient(x, mu))
        }
    }

    pub fn smooth_spec(&self) -> SmoothSpec {
        let kernel = SmoothingKernel::Neural;
        let mut contributions = Vec::new();
        self.collect_kappa(1.0, kernel.kappa(), &mut contributions);
        let kappa = contributions.iter().fold(0.0, |a, b| a + b);
        SmoothSpec {
            kernel,
            contributions,
            kappa,
        }
    }

    /// κ with `0 ≤ G(x, μ₂) − G(x, μ₁) ≤ κ (μ₂ − μ₁)` for every `x` and `0 ≤ μ₁ ≤ μ₂`.
    pub fn kappa_bound(&self) -> f64 {
        self.smooth_spec().kappa
    }

    /// Certified lower bound on the strong convexity modulus; valid for the
    /// exact expression and for every smoothing of it.
    pub fn strong_convexity_modulus(&self) -> f64 {
        match &*self.node {
            Node::Constant(_) | Node::Affine { .. } => 0.0,
            Node::Quadratic { min_eigenvalue, .. } => min_eigenvalue.max(0.0),
            Node::SquaredNorm(rho) => *rho,
            Node::Plus(_) | Node::Abs(_) => 0.0,
            Node::Max(a, b) => a
                .strong_convexity_modulus()
                .min(b.strong_convexity_modulus()),
            Node::Sum(ts) => ts.iter().map(|t| t.strong_convexity_modulus()).sum(),
            Node::Scale(alpha, a) => alpha * a.strong_convexity_modulus(),
            Node::Compose {
                inner,
                gram_min_eigenvalue,
                ..
            } => inner.strong_convexity_modulus() * gram_min_eigenvalue,
        }
    }

    fn collect_kappa(&self, acc: f64, kernel_kappa: f64, out: &mut Vec<f64>) {
        match &*self.node {
            Node::Plus(a) => {
                out.push(acc * kernel_kappa);
                a.collect_kappa(acc, kernel_kappa, out);
            }
            Node::Abs(a) => {
                out.push(acc * kernel_kappa);
                out.push(acc * kernel_kappa);
                a.collect_kappa(acc, kernel_kappa, out);
            }
            Node::Max(a, b) => {
                out.push(acc * kernel_kappa);
                a.collect_kappa(acc, kernel_kappa, out);
                b.collect_kappa(acc, kernel_kappa, out);
            }
            Node::Sum(ts) => {
                for t in ts {
                    t.collect_kappa(acc, kernel_kappa, out);
                }
            }
            Node::Scale(alpha, a) => a.collect_kappa(acc * alpha, kernel_kappa, out),
            Node::Compose { inner, .. } => inner.collect_kappa(acc, kernel_kappa, out),
            Node::Constant(_)
            | Node::Affine { .. }
            | Node::Quadratic { .. }
            | Node::SquaredNorm(_) => {}
        }
    }

    pub(crate) fn value(&self, x: &[f64]) -> f64 {
        match &*self.node {
            Node::Constant(c) => *c,
            Node::Affine { coef, offset } => dot(coef, x) + offset,
            Node::Quadratic { q, .. } => 0.5 * quad_form(q, x),
            Node::SquaredNorm(rho) => 0.5 * rho * dot(x, x),
            Node::Plus(a) => a.value(x).max(0.0),
            Node::Abs(a) => a.value(x).abs(),
            Node::Max(a, b) => a.value(x).max(b.value(x)),
            Node::Sum(ts) => ts.iter().map(|t| t.value(x)).sum(),
            Node::Scale(alpha, a) => alpha * a.value(x),
            Node::Compose {
                matrix,
                offset,
                inner,
                ..
            } => inner.value(&apply_affine(matrix, offset, x)),
        }
    }

    pub(crate) fn value_subgradient(&self, x: &[f64]) -> (f64, Vec<f64>) {
        match &*self.node {
            Node::Constant(c) => (*c, vec![0.0; self.dim]),
            Node::Affine { coef, offset } => (dot(coef, x) + offset, coef.clone()),
            Node::Quadratic { q, .. } => {
                let g = mat_vec(q, x);
                (0.5 * dot(&g, x), g)
            }
            Node::SquaredNorm(rho) => (0.5 * rho * dot(x, x), x.iter().map(|v| rho * v).collect()),
            Node::Plus(a) => {
                let (v, g) = a.value_subgradient(x);
                if v > 0.0 {
                    (v, g)
                } else {
                    (0.0, vec![0.0; self.dim])
                }
            }
            Node::Abs(a) => {
                let (v, mut g) = a.value_subgradient(x);
                if v > 0.0 {
                    (v, g)
                } else if v < 0.0 {
                    g.iter_mut().for_each(|s| *s = -*s);
                    (-v, g)
                } else {
                    (0.0, vec![0.0; self.dim])
                }
            }
            Node::Max(a, b) => {
                let (va, ga) = a.value_subgradient(x);
                let (vb, gb) = b.value_subgradient(x);
                if va >= vb {
                    (va, ga)
                } else {
                    (vb, gb)
                }
            }
            Node::Sum(ts) => {
                let mut total = 0.0;
                let mut grad = vec![0.0; self.dim];
                for t in ts {
                    let (v, g) = t.value_subgradient(x);
                    total += v;
                    axpy(1.0, &g, &mut grad);
                }
                (total, grad)
            }
            Node::Scale(alpha, a) => {
                let (v, g) = a.value_subgradient(x);
                (alpha * v, g.into_iter().map(|s| alpha * s).collect())
            }
            Node::Compose {
                matrix,
                offset,
                inner,
                ..
            } => {
                let (v, g) = inner.value_subgradient(&apply_affine(matrix, offset, x));
                (v, mat_t_vec(matrix, &g))
            }
        }
    }

    fn smooth_value(&self, x: &[f64], mu: f64) -> f64 {
        let k = SmoothingKernel::Neural;
        match &*self.node {
            Node::Plus(a) => k.plus(a.smooth_value(x, mu), mu),
            Node::Abs(a) => {
                let t = a.value(x);
                k.plus(t, mu) + k.plus(-t, mu)
            }
            Node::Max(a, b) => {
                let va = a.smooth_value(x, mu);
                let vb = b.smooth_value(x, mu);
                va + k.plus(vb - va, mu)
            }
            Node::Sum(ts) => ts.iter().map(|t| t.smooth_value(x, mu)).sum(),
            Node::Scale(alpha, a) => alpha * a.smooth_value(x, mu),
            Node::Compose {
                matrix,
                offset,
                inner,
                ..
            } => inner.smooth_value(&apply_affine(matrix, offset, x), mu),
            _ => self.value(x),
        }
    }

    fn smooth_value_gradient(&self, x: &[f64], mu: f64) -> (f64, Vec<f64>) {
        let k = SmoothingKernel::Neural;
        match &*self.node {
            Node::Plus(a) => {
                let (v, g) = a.smooth_value_gradient(x, mu);
                let w = k.plus_derivative(v, mu);
                (k.plus(v, mu), g.into_iter().map(|s| w * s).collect())
            }
            Node::Abs(a) => {
                let (t, g) = a.value_subgradient(x);
                let w = k.plus_derivative(t, mu) - k.plus_derivative(-t, mu);
                (
                    k.plus(t, mu) + k.plus(-t, mu),
                    g.into_iter().map(|s| w * s).collect(),
                )
            }
            Node::Max(a, b) => {
                let (va, ga) = a.smooth_value_gradient(x, mu);
                let (vb, gb) = b.smooth_value_gradient(x, mu);
                let d = vb - va;
                let wb = k.plus_derivative(d, mu);
                let wa = k.plus_derivative(-d, mu);
                let grad = ga.iter().zip(&gb).map(|(p, q)| wa * p + wb * q).collect();
                (va + k.plus(d, mu), grad)
            }
            Node::Sum(ts) => {
                let mut total = 0.0;
                let mut grad = vec![0.0; self.dim];
                for t in ts {
                    let (v, g) = t.smooth_value_gradient(x, mu);
                    total += v;
                    axpy(1.0, &g, &mut grad);
                }
                (total, grad)
            }
            Node::Scale(alpha, a) => {
                let (v, g) = a.smooth_value_gradient(x, mu);
                (alpha * v, g.into_iter().map(|s| alpha * s).collect())
            }
            Node::Compose {
                matrix,
                offset,
                inner,
                ..
            } => {
                let (v, g) = inner.smooth_value_gradient(&apply_affine(matrix, offset, x), mu);
                (v, mat_t_vec(matrix, &g))
            }
            _ => self.value_subgradient(x),
        }
    }
}

fn check_mu(mu: f64) -> Result<()> {
    if mu >= 0.0 && mu.is_finite() {
        Ok(())
    } else {
        Err(Error::InvalidArgument(format!(
            "smoothing parameter must be finite and >= 0, got {mu}"
        )))
    }
}

fn min_eigenvalue(m: &DMatrix<f64>) -> f64 {
    if m.nrows() == 0 {
        return 0.0;
    }
    SymmetricEigen::new(m.clone())
        .eigenvalues
        .iter()
        .cloned()
        .fold(f64::INFINITY, f64::min)
}

pub(crate) fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(p, q)| p * q).sum()
}

fn axpy(alpha: f64, x: &[f64], y: &mut [f64]) {
    for (yi, xi) in y.iter_mut().zip(x) {
        *yi += alpha * xi;
    }
}

fn mat_vec(m: &DMatrix<f64>, x: &[f64]) -> Vec<f64> {
    (0..m.nrows())
        .map(|i| (0..m.ncols()).map(|j| m[(i, j)] * x[j]).sum())
        .collect()
}

fn mat_t_vec(m: &DMatrix<f64>, y: &[f64]) -> Vec<f64> {
    (0..m.ncols())
        .map(|j| (0..m.nrows()).map(|i| m[(i, j)] * y[i]).sum())
        .collect()
}

fn quad_form(q: &DMatrix<f64>, x: &[f64]) -> f64 {
    dot(&mat_vec(q, x), x)
}

fn apply_affine(m: &DMatrix<f64>, offset: &[f64], x: &[f64]) -> Vec<f64> {
    let mut z = mat_vec(m, x);
    axpy(1.0, offset, &mut z);
    z
}
