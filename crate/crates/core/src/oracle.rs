//! Brute-force and geometric reference computations: enumeration, 1-D convex
//! closures, discrete Legendre transforms, and value checks built on them.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::problem::{MidcProblem, FEAS_TOL};

/// Samples `(x_i, φ(x_i))` on strictly increasing abscissae; `+∞` marks points
/// outside the domain.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GridFunction {
    xs: Vec<f64>,
    values: Vec<f64>,
}

impl GridFunction {
    pub fn new(xs: Vec<f64>, values: Vec<f64>) -> Result<Self> {
        if xs.len() != values.len() {
            return Err(Error::DimensionMismatch {
                expected: xs.len(),
                got: values.len(),
            });
        }
        if xs.iter().any(|x| !x.is_finite()) || xs.windows(2).any(|w| w[0] >= w[1]) {
            return Err(Error::InvalidArgument(
                "abscissae must be finite and strictly increasing".into(),
            ));
        }
        if values.iter().any(|v| v.is_nan() || *v == f64::NEG_INFINITY) {
            return Err(Error::InvalidArgument("values must be real or +inf".into()));
        }
        if !values.iter().any(|v| v.is_finite()) {
            return Err(Error::InvalidArgument(
                "grid function has no finite value".into(),
            ));
        }
        Ok(GridFunction { xs, values })
    }

    pub fn sample(xs: Vec<f64>, f: impl Fn(f64) -> f64) -> Result<Self> {
        let values = xs.iter().map(|&x| f(x)).collect();
        GridFunction::new(xs, values)
    }

    /// `n + 1` equally spaced points on `[a, b]`.
    pub fn uniform(a: f64, b: f64, n: usize, f: impl Fn(f64) -> f64) -> Result<Self> {
        GridFunction::sample(linspace(a, b, n), f)
    }

    pub fn xs(&self) -> &[f64] {
        &self.xs
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn len(&self) -> usize {
        self.xs.len()
    }

    pub fn is_empty(&self) -> bool {
        self.xs.is_empty()
    }

    /// Smallest value and the first abscissa attaining it.
    pub fn min(&self) -> (f64, f64) {
        let mut best = (f64::INFINITY, f64::NAN);
        for (&x, &v) in self.xs.iter().zip(&self.values) {
            if v < best.0 {
                best = (v, x);
            }
        }
        best
    }
}

pub fn linspace(a: f64, b: f64, n: usize) -> Vec<f64> {
    if n == 0 {
        return vec![a];
    }
    (0..=n)
        .map(|i| {
            if i == n {
                b
            } else {
                a + (b - a) * i as f64 / n as f64
            }
        })
        .collect()
}

/// Continuous piecewise-linear function on `[xs[0], xs[last]]`, `+∞` outside.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PiecewiseLinear {
    xs: Vec<f64>,
    ys: Vec<f64>,
}

impl PiecewiseLinear {
    pub fn vertices(&self) -> impl Iterator<Item = (f64, f64)> + '_ {
        self.xs.iter().copied().zip(self.ys.iter().copied())
    }

    pub fn breakpoints(&self) -> &[f64] {
        &self.xs
    }

    pub fn slopes(&self) -> Vec<f64> {
        self.xs
            .windows(2)
            .zip(self.ys.windows(2))
            .map(|(x, y)| (y[1] - y[0]) / (x[1] - x[0]))
            .collect()
    }

    pub fn evaluate(&self, x: f64) -> f64 {
        let n = self.xs.len();
        if x < self.xs[0] || x > self.xs[n - 1] || x.is_nan() {
            return f64::INFINITY;
        }
        let j = self.xs.partition_point(|&v| v <= x);
        if j == 0 {
            return self.ys[0];
        }
        if j == n {
            return self.ys[n - 1];
        }
        let (x0, x1) = (self.xs[j - 1], self.xs[j]);
        let t = (x - x0) / (x1 - x0);
        self.ys[j - 1] + t * (self.ys[j] - self.ys[j - 1])
    }
}

/// Lower convex envelope of the finite samples of `phi`.
pub fn convex_closure_1d(phi: &GridFunction) -> Result<PiecewiseLinear> {
    let mut xs: Vec<f64> = Vec::new();
    let mut ys: Vec<f64> = Vec::new();
    for (&x, &y) in phi.xs.iter().zip(&phi.values) {
        if !y.is_finite() {
            continue;
        }
        while xs.len() >= 2 {
            let k = xs.len();
            let (ax, ay, bx, by) = (xs[k - 2], ys[k - 2], xs[k - 1], ys[k - 1]);
            // Drop b unless it lies strictly below the chord from a to (x, y).
            if (by - ay) * (x - ax) >= (y - ay) * (bx - ax) {
                xs.pop();
                ys.pop();
            } else {
                break;
            }
        }
        xs.push(x);
        ys.push(y);
    }
    if xs.is_empty() {
        return Err(Error::InvalidArgument(
            "grid function has no finite value".into(),
        ));
    }
    Ok(PiecewiseLinear { xs, ys })
}

/// `φ*(y) = max_i (y·x_i − φ(x_i))` on a strictly increasing slope grid.
pub fn legendre_transform_1d(phi: &GridFunction, slopes: &[f64]) -> Result<GridFunction> {
    if slopes.is_empty() {
        return Err(Error::InvalidArgument("slope grid is empty".into()));
    }
    let hull = convex_closure_1d(phi)?;
    let seg = hull.slopes();
    let mut values = Vec::with_capacity(slopes.len());
    let mut j = 0;
    for (idx, &y) in slopes.iter().enumerate() {
        if idx > 0 && slopes[idx - 1] >= y {
            return Err(Error::InvalidArgument(
                "slope grid must be strictly increasing".into(),
            ));
        }
        while j < seg.len() && seg[j] < y {
            j += 1;
        }
        values.push(y * hull.xs[j] - hull.ys[j]);
    }
    GridFunction::new(slopes.to_vec(), values)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TolandReport {
    pub primal: f64,
    pub dual: f64,
    pub gap: f64,
    pub slopes: usize,
}

/// Compares `inf (g − h)` over the grid with `inf (h* − g*)` over a slope
/// grid containing the segment slopes of both closures plus `extra_slopes`.
pub fn check_toland_singer_1d(
    g: &GridFunction,
    h: &GridFunction,
    extra_slopes: &[f64],
) -> Result<TolandReport> {
    if g.xs != h.xs {
        return Err(Error::InvalidArgument(
            "g and h must share the abscissae".into(),
        ));
    }
    if h.values.iter().any(|v| !v.is_finite()) {
        return Err(Error::InvalidArgument(
            "h must be finite on the grid".into(),
        ));
    }
    let primal = g
        .values
        .iter()
        .zip(&h.values)
        .map(|(a, b)| a - b)
        .fold(f64::INFINITY, f64::min);
    let mut slopes: Vec<f64> = convex_closure_1d(g)?.slopes();
    slopes.extend(convex_closure_1d(h)?.slopes());
    slopes.extend(extra_slopes.iter().copied().filter(|s| s.is_finite()));
    slopes.sort_by(f64::total_cmp);
    slopes.dedup();
    let gs = legendre_transform_1d(g, &slopes)?;
    let hs = legendre_transform_1d(h, &slopes)?;
    let dual = hs
        .values
        .iter()
        .zip(&gs.values)
        .map(|(a, b)| a - b)
        .fold(f64::INFINITY, f64::min);
    Ok(TolandReport {
        primal,
        dual,
        gap: (primal - dual).abs(),
        slopes: slopes.len(),
    })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct NoGapReport {
    /// `min g − h` over the integer points of `S`.
    pub v_discrete: f64,
    pub argmin_discrete: f64,
    /// `min cl(g̃) − h` over the fine grid.
    pub v_relax: f64,
    pub argmin_relax: f64,
    /// `min g − h` over the continuous relaxation of `S`.
    pub v_naive: f64,
    pub gap: f64,
    pub naive_gap: f64,
    pub tol: f64,
    pub passed: bool,
}

/// Compares the integer optimum of a 1-D pure-integer problem with the
/// optimum of its convex-closure relaxation.
pub fn check_no_gap(p: &MidcProblem, grid_step: f64) -> Result<NoGapReport> {
    if p.dim() != 1 || p.integers() != [0] {
        return Err(Error::InvalidArgument(
            "check_no_gap needs a 1-D pure-integer problem".into(),
        ));
    }
    if !(grid_step > 0.0 && grid_step <= 1.0) {
        return Err(Error::InvalidArgument(
            "grid_step must lie in (0, 1]".into(),
        ));
    }
    let s = p.feasible_set();
    let (lo, hi) = (s.lower()[0].ceil(), s.upper()[0].floor());
    let count = hi - lo + 1.0;
    let per_cell = (1.0 / grid_step).round() as usize;
    if count < 1.0 {
        return Err(Error::Infeasible("no integer point in the box".into()));
    }
    if count * per_cell as f64 > 1e7 {
        return Err(Error::Budget("grid exceeds 1e7 points".into()));
    }
    let inside = |x: f64| s.contains(&[x], FEAS_TOL);
    let g = |x: f64| p.g().evaluate(&[x]).expect("1-D expression");
    let h = |x: f64| p.h().evaluate(&[x]).expect("1-D expression");
    let ints: Vec<f64> = (0..count as usize).map(|k| lo + k as f64).collect();
    let g_tilde = GridFunction::sample(
        ints.clone(),
        |z| if inside(z) { g(z) } else { f64::INFINITY },
    )
    .map_err(|_| Error::Infeasible("no integer point of S".into()))?;
    let closure = convex_closure_1d(&g_tilde)?;

    let mut v_discrete = f64::INFINITY;
    let mut argmin_discrete = f64::NAN;
    for (&z, &gz) in ints.iter().zip(&g_tilde.values) {
        let v = gz - h(z);
        if v < v_discrete {
            v_discrete = v;
            argmin_discrete = z;
        }
    }

    let fine: Vec<f64> = ints
        .iter()
        .flat_map(|&k| {
            let n = if k == hi { 1 } else { per_cell };
            (0..n).map(move |j| k + j as f64 / per_cell as f64)
        })
        .collect();
    let mut v_relax = f64::INFINITY;
    let mut argmin_relax = f64::NAN;
    let mut v_naive = f64::INFINITY;
    for &x in &fine {
        let hx = h(x);
        let c = closure.evaluate(x);
        if c.is_finite() && c - hx < v_relax {
            v_relax = c - hx;
            argmin_relax = x;
        }
        if inside(x) {
            v_naive = v_naive.min(g(x) - hx);
        }
    }
    let tol = 1e-6 + grid_step * grid_step;
    let gap = (v_discrete - v_relax).abs();
    Ok(NoGapReport {
        v_discrete,
        argmin_discrete,
        v_relax,
        argmin_relax,
        v_naive,
        gap,
        naive_gap: v_discrete - v_naive,
        tol,
        passed: gap <= tol,
    })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BruteForce {
    pub value: f64,
    pub x: Vec<f64>,
    pub points: usize,
}

/// Exhaustive minimum of `g − h` over `S`. Integer coordinates are enumerated;
/// at most two continuous coordinates are scanned on a grid and refined by
/// coordinate-wise golden-section search. Among values within `tie_tol` of
/// the minimum the lexicographically smallest point is returned.
pub fn brute_force_min(p: &MidcProblem, grid_step: f64, tie_tol: f64) -> Result<BruteForce> {
    let s = p.feasible_set();
    let n = p.dim();
    if (0..n).any(|i| !s.lower()[i].is_finite() || !s.upper()[i].is_finite()) {
        return Err(Error::InvalidArgument(
            "brute force needs every variable boxed".into(),
        ));
    }
    let cont = p.continuous();
    if cont.len() > 2 {
        return Err(Error::InvalidArgument(
            "brute force supports at most two continuous variables".into(),
        ));
    }
    if !(grid_step > 0.0) {
        return Err(Error::InvalidArgument("grid_step must be > 0".into()));
    }
    let int_axes: Vec<Vec<f64>> = p
        .integers()
        .iter()
        .map(|&i| {
            let (a, b) = (s.lower()[i].ceil(), s.upper()[i].floor());
            if a > b {
                Vec::new()
            } else {
                (0..=(b - a) as usize).map(|k| a + k as f64).collect()
            }
        })
        .collect();
    let cont_axes: Vec<Vec<f64>> = cont
        .iter()
        .map(|&i| {
            let (a, b) = (s.lower()[i], s.upper()[i]);
            let steps = ((b - a) / grid_step).ceil().max(0.0) as usize;
            linspace(a, b, steps)
        })
        .collect();
    let total = int_axes
        .iter()
        .chain(&cont_axes)
        .map(|a| a.len() as f64)
        .product::<f64>();
    if total > 1e7 {
        return Err(Error::Budget(format!("enumeration needs {total:e} points")));
    }
    let objective = |x: &[f64]| -> f64 {
        if s.contains(x, FEAS_TOL) {
            p.objective(x).expect("dimension fixed")
        } else {
            f64::INFINITY
        }
    };
    let mut candidates: Vec<(Vec<f64>, f64)> = Vec::new();
    let mut points = 0;
    for z in product(&int_axes) {
        let mut x = vec![0.0; n];
        for (&i, &v) in p.integers().iter().zip(&z) {
            x[i] = v;
        }
        let mut best: Option<(Vec<f64>, f64)> = None;
        for c in product(&cont_axes) {
            for (&i, &v) in cont.iter().zip(&c) {
                x[i] = v;
            }
            points += 1;
            let v = objective(&x);
            if v.is_finite() && best.as_ref().is_none_or(|b| v < b.1) {
                best = Some((x.clone(), v));
            }
        }
        let Some((mut bx, mut bv)) = best else {
            continue;
        };
        for _ in 0..3 {
            for &i in &cont {
                let a = (bx[i] - grid_step).max(s.lower()[i]);
                let b = (bx[i] + grid_step).min(s.upper()[i]);
                let mut probe = bx.clone();
                let t = golden_section(a, b, |t| {
                    probe[i] = t;
                    objective(&probe)
                });
                probe[i] = t;
                let v = objective(&probe);
                if v < bv {
                    bv = v;
                    bx = probe;
                }
            }
        }
        candidates.push((bx, bv));
    }
    let best = candidates.iter().map(|c| c.1).fold(f64::INFINITY, f64::min);
    let (x, value) = candidates
        .into_iter()
        .filter(|c| c.1 <= best + tie_tol)
        .min_by(|a, b| lex(&a.0, &b.0))
        .ok_or_else(|| Error::Infeasible("no feasible grid point".into()))?;
    Ok(BruteForce { value, x, points })
}

fn lex(a: &[f64], b: &[f64]) -> std::cmp::Ordering {
    a.iter()
        .zip(b)
        .map(|(p, q)| p.total_cmp(q))
        .find(|o| o.is_ne())
        .unwrap_or(std::cmp::Ordering::Equal)
}

fn product(axes: &[Vec<f64>]) -> Vec<Vec<f64>> {
    let mut out = vec![Vec::new()];
    for axis in axes {
        out = out
            .into_iter()
            .flat_map(|prefix| {
                axis.iter().map(move |&v| {
                    let mut p = prefix.clone();
                    p.push(v);
                    p
                })
            })
            .collect();
    }
    out
}

fn golden_section(mut a: f64, mut b: f64, mut f: impl FnMut(f64) -> f64) -> f64 {
    let r = (5f64.sqrt() - 1.0) / 2.0;
    let mut c = b - r * (b - a);
    let mut d = a + r * (b - a);
    let (mut fc, mut fd) = (f(c), f(d));
    for _ in 0..80 {
        if b - a <= 1e-12 * (1.0 + a.abs()) {
            break;
        }
        if fc <= fd {
            b = d;
            d = c;
            fd = fc;
            c = b - r * (b - a);
            fc = f(c);
        } else {
            a = c;
            c = d;
            fc = fd;
            d = a + r * (b - a);
            fd = f(d);
        }
    }
    0.5 * (a + b)
}
