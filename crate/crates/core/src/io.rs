//! Problem files (strict JSON documents) and NDJSON trace files.

use std::io::{BufRead, Write};

use nalgebra::DMatrix;
use serde::{Deserialize, Deserializer, Serialize};

use crate::dca::{IterationRecord, Mode, SolverConfig, TerminalRecord, Trace};
use crate::error::{Error, Result};
use crate::expr::{ConvexExpr, Node};
use crate::problem::{FeasibleSet, MidcProblem};

/// Expression tree as written in a problem file.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "lowercase", deny_unknown_fields)]
pub enum ExprDoc {
    Constant {
        value: f64,
    },
    Affine {
        coef: Vec<f64>,
        offset: f64,
    },
    /// `½ xᵀ Q x`, rows of `Q`.
    Quadratic {
        q: Vec<Vec<f64>>,
    },
    Plus {
        arg: Box<ExprDoc>,
    },
    Abs {
        arg: Box<ExprDoc>,
    },
    Max {
        args: Vec<ExprDoc>,
    },
    Sum {
        terms: Vec<ExprDoc>,
    },
    Scale {
        alpha: f64,
        arg: Box<ExprDoc>,
    },
    /// `arg(M x + offset)`, rows of `M`.
    Compose {
        matrix: Vec<Vec<f64>>,
        offset: Vec<f64>,
        arg: Box<ExprDoc>,
    },
    /// `ρ ‖x‖² / 2`
    Sqnorm {
        rho: f64,
    },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ConstraintDoc {
    pub coef: Vec<f64>,
    pub rhs: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DcConstraintDoc {
    pub g1: ExprDoc,
    pub g2: ExprDoc,
    pub tau: f64,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SolverDoc {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub rho: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub mu0: Option<[f64; 2]>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub gamma: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub eps_x: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub eps_mu: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub max_iter: Option<usize>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub x0: Option<Vec<f64>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub eps_sub: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub eps_int: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub node_limit: Option<usize>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub cut_limit: Option<usize>,
}

/// Problem file document. Bounds use `null` for an infinite side; integer
/// indices are 0-based.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ProblemDoc {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub name: Option<String>,
    pub dimension: usize,
    #[serde(default)]
    pub integer: Vec<usize>,
    pub lower: Vec<Option<f64>>,
    pub upper: Vec<Option<f64>>,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub constraints: Vec<ConstraintDoc>,
    pub g: ExprDoc,
    pub h: ExprDoc,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub dc_constraint: Option<DcConstraintDoc>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub solver: Option<SolverDoc>,
}

fn at(path: &str, e: Error) -> Error {
    match e {
        Error::NotConvex(m) => Error::NotConvex(format!("{path}: {m}")),
        Error::DimensionMismatch { expected, got } => Error::InvalidArgument(format!(
            "{path}: dimension mismatch, expected {expected}, got {got}"
        )),
        Error::InvalidArgument(m) => Error::InvalidArgument(format!("{path}: {m}")),
        other => other,
    }
}

fn matrix(rows: &[Vec<f64>], ncols: Option<usize>, path: &str) -> Result<DMatrix<f64>> {
    let nc = ncols.or_else(|| rows.first().map(Vec::len)).unwrap_or(0);
    if let Some((i, r)) = rows.iter().enumerate().find(|(_, r)| r.len() != nc) {
        return Err(Error::InvalidArgument(format!(
            "{path}: row {i} has {} entries, expected {nc}",
            r.len()
        )));
    }
    Ok(DMatrix::from_fn(rows.len(), nc, |i, j| rows[i][j]))
}

fn rows_of(m: &DMatrix<f64>) -> Vec<Vec<f64>> {
    (0..m.nrows())
        .map(|i| (0..m.ncols()).map(|j| m[(i, j)]).collect())
        .collect()
}

impl ExprDoc {
    /// Builds the expression on `ℝ^dim`; errors name the offending node.
    pub fn build(&self, dim: usize, path: &str) -> Result<ConvexExpr> {
        let child =
            |d: &ExprDoc, dim: usize, suffix: &str| d.build(dim, &format!("{path}.{suffix}"));
        let e = match self {
            ExprDoc::Constant { value } => ConvexExpr::constant(dim, *value),
            ExprDoc::Affine { coef, offset } => {
                if coef.len() != dim {
                    return Err(at(
                        path,
                        Error::DimensionMismatch {
                            expected: dim,
                            got: coef.len(),
                        },
                    ));
                }
                ConvexExpr::affine(coef.clone(), *offset)
            }
            ExprDoc::Quadratic { q } => {
                if q.len() != dim {
                    return Err(at(
                        path,
                        Error::DimensionMismatch {
                            expected: dim,
                            got: q.len(),
                        },
                    ));
                }
                ConvexExpr::quadratic(matrix(q, Some(dim), path)?)
            }
            ExprDoc::Plus { arg } => Ok(ConvexExpr::plus(child(arg, dim, "arg")?)),
            ExprDoc::Abs { arg } => ConvexExpr::abs(child(arg, dim, "arg")?),
            ExprDoc::Max { args } => {
                if args.len() != 2 {
                    return Err(Error::InvalidArgument(format!(
                        "{path}: max takes exactly 2 args, got {}",
                        args.len()
                    )));
                }
                ConvexExpr::max(
                    child(&args[0], dim, "args[0]")?,
                    child(&args[1], dim, "args[1]")?,
                )
            }
            ExprDoc::Sum { terms } => {
                let built = terms
                    .iter()
                    .enumerate()
                    .map(|(i, t)| child(t, dim, &format!("terms[{i}]")))
                    .collect::<Result<Vec<_>>>()?;
                ConvexExpr::sum(built)
            }
            ExprDoc::Scale { alpha, arg } => ConvexExpr::scale(*alpha, child(arg, dim, "arg")?),
            ExprDoc::Compose {
                matrix: m,
                offset,
                arg,
            } => {
                let mat = matrix(m, Some(dim), path)?;
                ConvexExpr::compose(mat, offset.clone(), child(arg, m.len(), "arg")?)
            }
            ExprDoc::Sqnorm { rho } => ConvexExpr::squared_norm(dim, *rho),
        };
        e.map_err(|e| at(path, e))
    }

    pub fn from_expr(e: &ConvexExpr) -> ExprDoc {
        match e.node() {
            Node::Constant(v) => ExprDoc::Constant { value: *v },
            Node::Affine { coef, offset } => ExprDoc::Affine {
                coef: coef.clone(),
                offset: *offset,
            },
            Node::Quadratic { q, .. } => ExprDoc::Quadratic { q: rows_of(q) },
            Node::Plus(a) => ExprDoc::Plus {
                arg: Box::new(ExprDoc::from_expr(a)),
            },
            Node::Abs(a) => ExprDoc::Abs {
                arg: Box::new(ExprDoc::from_expr(a)),
            },
            Node::Max(a, b) => ExprDoc::Max {
                args: vec![ExprDoc::from_expr(a), ExprDoc::from_expr(b)],
            },
            Node::Sum(terms) => ExprDoc::Sum {
                terms: terms.iter().map(ExprDoc::from_expr).collect(),
            },
            Node::Scale(alpha, a) => ExprDoc::Scale {
                alpha: *alpha,
                arg: Box::new(ExprDoc::from_expr(a)),
            },
            Node::Compose {
                matrix,
                offset,
                inner,
                ..
            } => ExprDoc::Compose {
                matrix: rows_of(matrix),
                offset: offset.clone(),
                arg: Box::new(ExprDoc::from_expr(inner)),
            },
            Node::SquaredNorm(rho) => ExprDoc::Sqnorm { rho: *rho },
        }
    }
}

fn bound(v: f64) -> Option<f64> {
    v.is_finite().then_some(v)
}

impl ProblemDoc {
    pub fn parse(text: &str) -> Result<Self> {
        serde_json::from_str(text).map_err(|e| Error::Parse(e.to_string()))
    }

    pub fn to_text(&self) -> String {
        let mut s = serde_json::to_string_pretty(self).expect("problem documents always serialize");
        s.push('\n');
        s
    }

    /// Builds the problem, applying the optional DC-constraint penalty.
    pub fn to_problem(&self) -> Result<MidcProblem> {
        let n = self.dimension;
        for (name, v) in [("lower", self.lower.len()), ("upper", self.upper.len())] {
            if v != n {
                return Err(Error::InvalidArgument(format!(
                    "{name}: expected {n} bounds, got {v}"
                )));
            }
        }
        let lower = self
            .lower
            .iter()
            .map(|b| b.unwrap_or(f64::NEG_INFINITY))
            .collect();
        let upper = self
            .upper
            .iter()
            .map(|b| b.unwrap_or(f64::INFINITY))
            .collect();
        let mut rows = Vec::with_capacity(self.constraints.len());
        let mut rhs = Vec::with_capacity(self.constraints.len());
        for (i, c) in self.constraints.iter().enumerate() {
            if c.coef.len() != n {
                return Err(Error::InvalidArgument(format!(
                    "constraints[{i}]: expected {n} coefficients, got {}",
                    c.coef.len()
                )));
            }
            rows.push(c.coef.clone());
            rhs.push(c.rhs);
        }
        let feasible = FeasibleSet::new(lower, upper, rows, rhs)?;
        let g = self.g.build(n, "g")?;
        let h = self.h.build(n, "h")?;
        if let Some(&i) = self.integer.iter().find(|&&i| i >= n) {
            return Err(Error::InvalidArgument(format!(
                "integer: index {i} out of range"
            )));
        }
        let p = MidcProblem::new(g, h, self.integer.clone(), feasible)?;
        match &self.dc_constraint {
            None => Ok(p),
            Some(dc) => {
                let g1 = dc.g1.build(n, "dc_constraint.g1")?;
                let g2 = dc.g2.build(n, "dc_constraint.g2")?;
                p.penalize_dc_constraint(&g1, &g2, dc.tau)
                    .map_err(|e| at("dc_constraint", e))
            }
        }
    }

    pub fn from_problem(p: &MidcProblem) -> ProblemDoc {
        let s = p.feasible_set();
        ProblemDoc {
            name: None,
            dimension: p.dim(),
            integer: p.integers().to_vec(),
            lower: s.lower().iter().map(|&v| bound(v)).collect(),
            upper: s.upper().iter().map(|&v| bound(v)).collect(),
            constraints: s
                .rows()
                .iter()
                .zip(s.rhs())
                .map(|(r, &b)| ConstraintDoc {
                    coef: r.clone(),
                    rhs: b,
                })
                .collect(),
            g: ExprDoc::from_expr(p.g()),
            h: ExprDoc::from_expr(p.h()),
            dc_constraint: None,
            solver: None,
        }
    }

    /// Mode defaults overridden by the file's `solver` block.
    pub fn solver_config(&self, mode: Mode) -> SolverConfig {
        let mut c = SolverConfig::for_mode(mode);
        if let Some(s) = &self.solver {
            if let Some(v) = s.rho {
                c.rho = v;
            }
            if let Some(v) = s.mu0 {
                c.mu0 = v;
            }
            if let Some(v) = s.gamma {
                c.gamma = v;
            }
            if let Some(v) = s.eps_x {
                c.eps_x = v;
            }
            if let Some(v) = s.eps_mu {
                c.eps_mu = v;
            }
            if let Some(v) = s.max_iter {
                c.max_iter = v;
            }
            if let Some(v) = &s.x0 {
                c.x0 = Some(v.clone());
            }
            if let Some(v) = s.eps_sub {
                c.subproblem.eps_sub = v;
            }
            if let Some(v) = s.eps_int {
                c.subproblem.eps_int = v;
            }
            if let Some(v) = s.node_limit {
                c.subproblem.node_limit = v;
            }
            if let Some(v) = s.cut_limit {
                c.subproblem.cut_limit = v;
            }
        }
        c
    }
}

/// Reads and builds a problem file.
pub fn load_problem(path: &std::path::Path) -> Result<(ProblemDoc, MidcProblem)> {
    let text = std::fs::read_to_string(path)?;
    let doc = ProblemDoc::parse(&text)?;
    let p = doc.to_problem()?;
    Ok((doc, p))
}

pub(crate) fn f64_or_inf<'de, D: Deserializer<'de>>(d: D) -> std::result::Result<f64, D::Error> {
    Ok(Option::<f64>::deserialize(d)?.unwrap_or(f64::INFINITY))
}

#[derive(Serialize, Deserialize)]
struct TerminalLine {
    #[serde(flatten)]
    terminal: TerminalRecord,
    kappa: f64,
    tau: f64,
    eps_sub: f64,
}

#[derive(Serialize, Deserialize)]
#[serde(tag = "record", rename_all = "lowercase")]
enum TraceLine {
    Iteration(IterationRecord),
    Terminal(TerminalLine),
}

/// One JSON object per iteration followed by one terminal object.
pub fn write_trace<W: Write>(trace: &Trace, mut w: W) -> Result<()> {
    for r in &trace.records {
        serde_json::to_writer(&mut w, &TraceLine::Iteration(r.clone()))
            .map_err(|e| Error::Parse(e.to_string()))?;
        w.write_all(b"\n")?;
    }
    let last = TraceLine::Terminal(TerminalLine {
        terminal: trace.terminal.clone(),
        kappa: trace.kappa,
        tau: trace.tau,
        eps_sub: trace.eps_sub,
    });
    serde_json::to_writer(&mut w, &last).map_err(|e| Error::Parse(e.to_string()))?;
    w.write_all(b"\n")?;
    Ok(())
}

pub fn trace_to_string(trace: &Trace) -> String {
    let mut buf = Vec::new();
    write_trace(trace, &mut buf).expect("writing to memory");
    String::from_utf8(buf).expect("JSON is UTF-8")
}

pub fn read_trace<R: BufRead>(r: R) -> Result<Trace> {
    let mut records = Vec::new();
    let mut terminal = None;
    for (i, line) in r.lines().enumerate() {
        let line = line?;
        if line.trim().is_empty() {
            continue;
        }
        if terminal.is_some() {
            return Err(Error::Parse(format!(
                "line {}: record after terminal record",
                i + 1
            )));
        }
        let parsed: TraceLine = serde_json::from_str(&line)
            .map_err(|e| Error::Parse(format!("line {}: {e}", i + 1)))?;
        match parsed {
            TraceLine::Iteration(rec) => {
                if rec.k != records.len() {
                    return Err(Error::Parse(format!(
                        "line {}: expected k = {}",
                        i + 1,
                        records.len()
                    )));
                }
                records.push(rec)
            }
            TraceLine::Terminal(t) => terminal = Some(t),
        }
    }
    let t = terminal.ok_or_else(|| Error::Parse("trace has no terminal record".into()))?;
    Ok(Trace {
        kappa: t.kappa,
        tau: t.tau,
        eps_sub: t.eps_sub,
        records,
        terminal: t.terminal,
    })
}
