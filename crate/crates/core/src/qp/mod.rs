//! Dense QP solver for problems of the form
//!
//! ```text
//! minimize   ½‖w‖² + c·ξ
//! subject to a_r·w + s_r·ξ ≥ h_r      s_r ∈ {0, 1}
//! ```
//!
//! Rows with `s_r = 1` are slack rows (margin rows and `ξ ≥ 0`); rows with
//! `s_r = 0` are plain rows (submodularity constraints). A problem built
//! without a slack variable has no `ξ` at all and minimizes `½‖w‖²`.
//!
//! The solver is a primal active-set method. While a slack row `r0` is in
//! the working set, `ξ = h0 − a0·w` is eliminated and each equality
//! subproblem is a projection onto the remaining working rows, solved with
//! a QR factorization that is updated as rows enter and leave.

use std::fmt::Write as _;

use crate::error::{Error, Result};

mod factor;

use factor::Factor;

#[derive(Debug, Clone, PartialEq)]
pub struct Row {
    pub a: Vec<f64>,
    pub slack: bool,
    pub h: f64,
}

#[derive(Debug, Clone)]
pub struct QuadraticProgram {
    dim: usize,
    /// `Some(c)` when the problem carries a slack variable.
    c: Option<f64>,
    rows: Vec<Row>,
}

#[derive(Debug, Clone)]
pub struct QpOptions {
    pub tol: f64,
    /// Defaults to `50·(N + rows)` when `None`.
    pub max_iterations: Option<usize>,
}

impl Default for QpOptions {
    fn default() -> Self {
        QpOptions {
            tol: 1e-6,
            max_iterations: None,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct QpSolution {
    pub w: Vec<f64>,
    pub xi: f64,
    /// One multiplier per row, in row order. Duplicate rows share the
    /// multiplier of their first occurrence and report zero.
    pub multipliers: Vec<f64>,
    pub objective: f64,
    /// Largest constraint violation.
    pub primal_residual: f64,
    /// Norm of the Lagrangian gradient.
    pub dual_residual: f64,
    pub complementarity: f64,
    pub dual_objective: f64,
    pub iterations: usize,
    /// Rows active in the final working set.
    pub working_set: Vec<usize>,
}

impl QpSolution {
    pub fn duality_gap(&self) -> f64 {
        self.objective - self.dual_objective
    }
}

impl QuadraticProgram {
    /// Problem with slack variable `ξ`, cost `c > 0`, and the row `ξ ≥ 0`
    /// already in place.
    pub fn with_slack(dim: usize, c: f64) -> Result<Self> {
        if !(c.is_finite() && c > 0.0) {
            return Err(Error::InvalidInput(format!("slack cost must be positive, got {c}")));
        }
        let mut qp = QuadraticProgram {
            dim,
            c: Some(c),
            rows: Vec::new(),
        };
        qp.add_row(vec![0.0; dim], true, 0.0)?;
        Ok(qp)
    }

    pub fn without_slack(dim: usize) -> Self {
        QuadraticProgram {
            dim,
            c: None,
            rows: Vec::new(),
        }
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn slack_cost(&self) -> Option<f64> {
        self.c
    }

    pub fn rows(&self) -> &[Row] {
        &self.rows
    }

    /// Appends `a·w + [slack]·ξ ≥ h` and returns its index.
    pub fn add_row(&mut self, a: Vec<f64>, slack: bool, h: f64) -> Result<usize> {
        if a.len() != self.dim {
            return Err(Error::DimensionMismatch {
                expected: self.dim,
                actual: a.len(),
            });
        }
        if slack && self.c.is_none() {
            return Err(Error::InvalidInput("slack row in a problem without ξ".into()));
        }
        if !h.is_finite() || a.iter().any(|v| !v.is_finite()) {
            return Err(Error::InvalidInput("non-finite QP row".into()));
        }
        self.rows.push(Row { a, slack, h });
        Ok(self.rows.len() - 1)
    }

    pub fn objective(&self, w: &[f64], xi: f64) -> f64 {
        0.5 * dot(w, w) + self.c.map_or(0.0, |c| c * xi)
    }

    /// `h − a·w − s·ξ` for one row; positive means violated.
    pub fn violation(&self, row: usize, w: &[f64], xi: f64) -> f64 {
        let r = &self.rows[row];
        r.h - dot(&r.a, w) - if r.slack { xi } else { 0.0 }
    }

    /// Unit for constraint residuals.
    fn residual_scale(&self) -> f64 {
        self.rows.iter().fold(1.0, |s: f64, r| s.max(r.h.abs()))
    }

    /// Plain-text dump for reproducing failures: a `qp` header line, then
    /// one `row <s> <h> <a..>` line per row.
    pub fn dump(&self) -> String {
        let mut out = String::new();
        match self.c {
            Some(c) => writeln!(out, "qp dim={} c={c}", self.dim).unwrap(),
            None => writeln!(out, "qp dim={} c=none", self.dim).unwrap(),
        }
        for r in &self.rows {
            write!(out, "row {} {}", r.slack as u8, r.h).unwrap();
            for v in &r.a {
                write!(out, " {v}").unwrap();
            }
            out.push('\n');
        }
        out
    }

    pub fn solve(&self, opts: &QpOptions) -> Result<QpSolution> {
        self.solve_warm(opts, None)
    }

    /// Solves starting from `warm`, a solution of a problem whose rows are a
    /// prefix of this one's. Plain rows of the old working set are kept.
    pub fn solve_warm(&self, opts: &QpOptions, warm: Option<&QpSolution>) -> Result<QpSolution> {
        let unique = Unique::new(&self.rows);
        let cap = opts
            .max_iterations
            .unwrap_or(50 * (self.dim + self.rows.len()).max(1));
        let sparse: Vec<SparseIndex> = unique.rows.iter().map(|r| SparseIndex::new(&r.a)).collect();
        let core = Core {
            dim: self.dim,
            rows: &unique.rows,
            sparse: &sparse,
            tol_residual: opts.tol * self.residual_scale(),
            tol_multiplier: opts.tol * self.c.unwrap_or(1.0).max(1.0),
            cap,
        };

        let sol = match self.c {
            Some(c) => {
                let start = match warm {
                    Some(ws)
                        if ws.w.len() == self.dim
                            && unique.plain_feasible(&ws.w, core.tol_residual) =>
                    {
                        let kept = ws
                            .working_set
                            .iter()
                            .filter(|&&i| i < self.rows.len() && !self.rows[i].slack)
                            .filter_map(|&i| unique.map[i])
                            .collect();
                        Some((ws.w.clone(), kept))
                    }
                    _ => None,
                };
                let (w0, kept) = match start {
                    Some(s) => s,
                    None => (unique.plain_start(self.dim, &core)?, Vec::new()),
                };
                core.solve_slack(c, w0, kept)?
            }
            None => core.solve_plain_by_penalty()?,
        };
        Ok(self.finish(&unique, sol))
    }

    fn finish(&self, unique: &Unique, sol: CoreSolution) -> QpSolution {
        let mut multipliers = vec![0.0; self.rows.len()];
        for (u, &orig) in unique.first.iter().enumerate() {
            multipliers[orig] = sol.lambda[u];
        }
        let working_set: Vec<usize> = sol.working.iter().map(|&u| unique.first[u]).collect();
        let xi = sol.xi;
        let w = sol.w;

        let mut primal: f64 = 0.0;
        let mut comp: f64 = 0.0;
        let mut grad_w = w.clone();
        let mut grad_xi = self.c.unwrap_or(0.0);
        let mut dual = 0.0;
        for (i, r) in self.rows.iter().enumerate() {
            let v = self.violation(i, &w, xi);
            primal = primal.max(v);
            let l = multipliers[i];
            comp = comp.max((l * v).abs());
            for (g, a) in grad_w.iter_mut().zip(&r.a) {
                *g -= l * a;
            }
            if r.slack {
                grad_xi -= l;
            }
            dual += l * r.h;
        }
        let mut wl = vec![0.0; self.dim];
        for (r, &l) in self.rows.iter().zip(&multipliers) {
            if l != 0.0 {
                axpy(l, &r.a, &mut wl);
            }
        }
        dual -= 0.5 * dot(&wl, &wl);
        QpSolution {
            objective: self.objective(&w, xi),
            primal_residual: primal,
            dual_residual: (dot(&grad_w, &grad_w) + grad_xi * grad_xi).sqrt(),
            complementarity: comp,
            dual_objective: dual,
            iterations: sol.iterations,
            working_set,
            multipliers,
            w,
            xi,
        }
    }
}

/// Rows with duplicates removed by exact match.
struct Unique {
    rows: Vec<Row>,
    /// Original index of each unique row.
    first: Vec<usize>,
    /// Unique index of each original row, `None` for later duplicates.
    map: Vec<Option<usize>>,
}

impl Unique {
    fn new(rows: &[Row]) -> Self {
        let mut out = Unique {
            rows: Vec::new(),
            first: Vec::new(),
            map: Vec::with_capacity(rows.len()),
        };
        let mut seen = std::collections::HashMap::new();
        for (i, r) in rows.iter().enumerate() {
            let key: Vec<u64> = r
                .a
                .iter()
                .map(|v| canonical_bits(*v))
                .chain([canonical_bits(r.h), r.slack as u64])
                .collect();
            match seen.entry(key) {
                std::collections::hash_map::Entry::Occupied(_) => out.map.push(None),
                std::collections::hash_map::Entry::Vacant(e) => {
                    e.insert(out.rows.len());
                    out.map.push(Some(out.rows.len()));
                    out.first.push(i);
                    out.rows.push(r.clone());
                }
            }
        }
        out
    }

    fn plain_feasible(&self, w: &[f64], tol: f64) -> bool {
        self.rows
            .iter()
            .filter(|r| !r.slack)
            .all(|r| r.h - dot(&r.a, w) <= tol)
    }

    /// A point satisfying every plain row: `w = 0` when that works, else the
    /// minimum-norm feasible point.
    fn plain_start(&self, dim: usize, core: &Core) -> Result<Vec<f64>> {
        let zero = vec![0.0; dim];
        if self.plain_feasible(&zero, 0.0) {
            return Ok(zero);
        }
        let plain: Vec<Row> = self.rows.iter().filter(|r| !r.slack).cloned().collect();
        let sparse: Vec<SparseIndex> = plain.iter().map(|r| SparseIndex::new(&r.a)).collect();
        let sub = Core {
            rows: &plain,
            sparse: &sparse,
            ..*core
        };
        Ok(sub.solve_plain_by_penalty()?.w)
    }
}

fn canonical_bits(v: f64) -> u64 {
    if v == 0.0 {
        0
    } else {
        v.to_bits()
    }
}

struct CoreSolution {
    w: Vec<f64>,
    xi: f64,
    lambda: Vec<f64>,
    working: Vec<usize>,
    iterations: usize,
}

#[derive(Clone, Copy)]
struct Core<'a> {
    dim: usize,
    rows: &'a [Row],
    sparse: &'a [SparseIndex],
    tol_residual: f64,
    tol_multiplier: f64,
    cap: usize,
}

/// Nonzero positions of a row when it is sparse.
struct SparseIndex {
    nonzeros: Option<Vec<usize>>,
}

impl SparseIndex {
    fn new(a: &[f64]) -> Self {
        let nz: Vec<usize> = (0..a.len()).filter(|&j| a[j] != 0.0).collect();
        SparseIndex {
            nonzeros: (nz.len() * 4 < a.len()).then_some(nz),
        }
    }

    fn dot(&self, a: &[f64], x: &[f64]) -> f64 {
        match &self.nonzeros {
            Some(nz) => nz.iter().map(|&j| a[j] * x[j]).sum(),
            None => dot(a, x),
        }
    }
}

/// Working set with the slack row `pivot` used to eliminate `ξ`, and the
/// other rows in factor column order.
struct Working {
    pivot: usize,
    cols: Vec<usize>,
    factor: Factor,
}

/// Consecutive zero-length steps after which ties are broken by lowest
/// row index.
const DEGENERATE_RUN: usize = 20;

impl Core<'_> {
    /// Most violated slack row at `w`, as `(row, h − a·w)`. Lowest index on
    /// ties.
    fn max_slack(&self, w: &[f64]) -> (usize, f64) {
        let mut best = (usize::MAX, f64::NEG_INFINITY);
        for (i, r) in self.rows.iter().enumerate() {
            if r.slack {
                let v = r.h - dot(&r.a, w);
                if v > best.1 {
                    best = (i, v);
                }
            }
        }
        best
    }

    /// Normal and right-hand side of row `i` after eliminating `ξ` through
    /// `pivot`.
    fn column(&self, i: usize, pivot: usize) -> (Vec<f64>, f64) {
        let r = &self.rows[i];
        if r.slack {
            let p = &self.rows[pivot];
            (r.a.iter().zip(&p.a).map(|(x, y)| x - y).collect(), r.h - p.h)
        } else {
            (r.a.clone(), r.h)
        }
    }

    /// Builds the factor for `pivot` and `rows`, dropping rows that are
    /// dependent on earlier ones.
    fn working(&self, pivot: usize, rows: impl IntoIterator<Item = usize>) -> Working {
        let mut ws = Working {
            pivot,
            cols: Vec::new(),
            factor: Factor::new(self.dim),
        };
        for i in rows {
            if i != pivot && !ws.cols.contains(&i) && ws.factor.push(&self.column(i, pivot).0) {
                ws.cols.push(i);
            }
        }
        ws
    }

    /// Exact penalty reformulation for problems without `ξ`: every row gets
    /// a shared artificial slack of cost `M`. `M` grows until the slack
    /// vanishes.
    fn solve_plain_by_penalty(&self) -> Result<CoreSolution> {
        if self.rows.is_empty() {
            return Ok(CoreSolution {
                w: vec![0.0; self.dim],
                xi: 0.0,
                lambda: Vec::new(),
                working: Vec::new(),
                iterations: 0,
            });
        }
        let mut rows: Vec<Row> = self
            .rows
            .iter()
            .map(|r| Row {
                slack: true,
                ..r.clone()
            })
            .collect();
        let xi_row = rows.len();
        rows.push(Row {
            a: vec![0.0; self.dim],
            slack: true,
            h: 0.0,
        });
        let sparse: Vec<SparseIndex> = rows.iter().map(|r| SparseIndex::new(&r.a)).collect();
        let mut penalty = 1e3;
        let mut iterations = 0;
        while penalty <= 1e12 {
            let core = Core {
                rows: &rows,
                sparse: &sparse,
                ..*self
            };
            let mut sol = core.solve_slack(penalty, vec![0.0; self.dim], Vec::new())?;
            iterations += sol.iterations;
            if sol.xi <= self.tol_residual {
                sol.lambda.truncate(xi_row);
                sol.working.retain(|&i| i != xi_row);
                sol.xi = 0.0;
                sol.iterations = iterations;
                return Ok(sol);
            }
            penalty *= 10.0;
        }
        Err(Error::QpInfeasible)
    }

    /// Active-set iterations from a `w0` satisfying every plain row. `kept`
    /// lists plain rows active at `w0` to seed the working set.
    fn solve_slack(&self, c: f64, w0: Vec<f64>, kept: Vec<usize>) -> Result<CoreSolution> {
        let mut w = w0;
        let (pivot, xi0) = self.max_slack(&w);
        let mut xi = xi0;
        let mut ws = self.working(pivot, kept);
        let mut in_working = vec![false; self.rows.len()];
        in_working[pivot] = true;
        ws.cols.iter().for_each(|&i| in_working[i] = true);
        // Rows found dependent on the working set; skipped until it changes.
        let mut dependent = vec![false; self.rows.len()];
        let mut degenerate = 0usize;

        let mut best: Option<(f64, Vec<f64>, f64)> = None;
        for iter in 1..=self.cap {
            let a0 = &self.rows[ws.pivot].a;
            let h0 = self.rows[ws.pivot].h;
            let b: Vec<f64> = ws
                .cols
                .iter()
                .map(|&i| {
                    let (col, rhs) = self.column(i, ws.pivot);
                    rhs - c * dot(&col, a0)
                })
                .collect();
            let mut z = ws.factor.solve_rt(&b);
            let mut w_eq = ws.factor.apply_q(&z);
            axpy(c, a0, &mut w_eq);
            // w_eq is a small difference of large terms; refine the working
            // equalities against the original rows.
            for _ in 0..2 {
                let r: Vec<f64> = ws
                    .cols
                    .iter()
                    .map(|&i| {
                        let (col, rhs) = self.column(i, ws.pivot);
                        rhs - dot(&col, &w_eq)
                    })
                    .collect();
                let dz = ws.factor.solve_rt(&r);
                axpy(1.0, &ws.factor.apply_q(&dz), &mut w_eq);
                axpy(1.0, &dz, &mut z);
            }
            let xi_eq = h0 - dot(a0, &w_eq);
            let step_w: Vec<f64> = w_eq.iter().zip(&w).map(|(a, b)| a - b).collect();
            let step_xi = xi_eq - xi;
            let step_norm = (dot(&step_w, &step_w) + step_xi * step_xi).sqrt();

            // Ratio test over rows outside the working set.
            let mut alpha = 1.0;
            let mut blocking = None;
            if step_norm > 0.0 {
                for (i, r) in self.rows.iter().enumerate() {
                    if in_working[i] || dependent[i] {
                        continue;
                    }
                    let sparse = &self.sparse[i];
                    let slope = sparse.dot(&r.a, &step_w) + if r.slack { step_xi } else { 0.0 };
                    // A row blocks only if the full step would leave it
                    // violated beyond tolerance; smaller slopes are residual
                    // corrections near a degenerate vertex.
                    if slope < -self.tol_residual {
                        let value = sparse.dot(&r.a, &w) + if r.slack { xi } else { 0.0 } - r.h;
                        if value + slope < -self.tol_residual {
                            let t = value.max(0.0) / -slope;
                            if t < alpha {
                                alpha = t;
                                blocking = Some(i);
                            }
                        }
                    }
                }
            }
            if let Some(i) = blocking {
                axpy(alpha, &step_w, &mut w);
                xi += alpha * step_xi;
                degenerate = if alpha == 0.0 { degenerate + 1 } else { 0 };
                // A row dependent on the working set stays dependent while
                // rows are only added.
                if ws.factor.push(&self.column(i, ws.pivot).0) {
                    ws.cols.push(i);
                    in_working[i] = true;
                } else {
                    dependent[i] = true;
                }
            } else {
                w = w_eq;
                xi = xi_eq;
                // Multipliers: μ for factor columns, c − Σ μ_slack for the pivot.
                let mu = ws.factor.solve_r(&z);
                let slack_sum: f64 = ws
                    .cols
                    .iter()
                    .zip(&mu)
                    .filter(|(&i, _)| self.rows[i].slack)
                    .map(|(_, m)| m)
                    .sum();
                let pivot_lambda = c - slack_sum;
                let candidates = ws
                    .cols
                    .iter()
                    .zip(&mu)
                    .map(|(&i, &m)| (i, m))
                    .chain([(ws.pivot, pivot_lambda)])
                    .filter(|&(_, m)| m < -self.tol_multiplier);
                let drop = if degenerate >= DEGENERATE_RUN {
                    candidates.min_by_key(|&(i, _)| i)
                } else {
                    candidates.min_by(|x, y| x.1.total_cmp(&y.1))
                };
                let Some((out, _)) = drop else {
                    let mut lambda = vec![0.0; self.rows.len()];
                    for (&i, &m) in ws.cols.iter().zip(&mu) {
                        lambda[i] = m.max(0.0);
                    }
                    lambda[ws.pivot] = pivot_lambda.max(0.0);
                    let mut working = vec![ws.pivot];
                    working.extend(&ws.cols);
                    return Ok(CoreSolution {
                        w,
                        xi,
                        lambda,
                        working,
                        iterations: iter,
                    });
                };
                in_working[out] = false;
                dependent.iter_mut().for_each(|d| *d = false);
                if out == ws.pivot {
                    // Another slack row carries positive weight; it becomes
                    // the pivot.
                    let next = ws
                        .cols
                        .iter()
                        .copied()
                        .find(|&i| self.rows[i].slack)
                        .expect("negative pivot multiplier implies another slack row");
                    let rest: Vec<usize> = ws.cols.iter().copied().filter(|&i| i != next).collect();
                    ws = self.working(next, rest);
                    in_working.iter_mut().for_each(|x| *x = false);
                    in_working[ws.pivot] = true;
                    ws.cols.iter().for_each(|&i| in_working[i] = true);
                } else {
                    let k = ws.cols.iter().position(|&i| i == out).unwrap();
                    ws.cols.remove(k);
                    ws.factor.remove(k);
                }
            }
            let obj = 0.5 * dot(&w, &w) + c * xi;
            if best.as_ref().is_none_or(|b| obj < b.0) {
                best = Some((obj, w.clone(), xi));
            }
        }
        let (_, bw, bxi) = best.unwrap_or((0.0, w, xi));
        let mut working = vec![ws.pivot];
        working.extend(&ws.cols);
        Err(Error::QpNotConverged(Box::new(QpSolution {
            objective: 0.5 * dot(&bw, &bw) + c * bxi,
            w: bw,
            xi: bxi,
            multipliers: vec![0.0; self.rows.len()],
            primal_residual: f64::NAN,
            dual_residual: f64::NAN,
            complementarity: f64::NAN,
            dual_objective: f64::NAN,
            iterations: self.cap,
            working_set: working,
        })))
    }
}

pub(crate) fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

pub(crate) fn axpy(alpha: f64, x: &[f64], y: &mut [f64]) {
    for (yi, xi) in y.iter_mut().zip(x) {
        *yi += alpha * xi;
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn single_bound_without_slack() {
        let mut qp = QuadraticProgram::without_slack(1);
        qp.add_row(vec![1.0], false, 1.0).unwrap();
        let s = qp.solve(&QpOptions::default()).unwrap();
        assert!((s.w[0] - 1.0).abs() < 1e-9);
        assert!((s.multipliers[0] - 1.0).abs() < 1e-9);
        assert!(s.dual_residual <= 1e-6);
    }

    #[test]
    fn margin_row_with_cheap_violation_pays_nothing() {
        // ½‖w‖² + 10ξ, w₁ + ξ ≥ 2: since 2 ≤ 10 the margin is met with w₁ = 2.
        let mut qp = QuadraticProgram::with_slack(3, 10.0).unwrap();
        qp.add_row(vec![1.0, 0.0, 0.0], true, 2.0).unwrap();
        let s = qp.solve(&QpOptions::default()).unwrap();
        assert!((s.w[0] - 2.0).abs() < 1e-9, "{:?}", s.w);
        assert!(s.w[1].abs() < 1e-12 && s.w[2].abs() < 1e-12);
        assert!(s.xi.abs() < 1e-9);
        assert!((s.multipliers[1] - 2.0).abs() < 1e-9);
        assert!((s.multipliers[0] - 8.0).abs() < 1e-9);
    }

    #[test]
    fn margin_row_with_expensive_violation_uses_slack() {
        // c = 1 < 2: optimum w₁ = 1, ξ = 1.
        let mut qp = QuadraticProgram::with_slack(1, 1.0).unwrap();
        qp.add_row(vec![1.0], true, 2.0).unwrap();
        let s = qp.solve(&QpOptions::default()).unwrap();
        assert!((s.w[0] - 1.0).abs() < 1e-9);
        assert!((s.xi - 1.0).abs() < 1e-9);
    }

    #[test]
    fn duplicate_rows_are_merged() {
        let mut qp = QuadraticProgram::with_slack(2, 5.0).unwrap();
        qp.add_row(vec![1.0, 1.0], true, 1.0).unwrap();
        qp.add_row(vec![1.0, 1.0], true, 1.0).unwrap();
        let s = qp.solve(&QpOptions::default()).unwrap();
        assert_eq!(s.multipliers[2], 0.0);
        assert!((s.w[0] - 0.5).abs() < 1e-9);
    }

    #[test]
    fn infeasible_plain_rows() {
        let mut qp = QuadraticProgram::without_slack(1);
        qp.add_row(vec![1.0], false, 1.0).unwrap();
        qp.add_row(vec![-1.0], false, 0.0).unwrap();
        assert!(matches!(qp.solve(&QpOptions::default()), Err(Error::QpInfeasible)));
    }

    #[test]
    fn rejects_bad_rows() {
        let mut qp = QuadraticProgram::without_slack(2);
        assert!(qp.add_row(vec![1.0], false, 0.0).is_err());
        assert!(qp.add_row(vec![1.0, 0.0], true, 0.0).is_err());
        assert!(qp.add_row(vec![f64::NAN, 0.0], false, 0.0).is_err());
        assert!(QuadraticProgram::with_slack(2, 0.0).is_err());
    }

    #[test]
    fn dump_lists_rows() {
        let mut qp = QuadraticProgram::with_slack(2, 1.5).unwrap();
        qp.add_row(vec![1.0, -2.0], false, 0.25).unwrap();
        assert_eq!(qp.dump(), "qp dim=2 c=1.5\nrow 1 0 0 0\nrow 0 0.25 1 -2\n");
    }
}
