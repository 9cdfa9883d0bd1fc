//! 1-slack cutting-plane training.

use std::time::Instant;

use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::qp::{axpy, dot, QpOptions, QpSolution, QuadraticProgram};

/// A learning problem for [`train_structured`]: a joint feature map, a loss,
/// and a separation oracle returning `argmin_ŷ w·Ψ(x, ŷ) − Δ(y, ŷ)`.
pub trait StructuredModel: Sync {
    type Input: Sync;
    type Output: Clone + Send + Sync;

    fn dim(&self) -> usize;
    fn psi(&self, x: &Self::Input, y: &Self::Output) -> Result<Vec<f64>>;
    fn loss(&self, x: &Self::Input, y: &Self::Output, y_hat: &Self::Output) -> Result<f64>;
    fn separate(&self, w: &[f64], x: &Self::Input, y: &Self::Output) -> Result<Separated<Self::Output>>;
    /// Constraint rows `r·w ≥ 0` that hold for every iterate.
    fn plain_rows(&self) -> Vec<Vec<f64>>;
    /// Moves a QP iterate, which satisfies the plain rows only to within the
    /// QP tolerance, onto a point that satisfies them exactly.
    fn lift(&self, _w: &mut [f64]) {}
    /// Whether [`separate`](Self::separate) finds the exact minimizer.
    fn exact_separation(&self) -> bool {
        true
    }
}

#[derive(Debug, Clone)]
pub struct Separated<O> {
    pub output: O,
    /// Largest submodularity violation among the energies built to find
    /// `output`.
    pub submodularity_violation: f64,
}

#[derive(Debug, Clone)]
pub struct TrainConfig {
    pub c: f64,
    pub eps: f64,
    pub qp_tol: f64,
    /// Cap on working-set rows.
    pub max_rows: usize,
}

impl Default for TrainConfig {
    fn default() -> Self {
        TrainConfig {
            c: 10.0,
            eps: 0.01,
            qp_tol: 1e-6,
            max_rows: 1000,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct IterationLog {
    pub iteration: usize,
    pub objective: f64,
    pub xi: f64,
    /// `Δ̄ − w·δΨ̄` of the newly separated constraint.
    pub violation: f64,
    pub mean_loss: f64,
    pub qp_iterations: usize,
    pub seconds: f64,
}

#[derive(Debug, Clone)]
pub struct TrainReport {
    pub log: Vec<IterationLog>,
    pub xi: f64,
    pub objective: f64,
    /// Violation of the last separated constraint, `≤ ξ + ε` on return.
    pub final_violation: f64,
    /// Largest submodularity violation among energies materialized during
    /// training.
    pub max_materialized_violation: f64,
    /// Set when separation is approximate (multi-label expansion).
    pub approximate_separation: bool,
}

impl TrainReport {
    pub fn iterations(&self) -> usize {
        self.log.len()
    }
}

pub fn train_structured<M: StructuredModel>(
    model: &M,
    data: &[(M::Input, M::Output)],
    cfg: &TrainConfig,
) -> Result<(Vec<f64>, TrainReport)> {
    if data.is_empty() {
        return Err(Error::InvalidInput("empty training set".into()));
    }
    if !(cfg.eps > 0.0 && cfg.c > 0.0 && cfg.qp_tol > 0.0) {
        return Err(Error::InvalidInput("c, eps and qp_tol must be positive".into()));
    }
    let dim = model.dim();
    let n = data.len() as f64;
    let truth_psi: Vec<Vec<f64>> = data
        .par_iter()
        .map(|(x, y)| model.psi(x, y))
        .collect::<Result<_>>()?;

    let mut qp = QuadraticProgram::with_slack(dim, cfg.c)?;
    for row in model.plain_rows() {
        qp.add_row(row, false, 0.0)?;
    }
    let opts = QpOptions {
        tol: cfg.qp_tol,
        max_iterations: None,
    };
    let mut sol: QpSolution = qp.solve(&opts)?;
    let mut log = Vec::new();
    let mut max_violation: f64 = 0.0;
    let mut margin_rows = 0;

    loop {
        let start = Instant::now();
        let mut lifted = sol.w.clone();
        model.lift(&mut lifted);
        let w = &lifted;
        let separated: Vec<Separated<M::Output>> = data
            .par_iter()
            .map(|(x, y)| model.separate(w, x, y))
            .collect::<Result<_>>()?;

        let mut a = vec![0.0; dim];
        let mut h = 0.0;
        for ((x, y), (s, truth)) in data.iter().zip(separated.iter().zip(&truth_psi)) {
            max_violation = max_violation.max(s.submodularity_violation);
            let p = model.psi(x, &s.output)?;
            axpy(1.0 / n, &p, &mut a);
            axpy(-1.0 / n, truth, &mut a);
            h += model.loss(x, y, &s.output)? / n;
        }
        let violation = h - dot(&a, w);
        log::debug!(
            "iteration {}: objective {} xi {} violation {}",
            log.len() + 1,
            sol.objective,
            sol.xi,
            violation
        );
        let entry = IterationLog {
            iteration: log.len() + 1,
            objective: sol.objective,
            xi: sol.xi,
            violation,
            mean_loss: h,
            qp_iterations: sol.iterations,
            seconds: 0.0,
        };
        log.push(entry);

        if violation <= sol.xi + cfg.eps {
            log.last_mut().unwrap().seconds = start.elapsed().as_secs_f64();
            return Ok((
                lifted,
                TrainReport {
                    xi: sol.xi,
                    objective: sol.objective,
                    final_violation: violation,
                    max_materialized_violation: max_violation,
                    approximate_separation: !model.exact_separation(),
                    log,
                },
            ));
        }
        if margin_rows >= cfg.max_rows {
            return Err(Error::TrainingAborted(format!(
                "working set reached {} rows; last violation {violation}, xi {}",
                cfg.max_rows, sol.xi
            )));
        }
        qp.add_row(a, true, h)?;
        margin_rows += 1;
        sol = qp.solve_warm(&opts, Some(&sol))?;
        log.last_mut().unwrap().seconds = start.elapsed().as_secs_f64();
    }
}
