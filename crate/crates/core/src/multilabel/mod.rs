//! Multi-label energies whose clique terms are sums of per-label submodular
//! functions, `f_C(y_C) = Σ_ℓ g_ℓ(C_ℓ)` with `C_ℓ = {i ∈ C : y_i = ℓ}`, and
//! α-expansion over them. Every expansion move is a binary SoS energy, so
//! each move is solved exactly by [`flow::minimize`].

mod learn;
mod text;

pub use learn::MultiLabelLearner;
pub use text::{parse_multilabel, write_multilabel};

use crate::energy::{table_violations, Clique, SoSEnergy, VarId, K_MAX};
use crate::error::{Error, Result};
use crate::flow::{self, FlowOptions};

#[derive(Debug, Clone, PartialEq)]
pub struct MultiClique {
    members: Vec<usize>,
    /// `tables[ℓ]` is `g_ℓ` in the usual bit-mask order.
    tables: Vec<Vec<f64>>,
}

impl MultiClique {
    pub fn members(&self) -> &[usize] {
        &self.members
    }

    pub fn tables(&self) -> &[Vec<f64>] {
        &self.tables
    }

    fn mask_for(&self, y: &[usize], label: usize) -> usize {
        self.members
            .iter()
            .enumerate()
            .filter(|(_, &v)| y[v] == label)
            .fold(0, |m, (p, _)| m | 1 << p)
    }

    pub fn value(&self, y: &[usize]) -> f64 {
        self.tables
            .iter()
            .enumerate()
            .map(|(l, t)| t[self.mask_for(y, l)])
            .sum()
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct MultiLabelEnergy {
    num_vars: usize,
    num_labels: usize,
    /// Row-major `num_vars × num_labels`.
    unary: Vec<f64>,
    cliques: Vec<MultiClique>,
}

impl MultiLabelEnergy {
    pub fn new(num_vars: usize, num_labels: usize) -> Result<Self> {
        if num_labels == 0 {
            return Err(Error::InvalidInput("label set is empty".into()));
        }
        Ok(MultiLabelEnergy {
            num_vars,
            num_labels,
            unary: vec![0.0; num_vars * num_labels],
            cliques: Vec::new(),
        })
    }

    pub fn num_vars(&self) -> usize {
        self.num_vars
    }

    pub fn num_labels(&self) -> usize {
        self.num_labels
    }

    pub fn cliques(&self) -> &[MultiClique] {
        &self.cliques
    }

    pub fn unary(&self, var: usize, label: usize) -> f64 {
        self.unary[var * self.num_labels + label]
    }

    pub fn set_unary(&mut self, var: usize, costs: &[f64]) -> Result<()> {
        if var >= self.num_vars {
            return Err(Error::InvalidInput(format!("variable {var} out of range")));
        }
        if costs.len() != self.num_labels {
            return Err(Error::DimensionMismatch {
                expected: self.num_labels,
                actual: costs.len(),
            });
        }
        if costs.iter().any(|c| !c.is_finite()) {
            return Err(Error::InvalidInput("non-finite unary cost".into()));
        }
        let start = var * self.num_labels;
        self.unary[start..start + self.num_labels].copy_from_slice(costs);
        Ok(())
    }

    pub fn add_to_unary(&mut self, var: usize, label: usize, delta: f64) -> Result<()> {
        if var >= self.num_vars || label >= self.num_labels {
            return Err(Error::InvalidInput(format!("({var}, {label}) out of range")));
        }
        self.unary[var * self.num_labels + label] += delta;
        Ok(())
    }

    /// Adds a clique with one submodular table per label.
    pub fn add_clique(&mut self, members: &[usize], tables: Vec<Vec<f64>>) -> Result<usize> {
        // Validates size and distinct members.
        Clique::new(0, members.iter().copied().map(VarId).collect())?;
        if let Some(&m) = members.iter().find(|&&m| m >= self.num_vars) {
            return Err(Error::InvalidInput(format!("member {m} out of range")));
        }
        if tables.len() != self.num_labels {
            return Err(Error::DimensionMismatch {
                expected: self.num_labels,
                actual: tables.len(),
            });
        }
        for t in &tables {
            if t.len() != 1 << members.len() {
                return Err(Error::DimensionMismatch {
                    expected: 1 << members.len(),
                    actual: t.len(),
                });
            }
            if t.iter().any(|v| !v.is_finite()) {
                return Err(Error::InvalidInput("non-finite clique value".into()));
            }
            if let Some(v) = table_violations(t, 1e-9 * max_abs(t).max(1.0)).first() {
                return Err(Error::NotSubmodular {
                    clique: self.cliques.len(),
                    violation: *v,
                });
            }
        }
        self.cliques.push(MultiClique {
            members: members.to_vec(),
            tables,
        });
        Ok(self.cliques.len() - 1)
    }

    fn check(&self, y: &MultiLabeling) -> Result<()> {
        if y.0.len() != self.num_vars {
            return Err(Error::DimensionMismatch {
                expected: self.num_vars,
                actual: y.0.len(),
            });
        }
        if let Some(&l) = y.0.iter().find(|&&l| l >= self.num_labels) {
            return Err(Error::InvalidInput(format!("label {l} outside label set")));
        }
        Ok(())
    }

    pub fn evaluate(&self, y: &MultiLabeling) -> Result<f64> {
        self.check(y)?;
        let unary: f64 = y.0.iter().enumerate().map(|(i, &l)| self.unary(i, l)).sum();
        let cliques: f64 = self.cliques.iter().map(|c| c.value(&y.0)).sum();
        Ok(unary + cliques)
    }

    /// Largest absolute coefficient, at least 1.
    pub fn scale(&self) -> f64 {
        self.cliques
            .iter()
            .flat_map(|c| c.tables.iter().map(|t| max_abs(t)))
            .chain(self.unary.iter().map(|v| v.abs()))
            .fold(1.0, f64::max)
    }

    /// Per-variable unary argmin, lowest label on ties.
    pub fn unary_argmin(&self) -> MultiLabeling {
        MultiLabeling(
            (0..self.num_vars)
                .map(|i| {
                    (0..self.num_labels).fold(0, |best, l| {
                        if self.unary(i, l) < self.unary(i, best) {
                            l
                        } else {
                            best
                        }
                    })
                })
                .collect(),
        )
    }

    /// Exhaustive minimum over all `L^n` labelings. First minimum in
    /// lexicographic order, variable 0 most significant.
    pub fn brute_force_minimize(&self) -> Result<(f64, MultiLabeling)> {
        let total = (self.num_labels as f64).powi(self.num_vars as i32);
        if total > (1u64 << crate::energy::BRUTE_FORCE_MAX_VARS) as f64 {
            return Err(Error::TooLarge(self.num_vars, crate::energy::BRUTE_FORCE_MAX_VARS));
        }
        let mut y = MultiLabeling(vec![0; self.num_vars]);
        let mut best = (self.evaluate(&y)?, y.clone());
        loop {
            let mut i = self.num_vars;
            loop {
                if i == 0 {
                    return Ok(best);
                }
                i -= 1;
                y.0[i] += 1;
                if y.0[i] < self.num_labels {
                    break;
                }
                y.0[i] = 0;
            }
            let v = self.evaluate(&y)?;
            if v < best.0 {
                best = (v, y.clone());
            }
        }
    }
}

fn max_abs(t: &[f64]) -> f64 {
    t.iter().fold(0.0, |m, v| m.max(v.abs()))
}

#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub struct MultiLabeling(pub Vec<usize>);

/// Binary energy `B(S)` of letting the variables in `S` switch to `alpha`
/// from `y`. Label 1 means "switch".
pub fn expansion_subproblem(e: &MultiLabelEnergy, y: &MultiLabeling, alpha: usize) -> Result<SoSEnergy> {
    e.check(y)?;
    if alpha >= e.num_labels {
        return Err(Error::InvalidInput(format!(
            "label {alpha} outside label set of size {}",
            e.num_labels
        )));
    }
    let mut b = SoSEnergy::new(e.num_vars);
    for i in 0..e.num_vars {
        b.set_unary(i, e.unary(i, y.0[i]), e.unary(i, alpha))?;
    }
    for c in &e.cliques {
        let k = c.members.len();
        let current: Vec<usize> = (0..e.num_labels).map(|l| c.mask_for(&y.0, l)).collect();
        let table = (0..1usize << k)
            .map(|t| {
                (0..e.num_labels)
                    .map(|l| {
                        if l == alpha {
                            c.tables[l][current[l] | t]
                        } else {
                            c.tables[l][current[l] & !t]
                        }
                    })
                    .sum()
            })
            .collect();
        b.add_clique(&c.members, table)?;
    }
    Ok(b)
}

#[derive(Debug, Clone)]
pub struct ExpansionResult {
    pub labeling: MultiLabeling,
    pub energy: f64,
    /// Energy after each accepted move, starting with the initial energy.
    pub trace: Vec<f64>,
    pub cycles: usize,
}

/// α-expansion from `y0` (default: unary argmin). Labels are visited in
/// ascending order; a move is applied only if it lowers the energy by more
/// than `1e-9·scale`. Stops after a full cycle without an accepted move.
pub fn alpha_expansion(e: &MultiLabelEnergy, y0: Option<MultiLabeling>, opts: &FlowOptions) -> Result<ExpansionResult> {
    let mut y = y0.unwrap_or_else(|| e.unary_argmin());
    let mut energy = e.evaluate(&y)?;
    let threshold = 1e-9 * e.scale();
    let mut trace = vec![energy];
    let mut cycles = 0;
    loop {
        cycles += 1;
        let mut improved = false;
        for alpha in 0..e.num_labels {
            let b = expansion_subproblem(e, &y, alpha)?;
            let r = flow::minimize_with(&b, opts)?;
            let mut candidate = y.clone();
            for i in r.minimizer.members() {
                candidate.0[i] = alpha;
            }
            let value = e.evaluate(&candidate)?;
            if value < energy - threshold {
                y = candidate;
                energy = value;
                trace.push(energy);
                improved = true;
            }
        }
        if !improved {
            return Ok(ExpansionResult {
                labeling: y,
                energy,
                trace,
                cycles,
            });
        }
    }
}

/// Pⁿ Potts clique as per-label tables: `g_ℓ(C) = λ_ℓ − λ_max`, zero on every
/// proper subset. Adding `λ_max` back gives `λ_ℓ` on uniform labelings and
/// `λ_max` otherwise.
pub fn pn_potts(size: usize, lambda: &[f64], lambda_max: f64) -> Result<Vec<Vec<f64>>> {
    if size == 0 || size > K_MAX {
        return Err(Error::InvalidInput(format!("clique size {size} out of range")));
    }
    if let Some((l, v)) = lambda.iter().enumerate().find(|(_, &v)| v > lambda_max) {
        return Err(Error::InvalidInput(format!(
            "lambda[{l}] = {v} exceeds lambda_max = {lambda_max}; table would not be submodular"
        )));
    }
    Ok(lambda
        .iter()
        .map(|&l| {
            let mut t = vec![0.0; 1 << size];
            t[(1 << size) - 1] = l - lambda_max;
            t
        })
        .collect())
}
