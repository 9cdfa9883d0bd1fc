//! Sum-of-submodular energies.
//!
//! An energy over binary variables `0..n` is a sum of per-variable unary costs
//! and clique functions, each clique function given as an explicit table over
//! all subsets of its members. A labeling is identified with the set `S` of
//! variables labeled 1.
//!
//! Subsets of a clique are encoded as bit masks: bit `p` of the mask is set
//! iff the `p`-th member (in stored order) belongs to the subset.

pub(crate) mod text;

use std::fmt;

use crate::error::{Error, Result};

pub use text::{parse_energy, write_energy};

/// Hard cap on clique size. Tables, capacity scans and QP constraint counts
/// are all exponential in the clique size.
pub const K_MAX: usize = 6;

/// Largest variable count accepted by [`SoSEnergy::brute_force_minimize`].
pub const BRUTE_FORCE_MAX_VARS: usize = 24;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct VarId(pub usize);

impl VarId {
    pub fn index(self) -> usize {
        self.0
    }
}

impl From<usize> for VarId {
    fn from(v: usize) -> Self {
        VarId(v)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Clique {
    id: usize,
    members: Vec<VarId>,
}

impl Clique {
    pub fn new(id: usize, members: Vec<VarId>) -> Result<Self> {
        if members.is_empty() || members.len() > K_MAX {
            return Err(Error::InvalidInput(format!(
                "clique size {} outside 1..={K_MAX}",
                members.len()
            )));
        }
        for (p, m) in members.iter().enumerate() {
            if members[..p].contains(m) {
                return Err(Error::InvalidInput(format!(
                    "clique has duplicate member {}",
                    m.0
                )));
            }
        }
        Ok(Clique { id, members })
    }

    pub fn id(&self) -> usize {
        self.id
    }

    pub fn members(&self) -> &[VarId] {
        &self.members
    }

    pub fn len(&self) -> usize {
        self.members.len()
    }

    pub fn is_empty(&self) -> bool {
        self.members.is_empty()
    }

    /// Mask of `labeling` restricted to this clique.
    pub fn mask_of(&self, labeling: &Labeling) -> usize {
        self.members
            .iter()
            .enumerate()
            .filter(|(_, v)| labeling.get(v.0))
            .fold(0, |m, (p, _)| m | (1 << p))
    }

    pub fn position_of(&self, var: VarId) -> Option<usize> {
        self.members.iter().position(|&m| m == var)
    }
}

/// One failed elementary inequality
/// `f(A+i) + f(A+j) >= f(A+i+j) + f(A)`, with `A` given as a mask and
/// `i`, `j` as member positions.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Violation {
    pub base: usize,
    pub i: usize,
    pub j: usize,
    pub amount: f64,
}

impl fmt::Display for Violation {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(
            f,
            "A={:#b}, i={}, j={} violated by {}",
            self.base, self.i, self.j, self.amount
        )
    }
}

/// Enumerates the elementary submodularity inequalities of a `k`-member table:
/// yields `(a, i, j)` with `i < j` positions and `a` a mask avoiding both.
pub fn elementary_pairs(k: usize) -> impl Iterator<Item = (usize, usize, usize)> {
    (0..k).flat_map(move |i| {
        (i + 1..k).flat_map(move |j| {
            let excluded = (1usize << i) | (1 << j);
            (0..1usize << k)
                .filter(move |a| a & excluded == 0)
                .map(move |a| (a, i, j))
        })
    })
}

/// Every elementary inequality violated by more than `tol`.
pub fn table_violations(table: &[f64], tol: f64) -> Vec<Violation> {
    let k = table.len().trailing_zeros() as usize;
    debug_assert_eq!(table.len(), 1 << k);
    elementary_pairs(k)
        .filter_map(|(a, i, j)| {
            let (bi, bj) = (1 << i, 1 << j);
            let amount = table[a | bi | bj] + table[a] - table[a | bi] - table[a | bj];
            (amount > tol).then_some(Violation {
                base: a,
                i,
                j,
                amount,
            })
        })
        .collect()
}

/// Adds `δ·(−C(|T|, 2))` to the table, where `δ` is its largest elementary
/// violation. That term has slack exactly 1 in every elementary inequality,
/// so the result is submodular. Returns `δ` (0 when nothing changed).
pub fn lift_to_submodular(table: &mut [f64]) -> f64 {
    let delta = table_violations(table, 0.0).iter().map(|v| v.amount).fold(0.0, f64::max);
    if delta > 0.0 {
        for (mask, t) in table.iter_mut().enumerate() {
            let m = mask.count_ones() as f64;
            *t -= delta * m * (m - 1.0) / 2.0;
        }
    }
    delta
}

#[derive(Debug, Clone, PartialEq)]
pub struct CliqueFunction {
    clique: Clique,
    table: Vec<f64>,
}

impl CliqueFunction {
    pub fn new(clique: Clique, table: Vec<f64>) -> Result<Self> {
        let expected = 1usize << clique.len();
        if table.len() != expected {
            return Err(Error::DimensionMismatch {
                expected,
                actual: table.len(),
            });
        }
        if let Some(bad) = table.iter().find(|v| !v.is_finite()) {
            return Err(Error::InvalidInput(format!("non-finite table entry {bad}")));
        }
        Ok(CliqueFunction { clique, table })
    }

    pub fn clique(&self) -> &Clique {
        &self.clique
    }

    pub fn table(&self) -> &[f64] {
        &self.table
    }

    pub fn value(&self, mask: usize) -> f64 {
        self.table[mask]
    }

    pub fn value_on(&self, labeling: &Labeling) -> f64 {
        self.table[self.clique.mask_of(labeling)]
    }

    /// Violated elementary inequalities; empty iff the table is submodular
    /// within `tol`.
    pub fn is_submodular(&self, tol: f64) -> SubmodularityReport {
        SubmodularityReport {
            violations: table_violations(&self.table, tol),
        }
    }

    /// Subtracts the minimum entry so the smallest value becomes exactly 0.
    /// Returns the shifted function and the subtracted offset.
    pub fn shift_to_nonnegative(&self) -> (CliqueFunction, f64) {
        let offset = self.table.iter().copied().fold(f64::INFINITY, f64::min);
        let table = self.table.iter().map(|v| v - offset).collect();
        (
            CliqueFunction {
                clique: self.clique.clone(),
                table,
            },
            offset,
        )
    }

    pub fn max_abs(&self) -> f64 {
        self.table.iter().fold(0.0, |m, v| m.max(v.abs()))
    }
}

#[derive(Debug, Clone, Default, PartialEq)]
pub struct SubmodularityReport {
    pub violations: Vec<Violation>,
}

impl SubmodularityReport {
    pub fn is_submodular(&self) -> bool {
        self.violations.is_empty()
    }

    pub fn worst(&self) -> Option<&Violation> {
        self.violations
            .iter()
            .max_by(|a, b| a.amount.total_cmp(&b.amount))
    }
}

/// Assignment of each variable to {0, 1}; equivalently the set of variables
/// labeled 1.
#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub struct Labeling {
    bits: Vec<bool>,
}

impl Labeling {
    pub fn empty(n: usize) -> Self {
        Labeling {
            bits: vec![false; n],
        }
    }

    pub fn from_bits(bits: Vec<bool>) -> Self {
        Labeling { bits }
    }

    pub fn from_set(n: usize, members: &[usize]) -> Self {
        let mut l = Labeling::empty(n);
        for &m in members {
            l.bits[m] = true;
        }
        l
    }

    /// Labeling of `n` variables where variable `i` is set iff bit `i` of
    /// `mask` is set.
    pub fn from_mask(n: usize, mask: u64) -> Self {
        Labeling {
            bits: (0..n).map(|i| mask >> i & 1 == 1).collect(),
        }
    }

    /// Parses a string of `0`/`1` characters.
    pub fn from_bitstring(s: &str) -> Result<Self> {
        s.chars()
            .map(|c| match c {
                '0' => Ok(false),
                '1' => Ok(true),
                other => Err(Error::InvalidInput(format!("bad label character {other:?}"))),
            })
            .collect::<Result<Vec<_>>>()
            .map(Labeling::from_bits)
    }

    pub fn to_bitstring(&self) -> String {
        self.bits.iter().map(|&b| if b { '1' } else { '0' }).collect()
    }

    pub fn len(&self) -> usize {
        self.bits.len()
    }

    pub fn is_empty(&self) -> bool {
        self.bits.is_empty()
    }

    pub fn get(&self, i: usize) -> bool {
        self.bits[i]
    }

    pub fn set(&mut self, i: usize, value: bool) {
        self.bits[i] = value;
    }

    pub fn bits(&self) -> &[bool] {
        &self.bits
    }

    pub fn count_ones(&self) -> usize {
        self.bits.iter().filter(|&&b| b).count()
    }

    pub fn members(&self) -> impl Iterator<Item = usize> + '_ {
        self.bits
            .iter()
            .enumerate()
            .filter_map(|(i, &b)| b.then_some(i))
    }

    pub fn complement(&self) -> Labeling {
        Labeling {
            bits: self.bits.iter().map(|b| !b).collect(),
        }
    }
}

/// Unary costs plus a collection of clique functions over variables
/// `0..num_vars`.
#[derive(Debug, Clone, PartialEq)]
pub struct SoSEnergy {
    num_vars: usize,
    /// `(cost of label 0, cost of label 1)` per variable.
    unary: Vec<[f64; 2]>,
    cliques: Vec<CliqueFunction>,
}

impl SoSEnergy {
    pub fn new(num_vars: usize) -> Self {
        SoSEnergy {
            num_vars,
            unary: vec![[0.0; 2]; num_vars],
            cliques: Vec::new(),
        }
    }

    pub fn num_vars(&self) -> usize {
        self.num_vars
    }

    pub fn unary(&self) -> &[[f64; 2]] {
        &self.unary
    }

    pub fn cliques(&self) -> &[CliqueFunction] {
        &self.cliques
    }

    pub fn set_unary(&mut self, var: usize, cost0: f64, cost1: f64) -> Result<()> {
        self.check_var(var)?;
        if !cost0.is_finite() || !cost1.is_finite() {
            return Err(Error::InvalidInput(format!(
                "non-finite unary cost for variable {var}"
            )));
        }
        self.unary[var] = [cost0, cost1];
        Ok(())
    }

    pub fn add_unary(&mut self, var: usize, cost0: f64, cost1: f64) -> Result<()> {
        let [a, b] = self.unary.get(var).copied().unwrap_or_default();
        self.set_unary(var, a + cost0, b + cost1)
    }

    /// Adds a clique over `members` with `table` in mask order; returns the
    /// clique id.
    pub fn add_clique(&mut self, members: &[usize], table: Vec<f64>) -> Result<usize> {
        for &m in members {
            self.check_var(m)?;
        }
        let id = self.cliques.len();
        let clique = Clique::new(id, members.iter().map(|&m| VarId(m)).collect())?;
        self.cliques.push(CliqueFunction::new(clique, table)?);
        Ok(id)
    }

    fn check_var(&self, var: usize) -> Result<()> {
        if var >= self.num_vars {
            return Err(Error::InvalidInput(format!(
                "variable {var} out of range (num_vars = {})",
                self.num_vars
            )));
        }
        Ok(())
    }

    /// Unary sum plus every clique function on its restriction of `labeling`.
    pub fn evaluate(&self, labeling: &Labeling) -> Result<f64> {
        if labeling.len() != self.num_vars {
            return Err(Error::DimensionMismatch {
                expected: self.num_vars,
                actual: labeling.len(),
            });
        }
        let unary: f64 = self
            .unary
            .iter()
            .zip(labeling.bits())
            .map(|(u, &b)| u[b as usize])
            .sum();
        let cliques: f64 = self.cliques.iter().map(|c| c.value_on(labeling)).sum();
        Ok(unary + cliques)
    }

    /// Checks every clique; the first failing clique is reported with its
    /// worst violation.
    pub fn check_submodular(&self, tol: f64) -> Result<()> {
        for c in &self.cliques {
            let report = c.is_submodular(tol);
            if let Some(v) = report.worst() {
                return Err(Error::NotSubmodular {
                    clique: c.clique().id(),
                    violation: *v,
                });
            }
        }
        Ok(())
    }

    /// Largest absolute coefficient in the energy, at least 1.
    pub fn scale(&self) -> f64 {
        let u = self
            .unary
            .iter()
            .fold(0.0f64, |m, [a, b]| m.max(a.abs()).max(b.abs()));
        self.cliques
            .iter()
            .fold(u, |m, c| m.max(c.max_abs()))
            .max(1.0)
    }

    /// Exhaustive minimization over all `2^n` labelings.
    ///
    /// Labelings are visited in increasing order of the mask whose bit `i`
    /// is variable `i`; the first labeling attaining the minimum wins, so ties
    /// go to the smallest such mask.
    pub fn brute_force_minimize(&self) -> Result<(f64, Labeling)> {
        let n = self.num_vars;
        if n > BRUTE_FORCE_MAX_VARS {
            return Err(Error::TooLarge(n, BRUTE_FORCE_MAX_VARS));
        }
        let clique_vars: Vec<Vec<usize>> = self
            .cliques
            .iter()
            .map(|c| c.clique().members().iter().map(|v| v.0).collect())
            .collect();
        let mut best = (f64::INFINITY, 0u64);
        for mask in 0..1u64 << n {
            let mut value = 0.0;
            for (i, u) in self.unary.iter().enumerate() {
                value += u[(mask >> i & 1) as usize];
            }
            for (c, vars) in self.cliques.iter().zip(&clique_vars) {
                let sub = vars
                    .iter()
                    .enumerate()
                    .fold(0usize, |m, (p, &v)| m | (((mask >> v & 1) as usize) << p));
                value += c.value(sub);
            }
            if value < best.0 {
                best = (value, mask);
            }
        }
        Ok((best.0, Labeling::from_mask(n, best.1)))
    }
}
