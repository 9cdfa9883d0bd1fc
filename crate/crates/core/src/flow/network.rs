use crate::energy::{Labeling, SoSEnergy};
use crate::error::{Error, Result};

/// An arc of the submodular flow network. Interior arcs name their endpoints
/// by member position inside the clique.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Arc {
    Source(usize),
    Sink(usize),
    Interior {
        clique: usize,
        from: usize,
        to: usize,
    },
}

impl std::fmt::Display for Arc {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            Arc::Source(i) => write!(f, "(s, {i})"),
            Arc::Sink(i) => write!(f, "({i}, t)"),
            Arc::Interior { clique, from, to } => write!(f, "({from}, {to})_{clique}"),
        }
    }
}

#[derive(Debug, Clone)]
pub(crate) struct CliqueSlot {
    pub start: usize,
    pub members: Vec<u32>,
}

impl CliqueSlot {
    pub fn size(&self) -> usize {
        self.members.len()
    }
}

/// Residual network: source/sink residuals per variable and one residual
/// clique table per clique. Interior capacities are never cached; they are
/// recomputed from the tables on demand.
#[derive(Debug, Clone)]
pub struct FlowNetwork {
    pub(crate) source: Vec<f64>,
    pub(crate) sink: Vec<f64>,
    pub(crate) cliques: Vec<CliqueSlot>,
    pub(crate) tables: Vec<f64>,
    offset: f64,
    scale: f64,
    /// Most negative table entry or terminal residual ever produced by a push,
    /// before clamping.
    pub(crate) lowest_residual: f64,
}

impl FlowNetwork {
    /// Reparameterizes `energy` into a network with nonnegative residuals.
    ///
    /// Each clique table is split into its value on the empty set (moved into
    /// the constant offset), a modular part (the greedy base-polytope vertex
    /// in member order, moved into the unaries) and a remainder that is
    /// nonnegative and zero on both the empty set and the full clique. Unary
    /// costs `(a, b)` for labels 0/1 become `c(s,i) = max(a - b, 0)`,
    /// `c(i,t) = max(b - a, 0)` plus `min(a, b)` in the offset, with label 1
    /// on the source side.
    pub fn build(energy: &SoSEnergy, tol: f64) -> Result<FlowNetwork> {
        let scale = energy.scale();
        energy.check_submodular(tol * scale)?;
        let n = energy.num_vars();
        let mut cost: Vec<[f64; 2]> = energy.unary().to_vec();
        let mut offset = 0.0;
        let mut cliques = Vec::with_capacity(energy.cliques().len());
        let mut tables = Vec::new();
        for c in energy.cliques() {
            let members: Vec<u32> = c.clique().members().iter().map(|v| v.0 as u32).collect();
            let k = members.len();
            let t = c.table();
            let base = t[0];
            offset += base;
            let mut modular = vec![0.0; k];
            let mut prefix = 0usize;
            for (p, m) in modular.iter_mut().enumerate() {
                let next = prefix | (1 << p);
                *m = t[next] - t[prefix];
                prefix = next;
            }
            for (p, &v) in members.iter().enumerate() {
                cost[v as usize][1] += modular[p];
            }
            let start = tables.len();
            for (mask, &value) in t.iter().enumerate() {
                let linear: f64 = (0..k).filter(|p| mask >> p & 1 == 1).map(|p| modular[p]).sum();
                let r = value - base - linear;
                tables.push(if r < 0.0 { 0.0 } else { r });
            }
            cliques.push(CliqueSlot { start, members });
        }
        let mut source = vec![0.0; n];
        let mut sink = vec![0.0; n];
        for (i, [a, b]) in cost.into_iter().enumerate() {
            offset += a.min(b);
            source[i] = (a - b).max(0.0);
            sink[i] = (b - a).max(0.0);
        }
        Ok(FlowNetwork {
            source,
            sink,
            cliques,
            tables,
            offset,
            scale,
            lowest_residual: 0.0,
        })
    }

    pub fn num_vars(&self) -> usize {
        self.source.len()
    }

    pub fn num_cliques(&self) -> usize {
        self.cliques.len()
    }

    /// Constant separating the energy from the cut value:
    /// `energy(S) = offset + cut_value(S)` for the freshly built network.
    pub fn offset(&self) -> f64 {
        self.offset
    }

    pub(crate) fn scale(&self) -> f64 {
        self.scale
    }

    pub fn source_residual(&self, var: usize) -> f64 {
        self.source[var]
    }

    pub fn sink_residual(&self, var: usize) -> f64 {
        self.sink[var]
    }

    pub fn clique_members(&self, clique: usize) -> Vec<usize> {
        self.cliques[clique]
            .members
            .iter()
            .map(|&m| m as usize)
            .collect()
    }

    pub fn residual_table(&self, clique: usize) -> &[f64] {
        let slot = &self.cliques[clique];
        &self.tables[slot.start..slot.start + (1 << slot.size())]
    }

    /// Smallest entry over all residual tables and terminal residuals ever
    /// produced by a push, before rounding noise is clamped.
    pub fn lowest_residual(&self) -> f64 {
        self.lowest_residual
    }

    /// Minimum of the residual table over subsets containing position `from`
    /// and excluding position `to`.
    pub(crate) fn interior_capacity(&self, clique: usize, from: usize, to: usize) -> f64 {
        let slot = &self.cliques[clique];
        let k = slot.size();
        let table = &self.tables[slot.start..slot.start + (1 << k)];
        let bf = 1usize << from;
        let rest = ((1usize << k) - 1) & !(bf | 1 << to);
        let mut best = table[bf];
        let mut sub = rest;
        while sub != 0 {
            best = best.min(table[sub | bf]);
            sub = (sub - 1) & rest;
        }
        best
    }

    fn check_arc(&self, arc: Arc) -> Result<()> {
        let n = self.num_vars();
        let ok = match arc {
            Arc::Source(i) | Arc::Sink(i) => i < n,
            Arc::Interior { clique, from, to } => {
                clique < self.cliques.len()
                    && from != to
                    && from < self.cliques[clique].size()
                    && to < self.cliques[clique].size()
            }
        };
        if ok {
            Ok(())
        } else {
            Err(Error::InvalidInput(format!("no such arc {arc}")))
        }
    }

    pub fn residual_capacity(&self, arc: Arc) -> Result<f64> {
        self.check_arc(arc)?;
        Ok(match arc {
            Arc::Source(i) => self.source[i],
            Arc::Sink(i) => self.sink[i],
            Arc::Interior { clique, from, to } => self.interior_capacity(clique, from, to),
        })
    }

    /// Pushes `delta` units along `arc`. On an interior arc `(i, j)_C` every
    /// table entry for a subset containing `i` but not `j` drops by `delta`
    /// and every entry containing `j` but not `i` rises by `delta`.
    pub fn push(&mut self, arc: Arc, delta: f64) -> Result<()> {
        let capacity = self.residual_capacity(arc)?;
        if !(delta > 0.0) || delta > capacity + 1e-12 * self.scale.max(capacity) {
            return Err(Error::CapacityExceeded {
                arc: arc.to_string(),
                delta,
                capacity,
            });
        }
        let mut lowest = self.lowest_residual;
        match arc {
            Arc::Source(i) => {
                let r = self.source[i] - delta;
                lowest = lowest.min(r);
                self.source[i] = r.max(0.0);
            }
            Arc::Sink(i) => {
                let r = self.sink[i] - delta;
                lowest = lowest.min(r);
                self.sink[i] = r.max(0.0);
            }
            Arc::Interior { clique, from, to } => {
                let slot = &self.cliques[clique];
                let (bf, bt) = (1usize << from, 1usize << to);
                let table = &mut self.tables[slot.start..slot.start + (1 << slot.size())];
                for (mask, v) in table.iter_mut().enumerate() {
                    match (mask & bf != 0, mask & bt != 0) {
                        (true, false) => {
                            let r = *v - delta;
                            lowest = lowest.min(r);
                            *v = r.max(0.0);
                        }
                        (false, true) => *v += delta,
                        _ => {}
                    }
                }
            }
        }
        self.lowest_residual = lowest;
        Ok(())
    }

    /// `sum_{i not in S} c(s,i) + sum_{i in S} c(i,t) + sum_C table_C(S ∩ C)`
    /// on the current residuals.
    pub fn cut_value(&self, labeling: &Labeling) -> Result<f64> {
        if labeling.len() != self.num_vars() {
            return Err(Error::DimensionMismatch {
                expected: self.num_vars(),
                actual: labeling.len(),
            });
        }
        let mut value = 0.0;
        for (i, &b) in labeling.bits().iter().enumerate() {
            value += if b { self.sink[i] } else { self.source[i] };
        }
        for slot in &self.cliques {
            let mask = slot
                .members
                .iter()
                .enumerate()
                .filter(|(_, &m)| labeling.get(m as usize))
                .fold(0usize, |acc, (p, _)| acc | 1 << p);
            value += self.tables[slot.start + mask];
        }
        Ok(value)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn single_pair(table: Vec<f64>) -> FlowNetwork {
        let mut e = SoSEnergy::new(2);
        e.add_clique(&[0, 1], table).unwrap();
        FlowNetwork::build(&e, 1e-9).unwrap()
    }

    #[test]
    fn unary_reparameterization() {
        let mut e = SoSEnergy::new(1);
        e.set_unary(0, 5.0, 3.0).unwrap();
        let net = FlowNetwork::build(&e, 1e-9).unwrap();
        assert_eq!(net.source_residual(0), 2.0);
        assert_eq!(net.sink_residual(0), 0.0);
        assert_eq!(net.offset(), 3.0);
    }

    #[test]
    fn zero_energy_network() {
        let mut e = SoSEnergy::new(3);
        e.add_clique(&[0, 1, 2], vec![0.0; 8]).unwrap();
        let net = FlowNetwork::build(&e, 1e-9).unwrap();
        assert_eq!(net.offset(), 0.0);
        assert!(net.residual_table(0).iter().all(|&v| v == 0.0));
        assert!((0..3).all(|i| net.source_residual(i) == 0.0 && net.sink_residual(i) == 0.0));
    }

    #[test]
    fn rejects_non_submodular() {
        let mut e = SoSEnergy::new(2);
        e.add_clique(&[0, 1], vec![0.0, 0.0, 0.0, 1.0]).unwrap();
        assert!(matches!(
            FlowNetwork::build(&e, 1e-9),
            Err(Error::NotSubmodular { clique: 0, .. })
        ));
    }

    #[test]
    fn residual_table_is_normalized() {
        // f(∅)=1, f(a)=0, f(b)=2, f(ab)=1: submodular, minimum at {a}.
        let net = single_pair(vec![1.0, 0.0, 2.0, 1.0]);
        let t = net.residual_table(0);
        assert_eq!(t[0], 0.0);
        assert_eq!(t[3], 0.0);
        assert!(t.iter().all(|&v| v >= 0.0));
    }

    #[test]
    fn capacity_and_push_on_pair() {
        // Build the residual (0, 2, 3, 0) directly: it is already normalized.
        let mut net = single_pair(vec![0.0, 2.0, 3.0, 0.0]);
        // Normalization moves the modular part (2, -2) into the unaries.
        assert_eq!(net.residual_table(0), &[0.0, 0.0, 5.0, 0.0]);
        net.tables.copy_from_slice(&[0.0, 2.0, 3.0, 0.0]);
        let arc = Arc::Interior {
            clique: 0,
            from: 0,
            to: 1,
        };
        assert_eq!(net.residual_capacity(arc).unwrap(), 2.0);
        net.push(arc, 2.0).unwrap();
        assert_eq!(net.residual_table(0), &[0.0, 0.0, 5.0, 0.0]);
        let back = Arc::Interior {
            clique: 0,
            from: 1,
            to: 0,
        };
        net.push(back, 2.0).unwrap();
        assert_eq!(net.residual_table(0), &[0.0, 2.0, 3.0, 0.0]);
    }

    #[test]
    fn push_rejects_excess() {
        let mut net = single_pair(vec![0.0, 1.0, 1.0, 1.0]);
        net.tables.copy_from_slice(&[0.0, 2.0, 3.0, 0.0]);
        let arc = Arc::Interior {
            clique: 0,
            from: 0,
            to: 1,
        };
        assert!(matches!(
            net.push(arc, 2.5),
            Err(Error::CapacityExceeded { .. })
        ));
        assert!(net.push(arc, 0.0).is_err());
        assert!(net
            .residual_capacity(Arc::Interior {
                clique: 0,
                from: 0,
                to: 0
            })
            .is_err());
        assert!(net
            .residual_capacity(Arc::Interior {
                clique: 0,
                from: 0,
                to: 2
            })
            .is_err());
    }

    #[test]
    fn zero_table_has_zero_capacity() {
        let mut e = SoSEnergy::new(4);
        e.add_clique(&[0, 1, 2, 3], vec![0.0; 16]).unwrap();
        let net = FlowNetwork::build(&e, 1e-9).unwrap();
        for from in 0..4 {
            for to in 0..4 {
                if from != to {
                    let arc = Arc::Interior { clique: 0, from, to };
                    assert_eq!(net.residual_capacity(arc).unwrap(), 0.0);
                }
            }
        }
    }
}
