//! Multi-label S3SVM: one copy of every clique block and of the unary block
//! per label. Separation runs α-expansion and is therefore approximate.

use super::{alpha_expansion, MultiLabelEnergy, MultiLabeling};
use crate::energy::table_violations;
use crate::error::{Error, Result};
use crate::flow::FlowOptions;
use crate::learn::{FeatureSchema, Instance, Separated, StructuredModel};

#[derive(Debug, Clone)]
pub struct MultiLabelLearner {
    /// Clique types and unary features of a single label copy.
    pub schema: FeatureSchema,
    pub num_labels: usize,
    pub normalize_loss: bool,
    pub flow: FlowOptions,
}

impl MultiLabelLearner {
    pub fn new(schema: FeatureSchema, num_labels: usize) -> Self {
        MultiLabelLearner {
            schema,
            num_labels,
            normalize_loss: true,
            flow: FlowOptions::default(),
        }
    }

    fn clique_part(&self) -> usize {
        self.schema.unary_offset()
    }

    fn block_offset(&self, label: usize, clique_type: usize) -> usize {
        label * self.clique_part() + self.schema.block_offset(clique_type)
    }

    fn unary_offset(&self, label: usize) -> usize {
        self.num_labels * self.clique_part() + label * self.schema.unary_features.len()
    }

    fn check(&self, w: Option<&[f64]>, x: &Instance, y: Option<&MultiLabeling>) -> Result<()> {
        x.validate(&self.schema)?;
        if x.unary0.is_some() || x.clamps.iter().any(Option::is_some) {
            return Err(Error::InvalidInput(
                "multi-label instances use label-1 unary features only and no clamps".into(),
            ));
        }
        if let Some(w) = w {
            if w.len() != self.dim() {
                return Err(Error::DimensionMismatch {
                    expected: self.dim(),
                    actual: w.len(),
                });
            }
        }
        if let Some(y) = y {
            if y.0.len() != x.num_vars {
                return Err(Error::DimensionMismatch {
                    expected: x.num_vars,
                    actual: y.0.len(),
                });
            }
            if y.0.iter().any(|&l| l >= self.num_labels) {
                return Err(Error::InvalidInput("label outside label set".into()));
            }
        }
        Ok(())
    }

    pub fn materialize(&self, w: &[f64], x: &Instance) -> Result<MultiLabelEnergy> {
        self.check(Some(w), x, None)?;
        let mut e = MultiLabelEnergy::new(x.num_vars, self.num_labels)?;
        let u = self.schema.unary_features.len();
        for i in 0..x.num_vars {
            let costs: Vec<f64> = (0..self.num_labels)
                .map(|l| {
                    let off = self.unary_offset(l);
                    x.unary1.dot(i, &w[off..off + u])
                })
                .collect();
            e.set_unary(i, &costs)?;
        }
        for c in &x.cliques {
            let size = 1 << self.schema.clique_types[c.clique_type].size;
            let tables = (0..self.num_labels)
                .map(|l| {
                    let off = self.block_offset(l, c.clique_type);
                    w[off..off + size].iter().map(|v| v * c.phi).collect()
                })
                .collect();
            e.add_clique(&c.members, tables)?;
        }
        Ok(e)
    }

    pub fn predict(&self, w: &[f64], x: &Instance) -> Result<MultiLabeling> {
        let e = self.materialize(w, x)?;
        Ok(alpha_expansion(&e, None, &self.flow)?.labeling)
    }
}

impl StructuredModel for MultiLabelLearner {
    type Input = Instance;
    type Output = MultiLabeling;

    fn dim(&self) -> usize {
        self.num_labels * (self.clique_part() + self.schema.unary_features.len())
    }

    fn psi(&self, x: &Instance, y: &MultiLabeling) -> Result<Vec<f64>> {
        self.check(None, x, Some(y))?;
        let mut out = vec![0.0; self.dim()];
        for c in &x.cliques {
            for l in 0..self.num_labels {
                let mask = c
                    .members
                    .iter()
                    .enumerate()
                    .filter(|(_, &v)| y.0[v] == l)
                    .fold(0usize, |m, (p, _)| m | 1 << p);
                out[self.block_offset(l, c.clique_type) + mask] += c.phi;
            }
        }
        for (i, &l) in y.0.iter().enumerate() {
            let off = self.unary_offset(l);
            for (j, v) in x.unary1.row(i) {
                out[off + j] += v;
            }
        }
        Ok(out)
    }

    fn loss(&self, _x: &Instance, y: &MultiLabeling, y_hat: &MultiLabeling) -> Result<f64> {
        if y.0.len() != y_hat.0.len() {
            return Err(Error::DimensionMismatch {
                expected: y.0.len(),
                actual: y_hat.0.len(),
            });
        }
        let wrong = y.0.iter().zip(&y_hat.0).filter(|(a, b)| a != b).count() as f64;
        Ok(if self.normalize_loss && !y.0.is_empty() {
            wrong / y.0.len() as f64
        } else {
            wrong
        })
    }

    fn lift(&self, w: &mut [f64]) {
        let part = self.clique_part();
        for l in 0..self.num_labels {
            self.schema.lift_to_submodular(&mut w[l * part..(l + 1) * part]);
        }
    }

    fn separate(&self, w: &[f64], x: &Instance, y: &MultiLabeling) -> Result<Separated<MultiLabeling>> {
        self.check(Some(w), x, Some(y))?;
        let mut e = self.materialize(w, x)?;
        let violation = e
            .cliques()
            .iter()
            .flat_map(|c| c.tables().iter().flat_map(|t| table_violations(t, 0.0)))
            .map(|v| v.amount)
            .fold(0.0, f64::max);
        let unit = if self.normalize_loss && x.num_vars > 0 {
            1.0 / x.num_vars as f64
        } else {
            1.0
        };
        for (i, &truth) in y.0.iter().enumerate() {
            for l in (0..self.num_labels).filter(|&l| l != truth) {
                e.add_to_unary(i, l, -unit)?;
            }
        }
        let r = alpha_expansion(&e, None, &self.flow)?;
        Ok(Separated {
            output: r.labeling,
            submodularity_violation: violation,
        })
    }

    fn plain_rows(&self) -> Vec<Vec<f64>> {
        let single = self.schema.submodularity_rows();
        let part = self.clique_part();
        let dim = self.dim();
        let mut rows = Vec::new();
        for l in 0..self.num_labels {
            for r in &single {
                let mut row = vec![0.0; dim];
                row[l * part..(l + 1) * part].copy_from_slice(&r[..part]);
                rows.push(row);
            }
        }
        rows
    }

    fn exact_separation(&self) -> bool {
        false
    }
}
