//! Structural SVM training of SoS energies.
//!
//! A [`FeatureSchema`] fixes the weight layout: one block of `2^k` weights
//! per clique type (shared by every clique instance of that type, scaled by
//! the instance's `Φ ≥ 0`), followed by `U` unary weights. With every clique
//! block submodular, every materialized energy is submodular and inference
//! is exact.

mod model;
mod train;

pub use model::{read_model, write_model, Model};
pub use train::{train_structured, IterationLog, Separated, StructuredModel, TrainConfig, TrainReport};

use sha2::{Digest, Sha256};

use crate::energy::{elementary_pairs, lift_to_submodular, table_violations, Labeling, SoSEnergy, K_MAX};
use crate::error::{Error, Result};
use crate::flow::{self, FlowOptions};

#[derive(Debug, Clone, PartialEq)]
pub struct CliqueType {
    pub name: String,
    pub size: usize,
    /// Name of the data term Φ for this type, with numeric parameters
    /// (e.g. a cluster centroid).
    pub phi: String,
    pub params: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq, Default)]
pub struct FeatureSchema {
    pub clique_types: Vec<CliqueType>,
    pub unary_features: Vec<String>,
    /// Named numeric parameters shared by the whole schema, such as
    /// standardization statistics.
    pub params: Vec<(String, Vec<f64>)>,
}

impl FeatureSchema {
    pub fn dim(&self) -> usize {
        self.unary_offset() + self.unary_features.len()
    }

    pub fn block_offset(&self, clique_type: usize) -> usize {
        self.clique_types[..clique_type]
            .iter()
            .map(|t| 1usize << t.size)
            .sum()
    }

    pub fn unary_offset(&self) -> usize {
        self.block_offset(self.clique_types.len())
    }

    pub fn clique_block<'a>(&self, w: &'a [f64], clique_type: usize) -> &'a [f64] {
        let start = self.block_offset(clique_type);
        &w[start..start + (1 << self.clique_types[clique_type].size)]
    }

    pub fn param(&self, name: &str) -> Option<&[f64]> {
        self.params
            .iter()
            .find(|(n, _)| n == name)
            .map(|(_, v)| v.as_slice())
    }

    pub fn validate(&self) -> Result<()> {
        for t in &self.clique_types {
            if t.size == 0 || t.size > K_MAX {
                return Err(Error::InvalidInput(format!(
                    "clique type {} has size {}",
                    t.name, t.size
                )));
            }
        }
        let names = self
            .clique_types
            .iter()
            .flat_map(|t| [&t.name, &t.phi])
            .chain(&self.unary_features)
            .chain(self.params.iter().map(|(n, _)| n));
        for n in names {
            if n.is_empty() || n.contains(char::is_whitespace) {
                return Err(Error::InvalidInput(format!("bad schema name {n:?}")));
            }
        }
        Ok(())
    }

    /// Rows `w_{A∪i} + w_{A∪j} − w_{A∪ij} − w_A ≥ 0` for every clique block.
    pub fn submodularity_rows(&self) -> Vec<Vec<f64>> {
        let dim = self.dim();
        let mut rows = Vec::new();
        for (t, ty) in self.clique_types.iter().enumerate() {
            let off = self.block_offset(t);
            for (base, i, j) in elementary_pairs(ty.size) {
                let mut row = vec![0.0; dim];
                row[off + (base | 1 << i)] += 1.0;
                row[off + (base | 1 << j)] += 1.0;
                row[off + (base | 1 << i | 1 << j)] -= 1.0;
                row[off + base] -= 1.0;
                rows.push(row);
            }
        }
        rows
    }

    /// Largest elementary-inequality violation over all clique blocks of `w`.
    pub fn max_submodularity_violation(&self, w: &[f64]) -> f64 {
        (0..self.clique_types.len())
            .flat_map(|t| table_violations(self.clique_block(w, t), 0.0))
            .map(|v| v.amount)
            .fold(0.0, f64::max)
    }

    /// Applies [`lift_to_submodular`] to every clique block of `w`. Only the
    /// clique part of `w` is touched.
    pub fn lift_to_submodular(&self, w: &mut [f64]) {
        for (t, ty) in self.clique_types.iter().enumerate() {
            let off = self.block_offset(t);
            lift_to_submodular(&mut w[off..off + (1 << ty.size)]);
        }
    }

    /// Hex SHA-256 of the schema section of the model file.
    pub fn hash(&self) -> String {
        let digest = Sha256::digest(model::schema_text(self).as_bytes());
        digest.iter().map(|b| format!("{b:02x}")).collect()
    }
}

/// Row-compressed sparse matrix with one row per variable.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct SparseRows {
    offsets: Vec<usize>,
    index: Vec<u32>,
    value: Vec<f64>,
}

impl SparseRows {
    pub fn new() -> Self {
        SparseRows {
            offsets: vec![0],
            index: Vec::new(),
            value: Vec::new(),
        }
    }

    pub fn push_row(&mut self, entries: impl IntoIterator<Item = (usize, f64)>) {
        for (i, v) in entries {
            if v != 0.0 {
                self.index.push(i as u32);
                self.value.push(v);
            }
        }
        self.offsets.push(self.index.len());
    }

    pub fn from_dense(rows: &[Vec<f64>]) -> Self {
        let mut s = SparseRows::new();
        for r in rows {
            s.push_row(r.iter().copied().enumerate());
        }
        s
    }

    pub fn num_rows(&self) -> usize {
        self.offsets.len() - 1
    }

    pub fn row(&self, i: usize) -> impl Iterator<Item = (usize, f64)> + '_ {
        let range = self.offsets[i]..self.offsets[i + 1];
        self.index[range.clone()]
            .iter()
            .zip(&self.value[range])
            .map(|(&j, &v)| (j as usize, v))
    }

    pub fn dot(&self, i: usize, w: &[f64]) -> f64 {
        self.row(i).map(|(j, v)| w[j] * v).sum()
    }

    fn max_index(&self) -> Option<usize> {
        self.index.iter().max().map(|&j| j as usize)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct CliqueInstance {
    pub clique_type: usize,
    pub members: Vec<usize>,
    pub phi: f64,
}

/// One input `x`: variables, clique instances with their Φ values, and unary
/// features for each label.
#[derive(Debug, Clone, PartialEq)]
pub struct Instance {
    pub num_vars: usize,
    pub cliques: Vec<CliqueInstance>,
    /// Unary features paired with label 1.
    pub unary1: SparseRows,
    /// Unary features paired with label 0; all zero when absent.
    pub unary0: Option<SparseRows>,
    /// Variables whose label is fixed. Restricts the output space; not part
    /// of Ψ.
    pub clamps: Vec<Option<bool>>,
}

impl Instance {
    pub fn validate(&self, schema: &FeatureSchema) -> Result<()> {
        let u = schema.unary_features.len();
        for rows in std::iter::once(&self.unary1).chain(&self.unary0) {
            if rows.num_rows() != self.num_vars {
                return Err(Error::DimensionMismatch {
                    expected: self.num_vars,
                    actual: rows.num_rows(),
                });
            }
            if let Some(j) = rows.max_index().filter(|&j| j >= u) {
                return Err(Error::InvalidInput(format!(
                    "unary feature {j} outside schema ({u} features)"
                )));
            }
        }
        if !self.clamps.is_empty() && self.clamps.len() != self.num_vars {
            return Err(Error::DimensionMismatch {
                expected: self.num_vars,
                actual: self.clamps.len(),
            });
        }
        for c in &self.cliques {
            let ty = schema
                .clique_types
                .get(c.clique_type)
                .ok_or_else(|| Error::InvalidInput(format!("unknown clique type {}", c.clique_type)))?;
            if ty.size != c.members.len() {
                return Err(Error::DimensionMismatch {
                    expected: ty.size,
                    actual: c.members.len(),
                });
            }
            if !(c.phi.is_finite() && c.phi >= 0.0) {
                return Err(Error::InvalidInput(format!("negative or non-finite Φ {}", c.phi)));
            }
        }
        Ok(())
    }

    fn clamp(&self, i: usize) -> Option<bool> {
        self.clamps.get(i).copied().flatten()
    }
}

fn check_lengths(schema: &FeatureSchema, w: &[f64], x: &Instance, y: Option<&Labeling>) -> Result<()> {
    if w.len() != schema.dim() {
        return Err(Error::DimensionMismatch {
            expected: schema.dim(),
            actual: w.len(),
        });
    }
    if let Some(y) = y {
        if y.len() != x.num_vars {
            return Err(Error::DimensionMismatch {
                expected: x.num_vars,
                actual: y.len(),
            });
        }
    }
    Ok(())
}

/// Joint feature map `Ψ(x, y)`, so that `w·Ψ(x, y)` is the energy of `y`
/// under the energy materialized from `w`, clamps aside.
pub fn psi(schema: &FeatureSchema, x: &Instance, y: &Labeling) -> Result<Vec<f64>> {
    let mut out = vec![0.0; schema.dim()];
    check_lengths(schema, &out, x, Some(y))?;
    x.validate(schema)?;
    for c in &x.cliques {
        let mask = c
            .members
            .iter()
            .enumerate()
            .filter(|(_, &v)| y.get(v))
            .fold(0usize, |m, (p, _)| m | 1 << p);
        out[schema.block_offset(c.clique_type) + mask] += c.phi;
    }
    let off = schema.unary_offset();
    for i in 0..x.num_vars {
        let rows = if y.get(i) { Some(&x.unary1) } else { x.unary0.as_ref() };
        if let Some(rows) = rows {
            for (j, v) in rows.row(i) {
                out[off + j] += v;
            }
        }
    }
    Ok(out)
}

/// Energy with clique tables `w_τ·Φ` and unary costs `w_u·φ_label`, plus a
/// clamp cost large enough that no clamped variable is ever flipped.
pub fn materialize_energy(schema: &FeatureSchema, w: &[f64], x: &Instance) -> Result<SoSEnergy> {
    check_lengths(schema, w, x, None)?;
    x.validate(schema)?;
    let mut e = SoSEnergy::new(x.num_vars);
    let uw = &w[schema.unary_offset()..];
    for i in 0..x.num_vars {
        let c1 = x.unary1.dot(i, uw);
        let c0 = x.unary0.as_ref().map_or(0.0, |r| r.dot(i, uw));
        e.set_unary(i, c0, c1)?;
    }
    for c in &x.cliques {
        let table = schema
            .clique_block(w, c.clique_type)
            .iter()
            .map(|v| v * c.phi)
            .collect();
        e.add_clique(&c.members, table)?;
    }
    if x.clamps.iter().any(Option::is_some) {
        let bound: f64 = e.unary().iter().map(|[a, b]| a.abs() + b.abs()).sum::<f64>()
            + e.cliques()
                .iter()
                .map(|c| 2.0 * c.max_abs())
                .sum::<f64>();
        let big = 2.0 * bound + 1.0;
        for i in 0..x.num_vars {
            match x.clamp(i) {
                Some(true) => e.add_unary(i, big, 0.0)?,
                Some(false) => e.add_unary(i, 0.0, big)?,
                None => {}
            }
        }
    }
    Ok(e)
}

/// Number of disagreeing variables, divided by the variable count when
/// `normalize` is set.
pub fn hamming_loss(y: &Labeling, y_hat: &Labeling, normalize: bool) -> Result<f64> {
    if y.len() != y_hat.len() {
        return Err(Error::DimensionMismatch {
            expected: y.len(),
            actual: y_hat.len(),
        });
    }
    let wrong = y
        .bits()
        .iter()
        .zip(y_hat.bits())
        .filter(|(a, b)| a != b)
        .count() as f64;
    Ok(if normalize && !y.is_empty() {
        wrong / y.len() as f64
    } else {
        wrong
    })
}

/// Binary SoS learning problem over a fixed schema.
#[derive(Debug, Clone)]
pub struct SosLearner {
    pub schema: FeatureSchema,
    pub normalize_loss: bool,
    pub flow: FlowOptions,
}

impl SosLearner {
    pub fn new(schema: FeatureSchema) -> Self {
        SosLearner {
            schema,
            normalize_loss: true,
            flow: FlowOptions::default(),
        }
    }

    /// `argmin_ŷ f_w(x, ŷ) − Δ(y, ŷ)`, with the value attained.
    pub fn loss_augmented_inference(&self, w: &[f64], x: &Instance, y: &Labeling) -> Result<(Labeling, f64)> {
        let (y_hat, value, _) = self.loss_augmented(w, x, y)?;
        Ok((y_hat, value))
    }

    fn loss_augmented(&self, w: &[f64], x: &Instance, y: &Labeling) -> Result<(Labeling, f64, f64)> {
        check_lengths(&self.schema, w, x, Some(y))?;
        let mut e = materialize_energy(&self.schema, w, x)?;
        let violation = e
            .cliques()
            .iter()
            .flat_map(|c| table_violations(c.table(), 0.0))
            .map(|v| v.amount)
            .fold(0.0, f64::max);
        let unit = if self.normalize_loss && x.num_vars > 0 {
            1.0 / x.num_vars as f64
        } else {
            1.0
        };
        for i in 0..x.num_vars {
            if y.get(i) {
                e.add_unary(i, -unit, 0.0)?;
            } else {
                e.add_unary(i, 0.0, -unit)?;
            }
        }
        let r = flow::minimize_with(&e, &self.flow)?;
        Ok((r.minimizer, r.min_value, violation))
    }

    pub fn predict(&self, w: &[f64], x: &Instance) -> Result<Labeling> {
        let e = materialize_energy(&self.schema, w, x)?;
        Ok(flow::minimize_with(&e, &self.flow)?.minimizer)
    }

    pub fn train(&self, data: &[(Instance, Labeling)], cfg: &TrainConfig) -> Result<(Vec<f64>, TrainReport)> {
        for (x, y) in data {
            x.validate(&self.schema)?;
            if y.len() != x.num_vars {
                return Err(Error::DimensionMismatch {
                    expected: x.num_vars,
                    actual: y.len(),
                });
            }
        }
        train_structured(self, data, cfg)
    }
}

impl StructuredModel for SosLearner {
    type Input = Instance;
    type Output = Labeling;

    fn dim(&self) -> usize {
        self.schema.dim()
    }

    fn psi(&self, x: &Instance, y: &Labeling) -> Result<Vec<f64>> {
        psi(&self.schema, x, y)
    }

    fn loss(&self, _x: &Instance, y: &Labeling, y_hat: &Labeling) -> Result<f64> {
        hamming_loss(y, y_hat, self.normalize_loss)
    }

    fn lift(&self, w: &mut [f64]) {
        self.schema.lift_to_submodular(w);
    }

    fn separate(&self, w: &[f64], x: &Instance, y: &Labeling) -> Result<Separated<Labeling>> {
        let (output, _, violation) = self.loss_augmented(w, x, y)?;
        Ok(Separated {
            output,
            submodularity_violation: violation,
        })
    }

    fn plain_rows(&self) -> Vec<Vec<f64>> {
        self.schema.submodularity_rows()
    }
}
