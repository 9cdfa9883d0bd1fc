//! Scribble segmentation features.
//!
//! Unary features, all in `[0, 1]` and paired with the foreground label:
//!
//! * soft 12-bin histograms of each color channel at the 9 offsets of a 3×3
//!   window (324),
//! * Euclidean distance to the nearest foreground and background scribble,
//!   divided by the image diagonal (2; 1 when that class has no scribble),
//! * row and column, normalized (2),
//! * raw channel values (3),
//! * a constant (1).
//!
//! Grayscale images repeat their single channel. Each 2×2 patch is
//! described by the x and y forward differences of intensity at its four
//! pixels; standardized, these vectors are clustered, and the cluster picks
//! the patch's clique type (Φ = 1).

use rand::seq::index::sample;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};
use rayon::prelude::*;

use super::dataset::{Algorithm, Labeled};
use super::kmeans::{kmeans, nearest};
use super::{ImageGrid, ScribbleMask};
use crate::energy::Labeling;
use crate::error::{Error, Result};
use crate::flow::{self, FlowOptions};
use crate::learn::{
    hamming_loss, materialize_energy, CliqueInstance, CliqueType, FeatureSchema, Instance, SosLearner, SparseRows,
    TrainConfig, TrainReport,
};

pub const BINS: usize = 12;
pub const WINDOW: [(isize, isize); 9] = [
    (-1, -1),
    (-1, 0),
    (-1, 1),
    (0, -1),
    (0, 0),
    (0, 1),
    (1, -1),
    (1, 0),
    (1, 1),
];
pub const NUM_FEATURES: usize = 3 * WINDOW.len() * BINS + 2 + 2 + 3 + 1;
pub const GRADIENT_DIM: usize = 8;

pub fn feature_names() -> Vec<String> {
    let mut names = Vec::with_capacity(NUM_FEATURES);
    for ch in 0..3 {
        for (dr, dc) in WINDOW {
            for b in 0..BINS {
                names.push(format!("hist_c{ch}_r{dr}_c{dc}_b{b}"));
            }
        }
    }
    names.extend(
        ["dist_fg", "dist_bg", "coord_row", "coord_col", "raw_c0", "raw_c1", "raw_c2", "bias"]
            .map(String::from),
    );
    names
}

/// Weights of the two bins whose centres bracket `v`.
fn soft_bins(v: f64) -> [(usize, f64); 2] {
    let pos = (v * BINS as f64 - 0.5).clamp(0.0, (BINS - 1) as f64);
    let lo = pos.floor() as usize;
    let hi = (lo + 1).min(BINS - 1);
    let t = pos - lo as f64;
    [(lo, 1.0 - t), (hi, t)]
}

/// Exact Euclidean distance transform: distance from each pixel to the
/// nearest site, `None` when there are no sites.
pub fn distance_transform(width: usize, height: usize, sites: &[bool]) -> Option<Vec<f64>> {
    if !sites.iter().any(|&s| s) {
        return None;
    }
    let inf = 1e20;
    let mut grid: Vec<f64> = sites.iter().map(|&s| if s { 0.0 } else { inf }).collect();
    let mut buf = Vec::new();
    for c in 0..width {
        buf.clear();
        buf.extend((0..height).map(|r| grid[r * width + c]));
        let d = edt_1d(&buf);
        for r in 0..height {
            grid[r * width + c] = d[r];
        }
    }
    for r in 0..height {
        let d = edt_1d(&grid[r * width..(r + 1) * width]);
        grid[r * width..(r + 1) * width].copy_from_slice(&d);
    }
    Some(grid.into_iter().map(f64::sqrt).collect())
}

/// Lower envelope of parabolas; input and output are squared distances.
fn edt_1d(f: &[f64]) -> Vec<f64> {
    let n = f.len();
    let mut v = vec![0usize; n];
    let mut z = vec![0.0f64; n + 1];
    let mut k = 0;
    z[0] = f64::NEG_INFINITY;
    z[1] = f64::INFINITY;
    for q in 1..n {
        loop {
            let p = v[k];
            let s = ((f[q] + (q * q) as f64) - (f[p] + (p * p) as f64)) / (2.0 * (q as f64 - p as f64));
            if s <= z[k] && k > 0 {
                k -= 1;
                continue;
            }
            if s <= z[k] {
                // k == 0 and the new parabola dominates everywhere.
                v[0] = q;
                z[1] = f64::INFINITY;
                break;
            }
            k += 1;
            v[k] = q;
            z[k] = s;
            z[k + 1] = f64::INFINITY;
            break;
        }
    }
    let mut out = vec![0.0; n];
    k = 0;
    for (q, o) in out.iter_mut().enumerate() {
        while z[k + 1] < q as f64 {
            k += 1;
        }
        let p = v[k];
        let d = q as f64 - p as f64;
        *o = d * d + f[p];
    }
    out
}

/// Unary features for every pixel, in [`feature_names`] order.
pub fn unary_features(img: &ImageGrid, scribbles: &ScribbleMask) -> Result<SparseRows> {
    check_scribbles(img, scribbles)?;
    let (w, h) = (img.width(), img.height());
    let diag = ((w * w + h * h) as f64).sqrt().max(1.0);
    let dist = |label: bool| {
        let sites: Vec<bool> = scribbles.labels.iter().map(|&l| l == Some(label)).collect();
        distance_transform(w, h, &sites)
    };
    let fg = dist(true);
    let bg = dist(false);
    let channel = |ch: usize| if img.channels() == 3 { ch } else { 0 };

    let hist_len = 3 * WINDOW.len() * BINS;
    let mut rows = SparseRows::new();
    let mut entries = Vec::with_capacity(3 * WINDOW.len() * 2 + 8);
    for r in 0..h {
        for c in 0..w {
            entries.clear();
            for ch in 0..3 {
                for (o, (dr, dc)) in WINDOW.iter().enumerate() {
                    let v = img.get_clamped(r as isize + dr, c as isize + dc, channel(ch));
                    let base = (ch * WINDOW.len() + o) * BINS;
                    let [(b0, w0), (b1, w1)] = soft_bins(v);
                    if b0 == b1 {
                        entries.push((base + b0, w0 + w1));
                    } else {
                        entries.push((base + b0, w0));
                        entries.push((base + b1, w1));
                    }
                }
            }
            let i = r * w + c;
            let norm = |d: &Option<Vec<f64>>| d.as_ref().map_or(1.0, |d| (d[i] / diag).min(1.0));
            entries.push((hist_len, norm(&fg)));
            entries.push((hist_len + 1, norm(&bg)));
            entries.push((hist_len + 2, if h > 1 { r as f64 / (h - 1) as f64 } else { 0.0 }));
            entries.push((hist_len + 3, if w > 1 { c as f64 / (w - 1) as f64 } else { 0.0 }));
            for ch in 0..3 {
                entries.push((hist_len + 4 + ch, img.get(r, c, channel(ch))));
            }
            entries.push((hist_len + 7, 1.0));
            rows.push_row(entries.iter().copied());
        }
    }
    Ok(rows)
}

fn check_scribbles(img: &ImageGrid, scribbles: &ScribbleMask) -> Result<()> {
    if scribbles.width != img.width() || scribbles.height != img.height() {
        return Err(Error::DimensionMismatch {
            expected: img.num_pixels(),
            actual: scribbles.width * scribbles.height,
        });
    }
    if scribbles.is_empty() {
        return Err(Error::InvalidInput("degenerate scribbles: no pixel is annotated".into()));
    }
    Ok(())
}

/// Forward differences of intensity at the four pixels of each 2×2 patch:
/// `dx` for all four, then `dy` for all four.
pub fn patch_gradients(img: &ImageGrid) -> Vec<[f64; GRADIENT_DIM]> {
    let (w, h) = (img.width(), img.height());
    let at = |r: usize, c: usize| img.intensity(r.min(h - 1), c.min(w - 1));
    let mut out = Vec::new();
    for r in 0..h.saturating_sub(1) {
        for c in 0..w.saturating_sub(1) {
            let px = [(r, c), (r, c + 1), (r + 1, c), (r + 1, c + 1)];
            let mut g = [0.0; GRADIENT_DIM];
            for (k, &(pr, pc)) in px.iter().enumerate() {
                let v = at(pr, pc);
                g[k] = if pc + 1 < w { at(pr, pc + 1) - v } else { 0.0 };
                g[4 + k] = if pr + 1 < h { at(pr + 1, pc) - v } else { 0.0 };
            }
            out.push(g);
        }
    }
    out
}

/// Standardization statistics and centroids (in standardized units) for
/// patch gradients.
#[derive(Debug, Clone, PartialEq)]
pub struct PatchClusterModel {
    pub mean: [f64; GRADIENT_DIM],
    pub std: [f64; GRADIENT_DIM],
    pub centroids: Vec<Vec<f64>>,
}

impl PatchClusterModel {
    /// Clusters a sample of at most `max_points` patches drawn from
    /// `images`.
    pub fn fit(images: &[&ImageGrid], k: usize, seed: u64, max_points: usize) -> Result<Self> {
        let all: Vec<[f64; GRADIENT_DIM]> = images.iter().flat_map(|img| patch_gradients(img)).collect();
        if all.is_empty() {
            return Err(Error::InvalidInput("no 2×2 patches to cluster".into()));
        }
        let mut mean = [0.0; GRADIENT_DIM];
        let mut std = [0.0; GRADIENT_DIM];
        let n = all.len() as f64;
        for g in &all {
            for d in 0..GRADIENT_DIM {
                mean[d] += g[d] / n;
            }
        }
        for g in &all {
            for d in 0..GRADIENT_DIM {
                std[d] += (g[d] - mean[d]).powi(2) / n;
            }
        }
        for s in &mut std {
            *s = if *s > 0.0 { s.sqrt() } else { 1.0 };
        }
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let mut picks: Vec<usize> = if all.len() > max_points {
            sample(&mut rng, all.len(), max_points).into_vec()
        } else {
            (0..all.len()).collect()
        };
        picks.sort_unstable();
        let points: Vec<Vec<f64>> = picks
            .iter()
            .map(|&i| (0..GRADIENT_DIM).map(|d| (all[i][d] - mean[d]) / std[d]).collect())
            .collect();
        let km = kmeans(&points, k, seed)?;
        Ok(PatchClusterModel {
            mean,
            std,
            centroids: km.centroids,
        })
    }

    pub fn assign(&self, g: &[f64; GRADIENT_DIM]) -> usize {
        let z: Vec<f64> = (0..GRADIENT_DIM).map(|d| (g[d] - self.mean[d]) / self.std[d]).collect();
        nearest(&self.centroids, &z).0
    }

    pub fn from_schema(schema: &FeatureSchema) -> Result<Self> {
        let get = |name: &str| -> Result<[f64; GRADIENT_DIM]> {
            schema
                .param(name)
                .and_then(|v| v.try_into().ok())
                .ok_or_else(|| Error::InvalidInput(format!("schema lacks {GRADIENT_DIM}-vector `{name}`")))
        };
        let centroids: Vec<Vec<f64>> = schema
            .clique_types
            .iter()
            .filter(|t| t.phi == "cluster")
            .map(|t| t.params.clone())
            .collect();
        if centroids.iter().any(|c| c.len() != GRADIENT_DIM) {
            return Err(Error::InvalidInput("cluster centroid of the wrong length".into()));
        }
        Ok(PatchClusterModel {
            mean: get("gradient_mean")?,
            std: get("gradient_std")?,
            centroids,
        })
    }
}

/// Schema with one clique type per cluster (or none when `clusters` is
/// `None`, the unary-only variant) and the [`NUM_FEATURES`] unary features.
pub fn segment_schema(clusters: Option<&PatchClusterModel>) -> FeatureSchema {
    let mut schema = FeatureSchema {
        clique_types: Vec::new(),
        unary_features: feature_names(),
        params: Vec::new(),
    };
    if let Some(m) = clusters {
        schema.clique_types = m
            .centroids
            .iter()
            .enumerate()
            .map(|(j, c)| CliqueType {
                name: format!("cluster{j}"),
                size: 4,
                phi: "cluster".into(),
                params: c.clone(),
            })
            .collect();
        schema.params = vec![
            ("gradient_mean".into(), m.mean.to_vec()),
            ("gradient_std".into(), m.std.to_vec()),
        ];
    }
    schema
}

/// Learning input for one image. Scribbled pixels are clamped.
pub fn segment_instance(schema: &FeatureSchema, img: &ImageGrid, scribbles: &ScribbleMask) -> Result<Instance> {
    if schema.unary_features.len() != NUM_FEATURES {
        return Err(Error::InvalidInput(format!(
            "schema has {} unary features, segmentation uses {NUM_FEATURES}",
            schema.unary_features.len()
        )));
    }
    let unary1 = unary_features(img, scribbles)?;
    let cliques = if schema.clique_types.is_empty() {
        Vec::new()
    } else {
        let clusters = PatchClusterModel::from_schema(schema)?;
        img.patches()
            .zip(patch_gradients(img))
            .map(|(members, g)| CliqueInstance {
                clique_type: clusters.assign(&g),
                members: members.to_vec(),
                phi: 1.0,
            })
            .collect()
    };
    Ok(Instance {
        num_vars: img.num_pixels(),
        cliques,
        unary1,
        unary0: None,
        clamps: scribbles.labels.clone(),
    })
}

/// Scribbles sampled from a ground-truth mask: up to three short horizontal
/// strokes per label, placed where a 5×5 neighborhood is uniform.
pub fn scribbles_from_truth(truth: &Labeling, width: usize, height: usize, seed: u64) -> ScribbleMask {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut s = ScribbleMask::empty(width, height);
    let interior = |i: usize, label: bool| {
        let (r, c) = (i / width, i % width);
        (r.saturating_sub(2)..(r + 3).min(height))
            .all(|rr| (c.saturating_sub(2)..(c + 3).min(width)).all(|cc| truth.get(rr * width + cc) == label))
    };
    for label in [true, false] {
        let candidates: Vec<usize> = (0..width * height).filter(|&i| interior(i, label)).collect();
        for _ in 0..3.min(candidates.len()) {
            let i = candidates[rng.random_range(0..candidates.len())];
            let (r, c) = (i / width, i % width);
            for cc in c.saturating_sub(3)..(c + 4).min(width) {
                let j = r * width + cc;
                if truth.get(j) == label {
                    s.labels[j] = Some(label);
                }
            }
        }
    }
    s
}

#[derive(Debug, Clone, PartialEq)]
pub struct SegmentExample {
    pub image: ImageGrid,
    pub truth: Labeling,
    pub scribbles: ScribbleMask,
}

impl Labeled for SegmentExample {
    fn truth(&self) -> &Labeling {
        &self.truth
    }
}

/// Color images of one to three elliptical foreground blobs on a textured
/// background, with background distractors in a foreground-like color.
/// Scribbles come from [`scribbles_from_truth`]. Image `i` depends only on
/// `(seed, i)`.
pub fn synth_segment_dataset(count: usize, width: usize, height: usize, seed: u64) -> Result<Vec<SegmentExample>> {
    if width < 8 || height < 8 {
        return Err(Error::InvalidInput("segmentation images must be at least 8×8".into()));
    }
    (0..count)
        .map(|index| {
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            rng.set_stream(index as u64);
            let (w, h) = (width as f64, height as f64);
            let color = |rng: &mut ChaCha8Rng| [0; 3].map(|_| rng.random_range(0.15..0.85));
            let fg_color = color(&mut rng);
            let bg_color = color(&mut rng);
            let ellipse = |rng: &mut ChaCha8Rng, scale: f64| {
                let (cy, cx) = (rng.random_range(0.3 * h..0.7 * h), rng.random_range(0.3 * w..0.7 * w));
                let (ry, rx) = (rng.random_range(0.1..0.3) * h * scale, rng.random_range(0.1..0.3) * w * scale);
                let theta = rng.random_range(0.0..std::f64::consts::PI);
                (cy, cx, ry.max(2.0), rx.max(2.0), theta)
            };
            let inside = |e: &(f64, f64, f64, f64, f64), r: f64, c: f64| {
                let (dy, dx) = (r - e.0, c - e.1);
                let (s, co) = e.4.sin_cos();
                let (u, v) = (dy * co - dx * s, dy * s + dx * co);
                (u / e.2).powi(2) + (v / e.3).powi(2) <= 1.0
            };
            let blobs: Vec<_> = (0..rng.random_range(1..=3)).map(|_| ellipse(&mut rng, 1.0)).collect();
            let distractors: Vec<_> = (0..rng.random_range(0..=2)).map(|_| ellipse(&mut rng, 0.4)).collect();
            let freq = [rng.random_range(0.1..0.4), rng.random_range(0.1..0.4)];
            let noise = Normal::new(0.0, 0.08).unwrap();
            let mut bits = Vec::with_capacity(width * height);
            let mut data = Vec::with_capacity(width * height * 3);
            for r in 0..height {
                for c in 0..width {
                    let (rf, cf) = (r as f64 + 0.5, c as f64 + 0.5);
                    let fg = blobs.iter().any(|e| inside(e, rf, cf));
                    let distract = !fg && distractors.iter().any(|e| inside(e, rf, cf));
                    bits.push(fg);
                    let texture = 0.08 * (freq[0] * rf).sin() * (freq[1] * cf).cos();
                    let base = if fg || distract { fg_color } else { bg_color };
                    for b in base {
                        data.push((b + texture + noise.sample(&mut rng)).clamp(0.0, 1.0));
                    }
                }
            }
            let truth = Labeling::from_bits(bits);
            let scribbles = scribbles_from_truth(&truth, width, height, rng.random());
            Ok(SegmentExample {
                image: ImageGrid::new(width, height, 3, data)?,
                truth,
                scribbles,
            })
        })
        .collect()
}

pub fn segment_example_instance(schema: &FeatureSchema, x: &SegmentExample) -> Result<Instance> {
    segment_instance(schema, &x.image, &x.scribbles)
}

/// Settings for segmentation training.
#[derive(Debug, Clone)]
pub struct SegmentTraining {
    /// Clique types from k-means; `None` trains the unary-only model.
    pub clusters: Option<usize>,
    /// Cap on patches sampled for k-means.
    pub cluster_sample: usize,
    pub seed: u64,
    pub train: TrainConfig,
    pub flow: FlowOptions,
    pub normalize_loss: bool,
}

impl Default for SegmentTraining {
    fn default() -> Self {
        SegmentTraining {
            clusters: Some(50),
            cluster_sample: 20_000,
            seed: 0,
            train: TrainConfig::default(),
            flow: FlowOptions::default(),
            normalize_loss: true,
        }
    }
}

/// Fits clusters (when enabled) and trains the S3SVM weights.
pub fn train_segment(data: &[&SegmentExample], opts: &SegmentTraining) -> Result<(FeatureSchema, Vec<f64>, TrainReport)> {
    let clusters = match opts.clusters {
        Some(k) => {
            let images: Vec<&ImageGrid> = data.iter().map(|x| &x.image).collect();
            Some(PatchClusterModel::fit(&images, k, opts.seed, opts.cluster_sample)?)
        }
        None => None,
    };
    let schema = segment_schema(clusters.as_ref());
    let examples = data
        .par_iter()
        .map(|x| Ok((segment_example_instance(&schema, x)?, x.truth.clone())))
        .collect::<Result<Vec<_>>>()?;
    let mut learner = SosLearner::new(schema);
    learner.flow = opts.flow.clone();
    learner.normalize_loss = opts.normalize_loss;
    let (w, report) = learner.train(&examples, &opts.train)?;
    Ok((learner.schema, w, report))
}

pub fn predict_segment(
    schema: &FeatureSchema,
    w: &[f64],
    img: &ImageGrid,
    scribbles: &ScribbleMask,
    flow: &FlowOptions,
) -> Result<Labeling> {
    let x = segment_instance(schema, img, scribbles)?;
    let e = materialize_energy(schema, w, &x)?;
    Ok(flow::minimize_with(&e, flow)?.minimizer)
}

/// S3SVM segmentation for [`evaluate_split`](super::dataset::evaluate_split):
/// trains once per value of `c_grid` and keeps the weights with the lowest
/// validation error (the first value when there is no validation set).
pub struct SegmentAlgorithm {
    pub name: String,
    pub c_grid: Vec<f64>,
    pub opts: SegmentTraining,
}

impl Algorithm<SegmentExample> for SegmentAlgorithm {
    type Fitted = (FeatureSchema, Vec<f64>);

    fn name(&self) -> &str {
        &self.name
    }

    fn fit(&self, train: &[&SegmentExample], val: &[&SegmentExample]) -> Result<Self::Fitted> {
        if self.c_grid.is_empty() {
            return Err(Error::InvalidInput("empty c grid".into()));
        }
        let mut best: Option<(f64, Self::Fitted)> = None;
        for &c in &self.c_grid {
            let mut opts = self.opts.clone();
            opts.train.c = c;
            let (schema, w, _) = train_segment(train, &opts)?;
            if val.is_empty() || self.c_grid.len() == 1 {
                return Ok((schema, w));
            }
            let errors = val
                .par_iter()
                .map(|x| {
                    let y = predict_segment(&schema, &w, &x.image, &x.scribbles, &opts.flow)?;
                    hamming_loss(&x.truth, &y, true)
                })
                .collect::<Result<Vec<f64>>>()?;
            let err = errors.iter().sum::<f64>() / errors.len() as f64;
            log::info!("{}: c = {c} validation error {err:.4}", self.name);
            if best.as_ref().is_none_or(|b| err < b.0) {
                best = Some((err, (schema, w)));
            }
        }
        Ok(best.unwrap().1)
    }

    fn predict(&self, fitted: &Self::Fitted, x: &SegmentExample) -> Result<Labeling> {
        predict_segment(&fitted.0, &fitted.1, &x.image, &x.scribbles, &self.opts.flow)
    }
}
