//! Binary denoising: synthetic line-drawing images with Gaussian noise, the
//! 17-parameter learned energy `w_u·Σ|y_i − x_i| + Σ_C g(y_C)` over all 2×2
//! patches, and the fixed `λ·√(#cut edges)` patch prior as a baseline.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};
use rayon::prelude::*;

use super::dataset::{Algorithm, Labeled};
use super::ImageGrid;
use crate::energy::Labeling;
use crate::error::{Error, Result};
use crate::flow::{self, FlowOptions};
use crate::learn::{
    materialize_energy, CliqueInstance, CliqueType, FeatureSchema, Instance, SosLearner, SparseRows, TrainConfig,
    TrainReport,
};

#[derive(Debug, Clone, PartialEq)]
pub struct DenoiseInstance {
    pub noisy: ImageGrid,
    pub truth: Labeling,
}

/// `count` square images of side `size`. Each image is seeded from
/// `(seed, index)`, so a longer dataset extends a shorter one.
pub fn synth_denoise_dataset(count: usize, size: usize, sigma: f64, seed: u64) -> Result<Vec<DenoiseInstance>> {
    if !(sigma.is_finite() && sigma >= 0.0) {
        return Err(Error::InvalidInput(format!("noise sigma must be nonnegative, got {sigma}")));
    }
    if size < 2 {
        return Err(Error::InvalidInput("images must be at least 2×2".into()));
    }
    (0..count)
        .map(|index| {
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            rng.set_stream(index as u64);
            let truth = draw_shapes(&mut rng, size);
            let noise = Normal::new(0.0, sigma.max(f64::MIN_POSITIVE)).unwrap();
            let data = truth
                .bits()
                .iter()
                .map(|&b| {
                    let clean = if b { 1.0 } else { 0.0 };
                    if sigma == 0.0 {
                        clean
                    } else {
                        (clean + noise.sample(&mut rng)).clamp(0.0, 1.0)
                    }
                })
                .collect();
            Ok(DenoiseInstance {
                noisy: ImageGrid::gray(size, size, data)?,
                truth,
            })
        })
        .collect()
}

/// Line-drawing strokes: straight lines, polygon outlines and quadratic
/// curves 1 to 2.5 pixels wide, with an occasional filled polygon.
fn draw_shapes(rng: &mut ChaCha8Rng, size: usize) -> Labeling {
    let s = size as f64;
    let mut ink = vec![false; size * size];
    let mut stamp = |hit: &dyn Fn((f64, f64)) -> bool| {
        for r in 0..size {
            for c in 0..size {
                if hit((r as f64 + 0.5, c as f64 + 0.5)) {
                    ink[r * size + c] = true;
                }
            }
        }
    };
    let shapes = rng.random_range(4..=7);
    for _ in 0..shapes {
        let point = |rng: &mut ChaCha8Rng| (rng.random_range(0.0..s), rng.random_range(0.0..s));
        let half = rng.random_range(0.5..1.25);
        let kind = rng.random_range(0.0..1.0);
        if kind < 0.4 {
            let (a, b) = (point(rng), point(rng));
            stamp(&|p| segment_distance(p, a, b) <= half);
        } else if kind < 0.6 {
            let (a, m, b) = (point(rng), point(rng), point(rng));
            let pts: Vec<(f64, f64)> = (0..=24)
                .map(|k| {
                    let t = k as f64 / 24.0;
                    let u = 1.0 - t;
                    (
                        u * u * a.0 + 2.0 * u * t * m.0 + t * t * b.0,
                        u * u * a.1 + 2.0 * u * t * m.1 + t * t * b.1,
                    )
                })
                .collect();
            stamp(&|p| pts.windows(2).any(|w| segment_distance(p, w[0], w[1]) <= half));
        } else {
            let centre = point(rng);
            let radius = rng.random_range(0.1 * s..0.3 * s);
            let sides = rng.random_range(3..=6);
            let phase = rng.random_range(0.0..std::f64::consts::TAU);
            let poly: Vec<(f64, f64)> = (0..sides)
                .map(|k| {
                    let t = phase + std::f64::consts::TAU * k as f64 / sides as f64;
                    let rr = radius * rng.random_range(0.6..1.0);
                    (centre.0 + rr * t.sin(), centre.1 + rr * t.cos())
                })
                .collect();
            if kind < 0.9 {
                stamp(&|p| (0..sides).any(|k| segment_distance(p, poly[k], poly[(k + 1) % sides]) <= half));
            } else {
                stamp(&|p| inside(p, &poly));
            }
        }
    }
    Labeling::from_bits(ink)
}

fn segment_distance(p: (f64, f64), a: (f64, f64), b: (f64, f64)) -> f64 {
    let (dx, dy) = (b.0 - a.0, b.1 - a.1);
    let len2 = dx * dx + dy * dy;
    let t = if len2 == 0.0 {
        0.0
    } else {
        (((p.0 - a.0) * dx + (p.1 - a.1) * dy) / len2).clamp(0.0, 1.0)
    };
    let (qx, qy) = (a.0 + t * dx - p.0, a.1 + t * dy - p.1);
    (qx * qx + qy * qy).sqrt()
}

/// Even-odd rule.
fn inside(p: (f64, f64), poly: &[(f64, f64)]) -> bool {
    let mut hit = false;
    let n = poly.len();
    for k in 0..n {
        let (a, b) = (poly[k], poly[(k + 1) % n]);
        if (a.1 > p.1) != (b.1 > p.1) {
            let x = a.0 + (p.1 - a.1) / (b.1 - a.1) * (b.0 - a.0);
            if p.0 < x {
                hit = !hit;
            }
        }
    }
    hit
}

/// One shared 2×2 clique type (16 weights, Φ ≡ 1) and one unary weight on
/// `|y_i − x_i|`.
pub fn denoise_schema() -> FeatureSchema {
    FeatureSchema {
        clique_types: vec![CliqueType {
            name: "patch".into(),
            size: 4,
            phi: "const".into(),
            params: vec![],
        }],
        unary_features: vec!["abs_diff".into()],
        params: vec![],
    }
}

/// Unary weight 1 and a zero clique table.
pub fn denoise_initial_weights() -> Vec<f64> {
    let mut w = vec![0.0; 16];
    w.push(1.0);
    w
}

pub fn denoise_instance(noisy: &ImageGrid) -> Instance {
    let n = noisy.num_pixels();
    let x: Vec<f64> = (0..noisy.height())
        .flat_map(|r| (0..noisy.width()).map(move |c| (r, c)))
        .map(|(r, c)| noisy.intensity(r, c))
        .collect();
    let mut unary1 = SparseRows::new();
    let mut unary0 = SparseRows::new();
    for &v in &x {
        unary1.push_row([(0, 1.0 - v)]);
        unary0.push_row([(0, v)]);
    }
    Instance {
        num_vars: n,
        cliques: noisy
            .patches()
            .map(|m| CliqueInstance {
                clique_type: 0,
                members: m.to_vec(),
                phi: 1.0,
            })
            .collect(),
        unary1,
        unary0: Some(unary0),
        clamps: vec![],
    }
}

/// `λ·√(number of grid edges with differing endpoints)` on a 2×2 patch.
pub fn generic_cuts_table(lambda: f64) -> Vec<f64> {
    const EDGES: [(usize, usize); 4] = [(0, 1), (2, 3), (0, 2), (1, 3)];
    (0..16usize)
        .map(|m| {
            let cut = EDGES
                .iter()
                .filter(|&&(a, b)| (m >> a & 1) != (m >> b & 1))
                .count();
            lambda * (cut as f64).sqrt()
        })
        .collect()
}

pub fn generic_cuts_weights(lambda: f64) -> Vec<f64> {
    let mut w = generic_cuts_table(lambda);
    w.push(1.0);
    w
}

pub fn predict_denoise(w: &[f64], noisy: &ImageGrid, opts: &FlowOptions) -> Result<Labeling> {
    let e = materialize_energy(&denoise_schema(), w, &denoise_instance(noisy))?;
    Ok(flow::minimize_with(&e, opts)?.minimizer)
}

/// `x_i > 1/2`, which is also the prediction at `λ = 0`.
pub fn threshold_predict(noisy: &ImageGrid) -> Labeling {
    Labeling::from_bits(
        (0..noisy.height())
            .flat_map(|r| (0..noisy.width()).map(move |c| (r, c)))
            .map(|(r, c)| noisy.intensity(r, c) > 0.5)
            .collect(),
    )
}

/// Fraction of mislabeled pixels.
pub fn pixel_error(truth: &Labeling, pred: &Labeling) -> Result<f64> {
    crate::learn::hamming_loss(truth, pred, true)
}

/// Mean pixel error of `w` over `data`.
pub fn mean_error(w: &[f64], data: &[&DenoiseInstance], opts: &FlowOptions) -> Result<f64> {
    if data.is_empty() {
        return Err(Error::InvalidInput("empty evaluation set".into()));
    }
    let errors = data
        .par_iter()
        .map(|d| pixel_error(&d.truth, &predict_denoise(w, &d.noisy, opts)?))
        .collect::<Result<Vec<_>>>()?;
    Ok(errors.iter().sum::<f64>() / data.len() as f64)
}

#[derive(Debug, Clone, PartialEq)]
pub struct BaselineResult {
    pub lambda: f64,
    pub train_error: f64,
    /// Training error for every grid value, in grid order.
    pub errors: Vec<f64>,
}

/// Grid search for the `λ` with the lowest mean training error. Ties go to
/// the earlier grid value.
pub fn baseline_generic_cuts(grid: &[f64], train: &[&DenoiseInstance], opts: &FlowOptions) -> Result<BaselineResult> {
    if grid.is_empty() {
        return Err(Error::InvalidInput("empty lambda grid".into()));
    }
    if let Some(l) = grid.iter().find(|l| !(l.is_finite() && **l >= 0.0)) {
        return Err(Error::InvalidInput(format!("lambda must be nonnegative, got {l}")));
    }
    let errors = grid
        .iter()
        .map(|&l| mean_error(&generic_cuts_weights(l), train, opts))
        .collect::<Result<Vec<_>>>()?;
    let best = (0..grid.len()).fold(0, |b, i| if errors[i] < errors[b] { i } else { b });
    Ok(BaselineResult {
        lambda: grid[best],
        train_error: errors[best],
        errors,
    })
}

/// Default λ grid for the baseline: 0, 0.05, …, 1.5.
pub fn default_lambda_grid() -> Vec<f64> {
    (0..=30).map(|i| i as f64 / 20.0).collect()
}

/// Settings for denoising training.
#[derive(Debug, Clone)]
pub struct DenoiseTraining {
    pub train: TrainConfig,
    pub flow: FlowOptions,
    pub normalize_loss: bool,
}

impl Default for DenoiseTraining {
    fn default() -> Self {
        DenoiseTraining {
            train: TrainConfig::default(),
            flow: FlowOptions::default(),
            normalize_loss: true,
        }
    }
}

pub fn train_denoise(data: &[&DenoiseInstance], opts: &DenoiseTraining) -> Result<(Vec<f64>, TrainReport)> {
    let mut learner = SosLearner::new(denoise_schema());
    learner.flow = opts.flow.clone();
    learner.normalize_loss = opts.normalize_loss;
    let examples: Vec<(Instance, Labeling)> = data
        .iter()
        .map(|d| (denoise_instance(&d.noisy), d.truth.clone()))
        .collect();
    learner.train(&examples, &opts.train)
}

impl Labeled for DenoiseInstance {
    fn truth(&self) -> &Labeling {
        &self.truth
    }
}

/// S3SVM denoising for [`evaluate_split`](super::dataset::evaluate_split):
/// one training run per value of `c_grid`, keeping the lowest validation
/// error (the first value when there is no validation set).
pub struct DenoiseAlgorithm {
    pub name: String,
    pub c_grid: Vec<f64>,
    pub opts: DenoiseTraining,
}

impl Algorithm<DenoiseInstance> for DenoiseAlgorithm {
    type Fitted = Vec<f64>;

    fn name(&self) -> &str {
        &self.name
    }

    fn fit(&self, train: &[&DenoiseInstance], val: &[&DenoiseInstance]) -> Result<Vec<f64>> {
        if self.c_grid.is_empty() {
            return Err(Error::InvalidInput("empty c grid".into()));
        }
        let mut best: Option<(f64, Vec<f64>)> = None;
        for &c in &self.c_grid {
            let mut opts = self.opts.clone();
            opts.train.c = c;
            let (w, _) = train_denoise(train, &opts)?;
            if val.is_empty() || self.c_grid.len() == 1 {
                return Ok(w);
            }
            let err = mean_error(&w, val, &opts.flow)?;
            log::info!("{}: c = {c} validation error {err:.4}", self.name);
            if best.as_ref().is_none_or(|b| err < b.0) {
                best = Some((err, w));
            }
        }
        Ok(best.unwrap().1)
    }

    fn predict(&self, w: &Vec<f64>, x: &DenoiseInstance) -> Result<Labeling> {
        predict_denoise(w, &x.noisy, &self.opts.flow)
    }
}

/// The `λ·√(#cut edges)` prior with `λ` picked on training plus validation
/// images.
pub struct GenericCutsAlgorithm {
    pub grid: Vec<f64>,
    pub flow: FlowOptions,
}

impl Algorithm<DenoiseInstance> for GenericCutsAlgorithm {
    type Fitted = f64;

    fn name(&self) -> &str {
        "generic_cuts"
    }

    fn fit(&self, train: &[&DenoiseInstance], val: &[&DenoiseInstance]) -> Result<f64> {
        let all: Vec<&DenoiseInstance> = train.iter().chain(val).copied().collect();
        Ok(baseline_generic_cuts(&self.grid, &all, &self.flow)?.lambda)
    }

    fn predict(&self, lambda: &f64, x: &DenoiseInstance) -> Result<Labeling> {
        predict_denoise(&generic_cuts_weights(*lambda), &x.noisy, &self.flow)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::energy::table_violations;

    #[test]
    fn zero_noise_keeps_clean_image() {
        let d = synth_denoise_dataset(2, 16, 0.0, 3).unwrap();
        for inst in &d {
            assert_eq!(threshold_predict(&inst.noisy), inst.truth);
            assert!(inst.truth.count_ones() > 0);
        }
    }

    #[test]
    fn same_seed_same_data() {
        let a = synth_denoise_dataset(3, 12, 0.5, 9).unwrap();
        let b = synth_denoise_dataset(4, 12, 0.5, 9).unwrap();
        assert_eq!(a[..], b[..3]);
        assert_ne!(a, synth_denoise_dataset(3, 12, 0.5, 10).unwrap());
    }

    #[test]
    fn sqrt_prior_is_submodular() {
        let t = generic_cuts_table(1.0);
        assert!(table_violations(&t, 1e-12).is_empty());
        assert_eq!(t[0b0110], 2.0);
    }

    #[test]
    fn schema_has_seventeen_weights() {
        assert_eq!(denoise_schema().dim(), 17);
        assert_eq!(denoise_initial_weights().len(), 17);
    }

    #[test]
    fn lambda_zero_is_thresholding() {
        let d = synth_denoise_dataset(1, 10, 0.4, 1).unwrap();
        let opts = FlowOptions::default();
        let p = predict_denoise(&generic_cuts_weights(0.0), &d[0].noisy, &opts).unwrap();
        assert_eq!(p, threshold_predict(&d[0].noisy));
        let refs: Vec<&DenoiseInstance> = d.iter().collect();
        let r = baseline_generic_cuts(&[0.0], &refs, &opts).unwrap();
        assert_eq!(r.lambda, 0.0);
        assert!(baseline_generic_cuts(&[], &refs, &opts).is_err());
    }
}
