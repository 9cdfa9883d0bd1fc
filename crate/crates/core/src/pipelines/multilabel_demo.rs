//! Three-level denoising: piecewise-constant gray images with levels 0, 1/2
//! and 1, Gaussian noise, and one learned 2×2 patch table plus a quadratic
//! unary `a·x² + b·x + c` per label.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};

use super::ImageGrid;
use crate::error::{Error, Result};
use crate::flow::FlowOptions;
use crate::learn::{
    train_structured, CliqueInstance, CliqueType, FeatureSchema, Instance, SparseRows, TrainConfig, TrainReport,
};
use crate::multilabel::{MultiLabelLearner, MultiLabeling};

pub const LEVELS: [f64; 3] = [0.0, 0.5, 1.0];

#[derive(Debug, Clone, PartialEq)]
pub struct MultiLabelExample {
    pub image: ImageGrid,
    pub truth: MultiLabeling,
}

/// `count` square images of side `size`: label-0 background with 2 to 4
/// rectangles of label 1 or 2.
pub fn synth_multilabel_dataset(count: usize, size: usize, sigma: f64, seed: u64) -> Result<Vec<MultiLabelExample>> {
    if !(sigma.is_finite() && sigma >= 0.0) {
        return Err(Error::InvalidInput(format!("noise sigma must be nonnegative, got {sigma}")));
    }
    if size < 2 {
        return Err(Error::InvalidInput("image side must be at least 2".into()));
    }
    (0..count)
        .map(|index| {
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            rng.set_stream(index as u64);
            let mut labels = vec![0usize; size * size];
            for _ in 0..rng.random_range(2..=4) {
                let label = rng.random_range(1..=2);
                let (r0, c0) = (rng.random_range(0..size - 1), rng.random_range(0..size - 1));
                let (h, w) = (rng.random_range(2..=size / 2 + 1), rng.random_range(2..=size / 2 + 1));
                for r in r0..(r0 + h).min(size) {
                    for c in c0..(c0 + w).min(size) {
                        labels[r * size + c] = label;
                    }
                }
            }
            let noise = Normal::new(0.0, sigma.max(f64::MIN_POSITIVE)).unwrap();
            let data = labels
                .iter()
                .map(|&l| {
                    let n = if sigma > 0.0 { noise.sample(&mut rng) } else { 0.0 };
                    (LEVELS[l] + n).clamp(0.0, 1.0)
                })
                .collect();
            Ok(MultiLabelExample {
                image: ImageGrid::gray(size, size, data)?,
                truth: MultiLabeling(labels),
            })
        })
        .collect()
}

pub fn multilabel_demo_schema() -> FeatureSchema {
    FeatureSchema {
        clique_types: vec![CliqueType {
            name: "patch".into(),
            size: 4,
            phi: "const".into(),
            params: vec![],
        }],
        unary_features: vec!["x".into(), "x2".into(), "one".into()],
        params: vec![],
    }
}

pub fn multilabel_demo_instance(img: &ImageGrid) -> Instance {
    let mut unary1 = SparseRows::new();
    for r in 0..img.height() {
        for c in 0..img.width() {
            let x = img.intensity(r, c);
            unary1.push_row([(0, x), (1, x * x), (2, 1.0)]);
        }
    }
    Instance {
        num_vars: img.num_pixels(),
        cliques: img
            .patches()
            .map(|m| CliqueInstance {
                clique_type: 0,
                members: m.to_vec(),
                phi: 1.0,
            })
            .collect(),
        unary1,
        unary0: None,
        clamps: vec![],
    }
}

pub fn multilabel_demo_learner(flow: &FlowOptions, normalize_loss: bool) -> MultiLabelLearner {
    let mut learner = MultiLabelLearner::new(multilabel_demo_schema(), LEVELS.len());
    learner.flow = flow.clone();
    learner.normalize_loss = normalize_loss;
    learner
}

pub fn train_multilabel_demo(
    data: &[MultiLabelExample],
    learner: &MultiLabelLearner,
    cfg: &TrainConfig,
) -> Result<(Vec<f64>, TrainReport)> {
    let examples: Vec<(Instance, MultiLabeling)> = data
        .iter()
        .map(|x| (multilabel_demo_instance(&x.image), x.truth.clone()))
        .collect();
    train_structured(learner, &examples, cfg)
}

/// Fraction of pixels whose predicted label differs from the truth.
pub fn label_error(truth: &MultiLabeling, pred: &MultiLabeling) -> Result<f64> {
    if truth.0.len() != pred.0.len() {
        return Err(Error::DimensionMismatch {
            expected: truth.0.len(),
            actual: pred.0.len(),
        });
    }
    if truth.0.is_empty() {
        return Ok(0.0);
    }
    let wrong = truth.0.iter().zip(&pred.0).filter(|(a, b)| a != b).count();
    Ok(wrong as f64 / truth.0.len() as f64)
}
