//! Run configuration, read from and written as JSON.

use serde::{Deserialize, Serialize};

use crate::flow::FlowOptions;
use crate::learn::TrainConfig;
use crate::pipelines::dataset::SplitSpec;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, clap::ValueEnum)]
#[serde(rename_all = "kebab-case")]
pub enum Task {
    Denoise,
    Segment,
    MultilabelDemo,
}

impl Task {
    pub fn name(self) -> &'static str {
        match self {
            Task::Denoise => "denoise",
            Task::Segment => "segment",
            Task::MultilabelDemo => "multilabel-demo",
        }
    }

    pub fn from_name(s: &str) -> Option<Task> {
        [Task::Denoise, Task::Segment, Task::MultilabelDemo]
            .into_iter()
            .find(|t| t.name() == s)
    }
}

/// Synthetic dataset shape.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SynthConfig {
    pub count: usize,
    pub width: usize,
    pub height: usize,
    /// Noise standard deviation (denoising tasks).
    pub sigma: f64,
}

impl Default for SynthConfig {
    fn default() -> Self {
        SynthConfig {
            count: 20,
            width: 64,
            height: 64,
            sigma: 0.5,
        }
    }
}

/// Everything that determines a run's results. Paths and thread counts are
/// command-line only and are not recorded.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct RunConfig {
    pub task: Task,
    /// Slack cost `C`.
    pub c: f64,
    /// Values of `C` tried when `eval --retrain` selects on validation data;
    /// empty means `[c]`.
    pub c_grid: Vec<f64>,
    pub eps: f64,
    pub qp_tol: f64,
    /// Cap on cutting-plane rows before training aborts.
    pub max_rows: usize,
    pub seed: u64,
    pub split: String,
    /// Divide the Hamming loss by the number of pixels.
    pub normalize_loss: bool,
    pub current_arc: bool,
    /// Segmentation clique types from k-means; 0 trains unary weights only.
    pub clusters: usize,
    pub cluster_sample: usize,
    /// `λ` grid of the denoising baseline.
    pub lambda_grid: Vec<f64>,
    pub synth: SynthConfig,
}

impl Default for RunConfig {
    fn default() -> Self {
        RunConfig::for_task(Task::Denoise)
    }
}

impl RunConfig {
    pub fn for_task(task: Task) -> Self {
        let base = RunConfig {
            task,
            c: 10.0,
            c_grid: vec![],
            eps: 0.01,
            qp_tol: 1e-6,
            max_rows: 1000,
            seed: 0,
            split: "split train=10 val=0 test=10 seed=0 repeats=1".into(),
            normalize_loss: true,
            current_arc: true,
            clusters: 50,
            cluster_sample: 20_000,
            lambda_grid: crate::pipelines::denoise::default_lambda_grid(),
            synth: SynthConfig::default(),
        };
        match task {
            Task::Denoise => base,
            // Ψ sums over pixels, so C acts on a |V|-times larger scale.
            Task::Segment => RunConfig {
                c: 1e-3,
                c_grid: vec![1e-4, 1e-3],
                split: "split train=6 val=3 test=3 seed=0 repeats=5".into(),
                synth: SynthConfig {
                    count: 12,
                    width: 48,
                    height: 32,
                    sigma: 0.08,
                },
                ..base
            },
            Task::MultilabelDemo => RunConfig {
                c: 100.0,
                eps: 1e-3,
                synth: SynthConfig {
                    count: 4,
                    width: 12,
                    height: 12,
                    sigma: 0.15,
                },
                ..base
            },
        }
    }

    pub fn validate(&self) -> Result<(), String> {
        let positive = |v: f64| v.is_finite() && v > 0.0;
        if !positive(self.c) || !positive(self.eps) || !positive(self.qp_tol) {
            return Err("c, eps and qp_tol must be positive".into());
        }
        if !self.c_grid.iter().all(|&v| positive(v)) {
            return Err("c_grid values must be positive".into());
        }
        if self.max_rows == 0 {
            return Err("max_rows must be at least 1".into());
        }
        if self.lambda_grid.is_empty() || !self.lambda_grid.iter().all(|l| l.is_finite() && *l >= 0.0) {
            return Err("lambda_grid must be nonempty and nonnegative".into());
        }
        SplitSpec::parse(&self.split).map_err(|e| e.to_string())?;
        let s = &self.synth;
        if s.count == 0 || s.width < 2 || s.height < 2 {
            return Err("synth needs count ≥ 1 and images of at least 2×2".into());
        }
        if !(s.sigma.is_finite() && s.sigma >= 0.0) {
            return Err("synth sigma must be nonnegative".into());
        }
        if self.task != Task::Segment && s.width != s.height {
            return Err(format!("{} images are square; width and height differ", self.task.name()));
        }
        if self.task == Task::Segment && self.clusters > 0 && self.cluster_sample < self.clusters {
            return Err("cluster_sample must be at least clusters".into());
        }
        if self.split.contains('#') {
            return Err("split must not contain '#'".into());
        }
        Ok(())
    }

    pub fn split_spec(&self) -> SplitSpec {
        SplitSpec::parse(&self.split).expect("validated split")
    }

    pub fn train_config(&self) -> TrainConfig {
        TrainConfig {
            c: self.c,
            eps: self.eps,
            qp_tol: self.qp_tol,
            max_rows: self.max_rows,
        }
    }

    pub fn flow_options(&self) -> FlowOptions {
        FlowOptions {
            current_arc: self.current_arc,
            ..FlowOptions::default()
        }
    }

    pub fn c_values(&self) -> Vec<f64> {
        if self.c_grid.is_empty() {
            vec![self.c]
        } else {
            self.c_grid.clone()
        }
    }

    /// Parses JSON, filling absent fields with the defaults of its task.
    pub fn from_json(text: &str) -> Result<Self, String> {
        let value: serde_json::Value = serde_json::from_str(text).map_err(|e| e.to_string())?;
        let serde_json::Value::Object(mut given) = value else {
            return Err("config must be a JSON object".into());
        };
        // Written next to the config in artifacts.
        given.remove("version");
        let task = match given.get("task") {
            Some(t) => Task::deserialize(t).map_err(|e| format!("task: {e}"))?,
            None => Task::Denoise,
        };
        let mut merged = serde_json::to_value(RunConfig::for_task(task)).expect("config serializes");
        let target = merged.as_object_mut().unwrap();
        for (key, v) in given {
            match (target.get_mut(&key), v) {
                (Some(serde_json::Value::Object(inner)), serde_json::Value::Object(fields)) => inner.extend(fields),
                (_, v) => {
                    target.insert(key, v);
                }
            }
        }
        let config: RunConfig = serde_json::from_value(merged).map_err(|e| e.to_string())?;
        config.validate()?;
        Ok(config)
    }

    /// Single-line JSON, as embedded in artifacts.
    pub fn to_json_line(&self) -> String {
        serde_json::to_string(self).expect("config serializes")
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn json_round_trip() {
        for task in [Task::Denoise, Task::Segment, Task::MultilabelDemo] {
            let c = RunConfig::for_task(task);
            c.validate().unwrap();
            let back: RunConfig = serde_json::from_str(&c.to_json_line()).unwrap();
            assert_eq!(back, c);
            assert!(!c.to_json_line().contains('\n'));
        }
    }

    #[test]
    fn missing_fields_take_defaults_and_unknown_fields_fail() {
        let c = RunConfig::from_json(r#"{"task":"denoise","seed":7}"#).unwrap();
        assert_eq!(c.seed, 7);
        assert_eq!(c.c, 10.0);
        let s = RunConfig::from_json(r#"{"task":"segment","synth":{"count":3}}"#).unwrap();
        assert_eq!(s.c, 1e-3);
        assert_eq!((s.synth.count, s.synth.width), (3, 48));
        assert!(RunConfig::from_json(r#"{"bogus":1}"#).is_err());
        assert!(RunConfig::from_json(r#"{"synth":{"bogus":1}}"#).is_err());
        assert!(RunConfig::from_json(r#"{"eps":-1}"#).is_err());
    }

    #[test]
    fn rejects_bad_values() {
        let mut c = RunConfig::default();
        c.eps = 0.0;
        assert!(c.validate().is_err());
        let mut c = RunConfig::default();
        c.split = "split train=0 test=1".into();
        assert!(c.validate().is_err());
        let mut c = RunConfig::default();
        c.synth.width = 10;
        assert!(c.validate().is_err());
    }
}
