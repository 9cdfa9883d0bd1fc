//! The `sos` subcommands.

use std::fmt::Write as _;
use std::path::{Path, PathBuf};
use std::time::Instant;

use rayon::prelude::*;
use serde_json::json;

use super::{check_output, provenance, provenance_comment, read_text, write_file, AppError, AppResult, RunConfig, Task};
use crate::energy::{parse_energy, table_violations, Labeling};
use crate::flow::{self, FlowOptions};
use crate::learn::{read_model, write_model, CliqueType, FeatureSchema, Model, TrainReport};
use crate::multilabel::{alpha_expansion, parse_multilabel};
use crate::pipelines::dataset::{
    evaluate_split, load_manifest, metrics_csv, write_manifest, Algorithm, Labeled, ManifestEntry, MetricsRow, SplitSpec,
};
use crate::pipelines::denoise::{
    denoise_schema, predict_denoise, synth_denoise_dataset, train_denoise, DenoiseAlgorithm, DenoiseInstance,
    DenoiseTraining, GenericCutsAlgorithm,
};
use crate::pipelines::multilabel_demo::{
    label_error, multilabel_demo_instance, multilabel_demo_learner, multilabel_demo_schema, synth_multilabel_dataset,
    train_multilabel_demo, LEVELS,
};
use crate::pipelines::segment::{
    feature_names, predict_segment, synth_segment_dataset, train_segment, SegmentAlgorithm, SegmentExample,
    SegmentTraining,
};
use crate::pipelines::{load_mask, save_mask, ImageGrid, ScribbleMask};

/// Instances read from a manifest. Entries with scribbles are segmentation
/// examples, entries without are denoising examples; a manifest may not mix
/// the two.
pub(crate) enum Dataset {
    Denoise(Vec<DenoiseInstance>),
    Segment(Vec<SegmentExample>),
}

impl Dataset {
    pub fn task(&self) -> Task {
        match self {
            Dataset::Denoise(_) => Task::Denoise,
            Dataset::Segment(_) => Task::Segment,
        }
    }

    pub fn len(&self) -> usize {
        match self {
            Dataset::Denoise(d) => d.len(),
            Dataset::Segment(d) => d.len(),
        }
    }
}

fn load_entry_truth(e: &ManifestEntry, img: &ImageGrid) -> AppResult<Labeling> {
    let (truth, w, h) = load_mask(&e.truth)?;
    if (w, h) != (img.width(), img.height()) {
        return Err(AppError::Data(format!(
            "{}: truth is {w}×{h} but image is {}×{}",
            e.truth.display(),
            img.width(),
            img.height()
        )));
    }
    Ok(truth)
}

fn load_scribbles(path: &Path, img: &ImageGrid) -> AppResult<ScribbleMask> {
    let s = ScribbleMask::load(path)?;
    if (s.width, s.height) != (img.width(), img.height()) {
        return Err(AppError::Data(format!(
            "{}: scribbles are {}×{} but image is {}×{}",
            path.display(),
            s.width,
            s.height,
            img.width(),
            img.height()
        )));
    }
    Ok(s)
}

fn entries(manifest: Option<&Path>) -> AppResult<Vec<ManifestEntry>> {
    let path = manifest.ok_or_else(|| AppError::Usage("--manifest is required".into()))?;
    if !path.exists() {
        return Err(AppError::Usage(format!("manifest {} not found", path.display())));
    }
    Ok(load_manifest(path)?)
}

pub(crate) fn load_dataset(manifest: Option<&Path>) -> AppResult<Dataset> {
    let entries = entries(manifest)?;
    let with = entries.iter().filter(|e| e.scribbles.is_some()).count();
    if with != 0 && with != entries.len() {
        return Err(AppError::Data(
            "manifest mixes entries with and without scribbles".into(),
        ));
    }
    if with == 0 {
        let data = entries
            .par_iter()
            .map(|e| {
                let noisy = ImageGrid::load(&e.image)?;
                let truth = load_entry_truth(e, &noisy)?;
                Ok(DenoiseInstance { noisy, truth })
            })
            .collect::<AppResult<Vec<_>>>()?;
        Ok(Dataset::Denoise(data))
    } else {
        let data = entries
            .par_iter()
            .map(|e| {
                let image = ImageGrid::load(&e.image)?;
                let truth = load_entry_truth(e, &image)?;
                let scribbles = load_scribbles(e.scribbles.as_ref().unwrap(), &image)?;
                Ok(SegmentExample { image, truth, scribbles })
            })
            .collect::<AppResult<Vec<_>>>()?;
        Ok(Dataset::Segment(data))
    }
}

// ---------------------------------------------------------------- synth

/// Writes a synthetic dataset with its manifest and `config.json`. Returns
/// the number of instances.
pub fn synth(config: &RunConfig, out: &Path, force: bool) -> AppResult<usize> {
    check_output(out, force)?;
    let s = &config.synth;
    let mut entries = Vec::new();
    match config.task {
        Task::Denoise => {
            let data = synth_denoise_dataset(s.count, s.width, s.sigma, config.seed)?;
            for (i, d) in data.iter().enumerate() {
                let image = out.join(format!("noisy/{i:04}.png"));
                let truth = out.join(format!("truth/{i:04}.png"));
                write_file(&image, d.noisy.encode_png()?)?;
                write_file(&truth, crate::pipelines::encode_mask_png(&d.truth, s.width, s.width)?)?;
                entries.push(ManifestEntry {
                    image,
                    truth,
                    scribbles: None,
                });
            }
        }
        Task::Segment => {
            let data = synth_segment_dataset(s.count, s.width, s.height, config.seed)?;
            for (i, d) in data.iter().enumerate() {
                let image = out.join(format!("images/{i:04}.png"));
                let truth = out.join(format!("truth/{i:04}.png"));
                let scribbles = out.join(format!("scribbles/{i:04}.png"));
                write_file(&image, d.image.encode_png()?)?;
                write_file(&truth, crate::pipelines::encode_mask_png(&d.truth, s.width, s.height)?)?;
                write_file(&scribbles, d.scribbles.encode_png()?)?;
                entries.push(ManifestEntry {
                    image,
                    truth,
                    scribbles: Some(scribbles),
                });
            }
        }
        Task::MultilabelDemo => {
            return Err(AppError::Usage(
                "synth writes denoise and segment datasets; multilabel-demo generates its data during train".into(),
            ))
        }
    }
    write_file(&out.join("manifest.txt"), write_manifest(&entries, out))?;
    write_file(&out.join("config.json"), config_json(config))?;
    log::info!("wrote {} instances to {}", entries.len(), out.display());
    Ok(entries.len())
}

/// Pretty JSON of the config with the library version, readable by
/// `--config`.
pub(crate) fn config_json(config: &RunConfig) -> String {
    let mut v = serde_json::to_value(config).expect("config serializes");
    v.as_object_mut()
        .unwrap()
        .insert("version".into(), json!(super::VERSION));
    let mut s = serde_json::to_string_pretty(&v).unwrap();
    s.push('\n');
    s
}

// ---------------------------------------------------------------- train

/// Schema under which multi-label weights are stored: every per-label copy
/// of the demo schema, in the learner's weight order.
fn multilabel_storage_schema() -> FeatureSchema {
    let single = multilabel_demo_schema();
    let labels = 0..LEVELS.len();
    FeatureSchema {
        clique_types: labels
            .clone()
            .flat_map(|l| {
                single.clique_types.iter().map(move |t| CliqueType {
                    name: format!("{}@{l}", t.name),
                    ..t.clone()
                })
            })
            .collect(),
        unary_features: labels
            .flat_map(|l| single.unary_features.iter().map(move |f| format!("{f}@{l}")))
            .collect(),
        params: vec![],
    }
}

pub struct TrainOutcome {
    pub model: Model,
    pub report: TrainReport,
    pub seconds: f64,
}

pub fn train(config: &RunConfig, manifest: Option<&Path>, out: &Path, log_path: &Path, force: bool) -> AppResult<TrainOutcome> {
    check_output(out, force)?;
    check_output(log_path, force)?;
    let cfg = config.train_config();
    let flow = config.flow_options();
    let start = Instant::now();
    let (schema, weights, report) = match config.task {
        Task::Denoise | Task::Segment => {
            let data = load_dataset(manifest)?;
            if data.task() != config.task {
                return Err(AppError::Data(format!(
                    "task is {} but the manifest holds {} instances",
                    config.task.name(),
                    data.task().name()
                )));
            }
            match data {
                Dataset::Denoise(d) => {
                    let refs: Vec<&DenoiseInstance> = d.iter().collect();
                    let opts = DenoiseTraining {
                        train: cfg,
                        flow,
                        normalize_loss: config.normalize_loss,
                    };
                    let (w, r) = train_denoise(&refs, &opts)?;
                    (denoise_schema(), w, r)
                }
                Dataset::Segment(d) => {
                    let refs: Vec<&SegmentExample> = d.iter().collect();
                    train_segment(&refs, &segment_training(config))?
                }
            }
        }
        Task::MultilabelDemo => {
            if manifest.is_some() {
                log::warn!("multilabel-demo generates its own data; ignoring --manifest");
            }
            let s = &config.synth;
            let data = synth_multilabel_dataset(s.count, s.width, s.sigma, config.seed)?;
            let learner = multilabel_demo_learner(&flow, config.normalize_loss);
            let (w, r) = train_multilabel_demo(&data, &learner, &cfg)?;
            let err = data
                .iter()
                .map(|x| {
                    let y = learner.predict(&w, &multilabel_demo_instance(&x.image))?;
                    label_error(&x.truth, &y)
                })
                .sum::<crate::Result<f64>>()?
                / data.len() as f64;
            log::info!("multilabel-demo training error {err:.4}");
            (multilabel_storage_schema(), w, r)
        }
    };
    let seconds = start.elapsed().as_secs_f64();

    for t in 0..schema.clique_types.len() {
        if let Some(v) = table_violations(schema.clique_block(&weights, t), 1e-6).first() {
            return Err(AppError::Internal(format!(
                "trained clique type {t} fails the submodularity audit: {v}"
            )));
        }
    }
    let model = Model {
        schema,
        weights,
        meta: provenance(config),
    };
    let text = write_model(&model)?;
    write_file(out, text)?;
    write_file(log_path, training_log(config, &report, seconds))?;
    log::info!(
        "trained in {seconds:.2}s over {} iterations; model written to {}",
        report.iterations(),
        out.display()
    );
    Ok(TrainOutcome { model, report, seconds })
}

fn segment_training(config: &RunConfig) -> SegmentTraining {
    SegmentTraining {
        clusters: (config.clusters > 0).then_some(config.clusters),
        cluster_sample: config.cluster_sample,
        seed: config.seed,
        train: config.train_config(),
        flow: config.flow_options(),
        normalize_loss: config.normalize_loss,
    }
}

/// JSON lines: a `run` record, one `iteration` record per cutting-plane
/// iteration, and a `done` record.
fn training_log(config: &RunConfig, report: &TrainReport, seconds: f64) -> String {
    let mut out = String::new();
    let run = json!({
        "event": "run",
        "version": super::VERSION,
        "task": config.task.name(),
        "seed": config.seed,
        "config": config,
    });
    writeln!(out, "{run}").unwrap();
    for l in &report.log {
        let rec = json!({
            "event": "iteration",
            "iteration": l.iteration,
            "objective": l.objective,
            "xi": l.xi,
            "violation": l.violation,
            "mean_loss": l.mean_loss,
            "qp_iterations": l.qp_iterations,
            "seconds": l.seconds,
        });
        writeln!(out, "{rec}").unwrap();
    }
    let done = json!({
        "event": "done",
        "iterations": report.iterations(),
        "objective": report.objective,
        "xi": report.xi,
        "final_violation": report.final_violation,
        "max_materialized_violation": report.max_materialized_violation,
        "seconds": seconds,
    });
    writeln!(out, "{done}").unwrap();
    out
}

// ---------------------------------------------------------------- models

pub fn load_model(path: &Path) -> AppResult<Model> {
    let text = read_text(path, "model")?;
    Ok(read_model(&text)?)
}

/// The task recorded in the model, or the one its schema belongs to.
pub fn model_task(model: &Model) -> AppResult<Task> {
    if let Some(name) = model.meta("task") {
        return Task::from_name(name).ok_or_else(|| AppError::Data(format!("unknown task `{name}` in model")));
    }
    if model.schema == denoise_schema() {
        Ok(Task::Denoise)
    } else if model.schema.unary_features == feature_names() {
        Ok(Task::Segment)
    } else if model.schema == multilabel_storage_schema() {
        Ok(Task::MultilabelDemo)
    } else {
        Err(AppError::Data("model schema matches no known task".into()))
    }
}

/// The config recorded in the model, or the task defaults.
pub fn model_config(model: &Model, task: Task) -> AppResult<RunConfig> {
    match model.meta("config") {
        Some(text) => RunConfig::from_json(text).map_err(|e| AppError::Data(format!("model config: {e}"))),
        None => Ok(RunConfig::for_task(task)),
    }
}

/// Hash of the unary feature list a task's instances provide.
fn feature_hash(features: &[String]) -> String {
    FeatureSchema {
        clique_types: vec![],
        unary_features: features.to_vec(),
        params: vec![],
    }
    .hash()
}

/// Refuses a model whose features differ from those of `task`'s instances.
pub fn check_features(model: &Model, task: Task) -> AppResult<()> {
    let expected = match task {
        Task::Denoise => denoise_schema().unary_features,
        Task::Segment => feature_names(),
        Task::MultilabelDemo => multilabel_storage_schema().unary_features,
    };
    let (want, have) = (feature_hash(&expected), feature_hash(&model.schema.unary_features));
    if want != have {
        return Err(AppError::Data(format!(
            "model schema does not match the {} features (feature hash {} vs {})",
            task.name(),
            &have[..12],
            &want[..12]
        )));
    }
    if task == Task::Denoise && model.schema != denoise_schema() {
        return Err(AppError::Data("model clique types differ from the denoising schema".into()));
    }
    Ok(())
}

/// Predicts one manifest-style instance with a binary model.
pub fn predict_one(
    model: &Model,
    task: Task,
    img: &ImageGrid,
    scribbles: Option<&ScribbleMask>,
    flow: &FlowOptions,
) -> AppResult<Labeling> {
    match task {
        Task::Denoise => Ok(predict_denoise(&model.weights, img, flow)?),
        Task::Segment => {
            let s = scribbles.ok_or_else(|| AppError::Data("segmentation needs scribbles".into()))?;
            Ok(predict_segment(&model.schema, &model.weights, img, s, flow)?)
        }
        Task::MultilabelDemo => Err(AppError::Usage(
            "multilabel-demo models are not used for binary prediction".into(),
        )),
    }
}

// ---------------------------------------------------------------- predict

pub struct Prediction {
    pub image: PathBuf,
    pub mask: PathBuf,
    pub seconds: f64,
}

/// Predicts every manifest entry, or a single image, writing masks and
/// `timings.csv` into `out`.
pub fn predict(
    model_path: &Path,
    manifest: Option<&Path>,
    image: Option<&Path>,
    scribbles: Option<&Path>,
    out: &Path,
    force: bool,
) -> AppResult<Vec<Prediction>> {
    let model = load_model(model_path)?;
    let task = model_task(&model)?;
    check_features(&model, task)?;
    let config = model_config(&model, task)?;
    let flow = config.flow_options();
    let inputs: Vec<(PathBuf, Option<PathBuf>)> = match (manifest, image) {
        (Some(_), Some(_)) => return Err(AppError::Usage("give either --manifest or --image".into())),
        (Some(_), None) => entries(manifest)?
            .into_iter()
            .map(|e| (e.image, e.scribbles))
            .collect(),
        (None, Some(img)) => {
            if !img.exists() {
                return Err(AppError::Usage(format!("image {} not found", img.display())));
            }
            vec![(img.to_path_buf(), scribbles.map(Path::to_path_buf))]
        }
        (None, None) => return Err(AppError::Usage("--manifest or --image is required".into())),
    };
    check_output(out, force)?;

    let mut names = std::collections::BTreeSet::new();
    let targets: Vec<PathBuf> = inputs
        .iter()
        .map(|(img, _)| {
            let stem = img.file_stem().map(|s| s.to_string_lossy().into_owned()).unwrap_or_default();
            let name = format!("{stem}.png");
            if !names.insert(name.clone()) {
                return Err(AppError::Data(format!("two inputs would both write mask {name}")));
            }
            Ok(out.join(name))
        })
        .collect::<AppResult<_>>()?;

    let results = inputs
        .par_iter()
        .map(|(img_path, scr_path)| {
            let img = ImageGrid::load(img_path)?;
            let scr = match scr_path {
                Some(p) => Some(load_scribbles(p, &img)?),
                None => None,
            };
            let t = Instant::now();
            let y = predict_one(&model, task, &img, scr.as_ref(), &flow)?;
            Ok((img.width(), img.height(), y, t.elapsed().as_secs_f64()))
        })
        .collect::<AppResult<Vec<_>>>()?;

    std::fs::create_dir_all(out).map_err(|e| AppError::Internal(format!("{}: {e}", out.display())))?;
    let mut csv = provenance_comment(&config);
    csv.push_str("image,mask,width,height,seconds\n");
    let mut done = Vec::new();
    for ((img_path, _), (target, (w, h, y, secs))) in inputs.iter().zip(targets.into_iter().zip(results)) {
        save_mask(&target, &y, w, h)?;
        writeln!(
            csv,
            "{},{},{w},{h},{secs:.6}",
            img_path.display(),
            target.file_name().unwrap().to_string_lossy()
        )
        .unwrap();
        done.push(Prediction {
            image: img_path.clone(),
            mask: target,
            seconds: secs,
        });
    }
    write_file(&out.join("timings.csv"), csv)?;
    Ok(done)
}

// ---------------------------------------------------------------- eval

/// A trained model evaluated as is.
struct Fixed<'a> {
    name: String,
    model: &'a Model,
    task: Task,
    flow: FlowOptions,
}

impl Algorithm<DenoiseInstance> for Fixed<'_> {
    type Fitted = ();

    fn name(&self) -> &str {
        &self.name
    }

    fn fit(&self, _: &[&DenoiseInstance], _: &[&DenoiseInstance]) -> crate::Result<()> {
        Ok(())
    }

    fn predict(&self, _: &(), x: &DenoiseInstance) -> crate::Result<Labeling> {
        predict_denoise(&self.model.weights, &x.noisy, &self.flow)
    }
}

impl Algorithm<SegmentExample> for Fixed<'_> {
    type Fitted = ();

    fn name(&self) -> &str {
        &self.name
    }

    fn fit(&self, _: &[&SegmentExample], _: &[&SegmentExample]) -> crate::Result<()> {
        debug_assert_eq!(self.task, Task::Segment);
        Ok(())
    }

    fn predict(&self, _: &(), x: &SegmentExample) -> crate::Result<Labeling> {
        predict_segment(&self.model.schema, &self.model.weights, &x.image, &x.scribbles, &self.flow)
    }
}

fn run_split<E: Labeled, A: Algorithm<E>>(algo: &A, data: &[E], spec: &SplitSpec) -> AppResult<MetricsRow> {
    log::info!("evaluating {}", algo.name());
    Ok(evaluate_split(algo, data, spec)?)
}

/// Evaluates the model on every test split, with the task's baseline and,
/// with `retrain`, a model retrained per split from the recorded config.
pub fn eval(
    model_path: &Path,
    manifest: Option<&Path>,
    split: Option<&str>,
    out: &Path,
    timings: bool,
    retrain: bool,
    force: bool,
) -> AppResult<Vec<MetricsRow>> {
    let model = load_model(model_path)?;
    let task = model_task(&model)?;
    let mut config = model_config(&model, task)?;
    if let Some(s) = split {
        SplitSpec::parse(s).map_err(|e| AppError::Usage(format!("--split: {e}")))?;
        config.split = s.to_string();
    }
    let spec = config.split_spec();
    check_output(out, force)?;
    let data = load_dataset(manifest)?;
    check_features(&model, data.task())?;
    if data.len() < spec.train + spec.val + spec.test {
        return Err(AppError::Data(format!(
            "split needs {} instances but the manifest has {}",
            spec.train + spec.val + spec.test,
            data.len()
        )));
    }
    let flow = config.flow_options();
    let fixed = Fixed {
        name: "s3svm_model".into(),
        model: &model,
        task: data.task(),
        flow: flow.clone(),
    };
    let mut rows = Vec::new();
    match &data {
        Dataset::Denoise(d) => {
            rows.push(run_split(&fixed, d, &spec)?);
            let baseline = GenericCutsAlgorithm {
                grid: config.lambda_grid.clone(),
                flow: flow.clone(),
            };
            rows.push(run_split(&baseline, d, &spec)?);
            if retrain {
                let algo = DenoiseAlgorithm {
                    name: "s3svm".into(),
                    c_grid: config.c_values(),
                    opts: DenoiseTraining {
                        train: config.train_config(),
                        flow: flow.clone(),
                        normalize_loss: config.normalize_loss,
                    },
                };
                rows.push(run_split(&algo, d, &spec)?);
            }
        }
        Dataset::Segment(d) => {
            rows.push(run_split(&fixed, d, &spec)?);
            if retrain {
                let algo = SegmentAlgorithm {
                    name: "s3svm".into(),
                    c_grid: config.c_values(),
                    opts: segment_training(&config),
                };
                rows.push(run_split(&algo, d, &spec)?);
            }
        }
    }
    let mut csv = provenance_comment(&config);
    csv.push_str(&metrics_csv(&rows, timings));
    write_file(out, csv)?;
    Ok(rows)
}

// ---------------------------------------------------------------- minimize

/// Minimizes an energy file: exactly for binary energies, by α-expansion
/// for multi-label ones.
pub fn minimize(energy: &Path, multilabel: bool, out: &Path, force: bool) -> AppResult<String> {
    let text = read_text(energy, "energy file")?;
    check_output(out, force)?;
    let result = if multilabel {
        let e = parse_multilabel(&text)?;
        let r = alpha_expansion(&e, None, &FlowOptions::default())?;
        let labels: Vec<String> = r.labeling.0.iter().map(|l| l.to_string()).collect();
        format!(
            "energy {}\nlabels {}\ncycles {}\nmoves {}\n",
            r.energy,
            labels.join(" "),
            r.cycles,
            r.trace.len() - 1
        )
    } else {
        let e = parse_energy(&text)?;
        // A nonsubmodular energy here is bad input, not an internal failure.
        flow::minimize(&e).map_err(|err| match err {
            crate::Error::NotSubmodular { .. } => AppError::Data(err.to_string()),
            other => other.into(),
        })?
        .to_text()
    };
    write_file(out, &result)?;
    Ok(result)
}
