//! Argument parsing for the `sos` binary.

use std::path::{Path, PathBuf};

use clap::{Args, Parser, Subcommand};

use super::{commands, read_text, service, AppError, AppResult, RunConfig, Task};

#[derive(Debug, Parser)]
#[command(name = "sos", version, about = "Sum-of-submodular energy minimization and S3SVM learning")]
pub struct Cli {
    /// Worker threads for separation and batch prediction.
    #[arg(long, global = true, env = "SOS_THREADS")]
    pub threads: Option<usize>,
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Write a synthetic dataset, its manifest and config.json.
    Synth {
        #[command(flatten)]
        run: RunArgs,
        #[arg(long)]
        out: PathBuf,
        #[arg(long)]
        count: Option<usize>,
        /// Square side length (denoise) or width (segment).
        #[arg(long)]
        size: Option<usize>,
        #[arg(long)]
        height: Option<usize>,
        #[arg(long)]
        sigma: Option<f64>,
        #[arg(long)]
        force: bool,
    },
    /// Train a model on a manifest.
    Train {
        #[command(flatten)]
        run: RunArgs,
        #[arg(long)]
        manifest: Option<PathBuf>,
        #[arg(long)]
        out: PathBuf,
        /// JSON-lines training log; defaults to `<out>.log.jsonl`.
        #[arg(long)]
        log: Option<PathBuf>,
        #[arg(long)]
        force: bool,
    },
    /// Predict masks for a manifest or a single image.
    Predict {
        #[arg(long)]
        model: PathBuf,
        #[arg(long)]
        manifest: Option<PathBuf>,
        #[arg(long)]
        image: Option<PathBuf>,
        #[arg(long)]
        scribbles: Option<PathBuf>,
        /// Output directory for masks and timings.csv.
        #[arg(long)]
        out: PathBuf,
        #[arg(long)]
        force: bool,
    },
    /// Evaluate a model over repeated splits and write a metrics CSV.
    Eval {
        #[arg(long)]
        model: PathBuf,
        #[arg(long)]
        manifest: Option<PathBuf>,
        /// Split spec, e.g. "split train=75 val=38 test=38 seed=0".
        #[arg(long)]
        split: Option<String>,
        #[arg(long)]
        out: PathBuf,
        /// Fill the timing columns instead of writing NA.
        #[arg(long)]
        timings: bool,
        /// Also retrain per split with the model's recorded config.
        #[arg(long)]
        retrain: bool,
        #[arg(long)]
        force: bool,
    },
    /// Serve interactive segmentation over HTTP.
    Serve {
        #[arg(long)]
        model: PathBuf,
        #[arg(long, default_value = "127.0.0.1")]
        host: String,
        #[arg(long, default_value_t = 8080)]
        port: u16,
        #[arg(long, default_value_t = service::DEFAULT_MAX_PIXELS)]
        max_pixels: usize,
        #[arg(long, default_value_t = service::DEFAULT_TTL.as_secs())]
        session_ttl_secs: u64,
    },
    /// Minimize an energy file.
    Minimize {
        #[arg(long)]
        energy: PathBuf,
        /// Read the multi-label format and run α-expansion.
        #[arg(long)]
        multilabel: bool,
        #[arg(long)]
        out: PathBuf,
        #[arg(long)]
        force: bool,
    },
}

/// Options that build a [`RunConfig`]: a JSON file, then flag overrides.
#[derive(Debug, Args)]
pub struct RunArgs {
    #[arg(long, value_enum)]
    pub task: Option<Task>,
    #[arg(long)]
    pub config: Option<PathBuf>,
    #[arg(long)]
    pub c: Option<f64>,
    #[arg(long)]
    pub eps: Option<f64>,
    #[arg(long)]
    pub qp_tol: Option<f64>,
    #[arg(long)]
    pub seed: Option<u64>,
    #[arg(long)]
    pub split: Option<String>,
    #[arg(long)]
    pub max_rows: Option<usize>,
    #[arg(long)]
    pub clusters: Option<usize>,
    /// Use the raw Hamming count instead of the per-pixel fraction.
    #[arg(long)]
    pub unnormalized_loss: bool,
    #[arg(long)]
    pub no_current_arc: bool,
}

impl RunArgs {
    pub fn config(&self) -> AppResult<RunConfig> {
        let mut c = match &self.config {
            Some(path) => {
                let text = read_text(path, "config")?;
                let c = RunConfig::from_json(&text).map_err(|e| AppError::Usage(format!("{}: {e}", path.display())))?;
                match self.task {
                    Some(t) if t != c.task => {
                        return Err(AppError::Usage(format!(
                            "--task {} contradicts the config's task {}",
                            t.name(),
                            c.task.name()
                        )))
                    }
                    _ => c,
                }
            }
            None => RunConfig::for_task(self.task.unwrap_or(Task::Denoise)),
        };
        if let Some(v) = self.c {
            c.c = v;
        }
        if let Some(v) = self.eps {
            c.eps = v;
        }
        if let Some(v) = self.qp_tol {
            c.qp_tol = v;
        }
        if let Some(v) = self.seed {
            c.seed = v;
        }
        if let Some(v) = &self.split {
            c.split = v.clone();
        }
        if let Some(v) = self.max_rows {
            c.max_rows = v;
        }
        if let Some(v) = self.clusters {
            c.clusters = v;
        }
        if self.unnormalized_loss {
            c.normalize_loss = false;
        }
        if self.no_current_arc {
            c.current_arc = false;
        }
        c.validate().map_err(AppError::Usage)?;
        Ok(c)
    }
}

fn init_threads(threads: Option<usize>) -> AppResult<()> {
    if let Some(n) = threads {
        if n == 0 {
            return Err(AppError::Usage("--threads must be at least 1".into()));
        }
        rayon::ThreadPoolBuilder::new()
            .num_threads(n)
            .build_global()
            .map_err(|e| AppError::Internal(e.to_string()))?;
    }
    Ok(())
}

pub fn run(cli: Cli) -> AppResult<()> {
    init_threads(cli.threads)?;
    match cli.command {
        Command::Synth {
            run,
            out,
            count,
            size,
            height,
            sigma,
            force,
        } => {
            let mut c = run.config()?;
            if let Some(v) = count {
                c.synth.count = v;
            }
            if let Some(v) = size {
                c.synth.width = v;
                if c.task != Task::Segment {
                    c.synth.height = v;
                }
            }
            if let Some(v) = height {
                c.synth.height = v;
            }
            if let Some(v) = sigma {
                c.synth.sigma = v;
            }
            c.validate().map_err(AppError::Usage)?;
            commands::synth(&c, &out, force)?;
        }
        Command::Train {
            run,
            manifest,
            out,
            log,
            force,
        } => {
            let c = run.config()?;
            let log = log.unwrap_or_else(|| super::with_extension_suffix(&out, ".log.jsonl"));
            commands::train(&c, manifest.as_deref(), &out, &log, force)?;
        }
        Command::Predict {
            model,
            manifest,
            image,
            scribbles,
            out,
            force,
        } => {
            let done = commands::predict(
                &model,
                manifest.as_deref(),
                image.as_deref(),
                scribbles.as_deref(),
                &out,
                force,
            )?;
            log::info!("wrote {} masks to {}", done.len(), out.display());
        }
        Command::Eval {
            model,
            manifest,
            split,
            out,
            timings,
            retrain,
            force,
        } => {
            let rows = commands::eval(
                &model,
                manifest.as_deref(),
                split.as_deref(),
                &out,
                timings,
                retrain,
                force,
            )?;
            for r in &rows {
                log::info!("{}: error {:.4} ± {:.4}", r.algorithm, r.avg_error(), r.std_error());
            }
        }
        Command::Serve {
            model,
            host,
            port,
            max_pixels,
            session_ttl_secs,
        } => {
            serve(&model, &host, port, max_pixels, session_ttl_secs)?;
        }
        Command::Minimize {
            energy,
            multilabel,
            out,
            force,
        } => {
            commands::minimize(&energy, multilabel, &out, force)?;
        }
    }
    Ok(())
}

fn serve(model: &Path, host: &str, port: u16, max_pixels: usize, ttl_secs: u64) -> AppResult<()> {
    let settings = service::Settings {
        max_pixels,
        ttl: std::time::Duration::from_secs(ttl_secs),
    };
    let state = service::AppState::from_model_file(model, settings)?;
    let runtime = tokio::runtime::Runtime::new().map_err(|e| AppError::Internal(e.to_string()))?;
    runtime.block_on(async move {
        let listener = tokio::net::TcpListener::bind((host, port))
            .await
            .map_err(|e| AppError::Usage(format!("cannot bind {host}:{port}: {e}")))?;
        log::info!("listening on {}", listener.local_addr().map_err(|e| AppError::Internal(e.to_string()))?);
        service::spawn_evictor(state.clone());
        axum::serve(listener, service::router(state))
            .await
            .map_err(|e| AppError::Internal(e.to_string()))
    })
}
