use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use log::{error, info};
use serde_json::json;

use indepcam::experiment::{
    cam_report, evaluate_checkpoint, extract_features, lambda_sweep, load_records, noise_report, prepare,
    report_csv, sweep_csv, train_model, DataSource, ExperimentConfig, Prepared, RunMetrics,
};
use indepcam::io::{self, PayloadFormat};
use indepcam::model::checkpoint;
use indepcam::model::Checkpoint;
use indepcam::{Error, Result};

#[derive(Parser)]
#[command(name = "indepcam", version, about = "Feature-independent CNN training and activation-map analysis")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Args, Clone)]
struct Common {
    /// Experiment configuration (JSON). Defaults apply when omitted.
    #[arg(long)]
    config: Option<PathBuf>,
    /// Output directory (a file for `features` and `report`).
    #[arg(long)]
    out: PathBuf,
    /// Overrides the configuration's seed.
    #[arg(long)]
    seed: Option<u64>,
    /// Dotted-path override, e.g. `model.epochs=5`. Repeatable.
    #[arg(long = "set", value_name = "KEY=VALUE")]
    set: Vec<String>,
}

#[derive(Args, Clone)]
struct DataArgs {
    /// Dataset manifest; replaces the configured source.
    #[arg(long)]
    manifest: Option<PathBuf>,
    /// Ground-truth landmarks written by `synth`.
    #[arg(long)]
    truth: Option<PathBuf>,
}

#[derive(Subcommand)]
enum Command {
    /// Generate the configured synthetic dataset as a manifest.
    Synth {
        #[command(flatten)]
        common: Common,
        #[arg(long, value_enum, default_value = "csv")]
        format: Format,
    },
    /// Extract the configured feature sets into a CSV table.
    Features {
        #[command(flatten)]
        common: Common,
        #[command(flatten)]
        data: DataArgs,
    },
    /// Train one model and evaluate it on the test split.
    Train {
        #[command(flatten)]
        common: Common,
        #[command(flatten)]
        data: DataArgs,
        /// Precomputed feature table used instead of extraction.
        #[arg(long)]
        features: Option<PathBuf>,
        /// Name recorded in the metrics file.
        #[arg(long, default_value = "model")]
        name: String,
    },
    /// Train one model per λ in `sweep.lambdas`.
    Sweep {
        #[command(flatten)]
        common: Common,
        #[command(flatten)]
        data: DataArgs,
    },
    /// Evaluate a saved checkpoint.
    Eval {
        #[command(flatten)]
        common: Common,
        #[command(flatten)]
        data: DataArgs,
        #[arg(long)]
        checkpoint: PathBuf,
        #[arg(long, default_value = "model")]
        name: String,
    },
    /// Landmark-aligned activation templates of one or more models.
    Cam {
        #[command(flatten)]
        common: Common,
        #[command(flatten)]
        data: DataArgs,
        /// `name=path`; the first is the reference for the t-tests.
        #[arg(long = "checkpoint", required = true)]
        checkpoints: Vec<String>,
    },
    /// Template prominence under landmark jitter.
    Noise {
        #[command(flatten)]
        common: Common,
        #[command(flatten)]
        data: DataArgs,
        #[arg(long)]
        checkpoint: PathBuf,
    },
    /// Merge metrics files into one CSV row per model.
    Report {
        #[arg(long, required = true, num_args = 1..)]
        inputs: Vec<PathBuf>,
        #[arg(long)]
        out: PathBuf,
    },
}

#[derive(Clone, Copy, clap::ValueEnum)]
enum Format {
    Csv,
    F32,
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("info")).init();
    match run(Cli::parse().command) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            error!("{e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}

fn load_config(common: &Common) -> Result<ExperimentConfig> {
    let mut set = common.set.clone();
    if let Some(seed) = common.seed {
        set.push(format!("seed={seed}"));
    }
    match &common.config {
        Some(p) => ExperimentConfig::load(p, &set),
        None => ExperimentConfig::from_json_with_overrides("{}", &set),
    }
}

fn write_run_manifest(dir: &Path, command: &str, cfg: &ExperimentConfig) -> Result<()> {
    io::write_json(
        &dir.join("run_manifest.json"),
        &json!({
            "command": command,
            "config_hash": cfg.hash()?,
            "seed": cfg.seed,
            "versions": {
                "indepcam": env!("CARGO_PKG_VERSION"),
                "format": 1,
            },
            "config": cfg,
        }),
    )
}

fn prepared(cfg: &ExperimentConfig, data: &DataArgs, features: Option<&Path>) -> Result<Prepared> {
    let truth = data.truth.as_deref().map(io::read_ground_truth).transpose()?;
    prepare(cfg, data.manifest.as_deref(), truth, features)
}

fn load_checkpoint(path: &Path, cfg: &ExperimentConfig) -> Result<Checkpoint> {
    let ck = checkpoint::load(path)?;
    let dim = ck.network.config.feature_dim;
    if dim != 0 && dim != cfg.model.feature_dim {
        return Err(Error::Config(format!(
            "checkpoint expects {dim} features, the configuration provides {}",
            cfg.model.feature_dim
        )));
    }
    Ok(ck)
}

fn run_metrics(name: &str, cfg: &ExperimentConfig, prepared: &Prepared, ck: &Checkpoint) -> Result<RunMetrics> {
    Ok(RunMetrics {
        model: name.to_string(),
        config_hash: cfg.hash()?,
        seed: cfg.seed,
        lambda: cfg.model.lambda,
        features: cfg.features.clone(),
        best_epoch: ck.epoch,
        report: evaluate_checkpoint(cfg, prepared, ck)?,
    })
}

fn run(command: Command) -> Result<()> {
    match command {
        Command::Synth { common, format } => {
            let cfg = load_config(&common)?;
            if matches!(cfg.dataset.source, DataSource::Manifest { .. }) {
                return Err(Error::Config("synth needs a synthetic dataset.source".into()));
            }
            let (records, truth) = load_records(&cfg, None)?;
            let format = match format {
                Format::Csv => PayloadFormat::Csv,
                Format::F32 => PayloadFormat::F32,
            };
            let manifest = io::write_manifest(&common.out, &records, format)?;
            if let Some(t) = truth {
                io::write_ground_truth(&common.out.join("ground_truth.json"), &t)?;
            }
            write_run_manifest(&common.out, "synth", &cfg)?;
            info!("wrote {} records to {}", records.len(), manifest.display());
        }
        Command::Features { common, data } => {
            let cfg = load_config(&common)?;
            let sets = if cfg.features.is_empty() { cfg.probe_feature_sets() } else { cfg.features.clone() };
            if sets.is_empty() {
                return Err(Error::Config("no feature sets configured".into()));
            }
            let p = prepared(&cfg, &data, None)?;
            let rows = extract_features(&sets, &p.dataset.records)?;
            let labels: Vec<usize> = p.dataset.records.iter().map(|r| r.label).collect();
            io::write_features_csv(&common.out, &rows, &labels, &p.dataset.splits)?;
            info!("wrote {} feature rows to {}", rows.len(), common.out.display());
        }
        Command::Train {
            common,
            data,
            features,
            name,
        } => {
            let cfg = load_config(&common)?;
            let p = prepared(&cfg, &data, features.as_deref())?;
            let out = train_model(&cfg, &p)?;
            io::write_text(&common.out.join("train_log.csv"), &out.log.to_csv())?;
            io::write_json(&common.out.join("train_log.json"), &out.log)?;
            if let Some(msg) = &out.aborted {
                checkpoint::save(&out.last, &common.out.join("last.ckpt"))?;
                return Err(Error::Numerical(msg.clone()));
            }
            checkpoint::save(&out.best, &common.out.join("model.ckpt"))?;
            io::write_json(&common.out.join("metrics.json"), &run_metrics(&name, &cfg, &p, &out.best)?)?;
            write_run_manifest(&common.out, "train", &cfg)?;
            info!("best epoch {}, outputs in {}", out.best.epoch, common.out.display());
        }
        Command::Sweep { common, data } => {
            let cfg = load_config(&common)?;
            let p = prepared(&cfg, &data, None)?;
            let rows = lambda_sweep(&cfg, &p, &cfg.sweep.lambdas)?;
            io::write_text(&common.out.join("sweep.csv"), &sweep_csv(&rows))?;
            write_run_manifest(&common.out, "sweep", &cfg)?;
        }
        Command::Eval {
            common,
            data,
            checkpoint,
            name,
        } => {
            let cfg = load_config(&common)?;
            let ck = load_checkpoint(&checkpoint, &cfg)?;
            let p = prepared(&cfg, &data, None)?;
            io::write_json(&common.out.join("metrics.json"), &run_metrics(&name, &cfg, &p, &ck)?)?;
            write_run_manifest(&common.out, "eval", &cfg)?;
        }
        Command::Cam {
            common,
            data,
            checkpoints,
        } => {
            let cfg = load_config(&common)?;
            let p = prepared(&cfg, &data, None)?;
            let mut models = Vec::new();
            for spec in &checkpoints {
                let (name, path) = match spec.split_once('=') {
                    Some((n, path)) => (n.to_string(), PathBuf::from(path)),
                    None => {
                        let path = PathBuf::from(spec);
                        let stem = path.file_stem().map(|s| s.to_string_lossy().into_owned()).unwrap_or_default();
                        (stem, path)
                    }
                };
                models.push((name, load_checkpoint(&path, &cfg)?));
            }
            let refs: Vec<(String, &Checkpoint)> = models.iter().map(|(n, c)| (n.clone(), c)).collect();
            let report = cam_report(&cfg, &p, &refs)?;
            for (name, t) in &report.templates {
                io::write_text(&common.out.join(format!("template_{name}.csv")), &t.to_csv())?;
            }
            let counts: serde_json::Map<String, serde_json::Value> = report
                .event_counts()
                .into_iter()
                .map(|(n, (used, skipped))| (n, json!({ "events": used, "skipped": skipped })))
                .collect();
            io::write_json(&common.out.join("event_counts.json"), &counts)?;
            io::write_json(&common.out.join("ttests.json"), &report.comparisons)?;
            write_run_manifest(&common.out, "cam", &cfg)?;
        }
        Command::Noise {
            common,
            data,
            checkpoint,
        } => {
            let cfg = load_config(&common)?;
            let ck = load_checkpoint(&checkpoint, &cfg)?;
            let p = prepared(&cfg, &data, None)?;
            let report = noise_report(&cfg, &p, &ck)?;
            for (i, t) in report.intensities_ms.iter().zip(&report.templates) {
                io::write_text(&common.out.join(format!("template_noise_{i}ms.csv")), &t.to_csv())?;
            }
            io::write_json(
                &common.out.join("noise.json"),
                &json!({
                    "intensities_ms": report.intensities_ms,
                    "prominence": report.prominence,
                    "spearman": report.spearman,
                    "non_increasing": report.non_increasing,
                }),
            )?;
            write_run_manifest(&common.out, "noise", &cfg)?;
        }
        Command::Report { inputs, out } => {
            let runs = inputs
                .iter()
                .map(|p| io::read_json::<RunMetrics>(p))
                .collect::<Result<Vec<_>>>()?;
            io::write_text(&out, &report_csv(&runs))?;
        }
    }
    Ok(())
}
