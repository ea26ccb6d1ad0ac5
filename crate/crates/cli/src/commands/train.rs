//! `grad-check` and `train`.

use std::path::PathBuf;

use serde::{Deserialize, Serialize};

use lpoi_core::listgen::{read_dataset, ListRecord};
use lpoi_core::seed::derive_seed;
use lpoi_core::surrogate::{finite_diff_check, train as fit, write_metrics_csv, PreferenceFeatures, ToyPolicy};
use lpoi_core::synthbench::{build_lists, default_vocab, gen_scenes};

use super::{trainer_config, ModelFlags, ModelSettings, ObjectiveChoice, OptimFlags, OptimSettings};
use crate::config::{create_dir, default_workers, resolve, write_snapshot};
use crate::{CliError, Status};

pub const CHECKPOINT_FILE: &str = "policy.json";
pub const METRICS_FILE: &str = "metrics.csv";

fn features(records: &[ListRecord], context_dim: usize) -> Result<Vec<PreferenceFeatures>, CliError> {
    records
        .iter()
        .map(|r| PreferenceFeatures::from_record(r, context_dim).map_err(CliError::from))
        .collect()
}

fn synthetic_records(scenes: usize, list_size: usize, seed: u64, workers: usize) -> Result<Vec<ListRecord>, CliError> {
    let set = gen_scenes(scenes, seed, &default_vocab())?;
    Ok(build_lists(&set, list_size, seed, workers)?)
}

#[derive(Debug, Clone, Default, clap::Args, Serialize)]
pub struct GradCheckArgs {
    /// TOML file with a [grad-check] table; flags take precedence.
    #[arg(long)]
    #[serde(skip)]
    pub config: Option<PathBuf>,
    #[arg(long)]
    pub seed: Option<u64>,
    #[arg(long)]
    pub list_size: Option<usize>,
    /// Synthetic lists in the checked batch.
    #[arg(long)]
    pub samples: Option<usize>,
    /// Central-difference step.
    #[arg(long)]
    pub step: Option<f64>,
    /// Largest acceptable relative error.
    #[arg(long)]
    pub tol: Option<f64>,
    #[arg(long, value_enum)]
    pub objective: Option<ObjectiveChoice>,
    #[command(flatten)]
    #[serde(flatten)]
    pub model: ModelFlags,
    /// Directory for the resolved-config snapshot.
    #[arg(long)]
    pub out: Option<PathBuf>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct GradCheckSettings {
    pub seed: u64,
    pub list_size: usize,
    pub samples: usize,
    pub step: f64,
    pub tol: f64,
    pub objective: ObjectiveChoice,
    #[serde(flatten)]
    pub model: ModelSettings,
    pub out: Option<PathBuf>,
}

impl Default for GradCheckSettings {
    fn default() -> Self {
        Self {
            seed: 0,
            list_size: 5,
            samples: 8,
            step: 1e-5,
            tol: 1e-4,
            objective: ObjectiveChoice::Full,
            model: ModelSettings::default(),
            out: None,
        }
    }
}

pub fn grad_check(args: GradCheckArgs) -> Result<Status, CliError> {
    let mut s: GradCheckSettings = resolve("grad-check", args.config.as_deref(), &args)?;
    s.model.fill_defaults();
    if !(s.step.is_finite() && s.step > 0.0) {
        return Err(CliError::Usage(format!("--step must be > 0, got {}", s.step)));
    }
    if !(s.tol.is_finite() && s.tol > 0.0) {
        return Err(CliError::Usage(format!("--tol must be > 0, got {}", s.tol)));
    }
    if s.samples == 0 {
        return Err(CliError::Usage("--samples must be >= 1".into()));
    }
    let optim = OptimSettings::default();
    let trainer = trainer_config(&s.model, &optim, s.list_size, s.seed, s.objective)?;
    let data = features(
        &synthetic_records(s.samples, s.list_size, s.seed, 1)?,
        s.model.context_dim,
    )?;
    let kind = s.model.kind();
    let d = s.model.context_dim;
    let policy = ToyPolicy::random(kind, d, derive_seed(s.seed, "policy"), s.model.init_scale);
    let reference = ToyPolicy::random(kind, d, derive_seed(s.seed, "reference"), s.model.init_scale);
    let err = finite_diff_check(&policy, &reference, &data, &trainer.hyper, trainer.objective, s.step)?;
    println!("max relative error: {err:.3e}");
    if let Some(out) = &s.out {
        create_dir(out)?;
        write_snapshot(out, "grad-check", &s)?;
    }
    if err > s.tol {
        return Err(CliError::Failed(format!(
            "gradient check failed: max relative error {err:.3e} exceeds {:.3e}",
            s.tol
        )));
    }
    Ok(Status::Ok)
}

#[derive(Debug, Clone, Default, clap::Args, Serialize)]
pub struct TrainArgs {
    /// TOML file with a [train] table; flags take precedence.
    #[arg(long)]
    #[serde(skip)]
    pub config: Option<PathBuf>,
    /// Dataset directory written by build-lists.
    #[arg(long, conflicts_with = "scenes")]
    pub dataset: Option<PathBuf>,
    /// Train on this many synthetic scenes instead of a dataset.
    #[arg(long)]
    pub scenes: Option<usize>,
    /// List size of synthetic lists.
    #[arg(long)]
    pub list_size: Option<usize>,
    #[arg(long)]
    pub seed: Option<u64>,
    #[arg(long, value_enum)]
    pub objective: Option<ObjectiveChoice>,
    #[command(flatten)]
    #[serde(flatten)]
    pub model: ModelFlags,
    #[command(flatten)]
    #[serde(flatten)]
    pub optim: OptimFlags,
    /// Output directory for the checkpoint and metrics.
    #[arg(long)]
    pub out: Option<PathBuf>,
    #[arg(long)]
    pub workers: Option<usize>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct TrainSettings {
    pub dataset: Option<PathBuf>,
    pub scenes: Option<usize>,
    pub list_size: usize,
    pub seed: u64,
    pub objective: ObjectiveChoice,
    #[serde(flatten)]
    pub model: ModelSettings,
    #[serde(flatten)]
    pub optim: OptimSettings,
    pub out: Option<PathBuf>,
    pub workers: Option<usize>,
}

impl Default for TrainSettings {
    fn default() -> Self {
        Self {
            dataset: None,
            scenes: None,
            list_size: 5,
            seed: 0,
            objective: ObjectiveChoice::Full,
            model: ModelSettings::default(),
            optim: OptimSettings::default(),
            out: None,
            workers: None,
        }
    }
}

pub fn train(args: TrainArgs) -> Result<Status, CliError> {
    let mut s: TrainSettings = resolve("train", args.config.as_deref(), &args)?;
    s.model.fill_defaults();
    let out = s
        .out
        .clone()
        .ok_or_else(|| CliError::Usage("missing required --out".into()))?;
    let workers = *s.workers.get_or_insert_with(default_workers);
    let records = match (&s.dataset, s.scenes) {
        (Some(_), Some(_)) => return Err(CliError::Usage("--dataset and --scenes are exclusive".into())),
        (None, None) => return Err(CliError::Usage("one of --dataset or --scenes is required".into())),
        (Some(dir), None) => {
            if !dir.is_dir() {
                return Err(CliError::Usage(format!(
                    "--dataset {}: no such directory",
                    dir.display()
                )));
            }
            let records = read_dataset(dir)?;
            let Some(first) = records.first() else {
                return Err(CliError::Failed(format!("{}: dataset has no records", dir.display())));
            };
            s.list_size = first.ranked.len();
            if let Some(r) = records.iter().find(|r| r.ranked.len() != s.list_size) {
                return Err(CliError::Failed(format!(
                    "record `{}` has {} images, expected {}",
                    r.sample_id,
                    r.ranked.len(),
                    s.list_size
                )));
            }
            records
        }
        (None, Some(n)) => {
            trainer_config(&s.model, &s.optim, s.list_size, s.seed, s.objective)?;
            synthetic_records(n, s.list_size, s.seed, workers.max(1))?
        }
    };
    let config = trainer_config(&s.model, &s.optim, s.list_size, s.seed, s.objective)?;
    let data = features(&records, s.model.context_dim)?;
    let outcome = fit(&config, &data)?;

    create_dir(&out)?;
    outcome.policy.save(&out.join(CHECKPOINT_FILE))?;
    let metrics = out.join(METRICS_FILE);
    write_metrics_csv(&metrics, &outcome.history).map_err(|e| CliError::output(&metrics, e))?;
    write_snapshot(&out, "train", &s)?;
    if let Some(last) = outcome.history.last() {
        println!(
            "epoch {}: total loss {:.6}, ordering accuracy {:.4}",
            last.epoch, last.total, last.ordering_accuracy
        );
    }
    Ok(Status::Ok)
}
