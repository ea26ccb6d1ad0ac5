//! `bench` and `ablate` on synthetic scenes.

use std::path::{Path, PathBuf};

use clap::ValueEnum;
use serde::{Deserialize, Serialize};

use lpoi_core::synthbench::{
    prepare, run_ablation, run_on, write_ablation_csv, write_bench_csv, BenchConfig, BenchRow, DEFAULT_LIST_SIZES,
};

use super::{trainer_config, ModelFlags, ModelSettings, ObjectiveChoice, OptimFlags, OptimSettings};
use crate::config::{create_dir, default_workers, resolve, write_snapshot};
use crate::{CliError, Status};

pub const BENCH_FILE: &str = "bench.csv";
pub const ABLATION_FILE: &str = "ablation.csv";

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize, ValueEnum)]
#[serde(rename_all = "kebab-case")]
pub enum BenchObjective {
    Full,
    DpoOnly,
    /// Both objectives on identical data.
    #[default]
    Both,
}

impl BenchObjective {
    fn choices(self) -> &'static [ObjectiveChoice] {
        match self {
            BenchObjective::Full => &[ObjectiveChoice::Full],
            BenchObjective::DpoOnly => &[ObjectiveChoice::DpoOnly],
            BenchObjective::Both => &[ObjectiveChoice::Full, ObjectiveChoice::DpoOnly],
        }
    }
}

/// Consecutive seeds `seed, seed + 1, ...`.
fn seed_range(seed: u64, repeats: usize) -> Result<Vec<u64>, CliError> {
    if repeats == 0 {
        return Err(CliError::Usage("--repeats must be >= 1".into()));
    }
    (0..repeats as u64)
        .map(|i| seed.checked_add(i))
        .collect::<Option<Vec<_>>>()
        .ok_or_else(|| CliError::Usage("seed range overflows".into()))
}

#[allow(clippy::too_many_arguments)]
fn template(
    scenes: usize,
    holdout: f64,
    list_size: usize,
    seed: u64,
    objective: ObjectiveChoice,
    model: &ModelSettings,
    optim: &OptimSettings,
    workers: usize,
) -> Result<BenchConfig, CliError> {
    let config = BenchConfig {
        scenes,
        holdout,
        data_seed: seed,
        trainer: trainer_config(model, optim, list_size, seed, objective)?,
        workers,
    };
    config.validate().map_err(|e| CliError::Usage(e.to_string()))?;
    Ok(config)
}

fn resolve_workers(workers: &mut Option<usize>) -> Result<usize, CliError> {
    match *workers.get_or_insert_with(default_workers) {
        0 => Err(CliError::Usage("--workers must be >= 1".into())),
        n => Ok(n),
    }
}

fn out_dir(out: &Option<PathBuf>) -> Result<&Path, CliError> {
    out.as_deref()
        .ok_or_else(|| CliError::Usage("missing required --out".into()))
}

#[derive(Debug, Clone, Default, clap::Args, Serialize)]
pub struct BenchArgs {
    /// TOML file with a [bench] table; flags take precedence.
    #[arg(long)]
    #[serde(skip)]
    pub config: Option<PathBuf>,
    #[arg(long)]
    pub scenes: Option<usize>,
    /// Fraction of lists held out for evaluation.
    #[arg(long)]
    pub holdout: Option<f64>,
    #[arg(long)]
    pub list_size: Option<usize>,
    /// First seed; runs use seed, seed+1, ...
    #[arg(long)]
    pub seed: Option<u64>,
    #[arg(long)]
    pub repeats: Option<usize>,
    #[arg(long, value_enum)]
    pub objective: Option<BenchObjective>,
    #[command(flatten)]
    #[serde(flatten)]
    pub model: ModelFlags,
    #[command(flatten)]
    #[serde(flatten)]
    pub optim: OptimFlags,
    #[arg(long)]
    pub out: Option<PathBuf>,
    #[arg(long)]
    pub workers: Option<usize>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct BenchSettings {
    pub scenes: usize,
    pub holdout: f64,
    pub list_size: usize,
    pub seed: u64,
    pub repeats: usize,
    pub objective: BenchObjective,
    #[serde(flatten)]
    pub model: ModelSettings,
    #[serde(flatten)]
    pub optim: OptimSettings,
    pub out: Option<PathBuf>,
    pub workers: Option<usize>,
}

impl Default for BenchSettings {
    fn default() -> Self {
        Self {
            scenes: 200,
            holdout: 0.2,
            list_size: 5,
            seed: 1,
            repeats: 3,
            objective: BenchObjective::Both,
            model: ModelSettings::default(),
            optim: OptimSettings::default(),
            out: None,
            workers: None,
        }
    }
}

pub fn bench(args: BenchArgs) -> Result<Status, CliError> {
    let mut s: BenchSettings = resolve("bench", args.config.as_deref(), &args)?;
    s.model.fill_defaults();
    let workers = resolve_workers(&mut s.workers)?;
    let out = out_dir(&s.out)?;
    let seeds = seed_range(s.seed, s.repeats)?;
    let base = template(
        s.scenes,
        s.holdout,
        s.list_size,
        s.seed,
        ObjectiveChoice::Full,
        &s.model,
        &s.optim,
        workers,
    )?;

    let mut rows = Vec::new();
    for seed in seeds {
        let config = base.with_seed(seed);
        let data = prepare(&config)?;
        for choice in s.objective.choices() {
            let outcome = run_on(&data, &config.trainer, choice.objective())?;
            let row = BenchRow::new(choice.name(), &config, &outcome);
            println!(
                "seed {seed} {:<8} CHAIR_i {:.4} CHAIR_s {:.4} coverage {:.4} ordering {:.4}",
                row.objective, row.chair_i, row.chair_s, row.coverage, row.ordering_accuracy
            );
            rows.push(row);
        }
    }
    create_dir(out)?;
    let path = out.join(BENCH_FILE);
    write_bench_csv(&path, &rows).map_err(|e| CliError::output(&path, e))?;
    write_snapshot(out, "bench", &s)?;
    Ok(Status::Ok)
}

#[derive(Debug, Clone, Default, clap::Args, Serialize)]
pub struct AblateArgs {
    /// TOML file with an [ablate] table; flags take precedence.
    #[arg(long)]
    #[serde(skip)]
    pub config: Option<PathBuf>,
    #[arg(long)]
    pub scenes: Option<usize>,
    #[arg(long)]
    pub holdout: Option<f64>,
    /// Comma-separated list sizes (default 3,4,5).
    #[arg(long, value_delimiter = ',')]
    pub list_sizes: Option<Vec<usize>>,
    /// First seed; runs use seed, seed+1, ...
    #[arg(long)]
    pub seed: Option<u64>,
    #[arg(long)]
    pub repeats: Option<usize>,
    #[arg(long, value_enum)]
    pub objective: Option<ObjectiveChoice>,
    #[command(flatten)]
    #[serde(flatten)]
    pub model: ModelFlags,
    #[command(flatten)]
    #[serde(flatten)]
    pub optim: OptimFlags,
    #[arg(long)]
    pub out: Option<PathBuf>,
    #[arg(long)]
    pub workers: Option<usize>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct AblateSettings {
    pub scenes: usize,
    pub holdout: f64,
    pub list_sizes: Vec<usize>,
    pub seed: u64,
    pub repeats: usize,
    pub objective: ObjectiveChoice,
    #[serde(flatten)]
    pub model: ModelSettings,
    #[serde(flatten)]
    pub optim: OptimSettings,
    pub out: Option<PathBuf>,
    pub workers: Option<usize>,
}

impl Default for AblateSettings {
    fn default() -> Self {
        let b = BenchSettings::default();
        Self {
            scenes: b.scenes,
            holdout: b.holdout,
            list_sizes: DEFAULT_LIST_SIZES.to_vec(),
            seed: b.seed,
            repeats: b.repeats,
            objective: ObjectiveChoice::Full,
            model: b.model,
            optim: b.optim,
            out: None,
            workers: None,
        }
    }
}

pub fn ablate(args: AblateArgs) -> Result<Status, CliError> {
    let mut s: AblateSettings = resolve("ablate", args.config.as_deref(), &args)?;
    s.model.fill_defaults();
    let workers = resolve_workers(&mut s.workers)?;
    let out = out_dir(&s.out)?;
    let seeds = seed_range(s.seed, s.repeats)?;
    if s.list_sizes.is_empty() {
        return Err(CliError::Usage("--list-sizes must name at least one size".into()));
    }
    for &l in &s.list_sizes {
        template(s.scenes, s.holdout, l, s.seed, s.objective, &s.model, &s.optim, 1)?;
    }
    let base = template(
        s.scenes,
        s.holdout,
        s.list_sizes[0],
        s.seed,
        s.objective,
        &s.model,
        &s.optim,
        1,
    )?;
    let rows = run_ablation(&base, &s.list_sizes, &seeds, workers)?;
    for r in &rows {
        println!(
            "L={} seed {}: CHAIR_i {:.4} CHAIR_s {:.4} coverage {:.4} ordering {:.4} loss {:.4}",
            r.list_size, r.seed, r.chair_i, r.chair_s, r.coverage, r.ordering_accuracy, r.final_total_loss
        );
    }
    create_dir(out)?;
    let path = out.join(ABLATION_FILE);
    write_ablation_csv(&path, &rows).map_err(|e| CliError::output(&path, e))?;
    write_snapshot(out, "ablate", &s)?;
    Ok(Status::Ok)
}
