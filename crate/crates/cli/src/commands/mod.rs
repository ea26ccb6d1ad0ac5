//! Subcommand implementations and the flag groups they share.

use clap::ValueEnum;
use serde::{Deserialize, Serialize};

use lpoi_core::surrogate::{PolicyKind, PolicySpec, TrainerConfig, DEFAULT_CONTEXT_DIM, DEFAULT_HIDDEN};
use lpoi_core::types::{DEFAULT_BETA, DEFAULT_DELTA};
use lpoi_core::{BoundingBox, Hyperparams, Objective, Rgb};

use crate::CliError;

pub mod build;
pub mod synth;
pub mod train;
pub mod validate;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize, ValueEnum)]
#[serde(rename_all = "kebab-case")]
pub enum PolicyChoice {
    #[default]
    Linear,
    Mlp1,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize, ValueEnum)]
#[serde(rename_all = "kebab-case")]
pub enum ObjectiveChoice {
    /// Pairwise, anchor and listwise terms.
    #[default]
    Full,
    /// Pairwise term only.
    DpoOnly,
}

impl ObjectiveChoice {
    pub fn objective(self) -> Objective {
        match self {
            ObjectiveChoice::Full => Objective::FULL,
            ObjectiveChoice::DpoOnly => Objective::DPO_ONLY,
        }
    }

    pub fn name(self) -> &'static str {
        match self {
            ObjectiveChoice::Full => "full",
            ObjectiveChoice::DpoOnly => "dpo-only",
        }
    }
}

/// Objective hyperparameters and policy architecture.
#[derive(Debug, Clone, Default, clap::Args, Serialize)]
pub struct ModelFlags {
    /// Preference temperature (default 0.1).
    #[arg(long)]
    pub beta: Option<f64>,
    /// Anchor margin (default 0).
    #[arg(long)]
    pub delta: Option<f64>,
    #[arg(long, value_enum)]
    pub kind: Option<PolicyChoice>,
    /// Hidden units of the mlp1 policy.
    #[arg(long)]
    pub hidden: Option<usize>,
    #[arg(long)]
    pub context_dim: Option<usize>,
    /// Half-width of the uniform parameter initialization.
    #[arg(long)]
    pub init_scale: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct ModelSettings {
    pub beta: Option<f64>,
    pub delta: Option<f64>,
    pub kind: PolicyChoice,
    pub hidden: usize,
    pub context_dim: usize,
    pub init_scale: f64,
}

impl Default for ModelSettings {
    fn default() -> Self {
        Self {
            beta: None,
            delta: None,
            kind: PolicyChoice::Linear,
            hidden: DEFAULT_HIDDEN,
            context_dim: DEFAULT_CONTEXT_DIM,
            init_scale: 0.3,
        }
    }
}

impl ModelSettings {
    /// Fills unset `beta` and `delta` with the defaults, loudly.
    pub fn fill_defaults(&mut self) {
        if self.beta.is_none() {
            log::warn!("--beta not set; using {DEFAULT_BETA}");
            self.beta = Some(DEFAULT_BETA);
        }
        if self.delta.is_none() {
            log::warn!("--delta not set; using {DEFAULT_DELTA}");
            self.delta = Some(DEFAULT_DELTA);
        }
    }

    pub fn hyper(&self, list_size: usize) -> Result<Hyperparams, CliError> {
        Hyperparams::new(
            self.beta.unwrap_or(DEFAULT_BETA),
            self.delta.unwrap_or(DEFAULT_DELTA),
            list_size,
        )
        .map_err(|e| CliError::Usage(e.to_string()))
    }

    pub fn kind(&self) -> PolicyKind {
        match self.kind {
            PolicyChoice::Linear => PolicyKind::Linear,
            PolicyChoice::Mlp1 => PolicyKind::Mlp1 { hidden: self.hidden },
        }
    }

    pub fn spec(&self) -> PolicySpec {
        PolicySpec {
            kind: self.kind(),
            context_dim: self.context_dim,
            init_scale: self.init_scale,
        }
    }
}

/// Optimizer schedule.
#[derive(Debug, Clone, Default, clap::Args, Serialize)]
pub struct OptimFlags {
    /// Passes over the training data (>= 1, default 50).
    #[arg(long)]
    pub epochs: Option<usize>,
    #[arg(long)]
    pub learning_rate: Option<f64>,
    #[arg(long)]
    pub momentum: Option<f64>,
    #[arg(long)]
    pub batch_size: Option<usize>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct OptimSettings {
    pub epochs: usize,
    pub learning_rate: f64,
    pub momentum: f64,
    pub batch_size: usize,
}

impl Default for OptimSettings {
    fn default() -> Self {
        Self {
            epochs: 50,
            learning_rate: 0.05,
            momentum: 0.9,
            batch_size: 16,
        }
    }
}

/// Trainer settings, with configuration mistakes reported as usage errors.
pub fn trainer_config(
    model: &ModelSettings,
    optim: &OptimSettings,
    list_size: usize,
    seed: u64,
    objective: ObjectiveChoice,
) -> Result<TrainerConfig, CliError> {
    let mut c = TrainerConfig::new(model.hyper(list_size)?, optim.epochs, seed);
    c.learning_rate = optim.learning_rate;
    c.momentum = optim.momentum;
    c.batch_size = optim.batch_size;
    c.objective = objective.objective();
    c.policy = model.spec();
    if model.context_dim == 0 {
        return Err(CliError::Usage("context dimension must be >= 1".into()));
    }
    c.validate().map_err(|e| CliError::Usage(e.to_string()))?;
    Ok(c)
}

/// `r,g,b` or `#rrggbb`.
pub fn parse_color(s: &str) -> Result<Rgb, String> {
    let bad = || format!("colour `{s}` is neither r,g,b nor #rrggbb");
    if let Some(hex) = s.strip_prefix('#') {
        if hex.len() != 6 || !hex.is_ascii() {
            return Err(bad());
        }
        let mut c = [0u8; 3];
        for (i, v) in c.iter_mut().enumerate() {
            *v = u8::from_str_radix(&hex[2 * i..2 * i + 2], 16).map_err(|_| bad())?;
        }
        return Ok(c);
    }
    let parts: Vec<&str> = s.split(',').map(str::trim).collect();
    if parts.len() != 3 {
        return Err(bad());
    }
    let mut c = [0u8; 3];
    for (v, p) in c.iter_mut().zip(parts) {
        *v = p.parse().map_err(|_| bad())?;
    }
    Ok(c)
}

/// `x0,y0,x1,y1`, half-open.
pub fn parse_box(s: &str) -> Result<[u32; 4], String> {
    let v: Vec<u32> = s
        .split(',')
        .map(|p| p.trim().parse::<u32>())
        .collect::<Result<_, _>>()
        .map_err(|_| format!("box `{s}` is not x0,y0,x1,y1"))?;
    let b: [u32; 4] = v.try_into().map_err(|_| format!("box `{s}` needs four numbers"))?;
    BoundingBox::try_from(b).map_err(|e| e.to_string())?;
    Ok(b)
}

pub fn required<T: Clone>(value: &Option<T>, flag: &str) -> Result<T, CliError> {
    value
        .clone()
        .ok_or_else(|| CliError::Usage(format!("missing required --{flag}")))
}
