//! A small differentiable policy standing in for a vision-language model.
//!
//! The policy maps a feature vector `[visibility, context...]` to a
//! log-likelihood proxy. Visibility is the unmasked share of the masked
//! object(s) in the conditioning image; context features are a fixed random
//! embedding of the response, seeded from the sample id. Both responses of a
//! text preference pair are conditioned on the original image, so they share
//! visibility 1 and differ only in context.

use std::fs;
use std::path::Path;

use rand::seq::SliceRandom;
use rand::Rng;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::listgen::ListRecord;
use crate::losses::{total_loss, LossError, Objective, PolicyLogProbs};
use crate::masking::{visibility, MaskError};
use crate::seed::{derive_seed, rng_for};
use crate::types::{Hyperparams, LossBreakdown, TypeError};

pub const DEFAULT_CONTEXT_DIM: usize = 8;
pub const DEFAULT_HIDDEN: usize = 16;
pub const CHECKPOINT_FORMAT: &str = "lpoi-policy-v1";

#[derive(Debug, Error)]
pub enum SurrogateError {
    #[error("dimension mismatch: policy expects {expected} inputs, got {got}")]
    DimensionMismatch { expected: usize, got: usize },
    #[error("policy has {got} parameters, {kind:?} with input {input_dim} needs {expected}")]
    ParameterCount {
        kind: PolicyKind,
        input_dim: usize,
        expected: usize,
        got: usize,
    },
    #[error("non-finite parameter at index {0}")]
    NonFiniteParameter(usize),
    #[error("invalid feature vector: {0}")]
    InvalidFeature(String),
    #[error("reference policy architecture differs from the trained policy")]
    ArchitectureMismatch,
    #[error("empty batch")]
    EmptyBatch,
    #[error("invalid trainer config: {0}")]
    InvalidConfig(String),
    #[error("training diverged in epoch {epoch}: loss is not finite")]
    Diverged { epoch: usize },
    #[error(transparent)]
    Loss(#[from] LossError),
    #[error(transparent)]
    Mask(#[from] MaskError),
    #[error(transparent)]
    Type(#[from] TypeError),
    #[error("{path}: {message}")]
    Checkpoint { path: String, message: String },
}

/// Policy input: visibility followed by `d` context features.
#[derive(Debug, Clone, PartialEq)]
pub struct FeatureVector {
    values: Vec<f64>,
}

impl FeatureVector {
    pub fn new(visibility: f64, context: &[f64]) -> Result<Self, SurrogateError> {
        if !(0.0..=1.0).contains(&visibility) {
            return Err(SurrogateError::InvalidFeature(format!(
                "visibility {visibility} outside [0, 1]"
            )));
        }
        if let Some(c) = context.iter().find(|c| !(-1.0..=1.0).contains(*c)) {
            return Err(SurrogateError::InvalidFeature(format!(
                "context value {c} outside [-1, 1]"
            )));
        }
        let mut values = Vec::with_capacity(context.len() + 1);
        values.push(visibility);
        values.extend_from_slice(context);
        Ok(Self { values })
    }

    pub fn visibility(&self) -> f64 {
        self.values[0]
    }

    pub fn context(&self) -> &[f64] {
        &self.values[1..]
    }

    pub fn as_slice(&self) -> &[f64] {
        &self.values
    }

    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }
}

/// Deterministic context embedding in `[-1, 1]^dim` for an arbitrary key.
pub fn context_features(key: &str, dim: usize) -> Vec<f64> {
    let mut rng = rng_for(0, key);
    (0..dim).map(|_| rng.random_range(-1.0..=1.0)).collect()
}

/// Which response of a preference pair a feature vector describes.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Response {
    Chosen,
    Rejected,
}

fn response_key(sample_id: &str, response: Response) -> String {
    let tag = match response {
        Response::Chosen => "chosen",
        Response::Rejected => "rejected",
    };
    format!("{sample_id}\u{1f}{tag}")
}

/// Features of the chosen response conditioned on list image `k` (1-based).
pub fn featurize(record: &ListRecord, k: usize, context_dim: usize) -> Result<FeatureVector, SurrogateError> {
    featurize_response(record, k, Response::Chosen, context_dim)
}

pub fn featurize_response(
    record: &ListRecord,
    k: usize,
    response: Response,
    context_dim: usize,
) -> Result<FeatureVector, SurrogateError> {
    let image = &record.ranked.images[0];
    let vis = visibility(&record.ranked.plan, k, image.width(), image.height())?;
    FeatureVector::new(
        vis,
        &context_features(&response_key(&record.sample_id, response), context_dim),
    )
}

/// All feature vectors one sample contributes to the objective.
#[derive(Debug, Clone, PartialEq)]
pub struct PreferenceFeatures {
    /// Chosen response on the original image.
    pub chosen: FeatureVector,
    /// Rejected response on the original image.
    pub rejected: FeatureVector,
    /// Chosen response on each list image, best first.
    pub list: Vec<FeatureVector>,
}

impl PreferenceFeatures {
    pub fn from_record(record: &ListRecord, context_dim: usize) -> Result<Self, SurrogateError> {
        let chosen_ctx = context_features(&response_key(&record.sample_id, Response::Chosen), context_dim);
        let rejected_ctx = context_features(&response_key(&record.sample_id, Response::Rejected), context_dim);
        let image = &record.ranked.images[0];
        let list = (1..=record.ranked.plan.list_size)
            .map(|k| {
                let vis = visibility(&record.ranked.plan, k, image.width(), image.height())?;
                FeatureVector::new(vis, &chosen_ctx)
            })
            .collect::<Result<Vec<_>, SurrogateError>>()?;
        Ok(Self {
            chosen: FeatureVector::new(1.0, &chosen_ctx)?,
            rejected: FeatureVector::new(1.0, &rejected_ctx)?,
            list,
        })
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "lowercase")]
pub enum PolicyKind {
    /// `w·x + b`
    Linear,
    /// `v·tanh(W x + c) + b`
    Mlp1 { hidden: usize },
}

impl PolicyKind {
    pub fn param_count(self, input_dim: usize) -> usize {
        match self {
            PolicyKind::Linear => input_dim + 1,
            PolicyKind::Mlp1 { hidden } => input_dim * hidden + 2 * hidden + 1,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ToyPolicy {
    kind: PolicyKind,
    input_dim: usize,
    params: Vec<f64>,
}

impl ToyPolicy {
    pub fn from_params(kind: PolicyKind, input_dim: usize, params: Vec<f64>) -> Result<Self, SurrogateError> {
        let expected = kind.param_count(input_dim);
        if params.len() != expected {
            return Err(SurrogateError::ParameterCount {
                kind,
                input_dim,
                expected,
                got: params.len(),
            });
        }
        if let Some(i) = params.iter().position(|p| !p.is_finite()) {
            return Err(SurrogateError::NonFiniteParameter(i));
        }
        Ok(Self {
            kind,
            input_dim,
            params,
        })
    }

    pub fn zeros(kind: PolicyKind, context_dim: usize) -> Self {
        let input_dim = context_dim + 1;
        Self {
            kind,
            input_dim,
            params: vec![0.0; kind.param_count(input_dim)],
        }
    }

    /// Parameters drawn uniformly from `[-scale, scale]`.
    pub fn random(kind: PolicyKind, context_dim: usize, seed: u64, scale: f64) -> Self {
        let mut p = Self::zeros(kind, context_dim);
        let mut rng = rng_for(seed, "policy-init");
        for v in &mut p.params {
            *v = scale * rng.random_range(-1.0..=1.0);
        }
        p
    }

    pub fn kind(&self) -> PolicyKind {
        self.kind
    }

    pub fn input_dim(&self) -> usize {
        self.input_dim
    }

    pub fn params(&self) -> &[f64] {
        &self.params
    }

    pub fn params_mut(&mut self) -> &mut [f64] {
        &mut self.params
    }

    pub fn same_architecture(&self, other: &ToyPolicy) -> bool {
        self.kind == other.kind && self.input_dim == other.input_dim
    }

    fn check_input(&self, x: &[f64]) -> Result<(), SurrogateError> {
        if x.len() == self.input_dim {
            Ok(())
        } else {
            Err(SurrogateError::DimensionMismatch {
                expected: self.input_dim,
                got: x.len(),
            })
        }
    }

    pub fn forward(&self, f: &FeatureVector) -> Result<f64, SurrogateError> {
        self.check_input(f.as_slice())?;
        Ok(self.eval(f.as_slice()))
    }

    fn eval(&self, x: &[f64]) -> f64 {
        let d = self.input_dim;
        match self.kind {
            PolicyKind::Linear => dot(&self.params[..d], x) + self.params[d],
            PolicyKind::Mlp1 { hidden } => {
                let (w, rest) = self.params.split_at(d * hidden);
                let (c, rest) = rest.split_at(hidden);
                let (v, b) = rest.split_at(hidden);
                let mut out = b[0];
                for j in 0..hidden {
                    out += v[j] * (dot(&w[j * d..(j + 1) * d], x) + c[j]).tanh();
                }
                out
            }
        }
    }

    /// Adds `scale · ∂forward(x)/∂θ` into `grad`.
    fn accumulate_grad(&self, x: &[f64], scale: f64, grad: &mut [f64]) {
        let d = self.input_dim;
        match self.kind {
            PolicyKind::Linear => {
                for (g, xi) in grad[..d].iter_mut().zip(x) {
                    *g += scale * xi;
                }
                grad[d] += scale;
            }
            PolicyKind::Mlp1 { hidden } => {
                let (w, rest) = self.params.split_at(d * hidden);
                let (c, rest) = rest.split_at(hidden);
                let v = &rest[..hidden];
                let (gw, grest) = grad.split_at_mut(d * hidden);
                let (gc, grest) = grest.split_at_mut(hidden);
                let (gv, gb) = grest.split_at_mut(hidden);
                for j in 0..hidden {
                    let h = (dot(&w[j * d..(j + 1) * d], x) + c[j]).tanh();
                    gv[j] += scale * h;
                    let back = scale * v[j] * (1.0 - h * h);
                    gc[j] += back;
                    for (g, xi) in gw[j * d..(j + 1) * d].iter_mut().zip(x) {
                        *g += back * xi;
                    }
                }
                gb[0] += scale;
            }
        }
    }

    pub fn save(&self, path: &Path) -> Result<(), SurrogateError> {
        let ckpt = Checkpoint {
            format: CHECKPOINT_FORMAT.into(),
            policy: self.clone(),
        };
        let text = serde_json::to_string_pretty(&ckpt).expect("policy serializes");
        fs::write(path, text + "\n").map_err(|e| SurrogateError::Checkpoint {
            path: path.display().to_string(),
            message: e.to_string(),
        })
    }

    pub fn load(path: &Path) -> Result<Self, SurrogateError> {
        let err = |message: String| SurrogateError::Checkpoint {
            path: path.display().to_string(),
            message,
        };
        let text = fs::read_to_string(path).map_err(|e| err(e.to_string()))?;
        let ckpt: Checkpoint = serde_json::from_str(&text).map_err(|e| err(e.to_string()))?;
        if ckpt.format != CHECKPOINT_FORMAT {
            return Err(err(format!("unsupported checkpoint format `{}`", ckpt.format)));
        }
        let p = ckpt.policy;
        Self::from_params(p.kind, p.input_dim, p.params)
    }
}

#[derive(Serialize, Deserialize)]
struct Checkpoint {
    format: String,
    #[serde(flatten)]
    policy: ToyPolicy,
}

fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

fn log_probs(policy: &ToyPolicy, reference: &ToyPolicy, f: &FeatureVector) -> Result<PolicyLogProbs, SurrogateError> {
    Ok(PolicyLogProbs::new(policy.forward(f)?, reference.forward(f)?))
}

fn check_pair(policy: &ToyPolicy, reference: &ToyPolicy, batch: &[PreferenceFeatures]) -> Result<(), SurrogateError> {
    if !policy.same_architecture(reference) {
        return Err(SurrogateError::ArchitectureMismatch);
    }
    if batch.is_empty() {
        return Err(SurrogateError::EmptyBatch);
    }
    Ok(())
}

/// Mean loss breakdown and its gradient with respect to the policy parameters.
///
/// The reference only enters through the scores and receives no gradient.
pub fn grad_total(
    policy: &ToyPolicy,
    reference: &ToyPolicy,
    batch: &[PreferenceFeatures],
    hyper: &Hyperparams,
    objective: Objective,
) -> Result<(Vec<f64>, LossBreakdown), SurrogateError> {
    check_pair(policy, reference, batch)?;
    let n = batch.len() as f64;
    let mut grad = vec![0.0; policy.params.len()];
    let mut parts = Vec::with_capacity(batch.len());
    for ex in batch {
        let list = ex
            .list
            .iter()
            .map(|f| log_probs(policy, reference, f))
            .collect::<Result<Vec<_>, _>>()?;
        let t = total_loss(
            hyper,
            objective,
            log_probs(policy, reference, &ex.chosen)?,
            log_probs(policy, reference, &ex.rejected)?,
            &list,
        )?;
        policy.accumulate_grad(ex.chosen.as_slice(), t.grad_chosen_logp / n, &mut grad);
        policy.accumulate_grad(ex.rejected.as_slice(), t.grad_rejected_logp / n, &mut grad);
        for (f, g) in ex.list.iter().zip(&t.grad_list_logp) {
            policy.accumulate_grad(f.as_slice(), g / n, &mut grad);
        }
        parts.push(t.breakdown);
    }
    Ok((grad, LossBreakdown::mean(&parts)))
}

/// Mean loss breakdown without gradients.
pub fn evaluate_loss(
    policy: &ToyPolicy,
    reference: &ToyPolicy,
    batch: &[PreferenceFeatures],
    hyper: &Hyperparams,
    objective: Objective,
) -> Result<LossBreakdown, SurrogateError> {
    check_pair(policy, reference, batch)?;
    let parts = batch
        .iter()
        .map(|ex| {
            let list = ex
                .list
                .iter()
                .map(|f| log_probs(policy, reference, f))
                .collect::<Result<Vec<_>, _>>()?;
            let t = total_loss(
                hyper,
                objective,
                log_probs(policy, reference, &ex.chosen)?,
                log_probs(policy, reference, &ex.rejected)?,
                &list,
            )?;
            Ok(t.breakdown)
        })
        .collect::<Result<Vec<_>, SurrogateError>>()?;
    Ok(LossBreakdown::mean(&parts))
}

/// Largest relative disagreement between the analytic gradient and central
/// finite differences with step `h`, over all parameters.
///
/// Per parameter: `|g_fd − g_an| / max(1e-12, |g_fd| + |g_an|)`.
pub fn finite_diff_check(
    policy: &ToyPolicy,
    reference: &ToyPolicy,
    batch: &[PreferenceFeatures],
    hyper: &Hyperparams,
    objective: Objective,
    h: f64,
) -> Result<f64, SurrogateError> {
    let (analytic, _) = grad_total(policy, reference, batch, hyper, objective)?;
    let mut probe = policy.clone();
    let mut worst: f64 = 0.0;
    for (i, &an) in analytic.iter().enumerate() {
        let base = policy.params[i];
        probe.params[i] = base + h;
        let plus = evaluate_loss(&probe, reference, batch, hyper, objective)?.total;
        probe.params[i] = base - h;
        let minus = evaluate_loss(&probe, reference, batch, hyper, objective)?.total;
        probe.params[i] = base;
        let fd = (plus - minus) / (2.0 * h);
        let rel = (fd - an).abs() / (fd.abs() + an.abs()).max(1e-12);
        worst = worst.max(rel);
    }
    Ok(worst)
}

/// List scores `S_1 … S_L` of one sample.
pub fn list_scores(
    policy: &ToyPolicy,
    reference: &ToyPolicy,
    features: &PreferenceFeatures,
    beta: f64,
) -> Result<Vec<f64>, SurrogateError> {
    features
        .list
        .iter()
        .map(|f| Ok(beta * (policy.forward(f)? - reference.forward(f)?)))
        .collect()
}

/// Share of samples whose list scores are strictly decreasing in `k`.
pub fn ordering_accuracy(
    policy: &ToyPolicy,
    reference: &ToyPolicy,
    batch: &[PreferenceFeatures],
    beta: f64,
) -> Result<f64, SurrogateError> {
    if batch.is_empty() {
        return Ok(0.0);
    }
    let mut ordered = 0usize;
    for ex in batch {
        let s = list_scores(policy, reference, ex, beta)?;
        if s.windows(2).all(|w| w[0] > w[1]) {
            ordered += 1;
        }
    }
    Ok(ordered as f64 / batch.len() as f64)
}

/// Architecture and initialization of the trained policy.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PolicySpec {
    pub kind: PolicyKind,
    pub context_dim: usize,
    /// Half-width of the uniform initialization.
    pub init_scale: f64,
}

impl Default for PolicySpec {
    fn default() -> Self {
        Self {
            kind: PolicyKind::Linear,
            context_dim: DEFAULT_CONTEXT_DIM,
            init_scale: 0.3,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrainerConfig {
    pub learning_rate: f64,
    pub momentum: f64,
    pub epochs: usize,
    pub batch_size: usize,
    pub seed: u64,
    pub hyper: Hyperparams,
    pub objective: Objective,
    pub policy: PolicySpec,
}

impl TrainerConfig {
    pub fn new(hyper: Hyperparams, epochs: usize, seed: u64) -> Self {
        Self {
            learning_rate: 0.05,
            momentum: 0.9,
            epochs,
            batch_size: 16,
            seed,
            hyper,
            objective: Objective::FULL,
            policy: PolicySpec::default(),
        }
    }

    pub fn validate(&self) -> Result<(), SurrogateError> {
        let bad = |m: String| Err(SurrogateError::InvalidConfig(m));
        if !(self.learning_rate.is_finite() && self.learning_rate > 0.0) {
            return bad(format!("learning rate must be > 0, got {}", self.learning_rate));
        }
        if !(0.0..1.0).contains(&self.momentum) {
            return bad(format!("momentum must be in [0, 1), got {}", self.momentum));
        }
        if self.epochs == 0 {
            return bad("epochs must be >= 1".into());
        }
        if self.batch_size == 0 {
            return bad("batch size must be >= 1".into());
        }
        if !(self.policy.init_scale.is_finite() && self.policy.init_scale >= 0.0) {
            return bad(format!("init scale must be >= 0, got {}", self.policy.init_scale));
        }
        if let PolicyKind::Mlp1 { hidden: 0 } = self.policy.kind {
            return bad("mlp1 needs at least one hidden unit".into());
        }
        self.hyper.validate()?;
        Ok(())
    }

    /// The policy training starts from, which also serves as the frozen reference.
    pub fn initial_policy(&self) -> ToyPolicy {
        ToyPolicy::random(
            self.policy.kind,
            self.policy.context_dim,
            derive_seed(self.seed, "init"),
            self.policy.init_scale,
        )
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct EpochMetrics {
    pub epoch: usize,
    pub dpo: f64,
    pub anchor: f64,
    pub listwise: f64,
    pub total: f64,
    pub ordering_accuracy: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct TrainOutcome {
    pub policy: ToyPolicy,
    pub reference: ToyPolicy,
    pub history: Vec<EpochMetrics>,
}

/// Mini-batch SGD with momentum on the joint objective.
///
/// The reference is the initial policy, frozen. Each epoch reshuffles the
/// data from a stream seeded by `config.seed`; metrics are measured over the
/// full training set after every epoch.
pub fn train(config: &TrainerConfig, data: &[PreferenceFeatures]) -> Result<TrainOutcome, SurrogateError> {
    config.validate()?;
    if data.is_empty() {
        return Err(SurrogateError::EmptyBatch);
    }
    let reference = config.initial_policy();
    let mut policy = reference.clone();
    let mut velocity = vec![0.0; policy.params.len()];
    let mut order: Vec<usize> = (0..data.len()).collect();
    let mut rng = rng_for(config.seed, "shuffle");
    let mut history = Vec::with_capacity(config.epochs);
    let mut batch = Vec::with_capacity(config.batch_size);

    for epoch in 1..=config.epochs {
        order.shuffle(&mut rng);
        for chunk in order.chunks(config.batch_size) {
            batch.clear();
            batch.extend(chunk.iter().map(|&i| data[i].clone()));
            let (grad, breakdown) = grad_total(&policy, &reference, &batch, &config.hyper, config.objective)
                .map_err(|e| diverged_or(e, epoch))?;
            if !breakdown.is_finite() || grad.iter().any(|g| !g.is_finite()) {
                return Err(SurrogateError::Diverged { epoch });
            }
            for ((p, v), g) in policy.params.iter_mut().zip(&mut velocity).zip(&grad) {
                *v = config.momentum * *v - config.learning_rate * g;
                *p += *v;
            }
            if policy.params.iter().any(|p| !p.is_finite()) {
                return Err(SurrogateError::Diverged { epoch });
            }
        }
        let loss = evaluate_loss(&policy, &reference, data, &config.hyper, config.objective)
            .map_err(|e| diverged_or(e, epoch))?;
        if !loss.is_finite() {
            return Err(SurrogateError::Diverged { epoch });
        }
        history.push(EpochMetrics {
            epoch,
            dpo: loss.dpo,
            anchor: loss.anchor,
            listwise: loss.listwise,
            total: loss.total,
            ordering_accuracy: ordering_accuracy(&policy, &reference, data, config.hyper.beta)?,
        });
        log::debug!("epoch {epoch}: total {:.6}", loss.total);
    }
    Ok(TrainOutcome {
        policy,
        reference,
        history,
    })
}

fn diverged_or(e: SurrogateError, epoch: usize) -> SurrogateError {
    match e {
        SurrogateError::Loss(LossError::NonFinite(_)) => SurrogateError::Diverged { epoch },
        other => other,
    }
}

/// Writes the per-epoch history as CSV.
pub fn write_metrics_csv(path: &Path, history: &[EpochMetrics]) -> Result<(), csv::Error> {
    let mut w = csv::Writer::from_path(path)?;
    for m in history {
        w.serialize(m)?;
    }
    w.flush()?;
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;

    fn features(vis: f64, d: usize, key: &str) -> FeatureVector {
        FeatureVector::new(vis, &context_features(key, d)).unwrap()
    }

    #[test]
    fn feature_bounds() {
        assert!(FeatureVector::new(1.5, &[]).is_err());
        assert!(FeatureVector::new(0.5, &[2.0]).is_err());
        let f = features(0.25, 8, "x");
        assert_eq!(f.len(), 9);
        assert!(f.context().iter().all(|c| (-1.0..=1.0).contains(c)));
        assert_eq!(context_features("x", 8), context_features("x", 8));
    }

    #[test]
    fn zero_policy_outputs_zero() {
        for kind in [PolicyKind::Linear, PolicyKind::Mlp1 { hidden: 4 }] {
            let p = ToyPolicy::zeros(kind, 8);
            assert_eq!(p.forward(&features(0.3, 8, "a")).unwrap(), 0.0);
        }
    }

    #[test]
    fn linear_projection() {
        let mut params = vec![0.0; 10];
        params[0] = 1.0;
        let p = ToyPolicy::from_params(PolicyKind::Linear, 9, params).unwrap();
        assert_eq!(p.forward(&features(0.7, 8, "a")).unwrap(), 0.7);
    }

    #[test]
    fn dimension_checks() {
        let p = ToyPolicy::zeros(PolicyKind::Linear, 8);
        assert!(matches!(
            p.forward(&features(0.7, 3, "a")),
            Err(SurrogateError::DimensionMismatch { expected: 9, got: 4 })
        ));
        assert!(ToyPolicy::from_params(PolicyKind::Mlp1 { hidden: 2 }, 3, vec![0.0; 5]).is_err());
        assert_eq!(PolicyKind::Mlp1 { hidden: 16 }.param_count(9), 9 * 16 + 16 + 16 + 1);
        assert!(ToyPolicy::from_params(PolicyKind::Linear, 1, vec![0.0, f64::NAN]).is_err());
    }

    #[test]
    fn checkpoint_round_trip_is_exact() {
        let dir = tempfile::tempdir().unwrap();
        let p = ToyPolicy::random(PolicyKind::Mlp1 { hidden: 3 }, 4, 9, 0.7);
        let path = dir.path().join("p.json");
        p.save(&path).unwrap();
        assert_eq!(ToyPolicy::load(&path).unwrap(), p);
        let text = fs::read_to_string(&path).unwrap();
        fs::write(&path, text.replace(CHECKPOINT_FORMAT, "lpoi-policy-v0")).unwrap();
        assert!(ToyPolicy::load(&path).is_err());
    }

    #[test]
    fn config_bounds() {
        let h = Hyperparams::new(0.1, 0.0, 5).unwrap();
        let mut c = TrainerConfig::new(h, 1, 0);
        assert!(c.validate().is_ok());
        c.epochs = 0;
        assert!(c.validate().is_err());
        c.epochs = 1;
        c.momentum = 1.0;
        assert!(c.validate().is_err());
        c.momentum = 0.5;
        c.learning_rate = 0.0;
        assert!(c.validate().is_err());
    }
}
