//! Synthetic scenes and CHAIR-style object hallucination metrics.
//!
//! Scenes are a few solid rectangles on a grey background, each carrying a
//! distinct label from a small vocabulary. Detections are the ground truth.
//! A toy captioner asks the policy about every vocabulary label and mentions
//! those that score above a threshold, so hallucination and coverage can be
//! counted exactly.

use std::collections::{BTreeMap, BTreeSet, HashMap};
use std::path::Path;

use rand::seq::{IndexedRandom, SliceRandom};
use rand::Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::listgen::{build_dataset, AlwaysHallucinating, BuildConfig, DetectedObject, ListRecord};
use crate::losses::Objective;
use crate::seed::{fnv1a64, rng_for};
use crate::surrogate::{
    context_features, ordering_accuracy, train, FeatureVector, PreferenceFeatures, SurrogateError, ToyPolicy,
    TrainerConfig,
};
use crate::types::{validate_sample, BoundingBox, Image, PreferenceSample, Rgb, TypeError, ValidSample};

pub const DEFAULT_VOCAB: [&str; 12] = [
    "apple", "ball", "bench", "bicycle", "bird", "bottle", "bus", "car", "chair", "cup", "dog", "umbrella",
];
pub const SCENE_SIZE: u32 = 64;
pub const MIN_SIDE: u32 = 8;
pub const MAX_SIDE: u32 = 24;
pub const MAX_OBJECTS: usize = 4;
pub const BACKGROUND: Rgb = [200, 200, 200];
pub const DEFAULT_LIST_SIZES: [usize; 3] = [3, 4, 5];

const PLACEMENT_ATTEMPTS: usize = 100;

#[derive(Debug, Error)]
pub enum SynthError {
    #[error("scene count must be at least 1")]
    NoScenes,
    #[error("vocabulary must contain at least one distinct, non-empty label")]
    EmptyVocabulary,
    #[error("caption refers to unknown scene `{0}`")]
    UnknownScene(String),
    #[error("invalid benchmark config: {0}")]
    InvalidConfig(String),
    #[error("every synthetic sample was skipped while building lists")]
    NoRecords,
    #[error(transparent)]
    Surrogate(#[from] SurrogateError),
    #[error(transparent)]
    Type(#[from] TypeError),
}

pub fn default_vocab() -> Vec<String> {
    DEFAULT_VOCAB.iter().map(|s| s.to_string()).collect()
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct SceneObject {
    pub label: String,
    #[serde(rename = "box")]
    pub bbox: BoundingBox,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Scene {
    pub id: String,
    pub image: Image,
    pub objects: Vec<SceneObject>,
}

impl Scene {
    pub fn has_label(&self, label: &str) -> bool {
        self.objects.iter().any(|o| o.label == label)
    }

    pub fn labels(&self) -> BTreeSet<&str> {
        self.objects.iter().map(|o| o.label.as_str()).collect()
    }

    pub fn detections(&self) -> Vec<DetectedObject> {
        self.objects
            .iter()
            .map(|o| DetectedObject {
                label: o.label.clone(),
                bbox: o.bbox,
                confidence: 1.0,
            })
            .collect()
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct SceneSet {
    pub vocab: Vec<String>,
    pub scenes: Vec<Scene>,
}

impl SceneSet {
    /// Ground truth as detector output, confidence 1.
    pub fn detections(&self) -> BTreeMap<String, Vec<DetectedObject>> {
        self.scenes.iter().map(|s| (s.id.clone(), s.detections())).collect()
    }
}

/// A label-specific colour, never the background, black or pure red.
fn label_color(label: &str) -> Rgb {
    let h = fnv1a64(label.as_bytes());
    [
        40 + (h & 0x7f) as u8,
        40 + ((h >> 8) & 0x7f) as u8,
        40 + ((h >> 16) & 0x7f) as u8,
    ]
}

/// Generates `n` scenes with 1 to 4 disjoint, distinctly labelled rectangles.
pub fn gen_scenes(n: usize, seed: u64, vocab: &[String]) -> Result<SceneSet, SynthError> {
    if n == 0 {
        return Err(SynthError::NoScenes);
    }
    let mut vocab: Vec<String> = vocab
        .iter()
        .map(|v| v.trim().to_lowercase())
        .filter(|v| !v.is_empty())
        .collect();
    vocab.sort();
    vocab.dedup();
    if vocab.is_empty() {
        return Err(SynthError::EmptyVocabulary);
    }
    let mut rng = rng_for(seed, "scenes");
    let mut scenes = Vec::with_capacity(n);
    for i in 0..n {
        let count = rng.random_range(1..=MAX_OBJECTS.min(vocab.len()));
        let labels: Vec<&String> = vocab.choose_multiple(&mut rng, count).collect();
        let mut image = Image::filled(SCENE_SIZE, SCENE_SIZE, BACKGROUND);
        let mut objects: Vec<SceneObject> = Vec::with_capacity(count);
        for label in labels {
            for _ in 0..PLACEMENT_ATTEMPTS {
                let w = rng.random_range(MIN_SIDE..=MAX_SIDE);
                let h = rng.random_range(MIN_SIDE..=MAX_SIDE);
                let x0 = rng.random_range(0..=SCENE_SIZE - w);
                let y0 = rng.random_range(0..=SCENE_SIZE - h);
                let bbox = BoundingBox::new(x0, y0, x0 + w, y0 + h)?;
                if objects.iter().all(|o| !o.bbox.intersects(&bbox)) {
                    image.fill_rect(&bbox, label_color(label));
                    objects.push(SceneObject {
                        label: label.clone(),
                        bbox,
                    });
                    break;
                }
            }
        }
        scenes.push(Scene {
            id: format!("scene-{i:05}"),
            image,
            objects,
        });
    }
    Ok(SceneSet { vocab, scenes })
}

/// Text preference pairs for each scene: the chosen answer names the scene's
/// objects, the rejected one names an object that is not there.
pub fn preference_samples(set: &SceneSet, seed: u64) -> Result<Vec<ValidSample>, SynthError> {
    set.scenes
        .iter()
        .map(|scene| {
            let mut rng = rng_for(seed, &scene.id);
            let mut chosen = format!("There is a {} in the picture.", scene.objects[0].label);
            for o in &scene.objects[1..] {
                chosen.push_str(&format!(" I can also see a {}.", o.label));
            }
            let absent: Vec<&String> = set.vocab.iter().filter(|l| !scene.has_label(l)).collect();
            let rejected = match absent.choose(&mut rng) {
                Some(l) => format!("There is a {l} in the picture."),
                None => "The picture is empty.".to_string(),
            };
            let sample = PreferenceSample {
                id: scene.id.clone(),
                image: format!("{}.png", scene.id).into(),
                question: "What objects are in the picture?".into(),
                chosen,
                rejected,
            };
            Ok(validate_sample(sample, scene.image.clone())?)
        })
        .collect()
}

/// Listwise records for every scene, with the hard negative always accepted.
pub fn build_lists(set: &SceneSet, list_size: usize, seed: u64, workers: usize) -> Result<Vec<ListRecord>, SynthError> {
    let samples = preference_samples(set, seed)?;
    let config = BuildConfig {
        list_size,
        ..BuildConfig::default()
    };
    let report = build_dataset(
        &samples,
        &set.detections(),
        &AlwaysHallucinating,
        &config,
        seed,
        workers,
    );
    for w in &report.warnings {
        log::warn!("{}: {}", w.id, w.message);
    }
    Ok(report.records)
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct CaptionRecord {
    pub scene_id: String,
    pub mentions: Vec<String>,
}

/// Caption options. Mentions are de-duplicated unless `allow_repeats` is set.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Captioner {
    pub threshold: f64,
    pub allow_repeats: bool,
}

impl Default for Captioner {
    fn default() -> Self {
        Self {
            threshold: 0.0,
            allow_repeats: false,
        }
    }
}

/// Features the captioner feeds the policy when asking about `label`.
pub fn label_features(scene: &Scene, label: &str, context_dim: usize) -> Result<FeatureVector, SurrogateError> {
    let visibility = if scene.has_label(label) { 1.0 } else { 0.0 };
    let ctx = context_features(&format!("{}\u{1f}{label}", scene.id), context_dim);
    FeatureVector::new(visibility, &ctx)
}

impl Captioner {
    pub fn caption(
        &self,
        policy: &ToyPolicy,
        scene: &Scene,
        vocab: &[String],
    ) -> Result<CaptionRecord, SurrogateError> {
        let context_dim = policy.input_dim().saturating_sub(1);
        let mut mentions = Vec::new();
        for label in vocab {
            if !self.allow_repeats && mentions.contains(label) {
                continue;
            }
            if policy.forward(&label_features(scene, label, context_dim)?)? > self.threshold {
                mentions.push(label.clone());
            }
        }
        Ok(CaptionRecord {
            scene_id: scene.id.clone(),
            mentions,
        })
    }
}

/// Captions one scene with the default captioner.
pub fn caption(policy: &ToyPolicy, scene: &Scene, vocab: &[String]) -> Result<CaptionRecord, SurrogateError> {
    Captioner::default().caption(policy, scene, vocab)
}

#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct ChairMetrics {
    pub chair_i: f64,
    pub chair_s: f64,
    pub coverage: f64,
}

fn ratio(num: usize, den: usize) -> f64 {
    if den == 0 {
        0.0
    } else {
        num as f64 / den as f64
    }
}

/// CHAIR_i, CHAIR_s and coverage. Empty denominators give 0.
pub fn chair_metrics(captions: &[CaptionRecord], scenes: &[Scene]) -> Result<ChairMetrics, SynthError> {
    let by_id: HashMap<&str, &Scene> = scenes.iter().map(|s| (s.id.as_str(), s)).collect();
    let (mut mentions, mut hallucinated, mut bad_captions) = (0, 0, 0);
    let (mut truth, mut covered) = (0, 0);
    for c in captions {
        let scene = by_id
            .get(c.scene_id.as_str())
            .ok_or_else(|| SynthError::UnknownScene(c.scene_id.clone()))?;
        let absent = c.mentions.iter().filter(|m| !scene.has_label(m)).count();
        mentions += c.mentions.len();
        hallucinated += absent;
        if absent > 0 {
            bad_captions += 1;
        }
        let labels = scene.labels();
        truth += labels.len();
        covered += labels.iter().filter(|l| c.mentions.iter().any(|m| m == *l)).count();
    }
    Ok(ChairMetrics {
        chair_i: ratio(hallucinated, mentions),
        chair_s: ratio(bad_captions, captions.len()),
        coverage: ratio(covered, truth),
    })
}

/// One benchmark run: generate scenes, build lists, train, evaluate on a held-out split.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BenchConfig {
    pub scenes: usize,
    pub holdout: f64,
    /// Seeds scene generation, list building and the split. The trainer has its own seed.
    pub data_seed: u64,
    pub trainer: TrainerConfig,
    pub workers: usize,
}

impl BenchConfig {
    pub fn validate(&self) -> Result<(), SynthError> {
        if self.scenes < 2 {
            return Err(SynthError::InvalidConfig("need at least 2 scenes".into()));
        }
        if !(self.holdout > 0.0 && self.holdout < 1.0) {
            return Err(SynthError::InvalidConfig(format!(
                "holdout must be in (0, 1), got {}",
                self.holdout
            )));
        }
        self.trainer.validate()?;
        Ok(())
    }

    /// Benchmark for `seed`: data and trainer both seeded by it.
    pub fn with_seed(&self, seed: u64) -> Self {
        let mut c = self.clone();
        c.data_seed = seed;
        c.trainer.seed = seed;
        c
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct BenchOutcome {
    pub chair: ChairMetrics,
    /// Measured on the held-out lists.
    pub ordering_accuracy: f64,
    pub final_total_loss: f64,
    pub train_size: usize,
    pub test_size: usize,
    pub policy: ToyPolicy,
    pub history: Vec<crate::surrogate::EpochMetrics>,
}

/// Prepared data shared by runs that differ only in the objective.
#[derive(Debug, Clone)]
pub struct BenchData {
    pub set: SceneSet,
    pub train: Vec<PreferenceFeatures>,
    pub test: Vec<PreferenceFeatures>,
    pub test_scenes: Vec<Scene>,
}

pub fn prepare(config: &BenchConfig) -> Result<BenchData, SynthError> {
    config.validate()?;
    let list_size = config.trainer.hyper.list_size;
    let set = gen_scenes(config.scenes, config.data_seed, &default_vocab())?;
    let records = build_lists(&set, list_size, config.data_seed, config.workers)?;
    if records.is_empty() {
        return Err(SynthError::NoRecords);
    }
    let context_dim = config.trainer.policy.context_dim;
    let mut order: Vec<usize> = (0..records.len()).collect();
    order.shuffle(&mut rng_for(config.data_seed, "split"));
    let n_test = ((records.len() as f64 * config.holdout).round() as usize).clamp(1, records.len() - 1);
    let (test_idx, train_idx) = order.split_at(n_test);
    let features = |idx: &[usize]| {
        idx.iter()
            .map(|&i| PreferenceFeatures::from_record(&records[i], context_dim))
            .collect::<Result<Vec<_>, _>>()
    };
    let by_id: HashMap<&str, &Scene> = set.scenes.iter().map(|s| (s.id.as_str(), s)).collect();
    let test_scenes = test_idx
        .iter()
        .map(|&i| (*by_id[records[i].sample_id.as_str()]).clone())
        .collect();
    Ok(BenchData {
        train: features(train_idx)?,
        test: features(test_idx)?,
        test_scenes,
        set,
    })
}

/// Trains on `data` with `objective` and evaluates on its held-out part.
pub fn run_on(data: &BenchData, trainer: &TrainerConfig, objective: Objective) -> Result<BenchOutcome, SynthError> {
    let mut trainer = trainer.clone();
    trainer.objective = objective;
    let outcome = train(&trainer, &data.train)?;
    let captions = data
        .test_scenes
        .iter()
        .map(|s| caption(&outcome.policy, s, &data.set.vocab))
        .collect::<Result<Vec<_>, _>>()?;
    Ok(BenchOutcome {
        chair: chair_metrics(&captions, &data.test_scenes)?,
        ordering_accuracy: ordering_accuracy(&outcome.policy, &outcome.reference, &data.test, trainer.hyper.beta)?,
        final_total_loss: outcome.history.last().map_or(f64::NAN, |m| m.total),
        train_size: data.train.len(),
        test_size: data.test.len(),
        policy: outcome.policy,
        history: outcome.history,
    })
}

pub fn run_benchmark(config: &BenchConfig) -> Result<BenchOutcome, SynthError> {
    run_on(&prepare(config)?, &config.trainer, config.trainer.objective)
}

/// Full objective against the pairwise text-only objective on identical data.
#[derive(Debug, Clone)]
pub struct ObjectiveComparison {
    pub full: BenchOutcome,
    pub dpo_only: BenchOutcome,
}

pub fn compare_objectives(config: &BenchConfig) -> Result<ObjectiveComparison, SynthError> {
    let data = prepare(config)?;
    Ok(ObjectiveComparison {
        full: run_on(&data, &config.trainer, Objective::FULL)?,
        dpo_only: run_on(&data, &config.trainer, Objective::DPO_ONLY)?,
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct AblationRow {
    pub list_size: usize,
    pub seed: u64,
    pub chair_i: f64,
    pub chair_s: f64,
    pub coverage: f64,
    pub ordering_accuracy: f64,
    pub final_total_loss: f64,
}

impl AblationRow {
    pub fn is_valid(&self) -> bool {
        let unit = |v: f64| (0.0..=1.0).contains(&v);
        unit(self.chair_i)
            && unit(self.chair_s)
            && unit(self.coverage)
            && unit(self.ordering_accuracy)
            && self.final_total_loss.is_finite()
    }
}

/// Trains one surrogate per `(list size, seed)` cell on `workers` threads.
/// Rows come back ordered by list size, then seed.
pub fn run_ablation(
    template: &BenchConfig,
    list_sizes: &[usize],
    seeds: &[u64],
    workers: usize,
) -> Result<Vec<AblationRow>, SynthError> {
    if seeds.is_empty() {
        return Err(SynthError::InvalidConfig("at least one seed is required".into()));
    }
    if list_sizes.is_empty() {
        return Err(SynthError::InvalidConfig("at least one list size is required".into()));
    }
    let cells: Vec<(usize, u64)> = list_sizes
        .iter()
        .flat_map(|&l| seeds.iter().map(move |&s| (l, s)))
        .collect();
    let run_cell = |&(list_size, seed): &(usize, u64)| -> Result<AblationRow, SynthError> {
        let mut config = template.with_seed(seed);
        config.trainer.hyper.list_size = list_size;
        config.workers = 1;
        let out = run_benchmark(&config)?;
        log::info!("ablation L={list_size} seed={seed}: CHAIR_i {:.4}", out.chair.chair_i);
        Ok(AblationRow {
            list_size,
            seed,
            chair_i: out.chair.chair_i,
            chair_s: out.chair.chair_s,
            coverage: out.chair.coverage,
            ordering_accuracy: out.ordering_accuracy,
            final_total_loss: out.final_total_loss,
        })
    };
    let results: Vec<_> = match rayon::ThreadPoolBuilder::new().num_threads(workers.max(1)).build() {
        Ok(pool) => pool.install(|| cells.par_iter().map(run_cell).collect()),
        Err(_) => cells.iter().map(run_cell).collect(),
    };
    let mut rows = results.into_iter().collect::<Result<Vec<_>, _>>()?;
    rows.sort_by_key(|r| (r.list_size, r.seed));
    Ok(rows)
}

pub fn write_ablation_csv(path: &Path, rows: &[AblationRow]) -> Result<(), csv::Error> {
    let mut w = csv::Writer::from_path(path)?;
    for r in rows {
        w.serialize(r)?;
    }
    w.flush()?;
    Ok(())
}

/// One objective evaluated on one benchmark seed.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BenchRow {
    pub objective: String,
    pub list_size: usize,
    pub seed: u64,
    pub chair_i: f64,
    pub chair_s: f64,
    pub coverage: f64,
    pub ordering_accuracy: f64,
    pub final_total_loss: f64,
}

impl BenchRow {
    pub fn new(objective: &str, config: &BenchConfig, out: &BenchOutcome) -> Self {
        Self {
            objective: objective.to_string(),
            list_size: config.trainer.hyper.list_size,
            seed: config.data_seed,
            chair_i: out.chair.chair_i,
            chair_s: out.chair.chair_s,
            coverage: out.chair.coverage,
            ordering_accuracy: out.ordering_accuracy,
            final_total_loss: out.final_total_loss,
        }
    }
}

pub fn write_bench_csv(path: &Path, rows: &[BenchRow]) -> Result<(), csv::Error> {
    let mut w = csv::Writer::from_path(path)?;
    for r in rows {
        w.serialize(r)?;
    }
    w.flush()?;
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::surrogate::PolicyKind;

    fn projection(weight: f64, bias: f64) -> ToyPolicy {
        let mut params = vec![0.0; 10];
        params[0] = weight;
        params[9] = bias;
        ToyPolicy::from_params(PolicyKind::Linear, 9, params).unwrap()
    }

    #[test]
    fn scenes_are_deterministic_and_disjoint() {
        let a = gen_scenes(30, 5, &default_vocab()).unwrap();
        assert_eq!(a, gen_scenes(30, 5, &default_vocab()).unwrap());
        assert_ne!(a, gen_scenes(30, 6, &default_vocab()).unwrap());
        for s in &a.scenes {
            assert!((1..=MAX_OBJECTS).contains(&s.objects.len()));
            assert_eq!(s.labels().len(), s.objects.len());
            for (i, o) in s.objects.iter().enumerate() {
                assert!(o.bbox.fits(SCENE_SIZE, SCENE_SIZE));
                assert!(o.bbox.width() >= MIN_SIDE && o.bbox.height() >= MIN_SIDE);
                for p in &s.objects[i + 1..] {
                    assert!(!o.bbox.intersects(&p.bbox));
                }
            }
        }
        assert!(matches!(gen_scenes(0, 1, &default_vocab()), Err(SynthError::NoScenes)));
        assert!(matches!(gen_scenes(1, 1, &[]), Err(SynthError::EmptyVocabulary)));
    }

    #[test]
    fn captions_follow_the_policy() {
        let set = gen_scenes(10, 3, &default_vocab()).unwrap();
        for s in &set.scenes {
            let exact = caption(&projection(1.0, 0.0), s, &set.vocab).unwrap();
            let got: BTreeSet<&str> = exact.mentions.iter().map(String::as_str).collect();
            assert_eq!(got, s.labels());
            assert!(caption(&projection(0.0, 0.0), s, &set.vocab)
                .unwrap()
                .mentions
                .is_empty());
            assert_eq!(
                caption(&projection(0.0, 100.0), s, &set.vocab).unwrap().mentions.len(),
                12
            );
        }
    }

    #[test]
    fn chair_hand_counts() {
        let scene = Scene {
            id: "s".into(),
            image: Image::filled(4, 4, BACKGROUND),
            objects: ["a", "b", "c"]
                .iter()
                .map(|l| SceneObject {
                    label: l.to_string(),
                    bbox: BoundingBox::new(0, 0, 1, 1).unwrap(),
                })
                .collect(),
        };
        let caption = |m: &[&str]| CaptionRecord {
            scene_id: "s".into(),
            mentions: m.iter().map(|s| s.to_string()).collect(),
        };
        let m = chair_metrics(&[caption(&["a", "b", "c", "x", "y"])], std::slice::from_ref(&scene)).unwrap();
        assert_eq!((m.chair_i, m.chair_s, m.coverage), (0.4, 1.0, 1.0));
        let m = chair_metrics(&[caption(&["a"])], std::slice::from_ref(&scene)).unwrap();
        assert_eq!((m.chair_i, m.chair_s), (0.0, 0.0));
        assert_eq!(m.coverage, 1.0 / 3.0);
        assert_eq!(chair_metrics(&[], &[]).unwrap(), ChairMetrics::default());
        let stray = CaptionRecord {
            scene_id: "nope".into(),
            mentions: vec![],
        };
        assert!(matches!(
            chair_metrics(&[stray], &[scene]),
            Err(SynthError::UnknownScene(_))
        ));
    }

    #[test]
    fn lists_build_for_every_scene() {
        let set = gen_scenes(12, 9, &default_vocab()).unwrap();
        let records = build_lists(&set, 5, 9, 2).unwrap();
        assert_eq!(records.len(), 12);
        for r in &records {
            assert_eq!(r.retries, 0);
            assert_eq!(r.ranked.len(), 5);
        }
    }
}
