//! Listwise dataset construction.
//!
//! For each preference sample: rank the detected objects by how the answer
//! and question mention them, mask the top one across an interpolated list,
//! ask a verifier whether the fully masked image now contradicts the chosen
//! answer, and if not, add the next object to the mask. At most four objects
//! are masked per sample.

mod dataset;
pub mod formats;
mod phrases;
mod verify;

use std::collections::BTreeMap;
use std::path::Path;

use rand::Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use thiserror::Error;

pub use dataset::{read_dataset, write_dataset, DATASET_SCHEMA, MANIFEST_FILE};
pub use phrases::{extract_candidate_phrases, select_object};
pub use verify::{
    verify_negative, AdapterVerifier, AlwaysHallucinating, FixtureVerifier, Verdict, VerificationVerdict, Verifier,
    VerifierUnavailable, VerifyRequest,
};

use crate::imageio::{load_image, ImageIoError};
use crate::masking::{build_ranked_list, MaskError};
use crate::seed::rng_for;
use crate::types::{
    validate_sample, BoundingBox, MaskPlan, PreferenceSample, PromptStyle, RankedList, Rgb, SweepDirection, TypeError,
    ValidSample, BLACK, MAX_PLAN_BOXES,
};

/// Maskings attempted per sample before giving up on verification.
pub const MAX_MASKINGS: usize = MAX_PLAN_BOXES;

#[derive(Debug, Error)]
pub enum ListgenError {
    #[error("sample `{0}` has no detections")]
    NoDetections(String),
    #[error(transparent)]
    VerifierUnavailable(#[from] VerifierUnavailable),
    #[error(transparent)]
    Mask(#[from] MaskError),
    #[error(transparent)]
    Type(#[from] TypeError),
    #[error(transparent)]
    Image(#[from] ImageIoError),
    #[error("{path}: {source}")]
    Io {
        path: String,
        #[source]
        source: std::io::Error,
    },
    #[error("{path}:{line}: {message}")]
    Format { path: String, line: usize, message: String },
}

impl ListgenError {
    pub(crate) fn format(path: &Path, line: usize, message: impl Into<String>) -> Self {
        ListgenError::Format {
            path: path.display().to_string(),
            line,
            message: message.into(),
        }
    }
}

/// One detector hit.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DetectedObject {
    pub label: String,
    #[serde(rename = "box")]
    pub bbox: BoundingBox,
    pub confidence: f64,
}

/// What to do when the verifier has no answer for a sample.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum UnavailablePolicy {
    /// Keep the current list as the hard negative, flagged unverified.
    #[default]
    Accept,
    /// Drop the sample with a warning.
    Skip,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BuildConfig {
    pub list_size: usize,
    pub sweep: SweepDirection,
    pub prompt: PromptStyle,
    pub fill: Rgb,
    pub stroke_width: u32,
    pub on_unavailable: UnavailablePolicy,
}

impl Default for BuildConfig {
    fn default() -> Self {
        Self {
            list_size: 5,
            sweep: SweepDirection::default(),
            prompt: PromptStyle::default(),
            fill: BLACK,
            stroke_width: MaskPlan::DEFAULT_STROKE_WIDTH,
            on_unavailable: UnavailablePolicy::default(),
        }
    }
}

impl BuildConfig {
    fn plan(&self, boxes: Vec<BoundingBox>) -> Result<MaskPlan, TypeError> {
        let plan = MaskPlan {
            boxes,
            list_size: self.list_size,
            sweep: self.sweep,
            prompt: self.prompt,
            fill: self.fill,
            stroke_width: self.stroke_width,
        };
        plan.validate()?;
        Ok(plan)
    }
}

/// A finished listwise sample.
#[derive(Debug, Clone, PartialEq)]
pub struct ListRecord {
    pub sample_id: String,
    pub ranked: RankedList,
    /// Objects masked, in the order they were added.
    pub selected: Vec<DetectedObject>,
    pub retries: u32,
    pub verified: bool,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum WarningKind {
    InvalidSample,
    NoDetections,
    DetectionOutOfBounds,
    VerifierUnavailable,
    RetriesExhausted,
    Failed,
}

/// Structured, serializable record of a skip or a degraded sample.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct BuildWarning {
    pub id: String,
    pub kind: WarningKind,
    pub skipped: bool,
    pub message: String,
}

impl BuildWarning {
    fn new(id: &str, kind: WarningKind, skipped: bool, message: impl Into<String>) -> Self {
        Self {
            id: id.to_string(),
            kind,
            skipped,
            message: message.into(),
        }
    }
}

/// Builds the listwise record for one sample.
///
/// Detections falling outside the image are dropped (with a warning) before
/// selection.
pub fn build_sample<R: Rng + ?Sized>(
    sample: &ValidSample,
    detections: &[DetectedObject],
    verifier: &dyn Verifier,
    config: &BuildConfig,
    rng: &mut R,
) -> Result<(ListRecord, Vec<BuildWarning>), ListgenError> {
    let id = sample.id();
    let image = sample.image();
    let mut warnings = Vec::new();
    let usable: Vec<DetectedObject> = detections
        .iter()
        .filter(|d| {
            let ok = d.bbox.validate_for(image).is_ok();
            if !ok {
                warnings.push(BuildWarning::new(
                    id,
                    WarningKind::DetectionOutOfBounds,
                    false,
                    format!("`{}` box {:?} outside image", d.label, d.bbox.to_array()),
                ));
            }
            ok
        })
        .cloned()
        .collect();
    if usable.is_empty() {
        return Err(ListgenError::NoDetections(id.to_string()));
    }

    let mut vocabulary: Vec<String> = usable.iter().map(|d| d.label.clone()).collect();
    vocabulary.sort();
    vocabulary.dedup();
    let text = sample.sample();
    let candidates = extract_candidate_phrases(&text.question, &text.chosen, &vocabulary);

    let mut taken = vec![false; usable.len()];
    let mut selected: Vec<DetectedObject> = Vec::new();
    let mut last: Option<RankedList> = None;

    while selected.len() < MAX_MASKINGS {
        let Some(i) = phrases::select_next(&candidates, &usable, &taken, rng) else {
            break;
        };
        taken[i] = true;
        selected.push(usable[i].clone());
        let plan = config.plan(selected.iter().map(|d| d.bbox).collect())?;
        let ranked = build_ranked_list(image, &plan, id)?;
        let retry = (selected.len() - 1) as u32;
        let request = VerifyRequest {
            sample_id: id,
            retry,
            hard_negative: ranked.hard_negative(),
            question: &text.question,
            chosen: &text.chosen,
        };
        match verify_negative(verifier, &request) {
            Ok(v) if v.verdict == Verdict::Hallucinating => {
                let record = ListRecord {
                    sample_id: id.to_string(),
                    ranked,
                    selected,
                    retries: retry,
                    verified: true,
                };
                return Ok((record, warnings));
            }
            Ok(_) => last = Some(ranked),
            Err(e) => match config.on_unavailable {
                UnavailablePolicy::Accept => {
                    warnings.push(BuildWarning::new(
                        id,
                        WarningKind::VerifierUnavailable,
                        false,
                        e.to_string(),
                    ));
                    let record = ListRecord {
                        sample_id: id.to_string(),
                        ranked,
                        selected,
                        retries: retry,
                        verified: false,
                    };
                    return Ok((record, warnings));
                }
                UnavailablePolicy::Skip => return Err(e.into()),
            },
        }
    }

    let ranked = last.expect("at least one masking was attempted");
    warnings.push(BuildWarning::new(
        id,
        WarningKind::RetriesExhausted,
        false,
        format!("answer still valid after masking {} object(s)", selected.len()),
    ));
    let retries = (selected.len() - 1) as u32;
    Ok((
        ListRecord {
            sample_id: id.to_string(),
            ranked,
            selected,
            retries,
            verified: false,
        },
        warnings,
    ))
}

/// Outcome of a dataset build. Records and warnings follow input order.
#[derive(Debug, Clone, Default)]
pub struct BuildReport {
    pub records: Vec<ListRecord>,
    pub warnings: Vec<BuildWarning>,
    pub skipped: usize,
}

impl BuildReport {
    /// Number of records per retry count, index = retries.
    pub fn retry_histogram(&self) -> [usize; MAX_MASKINGS] {
        let mut h = [0; MAX_MASKINGS];
        for r in &self.records {
            h[r.retries as usize] += 1;
        }
        h
    }
}

/// Builds records for every sample on a pool of `workers` threads.
///
/// Each sample draws from its own random stream derived from `seed` and its
/// id, so the result is independent of scheduling.
pub fn build_dataset(
    samples: &[ValidSample],
    detections: &BTreeMap<String, Vec<DetectedObject>>,
    verifier: &dyn Verifier,
    config: &BuildConfig,
    seed: u64,
    workers: usize,
) -> BuildReport {
    let workers = if verifier.concurrent() { workers.max(1) } else { 1 };
    let run_one = |s: &ValidSample| {
        let dets = detections.get(s.id()).map(Vec::as_slice).unwrap_or(&[]);
        let mut rng = rng_for(seed, s.id());
        build_sample(s, dets, verifier, config, &mut rng)
    };
    let results: Vec<_> = match rayon::ThreadPoolBuilder::new().num_threads(workers).build() {
        Ok(pool) => pool.install(|| samples.par_iter().map(run_one).collect()),
        Err(e) => {
            log::warn!("thread pool unavailable ({e}); building serially");
            samples.iter().map(run_one).collect()
        }
    };

    let mut report = BuildReport::default();
    for (s, result) in samples.iter().zip(results) {
        match result {
            Ok((record, warnings)) => {
                report.warnings.extend(warnings);
                report.records.push(record);
            }
            Err(e) => {
                let kind = match e {
                    ListgenError::NoDetections(_) => WarningKind::NoDetections,
                    ListgenError::VerifierUnavailable(_) => WarningKind::VerifierUnavailable,
                    _ => WarningKind::Failed,
                };
                report
                    .warnings
                    .push(BuildWarning::new(s.id(), kind, true, e.to_string()));
                report.skipped += 1;
            }
        }
    }
    report
}

/// Decodes and validates every manifest sample; failures become skip warnings.
pub fn load_samples(samples: Vec<PreferenceSample>) -> (Vec<ValidSample>, Vec<BuildWarning>) {
    let mut valid = Vec::with_capacity(samples.len());
    let mut warnings = Vec::new();
    for s in samples {
        let id = s.id.clone();
        let result = load_image(&s.image)
            .map_err(|e| e.to_string())
            .and_then(|img| validate_sample(s, img).map_err(|e| e.to_string()));
        match result {
            Ok(v) => valid.push(v),
            Err(msg) => warnings.push(BuildWarning::new(&id, WarningKind::InvalidSample, true, msg)),
        }
    }
    (valid, warnings)
}
