//! JSON Lines input formats: sample manifest, detections and verdicts.
//!
//! Blank lines are ignored. Lines starting with `#` are comments; the model
//! adapter writes a `#lpoi-adapter model=<id> threshold=<t>` header that is
//! parsed into [`AdapterHeader`].

use std::collections::{BTreeMap, HashSet};
use std::fs;
use std::path::Path;

use serde::{Deserialize, Serialize};

use super::{DetectedObject, ListgenError, Verdict};
use crate::types::{BoundingBox, PreferenceSample};

/// One line of a detections file.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DetectionsLine {
    pub id: String,
    pub objects: Vec<RawObject>,
    /// Set by the adapter when inference failed for this image.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub warning: Option<String>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RawObject {
    pub label: String,
    #[serde(rename = "box")]
    pub bbox: [u32; 4],
    pub confidence: f64,
}

/// One line of a verdicts file.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct VerdictLine {
    pub id: String,
    pub retry: u32,
    pub verdict: Verdict,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub rationale: Option<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub warning: Option<String>,
}

/// Provenance header written by the model adapter.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct AdapterHeader {
    pub model: String,
    pub threshold: Option<f64>,
    pub extra: BTreeMap<String, String>,
}

pub const ADAPTER_HEADER_PREFIX: &str = "#lpoi-adapter";

impl AdapterHeader {
    pub fn parse(line: &str) -> Option<Result<Self, String>> {
        let rest = line.strip_prefix(ADAPTER_HEADER_PREFIX)?;
        let mut header = AdapterHeader::default();
        for field in rest.split_whitespace() {
            let Some((k, v)) = field.split_once('=') else {
                return Some(Err(format!("malformed header field `{field}`")));
            };
            match k {
                "model" => header.model = v.to_string(),
                "threshold" => match v.parse::<f64>() {
                    Ok(t) if t > 0.0 && t < 1.0 => header.threshold = Some(t),
                    _ => return Some(Err(format!("threshold `{v}` is not in (0, 1)"))),
                },
                _ => {
                    header.extra.insert(k.to_string(), v.to_string());
                }
            }
        }
        if header.model.is_empty() {
            return Some(Err("header lacks model=<id>".into()));
        }
        Some(Ok(header))
    }
}

/// A parsed file plus everything suspicious but not fatal.
#[derive(Debug, Clone, PartialEq)]
pub struct Parsed<T> {
    pub entries: Vec<T>,
    /// 1-based source line of each entry.
    pub lines: Vec<usize>,
    pub header: Option<AdapterHeader>,
    pub warnings: Vec<String>,
}

fn read_text(path: &Path) -> Result<String, ListgenError> {
    fs::read_to_string(path).map_err(|source| ListgenError::Io {
        path: path.display().to_string(),
        source,
    })
}

fn parse_lines<T: for<'de> Deserialize<'de>>(path: &Path, text: &str) -> Result<Parsed<T>, ListgenError> {
    let mut parsed = Parsed {
        entries: Vec::new(),
        lines: Vec::new(),
        header: None,
        warnings: Vec::new(),
    };
    for (i, line) in text.lines().enumerate() {
        let line_no = i + 1;
        let trimmed = line.trim();
        if trimmed.is_empty() {
            continue;
        }
        if trimmed.starts_with('#') {
            match AdapterHeader::parse(trimmed) {
                Some(Ok(h)) if parsed.header.is_none() && parsed.entries.is_empty() => parsed.header = Some(h),
                Some(Ok(_)) => parsed
                    .warnings
                    .push(format!("line {line_no}: adapter header must be the first line")),
                Some(Err(msg)) => return Err(ListgenError::format(path, line_no, msg)),
                None => {}
            }
            continue;
        }
        let entry = serde_json::from_str(trimmed).map_err(|e| ListgenError::format(path, line_no, e.to_string()))?;
        parsed.entries.push(entry);
        parsed.lines.push(line_no);
    }
    Ok(parsed)
}

/// Reads the input sample manifest. Relative image paths resolve against the manifest's directory.
pub fn read_manifest(path: &Path) -> Result<Vec<PreferenceSample>, ListgenError> {
    let parsed: Parsed<PreferenceSample> = parse_lines(path, &read_text(path)?)?;
    let base = path.parent().unwrap_or_else(|| Path::new(""));
    let mut seen = HashSet::new();
    let mut out = Vec::with_capacity(parsed.entries.len());
    for (mut s, line_no) in parsed.entries.into_iter().zip(parsed.lines) {
        if !seen.insert(s.id.clone()) {
            return Err(ListgenError::format(
                path,
                line_no,
                format!("duplicate sample id `{}`", s.id),
            ));
        }
        if s.image.is_relative() {
            s.image = base.join(&s.image);
        }
        out.push(s);
    }
    Ok(out)
}

/// Parses and checks a detections file.
///
/// Hard schema violations are errors; lines that parse but break a
/// convention (non-lowercase labels, duplicate ids, adapter failure notes)
/// become warnings.
pub fn parse_detections(path: &Path, text: &str) -> Result<Parsed<DetectionsLine>, ListgenError> {
    let mut parsed: Parsed<DetectionsLine> = parse_lines(path, text)?;
    let mut seen = HashSet::new();
    for (n, line) in parsed.entries.iter().enumerate() {
        let line_no = parsed.lines[n];
        let at = format!("id `{}`", line.id);
        if line.id.is_empty() {
            return Err(ListgenError::format(path, line_no, format!("{at}: empty id")));
        }
        if !seen.insert(line.id.clone()) {
            parsed
                .warnings
                .push(format!("line {line_no}: {at}: duplicate id, later entry ignored"));
        }
        if let Some(w) = &line.warning {
            parsed
                .warnings
                .push(format!("line {line_no}: {at}: adapter warning: {w}"));
        }
        for o in &line.objects {
            if o.label.trim().is_empty() {
                return Err(ListgenError::format(path, line_no, format!("{at}: empty label")));
            }
            if !(0.0..=1.0).contains(&o.confidence) {
                return Err(ListgenError::format(
                    path,
                    line_no,
                    format!("{at}: confidence {} outside [0, 1]", o.confidence),
                ));
            }
            if BoundingBox::try_from(o.bbox).is_err() {
                return Err(ListgenError::format(
                    path,
                    line_no,
                    format!("{at}: empty box {:?}", o.bbox),
                ));
            }
            if o.label != o.label.to_lowercase() {
                parsed
                    .warnings
                    .push(format!("line {line_no}: {at}: label `{}` is not lowercase", o.label));
            }
        }
    }
    Ok(parsed)
}

pub fn read_detections_file(path: &Path) -> Result<Parsed<DetectionsLine>, ListgenError> {
    parse_detections(path, &read_text(path)?)
}

/// Detections keyed by sample id, labels lowercased. The first entry per id wins.
pub fn read_detections(path: &Path) -> Result<BTreeMap<String, Vec<DetectedObject>>, ListgenError> {
    let parsed = read_detections_file(path)?;
    let mut map = BTreeMap::new();
    for line in parsed.entries {
        let objects = line
            .objects
            .into_iter()
            .map(|o| DetectedObject {
                label: o.label.trim().to_lowercase(),
                bbox: BoundingBox::try_from(o.bbox).expect("validated"),
                confidence: o.confidence,
            })
            .collect();
        map.entry(line.id).or_insert(objects);
    }
    Ok(map)
}

/// Parses and checks a verdicts file.
pub fn parse_verdicts(path: &Path, text: &str) -> Result<Parsed<VerdictLine>, ListgenError> {
    let mut parsed: Parsed<VerdictLine> = parse_lines(path, text)?;
    let mut seen = HashSet::new();
    for (n, line) in parsed.entries.iter().enumerate() {
        let line_no = parsed.lines[n];
        let at = format!("id `{}` retry {}", line.id, line.retry);
        if line.id.is_empty() {
            return Err(ListgenError::format(path, line_no, format!("{at}: empty id")));
        }
        if line.retry > 3 {
            return Err(ListgenError::format(
                path,
                line_no,
                format!("{at}: retry must be 0..=3"),
            ));
        }
        if !seen.insert((line.id.clone(), line.retry)) {
            parsed
                .warnings
                .push(format!("line {line_no}: {at}: duplicate verdict, later entry ignored"));
        }
        if let Some(w) = &line.warning {
            parsed
                .warnings
                .push(format!("line {line_no}: {at}: adapter warning: {w}"));
        }
    }
    Ok(parsed)
}

pub fn read_verdicts_file(path: &Path) -> Result<Parsed<VerdictLine>, ListgenError> {
    parse_verdicts(path, &read_text(path)?)
}
