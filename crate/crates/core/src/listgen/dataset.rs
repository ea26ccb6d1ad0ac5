//! On-disk listwise dataset: `{id}_k{k}.png` images plus a JSON Lines manifest.
//!
//! The first manifest line is a header carrying the schema version and the
//! record count. Each record line lists its image files with SHA-256
//! digests, checked on read.

use std::fs;
use std::io::Write;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use super::{DetectedObject, ListRecord, ListgenError};
use crate::imageio::{encode_png, load_image, ImageIoError};
use crate::masking::mask_fraction;
use crate::types::{BoundingBox, MaskPlan, PromptStyle, RankedList, Rgb, SweepDirection};

pub const DATASET_SCHEMA: &str = "lpoi-dataset-v1";
pub const MANIFEST_FILE: &str = "manifest.jsonl";

#[derive(Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct Header {
    schema: String,
    records: usize,
}

#[derive(Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct RecordLine {
    id: String,
    #[serde(rename = "L")]
    list_size: usize,
    fractions: Vec<f64>,
    boxes: Vec<BoundingBox>,
    objects: Vec<DetectedObject>,
    retries: u32,
    verified: bool,
    sweep: SweepDirection,
    prompt: PromptStyle,
    fill: Rgb,
    stroke_width: u32,
    images: Vec<String>,
    sha256: Vec<String>,
}

/// File-name-safe form of a sample id.
fn file_stem(id: &str) -> String {
    id.chars()
        .map(|c| {
            if c.is_ascii_alphanumeric() || matches!(c, '-' | '_' | '.') {
                c
            } else {
                '_'
            }
        })
        .collect()
}

fn io_err(path: &Path) -> impl FnOnce(std::io::Error) -> ListgenError + '_ {
    move |source| ListgenError::Io {
        path: path.display().to_string(),
        source,
    }
}

fn encode_err(path: &Path, source: image::ImageError) -> ListgenError {
    ListgenError::Image(ImageIoError::Codec {
        path: path.display().to_string(),
        source,
    })
}

/// Writes `records` under `out_dir` and returns the manifest path.
pub fn write_dataset(records: &[ListRecord], out_dir: &Path) -> Result<PathBuf, ListgenError> {
    fs::create_dir_all(out_dir).map_err(io_err(out_dir))?;
    let manifest_path = out_dir.join(MANIFEST_FILE);
    let mut manifest = Vec::new();
    let header = Header {
        schema: DATASET_SCHEMA.into(),
        records: records.len(),
    };
    writeln!(
        manifest,
        "{}",
        serde_json::to_string(&header).expect("header serializes")
    )
    .expect("vec write");

    let mut used = std::collections::HashSet::new();
    for r in records {
        let stem = file_stem(&r.sample_id);
        if !used.insert(stem.clone()) {
            return Err(ListgenError::format(
                &manifest_path,
                0,
                format!(
                    "sample id `{}` collides with another id after file-name sanitizing",
                    r.sample_id
                ),
            ));
        }
        let mut images = Vec::with_capacity(r.ranked.len());
        let mut digests = Vec::with_capacity(r.ranked.len());
        for (k, img) in r.ranked.images.iter().enumerate() {
            let name = format!("{stem}_k{}.png", k + 1);
            let path = out_dir.join(&name);
            let bytes = encode_png(img).map_err(|e| encode_err(&path, e))?;
            digests.push(hex::encode(Sha256::digest(&bytes)));
            fs::write(&path, &bytes).map_err(io_err(&path))?;
            images.push(name);
        }
        let plan = &r.ranked.plan;
        let line = RecordLine {
            id: r.sample_id.clone(),
            list_size: plan.list_size,
            fractions: r.ranked.fractions.clone(),
            boxes: plan.boxes.clone(),
            objects: r.selected.clone(),
            retries: r.retries,
            verified: r.verified,
            sweep: plan.sweep,
            prompt: plan.prompt,
            fill: plan.fill,
            stroke_width: plan.stroke_width,
            images,
            sha256: digests,
        };
        writeln!(manifest, "{}", serde_json::to_string(&line).expect("record serializes")).expect("vec write");
    }
    fs::write(&manifest_path, manifest).map_err(io_err(&manifest_path))?;
    Ok(manifest_path)
}

/// Reads a dataset written by [`write_dataset`], verifying schema and checksums.
pub fn read_dataset(dir: &Path) -> Result<Vec<ListRecord>, ListgenError> {
    let manifest_path = dir.join(MANIFEST_FILE);
    let text = fs::read_to_string(&manifest_path).map_err(io_err(&manifest_path))?;
    let fmt = |line: usize, msg: String| ListgenError::format(&manifest_path, line, msg);

    let mut lines = text.lines().enumerate().filter(|(_, l)| !l.trim().is_empty());
    let (_, first) = lines
        .next()
        .ok_or_else(|| fmt(1, "empty manifest, header missing".into()))?;
    let header: Header = serde_json::from_str(first).map_err(|e| fmt(1, format!("bad header: {e}")))?;
    if header.schema != DATASET_SCHEMA {
        return Err(fmt(
            1,
            format!(
                "schema `{}` is not supported (expected `{DATASET_SCHEMA}`)",
                header.schema
            ),
        ));
    }

    let mut records = Vec::with_capacity(header.records);
    for (i, raw) in lines {
        let line_no = i + 1;
        let line: RecordLine = serde_json::from_str(raw).map_err(|e| fmt(line_no, e.to_string()))?;
        if line.images.len() != line.list_size
            || line.fractions.len() != line.list_size
            || line.sha256.len() != line.list_size
        {
            return Err(fmt(
                line_no,
                format!("`{}`: list fields disagree with L = {}", line.id, line.list_size),
            ));
        }
        for (k, f) in line.fractions.iter().enumerate() {
            let expected = mask_fraction(k + 1, line.list_size).map_err(|e| fmt(line_no, e.to_string()))?;
            if f.to_bits() != expected.to_bits() {
                return Err(fmt(
                    line_no,
                    format!("`{}`: fraction {} should be {expected}", line.id, f),
                ));
            }
        }
        let mut images = Vec::with_capacity(line.list_size);
        for (name, digest) in line.images.iter().zip(&line.sha256) {
            if name.contains(['/', '\\']) || name == ".." {
                return Err(fmt(line_no, format!("image path `{name}` must be a bare file name")));
            }
            let path = dir.join(name);
            let bytes = fs::read(&path).map_err(io_err(&path))?;
            if hex::encode(Sha256::digest(&bytes)) != *digest {
                return Err(fmt(line_no, format!("checksum mismatch for `{name}`")));
            }
            images.push(load_image(&path)?);
        }
        let plan = MaskPlan {
            boxes: line.boxes,
            list_size: line.list_size,
            sweep: line.sweep,
            prompt: line.prompt,
            fill: line.fill,
            stroke_width: line.stroke_width,
        };
        plan.validate().map_err(|e| fmt(line_no, e.to_string()))?;
        if line.objects.len() != line.retries as usize + 1 {
            return Err(fmt(
                line_no,
                format!(
                    "`{}`: {} objects but {} retries",
                    line.id,
                    line.objects.len(),
                    line.retries
                ),
            ));
        }
        records.push(ListRecord {
            sample_id: line.id.clone(),
            ranked: RankedList {
                sample_id: line.id,
                images,
                fractions: line.fractions,
                plan,
            },
            selected: line.objects,
            retries: line.retries,
            verified: line.verified,
        });
    }
    if records.len() != header.records {
        return Err(fmt(
            1,
            format!("header announces {} records, found {}", header.records, records.len()),
        ));
    }
    Ok(records)
}
