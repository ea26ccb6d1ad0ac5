//! Regenerates `fixtures/`: ten synthetic scenes with a manifest, detections
//! and verdicts. The first scene with two or more objects gets a `still-valid`
//! verdict on its first masking, so building lists retries it once.
//!
//! cargo run -p lpoi-cli --example make_fixture -- crates/cli/fixtures

use std::fmt::Write as _;
use std::path::PathBuf;

use lpoi_core::imageio::save_png;
use lpoi_core::listgen::formats::{DetectionsLine, RawObject, VerdictLine};
use lpoi_core::listgen::Verdict;
use lpoi_core::synthbench::{default_vocab, gen_scenes, preference_samples};

const SAMPLES: usize = 10;
const SEED: u64 = 2024;

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let dir = PathBuf::from(std::env::args().nth(1).unwrap_or_else(|| "crates/cli/fixtures".into()));
    std::fs::create_dir_all(dir.join("images"))?;
    let set = gen_scenes(SAMPLES, SEED, &default_vocab())?;
    let samples = preference_samples(&set, SEED)?;
    let retried = set
        .scenes
        .iter()
        .position(|s| s.objects.len() >= 2)
        .ok_or("no scene with two objects")?;

    let (mut manifest, mut detections, mut verdicts) = (String::new(), String::new(), String::new());
    for (i, (scene, sample)) in set.scenes.iter().zip(&samples).enumerate() {
        let rel = format!("images/{}.png", scene.id);
        save_png(&dir.join(&rel), &scene.image)?;
        let mut entry = sample.sample().clone();
        entry.image = rel.into();
        writeln!(manifest, "{}", serde_json::to_string(&entry)?)?;

        let objects = scene
            .objects
            .iter()
            .enumerate()
            .map(|(j, o)| RawObject {
                label: o.label.clone(),
                bbox: o.bbox.to_array(),
                confidence: 0.9 - 0.1 * j as f64,
            })
            .collect();
        let line = DetectionsLine {
            id: scene.id.clone(),
            objects,
            warning: None,
        };
        writeln!(detections, "{}", serde_json::to_string(&line)?)?;

        let first = if i == retried {
            Verdict::StillValid
        } else {
            Verdict::Hallucinating
        };
        let mut lines = vec![(0, first)];
        if i == retried {
            lines.push((1, Verdict::Hallucinating));
        }
        for (retry, verdict) in lines {
            let v = VerdictLine {
                id: scene.id.clone(),
                retry,
                verdict,
                rationale: None,
                warning: None,
            };
            writeln!(verdicts, "{}", serde_json::to_string(&v)?)?;
        }
    }
    std::fs::write(dir.join("manifest.jsonl"), manifest)?;
    std::fs::write(dir.join("detections.jsonl"), detections)?;
    std::fs::write(dir.join("verdicts.jsonl"), verdicts)?;
    println!(
        "wrote {SAMPLES} samples to {}; {} retries once",
        dir.display(),
        set.scenes[retried].id
    );
    Ok(())
}
