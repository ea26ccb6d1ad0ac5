//! `build-lists` and `render`.

use std::fs;
use std::path::{Path, PathBuf};

use clap::ValueEnum;
use serde::{Deserialize, Serialize};

use lpoi_core::imageio::{load_image, save_png};
use lpoi_core::listgen::formats::{read_detections, read_manifest, read_verdicts_file};
use lpoi_core::listgen::{
    build_dataset, load_samples, write_dataset, AdapterVerifier, AlwaysHallucinating, BuildConfig, FixtureVerifier,
    UnavailablePolicy, Verifier,
};
use lpoi_core::masking::build_ranked_list;
use lpoi_core::{BoundingBox, MaskPlan, PromptStyle, SweepDirection};

use super::{parse_box, parse_color, required};
use crate::config::{create_dir, default_workers, resolve, write_snapshot};
use crate::{CliError, Status};

pub const WARNINGS_FILE: &str = "warnings.jsonl";

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, ValueEnum)]
#[serde(rename_all = "kebab-case")]
pub enum VerifierChoice {
    /// Accept every first masking as hallucination-inducing.
    Stub,
}

#[derive(Debug, Clone, Default, clap::Args, Serialize)]
pub struct BuildListsArgs {
    /// TOML file with a [build-lists] table; flags take precedence.
    #[arg(long)]
    #[serde(skip)]
    pub config: Option<PathBuf>,
    /// JSON Lines sample manifest.
    #[arg(long)]
    pub manifest: Option<PathBuf>,
    /// JSON Lines detections keyed by sample id.
    #[arg(long)]
    pub detections: Option<PathBuf>,
    /// Precomputed verdicts; files with an adapter header are read as adapter output.
    #[arg(long, conflicts_with = "verifier")]
    pub verdicts: Option<PathBuf>,
    #[arg(long, value_enum)]
    pub verifier: Option<VerifierChoice>,
    /// Images per list, including the unmasked one.
    #[arg(long)]
    pub list_size: Option<usize>,
    #[arg(long)]
    pub seed: Option<u64>,
    /// Dataset output directory.
    #[arg(long)]
    pub out: Option<PathBuf>,
    /// Mask colour, `r,g,b` or `#rrggbb`.
    #[arg(long)]
    pub fill_color: Option<String>,
    #[arg(long)]
    pub sweep: Option<SweepDirection>,
    /// Skip the red outline around masked objects.
    #[arg(long)]
    #[serde(skip_serializing_if = "std::ops::Not::not")]
    pub no_prompt: bool,
    #[arg(long)]
    pub stroke_width: Option<u32>,
    /// What to do when no verdict is available: accept (flagged) or skip.
    #[arg(long)]
    pub on_unavailable: Option<String>,
    #[arg(long)]
    pub workers: Option<usize>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct BuildListsSettings {
    pub manifest: Option<PathBuf>,
    pub detections: Option<PathBuf>,
    pub verdicts: Option<PathBuf>,
    pub verifier: Option<VerifierChoice>,
    pub list_size: usize,
    pub seed: u64,
    pub out: Option<PathBuf>,
    pub fill_color: String,
    pub sweep: SweepDirection,
    pub no_prompt: bool,
    pub stroke_width: u32,
    pub on_unavailable: UnavailablePolicy,
    pub workers: Option<usize>,
}

impl Default for BuildListsSettings {
    fn default() -> Self {
        let d = BuildConfig::default();
        Self {
            manifest: None,
            detections: None,
            verdicts: None,
            verifier: None,
            list_size: d.list_size,
            seed: 0,
            out: None,
            fill_color: "0,0,0".into(),
            sweep: d.sweep,
            no_prompt: false,
            stroke_width: d.stroke_width,
            on_unavailable: d.on_unavailable,
            workers: None,
        }
    }
}

fn existing(path: PathBuf, flag: &str) -> Result<PathBuf, CliError> {
    if path.is_file() {
        Ok(path)
    } else {
        Err(CliError::Usage(format!("--{flag} {}: no such file", path.display())))
    }
}

fn prompt_style(no_prompt: bool) -> PromptStyle {
    if no_prompt {
        PromptStyle::None
    } else {
        PromptStyle::RedCircle
    }
}

fn verifier_for(s: &BuildListsSettings) -> Result<Box<dyn Verifier>, CliError> {
    match (&s.verdicts, s.verifier) {
        (Some(_), Some(_)) => Err(CliError::Usage("--verdicts and --verifier are exclusive".into())),
        (None, None) => Err(CliError::Usage(
            "one of --verdicts or --verifier stub is required".into(),
        )),
        (None, Some(VerifierChoice::Stub)) => Ok(Box::new(AlwaysHallucinating)),
        (Some(p), None) => {
            let p = existing(p.clone(), "verdicts")?;
            if read_verdicts_file(&p)?.header.is_some() {
                let v = AdapterVerifier::from_path(&p)?;
                log::info!("verdicts from adapter model {}", v.header().model);
                Ok(Box::new(v))
            } else {
                Ok(Box::new(FixtureVerifier::from_path(&p)?))
            }
        }
    }
}

pub fn build_lists(args: BuildListsArgs) -> Result<Status, CliError> {
    let mut s: BuildListsSettings = resolve("build-lists", args.config.as_deref(), &args)?;
    let manifest = existing(required(&s.manifest, "manifest")?, "manifest")?;
    let detections = existing(required(&s.detections, "detections")?, "detections")?;
    let out = required(&s.out, "out")?;
    let verifier = verifier_for(&s)?;
    let workers = *s.workers.get_or_insert_with(default_workers);
    if workers == 0 {
        return Err(CliError::Usage("--workers must be >= 1".into()));
    }
    let config = BuildConfig {
        list_size: s.list_size,
        sweep: s.sweep,
        prompt: prompt_style(s.no_prompt),
        fill: parse_color(&s.fill_color).map_err(CliError::Usage)?,
        stroke_width: s.stroke_width,
        on_unavailable: s.on_unavailable,
    };
    // Settings are checked up front against a placeholder box.
    MaskPlan {
        boxes: vec![BoundingBox::new(0, 0, 1, 1).map_err(|e| CliError::Usage(e.to_string()))?],
        list_size: config.list_size,
        sweep: config.sweep,
        prompt: config.prompt,
        fill: config.fill,
        stroke_width: config.stroke_width,
    }
    .validate()
    .map_err(|e| CliError::Usage(e.to_string()))?;

    let (samples, mut warnings) = load_samples(read_manifest(&manifest)?);
    let dets = read_detections(&detections)?;
    let mut report = build_dataset(&samples, &dets, verifier.as_ref(), &config, s.seed, workers);
    let invalid = warnings.len();
    warnings.append(&mut report.warnings);
    let skipped = report.skipped + invalid;

    create_dir(&out)?;
    write_dataset(&report.records, &out)?;
    let mut lines = String::new();
    for w in &warnings {
        log::warn!("{}: {}", w.id, w.message);
        lines.push_str(&serde_json::to_string(w).map_err(|e| CliError::output(out.join(WARNINGS_FILE), e))?);
        lines.push('\n');
    }
    let warn_path = out.join(WARNINGS_FILE);
    fs::write(&warn_path, lines).map_err(|e| CliError::output(&warn_path, e))?;
    write_snapshot(&out, "build-lists", &s)?;

    let hist = report.retry_histogram();
    let hist: Vec<String> = hist.iter().enumerate().map(|(r, n)| format!("{r}:{n}")).collect();
    println!("records: {}", report.records.len());
    println!("skipped: {skipped}");
    println!("retries: {}", hist.join(" "));
    Ok(if skipped > 0 || report.records.is_empty() {
        Status::Partial
    } else {
        Status::Ok
    })
}

#[derive(Debug, Clone, Default, clap::Args, Serialize)]
pub struct RenderArgs {
    /// TOML file with a [render] table; flags take precedence.
    #[arg(long)]
    #[serde(skip)]
    pub config: Option<PathBuf>,
    #[arg(long)]
    pub image: Option<PathBuf>,
    /// Object box `x0,y0,x1,y1`; repeat to mask several objects cumulatively.
    #[arg(long, value_parser = parse_box)]
    pub r#box: Option<Vec<[u32; 4]>>,
    /// Filename prefix; defaults to the image file stem.
    #[arg(long)]
    pub id: Option<String>,
    #[arg(long)]
    pub list_size: Option<usize>,
    #[arg(long)]
    pub sweep: Option<SweepDirection>,
    #[arg(long)]
    pub fill_color: Option<String>,
    #[arg(long)]
    #[serde(skip_serializing_if = "std::ops::Not::not")]
    pub no_prompt: bool,
    #[arg(long)]
    pub stroke_width: Option<u32>,
    #[arg(long)]
    pub out: Option<PathBuf>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct RenderSettings {
    pub image: Option<PathBuf>,
    pub r#box: Vec<[u32; 4]>,
    pub id: Option<String>,
    pub list_size: usize,
    pub sweep: SweepDirection,
    pub fill_color: String,
    pub no_prompt: bool,
    pub stroke_width: u32,
    pub out: Option<PathBuf>,
}

impl Default for RenderSettings {
    fn default() -> Self {
        let d = BuildListsSettings::default();
        Self {
            image: None,
            r#box: vec![],
            id: None,
            list_size: d.list_size,
            sweep: d.sweep,
            fill_color: d.fill_color,
            no_prompt: false,
            stroke_width: d.stroke_width,
            out: None,
        }
    }
}

/// `{id}_k{k}_f{fraction:.2}.png`
pub fn render_name(id: &str, k: usize, fraction: f64) -> String {
    format!("{id}_k{k}_f{fraction:.2}.png")
}

pub fn render(args: RenderArgs) -> Result<Status, CliError> {
    let mut s: RenderSettings = resolve("render", args.config.as_deref(), &args)?;
    let image_path = existing(required(&s.image, "image")?, "image")?;
    let out = required(&s.out, "out")?;
    if s.r#box.is_empty() {
        return Err(CliError::Usage("at least one --box is required".into()));
    }
    let id = s.id.get_or_insert_with(|| stem(&image_path)).clone();
    let boxes = s
        .r#box
        .iter()
        .map(|b| BoundingBox::try_from(*b))
        .collect::<Result<Vec<_>, _>>()
        .map_err(|e| CliError::Usage(e.to_string()))?;
    let plan = MaskPlan {
        boxes,
        list_size: s.list_size,
        sweep: s.sweep,
        prompt: prompt_style(s.no_prompt),
        fill: parse_color(&s.fill_color).map_err(CliError::Usage)?,
        stroke_width: s.stroke_width,
    };
    plan.validate().map_err(|e| CliError::Usage(e.to_string()))?;
    let image = load_image(&image_path)?;
    plan.validate_for(&image).map_err(|e| CliError::Usage(e.to_string()))?;

    let list = build_ranked_list(&image, &plan, &id)?;
    create_dir(&out)?;
    for (k, (img, f)) in list.images.iter().zip(&list.fractions).enumerate() {
        let path = out.join(render_name(&id, k + 1, *f));
        save_png(&path, img)?;
        println!("{}", path.display());
    }
    write_snapshot(&out, "render", &s)?;
    Ok(Status::Ok)
}

fn stem(path: &Path) -> String {
    path.file_stem()
        .map_or_else(|| "sample".to_string(), |s| s.to_string_lossy().into_owned())
}
