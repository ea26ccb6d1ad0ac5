//! `validate`: schema checks for the JSON Lines inputs and built datasets.

use std::path::{Path, PathBuf};

use lpoi_core::listgen::formats::{read_detections_file, read_manifest, read_verdicts_file, AdapterHeader};
use lpoi_core::listgen::{load_samples, read_dataset};

use crate::{CliError, Status};

#[derive(Debug, Clone, Default, clap::Args)]
pub struct ValidateArgs {
    #[arg(long)]
    pub detections: Option<PathBuf>,
    #[arg(long)]
    pub verdicts: Option<PathBuf>,
    /// Also decodes every referenced image.
    #[arg(long)]
    pub manifest: Option<PathBuf>,
    /// Dataset directory; checksums are verified.
    #[arg(long)]
    pub dataset: Option<PathBuf>,
    /// Reject detections or verdicts without an `#lpoi-adapter` header.
    #[arg(long)]
    pub require_header: bool,
}

/// Result of checking one file.
#[derive(Debug, Clone, PartialEq)]
pub struct Report {
    pub path: PathBuf,
    pub entries: usize,
    pub warnings: Vec<String>,
}

impl Report {
    fn print(&self) {
        println!(
            "{}: {} entries, {} warnings",
            self.path.display(),
            self.entries,
            self.warnings.len()
        );
        for w in &self.warnings {
            println!("  warning: {w}");
        }
    }
}

fn check_header(path: &Path, header: Option<&AdapterHeader>, required: bool) -> Result<(), CliError> {
    match header {
        Some(h) => {
            log::info!(
                "{}: adapter model {} threshold {:?}",
                path.display(),
                h.model,
                h.threshold
            );
            Ok(())
        }
        None if required => Err(CliError::Failed(format!(
            "{}: missing `#lpoi-adapter` header line",
            path.display()
        ))),
        None => Ok(()),
    }
}

pub fn check_detections(path: &Path, require_header: bool) -> Result<Report, CliError> {
    let parsed = read_detections_file(path)?;
    check_header(path, parsed.header.as_ref(), require_header)?;
    Ok(Report {
        path: path.to_path_buf(),
        entries: parsed.entries.len(),
        warnings: parsed.warnings,
    })
}

pub fn check_verdicts(path: &Path, require_header: bool) -> Result<Report, CliError> {
    let parsed = read_verdicts_file(path)?;
    check_header(path, parsed.header.as_ref(), require_header)?;
    Ok(Report {
        path: path.to_path_buf(),
        entries: parsed.entries.len(),
        warnings: parsed.warnings,
    })
}

pub fn check_manifest(path: &Path) -> Result<Report, CliError> {
    let samples = read_manifest(path)?;
    let n = samples.len();
    let (_, warnings) = load_samples(samples);
    Ok(Report {
        path: path.to_path_buf(),
        entries: n,
        warnings: warnings
            .into_iter()
            .map(|w| format!("{}: {}", w.id, w.message))
            .collect(),
    })
}

pub fn check_dataset(dir: &Path) -> Result<Report, CliError> {
    Ok(Report {
        path: dir.to_path_buf(),
        entries: read_dataset(dir)?.len(),
        warnings: vec![],
    })
}

pub fn validate(args: ValidateArgs) -> Result<Status, CliError> {
    let mut reports = Vec::new();
    if let Some(p) = &args.detections {
        reports.push(check_detections(p, args.require_header)?);
    }
    if let Some(p) = &args.verdicts {
        reports.push(check_verdicts(p, args.require_header)?);
    }
    if let Some(p) = &args.manifest {
        reports.push(check_manifest(p)?);
    }
    if let Some(p) = &args.dataset {
        reports.push(check_dataset(p)?);
    }
    if reports.is_empty() {
        return Err(CliError::Usage(
            "nothing to validate: pass --detections, --verdicts, --manifest or --dataset".into(),
        ));
    }
    for r in &reports {
        r.print();
    }
    Ok(if reports.iter().any(|r| !r.warnings.is_empty()) {
        Status::Partial
    } else {
        Status::Ok
    })
}
