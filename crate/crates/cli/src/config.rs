//! TOML config files merged under command-line flags, and resolved-config snapshots.

use std::collections::BTreeSet;
use std::fs;
use std::path::Path;

use serde::de::DeserializeOwned;
use serde::Serialize;

use crate::CliError;

pub const SNAPSHOT_FILE: &str = "resolved-config.toml";

/// Flag names a command accepts, as config keys.
fn known_keys<F: clap::Args>() -> BTreeSet<String> {
    F::augment_args(clap::Command::new("keys"))
        .get_arguments()
        .map(|a| a.get_id().to_string())
        .filter(|id| id != "config")
        .collect()
}

fn section(path: &Path, name: &str) -> Result<toml::Table, CliError> {
    let text = fs::read_to_string(path).map_err(|e| CliError::Usage(format!("{}: {e}", path.display())))?;
    let mut doc: toml::Table =
        toml::from_str(&text).map_err(|e| CliError::Usage(format!("{}: {e}", path.display())))?;
    match doc.remove(name) {
        Some(toml::Value::Table(t)) => Ok(t),
        Some(_) => Err(CliError::Usage(format!("{}: `{name}` must be a table", path.display()))),
        None => Ok(toml::Table::new()),
    }
}

/// Resolves settings for command `name`: the `[name]` table of the config
/// file, overridden by every flag that was given.
pub fn resolve<F, C>(name: &str, file: Option<&Path>, flags: &F) -> Result<C, CliError>
where
    F: clap::Args + Serialize,
    C: DeserializeOwned,
{
    let mut table = match file {
        Some(p) => section(p, name)?,
        None => toml::Table::new(),
    };
    let known = known_keys::<F>();
    if let Some(bad) = table.keys().find(|k| !known.contains(*k)) {
        return Err(CliError::Usage(format!("unknown key `{bad}` in [{name}]")));
    }
    let given = toml::Table::try_from(flags).map_err(|e| CliError::Usage(e.to_string()))?;
    table.extend(given);
    toml::Value::Table(table)
        .try_into()
        .map_err(|e: toml::de::Error| CliError::Usage(format!("[{name}]: {}", e.message())))
}

/// Writes `settings` as the `[name]` table of `dir/resolved-config.toml`.
pub fn write_snapshot<C: Serialize>(dir: &Path, name: &str, settings: &C) -> Result<(), CliError> {
    let path = dir.join(SNAPSHOT_FILE);
    let value = toml::Value::try_from(settings).map_err(|e| CliError::output(&path, e))?;
    let mut doc = toml::Table::new();
    doc.insert(name.to_string(), value);
    let text = toml::to_string(&doc).map_err(|e| CliError::output(&path, e))?;
    fs::write(&path, text).map_err(|e| CliError::output(&path, e))
}

pub fn create_dir(dir: &Path) -> Result<(), CliError> {
    fs::create_dir_all(dir).map_err(|e| CliError::output(dir, e))
}

/// Logical processors, capped at 8.
pub fn default_workers() -> usize {
    std::thread::available_parallelism().map_or(1, |n| n.get()).min(8)
}
