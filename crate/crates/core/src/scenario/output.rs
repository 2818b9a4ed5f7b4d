use std::fs;
use std::io::Write;
use std::path::{Path, PathBuf};

use serde::Serialize;

use super::config::{OutputFormat, ScenarioConfig};
use super::runner::{CheckResult, CommandOutcome, RunError, Table};

/// Writes `bytes` to a sibling temporary file and renames it into place.
pub fn write_atomic(path: &Path, bytes: &[u8]) -> Result<(), RunError> {
    let dir = path.parent().filter(|p| !p.as_os_str().is_empty()).unwrap_or(Path::new("."));
    fs::create_dir_all(dir)?;
    let name = path
        .file_name()
        .ok_or_else(|| RunError::Io(format!("{} has no file name", path.display())))?;
    let tmp = dir.join(format!(".{}.tmp", name.to_string_lossy()));
    {
        let mut f = fs::File::create(&tmp)?;
        f.write_all(bytes)?;
        f.sync_all()?;
    }
    fs::rename(&tmp, path)?;
    Ok(())
}

pub fn table_to_csv(table: &Table) -> Result<Vec<u8>, RunError> {
    let mut w = csv::Writer::from_writer(Vec::new());
    w.write_record(&table.header)?;
    for row in &table.rows {
        w.write_record(row)?;
    }
    w.into_inner().map_err(|e| RunError::Io(e.to_string()))
}

#[derive(Debug, Clone, Serialize)]
pub struct RunManifest {
    pub command: String,
    pub config_hash: String,
    pub code_version: String,
    pub base_seed: u64,
    pub seeds: Vec<u64>,
    pub wall_seconds: f64,
    pub checks: Vec<CheckResult>,
    pub passed: bool,
    pub outputs: Vec<String>,
}

/// Writes tables and summaries in the configured formats, then the manifest.
pub fn write_outcome(
    outcome: &CommandOutcome,
    config: &ScenarioConfig,
    seeds: &[u64],
    dir: &Path,
) -> Result<Vec<PathBuf>, RunError> {
    let mut written = Vec::new();
    for format in &config.outputs.formats {
        match format {
            OutputFormat::Csv => {
                for table in &outcome.tables {
                    let path = dir.join(format!("{}.csv", table.name));
                    write_atomic(&path, &table_to_csv(table)?)?;
                    written.push(path);
                }
            }
            OutputFormat::Json => {
                let path = dir.join(format!("{}_summary.json", outcome.command));
                let body = serde_json::json!({
                    "command": outcome.command,
                    "checks": outcome.checks,
                    "summary": outcome.summary,
                });
                write_atomic(&path, serde_json::to_string_pretty(&body).expect("json").as_bytes())?;
                written.push(path);
            }
        }
    }
    let manifest = RunManifest {
        command: outcome.command.clone(),
        config_hash: config.hash(),
        code_version: env!("CARGO_PKG_VERSION").to_string(),
        base_seed: config.mc.seed,
        seeds: seeds.to_vec(),
        wall_seconds: outcome.wall_seconds,
        checks: outcome.checks.clone(),
        passed: outcome.passed(),
        outputs: written
            .iter()
            .filter_map(|p| p.file_name().map(|n| n.to_string_lossy().into_owned()))
            .collect(),
    };
    let path = dir.join(format!("{}_manifest.json", outcome.command));
    write_atomic(&path, serde_json::to_string_pretty(&manifest).expect("json").as_bytes())?;
    written.push(path);
    Ok(written)
}
