//! Atomic artifact writes, content digests, and per-stage reports.

use std::collections::BTreeMap;
use std::path::{Path, PathBuf};
use std::time::Instant;

use serde::Serialize;
use sha2::{Digest, Sha256};

use crate::CliError;

/// Write through a temp file in the same directory, then rename into place.
pub fn write_atomic(path: &Path, bytes: &[u8]) -> Result<(), CliError> {
    if let Some(parent) = path.parent() {
        std::fs::create_dir_all(parent)?;
    }
    let tmp = path.with_extension(match path.extension() {
        Some(ext) => format!("{}.tmp", ext.to_string_lossy()),
        None => "tmp".to_string(),
    });
    std::fs::write(&tmp, bytes)?;
    std::fs::rename(&tmp, path)?;
    Ok(())
}

pub fn sha256_file(path: &Path) -> Result<String, CliError> {
    let bytes = std::fs::read(path)?;
    Ok(hex::encode(Sha256::digest(&bytes)))
}

/// What a stage consumed and produced, with digests and wall time.
#[derive(Debug, Serialize)]
pub struct StageReport {
    pub stage: String,
    pub duration_ms: u128,
    pub inputs: BTreeMap<String, String>,
    pub outputs: BTreeMap<String, String>,
}

pub struct StageRun {
    stage: String,
    started: Instant,
    inputs: Vec<PathBuf>,
    outputs: Vec<PathBuf>,
}

impl StageRun {
    pub fn new(stage: &str) -> Self {
        log::info!("stage {stage}: start");
        StageRun {
            stage: stage.to_string(),
            started: Instant::now(),
            inputs: Vec::new(),
            outputs: Vec::new(),
        }
    }

    /// Record an input artifact, failing with the prerequisite exit code when
    /// it does not exist.
    pub fn input(&mut self, path: &Path) -> Result<(), CliError> {
        if !path.exists() {
            return Err(CliError::Missing(format!(
                "stage {} requires missing artifact {}",
                self.stage,
                path.display()
            )));
        }
        self.inputs.push(path.to_path_buf());
        Ok(())
    }

    /// Record an input that comes from user configuration (validated there).
    pub fn config_input(&mut self, path: &Path) {
        self.inputs.push(path.to_path_buf());
    }

    pub fn output(&mut self, path: &Path) {
        self.outputs.push(path.to_path_buf());
    }

    /// Digest everything, write `reports/<stage>.json`, return the report.
    pub fn finish(self, out_dir: &Path) -> Result<StageReport, CliError> {
        let digest_all = |paths: &[PathBuf]| -> Result<BTreeMap<String, String>, CliError> {
            paths
                .iter()
                .map(|p| Ok((p.display().to_string(), sha256_file(p)?)))
                .collect()
        };
        let report = StageReport {
            stage: self.stage.clone(),
            duration_ms: self.started.elapsed().as_millis(),
            inputs: digest_all(&self.inputs)?,
            outputs: digest_all(&self.outputs)?,
        };
        let path = out_dir.join("reports").join(format!("{}.json", self.stage));
        let json = serde_json::to_vec_pretty(&report)
            .map_err(|e| CliError::Other(format!("serialize report: {e}")))?;
        write_atomic(&path, &json)?;
        log::info!("stage {}: done in {} ms", report.stage, report.duration_ms);
        Ok(report)
    }
}
