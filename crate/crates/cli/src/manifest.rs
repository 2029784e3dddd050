//! Run manifest written next to the outputs of every command.

use std::path::Path;

use serde::Serialize;
use sha2::{Digest, Sha256};

use crate::commands::Output;
use crate::CliError;

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct OutputRecord {
    pub file: String,
    pub sha256: String,
    pub rows: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct RunManifest {
    pub command: String,
    pub version: String,
    pub config_hash: String,
    pub seed: u64,
    pub workers: usize,
    pub outputs: Vec<OutputRecord>,
    pub wall_time_s: f64,
}

pub fn sha256_hex(bytes: &[u8]) -> String {
    hex::encode(Sha256::digest(bytes))
}

/// Writes every output into `dir` and returns their checksums.
pub fn write_outputs(dir: &Path, outputs: &[Output]) -> Result<Vec<OutputRecord>, CliError> {
    std::fs::create_dir_all(dir)?;
    outputs
        .iter()
        .map(|o| {
            std::fs::write(dir.join(&o.file), &o.csv)?;
            Ok(OutputRecord {
                file: o.file.clone(),
                sha256: sha256_hex(o.csv.as_bytes()),
                rows: o.rows,
            })
        })
        .collect()
}

impl RunManifest {
    pub fn write(&self, dir: &Path) -> Result<(), CliError> {
        let text = serde_json::to_string_pretty(self).expect("manifest serialises");
        std::fs::write(dir.join("manifest.json"), text + "\n")?;
        Ok(())
    }
}
