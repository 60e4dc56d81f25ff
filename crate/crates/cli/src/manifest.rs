//! Stage manifest: newline-delimited JSON, one record per stage run,
//! carrying input and output file hashes so a finished pipeline forms a
//! verifiable chain (each stage's recorded input hash must equal the
//! hash the producing stage recorded for that file).

use std::collections::BTreeMap;
use std::fs::{File, OpenOptions};
use std::io::{BufRead, BufReader, Read, Write};
use std::path::Path;

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::error::PipelineError;

pub const MANIFEST_FILE: &str = "manifest.jsonl";

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StageRecord {
    pub stage: String,
    pub seed: u64,
    pub duration_ms: u64,
    /// File name -> hex SHA-256 at read time.
    pub inputs: BTreeMap<String, String>,
    /// File name -> hex SHA-256 at write time.
    pub outputs: BTreeMap<String, String>,
}

pub fn sha256_hex_bytes(bytes: &[u8]) -> String {
    let mut hasher = Sha256::new();
    hasher.update(bytes);
    hasher
        .finalize()
        .iter()
        .map(|b| format!("{b:02x}"))
        .collect()
}

pub fn sha256_hex_file(path: &Path) -> Result<String, PipelineError> {
    let mut file = File::open(path).map_err(|e| {
        PipelineError::Data(format!("cannot hash {}: {e}", path.display()))
    })?;
    let mut hasher = Sha256::new();
    let mut buf = [0u8; 64 * 1024];
    loop {
        let n = file.read(&mut buf)?;
        if n == 0 {
            break;
        }
        hasher.update(&buf[..n]);
    }
    Ok(hasher
        .finalize()
        .iter()
        .map(|b| format!("{b:02x}"))
        .collect())
}

pub fn append_record(workdir: &Path, record: &StageRecord) -> Result<(), PipelineError> {
    let path = workdir.join(MANIFEST_FILE);
    let mut file = OpenOptions::new().create(true).append(true).open(&path)?;
    let line = serde_json::to_string(record)
        .map_err(|e| PipelineError::Data(format!("manifest encode: {e}")))?;
    writeln!(file, "{line}")?;
    Ok(())
}

pub fn read_manifest(workdir: &Path) -> Result<Vec<StageRecord>, PipelineError> {
    let path = workdir.join(MANIFEST_FILE);
    let file = File::open(&path).map_err(|e| {
        PipelineError::Data(format!("cannot read manifest {}: {e}", path.display()))
    })?;
    let mut records = Vec::new();
    for line in BufReader::new(file).lines() {
        let line = line?;
        if line.trim().is_empty() {
            continue;
        }
        records.push(
            serde_json::from_str(&line)
                .map_err(|e| PipelineError::Data(format!("manifest parse: {e}")))?,
        );
    }
    Ok(records)
}

/// Checks the hash chain: every input that some earlier stage produced
/// must carry exactly the hash that stage recorded. Returns the list of
/// violations (empty means the chain verifies).
pub fn verify_chain(records: &[StageRecord]) -> Vec<String> {
    let mut latest: BTreeMap<&str, (&str, &str)> = BTreeMap::new(); // file -> (hash, stage)
    let mut violations = Vec::new();
    for record in records {
        for (file, hash) in &record.inputs {
            if let Some((expected, producer)) = latest.get(file.as_str()) {
                if expected != hash {
                    violations.push(format!(
                        "stage {} read {} with hash {}, but stage {} wrote {}",
                        record.stage, file, hash, producer, expected
                    ));
                }
            }
        }
        for (file, hash) in &record.outputs {
            latest.insert(file, (hash, &record.stage));
        }
    }
    violations
}
