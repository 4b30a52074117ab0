//! The pipeline manifest: a JSON record of what each stage consumed and
//! produced, by content digest, plus the configuration it ran under.
//!
//! The manifest is what makes the pipeline idempotent and tamper-evident:
//! a stage whose recorded inputs, parameters, config, and outputs all still
//! digest-match is skipped without writing a byte, and a stage whose inputs
//! no longer match what their producer recorded fails with a stale-input
//! error instead of silently mixing generations of artifacts.
//!
//! `generated_at` (Unix seconds) is the only timestamp in any artifact and
//! never participates in digest comparisons; it changes only when the
//! manifest is actually rewritten.

use std::collections::BTreeMap;
use std::io;
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::fsutil::atomic_write;

/// What one stage consumed and produced, all as SHA-256 hex digests.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(deny_unknown_fields)]
pub struct StageRecord {
    /// Input path (as given on the command line) -> digest.
    pub inputs: BTreeMap<String, String>,
    /// Output artifact name (basename inside the output directory) -> digest.
    pub outputs: BTreeMap<String, String>,
    /// Stage parameters that affect the output (seed, proportions, backend,
    /// ...), rendered as strings.
    pub params: BTreeMap<String, String>,
    /// Digest of the canonical configuration the stage ran under.
    pub config_sha256: String,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Manifest {
    pub tool_version: String,
    /// Unix seconds of the last manifest write. Excluded from all
    /// comparisons.
    pub generated_at: u64,
    pub stages: BTreeMap<String, StageRecord>,
    /// Current digest of every artifact in the output directory, by name.
    /// When two stages can produce the same artifact (evaluate and ingest
    /// both emit evals.jsonl), this holds the latest producer's digest.
    pub artifacts: BTreeMap<String, String>,
}

impl Manifest {
    pub fn new(tool_version: &str) -> Manifest {
        Manifest {
            tool_version: tool_version.to_string(),
            generated_at: 0,
            stages: BTreeMap::new(),
            artifacts: BTreeMap::new(),
        }
    }

    pub fn load(path: &Path) -> io::Result<Manifest> {
        let bytes = std::fs::read(path)?;
        serde_json::from_slice(&bytes)
            .map_err(|e| io::Error::new(io::ErrorKind::InvalidData, e.to_string()))
    }

    /// Writes the manifest atomically as pretty JSON, refreshing
    /// `generated_at`.
    pub fn save(&mut self, path: &Path) -> io::Result<()> {
        self.generated_at = std::time::SystemTime::now()
            .duration_since(std::time::UNIX_EPOCH)
            .map(|d| d.as_secs())
            .unwrap_or(0);
        let mut bytes = serde_json::to_vec_pretty(self).expect("manifest serialization");
        bytes.push(b'\n');
        atomic_write(path, &bytes)
    }

    /// Records a completed stage and refreshes the artifact digests it
    /// produced.
    pub fn record_stage(&mut self, stage: &str, record: StageRecord) {
        for (name, digest) in &record.outputs {
            self.artifacts.insert(name.clone(), digest.clone());
        }
        self.stages.insert(stage.to_string(), record);
    }

    /// The stage that most recently produced `artifact`, if any.
    pub fn producer_of(&self, artifact: &str) -> Option<&str> {
        self.artifacts.get(artifact)?;
        self.stages
            .iter()
            .find(|(_, record)| {
                record.outputs.get(artifact) == self.artifacts.get(artifact)
            })
            .map(|(name, _)| name.as_str())
    }
}
