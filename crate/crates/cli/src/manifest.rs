use std::collections::BTreeMap;
use std::fs;
use std::path::{Path, PathBuf};

use serde::Serialize;
use serde_json::Value;
use sha2::{Digest, Sha256};

use fanerv::fsutil::write_atomic;

use crate::error::CliResult;

/// Record of one command invocation, written as JSON next to its outputs.
#[derive(Debug, Serialize)]
pub struct RunManifest {
    pub command: String,
    pub config: Option<Value>,
    pub seed: Option<u64>,
    pub fingerprint: Option<String>,
    pub deterministic: bool,
    pub inputs: Vec<PathBuf>,
    /// SHA-256 over the input contents and the config snapshot.
    pub input_hash: String,
    pub artifacts: BTreeMap<String, PathBuf>,
    pub timings_s: BTreeMap<String, f64>,
    pub metrics: BTreeMap<String, Value>,
}

impl RunManifest {
    pub fn new(command: &str, inputs: &[&Path], config: Option<Value>) -> CliResult<Self> {
        let mut h = Sha256::new();
        for p in inputs {
            hash_path(&mut h, p)?;
        }
        if let Some(c) = &config {
            h.update(serde_json::to_vec(c)?);
        }
        Ok(Self {
            command: command.into(),
            seed: config
                .as_ref()
                .and_then(|c| c.pointer("/train/seed"))
                .and_then(Value::as_u64),
            config,
            fingerprint: None,
            deterministic: crate::deterministic(),
            inputs: inputs.iter().map(|p| p.to_path_buf()).collect(),
            input_hash: hex(&h.finalize()),
            artifacts: BTreeMap::new(),
            timings_s: BTreeMap::new(),
            metrics: BTreeMap::new(),
        })
    }

    pub fn metric(&mut self, key: &str, value: impl Serialize) {
        self.metrics
            .insert(key.into(), serde_json::to_value(value).unwrap_or(Value::Null));
    }

    pub fn write(&self, path: &Path) -> CliResult<()> {
        let mut bytes = serde_json::to_vec_pretty(self)?;
        bytes.push(b'\n');
        write_atomic(path, &bytes)?;
        Ok(())
    }
}

fn hash_path(h: &mut Sha256, p: &Path) -> CliResult<()> {
    let io = |e| fanerv::Error::Io {
        path: p.to_path_buf(),
        source: e,
    };
    if p.is_dir() {
        let mut entries: Vec<PathBuf> = fs::read_dir(p)
            .map_err(io)?
            .filter_map(|e| e.ok().map(|e| e.path()))
            .filter(|e| e.is_file())
            .collect();
        entries.sort();
        for e in entries {
            h.update(e.file_name().map(|n| n.as_encoded_bytes()).unwrap_or_default());
            h.update(fanerv::fsutil::read_file(&e)?);
        }
    } else if p.exists() {
        h.update(fanerv::fsutil::read_file(p)?);
        let side = fanerv::video_io::sidecar_path(p);
        if side.exists() {
            h.update(fanerv::fsutil::read_file(&side)?);
        }
    }
    Ok(())
}

fn hex(bytes: &[u8]) -> String {
    bytes.iter().map(|b| format!("{b:02x}")).collect()
}
