use std::path::Path;

use fanerv::pipeline::RunConfig;
use fanerv::training::Ablation;
use serde_json::Value;

use crate::error::{CliError, CliResult};

/// Flags that override individual config keys.
#[derive(Debug, Default, Clone)]
pub struct Overrides {
    pub seed: Option<u64>,
    pub bits: Option<u32>,
    pub ablation: Option<Ablation>,
    pub set: Vec<String>,
}

/// TOML when the file ends in `.toml`, JSON otherwise; defaults when no
/// file is given.
pub fn load_config(path: Option<&Path>, ov: &Overrides) -> CliResult<RunConfig> {
    let base = match path {
        None => Value::Object(Default::default()),
        Some(p) => {
            let text = std::fs::read_to_string(p).map_err(|e| CliError::ConfigFile {
                path: p.to_path_buf(),
                detail: e.to_string(),
            })?;
            let parsed = if p.extension().is_some_and(|e| e == "toml") {
                toml::from_str::<toml::Value>(&text)
                    .map_err(|e| e.to_string())
                    .and_then(|v| serde_json::to_value(v).map_err(|e| e.to_string()))
            } else {
                serde_json::from_str::<Value>(&text).map_err(|e| e.to_string())
            };
            parsed.map_err(|detail| CliError::ConfigFile {
                path: p.to_path_buf(),
                detail,
            })?
        }
    };
    let mut pairs = Vec::new();
    for s in &ov.set {
        let (k, v) = s.split_once('=').ok_or_else(|| CliError::Override(s.clone()))?;
        pairs.push((k.trim().to_string(), v.trim().to_string()));
    }
    if let Some(seed) = ov.seed {
        pairs.push(("train.seed".into(), seed.to_string()));
    }
    if let Some(bits) = ov.bits {
        pairs.push(("bits".into(), bits.to_string()));
    }
    if let Some(a) = ov.ablation {
        pairs.push(("ablation".into(), format!("\"{a}\"")));
    }
    Ok(RunConfig::from_value(base, &pairs)?)
}
