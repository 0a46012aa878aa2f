use std::path::Path;

use serde::Serialize;
use serde_json::{Map, Value};
use sha2::{Digest, Sha256};

use crate::error::CliError;

#[derive(Debug, Serialize)]
pub struct InputDigest {
    pub role: String,
    pub path: String,
    pub sha256: String,
}

/// Everything needed to re-run a command: resolved parameters, input digests,
/// the RNG seed and the tool version.
#[derive(Debug, Serialize)]
pub struct RunManifest {
    pub command: String,
    pub params: Map<String, Value>,
    pub inputs: Vec<InputDigest>,
    pub seed: Option<u64>,
    pub version: String,
}

impl RunManifest {
    pub fn new(command: &str, seed: Option<u64>) -> Self {
        Self {
            command: command.into(),
            params: Map::new(),
            inputs: Vec::new(),
            seed,
            version: env!("CARGO_PKG_VERSION").into(),
        }
    }

    pub fn param(&mut self, key: &str, value: impl Serialize) -> &mut Self {
        self.params.insert(key.into(), serde_json::to_value(value).expect("parameters serialize"));
        self
    }

    pub fn input(&mut self, role: &str, path: &Path) -> Result<&mut Self, CliError> {
        let bytes = std::fs::read(path).map_err(|e| CliError::io(&format!("reading {}", path.display()), e))?;
        let sha256 = Sha256::digest(&bytes).iter().map(|b| format!("{b:02x}")).collect();
        self.inputs.push(InputDigest { role: role.into(), path: path.display().to_string(), sha256 });
        Ok(self)
    }
}
