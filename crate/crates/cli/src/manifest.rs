use std::path::{Path, PathBuf};

use serde::Serialize;
use sha2::{Digest, Sha256};

#[derive(Debug, Clone, Serialize)]
pub struct InputDigest {
    pub path: String,
    pub sha256: String,
}

#[derive(Debug, Clone, Serialize)]
pub struct Versions {
    pub gridfreq: &'static str,
    pub cli: &'static str,
}

/// Record of one invocation: enough to rerun it and check its inputs.
#[derive(Debug, Clone, Serialize)]
pub struct RunManifest {
    pub command: String,
    pub inputs: Vec<InputDigest>,
    pub parameters: serde_json::Value,
    pub seed: Option<u64>,
    pub versions: Versions,
}

impl RunManifest {
    pub fn new(command: &str, parameters: impl Serialize, seed: Option<u64>) -> Self {
        Self {
            command: command.to_string(),
            inputs: Vec::new(),
            parameters: serde_json::to_value(parameters).unwrap_or(serde_json::Value::Null),
            seed,
            versions: Versions {
                gridfreq: gridfreq::VERSION,
                cli: env!("CARGO_PKG_VERSION"),
            },
        }
    }

    pub fn input(&mut self, path: &Path) -> std::io::Result<()> {
        let bytes = std::fs::read(path)?;
        self.inputs.push(InputDigest {
            path: path.display().to_string(),
            sha256: hex::encode(Sha256::digest(&bytes)),
        });
        Ok(())
    }

    /// Digest of a built-in dataset, labelled `path`.
    pub fn builtin(&mut self, label: &str, bytes: &[u8]) {
        self.inputs.push(InputDigest {
            path: label.to_string(),
            sha256: hex::encode(Sha256::digest(bytes)),
        });
    }
}

/// `<out>.manifest.json` next to an output file.
pub fn sidecar(out: &Path, suffix: &str) -> PathBuf {
    let mut name = out
        .file_name()
        .map(|n| n.to_os_string())
        .unwrap_or_default();
    name.push(suffix);
    out.with_file_name(name)
}
