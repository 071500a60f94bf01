//! Run manifests: everything needed to regenerate a command's outputs.

use std::fs;
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::output::{io_error, CliError, CliResult};

pub const MANIFEST_NAME: &str = "manifest.json";

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct RunManifest {
    pub tool: String,
    pub version: String,
    pub command: String,
    pub seed: Option<u64>,
    /// Fully resolved parameters of the command.
    pub params: serde_json::Value,
    /// Output files, relative to the manifest's directory.
    pub outputs: Vec<String>,
}

impl RunManifest {
    pub fn new(command: &str, seed: Option<u64>, params: serde_json::Value, outputs: Vec<String>) -> Self {
        RunManifest {
            tool: "betaproc".into(),
            version: betaproc_core::VERSION.into(),
            command: command.into(),
            seed,
            params,
            outputs,
        }
    }

    pub fn write(&self, dir: &Path) -> CliResult<()> {
        let path = dir.join(MANIFEST_NAME);
        let mut text = serde_json::to_string_pretty(self).map_err(|e| CliError::Io(e.to_string()))?;
        text.push('\n');
        fs::write(&path, text).map_err(|e| io_error(&path, e))
    }

    pub fn read(path: &Path) -> CliResult<Self> {
        let text = fs::read_to_string(path).map_err(|e| io_error(path, e))?;
        let m: RunManifest =
            serde_json::from_str(&text).map_err(|e| CliError::usage(format!("{}: malformed manifest: {e}", path.display())))?;
        if m.tool != "betaproc" {
            return Err(CliError::usage(format!("{}: not a betaproc manifest", path.display())));
        }
        if m.version != betaproc_core::VERSION {
            log::warn!("manifest written by betaproc {}, replaying with {}", m.version, betaproc_core::VERSION);
        }
        Ok(m)
    }

    pub fn params<T: serde::de::DeserializeOwned>(&self) -> CliResult<T> {
        serde_json::from_value(self.params.clone())
            .map_err(|e| CliError::usage(format!("manifest parameters for {}: {e}", self.command)))
    }
}
