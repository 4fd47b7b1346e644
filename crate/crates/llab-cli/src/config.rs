//! Experiment configuration, run manifests and the error type of the front end.

use std::fmt;
use std::path::{Path, PathBuf};

use clap::ValueEnum;
use lindelof_lab::LabError;
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

pub const CODE_VERSION: &str = concat!("llab ", env!("CARGO_PKG_VERSION"));
pub const MANIFEST_FILE: &str = "manifest.json";

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, ValueEnum)]
#[serde(rename_all = "snake_case")]
pub enum CommandName {
    Construct,
    Sample,
    Beurling,
    Zeta,
    Scan,
    Report,
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize, ValueEnum)]
#[serde(rename_all = "snake_case")]
pub enum Format {
    #[default]
    Csv,
    Json,
}

/// Everything needed to reproduce one run.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentConfig {
    pub command: CommandName,
    pub params: serde_json::Value,
    pub seed: u64,
    pub output_dir: PathBuf,
    pub format: Format,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct OutputFile {
    pub file: String,
    pub bytes: u64,
    pub sha256: String,
}

/// Written next to the outputs of every run.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Manifest {
    pub config: ExperimentConfig,
    pub code_version: String,
    pub outputs: Vec<OutputFile>,
}

#[derive(Debug)]
pub enum CliError {
    /// Schema or flag problems; exit status 2.
    Config(String),
    /// Failures reported by the library; exit status 1.
    Domain(LabError),
}

impl CliError {
    pub fn exit_code(&self) -> u8 {
        match self {
            CliError::Config(_) => 2,
            CliError::Domain(_) => 1,
        }
    }
}

impl fmt::Display for CliError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            CliError::Config(msg) => write!(f, "CONFIG_INVALID: {msg}"),
            CliError::Domain(e) => write!(f, "{}: {e}", e.name()),
        }
    }
}

impl From<LabError> for CliError {
    fn from(e: LabError) -> Self {
        CliError::Domain(e)
    }
}

impl From<std::io::Error> for CliError {
    fn from(e: std::io::Error) -> Self {
        CliError::Domain(e.into())
    }
}

pub fn config_err(msg: impl Into<String>) -> CliError {
    CliError::Config(msg.into())
}

impl ExperimentConfig {
    /// Parses a config file; a manifest is accepted too and yields its config.
    pub fn load(path: &Path) -> Result<Self, CliError> {
        let text = std::fs::read_to_string(path).map_err(|e| {
            if e.kind() == std::io::ErrorKind::NotFound {
                CliError::Domain(LabError::FileNotFound(path.display().to_string()))
            } else {
                CliError::Domain(e.into())
            }
        })?;
        let value: serde_json::Value =
            serde_json::from_str(&text).map_err(|e| config_err(format!("{}: {e}", path.display())))?;
        let inner = match value.get("config") {
            Some(c) if value.get("code_version").is_some() => c.clone(),
            _ => value,
        };
        serde_json::from_value(inner).map_err(|e| config_err(format!("{}: {e}", path.display())))
    }
}

pub fn sha256_hex(bytes: &[u8]) -> String {
    Sha256::digest(bytes).iter().map(|b| format!("{b:02x}")).collect()
}

/// Writes the manifest listing `files` (relative to the output directory).
pub fn write_manifest(config: &ExperimentConfig, files: &[String]) -> Result<(), CliError> {
    let mut outputs = Vec::with_capacity(files.len());
    for f in files {
        let bytes = std::fs::read(config.output_dir.join(f))?;
        outputs.push(OutputFile {
            file: f.clone(),
            bytes: bytes.len() as u64,
            sha256: sha256_hex(&bytes),
        });
    }
    let manifest = Manifest {
        config: config.clone(),
        code_version: CODE_VERSION.to_string(),
        outputs,
    };
    let mut text = serde_json::to_string_pretty(&manifest).expect("manifest serializes");
    text.push('\n');
    std::fs::write(config.output_dir.join(MANIFEST_FILE), text)?;
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn config_round_trips_bit_exactly() {
        let cfg = ExperimentConfig {
            command: CommandName::Zeta,
            params: serde_json::json!({"sigma": [0.1 + 0.2, 1.0 / 3.0, 5e-324], "tau": [1e300]}),
            seed: u64::MAX,
            output_dir: "out/dir".into(),
            format: Format::Json,
        };
        let text = serde_json::to_string_pretty(&cfg).unwrap();
        let back: ExperimentConfig = serde_json::from_str(&text).unwrap();
        assert_eq!(back, cfg);
        assert_eq!(serde_json::to_string_pretty(&back).unwrap(), text);
        let sigma = back.params["sigma"].as_array().unwrap();
        assert_eq!(sigma[0].as_f64().unwrap().to_bits(), (0.1f64 + 0.2).to_bits());
    }

    #[test]
    fn unknown_keys_are_rejected() {
        let text = r#"{"command":"scan","params":{},"seed":0,"output_dir":"o","format":"csv","extra":1}"#;
        assert!(serde_json::from_str::<ExperimentConfig>(text).is_err());
    }
}
