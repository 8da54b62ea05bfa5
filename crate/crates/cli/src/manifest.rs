use std::fmt::Write as _;
use std::fs;
use std::path::{Path, PathBuf};
use std::time::{SystemTime, UNIX_EPOCH};

use serde::Serialize;
use sha2::{Digest, Sha256};

use crate::Fail;

/// Where the master seed came from.
#[derive(Debug, Clone, Copy, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum SeedSource {
    Flag,
    Config,
    Checkpoint,
    Fresh,
}

#[derive(Debug, Serialize)]
pub struct InputFile {
    pub role: String,
    pub path: PathBuf,
    pub sha256: String,
}

/// Everything needed to replay a command: its arguments, resolved seed,
/// effective configuration and digests of its inputs.
#[derive(Debug, Serialize)]
pub struct RunManifest {
    pub command: String,
    pub version: &'static str,
    pub argv: Vec<String>,
    pub config_path: Option<PathBuf>,
    pub inputs: Vec<InputFile>,
    pub output_dir: Option<PathBuf>,
    pub seed: u64,
    pub seed_source: SeedSource,
    pub timestamp_unix: u64,
    pub config: serde_json::Value,
}

impl RunManifest {
    pub fn new(command: &str, seed: u64, seed_source: SeedSource) -> Self {
        RunManifest {
            command: command.into(),
            version: env!("CARGO_PKG_VERSION"),
            argv: std::env::args().collect(),
            config_path: None,
            inputs: Vec::new(),
            output_dir: None,
            seed,
            seed_source,
            timestamp_unix: SystemTime::now().duration_since(UNIX_EPOCH).map_or(0, |d| d.as_secs()),
            config: serde_json::Value::Null,
        }
    }

    pub fn input(&mut self, role: &str, path: &Path) -> Result<(), Fail> {
        let bytes = fs::read(path).map_err(|e| Fail::io(path, e))?;
        let mut hex = String::with_capacity(64);
        for b in Sha256::digest(&bytes) {
            let _ = write!(hex, "{b:02x}");
        }
        self.inputs.push(InputFile {
            role: role.into(),
            path: path.to_path_buf(),
            sha256: hex,
        });
        Ok(())
    }

    pub fn config(&mut self, value: &impl Serialize) {
        self.config = serde_json::to_value(value).expect("config serializes");
    }

    /// Writes `manifest.json` into `dir`, or logs it when there is no output
    /// directory.
    pub fn write(&mut self, dir: Option<&Path>) -> Result<(), Fail> {
        self.output_dir = dir.map(Path::to_path_buf);
        let text = serde_json::to_string_pretty(self).expect("manifest serializes");
        match dir {
            Some(dir) => write_file(&dir.join("manifest.json"), &text),
            None => {
                log::info!("manifest: {text}");
                Ok(())
            }
        }
    }
}

/// A seed that is not reproducible on its own; it is recorded in the manifest.
pub fn fresh_seed() -> u64 {
    use std::hash::{BuildHasher, Hasher};
    let mut h = std::collections::hash_map::RandomState::new().build_hasher();
    h.write_u128(SystemTime::now().duration_since(UNIX_EPOCH).map_or(0, |d| d.as_nanos()));
    h.write_u32(std::process::id());
    h.finish()
}

pub fn create_dir(dir: &Path) -> Result<(), Fail> {
    fs::create_dir_all(dir).map_err(|e| Fail::io(dir, e))?;
    // surface unwritable directories before any work is done
    let probe = dir.join(".metastruct-write-test");
    fs::write(&probe, b"").map_err(|e| Fail::io(dir, e))?;
    let _ = fs::remove_file(probe);
    Ok(())
}

pub fn write_file(path: &Path, text: &str) -> Result<(), Fail> {
    fs::write(path, text).map_err(|e| Fail::io(path, e))
}
