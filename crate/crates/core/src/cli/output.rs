//! Atomic output files and the run manifest that lists them.

use std::collections::BTreeMap;
use std::io::Write;
use std::path::{Path, PathBuf};
use std::time::Instant;

use serde::Serialize;
use serde_json::Value;
use sha2::{Digest, Sha256};

use crate::error::{Error, Result};

/// Column or field name to unit.
pub type Units = BTreeMap<&'static str, &'static str>;

pub fn units(pairs: &[(&'static str, &'static str)]) -> Units {
    pairs.iter().copied().collect()
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum SeedSource {
    Default,
    Flag,
    Config,
    Entropy,
}

#[derive(Debug, Clone, Serialize)]
pub struct InputDigest {
    pub path: String,
    pub sha256: String,
    pub bytes: u64,
}

#[derive(Debug, Clone, Serialize)]
pub struct OutputRecord {
    pub file: String,
    pub sha256: String,
    pub bytes: u64,
    pub units: Units,
}

#[derive(Debug, Clone, Serialize)]
pub struct RunManifest {
    pub manifest_id: String,
    pub command: &'static str,
    pub version: &'static str,
    pub seed: u64,
    pub seed_source: SeedSource,
    pub parameters: Value,
    pub inputs: Vec<InputDigest>,
    pub outputs: Vec<OutputRecord>,
    /// Recorded only with `--timing`, since it differs between reruns.
    pub wall_clock_seconds: Option<f64>,
}

fn sha256_hex(bytes: &[u8]) -> String {
    format!("{:x}", Sha256::digest(bytes))
}

/// Write through a temporary file in the same directory, then rename.
pub fn write_atomic(path: &Path, bytes: &[u8]) -> Result<()> {
    let dir = path.parent().filter(|p| !p.as_os_str().is_empty()).unwrap_or(Path::new("."));
    let mut tmp = tempfile::NamedTempFile::new_in(dir)?;
    tmp.write_all(bytes)?;
    tmp.as_file().sync_all()?;
    #[cfg(unix)]
    {
        use std::os::unix::fs::PermissionsExt;
        std::fs::set_permissions(tmp.path(), std::fs::Permissions::from_mode(0o644))?;
    }
    tmp.persist(path).map_err(|e| Error::Io(e.error))?;
    Ok(())
}

/// `std::fs::read` with the path in the error message.
pub fn read_file(path: &Path) -> Result<Vec<u8>> {
    std::fs::read(path).map_err(|e| Error::Io(std::io::Error::new(e.kind(), format!("{}: {e}", path.display()))))
}

/// One command invocation: collects input digests and output records and
/// finally writes `<stem>.manifest.json` next to the outputs.
pub struct Run {
    dir: PathBuf,
    stem: String,
    command: &'static str,
    seed: u64,
    seed_source: SeedSource,
    parameters: Value,
    inputs: Vec<InputDigest>,
    outputs: Vec<OutputRecord>,
    started: Instant,
    timing: bool,
}

impl Run {
    pub fn new(dir: &Path, stem: &str, command: &'static str, seed: u64, seed_source: SeedSource, parameters: Value, timing: bool) -> Result<Self> {
        std::fs::create_dir_all(dir)?;
        Ok(Run {
            dir: dir.to_path_buf(),
            stem: stem.to_string(),
            command,
            seed,
            seed_source,
            parameters,
            inputs: Vec::new(),
            outputs: Vec::new(),
            started: Instant::now(),
            timing,
        })
    }

    pub fn stem(&self) -> &str {
        &self.stem
    }

    pub fn seed(&self) -> u64 {
        self.seed
    }

    pub fn manifest_file(&self) -> String {
        format!("{}.manifest.json", self.stem)
    }

    /// Read a whole input file and record its digest.
    pub fn read_input(&mut self, path: &Path) -> Result<Vec<u8>> {
        let bytes = read_file(path)?;
        self.record_input(path, &bytes);
        Ok(bytes)
    }

    /// Record the digest of input bytes read elsewhere.
    pub fn record_input(&mut self, path: &Path, bytes: &[u8]) {
        self.inputs.push(InputDigest {
            path: path.display().to_string(),
            sha256: sha256_hex(bytes),
            bytes: bytes.len() as u64,
        });
    }

    /// Identifies the run by everything that determines its outputs.
    pub fn id(&self) -> String {
        let key = serde_json::json!({
            "command": self.command,
            "version": env!("CARGO_PKG_VERSION"),
            "seed": self.seed,
            "parameters": self.parameters,
            "inputs": self.inputs,
        });
        sha256_hex(key.to_string().as_bytes())[..16].to_string()
    }

    fn manifest_ref(&self) -> Value {
        serde_json::json!({ "id": self.id(), "file": self.manifest_file() })
    }

    pub fn write(&mut self, file: String, bytes: &[u8], units: Units) -> Result<()> {
        write_atomic(&self.dir.join(&file), bytes)?;
        log::info!("wrote {}", self.dir.join(&file).display());
        self.outputs.push(OutputRecord {
            sha256: sha256_hex(bytes),
            bytes: bytes.len() as u64,
            file,
            units,
        });
        Ok(())
    }

    /// Serialize `value` (a JSON object) with a `manifest` reference added.
    pub fn tagged(&self, value: &impl Serialize) -> Result<Value> {
        let mut v = serde_json::to_value(value)?;
        match v.as_object_mut() {
            Some(obj) => {
                obj.insert("manifest".into(), self.manifest_ref());
            }
            None => return Err(Error::invalid("output record must be a JSON object")),
        }
        Ok(v)
    }

    pub fn write_json(&mut self, file: String, value: &impl Serialize, units: Units) -> Result<()> {
        let v = self.tagged(value)?;
        let mut bytes = serde_json::to_vec_pretty(&v)?;
        bytes.push(b'\n');
        self.write(file, &bytes, units)
    }

    /// One JSON object per line.
    pub fn write_jsonl(&mut self, file: String, values: &[Value], units: Units) -> Result<()> {
        let mut bytes = Vec::new();
        for v in values {
            let mut v = v.clone();
            if let Some(obj) = v.as_object_mut() {
                obj.insert("manifest".into(), self.manifest_ref());
            }
            serde_json::to_writer(&mut bytes, &v)?;
            bytes.push(b'\n');
        }
        self.write(file, &bytes, units)
    }

    pub fn finish(self) -> Result<RunManifest> {
        let manifest = RunManifest {
            manifest_id: self.id(),
            command: self.command,
            version: env!("CARGO_PKG_VERSION"),
            seed: self.seed,
            seed_source: self.seed_source,
            parameters: self.parameters,
            inputs: self.inputs,
            outputs: self.outputs,
            wall_clock_seconds: self.timing.then(|| self.started.elapsed().as_secs_f64()),
        };
        let mut bytes = serde_json::to_vec_pretty(&manifest)?;
        bytes.push(b'\n');
        let path = self.dir.join(format!("{}.manifest.json", self.stem));
        write_atomic(&path, &bytes)?;
        log::info!("wrote {}", path.display());
        Ok(manifest)
    }
}
