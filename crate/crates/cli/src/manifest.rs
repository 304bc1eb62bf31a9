use std::collections::BTreeMap;
use std::fs;
use std::path::{Path, PathBuf};
use std::time::{Instant, SystemTime, UNIX_EPOCH};

use serde::Serialize;
use sha2::{Digest, Sha256};

use crate::CliError;

pub const MANIFEST_FILE: &str = "manifest.json";

#[derive(Debug, Serialize)]
pub struct OutputFile {
    pub path: String,
    pub bytes: u64,
    pub sha256: String,
}

/// Record of one run. Everything except `started_unix_seconds` and
/// `wall_clock_seconds` is a function of the inputs.
#[derive(Debug, Serialize)]
pub struct RunManifest {
    pub tool: &'static str,
    pub version: &'static str,
    pub command: &'static str,
    pub input: String,
    pub input_sha256: String,
    pub seeds: Vec<u64>,
    pub threads: usize,
    pub tol: Option<f64>,
    pub started_unix_seconds: u64,
    pub wall_clock_seconds: f64,
    /// Certified error bounds keyed by operation.
    pub error_bounds: BTreeMap<String, f64>,
    pub outputs: Vec<OutputFile>,
    pub exit_code: i32,
}

pub fn sha256_hex(bytes: &[u8]) -> String {
    hex::encode(Sha256::digest(bytes))
}

/// Collects outputs while a command runs and writes the manifest last.
pub struct Recorder {
    out_dir: PathBuf,
    started: Instant,
    started_unix: u64,
    pub manifest: RunManifest,
}

impl Recorder {
    pub fn new(command: &'static str, input: &Path, input_bytes: &[u8], out_dir: &Path) -> Result<Self, CliError> {
        fs::create_dir_all(out_dir).map_err(|e| CliError::io(out_dir, e))?;
        let started_unix = SystemTime::now()
            .duration_since(UNIX_EPOCH)
            .map(|d| d.as_secs())
            .unwrap_or(0);
        Ok(Self {
            out_dir: out_dir.to_path_buf(),
            started: Instant::now(),
            started_unix,
            manifest: RunManifest {
                tool: "isoheat",
                version: env!("CARGO_PKG_VERSION"),
                command,
                input: input.display().to_string(),
                input_sha256: sha256_hex(input_bytes),
                seeds: Vec::new(),
                threads: rayon::current_num_threads(),
                tol: None,
                started_unix_seconds: started_unix,
                wall_clock_seconds: 0.0,
                error_bounds: BTreeMap::new(),
                outputs: Vec::new(),
                exit_code: 0,
            },
        })
    }

    /// Writes `bytes` to `name` inside the output directory and records it.
    pub fn write(&mut self, name: &str, bytes: &[u8]) -> Result<(), CliError> {
        let path = self.out_dir.join(name);
        fs::write(&path, bytes).map_err(|e| CliError::io(&path, e))?;
        self.manifest.outputs.push(OutputFile {
            path: name.to_string(),
            bytes: bytes.len() as u64,
            sha256: sha256_hex(bytes),
        });
        Ok(())
    }

    pub fn write_json<T: Serialize>(&mut self, name: &str, value: &T) -> Result<(), CliError> {
        let mut text = serde_json::to_vec_pretty(value)?;
        text.push(b'\n');
        self.write(name, &text)
    }

    pub fn finish(mut self, exit_code: i32) -> Result<(), CliError> {
        self.manifest.exit_code = exit_code;
        self.manifest.started_unix_seconds = self.started_unix;
        self.manifest.wall_clock_seconds = self.started.elapsed().as_secs_f64();
        let mut text = serde_json::to_vec_pretty(&self.manifest)?;
        text.push(b'\n');
        let path = self.out_dir.join(MANIFEST_FILE);
        fs::write(&path, text).map_err(|e| CliError::io(&path, e))
    }
}
