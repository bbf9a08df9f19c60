//! Result files and the run manifest.

use std::fmt::Write as _;
use std::fs;
use std::io::Write;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::config::ExperimentConfig;

/// Bumped whenever a file layout changes; golden fixtures are pinned to it.
pub const SCHEMA_VERSION: u32 = 1;
pub const CODE_VERSION: &str = env!("CARGO_PKG_VERSION");

pub fn sha256_hex(bytes: &[u8]) -> String {
    let digest = Sha256::digest(bytes);
    let mut s = String::with_capacity(64);
    for b in digest.iter() {
        write!(s, "{b:02x}").unwrap();
    }
    s
}

/// Hash of everything that determines the outputs: schema, code version and
/// the configuration apart from the output directory. Every result file
/// carries it.
pub fn manifest_hash(config: &ExperimentConfig) -> String {
    let mut config = serde_json::to_value(config).expect("configuration serializes");
    if let Some(c) = config.as_object_mut() {
        c.remove("out");
    }
    let inputs = serde_json::json!({
        "schema_version": SCHEMA_VERSION,
        "code_version": CODE_VERSION,
        "config": config,
    });
    sha256_hex(inputs.to_string().as_bytes())
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct OutputFile {
    pub path: String,
    pub sha256: String,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct RunManifest {
    pub schema_version: u32,
    pub code_version: String,
    pub manifest_hash: String,
    pub config: ExperimentConfig,
    /// Seeds actually drawn, in replicate order.
    pub seeds: serde_json::Value,
    pub replicates: usize,
    pub excluded: usize,
    pub exclusion_reasons: Vec<(usize, String)>,
    pub summary: serde_json::Value,
    pub workers: usize,
    pub wall_clock_seconds: f64,
    pub outputs: Vec<OutputFile>,
}

/// Writes files under the output directory, stamping each with the
/// manifest hash and recording its digest.
pub struct Output {
    root: PathBuf,
    hash: String,
    files: Vec<OutputFile>,
}

impl Output {
    pub fn create(root: &Path, hash: String) -> std::io::Result<Self> {
        fs::create_dir_all(root.join("results"))?;
        fs::create_dir_all(root.join("plot"))?;
        Ok(Self { root: root.to_path_buf(), hash, files: Vec::new() })
    }

    pub fn hash(&self) -> &str {
        &self.hash
    }

    fn put(&mut self, rel: String, bytes: &[u8]) -> std::io::Result<()> {
        fs::write(self.root.join(&rel), bytes)?;
        self.files.push(OutputFile { sha256: sha256_hex(bytes), path: rel });
        Ok(())
    }

    /// `results/<name>.csv`: a `#` line with `header` and the manifest hash,
    /// then whatever `body` writes.
    pub fn csv<F>(&mut self, name: &str, header: serde_json::Value, body: F) -> std::io::Result<()>
    where
        F: FnOnce(&mut Vec<u8>) -> std::io::Result<()>,
    {
        let mut head = serde_json::json!({ "manifest": self.hash });
        if let (Some(h), Some(e)) = (head.as_object_mut(), header.as_object()) {
            for (k, v) in e {
                h.insert(k.clone(), v.clone());
            }
        }
        let mut buf = Vec::new();
        writeln!(buf, "# {head}")?;
        body(&mut buf)?;
        self.put(format!("results/{name}.csv"), &buf)
    }

    /// `results/<name>.json` with the manifest hash as its first field.
    pub fn json(&mut self, name: &str, value: &serde_json::Value) -> std::io::Result<()> {
        let mut obj = serde_json::Map::new();
        obj.insert("manifest".into(), self.hash.clone().into());
        match value {
            serde_json::Value::Object(m) => obj.extend(m.clone()),
            other => {
                obj.insert("value".into(), other.clone());
            }
        }
        let mut buf = serde_json::to_vec_pretty(&serde_json::Value::Object(obj))?;
        buf.push(b'\n');
        self.put(format!("results/{name}.json"), &buf)
    }

    /// `plot/<name>.dat`: whitespace-separated `columns`, one row per entry.
    pub fn plot(&mut self, name: &str, columns: &[&str], rows: impl IntoIterator<Item = Vec<f64>>) -> std::io::Result<()> {
        let mut buf = Vec::new();
        writeln!(buf, "# manifest {}", self.hash)?;
        writeln!(buf, "# {}", columns.join(" "))?;
        for row in rows {
            let cells: Vec<String> = row.iter().map(|v| v.to_string()).collect();
            writeln!(buf, "{}", cells.join(" "))?;
        }
        self.put(format!("plot/{name}.dat"), &buf)
    }

    pub fn finish(self, manifest: impl FnOnce(Vec<OutputFile>) -> RunManifest) -> std::io::Result<RunManifest> {
        let root = self.root.clone();
        let m = manifest(self.files);
        let mut buf = serde_json::to_vec_pretty(&m)?;
        buf.push(b'\n');
        fs::write(root.join("manifest.json"), buf)?;
        Ok(m)
    }
}
