//! Run manifests: what went in, which spec and seed were used, what came
//! out.

use std::fs;
use std::path::{Path, PathBuf};
use std::time::{Instant, SystemTime, UNIX_EPOCH};

use serde::Serialize;
use serde_json::Value;
use sha2::{Digest, Sha256};

use crate::ctv::{raw_path, write_atomic};
use crate::error::{Error, Result};

#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct FileDigest {
    pub path: PathBuf,
    pub sha256: String,
}

impl FileDigest {
    pub fn of(path: &Path) -> Result<Self> {
        let bytes = fs::read(path).map_err(|e| Error::io(path, e))?;
        Ok(Self {
            path: path.to_path_buf(),
            sha256: hex::encode(Sha256::digest(&bytes)),
        })
    }
}

#[derive(Debug, Clone, Serialize)]
pub struct Timing {
    pub started_unix_ms: u128,
    pub elapsed_ms: f64,
}

#[derive(Debug, Clone, Serialize)]
pub struct RunManifest {
    pub tool: &'static str,
    pub version: &'static str,
    pub command: String,
    pub arguments: Vec<String>,
    pub inputs: Vec<FileDigest>,
    pub specs: Vec<FileDigest>,
    pub effective_spec: Option<Value>,
    pub seed: Option<u64>,
    pub outputs: Vec<PathBuf>,
    pub timing: Timing,
}

pub struct ManifestBuilder {
    manifest: RunManifest,
    start: Instant,
}

impl ManifestBuilder {
    pub fn new(command: &str) -> Self {
        let started_unix_ms = SystemTime::now()
            .duration_since(UNIX_EPOCH)
            .map(|d| d.as_millis())
            .unwrap_or(0);
        Self {
            manifest: RunManifest {
                tool: env!("CARGO_PKG_NAME"),
                version: env!("CARGO_PKG_VERSION"),
                command: command.into(),
                arguments: std::env::args().skip(1).collect(),
                inputs: Vec::new(),
                specs: Vec::new(),
                effective_spec: None,
                seed: None,
                outputs: Vec::new(),
                timing: Timing {
                    started_unix_ms,
                    elapsed_ms: 0.0,
                },
            },
            start: Instant::now(),
        }
    }

    /// Records a file, plus the raw payload of a CTV header.
    pub fn input(&mut self, path: &Path) -> Result<()> {
        self.manifest.inputs.push(FileDigest::of(path)?);
        if path.extension().is_some_and(|e| e == "ctv") {
            let raw = raw_path(path);
            if raw.exists() {
                self.manifest.inputs.push(FileDigest::of(&raw)?);
            }
        }
        Ok(())
    }

    pub fn spec(&mut self, path: &Path) -> Result<()> {
        self.manifest.specs.push(FileDigest::of(path)?);
        Ok(())
    }

    pub fn effective_spec(&mut self, spec: Value) {
        self.manifest.effective_spec = Some(spec);
    }

    pub fn seed(&mut self, seed: u64) {
        self.manifest.seed = Some(seed);
    }

    pub fn output(&mut self, path: &Path) {
        self.manifest.outputs.push(path.to_path_buf());
    }

    pub fn finish(mut self, path: &Path) -> Result<RunManifest> {
        self.manifest.timing.elapsed_ms = self.start.elapsed().as_secs_f64() * 1e3;
        let mut text = serde_json::to_vec_pretty(&self.manifest)
            .map_err(|e| Error::Internal(e.to_string()))?;
        text.push(b'\n');
        write_atomic(path, &text)?;
        Ok(self.manifest)
    }
}

/// `report.json` gets `report.json.manifest.json`; a directory gets
/// `dir/manifest.json`.
pub fn manifest_path_for(out: &Path, is_dir: bool) -> PathBuf {
    if is_dir {
        out.join("manifest.json")
    } else {
        let mut s = out.as_os_str().to_owned();
        s.push(".manifest.json");
        PathBuf::from(s)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn digests_ctv_header_and_payload() {
        let dir = tempfile::tempdir().unwrap();
        let h = dir.path().join("a.ctv");
        fs::write(&h, b"abc").unwrap();
        fs::write(raw_path(&h), b"").unwrap();
        let mut b = ManifestBuilder::new("test");
        b.input(&h).unwrap();
        b.seed(7);
        let out = dir.path().join("m.json");
        let m = b.finish(&out).unwrap();
        assert_eq!(m.inputs.len(), 2);
        assert_eq!(
            m.inputs[0].sha256,
            "ba7816bf8f01cfea414140de5dae2223b00361a396177a9cb410ff61f20015ad"
        );
        assert_eq!(
            m.inputs[1].sha256,
            "e3b0c44298fc1c149afbf4c8996fb92427ae41e4649b934ca495991b7852b855"
        );
        let json: Value = serde_json::from_slice(&fs::read(out).unwrap()).unwrap();
        assert_eq!(json["seed"], 7);
        assert_eq!(json["tool"], "ctwindow");
    }

    #[test]
    fn manifest_locations() {
        assert_eq!(
            manifest_path_for(Path::new("r/report.json"), false),
            PathBuf::from("r/report.json.manifest.json")
        );
        assert_eq!(
            manifest_path_for(Path::new("out"), true),
            PathBuf::from("out/manifest.json")
        );
    }
}
