//! Artifact files and the run manifest.
//!
//! Artifacts are serde JSON compressed as an LZ4 frame, one file per name.
//! The manifest records each artifact's content hash, the config hash it was
//! produced under, and the hashes of the artifacts it was built from.

use std::collections::BTreeMap;
use std::io::{Read, Write};
use std::path::{Path, PathBuf};

use serde::de::DeserializeOwned;
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use super::config::hex;
use crate::error::{Error, Result};

pub const MANIFEST: &str = "manifest.json";

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ArtifactRecord {
    pub hash: String,
    pub config_hash: String,
    pub inputs: BTreeMap<String, String>,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct RunManifest {
    pub config_hash: String,
    pub artifacts: BTreeMap<String, ArtifactRecord>,
    /// Wall-clock seconds of the last execution of each stage.
    pub timings: BTreeMap<String, f64>,
    /// Stages served from cache in the last invocation.
    pub cached: Vec<String>,
    /// Predictor jobs skipped (empty subsets, small egonets), by artifact.
    pub skipped_jobs: BTreeMap<String, u64>,
    pub report_files: Vec<String>,
}

impl RunManifest {
    pub fn load(dir: &Path) -> Result<RunManifest> {
        let path = dir.join(MANIFEST);
        match std::fs::read(&path) {
            Ok(bytes) => serde_json::from_slice(&bytes).map_err(|e| Error::Decode {
                artifact: MANIFEST.into(),
                msg: e.to_string(),
            }),
            Err(e) if e.kind() == std::io::ErrorKind::NotFound => Ok(RunManifest::default()),
            Err(e) => Err(Error::io(path, e)),
        }
    }

    pub fn save(&self, dir: &Path) -> Result<()> {
        let path = dir.join(MANIFEST);
        let mut bytes = serde_json::to_vec_pretty(self).expect("manifest serializes");
        bytes.push(b'\n');
        std::fs::write(&path, bytes).map_err(|e| Error::io(path, e))
    }
}

pub fn artifact_path(dir: &Path, name: &str) -> PathBuf {
    dir.join(format!("{name}.json.lz4"))
}

pub fn hash_bytes(bytes: &[u8]) -> String {
    hex(&Sha256::digest(bytes))
}

pub fn file_hash(path: &Path) -> Result<Option<String>> {
    match std::fs::read(path) {
        Ok(b) => Ok(Some(hash_bytes(&b))),
        Err(e) if e.kind() == std::io::ErrorKind::NotFound => Ok(None),
        Err(e) => Err(Error::io(path, e)),
    }
}

/// Writes an artifact and returns its content hash.
pub fn write_artifact<T: Serialize>(dir: &Path, name: &str, value: &T) -> Result<String> {
    let json = serde_json::to_vec(value).map_err(|e| Error::Decode {
        artifact: name.into(),
        msg: e.to_string(),
    })?;
    let mut enc = lz4_flex::frame::FrameEncoder::new(Vec::new());
    enc.write_all(&json).expect("in-memory write");
    let bytes = enc.finish().expect("in-memory write");
    let path = artifact_path(dir, name);
    std::fs::write(&path, &bytes).map_err(|e| Error::io(&path, e))?;
    Ok(hash_bytes(&bytes))
}

pub fn read_artifact<T: DeserializeOwned>(dir: &Path, name: &str) -> Result<T> {
    let path = artifact_path(dir, name);
    let bytes = std::fs::read(&path).map_err(|e| Error::io(&path, e))?;
    let mut json = Vec::new();
    lz4_flex::frame::FrameDecoder::new(&bytes[..])
        .read_to_end(&mut json)
        .map_err(|e| Error::Decode {
            artifact: name.into(),
            msg: e.to_string(),
        })?;
    serde_json::from_slice(&json).map_err(|e| Error::Decode {
        artifact: name.into(),
        msg: e.to_string(),
    })
}
