//! On-disk reference cache: a little-endian `f64` matrix plus a JSON sidecar.
//!
//! Entries are keyed by a SHA-256 of the task (including its observations),
//! the seed and the sampler configuration. Both files are written to a
//! temporary name and renamed into place; the sidecar goes last, so a
//! present sidecar means a complete entry.

use std::fs;
use std::io::Write;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};
use tempfile::NamedTempFile;

use super::{analytic, ReferenceDiagnostics, ReferenceKind, ReferencePosterior, SamplerConfig};
use crate::error::{Error, Result};
use crate::models::ModelTask;
use crate::numeric::SampleMatrix;

pub const CACHE_ENV: &str = "SOFTCVI_CACHE_DIR";
const DEFAULT_DIR: &str = ".softcvi-cache";

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct Sidecar {
    pub task: String,
    pub seed: u64,
    pub sampler: SamplerConfig,
    pub kind: ReferenceKind,
    pub dim: usize,
    pub n: usize,
    pub diagnostics: ReferenceDiagnostics,
}

#[derive(Clone, Debug)]
pub struct ReferenceCache {
    dir: PathBuf,
}

impl ReferenceCache {
    pub fn new(dir: impl Into<PathBuf>) -> Self {
        ReferenceCache { dir: dir.into() }
    }

    /// Directory from the cache environment variable, else a local default.
    pub fn from_env() -> Self {
        Self::new(std::env::var_os(CACHE_ENV).map_or_else(|| PathBuf::from(DEFAULT_DIR), PathBuf::from))
    }

    pub fn dir(&self) -> &Path {
        &self.dir
    }

    pub fn key(task: &ModelTask, seed: u64, sampler: &SamplerConfig) -> String {
        let payload = serde_json::json!({
            "task": task.to_json(),
            "seed": seed,
            "sampler": sampler,
        });
        hex::encode(Sha256::digest(payload.to_string().as_bytes()))
    }

    fn paths(&self, key: &str) -> (PathBuf, PathBuf) {
        (self.dir.join(format!("{key}.bin")), self.dir.join(format!("{key}.json")))
    }

    pub fn load(&self, task: &ModelTask, key: &str) -> Result<Option<ReferencePosterior>> {
        let (bin, json) = self.paths(key);
        if !json.exists() {
            return Ok(None);
        }
        let side: Sidecar = serde_json::from_slice(&fs::read(json)?)?;
        let bytes = fs::read(bin)?;
        if bytes.len() != 8 * side.n * side.dim {
            return Err(Error::config(
                "reference.cache",
                format!("entry {key} has {} bytes, expected {}", bytes.len(), 8 * side.n * side.dim),
            ));
        }
        let data = bytes
            .chunks_exact(8)
            .map(|c| f64::from_le_bytes(c.try_into().expect("8-byte chunk")))
            .collect();
        let mut r = ReferencePosterior::new(side.kind, task, SampleMatrix::new(side.dim, data), side.diagnostics)?;
        if r.kind == ReferenceKind::Analytic {
            r.density = analytic::density_for(task);
        }
        Ok(Some(r))
    }

    pub fn store(&self, key: &str, reference: &ReferencePosterior, seed: u64, sampler: &SamplerConfig) -> Result<()> {
        fs::create_dir_all(&self.dir)?;
        let (bin, json) = self.paths(key);
        let mut bytes = Vec::with_capacity(8 * reference.samples.data().len());
        for x in reference.samples.data() {
            bytes.extend_from_slice(&x.to_le_bytes());
        }
        self.write_atomic(&bin, &bytes)?;
        let side = Sidecar {
            task: reference.task.clone(),
            seed,
            sampler: sampler.clone(),
            kind: reference.kind,
            dim: reference.samples.dim(),
            n: reference.samples.n_rows(),
            diagnostics: reference.diagnostics.clone(),
        };
        self.write_atomic(&json, &serde_json::to_vec_pretty(&side)?)
    }

    fn write_atomic(&self, path: &Path, bytes: &[u8]) -> Result<()> {
        let mut tmp = NamedTempFile::new_in(&self.dir)?;
        tmp.write_all(bytes)?;
        tmp.as_file().sync_all()?;
        tmp.persist(path).map_err(|e| Error::Io(e.error))?;
        Ok(())
    }

    /// Cached reference if present, else builds and stores it. The flag is
    /// true on a cache hit.
    pub fn get_or_build(
        &self,
        task: &ModelTask,
        seed: u64,
        sampler: &SamplerConfig,
    ) -> Result<(ReferencePosterior, bool)> {
        let key = Self::key(task, seed, sampler);
        if let Some(r) = self.load(task, &key)? {
            return Ok((r, true));
        }
        let r = super::build_reference(task, sampler, super::reference_key(seed))?;
        self.store(&key, &r, seed, sampler)?;
        Ok((r, false))
    }
}
