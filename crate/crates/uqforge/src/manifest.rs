//! Per-stage manifests: enough to re-run the stage that wrote a file.

use std::path::{Path, PathBuf};

use serde::Serialize;
use sha2::{Digest, Sha256};

use crate::config::{Project, StudyConfig};
use crate::{Error, Result};

#[derive(Debug, Clone, Serialize)]
pub struct FileDigest {
    pub path: String,
    pub sha256: String,
}

#[derive(Debug, Clone, Serialize)]
pub struct Seeds {
    /// Sobol skip or PRNG seed of the design; also seeds the likelihood starts.
    pub doe: u64,
    pub moments: u64,
    pub sobol: u64,
}

#[derive(Debug, Clone, Serialize)]
pub struct Manifest {
    pub tool: &'static str,
    pub version: &'static str,
    pub core_version: &'static str,
    pub stage: String,
    pub command: String,
    pub config_path: String,
    pub config_hash: String,
    pub config: StudyConfig,
    pub space: String,
    pub seeds: Seeds,
    pub inputs: Vec<FileDigest>,
    pub outputs: Vec<FileDigest>,
}

pub fn sha256_file(path: &Path) -> Result<String> {
    let bytes = std::fs::read(path).map_err(Error::io(path))?;
    Ok(format!("{:x}", Sha256::digest(&bytes)))
}

fn display_path(path: &Path, root: &Path) -> String {
    path.strip_prefix(root).unwrap_or(path).to_string_lossy().into_owned()
}

fn digests(paths: &[PathBuf], root: &Path) -> Result<Vec<FileDigest>> {
    paths.iter().map(|p| Ok(FileDigest { path: display_path(p, root), sha256: sha256_file(p)? })).collect()
}

impl Manifest {
    pub fn new(project: &Project, stage: &str, command: &str, inputs: &[PathBuf], outputs: &[PathBuf]) -> Result<Self> {
        let c = &project.config;
        let root = &project.out_dir;
        Ok(Self {
            tool: "uqforge",
            version: env!("CARGO_PKG_VERSION"),
            core_version: uqforge_core::VERSION,
            stage: stage.into(),
            command: command.into(),
            config_path: project.config_path.to_string_lossy().into_owned(),
            config_hash: project.config_hash(),
            config: c.clone(),
            space: project.space_text.clone(),
            seeds: Seeds { doe: c.doe.seed, moments: c.moments.seed, sobol: c.sobol.seed },
            inputs: digests(inputs, root)?,
            outputs: digests(outputs, root)?,
        })
    }

    /// Writes `manifest_<stage>.json` into the output directory and returns its path.
    pub fn write(&self, out_dir: &Path) -> Result<PathBuf> {
        let path = out_dir.join(format!("manifest_{}.json", self.stage));
        let text = serde_json::to_string_pretty(self).expect("manifest serialises");
        crate::csvio::write_text(&path, &(text + "\n"))?;
        Ok(path)
    }
}
