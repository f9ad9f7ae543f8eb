use std::fs;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use super::{build_ensemble, EnsembleModel};
use crate::error::{Error, Result};
use crate::trainer::{TrainedModel, WEIGHTS_FILE};
use crate::Scalar;

pub const ENSEMBLE_MANIFEST_FILE: &str = "ensemble.json";

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct MemberEntry {
    pub name: String,
    /// Model directory, relative to the manifest's directory when not absolute.
    pub path: PathBuf,
    /// SHA-256 of the member's weights file, hex encoded.
    pub weights_sha256: String,
}

/// Ordered list of member artifacts with content hashes.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct EnsembleManifest {
    /// Class names in label order.
    #[serde(default)]
    pub classes: Vec<String>,
    pub members: Vec<MemberEntry>,
}

pub fn file_sha256(path: &Path) -> Result<String> {
    if !path.exists() {
        return Err(Error::MissingArtifact(path.to_path_buf()));
    }
    let bytes = fs::read(path).map_err(|e| Error::io(path, e))?;
    Ok(hex::encode(Sha256::digest(&bytes)))
}

impl EnsembleManifest {
    /// Describes saved member directories, recording paths relative to `base` when possible.
    pub fn describe(base: &Path, classes: &[String], members: &[(String, PathBuf)]) -> Result<Self> {
        let members = members
            .iter()
            .map(|(name, dir)| {
                let weights_sha256 = file_sha256(&dir.join(WEIGHTS_FILE))?;
                let path = dir.strip_prefix(base).map(Path::to_path_buf).unwrap_or_else(|_| dir.clone());
                Ok(MemberEntry { name: name.clone(), path, weights_sha256 })
            })
            .collect::<Result<_>>()?;
        Ok(Self { classes: classes.to_vec(), members })
    }

    pub fn save(&self, path: &Path) -> Result<()> {
        fs::write(path, serde_json::to_string_pretty(self)?).map_err(|e| Error::io(path, e))
    }

    pub fn load(path: &Path) -> Result<Self> {
        if !path.exists() {
            return Err(Error::MissingArtifact(path.to_path_buf()));
        }
        Ok(serde_json::from_str(&fs::read_to_string(path).map_err(|e| Error::io(path, e))?)?)
    }

    /// Loads every member, verifying weight hashes, and builds the ensemble.
    pub fn load_ensemble<T: Scalar>(path: &Path) -> Result<EnsembleModel<TrainedModel<T>>> {
        let manifest = Self::load(path)?;
        let base = path.parent().unwrap_or(Path::new("."));
        let members = manifest
            .members
            .iter()
            .map(|entry| {
                let dir = if entry.path.is_absolute() { entry.path.clone() } else { base.join(&entry.path) };
                let actual = file_sha256(&dir.join(WEIGHTS_FILE))?;
                if actual != entry.weights_sha256 {
                    return Err(Error::Corrupt(format!("weights of member {} do not match the manifest hash", entry.name)));
                }
                Ok(TrainedModel::<T>::load(&dir)?.with_name(entry.name.clone()))
            })
            .collect::<Result<Vec<_>>>()?;
        let ensemble = build_ensemble(members)?;
        if !manifest.classes.is_empty() && manifest.classes.len() != ensemble.class_count() {
            return Err(Error::Shape(format!(
                "manifest lists {} classes but the members predict {}",
                manifest.classes.len(),
                ensemble.class_count()
            )));
        }
        Ok(ensemble)
    }
}
