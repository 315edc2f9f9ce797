//! Dataset manifest: one entry per subject pointing at its signal
//! container and label CSV. Relative paths resolve against the manifest's
//! directory.

use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use super::binfmt::write_file;
use crate::{Error, Result};

pub const MANIFEST_VERSION: u32 = 1;

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ManifestEntry {
    pub subject_id: String,
    pub signal: PathBuf,
    pub labels: PathBuf,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Manifest {
    pub format_version: u32,
    pub subjects: Vec<ManifestEntry>,
}

impl Manifest {
    pub fn new(subjects: Vec<ManifestEntry>) -> Self {
        Self {
            format_version: MANIFEST_VERSION,
            subjects,
        }
    }

    pub fn subject_ids(&self) -> Vec<String> {
        self.subjects.iter().map(|e| e.subject_id.clone()).collect()
    }
}

pub fn resolve(base: &Path, p: &Path) -> PathBuf {
    if p.is_absolute() {
        p.to_path_buf()
    } else {
        base.join(p)
    }
}

pub fn base_dir(path: &Path) -> PathBuf {
    path.parent().map(Path::to_path_buf).unwrap_or_default()
}

pub fn load_manifest(path: &Path) -> Result<Manifest> {
    let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    let m: Manifest =
        serde_json::from_str(&text).map_err(|e| Error::Parse(format!("{}: {e}", path.display())))?;
    if m.format_version != MANIFEST_VERSION {
        return Err(Error::Parse(format!(
            "{}: unsupported manifest version {}",
            path.display(),
            m.format_version
        )));
    }
    let mut seen = std::collections::HashSet::new();
    if let Some(dup) = m.subjects.iter().find(|e| !seen.insert(e.subject_id.as_str())) {
        return Err(Error::Parse(format!("{}: duplicate subject {:?}", path.display(), dup.subject_id)));
    }
    Ok(m)
}

pub fn save_manifest(path: &Path, m: &Manifest) -> Result<()> {
    write_json(path, m)
}

pub(crate) fn write_json<T: Serialize>(path: &Path, value: &T) -> Result<()> {
    let mut text = serde_json::to_string_pretty(value).map_err(|e| Error::Parse(e.to_string()))?;
    text.push('\n');
    write_file(path, text.as_bytes())
}

pub(crate) fn read_json<T: serde::de::DeserializeOwned>(path: &Path) -> Result<T> {
    let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    serde_json::from_str(&text).map_err(|e| Error::Parse(format!("{}: {e}", path.display())))
}
