use std::path::Path;

use serde::{Deserialize, Serialize};

use super::{Label, Split, Utterance};
use crate::error::Result;

/// One row of the dataset manifest.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ManifestEntry {
    pub id: String,
    pub label: Label,
    pub split: Split,
    pub seed: u64,
}

impl From<&Utterance> for ManifestEntry {
    fn from(u: &Utterance) -> Self {
        ManifestEntry { id: u.id.clone(), label: u.label, split: u.split, seed: u.seed }
    }
}

pub fn write_manifest(path: &Path, entries: &[ManifestEntry]) -> Result<()> {
    let mut text = serde_json::to_string_pretty(entries)?;
    text.push('\n');
    std::fs::write(path, text)?;
    Ok(())
}

pub fn read_manifest(path: &Path) -> Result<Vec<ManifestEntry>> {
    Ok(serde_json::from_str(&std::fs::read_to_string(path)?)?)
}
