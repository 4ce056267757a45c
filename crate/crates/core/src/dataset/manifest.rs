use std::collections::HashSet;
use std::io::{BufRead, BufReader, Write};
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// One line of a JSON Lines manifest.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ManifestRecord {
    pub track_id: String,
    pub artist_id: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub album_id: Option<String>,
    #[serde(default)]
    pub tags: Vec<String>,
    /// Relative paths resolve against the manifest's directory.
    pub audio_path: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub split: Option<String>,
}

/// Checks the per-record and cross-record invariants.
pub fn validate_records(records: &[ManifestRecord]) -> Result<()> {
    let mut seen = HashSet::new();
    for r in records {
        if r.artist_id.is_empty() {
            return Err(Error::Data(format!("track {:?} has an empty artist_id", r.track_id)));
        }
        if !seen.insert(r.track_id.as_str()) {
            return Err(Error::Data(format!("duplicate track_id {:?}", r.track_id)));
        }
    }
    Ok(())
}

pub fn load_manifest(path: impl AsRef<Path>) -> Result<Vec<ManifestRecord>> {
    let path = path.as_ref();
    let file = std::fs::File::open(path).map_err(|e| Error::io(path, e))?;
    let mut records = Vec::new();
    for (i, line) in BufReader::new(file).lines().enumerate() {
        let line = line.map_err(|e| Error::io(path, e))?;
        if line.trim().is_empty() {
            continue;
        }
        let rec: ManifestRecord = serde_json::from_str(&line)
            .map_err(|e| Error::Data(format!("{} line {}: {e}", path.display(), i + 1)))?;
        records.push(rec);
    }
    validate_records(&records)?;
    Ok(records)
}

pub fn save_manifest(path: impl AsRef<Path>, records: &[ManifestRecord]) -> Result<()> {
    let path = path.as_ref();
    validate_records(records)?;
    let mut out = Vec::new();
    for r in records {
        serde_json::to_writer(&mut out, r).map_err(|e| Error::Data(e.to_string()))?;
        out.push(b'\n');
    }
    let mut file = std::fs::File::create(path).map_err(|e| Error::io(path, e))?;
    file.write_all(&out).map_err(|e| Error::io(path, e))
}

/// `audio_path` of `record`, resolved against `base` when relative.
pub fn resolve_audio_path(base: &Path, record: &ManifestRecord) -> std::path::PathBuf {
    let p = Path::new(&record.audio_path);
    if p.is_absolute() {
        p.to_path_buf()
    } else {
        base.join(p)
    }
}
