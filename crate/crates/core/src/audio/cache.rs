//! On-disk feature cache: a raw little-endian `f32` matrix next to a JSON
//! sidecar (`<path>.json`) holding `{frames, n_mels, frame_rate}`.

use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use super::MelSpectrogram;
use crate::error::{Error, Result};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FeatureCacheHeader {
    pub frames: usize,
    pub n_mels: usize,
    pub frame_rate: f64,
}

fn sidecar(path: &Path) -> PathBuf {
    let mut name = path.as_os_str().to_owned();
    name.push(".json");
    PathBuf::from(name)
}

pub fn write_feature_cache(path: impl AsRef<Path>, mel: &MelSpectrogram) -> Result<()> {
    let path = path.as_ref();
    let bytes: Vec<u8> = mel.values.iter().flat_map(|v| v.to_le_bytes()).collect();
    std::fs::write(path, bytes).map_err(|e| Error::io(path, e))?;
    let header = FeatureCacheHeader {
        frames: mel.frames,
        n_mels: mel.n_mels,
        frame_rate: mel.frame_rate,
    };
    let side = sidecar(path);
    let json = serde_json::to_vec(&header).map_err(|e| Error::Persistence(e.to_string()))?;
    std::fs::write(&side, json).map_err(|e| Error::io(side, e))
}

pub fn read_feature_cache(path: impl AsRef<Path>) -> Result<MelSpectrogram> {
    let path = path.as_ref();
    let side = sidecar(path);
    let json = std::fs::read(&side).map_err(|e| Error::io(&side, e))?;
    let header: FeatureCacheHeader = serde_json::from_slice(&json)
        .map_err(|e| Error::Persistence(format!("{}: {e}", side.display())))?;
    let bytes = std::fs::read(path).map_err(|e| Error::io(path, e))?;
    let expected = header.frames * header.n_mels * 4;
    if bytes.len() != expected {
        return Err(Error::Persistence(format!(
            "{}: {} bytes, header implies {expected}",
            path.display(),
            bytes.len()
        )));
    }
    let values = bytes
        .chunks_exact(4)
        .map(|c| f32::from_le_bytes([c[0], c[1], c[2], c[3]]))
        .collect();
    MelSpectrogram::new(header.frames, header.n_mels, header.frame_rate, values)
}
