//! Checkpoint files.
//!
//! Layout: the 8-byte magic `ARTEMBCK`, a little-endian `u32` format
//! version, a little-endian `u64` byte length followed by a JSON metadata
//! block, then every parameter as little-endian `f32` in declared layer order,
//! followed by the optimizer accumulators in the same order when present.

use std::io::Write;
use std::path::Path;

use serde::{Deserialize, Serialize};

use super::{NetworkConfig, OptimizerState, Parameters, RmsPropConfig};
use crate::audio::FeatureConfig;
use crate::error::{Error, Result};

pub const MAGIC: &[u8; 8] = b"ARTEMBCK";
pub const FORMAT_VERSION: u32 = 1;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CheckpointMeta {
    pub network: NetworkConfig,
    pub features: FeatureConfig,
    pub seed: u64,
    pub shapes: Vec<Vec<usize>>,
    /// Present when optimizer accumulators follow the parameters.
    pub optimizer: Option<RmsPropConfig>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Checkpoint {
    pub meta: CheckpointMeta,
    pub params: Parameters<f32>,
    pub optimizer: Option<OptimizerState<f32>>,
}

impl Checkpoint {
    /// Fails unless the stored tensors have the shapes `config` implies.
    pub fn ensure_compatible(&self, config: &NetworkConfig) -> Result<()> {
        let want = config.shapes();
        if self.meta.shapes != want {
            return Err(Error::Persistence(format!(
                "checkpoint tensor shapes {:?} do not fit the requested network {:?}",
                self.meta.shapes, want
            )));
        }
        Ok(())
    }
}

pub fn save_checkpoint(
    path: impl AsRef<Path>,
    params: &Parameters<f32>,
    optimizer: Option<&OptimizerState<f32>>,
    network: &NetworkConfig,
    features: &FeatureConfig,
    seed: u64,
) -> Result<()> {
    let path = path.as_ref();
    if params.shapes() != network.shapes() {
        return Err(Error::Persistence("parameters do not match the network config".into()));
    }
    let meta = CheckpointMeta {
        network: network.clone(),
        features: features.clone(),
        seed,
        shapes: params.shapes(),
        optimizer: optimizer.map(|o| o.config),
    };
    let json = serde_json::to_vec(&meta).map_err(|e| Error::Persistence(e.to_string()))?;

    let mut buf = Vec::with_capacity(24 + json.len() + 8 * params.len());
    buf.extend_from_slice(MAGIC);
    buf.extend_from_slice(&FORMAT_VERSION.to_le_bytes());
    buf.extend_from_slice(&(json.len() as u64).to_le_bytes());
    buf.extend_from_slice(&json);
    for t in params.tensors() {
        t.iter().for_each(|v| buf.extend_from_slice(&v.to_le_bytes()));
    }
    if let Some(opt) = optimizer {
        for t in &opt.accumulators {
            t.iter().for_each(|v| buf.extend_from_slice(&v.to_le_bytes()));
        }
    }

    let mut file = std::fs::File::create(path).map_err(|e| Error::io(path, e))?;
    file.write_all(&buf).map_err(|e| Error::io(path, e))
}

pub fn load_checkpoint(path: impl AsRef<Path>) -> Result<Checkpoint> {
    let path = path.as_ref();
    let bytes = std::fs::read(path).map_err(|e| Error::io(path, e))?;
    decode(&bytes).map_err(|e| match e {
        Error::Persistence(msg) => Error::Persistence(format!("{}: {msg}", path.display())),
        other => other,
    })
}

/// Loads a checkpoint and checks it against an expected architecture.
pub fn load_checkpoint_for(path: impl AsRef<Path>, config: &NetworkConfig) -> Result<Checkpoint> {
    let ckpt = load_checkpoint(path)?;
    ckpt.ensure_compatible(config)?;
    Ok(ckpt)
}

fn decode(bytes: &[u8]) -> Result<Checkpoint> {
    let truncated = || Error::Persistence("file is truncated".into());
    if bytes.len() < 20 {
        return Err(truncated());
    }
    if &bytes[..8] != MAGIC {
        return Err(Error::Persistence("not a checkpoint (bad magic bytes)".into()));
    }
    let version = u32::from_le_bytes(bytes[8..12].try_into().unwrap());
    if version != FORMAT_VERSION {
        return Err(Error::Persistence(format!(
            "format version {version}, this build reads version {FORMAT_VERSION}"
        )));
    }
    let json_len = u64::from_le_bytes(bytes[12..20].try_into().unwrap()) as usize;
    let json_end = 20usize.checked_add(json_len).ok_or_else(truncated)?;
    if bytes.len() < json_end {
        return Err(truncated());
    }
    let meta: CheckpointMeta = serde_json::from_slice(&bytes[20..json_end])
        .map_err(|e| Error::Persistence(format!("metadata: {e}")))?;
    if meta.network.shapes() != meta.shapes {
        return Err(Error::Persistence("metadata shapes disagree with the stored network config".into()));
    }

    let mut params = Parameters::<f32>::zeros(&meta.network);
    let n_params = params.len();
    let n_accum = if meta.optimizer.is_some() { n_params } else { 0 };
    let blob = &bytes[json_end..];
    if blob.len() != 4 * (n_params + n_accum) {
        return Err(if blob.len() < 4 * (n_params + n_accum) {
            truncated()
        } else {
            Error::Persistence("trailing bytes after the parameter blob".into())
        });
    }
    let mut values = blob
        .chunks_exact(4)
        .map(|c| f32::from_le_bytes([c[0], c[1], c[2], c[3]]));
    for t in params.tensors_mut() {
        t.iter_mut().for_each(|v| *v = values.next().unwrap());
    }
    let optimizer = meta.optimizer.map(|config| {
        let mut state = OptimizerState::new(config, &params);
        for t in &mut state.accumulators {
            t.iter_mut().for_each(|v| *v = values.next().unwrap());
        }
        state
    });

    Ok(Checkpoint {
        meta,
        params,
        optimizer,
    })
}
