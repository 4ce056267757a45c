use rustfft::FftPlanner;

use super::mel::{mel_filterbank, mel_spectrogram_with};
use super::{FeatureConfig, MelSpectrogram, PcmSignal};
use crate::error::{Error, Result};

/// Where segments are cut from a track.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SegmentPolicy {
    /// `n` segments whose starts are evenly spaced over `[0, len - seg_len]`.
    LinearSpaced(usize),
    /// Every non-overlapping segment from the start of the track.
    Contiguous,
}

/// Start offsets (in samples) of the segments `policy` cuts from a track of
/// `len` samples.
pub fn segment_offsets(len: usize, seg_len: usize, policy: SegmentPolicy) -> Result<Vec<usize>> {
    if seg_len == 0 {
        return Err(Error::Config("segment length must be positive".into()));
    }
    if len < seg_len {
        return Err(Error::InsufficientInput(format!(
            "track of {len} samples is shorter than one {seg_len}-sample segment"
        )));
    }
    let span = len - seg_len;
    Ok(match policy {
        SegmentPolicy::LinearSpaced(0) => {
            return Err(Error::Config("segment count must be at least 1".into()))
        }
        SegmentPolicy::LinearSpaced(1) => vec![0],
        SegmentPolicy::LinearSpaced(n) => (0..n)
            .map(|i| ((i as f64) * span as f64 / (n - 1) as f64).round() as usize)
            .collect(),
        SegmentPolicy::Contiguous => (0..len / seg_len).map(|i| i * seg_len).collect(),
    })
}

/// Cuts a track into segments and computes the mel-spectrogram of each.
pub fn extract_segments(
    track: &PcmSignal,
    config: &FeatureConfig,
    policy: SegmentPolicy,
) -> Result<Vec<MelSpectrogram>> {
    config.validate()?;
    let seg_len = config.segment_len();
    let offsets = segment_offsets(track.len(), seg_len, policy)?;
    let fb = mel_filterbank(config.n_fft_bins(), config)?;
    let fft = FftPlanner::<f64>::new().plan_fft_forward(config.n_fft);
    offsets
        .into_iter()
        .map(|start| {
            let piece = PcmSignal::new(
                track.samples()[start..start + seg_len].to_vec(),
                track.sample_rate(),
            )?;
            mel_spectrogram_with(&piece, config, &fb, &fft)
        })
        .collect()
}
