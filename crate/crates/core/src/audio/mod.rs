//! Audio front end: PCM loading, resampling and mel-spectrogram features.
//!
//! The network consumes power mel-spectrograms computed with a Hann window of
//! `round(window_seconds * sample_rate)` samples and a hop of
//! `round(window * (1 - overlap))` samples. No log compression happens here;
//! the first network layer applies it.

mod cache;
mod mel;
mod resample;
mod segments;
mod wav;

pub use cache::{read_feature_cache, write_feature_cache, FeatureCacheHeader};
pub use mel::{hz_to_mel, mel_filterbank, mel_spectrogram, mel_to_hz, FeatureConfig, MelFilterbank, MelSpectrogram};
pub use resample::resample;
pub use segments::{extract_segments, segment_offsets, SegmentPolicy};
pub use wav::{load_wav, write_wav};

use crate::error::{Error, Result};

/// Mono PCM audio with samples nominally in `[-1, 1]`.
#[derive(Debug, Clone, PartialEq)]
pub struct PcmSignal {
    samples: Vec<f32>,
    sample_rate: u32,
}

impl PcmSignal {
    pub fn new(samples: Vec<f32>, sample_rate: u32) -> Result<Self> {
        if sample_rate == 0 {
            return Err(Error::Config("sample rate must be positive".into()));
        }
        if let Some(i) = samples.iter().position(|s| !s.is_finite()) {
            return Err(Error::Domain(format!("non-finite sample at index {i}")));
        }
        Ok(Self {
            samples,
            sample_rate,
        })
    }

    pub fn samples(&self) -> &[f32] {
        &self.samples
    }

    pub fn sample_rate(&self) -> u32 {
        self.sample_rate
    }

    pub fn len(&self) -> usize {
        self.samples.len()
    }

    pub fn is_empty(&self) -> bool {
        self.samples.is_empty()
    }

    /// Duration in seconds.
    pub fn duration(&self) -> f64 {
        self.samples.len() as f64 / f64::from(self.sample_rate)
    }

    pub fn into_samples(self) -> Vec<f32> {
        self.samples
    }
}
