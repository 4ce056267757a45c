use std::sync::Arc;

use rustfft::num_complex::Complex;
use rustfft::FftPlanner;
use serde::{Deserialize, Serialize};

use super::PcmSignal;
use crate::error::{Error, Result};

/// Parameters of the mel front end.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FeatureConfig {
    pub sample_rate: u32,
    /// Analysis window length in seconds.
    pub window_seconds: f64,
    /// Fraction of the window shared by consecutive frames.
    pub overlap: f64,
    pub n_mels: usize,
    /// Length of one network input segment in seconds (3 or 9).
    pub segment_seconds: f64,
    /// FFT size; frames are zero-padded from the window length up to this.
    pub n_fft: usize,
}

impl Default for FeatureConfig {
    fn default() -> Self {
        Self {
            sample_rate: 22050,
            window_seconds: 0.046,
            overlap: 0.5,
            n_mels: 128,
            segment_seconds: 9.0,
            n_fft: 2048,
        }
    }
}

impl FeatureConfig {
    pub fn validate(&self) -> Result<()> {
        if self.sample_rate == 0 {
            return Err(Error::Config("sample_rate must be positive".into()));
        }
        if !(self.overlap > 0.0 && self.overlap < 1.0) {
            return Err(Error::Config(format!("overlap {} outside (0, 1)", self.overlap)));
        }
        if self.n_mels == 0 {
            return Err(Error::Config("n_mels must be at least 1".into()));
        }
        if self.segment_seconds != 3.0 && self.segment_seconds != 9.0 {
            return Err(Error::Config(format!(
                "segment_seconds must be 3 or 9, got {}",
                self.segment_seconds
            )));
        }
        let window = self.window_len();
        if window < 2 {
            return Err(Error::Config("analysis window shorter than two samples".into()));
        }
        if self.hop_len() == 0 {
            return Err(Error::Config("hop length rounds to zero".into()));
        }
        if self.n_fft < window {
            return Err(Error::Config(format!(
                "n_fft {} shorter than the window ({window} samples)",
                self.n_fft
            )));
        }
        Ok(())
    }

    /// Window length in samples.
    pub fn window_len(&self) -> usize {
        (self.window_seconds * f64::from(self.sample_rate)).round() as usize
    }

    /// Hop length in samples.
    pub fn hop_len(&self) -> usize {
        (self.window_len() as f64 * (1.0 - self.overlap)).round() as usize
    }

    pub fn segment_len(&self) -> usize {
        (self.segment_seconds * f64::from(self.sample_rate)).round() as usize
    }

    pub fn n_fft_bins(&self) -> usize {
        self.n_fft / 2 + 1
    }

    /// Number of STFT frames for a signal of `len` samples.
    pub fn frame_count(&self, len: usize) -> usize {
        let window = self.window_len();
        if len < window {
            0
        } else {
            (len - window) / self.hop_len() + 1
        }
    }

    pub fn frame_rate(&self) -> f64 {
        f64::from(self.sample_rate) / self.hop_len() as f64
    }
}

/// Row-major `frames x n_mels` power mel-spectrogram.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MelSpectrogram {
    pub frames: usize,
    pub n_mels: usize,
    pub frame_rate: f64,
    pub values: Vec<f32>,
}

impl MelSpectrogram {
    pub fn new(frames: usize, n_mels: usize, frame_rate: f64, values: Vec<f32>) -> Result<Self> {
        if values.len() != frames * n_mels {
            return Err(Error::Shape(format!(
                "{} values for a {frames}x{n_mels} mel-spectrogram",
                values.len()
            )));
        }
        if let Some(v) = values.iter().find(|v| !(**v >= 0.0) || !v.is_finite()) {
            return Err(Error::Domain(format!("mel value {v} is not a finite nonnegative number")));
        }
        Ok(Self {
            frames,
            n_mels,
            frame_rate,
            values,
        })
    }

    pub fn frame(&self, t: usize) -> &[f32] {
        &self.values[t * self.n_mels..(t + 1) * self.n_mels]
    }
}

pub fn hz_to_mel(hz: f64) -> f64 {
    2595.0 * (1.0 + hz / 700.0).log10()
}

pub fn mel_to_hz(mel: f64) -> f64 {
    700.0 * (10f64.powf(mel / 2595.0) - 1.0)
}

/// Triangular HTK mel filters sampled on the FFT bin grid.
#[derive(Debug, Clone)]
pub struct MelFilterbank {
    pub n_mels: usize,
    pub n_bins: usize,
    /// Row-major `n_mels x n_bins`.
    pub weights: Vec<f64>,
    pub centers_hz: Vec<f64>,
    /// Half-open range of nonzero bins for each row.
    spans: Vec<(usize, usize)>,
}

impl MelFilterbank {
    pub fn row(&self, m: usize) -> &[f64] {
        &self.weights[m * self.n_bins..(m + 1) * self.n_bins]
    }

    /// Projects one power spectrum (length `n_bins`) onto the mel bands.
    pub fn apply(&self, power: &[f64], out: &mut [f64]) {
        for (m, o) in out.iter_mut().enumerate() {
            let (lo, hi) = self.spans[m];
            let row = &self.row(m)[lo..hi];
            *o = row.iter().zip(&power[lo..hi]).map(|(w, p)| w * p).sum();
        }
    }
}

/// Builds `n_mels` triangular filters whose centers are equally spaced on the
/// HTK mel scale between 0 Hz and Nyquist, each normalized to a peak of 1.
pub fn mel_filterbank(n_fft_bins: usize, config: &FeatureConfig) -> Result<MelFilterbank> {
    let n_mels = config.n_mels;
    if n_mels == 0 {
        return Err(Error::Config("n_mels must be at least 1".into()));
    }
    if n_fft_bins < n_mels || n_fft_bins < 2 {
        return Err(Error::Config(format!(
            "{n_fft_bins} FFT bins cannot carry {n_mels} mel filters"
        )));
    }
    let nyquist = f64::from(config.sample_rate) / 2.0;
    let top = hz_to_mel(nyquist);
    let edges: Vec<f64> = (0..n_mels + 2)
        .map(|i| mel_to_hz(top * i as f64 / (n_mels + 1) as f64))
        .collect();
    let bin_hz = nyquist / (n_fft_bins - 1) as f64;

    let mut weights = vec![0.0; n_mels * n_fft_bins];
    let mut spans = Vec::with_capacity(n_mels);
    for m in 0..n_mels {
        let (lo, center, hi) = (edges[m], edges[m + 1], edges[m + 2]);
        let row = &mut weights[m * n_fft_bins..(m + 1) * n_fft_bins];
        for (k, w) in row.iter_mut().enumerate() {
            let f = k as f64 * bin_hz;
            let rising = (f - lo) / (center - lo);
            let falling = (hi - f) / (hi - center);
            *w = rising.min(falling).max(0.0);
        }
        let peak = row.iter().cloned().fold(0.0, f64::max);
        if peak <= 0.0 {
            return Err(Error::Config(format!(
                "mel filter {m} ({center:.1} Hz) falls between FFT bins; increase n_fft"
            )));
        }
        row.iter_mut().for_each(|w| *w /= peak);
        let first = row.iter().position(|&w| w > 0.0).unwrap_or(0);
        let last = row.iter().rposition(|&w| w > 0.0).map_or(0, |i| i + 1);
        spans.push((first, last));
    }

    Ok(MelFilterbank {
        n_mels,
        n_bins: n_fft_bins,
        weights,
        centers_hz: edges[1..=n_mels].to_vec(),
        spans,
    })
}

/// Periodic Hann window.
fn hann(len: usize) -> Vec<f64> {
    (0..len)
        .map(|n| 0.5 - 0.5 * (2.0 * std::f64::consts::PI * n as f64 / len as f64).cos())
        .collect()
}

/// Power mel-spectrogram of a signal already at `config.sample_rate`.
///
/// Each frame's power spectrum is `|X_k|^2 / sum(w^2)`, so white noise of
/// variance `s^2` has expected power `s^2` in every bin.
pub fn mel_spectrogram(signal: &PcmSignal, config: &FeatureConfig) -> Result<MelSpectrogram> {
    let fb = mel_filterbank(config.n_fft_bins(), config)?;
    let plan = FftPlanner::<f64>::new().plan_fft_forward(config.n_fft);
    mel_spectrogram_with(signal, config, &fb, &plan)
}

pub(crate) fn mel_spectrogram_with(
    signal: &PcmSignal,
    config: &FeatureConfig,
    fb: &MelFilterbank,
    fft: &Arc<dyn rustfft::Fft<f64>>,
) -> Result<MelSpectrogram> {
    config.validate()?;
    if signal.sample_rate() != config.sample_rate {
        return Err(Error::Config(format!(
            "signal is at {} Hz, features expect {} Hz",
            signal.sample_rate(),
            config.sample_rate
        )));
    }
    let window_len = config.window_len();
    let hop = config.hop_len();
    let frames = config.frame_count(signal.len());
    if frames == 0 {
        return Err(Error::InsufficientInput(format!(
            "{} samples is shorter than one {window_len}-sample window",
            signal.len()
        )));
    }

    let window = hann(window_len);
    let norm: f64 = window.iter().map(|w| w * w).sum();
    let n_bins = config.n_fft_bins();
    let samples = signal.samples();

    let mut buf = vec![Complex::new(0.0, 0.0); config.n_fft];
    let mut scratch = vec![Complex::new(0.0, 0.0); fft.get_inplace_scratch_len()];
    let mut power = vec![0.0; n_bins];
    let mut bands = vec![0.0; config.n_mels];
    let mut values = Vec::with_capacity(frames * config.n_mels);

    for t in 0..frames {
        let start = t * hop;
        for (i, c) in buf.iter_mut().enumerate() {
            *c = if i < window_len {
                Complex::new(f64::from(samples[start + i]) * window[i], 0.0)
            } else {
                Complex::new(0.0, 0.0)
            };
        }
        fft.process_with_scratch(&mut buf, &mut scratch);
        for (p, c) in power.iter_mut().zip(&buf) {
            *p = c.norm_sqr() / norm;
        }
        fb.apply(&power, &mut bands);
        values.extend(bands.iter().map(|&b| b.max(0.0) as f32));
    }

    MelSpectrogram::new(frames, config.n_mels, config.frame_rate(), values)
}
