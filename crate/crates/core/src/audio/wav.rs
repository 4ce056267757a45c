use std::path::Path;

use super::PcmSignal;
use crate::error::{Error, Result};

const FULL_SCALE: f32 = 32768.0;

/// Reads a 16-bit PCM WAV file, averaging stereo channels down to mono.
///
/// Samples are scaled by `1 / 32768`, so full-scale positive is
/// `32767 / 32768`.
pub fn load_wav(path: impl AsRef<Path>) -> Result<PcmSignal> {
    let path = path.as_ref();
    let reader = hound::WavReader::open(path).map_err(|e| map_hound(path, e))?;
    let spec = reader.spec();
    if spec.sample_format != hound::SampleFormat::Int || spec.bits_per_sample != 16 {
        return Err(Error::Unsupported(format!(
            "{}: {:?} {}-bit samples (only 16-bit integer PCM is supported)",
            path.display(),
            spec.sample_format,
            spec.bits_per_sample
        )));
    }
    let channels = usize::from(spec.channels);
    if !(1..=2).contains(&channels) {
        return Err(Error::Unsupported(format!(
            "{}: {channels} channels (mono or stereo only)",
            path.display()
        )));
    }

    let raw = reader
        .into_samples::<i16>()
        .collect::<std::result::Result<Vec<_>, _>>()
        .map_err(|e| map_hound(path, e))?;
    if raw.len() % channels != 0 {
        return Err(Error::Format(format!(
            "{}: sample count {} is not a multiple of the channel count",
            path.display(),
            raw.len()
        )));
    }

    let samples = raw
        .chunks_exact(channels)
        .map(|frame| {
            let sum: f32 = frame.iter().map(|&s| f32::from(s) / FULL_SCALE).sum();
            sum / channels as f32
        })
        .collect();
    PcmSignal::new(samples, spec.sample_rate)
}

/// Writes a mono 16-bit PCM WAV file. Samples are clamped to the
/// representable range after scaling by 32768.
pub fn write_wav(path: impl AsRef<Path>, signal: &PcmSignal) -> Result<()> {
    let path = path.as_ref();
    let spec = hound::WavSpec {
        channels: 1,
        sample_rate: signal.sample_rate(),
        bits_per_sample: 16,
        sample_format: hound::SampleFormat::Int,
    };
    let mut writer = hound::WavWriter::create(path, spec).map_err(|e| map_hound(path, e))?;
    for &s in signal.samples() {
        let q = (s * FULL_SCALE).round().clamp(-32768.0, 32767.0) as i16;
        writer.write_sample(q).map_err(|e| map_hound(path, e))?;
    }
    writer.finalize().map_err(|e| map_hound(path, e))
}

fn map_hound(path: &Path, err: hound::Error) -> Error {
    match err {
        hound::Error::IoError(source) => Error::io(path, source),
        hound::Error::FormatError(msg) => Error::Format(format!("{}: {msg}", path.display())),
        hound::Error::Unsupported => {
            Error::Unsupported(format!("{}: unsupported WAV variant", path.display()))
        }
        other => Error::Format(format!("{}: {other}", path.display())),
    }
}
