use std::f64::consts::PI;

use super::PcmSignal;
use crate::error::{Error, Result};

/// Zero crossings of the sinc kernel on each side of the center.
const ZERO_CROSSINGS: f64 = 32.0;
/// Kaiser window shape; about 80 dB of stopband attenuation.
const KAISER_BETA: f64 = 8.6;
/// Fraction of the lower Nyquist frequency kept as passband.
const ROLLOFF: f64 = 0.95;

/// Band-limited resampling with a Kaiser-windowed sinc kernel.
///
/// The output has `round(len * target / source)` samples. Each output sample
/// is normalized by the sum of the kernel taps it used, which keeps DC exact
/// and softens truncation at the signal edges.
pub fn resample(signal: &PcmSignal, target_rate: u32) -> Result<PcmSignal> {
    if target_rate == 0 {
        return Err(Error::Config("target sample rate must be positive".into()));
    }
    let source_rate = signal.sample_rate();
    if source_rate == target_rate {
        return Ok(signal.clone());
    }

    let input = signal.samples();
    let ratio = f64::from(target_rate) / f64::from(source_rate);
    let out_len = (input.len() as f64 * ratio).round() as usize;

    // Cutoff in cycles per source sample.
    let cutoff = 0.5 * ratio.min(1.0) * ROLLOFF;
    let half_width = ZERO_CROSSINGS / (2.0 * cutoff);
    let i0_beta = bessel_i0(KAISER_BETA);

    let kernel = |u: f64| -> f64 {
        let r = u / half_width;
        if r.abs() >= 1.0 {
            return 0.0;
        }
        let window = bessel_i0(KAISER_BETA * (1.0 - r * r).sqrt()) / i0_beta;
        2.0 * cutoff * sinc(2.0 * cutoff * u) * window
    };

    let last = input.len() as isize - 1;
    let mut out = Vec::with_capacity(out_len);
    for i in 0..out_len {
        let center = i as f64 / ratio;
        let lo = ((center - half_width).ceil() as isize).max(0);
        let hi = ((center + half_width).floor() as isize).min(last);
        let mut acc = 0.0;
        let mut weight = 0.0;
        for j in lo..=hi {
            let h = kernel(center - j as f64);
            acc += h * f64::from(input[j as usize]);
            weight += h;
        }
        out.push(if weight.abs() > 1e-12 { (acc / weight) as f32 } else { 0.0 });
    }
    PcmSignal::new(out, target_rate)
}

fn sinc(x: f64) -> f64 {
    if x.abs() < 1e-12 {
        1.0
    } else {
        (PI * x).sin() / (PI * x)
    }
}

/// Modified Bessel function of the first kind, order zero (power series).
fn bessel_i0(x: f64) -> f64 {
    let half = x / 2.0;
    let mut term = 1.0;
    let mut sum = 1.0;
    for k in 1..64 {
        term *= (half / k as f64) * (half / k as f64);
        sum += term;
        if term < sum * 1e-17 {
            break;
        }
    }
    sum
}
