//! Seeded synthetic artists for desk-scale experiments.
//!
//! Each artist owns a timbre: a set of sinusoidal partials with fixed
//! frequencies, weights and phases, plus a slow tremolo. Artists of one genre
//! share half of their partial frequencies. A track renders the signature
//! with per-track amplitude jitter and additive white noise.

use std::collections::BTreeMap;
use std::f64::consts::TAU;
use std::path::Path;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::{save_manifest, ManifestRecord, MAX_GROUP, MIN_GROUP};
use crate::audio::{write_wav, PcmSignal};
use crate::error::{Error, Result};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SyntheticConfig {
    /// Artists whose tracks form the train and validation splits.
    pub train_artists: usize,
    /// Held-out evaluation groups of 2 to 4 unseen artists.
    pub eval_groups: usize,
    pub tracks_per_artist: usize,
    /// Tracks per training artist routed to the validation split.
    pub validation_tracks: usize,
    /// Track length in seconds.
    pub duration: f64,
    pub sample_rate: u32,
    pub partials: usize,
    pub min_hz: f64,
    pub max_hz: f64,
    pub genres: usize,
    /// Relative per-track amplitude jitter of each partial.
    pub jitter: f64,
    /// White-noise standard deviation.
    pub noise: f64,
    pub seed: u64,
}

impl Default for SyntheticConfig {
    fn default() -> Self {
        Self {
            train_artists: 20,
            eval_groups: 8,
            tracks_per_artist: 10,
            validation_tracks: 2,
            duration: 10.0,
            sample_rate: 22050,
            partials: 8,
            min_hz: 200.0,
            max_hz: 8000.0,
            genres: 4,
            jitter: 0.3,
            noise: 0.02,
            seed: 0,
        }
    }
}

impl SyntheticConfig {
    pub fn validate(&self) -> Result<()> {
        let bad = |m: &str| Err(Error::Config(m.into()));
        if self.train_artists == 0 && self.eval_groups == 0 {
            return bad("synthetic dataset needs at least one artist");
        }
        if self.tracks_per_artist == 0 || self.partials == 0 || self.genres == 0 || self.sample_rate == 0 {
            return bad("synthetic counts must be at least 1");
        }
        if self.validation_tracks >= self.tracks_per_artist && self.train_artists > 0 {
            return bad("validation tracks must leave at least one training track per artist");
        }
        if !(self.duration > 0.0 && self.duration.is_finite()) {
            return bad("track duration must be positive");
        }
        if !(self.min_hz > 0.0 && self.min_hz < self.max_hz && self.max_hz < f64::from(self.sample_rate) / 2.0) {
            return bad("partial range must satisfy 0 < min_hz < max_hz < Nyquist");
        }
        if !(self.jitter >= 0.0 && self.noise >= 0.0) {
            return bad("jitter and noise level must be nonnegative");
        }
        Ok(())
    }
}

/// Persistent timbre of one artist.
#[derive(Debug, Clone, PartialEq)]
pub struct ArtistSignature {
    pub frequencies: Vec<f64>,
    pub weights: Vec<f64>,
    pub phases: Vec<f64>,
    pub tremolo_hz: f64,
    pub tremolo_depth: f64,
}

fn log_uniform<R: Rng>(rng: &mut R, lo: f64, hi: f64) -> f64 {
    (rng.random_range(lo.ln()..hi.ln())).exp()
}

impl ArtistSignature {
    /// Random signature whose first partials are `shared`.
    pub fn random<R: Rng>(rng: &mut R, shared: &[f64], partials: usize, min_hz: f64, max_hz: f64) -> Self {
        let mut frequencies: Vec<f64> = shared.iter().copied().take(partials).collect();
        while frequencies.len() < partials {
            frequencies.push(log_uniform(rng, min_hz, max_hz));
        }
        let weights = (0..partials).map(|_| rng.random_range(0.3..1.0)).collect();
        let phases = (0..partials).map(|_| rng.random_range(0.0..TAU)).collect();
        Self {
            frequencies,
            weights,
            phases,
            tremolo_hz: rng.random_range(0.5..4.0),
            tremolo_depth: rng.random_range(0.0..0.5),
        }
    }
}

/// Renders one track of `sig`, drawing jitter and noise from `rng`.
pub fn render_track<R: Rng>(sig: &ArtistSignature, config: &SyntheticConfig, rng: &mut R) -> Result<PcmSignal> {
    let sr = f64::from(config.sample_rate);
    let len = (config.duration * sr).round() as usize;
    let amps: Vec<f64> = sig
        .weights
        .iter()
        .map(|w| w * (1.0 + config.jitter * rng.random_range(-1.0..=1.0)).max(0.0))
        .collect();
    let norm = 0.45 / sig.weights.iter().sum::<f64>().max(1e-12);
    let steps: Vec<f64> = sig.frequencies.iter().map(|f| TAU * f / sr).collect();
    let samples = (0..len)
        .map(|i| {
            let t = i as f64;
            let tone: f64 = amps
                .iter()
                .zip(&steps)
                .zip(&sig.phases)
                .map(|((a, w), ph)| a * (w * t + ph).sin())
                .sum();
            let env = 1.0 + sig.tremolo_depth * (TAU * sig.tremolo_hz * t / sr).sin();
            let n: f64 = if config.noise > 0.0 {
                config.noise * Distribution::<f64>::sample(&StandardNormal, rng)
            } else {
                0.0
            };
            (norm * env * tone + n) as f32
        })
        .collect();
    PcmSignal::new(samples, config.sample_rate)
}

/// Manifest and homonym group map of a generated dataset.
#[derive(Debug, Clone, PartialEq)]
pub struct SyntheticDataset {
    pub records: Vec<ManifestRecord>,
    pub groups: BTreeMap<String, Vec<String>>,
}

struct PlannedArtist {
    id: String,
    genre: usize,
    split_from: Option<usize>,
    signature: ArtistSignature,
}

/// Writes `audio/*.wav`, `manifest.jsonl` and `groups.json` under `out_dir`.
///
/// Training artists cycle through the genres; tracks past
/// `tracks_per_artist - validation_tracks` go to the `val` split. Held-out
/// artists form the `test` split and the group map.
pub fn generate_synthetic(config: &SyntheticConfig, out_dir: impl AsRef<Path>) -> Result<SyntheticDataset> {
    config.validate()?;
    let out_dir = out_dir.as_ref();
    let audio_dir = out_dir.join("audio");
    std::fs::create_dir_all(&audio_dir).map_err(|e| Error::io(&audio_dir, e))?;

    let mut rng = ChaCha8Rng::seed_from_u64(config.seed);
    let shared_count = config.partials / 2;
    let genre_partials: Vec<Vec<f64>> = (0..config.genres)
        .map(|_| (0..shared_count).map(|_| log_uniform(&mut rng, config.min_hz, config.max_hz)).collect())
        .collect();

    let mut artists = Vec::new();
    for a in 0..config.train_artists {
        let genre = a % config.genres;
        artists.push(PlannedArtist {
            id: format!("artist{a:02}"),
            genre,
            split_from: Some(config.tracks_per_artist - config.validation_tracks),
            signature: ArtistSignature::random(&mut rng, &genre_partials[genre], config.partials, config.min_hz, config.max_hz),
        });
    }
    let mut groups = BTreeMap::new();
    for g in 0..config.eval_groups {
        let size = rng.random_range(MIN_GROUP..=MAX_GROUP);
        let mut members = Vec::with_capacity(size);
        for k in 0..size {
            let genre = rng.random_range(0..config.genres);
            let id = format!("held{g:02}_{k}");
            members.push(id.clone());
            artists.push(PlannedArtist {
                id,
                genre,
                split_from: None,
                signature: ArtistSignature::random(&mut rng, &genre_partials[genre], config.partials, config.min_hz, config.max_hz),
            });
        }
        groups.insert(format!("group{g:02}"), members);
    }

    let jobs: Vec<(usize, usize)> = (0..artists.len())
        .flat_map(|a| (0..config.tracks_per_artist).map(move |t| (a, t)))
        .collect();
    let records = jobs
        .par_iter()
        .enumerate()
        .map(|(job, &(a, t))| {
            let artist = &artists[a];
            let mut track_rng = ChaCha8Rng::seed_from_u64(config.seed);
            track_rng.set_stream(job as u64 + 1);
            let signal = render_track(&artist.signature, config, &mut track_rng)?;
            let track_id = format!("{}_t{t:02}", artist.id);
            let audio_path = format!("audio/{track_id}.wav");
            write_wav(out_dir.join(&audio_path), &signal)?;
            let split = match artist.split_from {
                Some(cut) if t >= cut => "val",
                Some(_) => "train",
                None => "test",
            };
            Ok(ManifestRecord {
                track_id,
                artist_id: artist.id.clone(),
                album_id: Some(format!("{}_album{}", artist.id, 2 * t / config.tracks_per_artist)),
                tags: vec![format!("genre{}", artist.genre)],
                audio_path,
                split: Some(split.into()),
            })
        })
        .collect::<Result<Vec<_>>>()?;

    save_manifest(out_dir.join("manifest.jsonl"), &records)?;
    let groups_path = out_dir.join("groups.json");
    let json = serde_json::to_string_pretty(&groups).map_err(|e| Error::Data(e.to_string()))?;
    std::fs::write(&groups_path, json + "\n").map_err(|e| Error::io(&groups_path, e))?;
    Ok(SyntheticDataset { records, groups })
}
