use std::collections::BTreeMap;

use super::embedding::{dist, ArtistModel};
use crate::error::{Error, Result};

/// What a test track is compared against.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum MatchMode {
    /// The artist centroid.
    Centroid,
    /// Every reference track of the artist.
    PerTrack,
}

impl std::str::FromStr for MatchMode {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "centroid" => Ok(Self::Centroid),
            "per_track" | "per-track" => Ok(Self::PerTrack),
            _ => Err(Error::Config(format!("unknown match mode {s:?} (centroid, per_track)"))),
        }
    }
}

/// Distance from `e` to `model` under `mode`.
pub fn model_distance(e: &[f64], model: &ArtistModel, mode: MatchMode) -> f64 {
    match mode {
        MatchMode::Centroid => dist(e, &model.centroid),
        MatchMode::PerTrack => model.members.iter().map(|m| dist(e, m)).fold(f64::INFINITY, f64::min),
    }
}

/// Artist of the nearest model; exact ties go to the smallest artist id.
pub fn classify_nn<'m>(test: &[f64], models: &'m [ArtistModel], mode: MatchMode) -> Result<&'m str> {
    let mut best: Option<(f64, &str)> = None;
    for m in models {
        let d = model_distance(test, m, mode);
        best = match best {
            Some((bd, ba)) if bd < d || (bd == d && ba <= m.artist_id.as_str()) => Some((bd, ba)),
            _ => Some((d, m.artist_id.as_str())),
        };
    }
    best.map(|(_, a)| a)
        .ok_or_else(|| Error::InsufficientInput("no artist models to classify against".into()))
}

/// Fraction of tracks whose assigned artist equals the ground truth.
pub fn classification_accuracy(
    assignments: &BTreeMap<String, String>,
    truth: &BTreeMap<String, String>,
) -> Result<f64> {
    if assignments.len() != truth.len() || assignments.keys().zip(truth.keys()).any(|(a, b)| a != b) {
        return Err(Error::Data("assignments and ground truth cover different tracks".into()));
    }
    if truth.is_empty() {
        return Err(Error::InsufficientInput("no tracks to score".into()));
    }
    let correct = assignments.iter().filter(|(k, v)| truth[*k] == **v).count();
    Ok(correct as f64 / truth.len() as f64)
}
