use std::collections::{BTreeMap, HashSet};
use std::io::{BufRead, BufReader, Write};
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Tolerance on the unit norm of stored embeddings.
pub const UNIT_TOLERANCE: f64 = 1e-6;

/// One line of an embeddings JSON Lines file.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrackEmbedding {
    pub track_id: String,
    pub artist_id: String,
    pub vector: Vec<f64>,
}

/// Reference embeddings of one artist.
#[derive(Debug, Clone, PartialEq)]
pub struct ArtistModel {
    pub artist_id: String,
    pub centroid: Vec<f64>,
    pub members: Vec<Vec<f64>>,
}

pub(crate) fn norm(v: &[f64]) -> f64 {
    v.iter().map(|x| x * x).sum::<f64>().sqrt()
}

pub(crate) fn dist(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| (x - y) * (x - y)).sum::<f64>().sqrt()
}

/// Mean of `vectors` projected back onto the unit sphere.
pub fn mean_on_sphere<V: AsRef<[f64]>>(vectors: &[V]) -> Result<Vec<f64>> {
    let first = vectors
        .first()
        .ok_or_else(|| Error::InsufficientInput("cannot average an empty set of embeddings".into()))?;
    let d = first.as_ref().len();
    if vectors.iter().any(|v| v.as_ref().len() != d) {
        return Err(Error::Shape("embeddings differ in dimension".into()));
    }
    let mut mean = vec![0.0; d];
    for v in vectors {
        mean.iter_mut().zip(v.as_ref()).for_each(|(m, x)| *m += x);
    }
    let n = norm(&mean);
    if !(n > 1e-12 * vectors.len() as f64) {
        return Err(Error::DegenerateEmbedding("mean embedding is the zero vector".into()));
    }
    Ok(mean.into_iter().map(|m| m / n).collect())
}

/// Track embedding from its segment embeddings.
pub fn track_embedding<V: AsRef<[f64]>>(segments: &[V]) -> Result<Vec<f64>> {
    mean_on_sphere(segments)
}

pub fn build_artist_model(artist_id: &str, tracks: &[Vec<f64>]) -> Result<ArtistModel> {
    Ok(ArtistModel {
        artist_id: artist_id.to_string(),
        centroid: mean_on_sphere(tracks)?,
        members: tracks.to_vec(),
    })
}

/// Splits each artist's embeddings, ordered by track id, into the first
/// `references` tracks (artist model) and the remaining test tracks.
/// Artists without any test track are left out entirely.
pub fn split_references(
    embeddings: &[TrackEmbedding],
    references: usize,
) -> Result<(Vec<ArtistModel>, Vec<TrackEmbedding>)> {
    if references == 0 {
        return Err(Error::Config("artist models need at least one reference track".into()));
    }
    let mut by_artist: BTreeMap<&str, Vec<&TrackEmbedding>> = BTreeMap::new();
    for e in embeddings {
        by_artist.entry(&e.artist_id).or_default().push(e);
    }
    let mut models = Vec::new();
    let mut tests = Vec::new();
    for (artist, mut tracks) in by_artist {
        if tracks.len() <= references {
            continue;
        }
        tracks.sort_by(|a, b| a.track_id.cmp(&b.track_id));
        let refs: Vec<Vec<f64>> = tracks[..references].iter().map(|t| t.vector.clone()).collect();
        models.push(build_artist_model(artist, &refs)?);
        tests.extend(tracks[references..].iter().map(|&t| t.clone()));
    }
    if models.is_empty() {
        return Err(Error::Data(format!("no artist has more than {references} tracks")));
    }
    Ok((models, tests))
}

fn check_embeddings(items: &[TrackEmbedding]) -> Result<()> {
    let mut seen = HashSet::new();
    let d = items.first().map_or(0, |e| e.vector.len());
    for e in items {
        if !seen.insert(e.track_id.as_str()) {
            return Err(Error::Data(format!("duplicate track_id {:?}", e.track_id)));
        }
        if e.vector.len() != d || d == 0 {
            return Err(Error::Shape(format!("embedding of {:?} has dimension {}", e.track_id, e.vector.len())));
        }
        let n = norm(&e.vector);
        if !n.is_finite() || (n - 1.0).abs() > UNIT_TOLERANCE {
            return Err(Error::Validation(format!("embedding of {:?} has norm {n}", e.track_id)));
        }
    }
    Ok(())
}

pub fn read_embeddings(path: impl AsRef<Path>) -> Result<Vec<TrackEmbedding>> {
    let path = path.as_ref();
    let file = std::fs::File::open(path).map_err(|e| Error::io(path, e))?;
    let mut out = Vec::new();
    for (i, line) in BufReader::new(file).lines().enumerate() {
        let line = line.map_err(|e| Error::io(path, e))?;
        if line.trim().is_empty() {
            continue;
        }
        out.push(
            serde_json::from_str(&line).map_err(|e| Error::Data(format!("{} line {}: {e}", path.display(), i + 1)))?,
        );
    }
    check_embeddings(&out)?;
    Ok(out)
}

pub fn write_embeddings(path: impl AsRef<Path>, items: &[TrackEmbedding]) -> Result<()> {
    let path = path.as_ref();
    check_embeddings(items)?;
    let mut buf = Vec::new();
    for e in items {
        serde_json::to_writer(&mut buf, e).map_err(|e| Error::Data(e.to_string()))?;
        buf.push(b'\n');
    }
    let mut file = std::fs::File::create(path).map_err(|e| Error::io(path, e))?;
    file.write_all(&buf).map_err(|e| Error::io(path, e))
}
