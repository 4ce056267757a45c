use super::embedding::{dist, ArtistModel, TrackEmbedding};
use crate::error::{Error, Result};

/// Distance between a test track and an artist model.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Score {
    pub distance: f64,
    pub same_artist: bool,
}

/// Operating point of a distance threshold.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RatePoint {
    pub threshold: f64,
    pub fpr: f64,
    pub fnr: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Eer {
    pub eer: f64,
    pub threshold: f64,
    /// `(FPR, FNR)` at every distinct score.
    pub curve: Vec<RatePoint>,
}

/// One score per (test, model) pair against the model centroid.
pub fn verification_scores(tests: &[TrackEmbedding], models: &[ArtistModel]) -> Result<Vec<Score>> {
    if tests.is_empty() || models.is_empty() {
        return Err(Error::Evaluation("verification needs test tracks and artist models".into()));
    }
    let scores: Vec<Score> = tests
        .iter()
        .flat_map(|t| {
            models.iter().map(move |m| Score {
                distance: dist(&t.vector, &m.centroid),
                same_artist: t.artist_id == m.artist_id,
            })
        })
        .collect();
    check_classes(&scores)?;
    Ok(scores)
}

fn check_classes(scores: &[Score]) -> Result<()> {
    if !scores.iter().any(|s| s.same_artist) {
        return Err(Error::Evaluation("no same-artist pairs to score".into()));
    }
    if !scores.iter().any(|s| !s.same_artist) {
        return Err(Error::Evaluation("no different-artist pairs to score".into()));
    }
    if scores.iter().any(|s| !s.distance.is_finite()) {
        return Err(Error::Evaluation("non-finite verification distance".into()));
    }
    Ok(())
}

/// Equal error rate of distance scores.
///
/// Accept when `distance <= t`: FNR(t) counts same-artist pairs above `t`,
/// FPR(t) different-artist pairs at or below it. The sweep starts from the
/// reject-all point (FNR 1, FPR 0) and visits every distinct score; where
/// FNR - FPR changes sign between two points, rates and threshold are
/// interpolated linearly.
pub fn compute_eer(scores: &[Score]) -> Result<Eer> {
    check_classes(scores)?;
    let mut sorted: Vec<Score> = scores.to_vec();
    sorted.sort_by(|a, b| a.distance.total_cmp(&b.distance));
    let n_pos = sorted.iter().filter(|s| s.same_artist).count() as f64;
    let n_neg = sorted.len() as f64 - n_pos;

    let mut curve = Vec::new();
    let (mut acc_pos, mut acc_neg) = (0usize, 0usize);
    let mut i = 0;
    while i < sorted.len() {
        let t = sorted[i].distance;
        while i < sorted.len() && sorted[i].distance == t {
            if sorted[i].same_artist {
                acc_pos += 1;
            } else {
                acc_neg += 1;
            }
            i += 1;
        }
        curve.push(RatePoint {
            threshold: t,
            fpr: acc_neg as f64 / n_neg,
            fnr: 1.0 - acc_pos as f64 / n_pos,
        });
    }

    let mut prev = RatePoint {
        threshold: curve[0].threshold,
        fpr: 0.0,
        fnr: 1.0,
    };
    for &p in &curve {
        let (d0, d1) = (prev.fnr - prev.fpr, p.fnr - p.fpr);
        if d1 <= 0.0 {
            let lambda = if d0 == d1 { 1.0 } else { d0 / (d0 - d1) };
            let eer = prev.fnr + lambda * (p.fnr - prev.fnr);
            let threshold = prev.threshold + lambda * (p.threshold - prev.threshold);
            return Ok(Eer { eer, threshold, curve });
        }
        prev = p;
    }
    unreachable!("the accept-all point has FNR 0")
}
