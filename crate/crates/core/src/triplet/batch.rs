use rand::seq::index::sample;
use rand::Rng;

use crate::error::{Error, Result};

/// `N x n` samples drawn for one iteration, stored artist-major.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Batch {
    /// Sample id (index into the training set) of each batch position.
    pub members: Vec<usize>,
    /// Artist label of each batch position.
    pub artists: Vec<usize>,
}

impl Batch {
    pub fn len(&self) -> usize {
        self.members.len()
    }

    pub fn is_empty(&self) -> bool {
        self.members.is_empty()
    }

    /// Checks the shape `enumerate_triplets` relies on: at least two
    /// artists, each occupying a contiguous run of at least two positions.
    pub fn validate(&self) -> Result<()> {
        if self.members.len() != self.artists.len() {
            return Err(Error::Data("batch members and labels differ in length".into()));
        }
        let runs = self.runs();
        if runs.len() < 2 {
            return Err(Error::Data("a batch needs samples from at least two artists".into()));
        }
        for (i, r) in runs.iter().enumerate() {
            if r.len() < 2 {
                return Err(Error::Data(format!("artist {} has a single sample in the batch", self.artists[r.start])));
            }
            if runs[..i].iter().any(|q| self.artists[q.start] == self.artists[r.start]) {
                return Err(Error::Data("batch positions of one artist are not contiguous".into()));
            }
        }
        Ok(())
    }

    /// Contiguous position ranges sharing one artist label.
    pub(crate) fn runs(&self) -> Vec<std::ops::Range<usize>> {
        let mut out = Vec::new();
        let mut start = 0;
        for i in 1..=self.artists.len() {
            if i == self.artists.len() || self.artists[i] != self.artists[start] {
                out.push(start..i);
                start = i;
            }
        }
        out
    }
}

/// Draws `n` distinct samples from each of `n_artists` distinct artists.
///
/// `by_artist[a]` lists the sample ids of artist `a`; artists with fewer than
/// `n` samples are never chosen.
pub fn sample_batch<R: Rng + ?Sized>(
    by_artist: &[Vec<usize>],
    n_artists: usize,
    n: usize,
    rng: &mut R,
) -> Result<Batch> {
    if n_artists < 2 || n < 2 {
        return Err(Error::Config(format!("batch needs N >= 2 and n >= 2, got N={n_artists}, n={n}")));
    }
    let eligible: Vec<usize> = (0..by_artist.len()).filter(|&a| by_artist[a].len() >= n).collect();
    if eligible.len() < n_artists {
        return Err(Error::Data(format!(
            "{} artists have at least {n} samples, the batch needs {n_artists}",
            eligible.len()
        )));
    }
    let mut members = Vec::with_capacity(n_artists * n);
    let mut artists = Vec::with_capacity(n_artists * n);
    for i in sample(rng, eligible.len(), n_artists) {
        let a = eligible[i];
        for j in sample(rng, by_artist[a].len(), n) {
            members.push(by_artist[a][j]);
            artists.push(a);
        }
    }
    Ok(Batch { members, artists })
}
