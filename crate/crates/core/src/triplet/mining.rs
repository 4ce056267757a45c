use rand::Rng;

use super::loss::{sq_dist, triplet_loss};
use super::Batch;
use crate::error::Result;
use crate::net::Scalar;

/// Batch positions of an (anchor, positive, negative) triple.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub struct Triplet {
    pub anchor: usize,
    pub positive: usize,
    pub negative: usize,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Hardness {
    /// The negative is at least as close as the positive.
    Hard,
    /// Correct order but inside the margin.
    SemiHard,
    /// Separated by at least the margin; zero loss.
    Easy,
}

/// One triplet per positive pair of each artist, with the negative drawn
/// uniformly from the other artists' positions. Yields `N n (n - 1) / 2`.
pub fn enumerate_triplets<R: Rng + ?Sized>(batch: &Batch, rng: &mut R) -> Result<Vec<Triplet>> {
    batch.validate()?;
    let runs = batch.runs();
    let total = batch.len();
    let mut out = Vec::with_capacity(runs.iter().map(|r| r.len() * (r.len() - 1) / 2).sum());
    for r in &runs {
        let others = total - r.len();
        for a in r.clone() {
            for p in a + 1..r.end {
                // index into the positions outside `r`, then skip over it
                let k = rng.random_range(0..others);
                let negative = if k < r.start { k } else { k + r.len() };
                out.push(Triplet {
                    anchor: a,
                    positive: p,
                    negative,
                });
            }
        }
    }
    Ok(out)
}

fn shares_tag(a: &[u32], b: &[u32]) -> bool {
    a.iter().any(|t| b.contains(t))
}

/// With probability `p` swaps each negative for a uniform draw among the
/// other-artist positions that share a tag with the anchor; when the anchor is
/// untagged or no such position exists, the original negative is kept.
///
/// `tags[i]` is the tag set of batch position `i`. The returned flags mark
/// the triplets whose negative was redrawn from the same-tag pool.
pub fn apply_tag_biased_negatives<R: Rng + ?Sized>(
    triplets: &[Triplet],
    batch: &Batch,
    tags: &[Vec<u32>],
    p: f64,
    rng: &mut R,
) -> (Vec<Triplet>, Vec<bool>) {
    let mut out = triplets.to_vec();
    let mut replaced = vec![false; triplets.len()];
    if p <= 0.0 {
        return (out, replaced);
    }
    let mut pool = Vec::new();
    for (t, flag) in out.iter_mut().zip(&mut replaced) {
        if !rng.random_bool(p.min(1.0)) {
            continue;
        }
        let anchor_tags = &tags[t.anchor];
        if anchor_tags.is_empty() {
            continue;
        }
        pool.clear();
        pool.extend(
            (0..batch.len())
                .filter(|&i| batch.artists[i] != batch.artists[t.anchor] && shares_tag(anchor_tags, &tags[i])),
        );
        if pool.is_empty() {
            continue;
        }
        t.negative = pool[rng.random_range(0..pool.len())];
        *flag = true;
    }
    (out, replaced)
}

pub fn classify_hardness<T: Scalar>(e_a: &[T], e_p: &[T], e_n: &[T], alpha: T) -> Hardness {
    let v = sq_dist(e_a, e_p) - sq_dist(e_a, e_n);
    if v >= T::zero() {
        Hardness::Hard
    } else if v > -alpha {
        Hardness::SemiHard
    } else {
        Hardness::Easy
    }
}

/// The triplets with positive loss, in input order.
pub fn filter_trainable<T: Scalar>(triplets: &[Triplet], embeddings: &[Vec<T>], alpha: T) -> Vec<Triplet> {
    triplets
        .iter()
        .filter(|t| {
            triplet_loss(&embeddings[t.anchor], &embeddings[t.positive], &embeddings[t.negative], alpha) > T::zero()
        })
        .copied()
        .collect()
}
