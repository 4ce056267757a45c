use std::collections::BTreeSet;

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use super::ManifestRecord;
use crate::error::{Error, Result};

/// Integer sizes proportional to `fractions` summing to `total`, by the
/// largest-remainder rule (ties go to the earlier entry).
pub fn largest_remainder(total: usize, fractions: &[f64]) -> Result<Vec<usize>> {
    if fractions.is_empty() || fractions.iter().any(|f| !(f.is_finite() && *f >= 0.0)) {
        return Err(Error::Config(format!("invalid split fractions {fractions:?}")));
    }
    let sum: f64 = fractions.iter().sum();
    if sum <= 0.0 {
        return Err(Error::Config("split fractions sum to zero".into()));
    }
    let quotas: Vec<f64> = fractions.iter().map(|f| f / sum * total as f64).collect();
    let mut sizes: Vec<usize> = quotas.iter().map(|q| q.floor() as usize).collect();
    let mut order: Vec<usize> = (0..quotas.len()).collect();
    order.sort_by(|&a, &b| {
        let (ra, rb) = (quotas[a] - quotas[a].floor(), quotas[b] - quotas[b].floor());
        rb.total_cmp(&ra).then(a.cmp(&b))
    });
    let left = total - sizes.iter().sum::<usize>();
    for &i in order.iter().take(left) {
        sizes[i] += 1;
    }
    Ok(sizes)
}

fn split_by<F>(records: &[ManifestRecord], fractions: &[f64], seed: u64, unit: F) -> Result<Vec<Vec<ManifestRecord>>>
where
    F: Fn(&ManifestRecord) -> Result<String>,
{
    let keys = records.iter().map(&unit).collect::<Result<Vec<_>>>()?;
    let mut units: Vec<&String> = keys.iter().collect::<BTreeSet<_>>().into_iter().collect();
    units.shuffle(&mut ChaCha8Rng::seed_from_u64(seed));
    let sizes = largest_remainder(units.len(), fractions)?;

    let mut which = std::collections::HashMap::new();
    let mut next = 0;
    for (s, &size) in sizes.iter().enumerate() {
        for u in &units[next..next + size] {
            which.insert(*u, s);
        }
        next += size;
    }
    let mut out = vec![Vec::new(); fractions.len()];
    for (r, k) in records.iter().zip(&keys) {
        out[which[k]].push(r.clone());
    }
    Ok(out)
}

/// Partitions whole albums across splits in the given proportions.
pub fn split_album_level(records: &[ManifestRecord], fractions: &[f64], seed: u64) -> Result<Vec<Vec<ManifestRecord>>> {
    split_by(records, fractions, seed, |r| {
        r.album_id
            .clone()
            .ok_or_else(|| Error::Data(format!("track {:?} has no album_id", r.track_id)))
    })
}

/// Partitions whole artists across splits in the given proportions.
pub fn split_artist_level(records: &[ManifestRecord], fractions: &[f64], seed: u64) -> Result<Vec<Vec<ManifestRecord>>> {
    split_by(records, fractions, seed, |r| Ok(r.artist_id.clone()))
}
