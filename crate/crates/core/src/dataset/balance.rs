use std::collections::BTreeMap;

use rand::seq::{index::sample, SliceRandom};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use crate::error::{Error, Result};

/// Keeps artists with at least `target` samples, each cut to a seeded
/// uniform subset of exactly `target`; smaller artists are dropped.
pub fn balance_cut<T: Clone>(by_artist: &BTreeMap<String, Vec<T>>, target: usize, seed: u64) -> Result<BTreeMap<String, Vec<T>>> {
    if target == 0 {
        return Err(Error::Config("balance target must be at least 1".into()));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    Ok(by_artist
        .iter()
        .filter(|(_, v)| v.len() >= target)
        .map(|(k, v)| {
            let mut idx = sample(&mut rng, v.len(), target).into_vec();
            idx.sort_unstable();
            (k.clone(), idx.into_iter().map(|i| v[i].clone()).collect())
        })
        .collect())
}

/// Brings every artist to exactly `target` samples by cycling through a
/// seeded shuffle of its samples (which also truncates larger artists).
pub fn balance_repeat<T: Clone>(by_artist: &BTreeMap<String, Vec<T>>, target: usize, seed: u64) -> Result<BTreeMap<String, Vec<T>>> {
    if target == 0 {
        return Err(Error::Config("balance target must be at least 1".into()));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    by_artist
        .iter()
        .map(|(k, v)| {
            if v.is_empty() {
                return Err(Error::Data(format!("artist {k:?} has no samples to repeat")));
            }
            let mut order: Vec<usize> = (0..v.len()).collect();
            order.shuffle(&mut rng);
            Ok((k.clone(), order.iter().cycle().take(target).map(|&i| v[i].clone()).collect()))
        })
        .collect()
}
