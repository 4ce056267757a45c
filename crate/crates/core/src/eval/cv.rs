use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use super::partition::{ami_from_labels, ari_from_labels};
use super::ward::{flat_clusters, ward_linkage, Dendrogram};
use crate::error::{Error, Result};

pub const GRID_SIZE: usize = 64;

/// Tracks of one homonym group with their true artist labels.
#[derive(Debug, Clone, PartialEq)]
pub struct ClusterGroup {
    pub group_id: String,
    pub truth: Vec<usize>,
    pub dendrogram: Dendrogram,
}

impl ClusterGroup {
    pub fn new(group_id: impl Into<String>, points: &[Vec<f64>], truth: Vec<usize>) -> Result<Self> {
        if points.len() != truth.len() {
            return Err(Error::Shape("one label per point is required".into()));
        }
        Ok(Self {
            group_id: group_id.into(),
            truth,
            dendrogram: ward_linkage(points)?,
        })
    }

    pub fn scores(&self, t: f64) -> (f64, f64) {
        let pred = flat_clusters(&self.dendrogram, t);
        (ari_from_labels(&self.truth, &pred), ami_from_labels(&self.truth, &pred))
    }
}

/// `GRID_SIZE` log-spaced thresholds from the smallest positive merge
/// distance to just above the largest one.
pub fn threshold_grid(groups: &[&ClusterGroup]) -> Result<Vec<f64>> {
    let ds = groups.iter().flat_map(|g| g.dendrogram.merges.iter().map(|m| m.distance));
    let (lo, hi) = ds.fold((f64::INFINITY, 0.0f64), |(lo, hi), d| {
        (if d > 0.0 { lo.min(d) } else { lo }, hi.max(d))
    });
    if !(hi > 0.0) {
        return Err(Error::Evaluation("no positive merge distance to build a threshold grid".into()));
    }
    let top = hi * (1.0 + 1e-6);
    if lo >= top {
        return Ok(vec![top]);
    }
    let (a, b) = (lo.ln(), top.ln());
    Ok((0..GRID_SIZE)
        .map(|i| (a + (b - a) * i as f64 / (GRID_SIZE - 1) as f64).exp())
        .collect())
}

/// Grid value maximising the mean AMI over `groups`; ties go to the smallest.
pub fn select_threshold(groups: &[&ClusterGroup], grid: &[f64]) -> Result<f64> {
    if groups.is_empty() || grid.is_empty() {
        return Err(Error::Evaluation("threshold selection needs groups and a grid".into()));
    }
    let mut sorted = grid.to_vec();
    sorted.sort_by(f64::total_cmp);
    let mut best = (f64::NEG_INFINITY, sorted[0]);
    for &t in &sorted {
        let mean = groups.iter().map(|g| g.scores(t).1).sum::<f64>() / groups.len() as f64;
        if mean > best.0 + 1e-12 {
            best = (mean, t);
        }
    }
    Ok(best.1)
}

#[derive(Debug, Clone, PartialEq)]
pub struct FoldResult {
    pub fold: usize,
    pub threshold: f64,
    pub groups: Vec<String>,
    pub ari: f64,
    pub ami: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct CvReport {
    pub folds: Vec<FoldResult>,
    /// Means over every test group of every fold.
    pub mean_ari: f64,
    pub mean_ami: f64,
}

/// `k`-fold cross-validation of the distance threshold over whole groups.
///
/// Groups are shuffled by `seed` and dealt round-robin into folds. Each fold
/// is clustered with the threshold chosen on the other folds.
pub fn cross_validate(groups: &[ClusterGroup], k: usize, seed: u64) -> Result<CvReport> {
    if k < 2 {
        return Err(Error::Config(format!("cross-validation needs at least 2 folds, got {k}")));
    }
    if groups.len() < k {
        return Err(Error::Data(format!("{} groups cannot fill {k} folds", groups.len())));
    }
    let mut order: Vec<usize> = (0..groups.len()).collect();
    order.shuffle(&mut ChaCha8Rng::seed_from_u64(seed));
    let fold_of = |pos: usize| pos % k;

    let mut folds = Vec::with_capacity(k);
    let (mut sum_ari, mut sum_ami) = (0.0, 0.0);
    for f in 0..k {
        let test: Vec<&ClusterGroup> = (0..order.len()).filter(|&p| fold_of(p) == f).map(|p| &groups[order[p]]).collect();
        let dev: Vec<&ClusterGroup> = (0..order.len()).filter(|&p| fold_of(p) != f).map(|p| &groups[order[p]]).collect();
        let grid = threshold_grid(&dev)?;
        let t = select_threshold(&dev, &grid)?;
        let (mut ari, mut ami) = (0.0, 0.0);
        for g in &test {
            let (r, m) = g.scores(t);
            ari += r;
            ami += m;
        }
        sum_ari += ari;
        sum_ami += ami;
        folds.push(FoldResult {
            fold: f,
            threshold: t,
            groups: test.iter().map(|g| g.group_id.clone()).collect(),
            ari: ari / test.len() as f64,
            ami: ami / test.len() as f64,
        });
    }
    Ok(CvReport {
        folds,
        mean_ari: sum_ari / groups.len() as f64,
        mean_ami: sum_ami / groups.len() as f64,
    })
}
