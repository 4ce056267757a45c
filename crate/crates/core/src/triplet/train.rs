use std::fmt::Write as _;
use std::time::Instant;

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::{
    apply_tag_biased_negatives, detect_collapse, enumerate_triplets, filter_trainable, sample_batch, triplet_loss,
    triplet_loss_grads, Batch, Triplet,
};
use crate::error::{Error, Result};
use crate::net::{rmsprop_step, Mode, Network, NetworkConfig, OptimizerState, Parameters, RmsPropConfig};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrainConfig {
    pub alpha: f64,
    /// `N`: distinct artists per batch.
    pub artists_per_batch: usize,
    /// `n`: samples per artist in a batch.
    pub samples_per_artist: usize,
    /// Probability of redrawing a negative among same-tag samples.
    pub tag_bias: f64,
    pub epochs: usize,
    pub iterations_per_epoch: usize,
    /// Epochs without validation improvement before stopping.
    pub patience: usize,
    pub collapse_threshold: f64,
    /// Consecutive collapsed iterations tolerated before aborting.
    pub collapse_patience: usize,
    pub optimizer: RmsPropConfig,
    pub seed: u64,
}

impl Default for TrainConfig {
    fn default() -> Self {
        Self {
            alpha: 0.2,
            artists_per_batch: 16,
            samples_per_artist: 4,
            tag_bias: 0.0,
            epochs: 20,
            iterations_per_epoch: 100,
            patience: 10,
            collapse_threshold: 1e-4,
            collapse_patience: 50,
            optimizer: RmsPropConfig::default(),
            seed: 0,
        }
    }
}

impl TrainConfig {
    pub fn validate(&self) -> Result<()> {
        let bad = |m: String| Err(Error::Config(m));
        if !(self.alpha > 0.0 && self.alpha.is_finite()) {
            return bad(format!("alpha must be positive, got {}", self.alpha));
        }
        if self.artists_per_batch < 2 || self.samples_per_artist < 2 {
            return bad(format!(
                "batches need N >= 2 and n >= 2, got N={} n={}",
                self.artists_per_batch, self.samples_per_artist
            ));
        }
        if !(0.0..=1.0).contains(&self.tag_bias) {
            return bad(format!("tag bias p must lie in [0, 1], got {}", self.tag_bias));
        }
        if self.iterations_per_epoch == 0 {
            return bad("iterations per epoch must be at least 1".into());
        }
        if !(self.collapse_threshold >= 0.0) {
            return bad("collapse threshold must be nonnegative".into());
        }
        let o = &self.optimizer;
        if !(o.learning_rate > 0.0 && (0.0..1.0).contains(&o.rho) && o.epsilon > 0.0) {
            return bad(format!("invalid optimizer settings {o:?}"));
        }
        Ok(())
    }
}

/// One training segment.
#[derive(Debug, Clone, PartialEq)]
pub struct TrainSample {
    pub artist: usize,
    /// Sorted tag ids.
    pub tags: Vec<u32>,
    pub frames: usize,
    /// `frames x n_mels` mel power, row-major.
    pub input: Vec<f32>,
}

#[derive(Debug, Clone, Default)]
pub struct TrainingSet {
    pub train: Vec<TrainSample>,
    /// Held-out segments for early stopping; may be empty.
    pub validation: Vec<TrainSample>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct IterationRecord {
    pub iteration: usize,
    /// Mean loss over the triplets with positive loss; 0 when there are none.
    pub mean_active_loss: f64,
    pub active_count: usize,
    pub collapse_variance: f64,
    pub wall_time_ms: f64,
}

#[derive(Debug, Clone)]
pub struct TrainOutcome {
    /// Parameters with the best validation loss (the last ones without validation data).
    pub network: Network<f32>,
    pub optimizer: OptimizerState<f32>,
    pub history: Vec<IterationRecord>,
    /// Mean validation triplet loss after each epoch.
    pub validation_loss: Vec<f64>,
    pub stopped_early: bool,
}

fn by_artist(samples: &[TrainSample]) -> Vec<Vec<usize>> {
    let n = samples.iter().map(|s| s.artist + 1).max().unwrap_or(0);
    let mut out = vec![Vec::new(); n];
    for (i, s) in samples.iter().enumerate() {
        out[s.artist].push(i);
    }
    out
}

/// Per-sample generator for dropout, independent of scheduling order.
fn sample_seed(seed: u64, iteration: usize, position: usize) -> u64 {
    let mut z = seed ^ (iteration as u64).wrapping_mul(0x9E37_79B9_7F4A_7C15) ^ (position as u64).rotate_left(32);
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

/// A fixed set of validation triplets: every positive pair of every artist
/// with a seeded uniform negative. Indices refer to `samples`.
fn validation_triplets(samples: &[TrainSample], seed: u64) -> Vec<Triplet> {
    let groups: Vec<Vec<usize>> = by_artist(samples).into_iter().filter(|g| g.len() >= 2).collect();
    if groups.len() < 2 {
        return Vec::new();
    }
    let batch = Batch {
        members: groups.iter().flatten().copied().collect(),
        artists: groups.iter().enumerate().flat_map(|(a, g)| vec![a; g.len()]).collect(),
    };
    let mut rng = ChaCha8Rng::seed_from_u64(seed ^ 0x5641_4C49_4441_5445);
    let mut triplets = enumerate_triplets(&batch, &mut rng).expect("groups have two samples each");
    for t in &mut triplets {
        t.anchor = batch.members[t.anchor];
        t.positive = batch.members[t.positive];
        t.negative = batch.members[t.negative];
    }
    triplets
}

fn validation_loss(net: &Network<f32>, samples: &[TrainSample], triplets: &[Triplet], alpha: f32) -> Result<f64> {
    let mut used = vec![false; samples.len()];
    for t in triplets {
        used[t.anchor] = true;
        used[t.positive] = true;
        used[t.negative] = true;
    }
    let embeddings: Vec<Vec<f32>> = samples
        .par_iter()
        .zip(&used)
        .map(|(s, &u)| {
            if !u {
                return Ok(Vec::new());
            }
            let mut rng = ChaCha8Rng::seed_from_u64(0);
            net.forward(&s.input, s.frames, Mode::Infer, &mut rng).map(|(e, _)| e)
        })
        .collect::<Result<_>>()?;
    let total: f64 = triplets
        .iter()
        .map(|t| {
            f64::from(triplet_loss(
                &embeddings[t.anchor],
                &embeddings[t.positive],
                &embeddings[t.negative],
                alpha,
            ))
        })
        .sum();
    Ok(total / triplets.len() as f64)
}

/// Trains an embedding network with the triplet loss.
///
/// Each iteration samples a batch, embeds it with the current parameters,
/// builds `N n (n - 1) / 2` triplets, optionally redraws negatives by tag,
/// keeps the triplets with positive loss and takes one RMSProp step on their
/// mean loss. Validation runs after every epoch.
pub fn train(data: &TrainingSet, net_config: &NetworkConfig, cfg: &TrainConfig) -> Result<TrainOutcome> {
    cfg.validate()?;
    let mut net = Network::<f32>::new(net_config.clone(), cfg.seed)?;
    let mut optimizer = OptimizerState::new(cfg.optimizer, &net.params);
    for s in data.train.iter().chain(&data.validation) {
        if s.input.len() != s.frames * net_config.n_mels {
            return Err(Error::Shape(format!(
                "training sample of {} values is not {} frames of {} mels",
                s.input.len(),
                s.frames,
                net_config.n_mels
            )));
        }
    }

    let groups = by_artist(&data.train);
    let val_triplets = validation_triplets(&data.validation, cfg.seed);
    let alpha = cfg.alpha as f32;
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    let mut history = Vec::new();
    let mut val_history = Vec::new();
    let mut best: Option<(f64, Parameters<f32>)> = None;
    let mut since_best = 0;
    let mut collapsed_for = 0;
    let mut stopped_early = false;
    let start = Instant::now();

    'epochs: for _epoch in 0..cfg.epochs {
        for _ in 0..cfg.iterations_per_epoch {
            let iteration = history.len();
            let batch = sample_batch(&groups, cfg.artists_per_batch, cfg.samples_per_artist, &mut rng)?;
            let record = step(&mut net, &mut optimizer, data, &batch, cfg, iteration, alpha, &mut rng, start)?;

            if record.collapse_variance < cfg.collapse_threshold {
                collapsed_for += 1;
                if collapsed_for > cfg.collapse_patience {
                    return Err(Error::Collapse {
                        variance: record.collapse_variance,
                        iterations: collapsed_for,
                    });
                }
            } else {
                collapsed_for = 0;
            }
            history.push(record);
        }

        if val_triplets.is_empty() {
            continue;
        }
        let loss = validation_loss(&net, &data.validation, &val_triplets, alpha)?;
        val_history.push(loss);
        match &best {
            Some((b, _)) if loss >= *b => {
                since_best += 1;
                if since_best >= cfg.patience {
                    stopped_early = true;
                    break 'epochs;
                }
            }
            _ => {
                best = Some((loss, net.params.clone()));
                since_best = 0;
            }
        }
    }

    if let Some((_, params)) = best {
        net.params = params;
    }
    Ok(TrainOutcome {
        network: net,
        optimizer,
        history,
        validation_loss: val_history,
        stopped_early,
    })
}

#[allow(clippy::too_many_arguments)]
fn step(
    net: &mut Network<f32>,
    optimizer: &mut OptimizerState<f32>,
    data: &TrainingSet,
    batch: &Batch,
    cfg: &TrainConfig,
    iteration: usize,
    alpha: f32,
    rng: &mut ChaCha8Rng,
    start: Instant,
) -> Result<IterationRecord> {
    let shared: &Network<f32> = net;
    let passes = batch
        .members
        .par_iter()
        .enumerate()
        .map(|(pos, &id)| {
            let s = &data.train[id];
            let mut drop_rng = ChaCha8Rng::seed_from_u64(sample_seed(cfg.seed, iteration, pos));
            shared.forward(&s.input, s.frames, Mode::Train, &mut drop_rng)
        })
        .collect::<Result<Vec<_>>>()?;
    let (embeddings, caches): (Vec<Vec<f32>>, Vec<_>) = passes.into_iter().unzip();

    let triplets = enumerate_triplets(batch, rng)?;
    let tags: Vec<Vec<u32>> = batch.members.iter().map(|&id| data.train[id].tags.clone()).collect();
    let (triplets, _) = apply_tag_biased_negatives(&triplets, batch, &tags, cfg.tag_bias, rng);
    let active = filter_trainable(&triplets, &embeddings, alpha);
    let collapse = detect_collapse(&embeddings, cfg.collapse_threshold)?;

    let d = net.config.embedding_dim;
    let mut grad_e = vec![vec![0.0f32; d]; batch.len()];
    let mut total = 0.0f64;
    let scale = 1.0 / active.len().max(1) as f32;
    for t in &active {
        let (a, p, n) = (&embeddings[t.anchor], &embeddings[t.positive], &embeddings[t.negative]);
        total += f64::from(triplet_loss(a, p, n, alpha));
        let (ga, gp, gn) = triplet_loss_grads(a, p, n, alpha);
        for (pos, g) in [(t.anchor, ga), (t.positive, gp), (t.negative, gn)] {
            grad_e[pos].iter_mut().zip(g).for_each(|(acc, v)| *acc += scale * v);
        }
    }

    if !active.is_empty() {
        let shared: &Network<f32> = net;
        let grads = caches
            .par_iter()
            .zip(&grad_e)
            .map(|(cache, g)| {
                if g.iter().all(|&v| v == 0.0) {
                    Ok(None)
                } else {
                    shared.backward(cache, g).map(Some)
                }
            })
            .collect::<Result<Vec<_>>>()?;
        let mut sum = net.params.zeros_like();
        for g in grads.iter().flatten() {
            sum.accumulate(g);
        }
        rmsprop_step(&mut net.params, &sum, optimizer)?;
    }

    Ok(IterationRecord {
        iteration,
        mean_active_loss: if active.is_empty() { 0.0 } else { total / active.len() as f64 },
        active_count: active.len(),
        collapse_variance: collapse.variance,
        wall_time_ms: start.elapsed().as_secs_f64() * 1e3,
    })
}

/// History as CSV with a header row.
pub fn history_csv(history: &[IterationRecord]) -> String {
    let mut out = String::from("iteration,mean_active_loss,active_count,collapse_variance,wall_time_ms\n");
    for r in history {
        let _ = writeln!(
            out,
            "{},{},{},{},{}",
            r.iteration,
            r.mean_active_loss,
            r.active_count,
            r.collapse_variance,
            r.wall_time_ms.round()
        );
    }
    out
}
