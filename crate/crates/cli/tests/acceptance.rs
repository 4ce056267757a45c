//! Acceptance suite. Prints one PASS/FAIL line per criterion and fails if any
//! criterion fails. The end-to-end stages train real networks through the
//! CLI binary and take several minutes on one CPU.

use std::collections::BTreeMap;
use std::fmt::Write as _;
use std::io::Write as _;
use std::path::{Path, PathBuf};
use std::process::Command;
use std::time::Instant;

use artist_embed::dataset::{build_homonym_groups, load_group_map, load_manifest};
use artist_embed::eval::{
    ami_from_labels, ari_from_labels, build_artist_model, compute_eer, cross_validate, expected_mutual_information,
    flat_clusters, read_embeddings, track_embedding, ward_linkage, ClusterGroup, Score,
};
use artist_embed::net::{
    init_params, rmsprop_step, Mode, Network, NetworkConfig, OptimizerState, Padding, PoolSpec, RmsPropConfig,
};
use artist_embed::pipeline::cluster_groups;
use artist_embed::triplet::{
    apply_tag_biased_negatives, enumerate_triplets, filter_trainable, sample_batch, triplet_loss, triplet_loss_grads,
    Triplet,
};
use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

// Pinned tolerances.
const GRAD_REL_TOL: f64 = 1e-4;
const GRAD_REL_FLOOR: f64 = 1e-6;
const GRAD_PROBES: usize = 32;
const TRIPLET_GRAD_TOL: f64 = 1e-8;
const GRAD_BUDGET_SECS: f64 = 300.0;
const UNIT_TOL: f64 = 1e-6;
const FUZZ_EMBEDDINGS: usize = 10_000;
const ARI_TOL: f64 = 1e-9;
const EMI_SHUFFLES: usize = 100_000;
const SIGMAS: f64 = 3.0;
const WARD_TOL: f64 = 1e-9;
const EER_TOL: f64 = 1e-6;
const RMSPROP_TOL: f64 = 1e-10;
const LOSS_DROP: f64 = 0.5;
const LOSS_HEAD: usize = 20;
const LOSS_TAIL: usize = 100;
const MAX_EER: f64 = 0.25;
const TARGET_AMI: f64 = 0.5;
const PERMUTATIONS: usize = 999;
const MAX_P: f64 = 0.01;
const E2E_BUDGET_SECS: f64 = 1800.0;

struct Outcome {
    pass: bool,
    detail: String,
}

fn outcome(pass: bool, detail: String) -> Outcome {
    Outcome { pass, detail }
}

fn say(line: &str) {
    // stderr is not captured by the test harness
    let _ = std::io::stderr().write_all(format!("{line}\n").as_bytes());
}

fn unit(rng: &mut impl Rng, d: usize) -> Vec<f64> {
    loop {
        let v: Vec<f64> = (0..d).map(|_| rng.random_range(-1.0..1.0)).collect();
        let n = norm(&v);
        if n > 1e-3 {
            return v.into_iter().map(|x| x / n).collect();
        }
    }
}

fn norm(v: &[f64]) -> f64 {
    v.iter().map(|x| x * x).sum::<f64>().sqrt()
}

fn sq(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| (x - y) * (x - y)).sum()
}

fn tiny_net() -> NetworkConfig {
    NetworkConfig {
        n_mels: 16,
        embedding_dim: 4,
        channels: vec![4, 4, 6],
        kernel: 3,
        pools: vec![PoolSpec { size: 3, stride: 2, padding: Padding::Same }; 3],
        dropout: 0.3,
        compression_gain: 1e4,
    }
}

// ---------------------------------------------------------------- gradients

fn gradients() -> Outcome {
    const FRAMES: usize = 12;
    let start = Instant::now();
    let mut rng = ChaCha8Rng::seed_from_u64(11);
    let h = 1e-6;
    let objective = |net: &Network<f64>, x: &[f64], w: &[f64], seed: u64| -> f64 {
        let (e, _) = net.forward(x, FRAMES, Mode::Train, &mut ChaCha8Rng::seed_from_u64(seed)).unwrap();
        e.iter().zip(w).map(|(a, b)| a * b).sum()
    };
    let mut worst = 0.0f64;
    let mut probes = 0;
    while probes < GRAD_PROBES {
        let mut net = Network::<f64>::new(tiny_net(), rng.random()).unwrap();
        let x: Vec<f64> = (0..FRAMES * 16).map(|_| rng.random_range(0.0..1e-3)).collect();
        let w: Vec<f64> = (0..4).map(|_| rng.random_range(-1.0..1.0)).collect();
        let mask_seed: u64 = rng.random();
        let Ok((_, cache)) = net.forward(&x, FRAMES, Mode::Train, &mut ChaCha8Rng::seed_from_u64(mask_seed)) else {
            continue;
        };
        let grads = net.backward(&cache, &w).unwrap();
        for _ in 0..4 {
            let t = rng.random_range(0..grads.tensors().len());
            let i = rng.random_range(0..grads.tensors()[t].len());
            let analytic = grads.tensors()[t][i];
            let orig = net.params.tensors()[t][i];
            net.params.tensors_mut()[t][i] = orig + h;
            let up = objective(&net, &x, &w, mask_seed);
            net.params.tensors_mut()[t][i] = orig - h;
            let down = objective(&net, &x, &w, mask_seed);
            net.params.tensors_mut()[t][i] = orig;
            let numeric = (up - down) / (2.0 * h);
            let rel = (analytic - numeric).abs() / analytic.abs().max(numeric.abs()).max(GRAD_REL_FLOOR);
            worst = worst.max(rel);
            probes += 1;
        }
    }

    let mut worst_triplet = 0.0f64;
    let mut checked = 0;
    while checked < 50 {
        let mut e = [unit(&mut rng, 8), unit(&mut rng, 8), unit(&mut rng, 8)];
        if triplet_loss(&e[0], &e[1], &e[2], 0.2) < 1e-3 {
            continue;
        }
        let (ga, gp, gn) = triplet_loss_grads(&e[0], &e[1], &e[2], 0.2);
        let g = [ga, gp, gn];
        for which in 0..3 {
            for k in 0..8 {
                let orig = e[which][k];
                e[which][k] = orig + h;
                let up = triplet_loss(&e[0], &e[1], &e[2], 0.2);
                e[which][k] = orig - h;
                let down = triplet_loss(&e[0], &e[1], &e[2], 0.2);
                e[which][k] = orig;
                let numeric = (up - down) / (2.0 * h);
                worst_triplet = worst_triplet.max((g[which][k] - numeric).abs() / numeric.abs().max(1.0));
            }
        }
        checked += 1;
    }
    let secs = start.elapsed().as_secs_f64();
    outcome(
        worst < GRAD_REL_TOL && worst_triplet < TRIPLET_GRAD_TOL && secs < GRAD_BUDGET_SECS,
        format!(
            "{probes} network probes, worst rel err {worst:.2e} (< {GRAD_REL_TOL:e}); \
             triplet worst {worst_triplet:.2e} (< {TRIPLET_GRAD_TOL:e}); {secs:.1}s"
        ),
    )
}

// ------------------------------------------------------------- unit sphere

fn unit_sphere() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(12);
    let mut cfg = tiny_net();
    cfg.embedding_dim = 16;
    let mut worst = 0.0f64;
    let (mut from_forward, mut from_tracks, mut from_models, mut rejected) = (0, 0, 0, 0);
    let mut pool: Vec<Vec<f64>> = Vec::new();
    let check = |v: &[f64], worst: &mut f64| *worst = worst.max((norm(v) - 1.0).abs());

    let mut nets = Vec::new();
    for s in 0..8 {
        nets.push(Network::<f32>::new(cfg.clone(), 1000 + s).unwrap());
    }
    while from_forward < 4000 {
        let net = &nets[rng.random_range(0..nets.len())];
        let frames = rng.random_range(8..40);
        let scale = 10f32.powi(rng.random_range(-6..3));
        let x: Vec<f32> = (0..frames * 16).map(|_| scale * rng.random::<f32>()).collect();
        let mode = if rng.random_bool(0.5) { Mode::Train } else { Mode::Infer };
        match net.forward(&x, frames, mode, &mut rng) {
            Ok((e, _)) => {
                let e: Vec<f64> = e.into_iter().map(f64::from).collect();
                check(&e, &mut worst);
                pool.push(e);
                from_forward += 1;
            }
            Err(_) => rejected += 1,
        }
    }
    let draw = |rng: &mut ChaCha8Rng| -> Vec<Vec<f64>> {
        let k = rng.random_range(1..12);
        (0..k).map(|_| pool[rng.random_range(0..pool.len())].clone()).collect()
    };
    while from_tracks < 3000 {
        if let Ok(e) = track_embedding(&draw(&mut rng)) {
            check(&e, &mut worst);
            from_tracks += 1;
        } else {
            rejected += 1;
        }
    }
    while from_models < FUZZ_EMBEDDINGS - 7000 {
        let tracks: Vec<Vec<f64>> = draw(&mut rng)
            .into_iter()
            .map(|v| if rng.random_bool(0.5) { v } else { unit(&mut rng, 16) })
            .collect();
        if let Ok(m) = build_artist_model("a", &tracks) {
            check(&m.centroid, &mut worst);
            from_models += 1;
        } else {
            rejected += 1;
        }
    }
    let total = from_forward + from_tracks + from_models;
    outcome(
        worst <= UNIT_TOL && total >= FUZZ_EMBEDDINGS,
        format!(
            "{total} embeddings ({from_forward} forward, {from_tracks} track, {from_models} model; \
             {rejected} degenerate inputs rejected), worst | |e| - 1 | = {worst:.2e}"
        ),
    )
}

// ----------------------------------------------------------- combinatorics

fn combinatorics() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(13);
    let mut count_ok = true;
    let mut shapes = Vec::new();
    for _ in 0..20 {
        let n_artists = rng.random_range(2..20);
        let n = rng.random_range(2..9);
        let pool_artists = n_artists + rng.random_range(0..5);
        let mut next = 0;
        let by_artist: Vec<Vec<usize>> = (0..pool_artists)
            .map(|_| {
                let k = rng.random_range(n..n + 6);
                next += k;
                (next - k..next).collect()
            })
            .collect();
        let batch = sample_batch(&by_artist, n_artists, n, &mut rng).unwrap();
        let triplets = enumerate_triplets(&batch, &mut rng).unwrap();
        let structural = triplets.iter().all(|t| {
            batch.artists[t.anchor] == batch.artists[t.positive]
                && t.anchor != t.positive
                && batch.artists[t.anchor] != batch.artists[t.negative]
        });
        count_ok &= triplets.len() == n_artists * n * (n - 1) / 2 && structural;
        shapes.push(format!("{n_artists}x{n}"));
    }

    let alpha = 0.2;
    let embeddings: Vec<Vec<f64>> = (0..60).map(|_| unit(&mut rng, 6)).collect();
    let random: Vec<Triplet> = (0..1000)
        .map(|_| {
            let mut idx: Vec<usize> = (0..60).collect();
            idx.shuffle(&mut rng);
            Triplet { anchor: idx[0], positive: idx[1], negative: idx[2] }
        })
        .collect();
    let expected: Vec<Triplet> = random
        .iter()
        .copied()
        .filter(|t| {
            let e = |i: usize| &embeddings[i];
            let l = sq(e(t.anchor), e(t.positive)) - sq(e(t.anchor), e(t.negative)) + alpha;
            l > 0.0
        })
        .collect();
    let got = filter_trainable(&random, &embeddings, alpha);
    let filter_ok = got == expected;
    outcome(
        count_ok && filter_ok,
        format!(
            "counts exact on 20 shapes ({}); filter kept {}/1000, {}",
            shapes.join(" "),
            got.len(),
            if filter_ok { "identical to oracle" } else { "DIFFERS from oracle" }
        ),
    )
}

// ---------------------------------------------------------------- tag bias

fn tag_bias() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(14);
    // eight artists, every batch holds all of them; genres pair artists up
    let by_artist: Vec<Vec<usize>> = (0..8).map(|a| (a * 6..a * 6 + 6).collect()).collect();
    let mut ok = true;
    let mut parts = Vec::new();
    for p in [0.0, 0.25, 0.5, 0.75, 1.0] {
        let (mut total, mut replaced, mut valid) = (0usize, 0usize, true);
        while total < 10_000 {
            let batch = sample_batch(&by_artist, 8, 4, &mut rng).unwrap();
            let tags: Vec<Vec<u32>> = batch.artists.iter().map(|&a| vec![(a % 4) as u32]).collect();
            let triplets = enumerate_triplets(&batch, &mut rng).unwrap();
            let before = rng.clone();
            let (out, flags) = apply_tag_biased_negatives(&triplets, &batch, &tags, p, &mut rng);
            if p == 0.0 {
                valid &= out == triplets && flags.iter().all(|f| !f) && rng == before;
            }
            let has_pool = |t: &Triplet| {
                (0..batch.len()).any(|i| batch.artists[i] != batch.artists[t.anchor] && tags[i] == tags[t.anchor])
            };
            valid &= triplets.iter().all(has_pool);
            for ((t, &f), orig) in out.iter().zip(&flags).zip(&triplets) {
                if f {
                    valid &= tags[t.negative] == tags[t.anchor] && batch.artists[t.negative] != batch.artists[t.anchor];
                    replaced += 1;
                } else {
                    valid &= t == orig;
                }
            }
            total += triplets.len();
        }
        let freq = replaced as f64 / total as f64;
        let sigma = (p * (1.0 - p) / total as f64).sqrt();
        let within = (freq - p).abs() <= SIGMAS * sigma;
        ok &= within && valid;
        parts.push(format!(
            "p={p}: {freq:.4} (±{:.4}){}",
            SIGMAS * sigma,
            if valid { "" } else { " INVALID" }
        ));
    }
    outcome(ok, format!("{}; p=0 leaves triplets and rng untouched", parts.join(", ")))
}

// ------------------------------------------------------------ metric oracles

fn random_labels(rng: &mut impl Rng, n: usize) -> Vec<usize> {
    let k = rng.random_range(1..=n);
    (0..n).map(|_| rng.random_range(0..k)).collect()
}

/// ARI by counting agreeing element pairs one by one.
fn ari_oracle(a: &[usize], b: &[usize]) -> f64 {
    let n = a.len();
    let (mut both, mut in_a, mut in_b, mut pairs) = (0.0, 0.0, 0.0, 0.0);
    for i in 0..n {
        for j in i + 1..n {
            let sa = a[i] == a[j];
            let sb = b[i] == b[j];
            pairs += 1.0;
            in_a += f64::from(u8::from(sa));
            in_b += f64::from(u8::from(sb));
            both += f64::from(u8::from(sa && sb));
        }
    }
    let expected = in_a * in_b / pairs;
    let max = 0.5 * (in_a + in_b);
    if max == expected {
        return 1.0;
    }
    (both - expected) / (max - expected)
}

fn entropy_of(labels: &[usize]) -> f64 {
    let n = labels.len() as f64;
    let mut counts = BTreeMap::new();
    for &l in labels {
        *counts.entry(l).or_insert(0.0) += 1.0;
    }
    counts.values().map(|&c: &f64| -(c / n) * (c / n).ln()).sum()
}

fn mi_of(a: &[usize], b: &[usize]) -> f64 {
    let joint: Vec<usize> = a.iter().zip(b).map(|(&x, &y)| x * 1000 + y).collect();
    entropy_of(a) + entropy_of(b) - entropy_of(&joint)
}

fn sizes(labels: &[usize]) -> Vec<usize> {
    let mut counts = BTreeMap::new();
    for &l in labels {
        *counts.entry(l).or_insert(0usize) += 1;
    }
    counts.into_values().collect()
}

/// P(|Z| > z) for a standard normal, by Simpson integration of the density.
fn two_sided_tail(z: f64) -> f64 {
    let steps = 2000;
    let h = z / steps as f64;
    let pdf = |x: f64| (-0.5 * x * x).exp() / (2.0 * std::f64::consts::PI).sqrt();
    let mut area = pdf(0.0) + pdf(z);
    for i in 1..steps {
        area += pdf(i as f64 * h) * if i % 2 == 1 { 4.0 } else { 2.0 };
    }
    1.0 - 2.0 * area * h / 3.0
}

fn metric_oracles() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(15);
    let (mut ari_worst, mut emi_fail, mut ami_fail, mut self_ok) = (0.0f64, 0, 0, true);
    let mut worst_z = 0.0f64;
    for _ in 0..200 {
        let n = rng.random_range(2..=12);
        let a = random_labels(&mut rng, n);
        let b = random_labels(&mut rng, n);
        ari_worst = ari_worst.max((ari_from_labels(&a, &b) - ari_oracle(&a, &b)).abs());
        self_ok &= ari_from_labels(&a, &a) == 1.0 && ami_from_labels(&a, &a) == 1.0;

        // E[MI] estimated by shuffling b against a
        let mut shuffled = b.clone();
        let (mut sum, mut sum_sq) = (0.0, 0.0);
        for _ in 0..EMI_SHUFFLES {
            shuffled.shuffle(&mut rng);
            let mi = mi_of(&a, &shuffled);
            sum += mi;
            sum_sq += mi * mi;
        }
        let m = EMI_SHUFFLES as f64;
        let mean = sum / m;
        let se = ((sum_sq / m - mean * mean).max(0.0) / (m - 1.0)).sqrt();
        let emi = expected_mutual_information(&sizes(&a), &sizes(&b));
        let band = SIGMAS * se + 1e-9;
        worst_z = worst_z.max(if se > 0.0 { (emi - mean).abs() / se } else { 0.0 });
        emi_fail += usize::from((emi - mean).abs() > band);

        let mi = mi_of(&a, &b);
        let h = entropy_of(&a).max(entropy_of(&b));
        let ami = ami_from_labels(&a, &b);
        if (h - mean).abs() > 1e-6 {
            // first-order propagation of the estimate's uncertainty
            let oracle = (mi - mean) / (h - mean);
            let slope = ((mi - h) / ((h - mean) * (h - mean))).abs();
            ami_fail += usize::from((ami - oracle).abs() > slope * band + 1e-9);
        }
    }
    outcome(
        ari_worst <= ARI_TOL && emi_fail == 0 && ami_fail == 0 && self_ok,
        format!(
            "200 pairs: ARI worst |diff| {ari_worst:.1e}; E[MI] outside 3 sigma: {emi_fail} \
             (max |z| {worst_z:.2}; {:.2} misses expected by chance); AMI outside band: {ami_fail}; \
             self-agreement {}",
            200.0 * two_sided_tail(SIGMAS),
            if self_ok { "1" } else { "BROKEN" }
        ),
    )
}

// --------------------------------------------------------------------- Ward

/// Greedy Ward from cluster centroids: merge the pair with the smallest
/// increase in within-cluster sum of squares.
fn ward_oracle(points: &[Vec<f64>]) -> Vec<(usize, usize, f64, usize)> {
    let n = points.len();
    let mut clusters: Vec<(usize, Vec<usize>)> = (0..n).map(|i| (i, vec![i])).collect();
    let centroid = |members: &[usize]| -> Vec<f64> {
        let d = points[0].len();
        let mut c = vec![0.0; d];
        for &m in members {
            for k in 0..d {
                c[k] += points[m][k];
            }
        }
        c.iter_mut().for_each(|x| *x /= members.len() as f64);
        c
    };
    let mut out = Vec::new();
    for step in 0..n - 1 {
        let mut best = (f64::INFINITY, 0, 0);
        for i in 0..clusters.len() {
            for j in i + 1..clusters.len() {
                let (na, nb) = (clusters[i].1.len() as f64, clusters[j].1.len() as f64);
                let delta = na * nb / (na + nb) * sq(&centroid(&clusters[i].1), &centroid(&clusters[j].1));
                if delta < best.0 {
                    best = (delta, i, j);
                }
            }
        }
        let (delta, i, j) = best;
        let (ida, idb) = (clusters[i].0.min(clusters[j].0), clusters[i].0.max(clusters[j].0));
        let mut members = clusters[i].1.clone();
        members.extend(&clusters[j].1);
        out.push((ida, idb, (2.0 * delta).sqrt(), members.len()));
        clusters.remove(j);
        clusters.remove(i);
        clusters.push((n + step, members));
    }
    out
}

fn same_cluster_pairs(labels: &[usize]) -> Vec<(usize, usize)> {
    let mut v = Vec::new();
    for i in 0..labels.len() {
        for j in i + 1..labels.len() {
            if labels[i] == labels[j] {
                v.push((i, j));
            }
        }
    }
    v
}

fn ward() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(16);
    let (mut worst, mut structure_ok, mut monotone_ok) = (0.0f64, true, true);
    for _ in 0..50 {
        let n = rng.random_range(2..=50);
        let d = rng.random_range(1..6);
        let points: Vec<Vec<f64>> = (0..n).map(|_| (0..d).map(|_| rng.random_range(-1.0..1.0)).collect()).collect();
        let dendro = ward_linkage(&points).unwrap();
        let oracle = ward_oracle(&points);
        for (m, o) in dendro.merges.iter().zip(&oracle) {
            structure_ok &= (m.a, m.b, m.size) == (o.0, o.1, o.3);
            worst = worst.max((m.distance - o.2).abs());
        }
        structure_ok &= dendro.merges.len() == oracle.len();

        let mut ts: Vec<f64> = dendro.merges.iter().map(|m| m.distance).collect();
        ts.extend([0.0, 1e9]);
        ts.extend(dendro.merges.iter().map(|m| m.distance * (1.0 + 1e-9)));
        ts.sort_by(f64::total_cmp);
        let partitions: Vec<Vec<usize>> = ts.iter().map(|&t| flat_clusters(&dendro, t)).collect();
        for w in partitions.windows(2) {
            let coarse = &w[1];
            monotone_ok &= same_cluster_pairs(&w[0]).iter().all(|&(i, j)| coarse[i] == coarse[j]);
        }
    }
    outcome(
        structure_ok && worst <= WARD_TOL && monotone_ok,
        format!(
            "50 sets: merge order {}, worst distance diff {worst:.1e}; refinement monotone {}",
            if structure_ok { "identical" } else { "DIFFERS" },
            if monotone_ok { "yes" } else { "NO" }
        ),
    )
}

// ---------------------------------------------------------------------- EER

/// EER by bisection along the piecewise-linear (FPR, FNR) path through the
/// reject-all point and the rates at every distinct score, each counted
/// directly.
fn eer_oracle(scores: &[Score]) -> f64 {
    let mut ts: Vec<f64> = scores.iter().map(|s| s.distance).collect();
    ts.sort_by(f64::total_cmp);
    ts.dedup();
    let pos = scores.iter().filter(|s| s.same_artist).count() as f64;
    let neg = scores.len() as f64 - pos;
    let mut path = vec![(0.0, 1.0)];
    for &t in &ts {
        let fpr = scores.iter().filter(|s| !s.same_artist && s.distance <= t).count() as f64 / neg;
        let fnr = scores.iter().filter(|s| s.same_artist && s.distance > t).count() as f64 / pos;
        path.push((fpr, fnr));
    }
    let at = |u: f64| -> (f64, f64) {
        let i = (u.floor() as usize).min(path.len() - 2);
        let f = u - i as f64;
        let (a, b) = (path[i], path[i + 1]);
        (a.0 + f * (b.0 - a.0), a.1 + f * (b.1 - a.1))
    };
    let gap = |u: f64| {
        let (fpr, fnr) = at(u);
        fnr - fpr
    };
    // first vertex where the gap reaches zero brackets the crossing
    let k = (0..path.len()).find(|&i| path[i].1 - path[i].0 <= 0.0).unwrap();
    let (mut lo, mut hi) = ((k.max(1) - 1) as f64, k as f64);
    for _ in 0..200 {
        let mid = 0.5 * (lo + hi);
        if gap(mid) > 0.0 {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    at(hi).1
}

fn eer() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(17);
    let mut worst = 0.0f64;
    for case in 0..100 {
        let n_pos = rng.random_range(1..60);
        let n_neg = rng.random_range(1..200);
        let shift = rng.random_range(0.0..1.5);
        // coarse rounding on some sets creates tied scores
        let q = if case % 3 == 0 { 20.0 } else { 1e12 };
        let mut draw = |mu: f64, same: bool| Score {
            distance: ((mu + rng.random_range(0.0..1.0)) * q).round() / q,
            same_artist: same,
        };
        let mut scores: Vec<Score> = (0..n_pos).map(|_| draw(0.0, true)).collect();
        scores.extend((0..n_neg).map(|_| draw(shift, false)));
        let got = compute_eer(&scores).unwrap().eer;
        worst = worst.max((got - eer_oracle(&scores)).abs());
    }
    let separated: Vec<Score> = (0..50)
        .map(|i| Score { distance: i as f64 / 100.0, same_artist: true })
        .chain((0..80).map(|i| Score { distance: 1.0 + i as f64 / 100.0, same_artist: false }))
        .collect();
    let sep = compute_eer(&separated).unwrap().eer;
    outcome(
        worst <= EER_TOL && sep == 0.0,
        format!("100 sets: worst |diff| {worst:.1e}; separated scores give {sep}"),
    )
}

// ------------------------------------------------------------------ RMSProp

fn rmsprop() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(18);
    let cfg = RmsPropConfig::default();
    let mut params = init_params::<f64>(&tiny_net(), 3).unwrap();
    let mut state = OptimizerState::new(cfg, &params);
    let mut w_ref: Vec<Vec<f64>> = params.tensors().iter().map(|t| t.to_vec()).collect();
    let mut s_ref: Vec<Vec<f64>> = w_ref.iter().map(|t| vec![0.0; t.len()]).collect();
    let (lr, rho, eps) = (1e-3, 0.9, 1e-8);
    let mut worst = 0.0f64;
    for _ in 0..100 {
        let scale = 10f64.powi(rng.random_range(-4..2));
        let mut grads = params.zeros_like();
        for g in grads.tensors_mut() {
            g.iter_mut().for_each(|x| *x = scale * rng.random_range(-1.0..1.0));
        }
        for ((w, s), g) in w_ref.iter_mut().zip(&mut s_ref).zip(grads.tensors()) {
            for k in 0..w.len() {
                s[k] = rho * s[k] + (1.0 - rho) * g[k] * g[k];
                w[k] -= lr * g[k] / (s[k].sqrt() + eps);
            }
        }
        rmsprop_step(&mut params, &grads, &mut state).unwrap();
        for (w, r) in params.tensors().iter().zip(&w_ref) {
            for (a, b) in w.iter().zip(r) {
                worst = worst.max((a - b).abs());
            }
        }
        for (s, r) in state.accumulators.iter().zip(&s_ref) {
            for (a, b) in s.iter().zip(r) {
                worst = worst.max((a - b).abs());
            }
        }
    }
    outcome(
        worst <= RMSPROP_TOL && (cfg.learning_rate, cfg.rho, cfg.epsilon) == (lr, rho, eps),
        format!("100 steps over {} weights: worst |diff| {worst:.1e}", params.len()),
    )
}

// ----------------------------------------------------------- end to end

fn bin() -> Command {
    Command::new(env!("CARGO_BIN_EXE_artist-embed"))
}

fn cli(args: &[&str]) -> Result<String, String> {
    let out = bin().args(args).output().map_err(|e| e.to_string())?;
    if out.status.success() {
        Ok(String::from_utf8_lossy(&out.stdout).into_owned())
    } else {
        Err(format!("{args:?} failed: {}", String::from_utf8_lossy(&out.stderr)))
    }
}

fn p(path: &Path) -> &str {
    path.to_str().unwrap()
}

fn csv_value(csv: &str, task: &str, fold: &str, metric: &str) -> Option<f64> {
    csv.lines().find_map(|l| {
        let f: Vec<&str> = l.split(',').collect();
        (f.len() == 4 && f[0] == task && f[1] == fold && f[2] == metric).then(|| f[3].parse().ok())?
    })
}

struct Run {
    embeddings: PathBuf,
    history: PathBuf,
    train_secs: f64,
}

struct Desk {
    dir: PathBuf,
    config: PathBuf,
}

impl Desk {
    fn manifest(&self) -> PathBuf {
        self.dir.join("data/manifest.jsonl")
    }

    fn groups(&self) -> PathBuf {
        self.dir.join("data/groups.json")
    }

    fn train_and_embed(&self, name: &str, extra: &[&str]) -> Result<Run, String> {
        let ckpt = self.dir.join(format!("{name}.ckpt"));
        let history = self.dir.join(format!("{name}.history.csv"));
        let embeddings = self.dir.join(format!("{name}.test.jsonl"));
        let manifest = self.manifest();
        let mut args = vec!["train", "--config", p(&self.config), "--manifest", p(&manifest)];
        args.extend(["--out", p(&ckpt), "--history", p(&history)]);
        args.extend(extra);
        let start = Instant::now();
        cli(&args)?;
        let train_secs = start.elapsed().as_secs_f64();
        cli(&[
            "embed", "--config", p(&self.config), "--checkpoint", p(&ckpt), "--manifest", p(&self.manifest()),
            "--split", "test", "--out", p(&embeddings),
        ])?;
        Ok(Run { embeddings, history, train_secs })
    }

    fn verify(&self, run: &Run) -> Result<String, String> {
        cli(&["eval-verify", "--config", p(&self.config), "--embeddings", p(&run.embeddings)])
    }

    fn classify(&self, run: &Run) -> Result<String, String> {
        cli(&["eval-classify", "--config", p(&self.config), "--embeddings", p(&run.embeddings)])
    }

    fn cluster(&self, run: &Run, label: &str, out: &Path, append: bool) -> Result<(), String> {
        let groups = self.groups();
        let mut args = vec![
            "cluster", "--config", p(&self.config), "--embeddings", p(&run.embeddings), "--groups",
            p(&groups), "--task-label", label, "--out", p(out),
        ];
        if append {
            args.push("--append");
        }
        cli(&args).map(|_| ())
    }
}

fn mean_active_losses(history: &Path) -> Vec<f64> {
    let text = std::fs::read_to_string(history).unwrap();
    let header: Vec<&str> = text.lines().next().unwrap().split(',').collect();
    let col = header.iter().position(|h| *h == "mean_active_loss").unwrap();
    text.lines().skip(1).map(|l| l.split(',').nth(col).unwrap().parse().unwrap()).collect()
}

fn mean(xs: &[f64]) -> f64 {
    xs.iter().sum::<f64>() / xs.len() as f64
}

/// One-sided label-permutation p-values for mean ARI and AMI of the
/// cross-validated clustering. Predictions are fixed; truth labels are
/// shuffled within each group.
fn permutation_test(groups: &[ClusterGroup], thresholds: &BTreeMap<String, f64>, seed: u64) -> (f64, f64) {
    let preds: Vec<Vec<usize>> = groups.iter().map(|g| flat_clusters(&g.dendrogram, thresholds[&g.group_id])).collect();
    let stat = |truths: &[Vec<usize>]| -> (f64, f64) {
        let (mut ari, mut ami) = (0.0, 0.0);
        for (t, pr) in truths.iter().zip(&preds) {
            ari += ari_from_labels(t, pr);
            ami += ami_from_labels(t, pr);
        }
        (ari / groups.len() as f64, ami / groups.len() as f64)
    };
    let truths: Vec<Vec<usize>> = groups.iter().map(|g| g.truth.clone()).collect();
    let (obs_ari, obs_ami) = stat(&truths);
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let (mut ge_ari, mut ge_ami) = (0usize, 0usize);
    let mut shuffled = truths.clone();
    for _ in 0..PERMUTATIONS {
        for t in &mut shuffled {
            t.shuffle(&mut rng);
        }
        let (a, m) = stat(&shuffled);
        ge_ari += usize::from(a >= obs_ari);
        ge_ami += usize::from(m >= obs_ami);
    }
    let denom = (PERMUTATIONS + 1) as f64;
    ((ge_ari + 1) as f64 / denom, (ge_ami + 1) as f64 / denom)
}

fn end_to_end(desk: &Desk, report: &mut String) -> Result<(Outcome, Run), String> {
    let start = Instant::now();
    cli(&["synth", "--config", p(&desk.config), "--out", p(&desk.dir.join("data"))])?;
    let synth_secs = start.elapsed().as_secs_f64();
    let run = desk.train_and_embed("trained", &[])?;
    let verify = desk.verify(&run)?;
    let classify = desk.classify(&run)?;
    let cluster_csv = desk.dir.join("trained.cluster.csv");
    desk.cluster(&run, "cluster", &cluster_csv, false)?;
    let total_secs = start.elapsed().as_secs_f64();
    let cluster = std::fs::read_to_string(&cluster_csv).unwrap();

    let losses = mean_active_losses(&run.history);
    let iterations = losses.len();
    let head = mean(&losses[..LOSS_HEAD.min(iterations)]);
    let tail = mean(&losses[iterations.saturating_sub(LOSS_TAIL)..]);
    let drop = 1.0 - tail / head;
    let eer = csv_value(&verify, "verify", "all", "eer").ok_or("no eer row")?;
    let acc = csv_value(&classify, "classify", "all", "accuracy_centroid").ok_or("no accuracy row")?;
    let ari = csv_value(&cluster, "cluster", "overall", "ari").ok_or("no ari row")?;
    let ami = csv_value(&cluster, "cluster", "overall", "ami").ok_or("no ami row")?;

    // rebuild the clustering in-process to obtain fold membership and thresholds
    let seed = 7;
    let folds = 5;
    let items = read_embeddings(&run.embeddings).map_err(|e| e.to_string())?;
    let records = load_manifest(desk.manifest()).map_err(|e| e.to_string())?;
    let map = load_group_map(desk.groups()).map_err(|e| e.to_string())?;
    let homonyms = build_homonym_groups(&records, &map).map_err(|e| e.to_string())?;
    let groups = cluster_groups(&items, &homonyms).map_err(|e| e.to_string())?;
    let cv = cross_validate(&groups, folds, seed).map_err(|e| e.to_string())?;
    let reproduced = (cv.mean_ari - ari).abs() < 1e-12 && (cv.mean_ami - ami).abs() < 1e-12;
    let thresholds: BTreeMap<String, f64> = cv
        .folds
        .iter()
        .flat_map(|f| f.groups.iter().map(move |g| (g.clone(), f.threshold)))
        .collect();
    let (p_ari, p_ami) = permutation_test(&groups, &thresholds, seed);

    // an untrained network on the same data, for reference
    let base = desk.train_and_embed("untrained", &["--set", "train.epochs=0"])?;
    let base_verify = desk.verify(&base)?;
    let base_classify = desk.classify(&base)?;
    let base_csv = desk.dir.join("untrained.cluster.csv");
    desk.cluster(&base, "cluster", &base_csv, false)?;
    let base_cluster = std::fs::read_to_string(&base_csv).unwrap();
    let b = |csv: &str, task: &str, fold: &str, m: &str| csv_value(csv, task, fold, m).unwrap_or(f64::NAN);

    writeln!(report, "end-to-end desk run").unwrap();
    writeln!(report, "  synth {synth_secs:.0}s, train {:.0}s over {iterations} iterations, total {total_secs:.0}s", run.train_secs).unwrap();
    writeln!(report, "  mean active loss: first {LOSS_HEAD} {head:.4}, last {LOSS_TAIL} {tail:.4}, drop {:.1}%", 100.0 * drop).unwrap();
    writeln!(report, "  trained:   eer {eer:.4}, centroid accuracy {acc:.4}, ari {ari:.4} (p {p_ari:.4}), ami {ami:.4} (p {p_ami:.4})").unwrap();
    writeln!(
        report,
        "  untrained: eer {:.4}, centroid accuracy {:.4}, ari {:.4}, ami {:.4}",
        b(&base_verify, "verify", "all", "eer"),
        b(&base_classify, "classify", "all", "accuracy_centroid"),
        b(&base_cluster, "cluster", "overall", "ari"),
        b(&base_cluster, "cluster", "overall", "ami"),
    )
    .unwrap();

    let pass = iterations <= 2000
        && drop >= LOSS_DROP
        && eer < MAX_EER
        && ari > 0.0
        && ami > 0.0
        && p_ari < MAX_P
        && p_ami < MAX_P
        && ami >= TARGET_AMI
        && reproduced
        && total_secs < E2E_BUDGET_SECS;
    let detail = format!(
        "loss drop {:.1}% (>= {:.0}%), eer {eer:.4} (< {MAX_EER}), ari {ari:.4} p={p_ari:.3}, \
         ami {ami:.4} p={p_ami:.3} (target >= {TARGET_AMI}), {iterations} iterations, {total_secs:.0}s; \
         untrained ami {:.4}",
        100.0 * drop,
        100.0 * LOSS_DROP,
        b(&base_cluster, "cluster", "overall", "ami"),
    );
    Ok((outcome(pass, detail), run))
}

fn side_information(desk: &Desk, p0: &Run, report: &mut String) -> Result<Outcome, String> {
    let sweep = desk.dir.join("tag_bias_sweep.csv");
    let _ = std::fs::remove_file(&sweep);
    desk.cluster(p0, "tag_bias_0", &sweep, true)?;
    for (label, value) in [("tag_bias_0.5", "0.5"), ("tag_bias_1", "1")] {
        let set = format!("train.tag_bias={value}");
        let run = desk.train_and_embed(label, &["--set", &set])?;
        desk.cluster(&run, label, &sweep, true)?;
    }
    let csv = std::fs::read_to_string(&sweep).unwrap();
    writeln!(report, "tag bias sweep ({})", sweep.display()).unwrap();
    for line in csv.lines() {
        writeln!(report, "  {line}").unwrap();
    }
    let labels = ["tag_bias_0", "tag_bias_0.5", "tag_bias_1"];
    let amis: Vec<Option<f64>> = labels.iter().map(|l| csv_value(&csv, l, "overall", "ami")).collect();
    let complete = amis.iter().all(Option::is_some) && csv.matches("task,fold,metric,value").count() == 1;
    let shown: Vec<String> = labels
        .iter()
        .zip(&amis)
        .map(|(l, a)| format!("{l} ami {}", a.map_or("missing".into(), |v| format!("{v:.4}"))))
        .collect();
    Ok(outcome(complete, format!("{} in one CSV (reported, not ranked)", shown.join(", "))))
}

#[test]
fn acceptance() {
    let root = PathBuf::from(env!("CARGO_TARGET_TMPDIR")).join("acceptance");
    let _ = std::fs::remove_dir_all(&root);
    std::fs::create_dir_all(&root).unwrap();
    let desk = Desk {
        dir: root.clone(),
        config: Path::new(env!("CARGO_MANIFEST_DIR")).join("../../configs/desk.conf"),
    };

    let mut results: Vec<(&str, Outcome)> = Vec::new();
    let mut report = String::new();
    let record = |name: &'static str, o: Outcome, results: &mut Vec<(&str, Outcome)>| {
        say(&format!("[{}] {name}: {}", if o.pass { "PASS" } else { "FAIL" }, o.detail));
        results.push((name, o));
    };
    record("gradient correctness", gradients(), &mut results);
    record("unit-sphere invariant", unit_sphere(), &mut results);
    record("triplet combinatorics", combinatorics(), &mut results);
    record("tag-biased negatives", tag_bias(), &mut results);
    record("partition metric oracles", metric_oracles(), &mut results);
    record("ward linkage", ward(), &mut results);
    record("equal error rate", eer(), &mut results);
    record("rmsprop trace", rmsprop(), &mut results);
    match end_to_end(&desk, &mut report) {
        Ok((o, run)) => {
            record("end-to-end desk scale", o, &mut results);
            let side = side_information(&desk, &run, &mut report).unwrap_or_else(|e| outcome(false, e));
            record("side-information sweep", side, &mut results);
        }
        Err(e) => {
            record("end-to-end desk scale", outcome(false, e.clone()), &mut results);
            record("side-information sweep", outcome(false, format!("not run: {e}")), &mut results);
        }
    }
    say(&report);

    let mut summary = String::new();
    for (name, o) in &results {
        writeln!(summary, "[{}] {name}: {}", if o.pass { "PASS" } else { "FAIL" }, o.detail).unwrap();
    }
    summary.push_str(&report);
    std::fs::write(root.join("summary.txt"), &summary).unwrap();

    let failed: Vec<&str> = results.iter().filter(|(_, o)| !o.pass).map(|(n, _)| *n).collect();
    assert!(failed.is_empty(), "failed criteria: {failed:?}");
}
