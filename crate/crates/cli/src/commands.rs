use std::collections::BTreeMap;
use std::path::Path;

use artist_embed::dataset::{build_homonym_groups, generate_synthetic, load_group_map, load_manifest, ManifestRecord};
use artist_embed::eval::{
    classification_accuracy, classify_nn, compute_eer, cross_validate, read_embeddings, split_references,
    verification_scores, write_embeddings, MatchMode, TrackEmbedding,
};
use artist_embed::net::{load_checkpoint, save_checkpoint, Network};
use artist_embed::pipeline::{cluster_groups, embed_tracks, training_set};
use artist_embed::triplet::{history_csv, train as train_network};
use artist_embed::{Error, Result};

use crate::config::RunConfig;
use crate::report::{emit, emit_report, Report};

fn required<'a>(out: Option<&'a Path>, what: &str) -> Result<&'a Path> {
    out.ok_or_else(|| Error::Config(format!("--out is required: {what}")))
}

fn base_dir(manifest: &Path) -> &Path {
    manifest.parent().unwrap_or_else(|| Path::new("."))
}

pub fn synth(cfg: &RunConfig, out: Option<&Path>) -> Result<()> {
    let dir = required(out, "the dataset directory")?;
    let ds = generate_synthetic(&cfg.synth, dir)?;
    eprintln!(
        "wrote {} tracks and {} homonym groups to {}",
        ds.records.len(),
        ds.groups.len(),
        dir.display()
    );
    Ok(())
}

pub fn train(cfg: &RunConfig, manifest: &Path, out: Option<&Path>, history: Option<&Path>) -> Result<()> {
    let ckpt = required(out, "the checkpoint path")?;
    let records = load_manifest(manifest)?;
    let data = training_set(&records, base_dir(manifest), &cfg.features)?;
    eprintln!(
        "training on {} segments ({} validation)",
        data.train.len(),
        data.validation.len()
    );
    let outcome = train_network(&data, &cfg.network, &cfg.train)?;
    save_checkpoint(
        ckpt,
        &outcome.network.params,
        Some(&outcome.optimizer),
        &cfg.network,
        &cfg.features,
        cfg.train.seed,
    )?;
    let history_path = history.map(Path::to_path_buf).unwrap_or_else(|| {
        let mut p = ckpt.as_os_str().to_owned();
        p.push(".history.csv");
        p.into()
    });
    emit(&history_csv(&outcome.history), Some(&history_path), false)?;
    if let Some(last) = outcome.history.last() {
        eprintln!(
            "{} iterations, last mean active loss {:.4} over {} triplets{}",
            outcome.history.len(),
            last.mean_active_loss,
            last.active_count,
            if outcome.stopped_early { ", stopped early" } else { "" }
        );
    }
    Ok(())
}

pub fn embed(checkpoint: &Path, manifest: &Path, split: Option<&str>, out: Option<&Path>) -> Result<()> {
    let ckpt = load_checkpoint(checkpoint)?;
    let net = Network::from_params(ckpt.meta.network.clone(), ckpt.params)?;
    let records: Vec<ManifestRecord> = load_manifest(manifest)?
        .into_iter()
        .filter(|r| split.is_none() || r.split.as_deref() == split)
        .collect();
    if records.is_empty() {
        return Err(Error::Data("no tracks selected for embedding".into()));
    }
    let embeddings = embed_tracks(&net, &records, base_dir(manifest), &ckpt.meta.features)?;
    match out {
        Some(path) => write_embeddings(path, &embeddings),
        None => {
            let mut text = String::new();
            for e in &embeddings {
                text.push_str(&serde_json::to_string(e).map_err(|e| Error::Data(e.to_string()))?);
                text.push('\n');
            }
            emit(&text, None, false)
        }
    }
}

pub fn eval_classify(cfg: &RunConfig, embeddings: &Path, out: Option<&Path>) -> Result<()> {
    let items = read_embeddings(embeddings)?;
    let (models, tests) = split_references(&items, cfg.eval.references)?;
    let truth: BTreeMap<String, String> = tests.iter().map(|t| (t.track_id.clone(), t.artist_id.clone())).collect();
    let mut report = Report::default();
    for (mode, name) in [(MatchMode::PerTrack, "accuracy_per_track"), (MatchMode::Centroid, "accuracy_centroid")] {
        let assigned = tests
            .iter()
            .map(|t| Ok((t.track_id.clone(), classify_nn(&t.vector, &models, mode)?.to_string())))
            .collect::<Result<BTreeMap<_, _>>>()?;
        report.row("classify", "all", name, classification_accuracy(&assigned, &truth)?);
    }
    report.row("classify", "all", "test_tracks", tests.len() as f64);
    report.row("classify", "all", "artists", models.len() as f64);
    emit_report(&report, out, false)
}

pub fn eval_verify(cfg: &RunConfig, embeddings: &Path, out: Option<&Path>, curve: Option<&Path>) -> Result<()> {
    let items = read_embeddings(embeddings)?;
    let (models, tests) = split_references(&items, cfg.eval.references)?;
    let scores = verification_scores(&tests, &models)?;
    let eer = compute_eer(&scores)?;
    let mut report = Report::default();
    report.row("verify", "all", "eer", eer.eer);
    report.row("verify", "all", "threshold", eer.threshold);
    report.row("verify", "all", "pairs", scores.len() as f64);
    emit_report(&report, out, false)?;
    if let Some(path) = curve {
        let mut text = String::from("threshold,fpr,fnr\n");
        for p in &eer.curve {
            text.push_str(&format!("{},{},{}\n", p.threshold, p.fpr, p.fnr));
        }
        emit(&text, Some(path), false)?;
    }
    Ok(())
}

/// Stand-in manifest rows so group membership is checked the same way as
/// for audio manifests.
fn records_of(items: &[TrackEmbedding]) -> Vec<ManifestRecord> {
    items
        .iter()
        .map(|e| ManifestRecord {
            track_id: e.track_id.clone(),
            artist_id: e.artist_id.clone(),
            album_id: None,
            tags: Vec::new(),
            audio_path: String::new(),
            split: None,
        })
        .collect()
}

pub fn cluster(
    cfg: &RunConfig,
    embeddings: &Path,
    groups: &Path,
    task: &str,
    append: bool,
    out: Option<&Path>,
) -> Result<()> {
    if task.contains(',') || task.contains('\n') {
        return Err(Error::Config("--task-label cannot contain commas or newlines".into()));
    }
    let items = read_embeddings(embeddings)?;
    let map = load_group_map(groups)?;
    let homonyms = build_homonym_groups(&records_of(&items), &map)?;
    let groups = cluster_groups(&items, &homonyms)?;
    let seed = cfg.seed.expect("seed checked at startup");
    let cv = cross_validate(&groups, cfg.eval.folds, seed)?;
    let mut report = Report::default();
    for f in &cv.folds {
        report.row(task, f.fold, "ari", f.ari);
        report.row(task, f.fold, "ami", f.ami);
        report.row(task, f.fold, "threshold", f.threshold);
    }
    report.row(task, "overall", "ari", cv.mean_ari);
    report.row(task, "overall", "ami", cv.mean_ami);
    emit_report(&report, out, append)
}
