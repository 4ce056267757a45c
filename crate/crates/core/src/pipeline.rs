//! Glue between manifests on disk and the training and evaluation stages.

use std::collections::BTreeMap;
use std::path::Path;

use rayon::prelude::*;

use crate::audio::{extract_segments, load_wav, resample, FeatureConfig, PcmSignal, SegmentPolicy};
use crate::dataset::{resolve_audio_path, HomonymGroup, ManifestRecord};
use crate::error::{Error, Result};
use crate::eval::{track_embedding, ClusterGroup, TrackEmbedding};
use crate::net::Network;
use crate::triplet::{TrainSample, TrainingSet};

/// Segments averaged into one track embedding.
pub const SEGMENTS_PER_TRACK: usize = 10;

/// Loads a track and resamples it to the feature rate.
pub fn load_track(path: &Path, features: &FeatureConfig) -> Result<PcmSignal> {
    let pcm = load_wav(path)?;
    if pcm.sample_rate() == features.sample_rate {
        Ok(pcm)
    } else {
        resample(&pcm, features.sample_rate)
    }
}

/// Training and validation segments from the records whose split is `train`
/// or `val`. Artists and tags are numbered in sorted order.
pub fn training_set(records: &[ManifestRecord], base: &Path, features: &FeatureConfig) -> Result<TrainingSet> {
    let used: Vec<&ManifestRecord> = records
        .iter()
        .filter(|r| matches!(r.split.as_deref(), Some("train") | Some("val")))
        .collect();
    let artists: BTreeMap<&str, usize> = {
        let mut ids: Vec<&str> = used.iter().map(|r| r.artist_id.as_str()).collect();
        ids.sort_unstable();
        ids.dedup();
        ids.into_iter().enumerate().map(|(i, a)| (a, i)).collect()
    };
    let tags: BTreeMap<&str, u32> = {
        let mut ts: Vec<&str> = used.iter().flat_map(|r| r.tags.iter().map(String::as_str)).collect();
        ts.sort_unstable();
        ts.dedup();
        ts.into_iter().enumerate().map(|(i, t)| (t, i as u32)).collect()
    };

    let per_track = used
        .par_iter()
        .map(|r| {
            let pcm = load_track(&resolve_audio_path(base, r), features)?;
            let segs = extract_segments(&pcm, features, SegmentPolicy::Contiguous)?;
            let mut tag_ids: Vec<u32> = r.tags.iter().map(|t| tags[t.as_str()]).collect();
            tag_ids.sort_unstable();
            tag_ids.dedup();
            Ok(segs
                .into_iter()
                .map(|m| TrainSample {
                    artist: artists[r.artist_id.as_str()],
                    tags: tag_ids.clone(),
                    frames: m.frames,
                    input: m.values,
                })
                .collect::<Vec<_>>())
        })
        .collect::<Result<Vec<_>>>()?;

    let mut set = TrainingSet::default();
    for (r, samples) in used.iter().zip(per_track) {
        if r.split.as_deref() == Some("train") {
            set.train.extend(samples);
        } else {
            set.validation.extend(samples);
        }
    }
    if set.train.is_empty() {
        return Err(Error::Data("manifest has no train-split segments".into()));
    }
    Ok(set)
}

/// Track embeddings from `SEGMENTS_PER_TRACK` linearly spaced segments,
/// averaged and projected back onto the sphere.
pub fn embed_tracks(
    net: &Network<f32>,
    records: &[ManifestRecord],
    base: &Path,
    features: &FeatureConfig,
) -> Result<Vec<TrackEmbedding>> {
    records
        .par_iter()
        .map(|r| {
            let pcm = load_track(&resolve_audio_path(base, r), features)?;
            let segs = extract_segments(&pcm, features, SegmentPolicy::LinearSpaced(SEGMENTS_PER_TRACK))?;
            let vectors = segs
                .iter()
                .map(|m| Ok(net.embed(m)?.into_iter().map(f64::from).collect::<Vec<f64>>()))
                .collect::<Result<Vec<_>>>()?;
            Ok(TrackEmbedding {
                track_id: r.track_id.clone(),
                artist_id: r.artist_id.clone(),
                vector: track_embedding(&vectors)?,
            })
        })
        .collect()
}

/// Clustering inputs for each homonym group, with truth labels numbered by
/// the group's artist order.
pub fn cluster_groups(embeddings: &[TrackEmbedding], groups: &[HomonymGroup]) -> Result<Vec<ClusterGroup>> {
    let by_track: BTreeMap<&str, &TrackEmbedding> = embeddings.iter().map(|e| (e.track_id.as_str(), e)).collect();
    groups
        .iter()
        .map(|g| {
            let mut points = Vec::with_capacity(g.tracks.len());
            let mut truth = Vec::with_capacity(g.tracks.len());
            for t in &g.tracks {
                let e = by_track
                    .get(t.track_id.as_str())
                    .ok_or_else(|| Error::Data(format!("no embedding for track {:?}", t.track_id)))?;
                points.push(e.vector.clone());
                truth.push(g.artists.iter().position(|a| *a == t.artist_id).expect("group tracks come from its artists"));
            }
            ClusterGroup::new(g.group_id.clone(), &points, truth)
        })
        .collect()
}
