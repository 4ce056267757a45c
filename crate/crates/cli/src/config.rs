//! Run configuration: built-in defaults, then a flat `key = value` file,
//! then command-line overrides.

use std::path::Path;
use std::str::FromStr;

use artist_embed::audio::FeatureConfig;
use artist_embed::dataset::SyntheticConfig;
use artist_embed::net::NetworkConfig;
use artist_embed::triplet::TrainConfig;
use artist_embed::{Error, Result};

#[derive(Debug, Clone)]
pub struct EvalConfig {
    /// Reference tracks per artist; the rest are test tracks.
    pub references: usize,
    pub folds: usize,
}

impl Default for EvalConfig {
    fn default() -> Self {
        Self { references: 7, folds: 5 }
    }
}

#[derive(Debug, Clone, Default)]
pub struct RunConfig {
    pub seed: Option<u64>,
    pub features: FeatureConfig,
    pub network: NetworkConfig,
    pub train: TrainConfig,
    pub synth: SyntheticConfig,
    pub eval: EvalConfig,
}

/// Parses `key = value` lines; `#` starts a comment.
pub fn parse_pairs(text: &str) -> Result<Vec<(String, String)>> {
    let mut out = Vec::new();
    for (i, raw) in text.lines().enumerate() {
        let line = raw.split('#').next().unwrap_or("").trim();
        if line.is_empty() {
            continue;
        }
        let (k, v) = line
            .split_once('=')
            .ok_or_else(|| Error::Config(format!("config line {}: expected `key = value`", i + 1)))?;
        out.push((k.trim().to_string(), v.trim().to_string()));
    }
    Ok(out)
}

fn parse<T: FromStr>(key: &str, value: &str) -> Result<T> {
    value
        .parse()
        .map_err(|_| Error::Config(format!("{key}: cannot parse {value:?}")))
}

fn parse_list(key: &str, value: &str) -> Result<Vec<usize>> {
    value.split(',').map(|v| parse(key, v.trim())).collect()
}

impl RunConfig {
    pub fn from_file(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| Error::Config(format!("cannot read config {}: {e}", path.display())))?;
        let mut cfg = Self::default();
        cfg.apply_all(&parse_pairs(&text)?)?;
        Ok(cfg)
    }

    pub fn apply_all(&mut self, pairs: &[(String, String)]) -> Result<()> {
        for (k, v) in pairs {
            self.apply(k, v)?;
        }
        Ok(())
    }

    pub fn apply(&mut self, key: &str, v: &str) -> Result<()> {
        let f = &mut self.features;
        let n = &mut self.network;
        let t = &mut self.train;
        let s = &mut self.synth;
        match key {
            "seed" => self.seed = Some(parse(key, v)?),

            "features.sample_rate" => f.sample_rate = parse(key, v)?,
            "features.window_seconds" => f.window_seconds = parse(key, v)?,
            "features.overlap" => f.overlap = parse(key, v)?,
            "features.n_mels" => f.n_mels = parse(key, v)?,
            "features.segment_seconds" => f.segment_seconds = parse(key, v)?,
            "features.n_fft" => f.n_fft = parse(key, v)?,

            "net.embedding_dim" => n.embedding_dim = parse(key, v)?,
            "net.channels" => n.channels = parse_list(key, v)?,
            "net.dropout" => n.dropout = parse(key, v)?,
            "net.compression_gain" => n.compression_gain = parse(key, v)?,

            "train.alpha" => t.alpha = parse(key, v)?,
            "train.artists_per_batch" => t.artists_per_batch = parse(key, v)?,
            "train.samples_per_artist" => t.samples_per_artist = parse(key, v)?,
            "train.tag_bias" => t.tag_bias = parse(key, v)?,
            "train.epochs" => t.epochs = parse(key, v)?,
            "train.iterations_per_epoch" => t.iterations_per_epoch = parse(key, v)?,
            "train.patience" => t.patience = parse(key, v)?,
            "train.collapse_threshold" => t.collapse_threshold = parse(key, v)?,
            "train.collapse_patience" => t.collapse_patience = parse(key, v)?,
            "train.learning_rate" => t.optimizer.learning_rate = parse(key, v)?,
            "train.rho" => t.optimizer.rho = parse(key, v)?,
            "train.epsilon" => t.optimizer.epsilon = parse(key, v)?,

            "synth.train_artists" => s.train_artists = parse(key, v)?,
            "synth.eval_groups" => s.eval_groups = parse(key, v)?,
            "synth.tracks_per_artist" => s.tracks_per_artist = parse(key, v)?,
            "synth.validation_tracks" => s.validation_tracks = parse(key, v)?,
            "synth.duration" => s.duration = parse(key, v)?,
            "synth.sample_rate" => s.sample_rate = parse(key, v)?,
            "synth.partials" => s.partials = parse(key, v)?,
            "synth.min_hz" => s.min_hz = parse(key, v)?,
            "synth.max_hz" => s.max_hz = parse(key, v)?,
            "synth.genres" => s.genres = parse(key, v)?,
            "synth.jitter" => s.jitter = parse(key, v)?,
            "synth.noise" => s.noise = parse(key, v)?,

            "eval.references" => self.eval.references = parse(key, v)?,
            "eval.folds" => self.eval.folds = parse(key, v)?,

            _ => return Err(Error::Config(format!("unknown config key {key:?}"))),
        }
        Ok(())
    }

    /// Seed-dependent fields filled in, everything validated.
    pub fn finish(mut self) -> Result<Self> {
        let seed = self
            .seed
            .ok_or_else(|| Error::Config("a seed is required (--seed or `seed = ...` in the config)".into()))?;
        self.train.seed = seed;
        self.synth.seed = seed;
        self.network.n_mels = self.features.n_mels;
        self.features.validate()?;
        self.network.validate()?;
        self.train.validate()?;
        self.synth.validate()?;
        if self.eval.references == 0 || self.eval.folds < 2 {
            return Err(Error::Config("eval.references must be >= 1 and eval.folds >= 2".into()));
        }
        Ok(self)
    }
}
