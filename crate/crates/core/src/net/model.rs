use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::layers::{
    conv2d, conv2d_backward, dynamic_compression, global_time_pool, global_time_pool_backward,
    l2_normalize, l2_normalize_backward, maxpool, maxpool_backward, Padding, PoolSpec, Tensor3,
};
use super::Scalar;
use crate::audio::MelSpectrogram;
use crate::error::{Error, Result};

/// Architecture of the embedding network.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct NetworkConfig {
    /// Width of the input (mel bands).
    pub n_mels: usize,
    pub embedding_dim: usize,
    /// Output channels of each conv + pool block.
    pub channels: Vec<usize>,
    pub kernel: usize,
    /// One pooling spec per block.
    pub pools: Vec<PoolSpec>,
    pub dropout: f64,
    pub compression_gain: f64,
}

impl Default for NetworkConfig {
    fn default() -> Self {
        Self {
            n_mels: 128,
            embedding_dim: 32,
            channels: vec![16, 32, 64],
            kernel: 3,
            pools: vec![
                PoolSpec { size: 3, stride: 2, padding: Padding::Same },
                PoolSpec { size: 3, stride: 3, padding: Padding::Valid },
                PoolSpec { size: 3, stride: 3, padding: Padding::Valid },
            ],
            dropout: 0.5,
            compression_gain: 1e4,
        }
    }
}

impl NetworkConfig {
    pub fn validate(&self) -> Result<()> {
        if self.embedding_dim == 0 {
            return Err(Error::Config("embedding_dim must be at least 1".into()));
        }
        if self.channels.is_empty() || self.channels.contains(&0) {
            return Err(Error::Config("every conv block needs at least one channel".into()));
        }
        if self.pools.len() != self.channels.len() {
            return Err(Error::Config(format!(
                "{} pooling specs for {} conv blocks",
                self.pools.len(),
                self.channels.len()
            )));
        }
        if self.kernel == 0 || self.kernel % 2 == 0 {
            return Err(Error::Config(format!("kernel size {} must be odd", self.kernel)));
        }
        if !(0.0..1.0).contains(&self.dropout) {
            return Err(Error::Config(format!("dropout {} outside [0, 1)", self.dropout)));
        }
        if !(self.compression_gain > 0.0) {
            return Err(Error::Config("compression gain must be positive".into()));
        }
        if self.pooled_len(self.n_mels) == 0 {
            return Err(Error::Config(format!(
                "{} mel bands do not survive the pooling stack",
                self.n_mels
            )));
        }
        Ok(())
    }

    /// Length of an axis of size `n` after every pooling stage (0 if it
    /// vanishes on the way).
    pub fn pooled_len(&self, n: usize) -> usize {
        self.pools.iter().fold(n, |len, p| if len == 0 { 0 } else { p.output_len(len) })
    }

    /// Width of the time-pooled feature vector fed to the dense layer.
    pub fn feature_width(&self) -> usize {
        self.channels.last().copied().unwrap_or(0) * self.pooled_len(self.n_mels)
    }

    /// Shortest input (in frames) that survives all pooling stages.
    pub fn min_frames(&self) -> usize {
        (1..)
            .take(1 << 16)
            .find(|&t| self.pooled_len(t) > 0)
            .unwrap_or(usize::MAX)
    }

    /// Expected tensor shapes in the declared layer order: each conv block's
    /// weights and bias, then the dense weights and bias.
    pub fn shapes(&self) -> Vec<Vec<usize>> {
        let mut shapes = Vec::new();
        let mut in_ch = 1;
        for &out_ch in &self.channels {
            shapes.push(vec![out_ch, in_ch, self.kernel, self.kernel]);
            shapes.push(vec![out_ch]);
            in_ch = out_ch;
        }
        shapes.push(vec![self.embedding_dim, self.feature_width()]);
        shapes.push(vec![self.embedding_dim]);
        shapes
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct ConvParams<T> {
    pub in_channels: usize,
    pub out_channels: usize,
    pub kernel: usize,
    /// `out x in x k x k`
    pub weights: Vec<T>,
    pub bias: Vec<T>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct DenseParams<T> {
    pub inputs: usize,
    pub outputs: usize,
    /// `outputs x inputs`
    pub weights: Vec<T>,
    pub bias: Vec<T>,
}

/// All trainable tensors. Gradients use the same type.
#[derive(Debug, Clone, PartialEq)]
pub struct Parameters<T> {
    pub convs: Vec<ConvParams<T>>,
    pub dense: DenseParams<T>,
}

impl<T: Scalar> Parameters<T> {
    pub fn zeros(config: &NetworkConfig) -> Self {
        let mut convs = Vec::with_capacity(config.channels.len());
        let mut in_ch = 1;
        for &out_ch in &config.channels {
            convs.push(ConvParams {
                in_channels: in_ch,
                out_channels: out_ch,
                kernel: config.kernel,
                weights: vec![T::zero(); out_ch * in_ch * config.kernel * config.kernel],
                bias: vec![T::zero(); out_ch],
            });
            in_ch = out_ch;
        }
        let inputs = config.feature_width();
        Self {
            convs,
            dense: DenseParams {
                inputs,
                outputs: config.embedding_dim,
                weights: vec![T::zero(); inputs * config.embedding_dim],
                bias: vec![T::zero(); config.embedding_dim],
            },
        }
    }

    pub fn zeros_like(&self) -> Self {
        let mut z = self.clone();
        z.tensors_mut().into_iter().for_each(|t| t.iter_mut().for_each(|v| *v = T::zero()));
        z
    }

    /// Tensors in declared layer order.
    pub fn tensors(&self) -> Vec<&[T]> {
        let mut out: Vec<&[T]> = Vec::with_capacity(2 * self.convs.len() + 2);
        for c in &self.convs {
            out.push(&c.weights);
            out.push(&c.bias);
        }
        out.push(&self.dense.weights);
        out.push(&self.dense.bias);
        out
    }

    pub fn tensors_mut(&mut self) -> Vec<&mut [T]> {
        let mut out: Vec<&mut [T]> = Vec::with_capacity(2 * self.convs.len() + 2);
        for c in &mut self.convs {
            out.push(&mut c.weights);
            out.push(&mut c.bias);
        }
        out.push(&mut self.dense.weights);
        out.push(&mut self.dense.bias);
        out
    }

    pub fn shapes(&self) -> Vec<Vec<usize>> {
        let mut shapes = Vec::new();
        for c in &self.convs {
            shapes.push(vec![c.out_channels, c.in_channels, c.kernel, c.kernel]);
            shapes.push(vec![c.out_channels]);
        }
        shapes.push(vec![self.dense.outputs, self.dense.inputs]);
        shapes.push(vec![self.dense.outputs]);
        shapes
    }

    pub fn len(&self) -> usize {
        self.tensors().iter().map(|t| t.len()).sum()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    /// FNV-1a hash over every parameter's bit pattern.
    pub fn fingerprint(&self) -> u64 {
        let mut h: u64 = 0xcbf2_9ce4_8422_2325;
        for t in self.tensors() {
            for v in t {
                h ^= v.bits();
                h = h.wrapping_mul(0x0000_0100_0000_01b3);
            }
        }
        h
    }

    pub fn all_finite(&self) -> bool {
        self.tensors().iter().all(|t| t.iter().all(|v| v.is_finite()))
    }

    /// Elementwise `self += other`.
    pub fn accumulate(&mut self, other: &Self) {
        for (a, b) in self.tensors_mut().into_iter().zip(other.tensors()) {
            for (x, &y) in a.iter_mut().zip(b) {
                *x += y;
            }
        }
    }

    pub fn scale(&mut self, factor: T) {
        self.tensors_mut().into_iter().for_each(|t| t.iter_mut().for_each(|v| *v *= factor));
    }

    pub fn cast<U: Scalar>(&self) -> Parameters<U> {
        let conv = |c: &ConvParams<T>| ConvParams {
            in_channels: c.in_channels,
            out_channels: c.out_channels,
            kernel: c.kernel,
            weights: c.weights.iter().map(|v| U::of(v.as_f64())).collect(),
            bias: c.bias.iter().map(|v| U::of(v.as_f64())).collect(),
        };
        Parameters {
            convs: self.convs.iter().map(conv).collect(),
            dense: DenseParams {
                inputs: self.dense.inputs,
                outputs: self.dense.outputs,
                weights: self.dense.weights.iter().map(|v| U::of(v.as_f64())).collect(),
                bias: self.dense.bias.iter().map(|v| U::of(v.as_f64())).collect(),
            },
        }
    }
}

/// He-style uniform initialization (`U(-b, b)` with `b = sqrt(6 / fan_in)`,
/// variance `2 / fan_in`) and zero biases. Deterministic per seed; values are
/// drawn in `f64` so both precisions start from the same point.
pub fn init_params<T: Scalar>(config: &NetworkConfig, seed: u64) -> Result<Parameters<T>> {
    config.validate()?;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut params = Parameters::<T>::zeros(config);
    for c in &mut params.convs {
        let bound = (6.0 / (c.in_channels * c.kernel * c.kernel) as f64).sqrt();
        c.weights.iter_mut().for_each(|w| *w = T::of(rng.random_range(-bound..bound)));
    }
    let bound = (6.0 / params.dense.inputs as f64).sqrt();
    params
        .dense
        .weights
        .iter_mut()
        .for_each(|w| *w = T::of(rng.random_range(-bound..bound)));
    Ok(params)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Mode {
    /// Dropout active (inverted scaling).
    Train,
    /// Deterministic; dropout is the identity.
    Infer,
}

/// Activations recorded by a forward pass for the backward pass.
#[derive(Debug, Clone)]
pub struct Cache<T> {
    mode: Mode,
    fingerprint: u64,
    /// Input of each conv block (the compressed spectrogram for block 0).
    block_inputs: Vec<Tensor3<T>>,
    /// Post-ReLU conv outputs.
    activations: Vec<Tensor3<T>>,
    winners: Vec<Vec<usize>>,
    pooled_shape: (usize, usize, usize),
    dropout_scale: Vec<T>,
    dense_input: Vec<T>,
    hidden: Vec<T>,
    norm: T,
    embedding: Vec<T>,
}

impl<T: Scalar> Cache<T> {
    pub fn embedding(&self) -> &[T] {
        &self.embedding
    }

    pub fn mode(&self) -> Mode {
        self.mode
    }
}

/// The embedding map: mel-spectrogram to a point on the unit sphere.
#[derive(Debug, Clone, PartialEq)]
pub struct Network<T> {
    pub config: NetworkConfig,
    pub params: Parameters<T>,
}

impl<T: Scalar> Network<T> {
    pub fn new(config: NetworkConfig, seed: u64) -> Result<Self> {
        let params = init_params(&config, seed)?;
        Ok(Self { config, params })
    }

    pub fn from_params(config: NetworkConfig, params: Parameters<T>) -> Result<Self> {
        config.validate()?;
        if params.shapes() != config.shapes() {
            return Err(Error::Shape("parameter shapes do not match the network config".into()));
        }
        Ok(Self { config, params })
    }

    /// Runs the network on a `frames x n_mels` row-major input.
    ///
    /// Pipeline: compression, conv + ReLU + max-pool per block, flatten and
    /// average over time, dropout (train mode), dense + tanh, l2 projection.
    pub fn forward<R: Rng + ?Sized>(
        &self,
        input: &[T],
        frames: usize,
        mode: Mode,
        rng: &mut R,
    ) -> Result<(Vec<T>, Cache<T>)> {
        let cfg = &self.config;
        if input.len() != frames * cfg.n_mels {
            return Err(Error::Shape(format!(
                "{} input values for {frames} frames of {} mels",
                input.len(),
                cfg.n_mels
            )));
        }
        if frames < cfg.min_frames() {
            return Err(Error::Shape(format!(
                "{frames} frames is shorter than the minimum {} the pooling stack needs",
                cfg.min_frames()
            )));
        }

        let compressed = dynamic_compression(input, T::of(cfg.compression_gain))?;
        let mut x = Tensor3::from_vec(1, frames, cfg.n_mels, compressed)?;
        let mut block_inputs = Vec::with_capacity(cfg.channels.len());
        let mut activations = Vec::with_capacity(cfg.channels.len());
        let mut winners = Vec::with_capacity(cfg.channels.len());
        for (conv, &pool) in self.params.convs.iter().zip(&cfg.pools) {
            let mut z = conv2d(&x, &conv.weights, &conv.bias, conv.kernel)?;
            z.data.iter_mut().for_each(|v| *v = v.max(T::zero()));
            let (pooled, win) = maxpool(&z, pool)?;
            block_inputs.push(std::mem::replace(&mut x, pooled));
            activations.push(z);
            winners.push(win);
        }
        let pooled_shape = x.shape();
        let features = global_time_pool(&x);

        let dropout_scale: Vec<T> = match mode {
            Mode::Train if cfg.dropout > 0.0 => {
                let keep = T::of(1.0 / (1.0 - cfg.dropout));
                (0..features.len())
                    .map(|_| if rng.random::<f64>() < cfg.dropout { T::zero() } else { keep })
                    .collect()
            }
            _ => vec![T::one(); features.len()],
        };
        let dense_input: Vec<T> = features.iter().zip(&dropout_scale).map(|(&f, &s)| f * s).collect();

        let dense = &self.params.dense;
        let hidden: Vec<T> = (0..dense.outputs)
            .map(|o| {
                let row = &dense.weights[o * dense.inputs..(o + 1) * dense.inputs];
                let u = dense.bias[o] + row.iter().zip(&dense_input).map(|(&w, &v)| w * v).sum::<T>();
                u.tanh()
            })
            .collect();
        let (embedding, norm) = l2_normalize(&hidden)?;

        let cache = Cache {
            mode,
            fingerprint: self.params.fingerprint(),
            block_inputs,
            activations,
            winners,
            pooled_shape,
            dropout_scale,
            dense_input,
            hidden,
            norm,
            embedding: embedding.clone(),
        };
        Ok((embedding, cache))
    }

    /// Deterministic embedding of a mel-spectrogram.
    pub fn embed(&self, mel: &MelSpectrogram) -> Result<Vec<T>> {
        if mel.n_mels != self.config.n_mels {
            return Err(Error::Shape(format!(
                "spectrogram has {} mel bands, network expects {}",
                mel.n_mels, self.config.n_mels
            )));
        }
        let input: Vec<T> = mel.values.iter().map(|&v| T::of(f64::from(v))).collect();
        // Infer mode never touches the generator.
        let mut rng = ChaCha8Rng::seed_from_u64(0);
        Ok(self.forward(&input, mel.frames, Mode::Infer, &mut rng)?.0)
    }

    /// Gradients of `grad_embedding . f(x)` with respect to every parameter,
    /// replaying the dropout mask recorded in `cache`.
    pub fn backward(&self, cache: &Cache<T>, grad_embedding: &[T]) -> Result<Parameters<T>> {
        if cache.mode != Mode::Train {
            return Err(Error::State("backward needs a cache from a train-mode forward pass".into()));
        }
        if cache.fingerprint != self.params.fingerprint() {
            return Err(Error::State("cache was recorded with different parameters".into()));
        }
        if grad_embedding.len() != cache.embedding.len() {
            return Err(Error::Shape(format!(
                "embedding gradient has {} entries, embedding has {}",
                grad_embedding.len(),
                cache.embedding.len()
            )));
        }

        let mut grads = self.params.zeros_like();
        let g_hidden = l2_normalize_backward(&cache.embedding, cache.norm, grad_embedding);
        let g_pre: Vec<T> = g_hidden
            .iter()
            .zip(&cache.hidden)
            .map(|(&g, &y)| g * (T::one() - y * y))
            .collect();

        let dense = &self.params.dense;
        let mut g_input = vec![T::zero(); dense.inputs];
        for (o, &go) in g_pre.iter().enumerate() {
            grads.dense.bias[o] = go;
            let g_row = &mut grads.dense.weights[o * dense.inputs..(o + 1) * dense.inputs];
            for (gw, &x) in g_row.iter_mut().zip(&cache.dense_input) {
                *gw = go * x;
            }
            let w_row = &dense.weights[o * dense.inputs..(o + 1) * dense.inputs];
            for (gi, &w) in g_input.iter_mut().zip(w_row) {
                *gi += go * w;
            }
        }
        for (g, &s) in g_input.iter_mut().zip(&cache.dropout_scale) {
            *g *= s;
        }

        let mut g_pooled = global_time_pool_backward(&g_input, cache.pooled_shape);
        for b in (0..self.params.convs.len()).rev() {
            let act = &cache.activations[b];
            let mut g_act = maxpool_backward(&g_pooled, &cache.winners[b], act.shape())?;
            for (g, &a) in g_act.data.iter_mut().zip(&act.data) {
                if a <= T::zero() {
                    *g = T::zero();
                }
            }
            let conv = &self.params.convs[b];
            let (g_in, g_w, g_b) =
                conv2d_backward(&cache.block_inputs[b], &conv.weights, conv.kernel, &g_act, b > 0)?;
            grads.convs[b].weights = g_w;
            grads.convs[b].bias = g_b;
            if let Some(g_in) = g_in {
                g_pooled = g_in;
            }
        }
        Ok(grads)
    }
}
