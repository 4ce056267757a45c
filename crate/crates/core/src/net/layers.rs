//! Forward and backward kernels for the fixed layer types of the network.
//!
//! Tensors are `channels x time x mels`, row-major, with mels contiguous.

use serde::{Deserialize, Serialize};

use super::Scalar;
use crate::error::{Error, Result};

/// Dense `channels x height x width` tensor.
#[derive(Debug, Clone, PartialEq)]
pub struct Tensor3<T> {
    pub channels: usize,
    pub height: usize,
    pub width: usize,
    pub data: Vec<T>,
}

impl<T: Scalar> Tensor3<T> {
    pub fn zeros(channels: usize, height: usize, width: usize) -> Self {
        Self {
            channels,
            height,
            width,
            data: vec![T::zero(); channels * height * width],
        }
    }

    pub fn from_vec(channels: usize, height: usize, width: usize, data: Vec<T>) -> Result<Self> {
        if data.len() != channels * height * width {
            return Err(Error::Shape(format!(
                "{} values for a {channels}x{height}x{width} tensor",
                data.len()
            )));
        }
        Ok(Self {
            channels,
            height,
            width,
            data,
        })
    }

    pub fn shape(&self) -> (usize, usize, usize) {
        (self.channels, self.height, self.width)
    }

    #[inline]
    pub fn at(&self, c: usize, y: usize, x: usize) -> T {
        self.data[(c * self.height + y) * self.width + x]
    }

    #[inline]
    fn plane(&self, c: usize) -> &[T] {
        let n = self.height * self.width;
        &self.data[c * n..(c + 1) * n]
    }
}

/// `log(1 + gain * x)` elementwise; rejects negative inputs.
pub fn dynamic_compression<T: Scalar>(x: &[T], gain: T) -> Result<Vec<T>> {
    x.iter()
        .map(|&v| {
            if v < T::zero() || !v.is_finite() {
                Err(Error::Domain(format!("compression input {v} is not a finite nonnegative value")))
            } else {
                Ok((gain * v).ln_1p())
            }
        })
        .collect()
}

/// Same-padded, stride-1 cross-correlation with a square odd kernel.
///
/// `weights` is `out x in x k x k`, `bias` has `out` entries.
pub fn conv2d<T: Scalar>(
    input: &Tensor3<T>,
    weights: &[T],
    bias: &[T],
    kernel: usize,
) -> Result<Tensor3<T>> {
    let out_channels = bias.len();
    check_conv_shapes(input, weights, out_channels, kernel)?;
    let (in_channels, h, w) = input.shape();
    let pad = kernel / 2;
    let mut out = Tensor3::zeros(out_channels, h, w);
    let plane = h * w;

    for o in 0..out_channels {
        let out_plane = &mut out.data[o * plane..(o + 1) * plane];
        out_plane.iter_mut().for_each(|v| *v = bias[o]);
        for i in 0..in_channels {
            let in_plane = input.plane(i);
            for dy in 0..kernel {
                for dx in 0..kernel {
                    let wv = weights[((o * in_channels + i) * kernel + dy) * kernel + dx];
                    let (x0, x1) = valid_range(w, dx, pad);
                    if x0 >= x1 {
                        continue;
                    }
                    for y in 0..h {
                        let sy = y + dy;
                        if sy < pad || sy - pad >= h {
                            continue;
                        }
                        let src = &in_plane[(sy - pad) * w + x0 + dx - pad..(sy - pad) * w + x1 + dx - pad];
                        let dst = &mut out_plane[y * w + x0..y * w + x1];
                        for (d, &s) in dst.iter_mut().zip(src) {
                            *d += wv * s;
                        }
                    }
                }
            }
        }
    }
    Ok(out)
}

/// Gradients of [`conv2d`]: `(d input, d weights, d bias)`. The input
/// gradient is only computed when `want_input` is set.
pub fn conv2d_backward<T: Scalar>(
    input: &Tensor3<T>,
    weights: &[T],
    kernel: usize,
    grad_out: &Tensor3<T>,
    want_input: bool,
) -> Result<(Option<Tensor3<T>>, Vec<T>, Vec<T>)> {
    let out_channels = grad_out.channels;
    check_conv_shapes(input, weights, out_channels, kernel)?;
    let (in_channels, h, w) = input.shape();
    if grad_out.height != h || grad_out.width != w {
        return Err(Error::Shape("conv gradient does not match the input plane".into()));
    }
    let pad = kernel / 2;
    let plane = h * w;
    let mut g_w = vec![T::zero(); weights.len()];
    let mut g_b = vec![T::zero(); out_channels];
    let mut g_in = want_input.then(|| Tensor3::zeros(in_channels, h, w));

    for o in 0..out_channels {
        let go = grad_out.plane(o);
        g_b[o] = go.iter().copied().sum();
        for i in 0..in_channels {
            let in_plane = input.plane(i);
            for dy in 0..kernel {
                for dx in 0..kernel {
                    let widx = ((o * in_channels + i) * kernel + dy) * kernel + dx;
                    let wv = weights[widx];
                    let (x0, x1) = valid_range(w, dx, pad);
                    if x0 >= x1 {
                        continue;
                    }
                    let mut acc = T::zero();
                    for y in 0..h {
                        let sy = y + dy;
                        if sy < pad || sy - pad >= h {
                            continue;
                        }
                        let s0 = (sy - pad) * w + x0 + dx - pad;
                        let s1 = s0 + (x1 - x0);
                        let g_row = &go[y * w + x0..y * w + x1];
                        acc += g_row.iter().zip(&in_plane[s0..s1]).map(|(&g, &s)| g * s).sum::<T>();
                        if let Some(g_in) = g_in.as_mut() {
                            let dst = &mut g_in.data[i * plane + s0..i * plane + s1];
                            for (d, &g) in dst.iter_mut().zip(g_row) {
                                *d += wv * g;
                            }
                        }
                    }
                    g_w[widx] = acc;
                }
            }
        }
    }
    Ok((g_in, g_w, g_b))
}

/// Output columns `[x0, x1)` for which column `x + dx - pad` lies inside `[0, w)`.
#[inline]
fn valid_range(w: usize, dx: usize, pad: usize) -> (usize, usize) {
    let x0 = pad.saturating_sub(dx);
    let x1 = (w + pad).saturating_sub(dx).min(w);
    (x0, x1)
}

fn check_conv_shapes<T>(input: &Tensor3<T>, weights: &[T], out_channels: usize, kernel: usize) -> Result<()> {
    if kernel == 0 || kernel % 2 == 0 {
        return Err(Error::Shape(format!("kernel size {kernel} must be odd")));
    }
    let expected = out_channels * input.channels * kernel * kernel;
    if weights.len() != expected {
        return Err(Error::Shape(format!(
            "{} conv weights, expected {out_channels}x{}x{kernel}x{kernel}",
            weights.len(),
            input.channels
        )));
    }
    Ok(())
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Padding {
    /// Output length `ceil(n / stride)`; windows may hang over the edges.
    Same,
    /// Only windows fully inside the input.
    Valid,
}

/// Square max-pooling window applied identically on both spatial axes.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct PoolSpec {
    pub size: usize,
    pub stride: usize,
    pub padding: Padding,
}

impl PoolSpec {
    pub fn output_len(&self, n: usize) -> usize {
        if self.stride == 0 || self.size == 0 {
            return 0;
        }
        match self.padding {
            Padding::Same => n.div_ceil(self.stride),
            Padding::Valid if n < self.size => 0,
            Padding::Valid => (n - self.size) / self.stride + 1,
        }
    }

    fn pad_before(&self, n: usize) -> usize {
        match self.padding {
            Padding::Valid => 0,
            Padding::Same => {
                let out = self.output_len(n);
                let total = ((out.saturating_sub(1)) * self.stride + self.size).saturating_sub(n);
                total / 2
            }
        }
    }

    /// Input index range covered by output position `j`.
    fn window(&self, j: usize, n: usize) -> (usize, usize) {
        let start = (j * self.stride) as isize - self.pad_before(n) as isize;
        let lo = start.max(0) as usize;
        let hi = ((start + self.size as isize).max(0) as usize).min(n);
        (lo, hi)
    }
}

/// Max pooling. Returns the pooled tensor and, for every output element, the
/// flat input index of the winning entry (first maximum in scan order).
pub fn maxpool<T: Scalar>(input: &Tensor3<T>, spec: PoolSpec) -> Result<(Tensor3<T>, Vec<usize>)> {
    let (c, h, w) = input.shape();
    let (oh, ow) = (spec.output_len(h), spec.output_len(w));
    if oh == 0 || ow == 0 {
        return Err(Error::Shape(format!(
            "pooling {h}x{w} with window {} stride {} leaves nothing",
            spec.size, spec.stride
        )));
    }
    let mut out = Tensor3::zeros(c, oh, ow);
    let mut winners = vec![0usize; c * oh * ow];
    for ch in 0..c {
        for oy in 0..oh {
            let (y0, y1) = spec.window(oy, h);
            for ox in 0..ow {
                let (x0, x1) = spec.window(ox, w);
                let mut best = T::neg_infinity();
                let mut arg = (ch * h + y0) * w + x0;
                for y in y0..y1 {
                    let row = (ch * h + y) * w;
                    for x in x0..x1 {
                        let v = input.data[row + x];
                        if v > best {
                            best = v;
                            arg = row + x;
                        }
                    }
                }
                let o = (ch * oh + oy) * ow + ox;
                out.data[o] = best;
                winners[o] = arg;
            }
        }
    }
    Ok((out, winners))
}

/// Routes each output gradient back to its winning input entry.
pub fn maxpool_backward<T: Scalar>(
    grad_out: &Tensor3<T>,
    winners: &[usize],
    input_shape: (usize, usize, usize),
) -> Result<Tensor3<T>> {
    if winners.len() != grad_out.data.len() {
        return Err(Error::Shape("pool winners do not match the gradient".into()));
    }
    let (c, h, w) = input_shape;
    let mut g = Tensor3::zeros(c, h, w);
    for (&idx, &go) in winners.iter().zip(&grad_out.data) {
        g.data[idx] += go;
    }
    Ok(g)
}

/// Flattens `channels x mels` into one feature axis (channel-major) and
/// averages over time.
pub fn global_time_pool<T: Scalar>(input: &Tensor3<T>) -> Vec<T> {
    let (c, h, w) = input.shape();
    let mut out = vec![T::zero(); c * w];
    if h == 0 {
        return out;
    }
    for ch in 0..c {
        let dst = &mut out[ch * w..(ch + 1) * w];
        for y in 0..h {
            let row = &input.data[(ch * h + y) * w..(ch * h + y + 1) * w];
            for (d, &v) in dst.iter_mut().zip(row) {
                *d += v;
            }
        }
    }
    let scale = T::one() / T::of(h as f64);
    out.iter_mut().for_each(|v| *v *= scale);
    out
}

pub fn global_time_pool_backward<T: Scalar>(grad: &[T], shape: (usize, usize, usize)) -> Tensor3<T> {
    let (c, h, w) = shape;
    let mut g = Tensor3::zeros(c, h, w);
    let scale = T::one() / T::of(h.max(1) as f64);
    for ch in 0..c {
        for y in 0..h {
            let row = &mut g.data[(ch * h + y) * w..(ch * h + y + 1) * w];
            for (d, &gv) in row.iter_mut().zip(&grad[ch * w..(ch + 1) * w]) {
                *d = gv * scale;
            }
        }
    }
    g
}

/// `v / ||v||`, also returning `||v||`.
pub fn l2_normalize<T: Scalar>(v: &[T]) -> Result<(Vec<T>, T)> {
    let norm = v.iter().map(|&x| x * x).sum::<T>().sqrt();
    if !(norm > T::zero()) || !norm.is_finite() {
        return Err(Error::DegenerateEmbedding(format!("cannot normalize a vector of norm {norm}")));
    }
    Ok((v.iter().map(|&x| x / norm).collect(), norm))
}

/// Pulls a gradient on `e = v / ||v||` back to `v`:
/// `(g - e (e . g)) / ||v||`.
pub fn l2_normalize_backward<T: Scalar>(e: &[T], norm: T, grad: &[T]) -> Vec<T> {
    let proj: T = e.iter().zip(grad).map(|(&a, &b)| a * b).sum();
    e.iter().zip(grad).map(|(&ei, &gi)| (gi - ei * proj) / norm).collect()
}
