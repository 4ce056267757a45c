use serde::{Deserialize, Serialize};

use super::{Parameters, Scalar};
use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct RmsPropConfig {
    pub learning_rate: f64,
    pub rho: f64,
    pub epsilon: f64,
}

impl Default for RmsPropConfig {
    fn default() -> Self {
        Self {
            learning_rate: 1e-3,
            rho: 0.9,
            epsilon: 1e-8,
        }
    }
}

/// Running mean of squared gradients, one accumulator per parameter.
#[derive(Debug, Clone, PartialEq)]
pub struct OptimizerState<T> {
    pub config: RmsPropConfig,
    pub accumulators: Vec<Vec<T>>,
}

impl<T: Scalar> OptimizerState<T> {
    pub fn new(config: RmsPropConfig, params: &Parameters<T>) -> Self {
        Self {
            config,
            accumulators: params.tensors().iter().map(|t| vec![T::zero(); t.len()]).collect(),
        }
    }
}

/// One RMSProp update, elementwise:
///
/// ```text
/// s <- rho * s + (1 - rho) * g^2
/// w <- w - lr * g / (sqrt(s) + eps)
/// ```
///
/// Nothing is modified if any gradient is non-finite or shapes disagree.
pub fn rmsprop_step<T: Scalar>(
    params: &mut Parameters<T>,
    grads: &Parameters<T>,
    state: &mut OptimizerState<T>,
) -> Result<()> {
    let g_tensors = grads.tensors();
    let shapes_match = params.shapes() == grads.shapes()
        && state.accumulators.len() == g_tensors.len()
        && state.accumulators.iter().zip(&g_tensors).all(|(s, g)| s.len() == g.len());
    if !shapes_match {
        return Err(Error::Shape("gradient or optimizer state does not match the parameters".into()));
    }
    if !grads.all_finite() {
        return Err(Error::Numeric("non-finite gradient; update skipped".into()));
    }

    let cfg = state.config;
    for ((w, g), s) in params
        .tensors_mut()
        .into_iter()
        .zip(g_tensors)
        .zip(state.accumulators.iter_mut())
    {
        rmsprop_update(w, g, s, cfg);
    }
    Ok(())
}

/// Slice-level RMSProp update; callers guarantee equal lengths.
pub fn rmsprop_update<T: Scalar>(weights: &mut [T], grads: &[T], accum: &mut [T], cfg: RmsPropConfig) {
    let rho = T::of(cfg.rho);
    let one_minus_rho = T::of(1.0 - cfg.rho);
    let lr = T::of(cfg.learning_rate);
    let eps = T::of(cfg.epsilon);
    for ((w, &g), s) in weights.iter_mut().zip(grads).zip(accum.iter_mut()) {
        *s = rho * *s + one_minus_rho * g * g;
        *w -= lr * g / (s.sqrt() + eps);
    }
}
