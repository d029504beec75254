//! Adam with bias correction.

use crate::error::{Error, Result};
use crate::scalar::{all_finite, Scalar};

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct AdamConfig {
    pub beta1: f64,
    pub beta2: f64,
    pub eps: f64,
}

impl Default for AdamConfig {
    fn default() -> Self {
        Self { beta1: 0.9, beta2: 0.999, eps: 1e-8 }
    }
}

/// First and second moment accumulators for one flat parameter vector.
#[derive(Debug, Clone, PartialEq)]
pub struct AdamState<T> {
    pub m: Vec<T>,
    pub v: Vec<T>,
    pub step: u64,
    pub config: AdamConfig,
}

impl<T: Scalar> AdamState<T> {
    pub fn new(n: usize) -> Self {
        Self::with_config(n, AdamConfig::default())
    }

    pub fn with_config(n: usize, config: AdamConfig) -> Self {
        Self { m: vec![T::zero(); n], v: vec![T::zero(); n], step: 0, config }
    }

    pub fn len(&self) -> usize {
        self.m.len()
    }

    pub fn is_empty(&self) -> bool {
        self.m.is_empty()
    }
}

/// One bias-corrected Adam update of `params` in place.
///
/// A non-finite gradient leaves both `params` and `state` untouched.
pub fn adam_step<T: Scalar>(params: &mut [T], grads: &[T], state: &mut AdamState<T>, lr: T) -> Result<()> {
    if params.len() != grads.len() || params.len() != state.len() {
        return Err(Error::Dimension(format!(
            "{} parameters, {} gradients, optimizer sized for {}",
            params.len(),
            grads.len(),
            state.len()
        )));
    }
    if !all_finite(grads) {
        return Err(Error::NonFinite("gradient"));
    }
    let AdamConfig { beta1, beta2, eps } = state.config;
    state.step += 1;
    let t = state.step as i32;
    let (b1, b2, eps) = (T::of(beta1), T::of(beta2), T::of(eps));
    let c1 = T::one() - T::of(beta1.powi(t));
    let c2 = T::one() - T::of(beta2.powi(t));
    for (((p, &g), m), v) in params.iter_mut().zip(grads).zip(&mut state.m).zip(&mut state.v) {
        *m = b1 * *m + (T::one() - b1) * g;
        *v = b2 * *v + (T::one() - b2) * g * g;
        let m_hat = *m / c1;
        let v_hat = *v / c2;
        *p -= lr * m_hat / (v_hat.sqrt() + eps);
    }
    Ok(())
}
