//! Negative ELBO for blind equalization with a Gaussian likelihood.
//!
//! The loss after plugging in the closed-form noise variance is
//! `KL(Q || P) + N log C`, where `C = E_Q[sum_n (y_n - y_hat_n)^2]` and
//! `y_hat_n` is either a linear FIR channel or a second-order Volterra
//! channel applied to the lagged symbol vector.
//!
//! Three independent evaluations of `C` live here:
//!
//! * [`reference`]: the term-by-term moment expansion with full index sums,
//!   `O(L^3)` / `O(L^4)` per sample.
//! * [`fast`]: the same quantity rewritten around central moments and
//!   cumulants, `O(L^2)` per sample, with exact gradients. Used for training.
//! * [`oracle`]: brute-force enumeration of every symbol window under the
//!   mean-field `Q`. Ground truth for the other two.
//!
//! # Lag windows
//!
//! For output sample `t` the window position `i` (`0 <= i < L`) reads the
//! sequence index `t + center - i`. `center = 0` is a causal channel;
//! `center = (L - 1) / 2` centres the kernel. Indices outside the sequence
//! read deterministic zeros.

pub mod fast;
pub mod oracle;
pub mod reference;

use crate::error::{Error, Result};
use crate::qstats::{compute_moments, Constellation, MomentSequence, SymbolProbabilities};
use crate::scalar::{all_finite, Scalar};
use crate::sym::SymMatrix;

/// Floor applied to `C` (and `sigma^2`) before any logarithm or division.
pub const C_FLOOR: f64 = 1e-12;

#[derive(Debug, Clone, PartialEq)]
pub struct LinearChannelModel<T> {
    pub h: Vec<T>,
    pub center: usize,
    pub sigma2: T,
}

#[derive(Debug, Clone, PartialEq)]
pub struct VolterraChannelModel<T> {
    pub h: Vec<T>,
    pub hq: SymMatrix<T>,
    pub center: usize,
    pub sigma2: T,
}

impl<T: Scalar> LinearChannelModel<T> {
    pub fn new(h: Vec<T>, center: usize, sigma2: T) -> Result<Self> {
        check_kernel(&h, None, center, sigma2)?;
        Ok(Self { h, center, sigma2 })
    }

    /// Unit tap at the centre of a length-`len` kernel.
    pub fn center_spike(len: usize) -> Self {
        let center = len.saturating_sub(1) / 2;
        let mut h = vec![T::zero(); len];
        h[center] = T::one();
        Self { h, center, sigma2: T::one() }
    }

    pub fn len(&self) -> usize {
        self.h.len()
    }

    pub fn is_empty(&self) -> bool {
        self.h.is_empty()
    }
}

impl<T: Scalar> VolterraChannelModel<T> {
    pub fn new(h: Vec<T>, hq: SymMatrix<T>, center: usize, sigma2: T) -> Result<Self> {
        check_kernel(&h, Some(&hq), center, sigma2)?;
        Ok(Self { h, hq, center, sigma2 })
    }

    pub fn center_spike(len: usize) -> Self {
        let lin = LinearChannelModel::center_spike(len);
        Self { h: lin.h, hq: SymMatrix::zeros(len), center: lin.center, sigma2: lin.sigma2 }
    }

    pub fn len(&self) -> usize {
        self.h.len()
    }

    pub fn is_empty(&self) -> bool {
        self.h.is_empty()
    }
}

fn check_kernel<T: Scalar>(h: &[T], hq: Option<&SymMatrix<T>>, center: usize, sigma2: T) -> Result<()> {
    if h.is_empty() {
        return Err(Error::InvalidParameter("channel kernel needs at least one tap".into()));
    }
    if center >= h.len() {
        return Err(Error::InvalidParameter(format!("kernel centre {center} outside a {}-tap kernel", h.len())));
    }
    if !all_finite(h) {
        return Err(Error::NonFinite("channel kernel"));
    }
    if let Some(hq) = hq {
        if hq.dim() != h.len() {
            return Err(Error::Dimension(format!(
                "second-order kernel is {0}x{0} but the first-order kernel has {1} taps",
                hq.dim(),
                h.len()
            )));
        }
        if !all_finite(hq.packed()) {
            return Err(Error::NonFinite("second-order channel kernel"));
        }
    }
    if !(sigma2 > T::zero()) {
        return Err(Error::InvalidParameter("noise variance must be positive".into()));
    }
    Ok(())
}

/// Either channel model, borrowed the way the residual evaluators need it.
#[derive(Debug, Clone, PartialEq)]
pub enum ChannelModel<T> {
    Linear(LinearChannelModel<T>),
    Volterra(VolterraChannelModel<T>),
}

impl<T: Scalar> ChannelModel<T> {
    pub fn h(&self) -> &[T] {
        match self {
            ChannelModel::Linear(m) => &m.h,
            ChannelModel::Volterra(m) => &m.h,
        }
    }

    pub fn h_mut(&mut self) -> &mut Vec<T> {
        match self {
            ChannelModel::Linear(m) => &mut m.h,
            ChannelModel::Volterra(m) => &mut m.h,
        }
    }

    pub fn hq(&self) -> Option<&SymMatrix<T>> {
        match self {
            ChannelModel::Linear(_) => None,
            ChannelModel::Volterra(m) => Some(&m.hq),
        }
    }

    pub fn hq_mut(&mut self) -> Option<&mut SymMatrix<T>> {
        match self {
            ChannelModel::Linear(_) => None,
            ChannelModel::Volterra(m) => Some(&mut m.hq),
        }
    }

    pub fn center(&self) -> usize {
        match self {
            ChannelModel::Linear(m) => m.center,
            ChannelModel::Volterra(m) => m.center,
        }
    }

    pub fn sigma2(&self) -> T {
        match self {
            ChannelModel::Linear(m) => m.sigma2,
            ChannelModel::Volterra(m) => m.sigma2,
        }
    }

    pub fn set_sigma2(&mut self, s: T) {
        match self {
            ChannelModel::Linear(m) => m.sigma2 = s,
            ChannelModel::Volterra(m) => m.sigma2 = s,
        }
    }

    pub fn is_volterra(&self) -> bool {
        matches!(self, ChannelModel::Volterra(_))
    }

    pub fn validate(&self) -> Result<()> {
        check_kernel(self.h(), self.hq(), self.center(), self.sigma2())
    }
}

/// Categorical prior over the constellation.
#[derive(Debug, Clone, PartialEq)]
pub struct SymbolPrior<T> {
    probs: Vec<T>,
}

impl<T: Scalar> SymbolPrior<T> {
    pub fn flat(m: usize) -> Self {
        Self { probs: vec![T::one() / T::of(m as f64); m] }
    }

    pub fn new(probs: Vec<T>) -> Result<Self> {
        if probs.is_empty() || !all_finite(&probs) || probs.iter().any(|&p| p < T::zero()) {
            return Err(Error::InvalidParameter("prior must be finite and nonnegative".into()));
        }
        let s: T = probs.iter().copied().sum();
        if (s - T::one()).abs() > T::normalization_tol() {
            return Err(Error::InvalidParameter(format!("prior sums to {s}, not 1")));
        }
        Ok(Self { probs })
    }

    pub fn probs(&self) -> &[T] {
        &self.probs
    }

    pub fn len(&self) -> usize {
        self.probs.len()
    }

    pub fn is_empty(&self) -> bool {
        self.probs.is_empty()
    }
}

/// Expected squared residual: the total `C` and the per-sample terms `c_n`.
#[derive(Debug, Clone, PartialEq)]
pub struct Residual<T> {
    pub total: T,
    pub per_sample: Vec<T>,
}

/// `KL(Q || P) = sum_n sum_m f[n,m] log(f[n,m] / P[m])`, with `0 log 0 = 0`.
pub fn kl_term<T: Scalar>(probs: &SymbolProbabilities<T>, prior: &SymbolPrior<T>) -> Result<T> {
    if probs.num_symbols() != prior.len() {
        return Err(Error::Dimension(format!("Q has {} symbols, prior has {}", probs.num_symbols(), prior.len())));
    }
    let mut kl = T::zero();
    for (n, row) in probs.rows().enumerate() {
        for (m, (&f, &p)) in row.iter().zip(prior.probs()).enumerate() {
            if f > T::zero() {
                if p <= T::zero() {
                    return Err(Error::InfiniteDivergence { row: n, symbol: m });
                }
                kl += f * (f / p).ln();
            }
        }
    }
    Ok(kl)
}

/// Closed-form noise variance `C / N`, floored at [`C_FLOOR`].
pub fn sigma2_plugin<T: Scalar>(c: T, n: usize) -> T {
    let n = T::of(n.max(1) as f64);
    (c / n).max(T::of(C_FLOOR))
}

/// Negative ELBO for an arbitrary `sigma^2` (before the plug-in):
/// `KL + (N/2) log(2 pi sigma^2) + C / (2 sigma^2)`.
pub fn negative_elbo<T: Scalar>(kl: T, c: T, n: usize, sigma2: T) -> T {
    let nf = T::of(n as f64);
    let two = T::of(2.0);
    kl + nf / two * (two * T::PI() * sigma2).ln() + c / (two * sigma2)
}

/// Components of the plug-in loss.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LossValue<T> {
    pub loss: T,
    pub kl: T,
    pub c: T,
    /// Number of received samples `N` in the batch.
    pub n: usize,
}

/// `KL(Q || P) + N log C` with `C` floored at [`C_FLOOR`].
///
/// `y` is the received batch at `sps` samples per symbol, so `probs` must
/// have `y.len() / sps` rows. The expectation uses the fast path.
pub fn vae_loss<T: Scalar>(
    probs: &SymbolProbabilities<T>,
    y: &[T],
    model: &ChannelModel<T>,
    prior: &SymbolPrior<T>,
    constellation: &Constellation<T>,
    sps: usize,
) -> Result<LossValue<T>> {
    if probs.len() * sps != y.len() {
        return Err(Error::Dimension(format!("{} symbols at {sps} sps do not cover {} samples", probs.len(), y.len())));
    }
    model.validate()?;
    let ms = compute_moments(probs, constellation)?;
    let kl = kl_term(probs, prior)?;
    let c = fast::residual(y, &ms, sps, model.h(), model.hq(), model.center())?;
    Ok(plugin_loss(kl, c, y.len()))
}

pub(crate) fn plugin_loss<T: Scalar>(kl: T, c: T, n: usize) -> LossValue<T> {
    let floored = c.max(T::of(C_FLOOR));
    LossValue { loss: kl + T::of(n as f64) * floored.ln(), kl, c, n }
}

/// Moments of the lag window feeding output sample `t`.
#[derive(Debug, Clone, PartialEq)]
pub struct MomentWindow<T> {
    pub m1: Vec<T>,
    pub m2: Vec<T>,
    pub m3: Vec<T>,
    pub m4: Vec<T>,
}

impl<T: Scalar> MomentWindow<T> {
    pub fn gather(ms: &MomentSequence<T>, t: usize, len: usize, center: usize) -> Self {
        let mut w = Self {
            m1: Vec::with_capacity(len),
            m2: Vec::with_capacity(len),
            m3: Vec::with_capacity(len),
            m4: Vec::with_capacity(len),
        };
        for i in 0..len {
            let [a, b, c, d] = ms.at(t as isize + center as isize - i as isize);
            w.m1.push(a);
            w.m2.push(b);
            w.m3.push(c);
            w.m4.push(d);
        }
        w
    }

    /// Window of a single index with the given moments.
    pub fn from_moments(m1: Vec<T>, m2: Vec<T>, m3: Vec<T>, m4: Vec<T>) -> Result<Self> {
        let n = m1.len();
        if m2.len() != n || m3.len() != n || m4.len() != n {
            return Err(Error::Dimension("window moment vectors differ in length".into()));
        }
        Ok(Self { m1, m2, m3, m4 })
    }

    pub fn len(&self) -> usize {
        self.m1.len()
    }

    pub fn is_empty(&self) -> bool {
        self.m1.is_empty()
    }
}
