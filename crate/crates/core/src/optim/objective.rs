//! Training objectives with hand-derived gradients.
//!
//! The blind objective chains
//! equalizer -> soft demapper -> moments -> expected residual -> loss;
//! the supervised one is the mean squared error against pilots.

use crate::elbo::{
    fast, plugin_loss, ChannelModel, LinearChannelModel, LossValue, SymbolPrior, VolterraChannelModel, C_FLOOR,
};
use crate::equalizers::{
    demap_logits, equalize_range, equalizer_pullback, softmax_in_place, Equalizer, SoftDemapper, VolterraEqualizer,
};
use crate::error::{Error, Result};
use crate::qstats::{compute_moments, moments_pullback, Constellation, SymbolProbabilities};
use crate::scalar::Scalar;
use crate::sym::packed_len;

/// Everything a VAE-style equalizer learns.
///
/// Flat parameter layout: equalizer (`w1`, packed `w2`), demapper `beta`,
/// channel `h`, then the packed second-order channel kernel if present.
#[derive(Debug, Clone, PartialEq)]
pub struct BlindModel<T> {
    pub equalizer: Equalizer<T>,
    pub demapper: SoftDemapper<T>,
    pub channel: ChannelModel<T>,
}

impl<T: Scalar> BlindModel<T> {
    /// Volterra equalizer with a linear channel model.
    pub fn vae(taps1: usize, taps2: usize, channel_len: usize, m: usize) -> Self {
        Self {
            equalizer: Equalizer::Volterra(VolterraEqualizer::center_spike(taps1, taps2)),
            demapper: SoftDemapper::new(m),
            channel: ChannelModel::Linear(LinearChannelModel::center_spike(channel_len)),
        }
    }

    /// Volterra equalizer with a second-order Volterra channel model.
    pub fn v2vae(taps1: usize, taps2: usize, channel_len: usize, m: usize) -> Self {
        Self {
            equalizer: Equalizer::Volterra(VolterraEqualizer::center_spike(taps1, taps2)),
            demapper: SoftDemapper::new(m),
            channel: ChannelModel::Volterra(VolterraChannelModel::center_spike(channel_len)),
        }
    }

    fn offsets(&self) -> [usize; 4] {
        let eq = self.equalizer.num_params();
        let beta = eq + self.demapper.beta.len();
        let h = beta + self.channel.h().len();
        let hq = h + self.channel.hq().map_or(0, |q| packed_len(q.dim()));
        [eq, beta, h, hq]
    }

    pub fn num_params(&self) -> usize {
        self.offsets()[3]
    }

    pub fn params(&self) -> Vec<T> {
        let [eq, beta, h, n] = self.offsets();
        let mut out = vec![T::zero(); n];
        self.equalizer.write_params(&mut out[..eq]);
        out[eq..beta].copy_from_slice(&self.demapper.beta);
        out[beta..h].copy_from_slice(self.channel.h());
        if let Some(q) = self.channel.hq() {
            out[h..].copy_from_slice(q.packed());
        }
        out
    }

    pub fn set_params(&mut self, src: &[T]) {
        let [eq, beta, h, n] = self.offsets();
        assert_eq!(src.len(), n, "parameter vector length");
        self.equalizer.read_params(&src[..eq]);
        self.demapper.beta.copy_from_slice(&src[eq..beta]);
        self.channel.h_mut().copy_from_slice(&src[beta..h]);
        if let Some(q) = self.channel.hq_mut() {
            q.packed_mut().copy_from_slice(&src[h..]);
        }
    }
}

/// A run of `count` symbols starting at symbol `start` of a signal sampled
/// at `sps`. The equalizer may read samples on either side of the run.
#[derive(Debug, Clone, Copy)]
pub struct Batch<'a, T> {
    pub signal: &'a [T],
    pub sps: usize,
    pub start: usize,
    pub count: usize,
}

impl<'a, T: Scalar> Batch<'a, T> {
    /// Received samples covered by the batch.
    pub fn samples(&self) -> Result<&'a [T]> {
        let lo = self.sps * self.start;
        let hi = self.sps * (self.start + self.count);
        if self.count == 0 || hi > self.signal.len() {
            return Err(Error::Dimension(format!(
                "batch of {} symbols at {} needs samples up to {hi}, signal has {}",
                self.count,
                self.start,
                self.signal.len()
            )));
        }
        Ok(&self.signal[lo..hi])
    }
}

/// Plug-in negative ELBO of one batch, and its gradient with respect to
/// [`BlindModel::params`] when `grad` is given (overwritten, not added to).
///
/// `sigma2` is the demapper's noise variance and is held constant.
pub fn blind_objective<T: Scalar>(
    model: &BlindModel<T>,
    constellation: &Constellation<T>,
    prior: &SymbolPrior<T>,
    batch: &Batch<'_, T>,
    sigma2: T,
    grad: Option<&mut [T]>,
) -> Result<LossValue<T>> {
    let m = constellation.len();
    if model.demapper.beta.len() != m || prior.len() != m {
        return Err(Error::Dimension(format!(
            "{} demapper weights and {} prior entries for M = {m}",
            model.demapper.beta.len(),
            prior.len()
        )));
    }
    if !(sigma2 > T::zero()) || !sigma2.is_finite() {
        return Err(Error::InvalidParameter("demapper noise variance must be positive".into()));
    }
    model.channel.validate()?;
    let y = batch.samples()?;
    let (sps, count) = (batch.sps, batch.count);
    let xhat = equalize_range(batch.signal, &model.equalizer, sps, batch.start, count)?;
    if xhat.iter().any(|x| !x.is_finite()) {
        return Err(Error::NonFinite("equalizer output"));
    }

    let points = constellation.points();
    let beta = &model.demapper.beta;
    let log_prior: Vec<T> = prior.probs().iter().map(|p| p.ln()).collect();
    let mut f = vec![T::zero(); count * m];
    let mut logf = vec![T::zero(); count * m];
    let mut kl = T::zero();
    for n in 0..count {
        let (row, lrow) = (&mut f[n * m..(n + 1) * m], &mut logf[n * m..(n + 1) * m]);
        demap_logits(xhat[n], points, beta, sigma2, row);
        softmax_in_place(row, lrow);
        for k in 0..m {
            if row[k] > T::zero() {
                if prior.probs()[k] == T::zero() {
                    return Err(Error::InfiniteDivergence { row: n, symbol: k });
                }
                kl += row[k] * (lrow[k] - log_prior[k]);
            }
        }
    }
    let probs = SymbolProbabilities::from_rows_unchecked(m, f);
    let ms = compute_moments(&probs, constellation)?;
    let (h, hq, center) = (model.channel.h(), model.channel.hq(), model.channel.center());

    let Some(grad) = grad else {
        let c = fast::residual(y, &ms, sps, h, hq, center)?;
        return Ok(plugin_loss(kl, c, y.len()));
    };

    let n_params = model.num_params();
    if grad.len() != n_params {
        return Err(Error::Dimension(format!("gradient buffer of {} for {n_params} parameters", grad.len())));
    }
    grad.fill(T::zero());
    let [off_eq, off_beta, off_h, _] = model.offsets();

    let rg = fast::residual_with_grad(y, &ms, sps, h, hq, center)?;
    let value = plugin_loss(kl, rg.total, y.len());
    let dc = if rg.total > T::of(C_FLOOR) { T::of(y.len() as f64) / rg.total } else { T::zero() };

    for (g, &d) in grad[off_beta..off_h].iter_mut().zip(&rg.d_h) {
        *g = dc * d;
    }
    if let Some(dq) = &rg.d_hq {
        for (g, &d) in grad[off_h..].iter_mut().zip(dq.packed()) {
            *g = dc * d;
        }
    }

    // dL/df: residual part through the moments, plus the KL part. The
    // constant `+1` of d(f log f)/df is dropped; softmax annihilates it.
    let mut df = moments_pullback(&rg.d_moments, constellation);
    for n in 0..count {
        for k in 0..m {
            let i = n * m + k;
            df[i] = dc * df[i] + (logf[i] - log_prior[k]);
        }
    }

    let two = T::of(2.0);
    let mut dx = vec![T::zero(); count];
    let (eq_grad, rest) = grad.split_at_mut(off_eq);
    let d_beta = &mut rest[..off_beta - off_eq];
    let f = probs.as_slice();
    for n in 0..count {
        let row = &f[n * m..(n + 1) * m];
        let drow = &df[n * m..(n + 1) * m];
        let mean: T = row.iter().zip(drow).map(|(&p, &d)| p * d).sum();
        let x = xhat[n];
        for k in 0..m {
            let dz = row[k] * (drow[k] - mean);
            let e = x - points[k];
            let bs = beta[k] * sigma2;
            dx[n] -= dz * two * e / bs;
            d_beta[k] += dz * e * e / (bs * beta[k]);
        }
    }
    equalizer_pullback(batch.signal, &model.equalizer, sps, batch.start, &dx, eq_grad);
    Ok(value)
}

/// Mean squared error of the equalizer against `pilots` over the batch,
/// with its gradient with respect to the equalizer parameters.
pub fn supervised_objective<T: Scalar>(
    equalizer: &Equalizer<T>,
    batch: &Batch<'_, T>,
    pilots: &[T],
    grad: Option<&mut [T]>,
) -> Result<T> {
    batch.samples()?;
    if pilots.len() != batch.count {
        return Err(Error::Dimension(format!("{} pilots for {} symbols", pilots.len(), batch.count)));
    }
    let xhat = equalize_range(batch.signal, equalizer, batch.sps, batch.start, batch.count)?;
    let loss = crate::equalizers::supervised_loss(&xhat, pilots)?;
    if let Some(grad) = grad {
        if grad.len() != equalizer.num_params() {
            return Err(Error::Dimension(format!(
                "gradient buffer of {} for {} parameters",
                grad.len(),
                equalizer.num_params()
            )));
        }
        grad.fill(T::zero());
        let scale = T::of(2.0) / T::of(batch.count as f64);
        let d: Vec<T> = xhat.iter().zip(pilots).map(|(&x, &p)| scale * (x - p)).collect();
        equalizer_pullback(batch.signal, equalizer, batch.sps, batch.start, &d, grad);
    }
    Ok(loss)
}
