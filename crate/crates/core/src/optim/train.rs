//! Batch training loops.
//!
//! Batches are consecutive and non-overlapping. Every blind step runs
//! equalize -> soft demap -> plug-in noise variance -> loss -> gradient ->
//! Adam; the plug-in variance computed on a batch is the one the demapper
//! uses on the next batch.

use std::io::{self, Write};

use super::adam::{adam_step, AdamConfig, AdamState};
use super::objective::{blind_objective, supervised_objective, Batch, BlindModel};
use super::schedule::{LrPolicy, StepSchedule};
use crate::elbo::{sigma2_plugin, SymbolPrior};
use crate::equalizers::Equalizer;
use crate::error::{Error, Result};
use crate::qstats::Constellation;
use crate::scalar::Scalar;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TrainConfig {
    /// Symbols per batch.
    pub batch_size: usize,
    /// Passes over the training signal.
    pub epochs: usize,
    pub lr: f64,
    /// Step schedule when true, constant `lr` otherwise.
    pub schedule: bool,
    pub adam: AdamConfig,
}

impl TrainConfig {
    pub fn new(batch_size: usize, lr: f64) -> Self {
        Self { batch_size, epochs: 1, lr, schedule: true, adam: AdamConfig::default() }
    }

    fn policy(&self, n_iter: usize) -> Result<LrPolicy> {
        if self.schedule {
            Ok(LrPolicy::Step(StepSchedule::new(self.lr, n_iter)?))
        } else if self.lr > 0.0 && self.lr.is_finite() {
            Ok(LrPolicy::Fixed(self.lr))
        } else {
            Err(Error::InvalidParameter(format!("learning rate {} must be positive", self.lr)))
        }
    }

    fn batches(&self, n_symbols: usize) -> Result<usize> {
        if self.batch_size == 0 || self.epochs == 0 {
            return Err(Error::InvalidParameter("batch size and epochs must be positive".into()));
        }
        let b = n_symbols / self.batch_size;
        if b == 0 {
            return Err(Error::SignalTooShort { got: n_symbols, need: self.batch_size });
        }
        Ok(b)
    }
}

/// One optimizer step.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TraceRow {
    pub iteration: usize,
    pub lr: f64,
    pub loss: f64,
    /// Plug-in noise variance for blind runs, batch MSE for supervised ones.
    pub sigma2: f64,
}

#[derive(Debug, Clone, Default, PartialEq)]
pub struct LossTrace {
    pub rows: Vec<TraceRow>,
}

impl LossTrace {
    pub fn losses(&self) -> Vec<f64> {
        self.rows.iter().map(|r| r.loss).collect()
    }

    /// `iteration,lr,loss,sigma2` with a header line.
    pub fn write_csv<W: Write>(&self, mut w: W) -> io::Result<()> {
        writeln!(w, "iteration,lr,loss,sigma2")?;
        for r in &self.rows {
            writeln!(w, "{},{:e},{:e},{:e}", r.iteration, r.lr, r.loss, r.sigma2)?;
        }
        Ok(())
    }
}

/// Step-by-step blind training, for callers that feed their own stream.
#[derive(Debug, Clone)]
pub struct BlindTrainer<T> {
    pub model: BlindModel<T>,
    /// Noise variance the demapper uses on the next batch.
    pub sigma2: T,
    constellation: Constellation<T>,
    prior: SymbolPrior<T>,
    adam: AdamState<T>,
    grad: Vec<T>,
    iteration: usize,
}

impl<T: Scalar> BlindTrainer<T> {
    pub fn new(model: BlindModel<T>, constellation: Constellation<T>, prior: SymbolPrior<T>, adam: AdamConfig) -> Self {
        let n = model.num_params();
        let sigma2 = model.channel.sigma2();
        Self {
            model,
            sigma2,
            constellation,
            prior,
            adam: AdamState::with_config(n, adam),
            grad: vec![T::zero(); n],
            iteration: 0,
        }
    }

    pub fn iteration(&self) -> usize {
        self.iteration
    }

    /// Trains on one batch. On error the model is left as it was.
    pub fn step(&mut self, batch: &Batch<'_, T>, lr: f64) -> Result<TraceRow> {
        let value =
            blind_objective(&self.model, &self.constellation, &self.prior, batch, self.sigma2, Some(&mut self.grad))?;
        if !value.loss.is_finite() {
            return Err(Error::Diverged { batch: self.iteration, loss: value.loss.f64() });
        }
        let sigma2 = sigma2_plugin(value.c, value.n);
        let mut params = self.model.params();
        adam_step(&mut params, &self.grad, &mut self.adam, T::of(lr))?;
        self.model.set_params(&params);
        self.model.demapper.project();
        self.model.channel.set_sigma2(sigma2);
        self.sigma2 = sigma2;
        let row = TraceRow { iteration: self.iteration, lr, loss: value.loss.f64(), sigma2: sigma2.f64() };
        self.iteration += 1;
        Ok(row)
    }
}

/// Blind training over `signal` (at `sps`) for `cfg.epochs` passes.
pub fn train_blind<T: Scalar>(
    model: BlindModel<T>,
    constellation: &Constellation<T>,
    prior: &SymbolPrior<T>,
    signal: &[T],
    sps: usize,
    cfg: &TrainConfig,
) -> Result<(BlindModel<T>, LossTrace)> {
    let batches = cfg.batches(signal.len() / sps.max(1))?;
    let policy = cfg.policy(batches * cfg.epochs)?;
    let mut trainer = BlindTrainer::new(model, constellation.clone(), prior.clone(), cfg.adam);
    let mut trace = LossTrace::default();
    for _ in 0..cfg.epochs {
        for b in 0..batches {
            let batch = Batch { signal, sps, start: b * cfg.batch_size, count: cfg.batch_size };
            let lr = policy.lr(trainer.iteration());
            trace.rows.push(trainer.step(&batch, lr)?);
        }
    }
    Ok((trainer.model, trace))
}

/// Pilot-aided training of `equalizer` by mean squared error.
pub fn train_supervised<T: Scalar>(
    equalizer: &mut Equalizer<T>,
    signal: &[T],
    pilots: &[T],
    sps: usize,
    cfg: &TrainConfig,
) -> Result<LossTrace> {
    let n_symbols = pilots.len().min(signal.len() / sps.max(1));
    let batches = cfg.batches(n_symbols)?;
    let policy = cfg.policy(batches * cfg.epochs)?;
    let n = equalizer.num_params();
    let mut adam = AdamState::with_config(n, cfg.adam);
    let mut grad = vec![T::zero(); n];
    let mut params = vec![T::zero(); n];
    let mut trace = LossTrace::default();
    let mut iteration = 0;
    for _ in 0..cfg.epochs {
        for b in 0..batches {
            let start = b * cfg.batch_size;
            let batch = Batch { signal, sps, start, count: cfg.batch_size };
            let loss =
                supervised_objective(equalizer, &batch, &pilots[start..start + cfg.batch_size], Some(&mut grad))?;
            if !loss.is_finite() {
                return Err(Error::Diverged { batch: iteration, loss: loss.f64() });
            }
            let lr = policy.lr(iteration);
            equalizer.write_params(&mut params);
            adam_step(&mut params, &grad, &mut adam, T::of(lr))?;
            equalizer.read_params(&params);
            trace.rows.push(TraceRow { iteration, lr, loss: loss.f64(), sigma2: loss.f64() });
            iteration += 1;
        }
    }
    Ok(trace)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::equalizers::{equalize, hard_decision_euclidean, FfeEqualizer};
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    /// PAM-4 through a short ISI channel at 2 sps with light noise.
    fn link(n: usize, seed: u64) -> (Vec<usize>, Vec<f64>) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let c = Constellation::<f64>::pam4();
        let idx: Vec<usize> = (0..n).map(|_| rng.gen_range(0..4)).collect();
        let x = c.symbols(&idx);
        let mut up = vec![0.0; 2 * n];
        for (i, &v) in x.iter().enumerate() {
            up[2 * i] = v;
        }
        let h = [0.2, 1.0, 0.35, -0.1];
        let mut y = vec![0.0; 2 * n];
        for t in 0..2 * n {
            for (k, &hk) in h.iter().enumerate() {
                // centred at tap 1
                let s = t as isize + 1 - k as isize;
                if s >= 0 && (s as usize) < up.len() {
                    y[t] += hk * up[s as usize];
                }
            }
            y[t] += 0.05 * (rng.gen::<f64>() - 0.5);
        }
        (idx, y)
    }

    #[test]
    fn supervised_ffe_learns_isi_channel() {
        let (idx, y) = link(20_000, 1);
        let c = Constellation::<f64>::pam4();
        let pilots = c.symbols(&idx);
        let mut eq = Equalizer::Ffe(FfeEqualizer::center_spike(11));
        let cfg = TrainConfig { epochs: 2, ..TrainConfig::new(200, 5e-3) };
        let trace = train_supervised(&mut eq, &y, &pilots, 2, &cfg).unwrap();
        assert!(trace.rows.last().unwrap().loss < 0.05 * trace.rows[0].loss);
        let xhat = equalize(&y, &eq, 2).unwrap();
        let dec = hard_decision_euclidean(&xhat, &c);
        let errors = dec.iter().zip(&idx).filter(|(a, b)| a != b).count();
        assert!(errors < 20, "{errors}");
    }

    #[test]
    fn blind_vae_reduces_loss_and_is_deterministic() {
        let (_, y) = link(10_000, 2);
        let c = Constellation::<f64>::pam4();
        let prior = SymbolPrior::flat(4);
        let cfg = TrainConfig::new(500, 5e-3);
        let (_, a) = train_blind(BlindModel::vae(7, 3, 7, 4), &c, &prior, &y, 2, &cfg).unwrap();
        let (_, b) = train_blind(BlindModel::vae(7, 3, 7, 4), &c, &prior, &y, 2, &cfg).unwrap();
        assert_eq!(a, b);
        assert_eq!(a.rows.len(), 20);
        let first = a.rows[0].loss;
        let last = a.rows.last().unwrap().loss;
        assert!(last < first, "{first} -> {last}");
    }

    #[test]
    fn fixed_rate_when_schedule_disabled() {
        let (_, y) = link(2_000, 3);
        let c = Constellation::<f64>::pam4();
        let cfg = TrainConfig { schedule: false, ..TrainConfig::new(200, 1e-3) };
        let (_, t) = train_blind(BlindModel::vae(5, 3, 5, 4), &c, &SymbolPrior::flat(4), &y, 2, &cfg).unwrap();
        assert!(t.rows.iter().all(|r| r.lr == 1e-3));
    }

    #[test]
    fn trace_csv_layout() {
        let t = LossTrace { rows: vec![TraceRow { iteration: 0, lr: 5e-3, loss: 12.5, sigma2: 0.25 }] };
        let mut out = Vec::new();
        t.write_csv(&mut out).unwrap();
        assert_eq!(String::from_utf8(out).unwrap(), "iteration,lr,loss,sigma2\n0,5e-3,1.25e1,2.5e-1\n");
    }

    #[test]
    fn diverging_input_is_reported() {
        let y = vec![f64::NAN; 400];
        let c = Constellation::<f64>::pam4();
        let cfg = TrainConfig::new(100, 1e-3);
        assert!(train_blind(BlindModel::vae(5, 3, 5, 4), &c, &SymbolPrior::flat(4), &y, 2, &cfg).is_err());
    }
}
