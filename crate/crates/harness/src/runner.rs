//! One training-and-test run: simulate, fit one method, count errors.

use std::time::Instant;

use blindeq::channels::{simulate_imdd, simulate_wh, ImddConfig, WhConfig};
use blindeq::elbo::SymbolPrior;
use blindeq::equalizers::{
    equalize, hard_decision_euclidean, hard_decision_map, soft_demap, Equalizer, FfeEqualizer, VolterraEqualizer,
};
use blindeq::optim::{train_blind, train_supervised, BlindModel, LossTrace, TrainConfig};
use blindeq::qstats::Constellation;
use blindeq::{dsp, Result};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::seeds::derive_seed;

pub const SPS: usize = 2;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Method {
    Ffe,
    Volterra,
    Vae,
    V2vae,
}

impl Method {
    pub const ALL: [Method; 4] = [Method::Ffe, Method::Volterra, Method::Vae, Method::V2vae];

    pub fn name(self) -> &'static str {
        match self {
            Method::Ffe => "ffe",
            Method::Volterra => "volterra",
            Method::Vae => "vae",
            Method::V2vae => "v2vae",
        }
    }

    pub fn is_blind(self) -> bool {
        matches!(self, Method::Vae | Method::V2vae)
    }
}

impl std::fmt::Display for Method {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(self.name())
    }
}

/// Equalizer and channel-model sizes.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct Sizes {
    pub taps1: usize,
    pub taps2: usize,
    pub channel_taps: usize,
}

impl Default for Sizes {
    fn default() -> Self {
        Self { taps1: 25, taps2: 15, channel_taps: 25 }
    }
}

/// A fully specified link.
#[derive(Debug, Clone, PartialEq)]
pub enum Link {
    Wh(WhConfig),
    Imdd(ImddConfig),
}

impl Link {
    /// Random PAM-4 symbols and the synchronized receive signal.
    pub fn generate<R: Rng>(&self, n: usize, rng: &mut R) -> Result<(Vec<usize>, Vec<f64>)> {
        let c = Constellation::<f64>::pam4();
        let idx: Vec<usize> = (0..n).map(|_| rng.gen_range(0..c.len())).collect();
        let x = c.symbols(&idx);
        let rx = match self {
            Link::Wh(cfg) => simulate_wh(&x, cfg, rng)?.rx,
            Link::Imdd(cfg) => simulate_imdd(&x, cfg, rng)?.rx,
        };
        Ok((idx, rx))
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct RunSpec {
    pub link: Link,
    pub method: Method,
    pub lr: f64,
    pub sizes: Sizes,
    pub train_symbols: usize,
    pub test_symbols: usize,
    pub batch_size: usize,
    pub epochs: usize,
    /// Seeds the training and test data; independent of method and rate
    /// so that methods are compared on identical data.
    pub data_seed: u64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct RunOutcome {
    pub ser: f64,
    pub final_loss: f64,
    pub trace: LossTrace,
    pub wall_secs: f64,
}

/// Trains `method` on fresh training data and measures SER on an
/// independent test set.
pub fn run(spec: &RunSpec) -> Result<RunOutcome> {
    let t0 = Instant::now();
    let mut train_rng = ChaCha8Rng::seed_from_u64(derive_seed(spec.data_seed, &["train"]));
    let mut test_rng = ChaCha8Rng::seed_from_u64(derive_seed(spec.data_seed, &["test"]));
    let (train_idx, train_rx) = spec.link.generate(spec.train_symbols, &mut train_rng)?;
    let (test_idx, test_rx) = spec.link.generate(spec.test_symbols, &mut test_rng)?;
    let c = Constellation::<f64>::pam4();
    let tc = TrainConfig { epochs: spec.epochs, ..TrainConfig::new(spec.batch_size, spec.lr) };
    let s = spec.sizes;

    let (decisions, trace) = match spec.method {
        Method::Ffe | Method::Volterra => {
            let mut eq = if spec.method == Method::Ffe {
                Equalizer::Ffe(FfeEqualizer::center_spike(s.taps1))
            } else {
                Equalizer::Volterra(VolterraEqualizer::center_spike(s.taps1, s.taps2))
            };
            let pilots = c.symbols(&train_idx);
            let trace = train_supervised(&mut eq, &train_rx, &pilots, SPS, &tc)?;
            (hard_decision_euclidean(&equalize(&test_rx, &eq, SPS)?, &c), trace)
        }
        Method::Vae | Method::V2vae => {
            let init = if spec.method == Method::Vae {
                BlindModel::vae(s.taps1, s.taps2, s.channel_taps, c.len())
            } else {
                BlindModel::v2vae(s.taps1, s.taps2, s.channel_taps, c.len())
            };
            let (model, trace) = train_blind(init, &c, &SymbolPrior::flat(c.len()), &train_rx, SPS, &tc)?;
            (blind_decisions(&model, &test_rx)?, trace)
        }
    };
    let ser = dsp::symbol_error_rate(&decisions, &test_idx)?;
    let final_loss = trace.rows.last().map_or(f64::NAN, |r| r.loss);
    Ok(RunOutcome { ser, final_loss, trace, wall_secs: t0.elapsed().as_secs_f64() })
}

/// Most likely PAM-4 symbol per position under the model's posterior.
pub fn blind_decisions(model: &BlindModel<f64>, rx: &[f64]) -> Result<Vec<usize>> {
    let c = Constellation::<f64>::pam4();
    let xhat = equalize(rx, &model.equalizer, SPS)?;
    let q = soft_demap(&xhat, &c, model.channel.sigma2(), &model.demapper)?;
    Ok(hard_decision_map(&q))
}
