use rand::Rng;

use super::{check_symbols, cyclic_extend, finish, ChannelOutput, SPS_CHANNEL};
use crate::dsp::{awgn, convolve, rrc_taps, upsample_zero_insert, ConvMode};
use crate::error::{Error, Result};
use crate::scalar::Scalar;

/// Wiener-Hammerstein link: `h2 * g(h1 * x)` followed by AWGN.
#[derive(Debug, Clone, PartialEq)]
pub struct WhConfig {
    pub h1: Vec<f64>,
    pub h2: Vec<f64>,
    /// Weight of the square term in `g`.
    pub alpha: f64,
    /// Energy per symbol over noise variance; `f64::INFINITY` for no noise.
    pub snr_db: f64,
    pub rolloff: f64,
    /// RRC reach in symbols on each side.
    pub rrc_span: usize,
    /// Cyclic guard in symbols on each side of the block.
    pub guard: usize,
}

impl Default for WhConfig {
    fn default() -> Self {
        Self {
            h1: vec![1.0, 0.3, 0.1],
            h2: vec![1.0, -0.2, 0.02],
            alpha: 0.0,
            snr_db: f64::INFINITY,
            rolloff: 0.1,
            rrc_span: 32,
            guard: 64,
        }
    }
}

impl WhConfig {
    pub fn validate(&self) -> Result<()> {
        if !(0.0..=1.0).contains(&self.alpha) {
            return Err(Error::InvalidParameter(format!("alpha {} outside [0, 1]", self.alpha)));
        }
        if self.snr_db.is_nan() || self.snr_db == f64::NEG_INFINITY {
            return Err(Error::InvalidParameter(format!("SNR {} dB", self.snr_db)));
        }
        if self.h1.is_empty() || self.h2.is_empty() {
            return Err(Error::InvalidParameter("channel filters need at least one tap".into()));
        }
        if self.h1.iter().chain(&self.h2).any(|v| !v.is_finite()) {
            return Err(Error::NonFinite("channel filter"));
        }
        if self.guard < self.rrc_span + self.h1.len() + self.h2.len() {
            return Err(Error::InvalidParameter(format!(
                "guard of {} symbols is shorter than the filter memory",
                self.guard
            )));
        }
        Ok(())
    }
}

/// `g(x) = (1 - alpha) x + alpha x^2`.
#[inline]
pub fn wh_nonlinearity<T: Scalar>(x: T, alpha: T) -> T {
    (T::one() - alpha) * x + alpha * x * x
}

/// Runs `symbols` (constellation amplitudes) through the link.
pub fn simulate_wh<T: Scalar, R: Rng + ?Sized>(symbols: &[T], cfg: &WhConfig, rng: &mut R) -> Result<ChannelOutput<T>> {
    cfg.validate()?;
    check_symbols(symbols)?;
    let ext = cyclic_extend(symbols, cfg.guard);
    let rrc: Vec<T> = rrc_taps(cfg.rolloff, cfg.rrc_span, SPS_CHANNEL)?;
    let out = channel_output(&ext, &rrc, cfg)?;
    let noisy = awgn(&out, cfg.snr_db, SPS_CHANNEL, rng);
    let rx4 = convolve(&noisy, &rrc, ConvMode::Same);
    let max_lag = (cfg.h1.len() + cfg.h2.len()) * 2 + 16;
    finish(&rx4, &ext, cfg.guard, symbols.len(), max_lag)
}

/// Noiseless signal at the output of `h2`, at the channel rate.
fn channel_output<T: Scalar>(ext: &[T], rrc: &[T], cfg: &WhConfig) -> Result<Vec<T>> {
    let sps = SPS_CHANNEL;
    let to_t = |v: &[f64]| v.iter().map(|&x| T::of(x)).collect::<Vec<T>>();
    let h1 = upsample_zero_insert(&to_t(&cfg.h1), sps)?;
    let h2 = upsample_zero_insert(&to_t(&cfg.h2), sps)?;
    let tx = convolve(&upsample_zero_insert(ext, sps)?, rrc, ConvMode::Same);
    let alpha = T::of(cfg.alpha);
    let inner: Vec<T> = convolve(&tx, &h1, ConvMode::Causal).into_iter().map(|v| wh_nonlinearity(v, alpha)).collect();
    Ok(convolve(&inner, &h2, ConvMode::Causal))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::channels::SPS_OUT;
    use crate::dsp::decimate;
    use crate::equalizers::{equalize, hard_decision_euclidean, Equalizer, FfeEqualizer};
    use crate::optim::{train_supervised, TrainConfig};
    use crate::qstats::Constellation;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn symbols(n: usize, seed: u64) -> (Vec<usize>, Vec<f64>) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let idx: Vec<usize> = (0..n).map(|_| rng.gen_range(0..4)).collect();
        let c = Constellation::<f64>::pam4();
        let x = c.symbols(&idx);
        (idx, x)
    }

    #[test]
    fn nonlinearity_values() {
        assert_eq!(wh_nonlinearity(1.7, 0.0), 1.7);
        assert_eq!(wh_nonlinearity(2.0, 1.0), 4.0);
        assert!((wh_nonlinearity(-3.0f64, 0.1) + 1.8).abs() < 1e-15);
    }

    #[test]
    fn linear_case_is_the_cascade() {
        let (_, x) = symbols(300, 1);
        let cfg = WhConfig::default();
        let mut rng = ChaCha8Rng::seed_from_u64(0);
        let got = simulate_wh(&x, &cfg, &mut rng).unwrap();

        let ext = cyclic_extend(&x, cfg.guard);
        let rrc: Vec<f64> = rrc_taps(0.1, 32, 4).unwrap();
        let tx = convolve(&upsample_zero_insert(&ext, 4).unwrap(), &rrc, ConvMode::Same);
        let a = convolve(&tx, &upsample_zero_insert(&cfg.h1, 4).unwrap(), ConvMode::Causal);
        let b = convolve(&a, &upsample_zero_insert(&cfg.h2, 4).unwrap(), ConvMode::Causal);
        let rx = decimate(&convolve(&b, &rrc, ConvMode::Same), 2, 0).unwrap();
        let start = (SPS_OUT * cfg.guard) as isize + got.sync.lag;
        assert_eq!(got.rx, rx[start as usize..start as usize + 600].to_vec());
    }

    #[test]
    fn noiseless_identity_channel_is_aligned() {
        let (_, x) = symbols(500, 2);
        let cfg = WhConfig { h1: vec![1.0], h2: vec![1.0], ..WhConfig::default() };
        let mut rng = ChaCha8Rng::seed_from_u64(0);
        let out = simulate_wh(&x, &cfg, &mut rng).unwrap();
        assert_eq!(out.sync.lag, 0);
        for (n, &s) in x.iter().enumerate() {
            assert!((out.rx[2 * n] - s).abs() < 0.05, "{n}");
        }
    }

    #[test]
    fn marker_preamble_lands_on_sample_zero() {
        let (_, mut x) = symbols(400, 3);
        x[..8].copy_from_slice(&[3.0, 3.0, -3.0, -3.0, 3.0, -3.0, 3.0, 3.0]);
        let mut rng = ChaCha8Rng::seed_from_u64(0);
        let out = simulate_wh(&x, &WhConfig { alpha: 0.1, ..WhConfig::default() }, &mut rng).unwrap();
        let signs: Vec<f64> = (0..8).map(|n| out.rx[2 * n].signum()).collect();
        assert_eq!(signs, vec![1.0, 1.0, -1.0, -1.0, 1.0, -1.0, 1.0, 1.0]);
    }

    #[test]
    fn linear_noiseless_link_is_equalizable() {
        let (idx, x) = symbols(20_000, 4);
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let out = simulate_wh(&x, &WhConfig::default(), &mut rng).unwrap();
        let mut eq = Equalizer::Ffe(FfeEqualizer::center_spike(25));
        let cfg = TrainConfig { epochs: 3, ..TrainConfig::new(200, 5e-3) };
        train_supervised(&mut eq, &out.rx, &x, 2, &cfg).unwrap();
        let dec = hard_decision_euclidean(&equalize(&out.rx, &eq, 2).unwrap(), &Constellation::pam4());
        assert_eq!(dec, idx);
    }

    #[test]
    fn superposition_without_nonlinearity() {
        let (_, x) = symbols(200, 5);
        let cfg = WhConfig::default();
        let mut rng = ChaCha8Rng::seed_from_u64(0);
        let a = simulate_wh(&x, &cfg, &mut rng).unwrap().rx;
        let scaled: Vec<f64> = x.iter().map(|v| 2.5 * v).collect();
        let b = simulate_wh(&scaled, &cfg, &mut rng).unwrap().rx;
        for (p, q) in a.iter().zip(&b) {
            assert!((2.5 * p - q).abs() <= 1e-6 * q.abs().max(1.0));
        }
    }

    #[test]
    fn output_snr_matches_target() {
        let (_, x) = symbols(250_000, 6);
        let cfg = WhConfig { alpha: 0.2, snr_db: 16.0, ..WhConfig::default() };
        let clean =
            simulate_wh(&x, &WhConfig { snr_db: f64::INFINITY, ..cfg.clone() }, &mut ChaCha8Rng::seed_from_u64(0))
                .unwrap()
                .rx;
        let noisy = simulate_wh(&x, &cfg, &mut ChaCha8Rng::seed_from_u64(1)).unwrap().rx;
        // a unit-energy matched filter keeps the per-sample noise variance
        let p_noise = noisy.iter().zip(&clean).map(|(a, b)| (a - b).powi(2)).sum::<f64>() / clean.len() as f64;
        let ext = cyclic_extend(&x, cfg.guard);
        let rrc: Vec<f64> = rrc_taps(0.1, 32, 4).unwrap();
        let out = channel_output(&ext, &rrc, &cfg).unwrap();
        let e_s = 4.0 * crate::dsp::mean_power(&out);
        let measured = 10.0 * (e_s / p_noise).log10();
        assert!((measured - 16.0).abs() < 0.1, "{measured}");
    }

    #[test]
    fn deterministic_given_seed() {
        let (_, x) = symbols(300, 7);
        let cfg = WhConfig { alpha: 0.2, snr_db: 10.0, ..WhConfig::default() };
        let a = simulate_wh(&x, &cfg, &mut ChaCha8Rng::seed_from_u64(9)).unwrap();
        let b = simulate_wh(&x, &cfg, &mut ChaCha8Rng::seed_from_u64(9)).unwrap();
        assert_eq!(a, b);
    }

    #[test]
    fn rejects_bad_alpha() {
        let cfg = WhConfig { alpha: 1.5, ..WhConfig::default() };
        assert!(simulate_wh(&[1.0], &cfg, &mut ChaCha8Rng::seed_from_u64(0)).is_err());
    }
}
