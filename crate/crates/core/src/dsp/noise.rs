use rand::Rng;
use rand_distr::StandardNormal;

use crate::scalar::Scalar;

/// Mean of `x^2`.
pub fn mean_power<T: Scalar>(x: &[T]) -> f64 {
    if x.is_empty() {
        return 0.0;
    }
    x.iter().map(|v| v.f64() * v.f64()).sum::<f64>() / x.len() as f64
}

/// Per-sample noise variance giving `snr_db` for a signal of the measured
/// power. The SNR is energy per symbol over the noise variance, and one
/// symbol spans `sps` samples, so `sigma^2 = sps * power / 10^(snr_db/10)`.
/// `sps = 1` makes it a plain per-sample power ratio.
pub fn awgn_variance<T: Scalar>(x: &[T], snr_db: f64, sps: usize) -> f64 {
    if snr_db == f64::INFINITY {
        return 0.0;
    }
    sps as f64 * mean_power(x) / 10f64.powf(snr_db / 10.0)
}

/// Adds white Gaussian noise at `snr_db` (see [`awgn_variance`]).
/// `snr_db = f64::INFINITY` returns the input unchanged.
pub fn awgn<T: Scalar, R: Rng + ?Sized>(x: &[T], snr_db: f64, sps: usize, rng: &mut R) -> Vec<T> {
    let var = awgn_variance(x, snr_db, sps);
    if var == 0.0 {
        return x.to_vec();
    }
    let sd = var.sqrt();
    x.iter()
        .map(|&v| {
            let z: f64 = rng.sample(StandardNormal);
            v + T::of(sd * z)
        })
        .collect()
}
