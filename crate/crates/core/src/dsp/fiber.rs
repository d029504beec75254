use num_complex::Complex;
use rustfft::FftPlanner;

use crate::scalar::Scalar;

/// Metres per second.
pub const SPEED_OF_LIGHT: f64 = 299_792_458.0;

/// Chromatic dispersion as the all-pass `exp(j pi D lambda^2 f^2 L / c)`,
/// applied with one FFT over the whole (cyclic) field.
///
/// Units: `d_ps_nm_km` in ps/(nm km), `lambda_nm` in nm, `sample_rate` in Hz.
/// Applying `length_km` and then `-length_km` restores the input.
pub fn chromatic_dispersion<T: Scalar>(
    field: &[Complex<T>],
    length_km: f64,
    d_ps_nm_km: f64,
    lambda_nm: f64,
    sample_rate: f64,
) -> Vec<Complex<T>> {
    let n = field.len();
    if n == 0 || length_km == 0.0 || d_ps_nm_km == 0.0 {
        return field.to_vec();
    }
    let d = d_ps_nm_km * 1e-6; // s / m^2
    let lambda = lambda_nm * 1e-9;
    let l = length_km * 1e3;
    let k = std::f64::consts::PI * d * lambda * lambda * l / SPEED_OF_LIGHT;

    let mut planner = FftPlanner::<T>::new();
    let mut buf = field.to_vec();
    planner.plan_fft_forward(n).process(&mut buf);
    for (i, v) in buf.iter_mut().enumerate() {
        let bin = if i <= n / 2 { i as f64 } else { i as f64 - n as f64 };
        let f = bin * sample_rate / n as f64;
        let phi = k * f * f;
        *v *= Complex::new(T::of(phi.cos()), T::of(phi.sin()));
    }
    planner.plan_fft_inverse(n).process(&mut buf);
    let scale = T::one() / T::of(n as f64);
    buf.iter().map(|v| v * scale).collect()
}

/// Scales the field amplitude by `10^(-alpha L / 20)`.
pub fn attenuate<T: Scalar>(field: &[Complex<T>], alpha_db_per_km: f64, length_km: f64) -> Vec<Complex<T>> {
    let g = T::of(10f64.powf(-alpha_db_per_km * length_km / 20.0));
    field.iter().map(|v| v * g).collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn random_field(n: usize, seed: u64) -> Vec<Complex<f64>> {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        (0..n).map(|_| Complex::new(rng.gen_range(-1.0..1.0), rng.gen_range(-1.0..1.0))).collect()
    }

    fn energy(x: &[Complex<f64>]) -> f64 {
        x.iter().map(|v| v.norm_sqr()).sum()
    }

    #[test]
    fn zero_length_is_identity() {
        let x = random_field(64, 1);
        assert_eq!(chromatic_dispersion(&x, 0.0, -15.43, 1270.0, 400e9), x);
    }

    #[test]
    fn all_pass() {
        let x = random_field(4096, 2);
        let y = chromatic_dispersion(&x, 2.0, -15.43, 1270.0, 400e9);
        assert!((energy(&y) / energy(&x) - 1.0).abs() < 1e-9);
    }

    #[test]
    fn round_trip() {
        let x = random_field(3000, 3);
        let y = chromatic_dispersion(&x, 5.0, -15.43, 1270.0, 400e9);
        let z = chromatic_dispersion(&y, -5.0, -15.43, 1270.0, 400e9);
        let err = x.iter().zip(&z).fold(0.0f64, |m, (a, b)| m.max((a - b).norm()));
        assert!(err < 1e-9, "{err}");
    }

    #[test]
    fn sign_of_d_does_not_change_broadening() {
        let mut x = vec![Complex::new(0.0, 0.0); 1024];
        x[512] = Complex::new(1.0, 0.0);
        let width = |y: &[Complex<f64>]| {
            let e = energy(y);
            let mean: f64 = y.iter().enumerate().map(|(i, v)| i as f64 * v.norm_sqr()).sum::<f64>() / e;
            y.iter().enumerate().map(|(i, v)| (i as f64 - mean).powi(2) * v.norm_sqr()).sum::<f64>() / e
        };
        let a = chromatic_dispersion(&x, 2.0, -15.43, 1270.0, 400e9);
        let b = chromatic_dispersion(&x, 2.0, 15.43, 1270.0, 400e9);
        assert!(width(&a) > 1.0);
        assert!((width(&a) - width(&b)).abs() < 1e-9 * width(&a));
    }

    #[test]
    fn attenuation_of_two_km() {
        let x = random_field(100, 4);
        let y = attenuate(&x, 0.2, 2.0);
        assert!((energy(&y) / energy(&x) - 10f64.powf(-0.04)).abs() < 1e-12);
    }
}
