use num_complex::Complex;
use rand::Rng;
use rand_distr::StandardNormal;

use crate::scalar::Scalar;

/// J/K.
pub const BOLTZMANN: f64 = 1.380649e-23;
/// C.
pub const ELECTRON_CHARGE: f64 = 1.602176634e-19;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Photodiode {
    pub temperature_k: f64,
    pub bandwidth_hz: f64,
    pub load_ohm: f64,
    /// A/W.
    pub responsivity: f64,
    pub dark_current_a: f64,
}

impl Default for Photodiode {
    fn default() -> Self {
        Self { temperature_k: 293.0, bandwidth_hz: 55e9, load_ohm: 50.0, responsivity: 1.0, dark_current_a: 1e-8 }
    }
}

impl Photodiode {
    /// `4 k T Fs / (B Z)`.
    pub fn thermal_variance(&self, sample_rate: f64) -> f64 {
        4.0 * BOLTZMANN * self.temperature_k * sample_rate / (self.bandwidth_hz * self.load_ohm)
    }

    /// `2 e (R P + I_d) Fs / B` for average received power `P`.
    pub fn shot_variance(&self, mean_power: f64, sample_rate: f64) -> f64 {
        2.0 * ELECTRON_CHARGE * (self.responsivity * mean_power + self.dark_current_a) * sample_rate / self.bandwidth_hz
    }
}

/// Photocurrent `R |E|^2` plus Gaussian thermal and shot noise. The shot
/// variance uses the average received power of the whole input, not the
/// instantaneous power. `noiseless` skips both noise terms.
pub fn square_law_detect<T: Scalar, R: Rng + ?Sized>(
    field: &[Complex<T>],
    pd: &Photodiode,
    sample_rate: f64,
    noiseless: bool,
    rng: &mut R,
) -> Vec<T> {
    let power: Vec<f64> = field.iter().map(|e| e.norm_sqr().f64()).collect();
    let current = power.iter().map(|p| pd.responsivity * p);
    if noiseless {
        return current.map(T::of).collect();
    }
    let mean = if power.is_empty() { 0.0 } else { power.iter().sum::<f64>() / power.len() as f64 };
    let sd = (pd.thermal_variance(sample_rate) + pd.shot_variance(mean, sample_rate)).sqrt();
    current
        .map(|i| {
            let z: f64 = rng.sample(StandardNormal);
            T::of(i + sd * z)
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    #[test]
    fn noiseless_is_intensity() {
        let e = vec![Complex::new(0.6, 0.8), Complex::new(-2.0, 0.0)];
        let mut rng = ChaCha8Rng::seed_from_u64(0);
        let y: Vec<f64> = square_law_detect(&e, &Photodiode::default(), 400e9, true, &mut rng);
        assert!((y[0] - 1.0).abs() < 1e-15);
        assert_eq!(y[1], 4.0);
    }

    #[test]
    fn dark_current_only_shot_term() {
        let pd = Photodiode::default();
        let fs = 400e9;
        assert_eq!(pd.shot_variance(0.0, fs), 2.0 * ELECTRON_CHARGE * 1e-8 * fs / 55e9);
    }

    #[test]
    fn parameterization_values() {
        let pd = Photodiode::default();
        let fs = 400e9;
        let thermal = 4.0 * 1.380649e-23 * 293.0 * fs / (55e9 * 50.0);
        assert!((pd.thermal_variance(fs) / thermal - 1.0).abs() < 1e-15);
        let shot = 2.0 * 1.602176634e-19 * (0.5 + 1e-8) * fs / 55e9;
        assert!((pd.shot_variance(0.5, fs) / shot - 1.0).abs() < 1e-15);
    }

    #[test]
    fn noise_variance_matches_parameterization() {
        let pd = Photodiode { temperature_k: 1e12, ..Photodiode::default() };
        let fs = 400e9;
        let e = vec![Complex::new(0.0f64, 0.0); 200_000];
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        let y: Vec<f64> = square_law_detect(&e, &pd, fs, false, &mut rng);
        let var = y.iter().map(|v| v * v).sum::<f64>() / y.len() as f64;
        let want = pd.thermal_variance(fs) + pd.shot_variance(0.0, fs);
        assert!((var / want - 1.0).abs() < 0.01, "{var} vs {want}");
    }
}
