//! Signal-chain primitives.
//!
//! Functions work on plain slices; [`SampledSignal`] carries the sample
//! rate and oversampling factor through a chain when that bookkeeping is
//! wanted.

mod bessel;
mod detect;
mod fiber;
mod noise;
mod rrc;
mod sync;

pub use bessel::{bessel_lowpass, reverse_bessel_poly, BesselFilter, Biquad};
pub use detect::{square_law_detect, Photodiode, BOLTZMANN, ELECTRON_CHARGE};
pub use fiber::{attenuate, chromatic_dispersion, SPEED_OF_LIGHT};
pub use noise::{awgn, awgn_variance, mean_power};
pub use rrc::rrc_taps;
pub use sync::{align, synchronize, synchronize_at, SyncResult};

use std::io::{self, Write};

use num_complex::Complex;
use rustfft::FftPlanner;

use crate::error::{Error, Result};
use crate::scalar::Scalar;

/// Samples plus the rate bookkeeping that travels with them.
#[derive(Debug, Clone, PartialEq)]
pub struct SampledSignal<S> {
    pub samples: Vec<S>,
    /// Samples per second.
    pub rate: f64,
    /// Samples per symbol.
    pub sps: usize,
}

impl<S: Copy> SampledSignal<S> {
    pub fn new(samples: Vec<S>, rate: f64, sps: usize) -> Result<Self> {
        if !(rate > 0.0 && rate.is_finite()) {
            return Err(Error::InvalidParameter(format!("sample rate {rate} must be positive")));
        }
        if sps == 0 {
            return Err(Error::InvalidParameter("samples per symbol must be at least 1".into()));
        }
        Ok(Self { samples, rate, sps })
    }

    pub fn len(&self) -> usize {
        self.samples.len()
    }

    pub fn is_empty(&self) -> bool {
        self.samples.is_empty()
    }

    pub fn symbol_rate(&self) -> f64 {
        self.rate / self.sps as f64
    }

    /// Keeps every `factor`-th sample starting at `phase`; rate and sps
    /// drop by `factor`, which must divide `sps`.
    pub fn decimate(&self, factor: usize, phase: usize) -> Result<Self> {
        if factor == 0 || !self.sps.is_multiple_of(factor) {
            return Err(Error::InvalidParameter(format!(
                "decimation by {factor} does not divide {} samples per symbol",
                self.sps
            )));
        }
        Ok(Self {
            samples: decimate(&self.samples, factor, phase)?,
            rate: self.rate / factor as f64,
            sps: self.sps / factor,
        })
    }
}

impl<T: Scalar> SampledSignal<T> {
    /// Zero-inserted symbols at `sps` samples per symbol.
    pub fn from_symbols(symbols: &[T], symbol_rate: f64, sps: usize) -> Result<Self> {
        Self::new(upsample_zero_insert(symbols, sps)?, symbol_rate * sps as f64, sps)
    }

    pub fn convolve(&self, taps: &[T], mode: ConvMode) -> Self {
        Self { samples: convolve(&self.samples, taps, mode), rate: self.rate, sps: self.sps }
    }

    /// `index,time,value` rows with a header.
    pub fn write_csv<W: Write>(&self, mut w: W) -> io::Result<()> {
        writeln!(w, "index,time,value")?;
        for (i, v) in self.samples.iter().enumerate() {
            writeln!(w, "{i},{:e},{:e}", i as f64 / self.rate, v.f64())?;
        }
        Ok(())
    }
}

impl<T: Scalar> SampledSignal<Complex<T>> {
    /// `index,time,re,im` rows with a header.
    pub fn write_field_csv<W: Write>(&self, mut w: W) -> io::Result<()> {
        writeln!(w, "index,time,re,im")?;
        for (i, v) in self.samples.iter().enumerate() {
            writeln!(w, "{i},{:e},{:e},{:e}", i as f64 / self.rate, v.re.f64(), v.im.f64())?;
        }
        Ok(())
    }
}

/// `[a, b]` with `sps = 3` becomes `[a, 0, 0, b, 0, 0]`.
pub fn upsample_zero_insert<T: Scalar>(symbols: &[T], sps: usize) -> Result<Vec<T>> {
    if sps == 0 {
        return Err(Error::InvalidParameter("samples per symbol must be at least 1".into()));
    }
    let mut out = vec![T::zero(); symbols.len() * sps];
    for (i, &s) in symbols.iter().enumerate() {
        out[i * sps] = s;
    }
    Ok(out)
}

/// `x[phase], x[phase + factor], ...`
pub fn decimate<S: Copy>(x: &[S], factor: usize, phase: usize) -> Result<Vec<S>> {
    if factor == 0 || phase >= factor {
        return Err(Error::InvalidParameter(format!("decimation by {factor} at phase {phase}")));
    }
    Ok(x.iter().skip(phase).step_by(factor).copied().collect())
}

/// Output alignment of [`convolve`].
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ConvMode {
    /// All `n + m - 1` samples.
    Full,
    /// `n` samples, shifted back by `(m - 1) / 2`; zero delay for an odd
    /// symmetric filter.
    Same,
    /// The first `n` samples; tap 0 acts on the current input.
    Causal,
}

const FFT_MIN_TAPS: usize = 48;
const FFT_MIN_WORK: usize = 1 << 21;

pub fn convolve<T: Scalar>(x: &[T], taps: &[T], mode: ConvMode) -> Vec<T> {
    let (n, m) = (x.len(), taps.len());
    if n == 0 || m == 0 {
        return match mode {
            ConvMode::Full => Vec::new(),
            _ => vec![T::zero(); n],
        };
    }
    let full = if m >= FFT_MIN_TAPS && n.saturating_mul(m) >= FFT_MIN_WORK {
        convolve_fft(x, taps)
    } else {
        convolve_direct(x, taps)
    };
    match mode {
        ConvMode::Full => full,
        ConvMode::Same => {
            let off = (m - 1) / 2;
            full[off..off + n].to_vec()
        }
        ConvMode::Causal => full[..n].to_vec(),
    }
}

fn convolve_direct<T: Scalar>(x: &[T], taps: &[T]) -> Vec<T> {
    let mut out = vec![T::zero(); x.len() + taps.len() - 1];
    for (i, &xi) in x.iter().enumerate() {
        if xi == T::zero() {
            continue;
        }
        for (o, &t) in out[i..].iter_mut().zip(taps) {
            *o += xi * t;
        }
    }
    out
}

fn convolve_fft<T: Scalar>(x: &[T], taps: &[T]) -> Vec<T> {
    let len = x.len() + taps.len() - 1;
    let size = len.next_power_of_two();
    let mut planner = FftPlanner::<T>::new();
    let fwd = planner.plan_fft_forward(size);
    let inv = planner.plan_fft_inverse(size);
    let pad = |v: &[T]| {
        let mut b = vec![Complex::new(T::zero(), T::zero()); size];
        for (d, &s) in b.iter_mut().zip(v) {
            d.re = s;
        }
        b
    };
    let mut a = pad(x);
    let mut b = pad(taps);
    fwd.process(&mut a);
    fwd.process(&mut b);
    for (p, q) in a.iter_mut().zip(&b) {
        *p *= *q;
    }
    inv.process(&mut a);
    let scale = T::one() / T::of(size as f64);
    a[..len].iter().map(|c| c.re * scale).collect()
}

/// Fraction of positions where `decisions` and `truth` differ.
pub fn symbol_error_rate(decisions: &[usize], truth: &[usize]) -> Result<f64> {
    if decisions.len() != truth.len() || truth.is_empty() {
        return Err(Error::Dimension(format!("{} decisions against {} symbols", decisions.len(), truth.len())));
    }
    let errors = decisions.iter().zip(truth).filter(|(a, b)| a != b).count();
    Ok(errors as f64 / truth.len() as f64)
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    #[test]
    fn zero_insertion() {
        assert_eq!(upsample_zero_insert(&[1.0, 2.0], 2).unwrap(), vec![1.0, 0.0, 2.0, 0.0]);
        assert!(upsample_zero_insert(&[1.0f64], 0).is_err());
    }

    #[test]
    fn unit_impulse_is_identity() {
        let x = [1.0, -2.0, 0.5, 3.0];
        assert_eq!(convolve(&x, &[1.0], ConvMode::Same), x.to_vec());
        assert_eq!(convolve(&x, &[0.0, 1.0, 0.0], ConvMode::Same), x.to_vec());
        assert_eq!(convolve(&x, &[1.0, 0.0, 0.0], ConvMode::Causal), x.to_vec());
    }

    #[test]
    fn full_mode_by_hand() {
        assert_eq!(convolve(&[1.0, 2.0], &[1.0, 1.0, 1.0], ConvMode::Full), vec![1.0, 3.0, 3.0, 2.0]);
    }

    #[test]
    fn fft_path_matches_direct() {
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let x: Vec<f64> = (0..50_000).map(|_| rng.gen_range(-1.0..1.0)).collect();
        let h: Vec<f64> = (0..129).map(|_| rng.gen_range(-1.0..1.0)).collect();
        let a = convolve(&x, &h, ConvMode::Full);
        let b = convolve_direct(&x, &h);
        let err = a.iter().zip(&b).fold(0.0f64, |m, (p, q)| m.max((p - q).abs()));
        assert!(err < 1e-11, "{err}");
    }

    #[test]
    fn ser_counts() {
        assert_eq!(symbol_error_rate(&[0, 1, 2], &[0, 1, 2]).unwrap(), 0.0);
        assert_eq!(symbol_error_rate(&[1, 2, 3], &[0, 1, 2]).unwrap(), 1.0);
        assert!(symbol_error_rate(&[0], &[]).is_err());
    }

    #[test]
    fn random_guesses_on_pam4() {
        let mut rng = ChaCha8Rng::seed_from_u64(2);
        let truth: Vec<usize> = (0..100_000).map(|_| rng.gen_range(0..4)).collect();
        let guess: Vec<usize> = (0..100_000).map(|_| rng.gen_range(0..4)).collect();
        let ser = symbol_error_rate(&guess, &truth).unwrap();
        assert!((ser - 0.75).abs() < 0.01, "{ser}");
    }

    #[test]
    fn signal_bookkeeping() {
        let s = SampledSignal::from_symbols(&[1.0, -1.0, 3.0], 100e9, 4).unwrap();
        assert_eq!((s.len(), s.rate, s.sps), (12, 400e9, 4));
        let d = s.decimate(2, 0).unwrap();
        assert_eq!((d.len(), d.rate, d.sps), (6, 200e9, 2));
        assert!(s.decimate(3, 0).is_err());
        let mut out = Vec::new();
        d.write_csv(&mut out).unwrap();
        assert!(String::from_utf8(out).unwrap().starts_with("index,time,value\n0,0e0,1e0\n"));
    }

    proptest! {
        #[test]
        fn decimate_inverts_upsample(x in proptest::collection::vec(-10.0f64..10.0, 0..50), k in 1usize..6) {
            let up = upsample_zero_insert(&x, k).unwrap();
            prop_assert_eq!(up.len(), x.len() * k);
            prop_assert_eq!(decimate(&up, k, 0).unwrap(), x);
        }

        #[test]
        fn lengths_by_mode(n in 1usize..80, m in 1usize..20) {
            let x = vec![1.0f64; n];
            let h = vec![0.5f64; m];
            prop_assert_eq!(convolve(&x, &h, ConvMode::Full).len(), n + m - 1);
            prop_assert_eq!(convolve(&x, &h, ConvMode::Same).len(), n);
            prop_assert_eq!(convolve(&x, &h, ConvMode::Causal).len(), n);
            prop_assert_eq!(decimate(&x, 3, 1).unwrap().len(), (n + 1) / 3);
        }
    }
}
