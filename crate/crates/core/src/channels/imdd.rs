use num_complex::Complex;
use rand::Rng;

use super::{check_symbols, cyclic_extend, finish, ChannelOutput, SPS_CHANNEL, SPS_OUT};
use crate::dsp::{
    align, attenuate, bessel_lowpass, chromatic_dispersion, convolve, rrc_taps, square_law_detect,
    upsample_zero_insert, ConvMode, Photodiode,
};
use crate::error::{Error, Result};
use crate::scalar::Scalar;

/// Dispersion parameter quoted for the 1270 nm link, ps/(nm km).
pub const STATED_DISPERSION_PS_NM_KM: f64 = -15.43;

/// `(S0 / 4) (lambda - lambda0^4 / lambda^3)` in ps/(nm km).
pub fn dispersion_formula(s0_ps_nm2_km: f64, lambda_nm: f64, lambda0_nm: f64) -> f64 {
    s0_ps_nm2_km / 4.0 * (lambda_nm - lambda0_nm.powi(4) / lambda_nm.powi(3))
}

/// Where the fiber's dispersion parameter comes from.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Dispersion {
    /// The quoted value, [`STATED_DISPERSION_PS_NM_KM`].
    Stated,
    /// [`dispersion_formula`] at the configured wavelengths and slope.
    Formula,
    /// An explicit value in ps/(nm km).
    Value(f64),
}

#[derive(Debug, Clone, PartialEq)]
pub struct ImddConfig {
    /// Symbols per second.
    pub baud: f64,
    pub rolloff: f64,
    /// RRC reach in symbols on each side.
    pub rrc_span: usize,
    /// DAC peak-to-peak voltage.
    pub vpp: f64,
    pub v_pi: f64,
    pub v_b: f64,
    /// Laser power in watts.
    pub p_in: f64,
    /// Use `pi (V + V_b) / (2 V_pi)` inside the cosine instead of the
    /// printed `(V + V_b) / (2 V_pi)`.
    pub mzm_pi: bool,
    pub fiber_km: f64,
    pub lambda_nm: f64,
    pub lambda0_nm: f64,
    /// Dispersion slope, ps/(nm^2 km).
    pub s0: f64,
    pub dispersion: Dispersion,
    pub alpha_db_km: f64,
    pub bessel_order: usize,
    pub bessel_cutoff_hz: f64,
    pub photodiode: Photodiode,
    /// Skip thermal and shot noise.
    pub noiseless: bool,
    /// Cyclic guard in symbols on each side of the block.
    pub guard: usize,
}

impl Default for ImddConfig {
    fn default() -> Self {
        Self {
            baud: 100e9,
            rolloff: 0.1,
            rrc_span: 32,
            vpp: 1.2,
            v_pi: 2.0,
            v_b: -0.5,
            p_in: 1.0,
            mzm_pi: false,
            fiber_km: 0.0,
            lambda_nm: 1270.0,
            lambda0_nm: 1310.0,
            s0: 0.092,
            dispersion: Dispersion::Stated,
            alpha_db_km: 0.2,
            bessel_order: 5,
            bessel_cutoff_hz: 55e9,
            photodiode: Photodiode::default(),
            noiseless: false,
            guard: 64,
        }
    }
}

impl ImddConfig {
    /// D in ps/(nm km) as used by the fiber.
    pub fn dispersion_parameter(&self) -> f64 {
        match self.dispersion {
            Dispersion::Stated => STATED_DISPERSION_PS_NM_KM,
            Dispersion::Formula => self.dispersion_formula(),
            Dispersion::Value(d) => d,
        }
    }

    /// The printed formula at this configuration, whatever the fiber uses.
    pub fn dispersion_formula(&self) -> f64 {
        dispersion_formula(self.s0, self.lambda_nm, self.lambda0_nm)
    }

    pub fn sample_rate(&self) -> f64 {
        self.baud * SPS_CHANNEL as f64
    }

    pub fn validate(&self) -> Result<()> {
        let positive = [
            ("baud", self.baud),
            ("v_pi", self.v_pi),
            ("p_in", self.p_in),
            ("lambda_nm", self.lambda_nm),
            ("lambda0_nm", self.lambda0_nm),
            ("bessel_cutoff_hz", self.bessel_cutoff_hz),
            ("temperature", self.photodiode.temperature_k),
            ("bandwidth", self.photodiode.bandwidth_hz),
            ("load", self.photodiode.load_ohm),
            ("responsivity", self.photodiode.responsivity),
        ];
        for (name, v) in positive {
            if !(v > 0.0 && v.is_finite()) {
                return Err(Error::InvalidParameter(format!("{name} = {v} must be positive")));
            }
        }
        if !(self.vpp >= 0.0 && self.vpp.is_finite()) || !self.v_b.is_finite() {
            return Err(Error::InvalidParameter("drive voltages must be finite, vpp nonnegative".into()));
        }
        if !(self.fiber_km >= 0.0 && self.fiber_km.is_finite()) || !(self.alpha_db_km >= 0.0) {
            return Err(Error::InvalidParameter("fiber length and loss must be nonnegative".into()));
        }
        if !self.dispersion_parameter().is_finite() || self.photodiode.dark_current_a < 0.0 {
            return Err(Error::InvalidParameter("dispersion and dark current must be finite".into()));
        }
        if self.guard < self.rrc_span + 8 {
            return Err(Error::InvalidParameter(format!(
                "guard of {} symbols is shorter than the filter memory",
                self.guard
            )));
        }
        Ok(())
    }
}

/// Mach-Zehnder field `sqrt(P_in) cos((V + V_b) / (2 V_pi))`, with an
/// extra factor `pi` in the argument when `with_pi` is set.
pub fn mzm<T: Scalar>(v: &[T], p_in: f64, v_pi: f64, v_b: f64, with_pi: bool) -> Vec<T> {
    let amp = p_in.sqrt();
    let k = if with_pi { std::f64::consts::PI } else { 1.0 } / (2.0 * v_pi);
    v.iter().map(|&x| T::of(amp * (k * (x.f64() + v_b)).cos())).collect()
}

/// DAC output: shaped signal scaled into `[-1/2, 1/2]`, times `vpp`, then
/// the Bessel low-pass.
fn dac<T: Scalar>(shaped: &[T], cfg: &ImddConfig) -> Result<Vec<T>> {
    let peak = shaped.iter().fold(0.0f64, |m, v| m.max(v.f64().abs()));
    if peak == 0.0 {
        return Err(Error::InvalidParameter("cannot normalize an all-zero transmit signal".into()));
    }
    let g = T::of(cfg.vpp / (2.0 * peak));
    let v: Vec<T> = shaped.iter().map(|&x| x * g).collect();
    Ok(bessel_lowpass(cfg.bessel_order, cfg.bessel_cutoff_hz, cfg.sample_rate())?.apply(&v))
}

/// Photocurrent at the channel rate for an extended symbol block.
fn detected<T: Scalar, R: Rng + ?Sized>(ext: &[T], rrc: &[T], cfg: &ImddConfig, rng: &mut R) -> Result<Vec<T>> {
    let fs = cfg.sample_rate();
    let shaped = convolve(&upsample_zero_insert(ext, SPS_CHANNEL)?, rrc, ConvMode::Same);
    let volts = dac(&shaped, cfg)?;
    let field: Vec<Complex<T>> =
        mzm(&volts, cfg.p_in, cfg.v_pi, cfg.v_b, cfg.mzm_pi).into_iter().map(|e| Complex::new(e, T::zero())).collect();
    let field = chromatic_dispersion(&field, cfg.fiber_km, cfg.dispersion_parameter(), cfg.lambda_nm, fs);
    let field = attenuate(&field, cfg.alpha_db_km, cfg.fiber_km);
    Ok(square_law_detect(&field, &cfg.photodiode, fs, cfg.noiseless, rng))
}

/// Matched-filter output at the channel rate for the extended block, zero
/// mean and scaled to the RMS of the constellation. Mean and scale come
/// from the samples of the original block only; the guard edges carry the
/// filters' start-up transients on the large photocurrent DC.
fn receive<T: Scalar, R: Rng + ?Sized>(ext: &[T], symbol_rms: f64, cfg: &ImddConfig, rng: &mut R) -> Result<Vec<T>> {
    let rrc: Vec<T> = rrc_taps(cfg.rolloff, cfg.rrc_span, SPS_CHANNEL)?;
    let current = detected(ext, &rrc, cfg, rng)?;
    let adc = bessel_lowpass(cfg.bessel_order, cfg.bessel_cutoff_hz, cfg.sample_rate())?.apply(&current);
    let rx = convolve(&adc, &rrc, ConvMode::Same);
    let body = &rx[SPS_CHANNEL * cfg.guard..rx.len() - SPS_CHANNEL * cfg.guard];
    let n = body.len() as f64;
    let mean = body.iter().map(|v| v.f64()).sum::<f64>() / n;
    let var = body.iter().map(|v| (v.f64() - mean).powi(2)).sum::<f64>() / n;
    if !(var > 0.0) {
        return Err(Error::InvalidParameter("received signal has no modulation".into()));
    }
    let g = symbol_rms / var.sqrt();
    Ok(rx.into_iter().map(|v| T::of((v.f64() - mean) * g)).collect())
}

fn symbol_rms<T: Scalar>(symbols: &[T]) -> f64 {
    (symbols.iter().map(|v| v.f64() * v.f64()).sum::<f64>() / symbols.len() as f64).sqrt()
}

fn max_lag(cfg: &ImddConfig) -> usize {
    // Bessel group delay is a few samples; dispersion spreads by
    // |D| L dlambda, well under a symbol per km at these rates
    16 + 8 + (cfg.fiber_km.ceil() as usize) * 4
}

/// Runs `symbols` (constellation amplitudes) through the IM/DD link.
///
/// The receiver removes the mean and scales the matched-filter output to
/// the RMS of the transmitted symbols. If the synchronizer finds a
/// negative correlation the output is negated.
pub fn simulate_imdd<T: Scalar, R: Rng + ?Sized>(
    symbols: &[T],
    cfg: &ImddConfig,
    rng: &mut R,
) -> Result<ChannelOutput<T>> {
    cfg.validate()?;
    check_symbols(symbols)?;
    let ext = cyclic_extend(symbols, cfg.guard);
    let rx4 = receive(&ext, symbol_rms(symbols), cfg, rng)?;
    let mut out = finish(&rx4, &ext, cfg.guard, symbols.len(), max_lag(cfg))?;
    if out.sync.correlation < 0.0 {
        out.rx.iter_mut().for_each(|v| *v = -*v);
    }
    Ok(out)
}

/// Matched-filter output at 4 samples per symbol, aligned so symbol `n`
/// sits at sample `4n`. Eye diagrams fold this at 4 or 8 samples.
pub fn simulate_imdd_eye<T: Scalar, R: Rng + ?Sized>(symbols: &[T], cfg: &ImddConfig, rng: &mut R) -> Result<Vec<T>> {
    cfg.validate()?;
    check_symbols(symbols)?;
    let ext = cyclic_extend(symbols, cfg.guard);
    let rx4 = receive(&ext, symbol_rms(symbols), cfg, rng)?;
    let out = finish(&rx4, &ext, cfg.guard, symbols.len(), max_lag(cfg))?;
    let start = (SPS_CHANNEL * cfg.guard) as isize + (SPS_CHANNEL / SPS_OUT) as isize * out.sync.lag;
    let mut eye = align(&rx4, start, SPS_CHANNEL * symbols.len());
    if out.sync.correlation < 0.0 {
        eye.iter_mut().for_each(|v| *v = -*v);
    }
    Ok(eye)
}
