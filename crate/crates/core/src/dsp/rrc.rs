use std::f64::consts::{FRAC_1_SQRT_2, PI};

use crate::error::{Error, Result};
use crate::scalar::Scalar;

/// Root-raised-cosine taps reaching `span` symbols either side of the
/// centre (`2 * span * sps + 1` taps), normalized to unit energy.
///
/// The removable singularities at `t = 0` and `t = +-T / (4 rolloff)` take
/// their limits.
pub fn rrc_taps<T: Scalar>(rolloff: f64, span: usize, sps: usize) -> Result<Vec<T>> {
    if !(rolloff > 0.0 && rolloff <= 1.0) {
        return Err(Error::InvalidParameter(format!("rolloff {rolloff} outside (0, 1]")));
    }
    if span == 0 || sps == 0 {
        return Err(Error::InvalidParameter("span and samples per symbol must be positive".into()));
    }
    let half = (span * sps) as isize;
    let raw: Vec<f64> = (-half..=half).map(|i| pulse(i as f64 / sps as f64, rolloff)).collect();
    let energy: f64 = raw.iter().map(|v| v * v).sum();
    let norm = energy.sqrt();
    Ok(raw.into_iter().map(|v| T::of(v / norm)).collect())
}

/// Unnormalized pulse at `t` symbol periods.
fn pulse(t: f64, r: f64) -> f64 {
    if t == 0.0 {
        1.0 - r + 4.0 * r / PI
    } else if (1.0 - (4.0 * r * t).powi(2)).abs() < 1e-10 {
        let a = PI / (4.0 * r);
        r * FRAC_1_SQRT_2 * ((1.0 + 2.0 / PI) * a.sin() + (1.0 - 2.0 / PI) * a.cos())
    } else {
        let num = (PI * t * (1.0 - r)).sin() + 4.0 * r * t * (PI * t * (1.0 + r)).cos();
        num / (PI * t * (1.0 - (4.0 * r * t).powi(2)))
    }
}
