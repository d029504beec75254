//! End-to-end channel simulators.
//!
//! Both links shape PAM symbols with an RRC at 4 samples per symbol, run
//! the channel, apply the matched RRC, decimate to 2 samples per symbol
//! and synchronize, so that symbol `n` lines up with output samples `2n`
//! and `2n + 1`.
//!
//! The symbol block is treated as one period of a cyclic sequence: a guard
//! of symbols copied from the other end is simulated on either side and
//! cut away afterwards, so the block edges see the same filter memory as
//! the middle.

mod imdd;
mod wh;

pub use imdd::{
    dispersion_formula, mzm, simulate_imdd, simulate_imdd_eye, Dispersion, ImddConfig, STATED_DISPERSION_PS_NM_KM,
};
pub use wh::{simulate_wh, wh_nonlinearity, WhConfig};

use crate::dsp::{align, decimate, synchronize_at, upsample_zero_insert, SyncResult};
use crate::error::{Error, Result};
use crate::scalar::Scalar;

/// Receive samples at `SPS_OUT` per symbol plus how they were aligned.
#[derive(Debug, Clone, PartialEq)]
pub struct ChannelOutput<T> {
    /// `2 * symbols.len()` samples.
    pub rx: Vec<T>,
    /// Lag found by the synchronizer, in output samples.
    pub sync: SyncResult,
}

/// Internal simulation rate in samples per symbol.
pub const SPS_CHANNEL: usize = 4;
/// Output rate in samples per symbol.
pub const SPS_OUT: usize = 2;

pub(crate) fn cyclic_extend<T: Scalar>(symbols: &[T], guard: usize) -> Vec<T> {
    let n = symbols.len() as isize;
    (-(guard as isize)..n + guard as isize).map(|i| symbols[i.rem_euclid(n) as usize]).collect()
}

/// Decimates the extended 4-sps matched-filter output, synchronizes it
/// against the extended symbols and cuts out the original block.
pub(crate) fn finish<T: Scalar>(
    rx4: &[T],
    ext_symbols: &[T],
    guard: usize,
    n: usize,
    max_lag: usize,
) -> Result<ChannelOutput<T>> {
    let rx2 = decimate(rx4, SPS_CHANNEL / SPS_OUT, 0)?;
    // Correlate the block itself against the received samples around it,
    // so the filter transients at the outer edges of the guard stay out.
    let lead = SPS_OUT * guard;
    if max_lag > lead {
        return Err(Error::InvalidParameter(format!("sync window of {max_lag} samples exceeds the guard")));
    }
    let block = &ext_symbols[guard..guard + n];
    let reference = upsample_zero_insert(block, SPS_OUT)?;
    let sync = synchronize_at(&rx2, &reference, lead, max_lag)?;
    let start = lead as isize + sync.lag;
    Ok(ChannelOutput { rx: align(&rx2, start, SPS_OUT * n), sync })
}

pub(crate) fn check_symbols<T: Scalar>(symbols: &[T]) -> Result<()> {
    if symbols.is_empty() {
        return Err(Error::Dimension("no symbols to transmit".into()));
    }
    if symbols.iter().any(|s| !s.is_finite()) {
        return Err(Error::NonFinite("symbols"));
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn extension_wraps() {
        let e = cyclic_extend(&[1.0, 2.0, 3.0], 2);
        assert_eq!(e, vec![2.0, 3.0, 1.0, 2.0, 3.0, 1.0, 2.0]);
        let short = cyclic_extend(&[5.0], 3);
        assert_eq!(short, vec![5.0; 7]);
    }
}
