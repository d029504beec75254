//! Brute-force expectations under the mean-field `Q`.
//!
//! Enumerates every symbol assignment of a lag window, weights it by the
//! product of per-index probabilities and sums. Exact up to rounding and
//! shares no code with the moment-based evaluators, which makes it the
//! ground truth they are tested against.

use super::Residual;
use crate::error::{Error, Result};
use crate::qstats::{Constellation, SymbolProbabilities};
use crate::scalar::{all_finite, Scalar};
use crate::sym::SymMatrix;

/// Largest number of enumerated windows per sample.
pub const MAX_WINDOWS: u64 = 1_000_000;
/// Largest kernel the oracle accepts.
pub const MAX_LEN: usize = 8;

/// One position of a lag window.
#[derive(Debug, Clone, Copy)]
pub enum Slot<'a, T> {
    /// Symbol drawn from this categorical row.
    Random(&'a [T]),
    /// Deterministic zero (zero insertion or outside the sequence).
    Zero,
}

fn check_budget(len: usize, m: usize) -> Result<()> {
    let needed = (m as f64).powi(len as i32);
    if len > MAX_LEN || needed > MAX_WINDOWS as f64 {
        return Err(Error::EnumerationBudget { needed, len, limit: MAX_WINDOWS });
    }
    Ok(())
}

/// `E_Q[f(x)]` over one window.
pub fn window_expectation<T: Scalar, F>(slots: &[Slot<'_, T>], constellation: &Constellation<T>, mut f: F) -> Result<T>
where
    F: FnMut(&[T]) -> T,
{
    let m = constellation.len();
    check_budget(slots.len(), m)?;
    let random: Vec<(usize, &[T])> = slots
        .iter()
        .enumerate()
        .filter_map(|(i, s)| match s {
            Slot::Random(row) => Some((i, *row)),
            Slot::Zero => None,
        })
        .collect();
    for (_, row) in &random {
        if row.len() != m {
            return Err(Error::Dimension(format!("row of {} probabilities for M = {m}", row.len())));
        }
    }

    let mut x = vec![T::zero(); slots.len()];
    let mut digits = vec![0usize; random.len()];
    let mut acc = T::zero();
    loop {
        let mut weight = T::one();
        for (d, (i, row)) in digits.iter().zip(&random) {
            weight *= row[*d];
            x[*i] = constellation.point(*d);
        }
        if weight != T::zero() {
            acc += weight * f(&x);
        }
        // mixed-radix increment
        let mut k = 0;
        loop {
            if k == digits.len() {
                return Ok(acc);
            }
            digits[k] += 1;
            if digits[k] < m {
                break;
            }
            digits[k] = 0;
            k += 1;
        }
    }
}

/// `E_Q[(y_n - y_hat_n)^2]` for every sample by enumeration.
///
/// `probs` is at the symbol rate; symbol `s` sits at sample `s * sps` and
/// the samples in between are zero. `hq = None` is the linear channel.
#[allow(clippy::too_many_arguments)]
pub fn oracle_residual<T: Scalar>(
    probs: &SymbolProbabilities<T>,
    constellation: &Constellation<T>,
    y: &[T],
    h: &[T],
    hq: Option<&SymMatrix<T>>,
    center: usize,
    sps: usize,
) -> Result<Residual<T>> {
    let l = h.len();
    check_budget(l, constellation.len())?;
    if sps == 0 {
        return Err(Error::InvalidParameter("samples per symbol must be at least 1".into()));
    }
    if !all_finite(y) || !all_finite(h) {
        return Err(Error::NonFinite("oracle inputs"));
    }
    let dense = match hq {
        Some(hq) if hq.dim() != l => return Err(Error::Dimension(format!("{l}-tap h with a {0}x{0} H", hq.dim()))),
        Some(hq) => Some(hq.to_full()),
        None => None,
    };
    let n_up = (probs.len() * sps) as isize;

    let mut per_sample = Vec::with_capacity(y.len());
    for (t, &yt) in y.iter().enumerate() {
        let slots: Vec<Slot<'_, T>> = (0..l)
            .map(|i| {
                let q = t as isize + center as isize - i as isize;
                if q < 0 || q >= n_up || !(q as usize).is_multiple_of(sps) {
                    Slot::Zero
                } else {
                    Slot::Random(probs.row(q as usize / sps))
                }
            })
            .collect();
        let c = window_expectation(&slots, constellation, |x| {
            let mut yhat = T::zero();
            for i in 0..l {
                yhat += h[i] * x[i];
            }
            if let Some(d) = &dense {
                for i in 0..l {
                    for j in 0..l {
                        yhat += x[i] * d[i * l + j] * x[j];
                    }
                }
            }
            let e = yt - yhat;
            e * e
        })?;
        per_sample.push(c);
    }
    let total = per_sample.iter().copied().sum();
    Ok(Residual { total, per_sample })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn one_hot_q_is_realized_residual() {
        let c = Constellation::<f64>::pam4();
        let q = SymbolProbabilities::one_hot(&[3, 0], 4).unwrap();
        // y_hat_0 = 3 * 0.5, y_hat_1 = -3 * 0.5 + 3 * 0.25
        let r = oracle_residual(&q, &c, &[1.0, 0.0], &[0.5, 0.25], None, 0, 1).unwrap();
        assert!((r.per_sample[0] - 0.25).abs() < 1e-15);
        assert!((r.per_sample[1] - 0.5625).abs() < 1e-15);
    }

    #[test]
    fn single_tap_linear_expectation() {
        let c = Constellation::<f64>::pam4();
        let q = SymbolProbabilities::new(4, vec![0.1, 0.2, 0.3, 0.4]).unwrap();
        let (m1, m2) = (1.0, 5.0);
        let (y, h) = (0.7f64, -1.2f64);
        let r = oracle_residual(&q, &c, &[y], &[h], None, 0, 1).unwrap();
        let expected = y * y - 2.0 * y * m1 * h + m2 * h * h;
        assert!((r.total - expected).abs() < 1e-12);
    }

    #[test]
    fn budget_enforced() {
        let c = Constellation::<f64>::pam(16);
        let q = SymbolProbabilities::uniform(4, 16);
        let err = oracle_residual(&q, &c, &[0.0], &[1.0; 5], None, 0, 1).unwrap_err();
        assert!(err.to_string().contains("limit is 1000000"));
        let c4 = Constellation::<f64>::pam4();
        let q4 = SymbolProbabilities::uniform(4, 4);
        assert!(oracle_residual(&q4, &c4, &[0.0], &[1.0; 9], None, 0, 1).is_err());
    }
}
