use crate::error::{Error, Result};
use crate::scalar::Scalar;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SyncResult {
    /// `rx[n + lag]` lines up with `reference[n]`.
    pub lag: isize,
    /// Normalized correlation at `lag`; negative for an inverted channel.
    pub correlation: f64,
}

/// Lag in `-max_lag ..= max_lag` maximizing the absolute normalized
/// cross-correlation between `rx` and `reference`. Taking the absolute
/// value makes a sign-flipped channel synchronize like the original;
/// ties go to the smaller absolute lag, then the negative one.
pub fn synchronize<T: Scalar>(rx: &[T], reference: &[T], max_lag: usize) -> Result<SyncResult> {
    synchronize_at(rx, reference, 0, max_lag)
}

/// [`synchronize`] with `reference[n]` compared against
/// `rx[offset + n + lag]`; the reported lag excludes `offset`.
pub fn synchronize_at<T: Scalar>(rx: &[T], reference: &[T], offset: usize, max_lag: usize) -> Result<SyncResult> {
    if rx.is_empty() || reference.is_empty() {
        return Err(Error::Dimension("cannot synchronize an empty sequence".into()));
    }
    let mut best = SyncResult { lag: 0, correlation: 0.0 };
    let mut best_abs = -1.0;
    let max = max_lag as isize;
    let order = std::iter::once(0).chain((1..=max).flat_map(|k| [-k, k]));
    for lag in order {
        let (mut xy, mut xx, mut yy) = (0.0, 0.0, 0.0);
        for (n, &r) in reference.iter().enumerate() {
            let i = (offset + n) as isize + lag;
            if i < 0 || i as usize >= rx.len() {
                continue;
            }
            let (a, b) = (rx[i as usize].f64(), r.f64());
            xy += a * b;
            xx += a * a;
            yy += b * b;
        }
        if xx == 0.0 || yy == 0.0 {
            continue;
        }
        let c = xy / (xx * yy).sqrt();
        if c.abs() > best_abs {
            best_abs = c.abs();
            best = SyncResult { lag, correlation: c };
        }
    }
    if best_abs < 0.0 {
        return Err(Error::InvalidParameter("no lag in the window overlaps a nonzero signal".into()));
    }
    Ok(best)
}

/// `len` samples of `rx` starting at `lag`, zero-filled outside `rx`.
pub fn align<T: Scalar>(rx: &[T], lag: isize, len: usize) -> Vec<T> {
    (0..len)
        .map(|n| {
            let i = n as isize + lag;
            if i < 0 || i as usize >= rx.len() {
                T::zero()
            } else {
                rx[i as usize]
            }
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn reference(n: usize) -> Vec<f64> {
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        let mut out = vec![0.0; 2 * n];
        for i in 0..n {
            out[2 * i] = [-3.0, -1.0, 1.0, 3.0][rng.gen_range(0..4)];
        }
        out
    }

    #[test]
    fn finds_planted_delay() {
        let r = reference(500);
        let mut rx = vec![0.0; 7];
        rx.extend(&r);
        let s = synchronize(&rx, &r, 20).unwrap();
        assert_eq!(s.lag, 7);
        assert!((s.correlation - 1.0).abs() < 1e-12);
        assert_eq!(align(&rx, s.lag, r.len()), r);
    }

    #[test]
    fn zero_delay() {
        let r = reference(300);
        assert_eq!(synchronize(&r, &r, 10).unwrap().lag, 0);
    }

    #[test]
    fn negated_signal() {
        let r = reference(300);
        let mut rx: Vec<f64> = vec![0.0; 3];
        rx.extend(r.iter().map(|v| -v));
        let s = synchronize(&rx, &r, 10).unwrap();
        assert_eq!(s.lag, 3);
        assert!(s.correlation < -0.99);
    }

    #[test]
    fn advanced_signal_has_negative_lag() {
        let r = reference(300);
        let rx = r[4..].to_vec();
        assert_eq!(synchronize(&rx, &r, 10).unwrap().lag, -4);
    }
}
