//! The factorized posterior over transmitted symbols and its moments.
//!
//! `Q(x) = prod_n Q(x_n)` with each factor a categorical distribution over
//! the constellation. Everything the analytic ELBO needs from `Q` is the
//! per-index raw moments `E[x^k]`, `k = 1..4`.

use crate::error::{Error, Result};
use crate::scalar::{all_finite, Scalar};

/// Ordered set of real symbol amplitudes.
#[derive(Debug, Clone, PartialEq)]
pub struct Constellation<T> {
    points: Vec<T>,
}

impl<T: Scalar> Constellation<T> {
    pub fn new(points: Vec<T>) -> Result<Self> {
        if points.len() < 2 {
            return Err(Error::InvalidParameter(format!(
                "constellation needs at least 2 points, got {}",
                points.len()
            )));
        }
        if !all_finite(&points) {
            return Err(Error::NonFinite("constellation"));
        }
        for i in 0..points.len() {
            for j in (i + 1)..points.len() {
                if points[i] == points[j] {
                    return Err(Error::InvalidParameter(format!("constellation points {i} and {j} coincide")));
                }
            }
        }
        Ok(Self { points })
    }

    /// PAM-4, `{-3, -1, 1, 3}`.
    pub fn pam4() -> Self {
        Self::pam(4)
    }

    /// Equally spaced `M`-PAM with odd-integer levels.
    pub fn pam(m: usize) -> Self {
        assert!(m >= 2, "PAM order must be at least 2");
        let points = (0..m).map(|i| T::of(2.0 * i as f64 - (m as f64 - 1.0))).collect();
        Self { points }
    }

    #[inline]
    pub fn len(&self) -> usize {
        self.points.len()
    }

    #[inline]
    pub fn is_empty(&self) -> bool {
        self.points.is_empty()
    }

    #[inline]
    pub fn points(&self) -> &[T] {
        &self.points
    }

    #[inline]
    pub fn point(&self, m: usize) -> T {
        self.points[m]
    }

    /// Mean energy `E[A^2]` under a flat prior.
    pub fn mean_energy(&self) -> T {
        let n = T::of(self.len() as f64);
        self.points.iter().map(|&a| a * a).sum::<T>() / n
    }

    /// Maps symbol indices to amplitudes.
    pub fn symbols(&self, indices: &[usize]) -> Vec<T> {
        indices.iter().map(|&i| self.points[i]).collect()
    }
}

/// `N x M` row-stochastic matrix, one categorical distribution per time index.
#[derive(Debug, Clone, PartialEq)]
pub struct SymbolProbabilities<T> {
    rows: usize,
    m: usize,
    data: Vec<T>,
}

impl<T: Scalar> SymbolProbabilities<T> {
    /// Validates that every row is a probability distribution.
    pub fn new(m: usize, data: Vec<T>) -> Result<Self> {
        if m == 0 || !data.len().is_multiple_of(m) {
            return Err(Error::Dimension(format!("{} entries do not form rows of width {m}", data.len())));
        }
        if !all_finite(&data) {
            return Err(Error::NonFinite("symbol probabilities"));
        }
        let tol = T::normalization_tol();
        for (n, row) in data.chunks(m).enumerate() {
            if row.iter().any(|&p| p < T::zero() || p > T::one()) {
                return Err(Error::InvalidParameter(format!("row {n} has an entry outside [0, 1]")));
            }
            let s: T = row.iter().copied().sum();
            if (s - T::one()).abs() > tol {
                return Err(Error::InvalidParameter(format!("row {n} sums to {s}, not 1")));
            }
        }
        Ok(Self { rows: data.len() / m, m, data })
    }

    /// Caller guarantees rows are normalized (e.g. softmax output).
    pub(crate) fn from_rows_unchecked(m: usize, data: Vec<T>) -> Self {
        debug_assert!(data.len().is_multiple_of(m));
        Self { rows: data.len() / m, m, data }
    }

    pub fn uniform(rows: usize, m: usize) -> Self {
        let p = T::one() / T::of(m as f64);
        Self { rows, m, data: vec![p; rows * m] }
    }

    pub fn one_hot(indices: &[usize], m: usize) -> Result<Self> {
        let mut data = vec![T::zero(); indices.len() * m];
        for (n, &k) in indices.iter().enumerate() {
            if k >= m {
                return Err(Error::Dimension(format!("symbol index {k} out of range for M = {m}")));
            }
            data[n * m + k] = T::one();
        }
        Ok(Self { rows: indices.len(), m, data })
    }

    #[inline]
    pub fn len(&self) -> usize {
        self.rows
    }

    #[inline]
    pub fn is_empty(&self) -> bool {
        self.rows == 0
    }

    #[inline]
    pub fn num_symbols(&self) -> usize {
        self.m
    }

    #[inline]
    pub fn row(&self, n: usize) -> &[T] {
        &self.data[n * self.m..(n + 1) * self.m]
    }

    pub fn as_slice(&self) -> &[T] {
        &self.data
    }

    pub fn rows(&self) -> impl Iterator<Item = &[T]> {
        self.data.chunks(self.m)
    }
}

/// Per-index raw moments `E[x]`, `E[x^2]`, `E[x^3]`, `E[x^4]`.
#[derive(Debug, Clone, PartialEq)]
pub struct MomentSequence<T> {
    pub m1: Vec<T>,
    pub m2: Vec<T>,
    pub m3: Vec<T>,
    pub m4: Vec<T>,
}

impl<T: Scalar> MomentSequence<T> {
    pub fn zeros(len: usize) -> Self {
        Self { m1: vec![T::zero(); len], m2: vec![T::zero(); len], m3: vec![T::zero(); len], m4: vec![T::zero(); len] }
    }

    /// Moments of a deterministic sequence: `m_k[n] = x[n]^k`.
    pub fn deterministic(x: &[T]) -> Self {
        Self {
            m1: x.to_vec(),
            m2: x.iter().map(|&v| v * v).collect(),
            m3: x.iter().map(|&v| v * v * v).collect(),
            m4: x.iter().map(|&v| v * v * v * v).collect(),
        }
    }

    #[inline]
    pub fn len(&self) -> usize {
        self.m1.len()
    }

    #[inline]
    pub fn is_empty(&self) -> bool {
        self.m1.is_empty()
    }

    /// Moments at index `n`, or all zeros outside the sequence.
    #[inline]
    pub fn at(&self, n: isize) -> [T; 4] {
        if n < 0 || n as usize >= self.len() {
            [T::zero(); 4]
        } else {
            let n = n as usize;
            [self.m1[n], self.m2[n], self.m3[n], self.m4[n]]
        }
    }

    fn check_lengths(&self) -> Result<()> {
        let n = self.m1.len();
        if self.m2.len() != n || self.m3.len() != n || self.m4.len() != n {
            return Err(Error::Dimension("moment sequences differ in length".into()));
        }
        Ok(())
    }
}

/// `m_k[n] = sum_m probs[n, m] * A_m^k` for `k = 1..4`.
pub fn compute_moments<T: Scalar>(
    probs: &SymbolProbabilities<T>,
    constellation: &Constellation<T>,
) -> Result<MomentSequence<T>> {
    let m = constellation.len();
    if probs.num_symbols() != m {
        return Err(Error::Dimension(format!(
            "probabilities have {} columns but the constellation has {m} points",
            probs.num_symbols()
        )));
    }
    let pow: Vec<[T; 4]> = constellation.points().iter().map(|&a| [a, a * a, a * a * a, a * a * a * a]).collect();
    let mut out = MomentSequence::zeros(probs.len());
    for (n, row) in probs.rows().enumerate() {
        let mut acc = [T::zero(); 4];
        for (p, ap) in row.iter().zip(&pow) {
            for k in 0..4 {
                acc[k] += *p * ap[k];
            }
        }
        out.m1[n] = acc[0];
        out.m2[n] = acc[1];
        out.m3[n] = acc[2];
        out.m4[n] = acc[3];
    }
    Ok(out)
}

/// Pull back a gradient with respect to the moments onto the probabilities:
/// `dL/dp[n, m] = sum_k dL/dm_k[n] * A_m^k`.
pub fn moments_pullback<T: Scalar>(grad: &MomentSequence<T>, constellation: &Constellation<T>) -> Vec<T> {
    let m = constellation.len();
    let mut out = vec![T::zero(); grad.len() * m];
    for n in 0..grad.len() {
        for (j, &a) in constellation.points().iter().enumerate() {
            let a2 = a * a;
            out[n * m + j] = grad.m1[n] * a + grad.m2[n] * a2 + grad.m3[n] * a2 * a + grad.m4[n] * a2 * a2;
        }
    }
    out
}

/// Zero insertion to the receive sample rate: index `n * sps` carries the
/// input moments, every inserted index is a deterministic zero.
pub fn upsample_moments<T: Scalar>(ms: &MomentSequence<T>, sps: usize) -> Result<MomentSequence<T>> {
    if sps == 0 {
        return Err(Error::InvalidParameter("samples per symbol must be at least 1".into()));
    }
    ms.check_lengths()?;
    let mut out = MomentSequence::zeros(ms.len() * sps);
    for n in 0..ms.len() {
        out.m1[n * sps] = ms.m1[n];
        out.m2[n * sps] = ms.m2[n];
        out.m3[n * sps] = ms.m3[n];
        out.m4[n * sps] = ms.m4[n];
    }
    Ok(out)
}

/// Adjoint of [`upsample_moments`]: keeps the stride-`sps` entries.
pub fn downsample_moment_grad<T: Scalar>(grad: &MomentSequence<T>, sps: usize) -> MomentSequence<T> {
    let pick = |v: &[T]| v.iter().step_by(sps).copied().collect::<Vec<_>>();
    MomentSequence { m1: pick(&grad.m1), m2: pick(&grad.m2), m3: pick(&grad.m3), m4: pick(&grad.m4) }
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn row(p: &[f64]) -> SymbolProbabilities<f64> {
        SymbolProbabilities::new(p.len(), p.to_vec()).unwrap()
    }

    #[test]
    fn uniform_pam4_moments() {
        let c = Constellation::<f64>::pam4();
        let ms = compute_moments(&row(&[0.25; 4]), &c).unwrap();
        assert_eq!(ms.at(0), [0.0, 5.0, 0.0, 41.0]);
    }

    #[test]
    fn one_hot_on_three() {
        let c = Constellation::<f64>::pam4();
        let ms = compute_moments(&row(&[0.0, 0.0, 0.0, 1.0]), &c).unwrap();
        assert_eq!(ms.at(0), [3.0, 9.0, 27.0, 81.0]);
    }

    #[test]
    fn two_point_mixture() {
        let c = Constellation::<f64>::pam4();
        let ms = compute_moments(&row(&[0.0, 0.5, 0.0, 0.5]), &c).unwrap();
        assert_eq!(ms.at(0), [1.0, 5.0, 13.0, 41.0]);
    }

    #[test]
    fn column_mismatch_is_reported() {
        let c = Constellation::<f64>::pam(2);
        let err = compute_moments(&row(&[0.25; 4]), &c).unwrap_err();
        assert!(err.to_string().contains("4 columns"));
    }

    #[test]
    fn constellation_validation() {
        assert!(Constellation::new(vec![1.0]).is_err());
        assert!(Constellation::new(vec![1.0, 1.0]).is_err());
        assert!(Constellation::new(vec![1.0, f64::NAN]).is_err());
        assert_eq!(Constellation::<f64>::pam4().points(), &[-3.0, -1.0, 1.0, 3.0]);
    }

    #[test]
    fn probabilities_validation() {
        assert!(SymbolProbabilities::new(2, vec![0.6, 0.6]).is_err());
        assert!(SymbolProbabilities::new(2, vec![1.5, -0.5]).is_err());
        assert!(SymbolProbabilities::new(3, vec![0.5, 0.5]).is_err());
    }

    #[test]
    fn upsampling_examples() {
        let ms = MomentSequence::deterministic(&[2.0, -1.0]);
        assert_eq!(upsample_moments(&ms, 1).unwrap(), ms);
        let up = upsample_moments(&ms, 2).unwrap();
        assert_eq!(up.m1, vec![2.0, 0.0, -1.0, 0.0]);
        assert_eq!(up.m4, vec![16.0, 0.0, 1.0, 0.0]);
        let single = MomentSequence::deterministic(&[1.5]);
        assert_eq!(upsample_moments(&single, 3).unwrap().m2, vec![2.25, 0.0, 0.0]);
        assert!(upsample_moments(&ms, 0).is_err());
    }

    fn stochastic_matrix(m: usize) -> impl Strategy<Value = Vec<f64>> {
        prop::collection::vec(prop::collection::vec(0.0f64..1.0, m), 1..12).prop_map(move |rows| {
            rows.into_iter()
                .flat_map(|r| {
                    let s: f64 = r.iter().sum::<f64>() + 1e-3;
                    let mut r: Vec<f64> = r.iter().map(|v| (v + 1e-3 / m as f64) / s).collect();
                    let t: f64 = r.iter().sum();
                    r.iter_mut().for_each(|v| *v /= t);
                    r
                })
                .collect()
        })
    }

    proptest! {
        #[test]
        fn moments_respect_invariants(data in stochastic_matrix(4)) {
            let c = Constellation::<f64>::pam4();
            let probs = SymbolProbabilities::new(4, data).unwrap();
            let ms = compute_moments(&probs, &c).unwrap();
            for n in 0..ms.len() {
                let [m1, m2, m3, m4] = ms.at(n as isize);
                prop_assert!(m2 - m1 * m1 >= -1e-12);
                prop_assert!(m4 - m2 * m2 >= -1e-12);
                // convex hull of {A^k}
                prop_assert!((-3.0..=3.0).contains(&m1));
                prop_assert!((1.0 - 1e-12..=9.0 + 1e-12).contains(&m2));
                prop_assert!((-27.0..=27.0).contains(&m3));
                prop_assert!((1.0 - 1e-12..=81.0 + 1e-12).contains(&m4));
            }
        }

        #[test]
        fn one_hot_moments_are_exact_powers(idx in prop::collection::vec(0usize..4, 1..20)) {
            let c = Constellation::<f64>::pam4();
            let probs = SymbolProbabilities::one_hot(&idx, 4).unwrap();
            let ms = compute_moments(&probs, &c).unwrap();
            let x = c.symbols(&idx);
            prop_assert_eq!(ms, MomentSequence::deterministic(&x));
        }

        #[test]
        fn upsampling_preserves_stride_entries(x in prop::collection::vec(-3.0f64..3.0, 1..20), sps in 1usize..5) {
            let ms = MomentSequence::deterministic(&x);
            let up = upsample_moments(&ms, sps).unwrap();
            prop_assert_eq!(up.len(), x.len() * sps);
            for n in 0..up.len() {
                let v = up.at(n as isize);
                if n % sps == 0 {
                    prop_assert_eq!(v, ms.at((n / sps) as isize));
                } else {
                    prop_assert_eq!(v, [0.0; 4]);
                }
            }
            prop_assert_eq!(downsample_moment_grad(&up, sps), ms);
        }
    }
}
