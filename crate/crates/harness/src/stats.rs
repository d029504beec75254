//! Summary statistics over restarts.

use serde::Serialize;
use statrs::distribution::{ContinuousCDF, StudentsT};

/// z quantile for a two-sided 95% interval.
pub const Z95: f64 = 1.96;

pub fn mean(x: &[f64]) -> f64 {
    if x.is_empty() {
        return f64::NAN;
    }
    x.iter().sum::<f64>() / x.len() as f64
}

/// Sample standard deviation (n - 1); zero for a single value.
pub fn std_dev(x: &[f64]) -> f64 {
    if x.len() < 2 {
        return if x.is_empty() { f64::NAN } else { 0.0 };
    }
    let m = mean(x);
    (x.iter().map(|v| (v - m).powi(2)).sum::<f64>() / (x.len() - 1) as f64).sqrt()
}

pub fn std_err(x: &[f64]) -> f64 {
    std_dev(x) / (x.len() as f64).sqrt()
}

pub fn median(x: &[f64]) -> f64 {
    if x.is_empty() {
        return f64::NAN;
    }
    let mut v = x.to_vec();
    v.sort_by(f64::total_cmp);
    let n = v.len();
    if n % 2 == 1 {
        v[n / 2]
    } else {
        0.5 * (v[n / 2 - 1] + v[n / 2])
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct Interval {
    pub mean: f64,
    pub low: f64,
    pub high: f64,
}

/// `mean +- 1.96 stderr`.
pub fn ci95(x: &[f64]) -> Interval {
    let m = mean(x);
    let h = Z95 * std_err(x);
    Interval { mean: m, low: m - h, high: m + h }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct PairedTest {
    /// Mean of `a - b`.
    pub mean_diff: f64,
    pub t: f64,
    /// Two-sided.
    pub p_value: f64,
    pub n: usize,
}

impl PairedTest {
    /// `a` is smaller than `b` at the given two-sided level.
    pub fn a_smaller(&self, level: f64) -> bool {
        self.mean_diff < 0.0 && self.p_value < level
    }
}

/// Paired t-test on `a[i] - b[i]`. Needs at least two pairs. Identical
/// nonzero differences give `p = 0`, all-zero differences `p = 1`.
pub fn paired_t(a: &[f64], b: &[f64]) -> Option<PairedTest> {
    if a.len() != b.len() || a.len() < 2 {
        return None;
    }
    let d: Vec<f64> = a.iter().zip(b).map(|(x, y)| x - y).collect();
    let n = d.len();
    let md = mean(&d);
    let se = std_err(&d);
    let (t, p) = if se == 0.0 {
        if md == 0.0 {
            (0.0, 1.0)
        } else {
            (md.signum() * f64::INFINITY, 0.0)
        }
    } else {
        let t = md / se;
        let dist = StudentsT::new(0.0, 1.0, (n - 1) as f64).ok()?;
        (t, 2.0 * (1.0 - dist.cdf(t.abs())))
    };
    Some(PairedTest { mean_diff: md, t, p_value: p, n })
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct Trend {
    pub slope: f64,
    pub low: f64,
    pub high: f64,
}

impl Trend {
    pub fn contains_zero(&self) -> bool {
        self.low <= 0.0 && 0.0 <= self.high
    }
}

/// Least-squares slope of `y` against its index with a 95% t interval.
pub fn trend(y: &[f64]) -> Option<Trend> {
    let n = y.len();
    if n < 3 {
        return None;
    }
    let xm = (n - 1) as f64 / 2.0;
    let ym = mean(y);
    let sxx: f64 = (0..n).map(|i| (i as f64 - xm).powi(2)).sum();
    let sxy: f64 = y.iter().enumerate().map(|(i, v)| (i as f64 - xm) * (v - ym)).sum();
    let slope = sxy / sxx;
    let resid: f64 = y.iter().enumerate().map(|(i, v)| (v - ym - slope * (i as f64 - xm)).powi(2)).sum();
    let se = (resid / (n - 2) as f64 / sxx).sqrt();
    let q = StudentsT::new(0.0, 1.0, (n - 2) as f64).ok()?.inverse_cdf(0.975);
    Some(Trend { slope, low: slope - q * se, high: slope + q * se })
}

/// [`trend`] of the means of consecutive blocks of `block` values, slope
/// per block. Per-batch training losses are autocorrelated, which makes
/// the plain interval far too narrow; block means are close to
/// independent. A trailing partial block is dropped.
pub fn block_trend(y: &[f64], block: usize) -> Option<Trend> {
    let means: Vec<f64> = y.chunks_exact(block.max(1)).map(mean).collect();
    trend(&means)
}
