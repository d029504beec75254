//! Fractionally spaced equalizers, the soft demapper and decision rules.
//!
//! Equalizers read the receive signal at `sps` samples per symbol and emit
//! one estimate per symbol. Estimate `n` is anchored at sample `sps * n`;
//! the first-order window of length `N1` covers samples
//! `sps*n - (N1-1)/2 ..= sps*n + N1/2`, and the second-order window of
//! length `N2` is centred on the same anchor. Samples outside the signal
//! read as zero.

use std::io::{BufRead, Write};

use crate::error::{Error, Result};
use crate::qstats::{Constellation, SymbolProbabilities};
use crate::scalar::{all_finite, Scalar};
use crate::sym::{packed_len, SymMatrix};

#[derive(Debug, Clone, PartialEq)]
pub struct FfeEqualizer<T> {
    pub w1: Vec<T>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct VolterraEqualizer<T> {
    pub w1: Vec<T>,
    pub w2: SymMatrix<T>,
}

impl<T: Scalar> FfeEqualizer<T> {
    /// Unit impulse at the centre tap.
    pub fn center_spike(taps: usize) -> Self {
        let mut w1 = vec![T::zero(); taps];
        w1[(taps - 1) / 2] = T::one();
        Self { w1 }
    }
}

impl<T: Scalar> VolterraEqualizer<T> {
    pub fn center_spike(taps1: usize, taps2: usize) -> Self {
        Self { w1: FfeEqualizer::center_spike(taps1).w1, w2: SymMatrix::zeros(taps2) }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub enum Equalizer<T> {
    Ffe(FfeEqualizer<T>),
    Volterra(VolterraEqualizer<T>),
}

impl<T: Scalar> Equalizer<T> {
    pub fn w1(&self) -> &[T] {
        match self {
            Equalizer::Ffe(e) => &e.w1,
            Equalizer::Volterra(e) => &e.w1,
        }
    }

    pub fn w2(&self) -> Option<&SymMatrix<T>> {
        match self {
            Equalizer::Ffe(_) => None,
            Equalizer::Volterra(e) => Some(&e.w2),
        }
    }

    /// Longest lag window, the minimum usable signal length.
    pub fn window_len(&self) -> usize {
        self.w1().len().max(self.w2().map_or(0, |w| w.dim()))
    }

    pub fn num_params(&self) -> usize {
        self.w1().len() + self.w2().map_or(0, |w| packed_len(w.dim()))
    }

    /// Flat parameter layout: `w1`, then the packed upper triangle of `w2`.
    pub fn write_params(&self, out: &mut [T]) {
        let n1 = self.w1().len();
        out[..n1].copy_from_slice(self.w1());
        if let Some(w2) = self.w2() {
            out[n1..n1 + w2.packed().len()].copy_from_slice(w2.packed());
        }
    }

    pub fn read_params(&mut self, src: &[T]) {
        match self {
            Equalizer::Ffe(e) => {
                let n1 = e.w1.len();
                e.w1.copy_from_slice(&src[..n1]);
            }
            Equalizer::Volterra(e) => {
                let n1 = e.w1.len();
                e.w1.copy_from_slice(&src[..n1]);
                let n2 = e.w2.packed().len();
                e.w2.packed_mut().copy_from_slice(&src[n1..n1 + n2]);
            }
        }
    }
}

#[inline]
fn sample<T: Scalar>(signal: &[T], idx: isize) -> T {
    if idx < 0 || idx as usize >= signal.len() {
        T::zero()
    } else {
        signal[idx as usize]
    }
}

/// Estimates for every symbol of `signal`.
pub fn equalize<T: Scalar>(signal: &[T], eq: &Equalizer<T>, sps: usize) -> Result<Vec<T>> {
    if signal.len() < eq.window_len() {
        return Err(Error::SignalTooShort { got: signal.len(), need: eq.window_len() });
    }
    equalize_range(signal, eq, sps, 0, signal.len() / sps)
}

/// Estimates for symbols `start .. start + count`, reading neighbouring
/// samples outside that range when they exist.
pub fn equalize_range<T: Scalar>(
    signal: &[T],
    eq: &Equalizer<T>,
    sps: usize,
    start: usize,
    count: usize,
) -> Result<Vec<T>> {
    if sps == 0 {
        return Err(Error::InvalidParameter("samples per symbol must be at least 1".into()));
    }
    if signal.len() < eq.window_len() {
        return Err(Error::SignalTooShort { got: signal.len(), need: eq.window_len() });
    }
    let w1 = eq.w1();
    let c1 = ((w1.len() - 1) / 2) as isize;
    let mut out = Vec::with_capacity(count);
    let mut win = Vec::new();
    for n in start..start + count {
        let anchor = (sps * n) as isize;
        let mut acc = T::zero();
        for (k, &w) in w1.iter().enumerate() {
            acc += w * sample(signal, anchor + k as isize - c1);
        }
        if let Some(w2) = eq.w2() {
            let d = w2.dim();
            let c2 = ((d - 1) / 2) as isize;
            win.clear();
            win.extend((0..d).map(|i| sample(signal, anchor + i as isize - c2)));
            acc += w2.quad_form(&win);
        }
        out.push(acc);
    }
    Ok(out)
}

/// Gradient of `sum_n d_xhat[n] * xhat[n]` with respect to the flat
/// parameters of `eq` (layout of [`Equalizer::write_params`]).
pub fn equalizer_pullback<T: Scalar>(
    signal: &[T],
    eq: &Equalizer<T>,
    sps: usize,
    start: usize,
    d_xhat: &[T],
    out: &mut [T],
) {
    let w1 = eq.w1();
    let n1 = w1.len();
    let c1 = ((n1 - 1) / 2) as isize;
    let two = T::of(2.0);
    let mut win = Vec::new();
    for (j, &g) in d_xhat.iter().enumerate() {
        let anchor = (sps * (start + j)) as isize;
        for k in 0..n1 {
            out[k] += g * sample(signal, anchor + k as isize - c1);
        }
        if let Some(w2) = eq.w2() {
            let d = w2.dim();
            let c2 = ((d - 1) / 2) as isize;
            win.clear();
            win.extend((0..d).map(|i| sample(signal, anchor + i as isize - c2)));
            let mut k = n1;
            for a in 0..d {
                out[k] += g * win[a] * win[a];
                k += 1;
                for b in (a + 1)..d {
                    out[k] += g * two * win[a] * win[b];
                    k += 1;
                }
            }
        }
    }
}

/// Per-symbol noise scaling weights `beta_m` of the soft demapper.
#[derive(Debug, Clone, PartialEq)]
pub struct SoftDemapper<T> {
    pub beta: Vec<T>,
}

/// Lower bound kept on every `beta_m` after an optimizer step.
pub const BETA_MIN: f64 = 1e-3;

impl<T: Scalar> SoftDemapper<T> {
    pub fn new(m: usize) -> Self {
        Self { beta: vec![T::one(); m] }
    }

    pub fn project(&mut self) {
        let lo = T::of(BETA_MIN);
        for b in &mut self.beta {
            *b = b.max(lo);
        }
    }
}

/// Logits `-(xhat - A_m)^2 / (beta_m sigma^2)` of one estimate.
#[inline]
pub(crate) fn demap_logits<T: Scalar>(x: T, points: &[T], beta: &[T], sigma2: T, out: &mut [T]) {
    for ((o, &a), &b) in out.iter_mut().zip(points).zip(beta) {
        let d = x - a;
        *o = -(d * d) / (b * sigma2);
    }
}

/// In-place max-subtracted softmax; returns `log sum exp` of the input.
#[inline]
pub(crate) fn softmax_in_place<T: Scalar>(z: &mut [T], logp: &mut [T]) -> T {
    let mx = z.iter().copied().fold(T::neg_infinity(), T::max);
    let mut s = T::zero();
    for v in z.iter() {
        s += (*v - mx).exp();
    }
    let lse = mx + s.ln();
    for (p, l) in z.iter_mut().zip(logp.iter_mut()) {
        *l = *p - lse;
        *p = l.exp();
    }
    lse
}

/// Soft demapping: Gaussian kernels around each point, normalized by softmax.
pub fn soft_demap<T: Scalar>(
    xhat: &[T],
    constellation: &Constellation<T>,
    sigma2: T,
    demapper: &SoftDemapper<T>,
) -> Result<SymbolProbabilities<T>> {
    let m = constellation.len();
    if demapper.beta.len() != m {
        return Err(Error::Dimension(format!("{} demapper weights for M = {m}", demapper.beta.len())));
    }
    if !(sigma2 > T::zero()) || !sigma2.is_finite() {
        return Err(Error::InvalidParameter("demapper noise variance must be positive".into()));
    }
    if demapper.beta.iter().any(|&b| !(b > T::zero())) {
        return Err(Error::InvalidParameter("demapper weights must be positive".into()));
    }
    if !all_finite(xhat) {
        return Err(Error::NonFinite("equalizer output"));
    }
    let mut data = vec![T::zero(); xhat.len() * m];
    let mut logp = vec![T::zero(); m];
    for (n, &x) in xhat.iter().enumerate() {
        let row = &mut data[n * m..(n + 1) * m];
        demap_logits(x, constellation.points(), &demapper.beta, sigma2, row);
        softmax_in_place(row, &mut logp);
    }
    Ok(SymbolProbabilities::from_rows_unchecked(m, data))
}

/// Index of the nearest constellation point; ties go to the lower index.
pub fn hard_decision_euclidean<T: Scalar>(xhat: &[T], constellation: &Constellation<T>) -> Vec<usize> {
    xhat.iter()
        .map(|&x| {
            let mut best = 0;
            let mut best_d = (x - constellation.point(0)).abs();
            for (m, &a) in constellation.points().iter().enumerate().skip(1) {
                let d = (x - a).abs();
                if d < best_d {
                    best = m;
                    best_d = d;
                }
            }
            best
        })
        .collect()
}

/// Per-row argmax; ties go to the lower index.
pub fn hard_decision_map<T: Scalar>(probs: &SymbolProbabilities<T>) -> Vec<usize> {
    probs
        .rows()
        .map(|row| {
            let mut best = 0;
            for (m, &p) in row.iter().enumerate().skip(1) {
                if p > row[best] {
                    best = m;
                }
            }
            best
        })
        .collect()
}

/// Mean squared error against known pilot symbols.
pub fn supervised_loss<T: Scalar>(xhat: &[T], pilots: &[T]) -> Result<T> {
    if xhat.len() != pilots.len() || xhat.is_empty() {
        return Err(Error::Dimension(format!("{} estimates against {} pilots", xhat.len(), pilots.len())));
    }
    let s: T = xhat.iter().zip(pilots).map(|(&a, &b)| (a - b) * (a - b)).sum();
    Ok(s / T::of(xhat.len() as f64))
}

/// Trained equalizer state as written to disk.
///
/// Text format, one item per line, `#` starts a comment:
///
/// ```text
/// blindeq-equalizer 1
/// sps 2
/// w1 <n> <v0> <v1> ...
/// w2 <dim> <packed upper triangle, row-major>      (Volterra only)
/// beta <m> <b0> ...                                (optional)
/// sigma2 <v>                                       (optional)
/// ```
#[derive(Debug, Clone, PartialEq)]
pub struct Checkpoint<T> {
    pub sps: usize,
    pub equalizer: Equalizer<T>,
    pub demapper: Option<SoftDemapper<T>>,
    pub sigma2: Option<T>,
}

const MAGIC: &str = "blindeq-equalizer";

fn write_vec<W: Write, T: Scalar>(w: &mut W, tag: &str, n: usize, xs: &[T]) -> Result<()> {
    write!(w, "{tag} {n}")?;
    for x in xs {
        write!(w, " {}", x.f64())?;
    }
    writeln!(w)?;
    Ok(())
}

impl<T: Scalar> Checkpoint<T> {
    pub fn write_to<W: Write>(&self, mut w: W) -> Result<()> {
        writeln!(w, "{MAGIC} 1")?;
        writeln!(w, "sps {}", self.sps)?;
        let w1 = self.equalizer.w1();
        write_vec(&mut w, "w1", w1.len(), w1)?;
        if let Some(w2) = self.equalizer.w2() {
            write_vec(&mut w, "w2", w2.dim(), w2.packed())?;
        }
        if let Some(d) = &self.demapper {
            write_vec(&mut w, "beta", d.beta.len(), &d.beta)?;
        }
        if let Some(s) = self.sigma2 {
            writeln!(w, "sigma2 {}", s.f64())?;
        }
        Ok(())
    }

    pub fn read_from<R: BufRead>(r: R) -> Result<Self> {
        let bad = |m: String| Error::Checkpoint(m);
        let mut lines = r.lines();
        let header = lines.next().ok_or_else(|| bad("empty input".into()))??;
        if header.trim() != format!("{MAGIC} 1") {
            return Err(bad(format!("unexpected header {header:?}")));
        }
        let (mut sps, mut w1, mut w2, mut beta, mut sigma2) = (None, None, None, None, None);
        for line in lines {
            let line = line?;
            let line = line.split('#').next().unwrap_or("").trim().to_string();
            if line.is_empty() {
                continue;
            }
            let mut it = line.split_whitespace();
            let tag = it.next().unwrap_or_default().to_string();
            let nums: Vec<f64> =
                it.map(|s| s.parse::<f64>().map_err(|e| bad(format!("{tag}: {e}")))).collect::<Result<_>>()?;
            let sized = |nums: &[f64], expect: fn(usize) -> usize| -> Result<(usize, Vec<T>)> {
                let n = *nums.first().ok_or_else(|| bad(format!("{tag}: missing length")))? as usize;
                let vals = &nums[1..];
                if vals.len() != expect(n) {
                    return Err(bad(format!("{tag}: expected {} values, got {}", expect(n), vals.len())));
                }
                Ok((n, vals.iter().map(|&v| T::of(v)).collect()))
            };
            match tag.as_str() {
                "sps" => sps = nums.first().map(|&v| v as usize),
                "w1" => w1 = Some(sized(&nums, |n| n)?.1),
                "w2" => {
                    let (d, v) = sized(&nums, packed_len)?;
                    w2 = Some(SymMatrix::from_packed(d, v)?);
                }
                "beta" => beta = Some(SoftDemapper { beta: sized(&nums, |n| n)?.1 }),
                "sigma2" => sigma2 = nums.first().map(|&v| T::of(v)),
                other => return Err(bad(format!("unknown field {other:?}"))),
            }
        }
        let w1 = w1.ok_or_else(|| bad("missing w1".into()))?;
        if w1.is_empty() {
            return Err(bad("w1 has no taps".into()));
        }
        let equalizer = match w2 {
            Some(w2) => Equalizer::Volterra(VolterraEqualizer { w1, w2 }),
            None => Equalizer::Ffe(FfeEqualizer { w1 }),
        };
        Ok(Self { sps: sps.ok_or_else(|| bad("missing sps".into()))?, equalizer, demapper: beta, sigma2 })
    }
}
