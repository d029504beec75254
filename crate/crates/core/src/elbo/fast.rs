//! Factorized evaluation of `C` and its exact gradient.
//!
//! Write each window entry as `x_i = mu_i + e_i` with independent zero-mean
//! `e_i`, variance `v_i`, third cumulant `k3_i` and fourth cumulant `k4_i`.
//! With `g = h + 2 H mu`:
//!
//! ```text
//! E[y_hat]   = h.mu + mu.H.mu + sum_i H_ii v_i
//! Var[y_hat] = sum_i g_i^2 v_i + 2 sum_i g_i H_ii k3_i + sum_i H_ii^2 k4_i
//!              + 2 sum_ij H_ij^2 v_i v_j
//! c_n        = (y_n - E[y_hat])^2 + Var[y_hat]
//! ```
//!
//! which costs `O(L^2)` per sample instead of the `O(L^4)` of the raw
//! expansion. The moments are taken at the symbol rate; positions created
//! by zero insertion and positions outside the batch are skipped, since
//! their deterministic zeros contribute nothing.
//!
//! Gradients are accumulated sample by sample in increasing `t`, and within
//! a sample in increasing window position, so results are bitwise
//! reproducible.

use super::Residual;
use crate::error::{Error, Result};
use crate::qstats::MomentSequence;
use crate::scalar::{all_finite, Scalar};
use crate::sym::SymMatrix;

/// Value of `C` together with its gradient.
#[derive(Debug, Clone, PartialEq)]
pub struct ResidualGrad<T> {
    pub total: T,
    /// `dC/dm_k` at the symbol rate.
    pub d_moments: MomentSequence<T>,
    pub d_h: Vec<T>,
    pub d_hq: Option<SymMatrix<T>>,
}

/// `C` only.
pub fn residual<T: Scalar>(
    y: &[T],
    ms: &MomentSequence<T>,
    sps: usize,
    h: &[T],
    hq: Option<&SymMatrix<T>>,
    center: usize,
) -> Result<T> {
    Ok(run(y, ms, sps, h, hq, center, Mode::Value)?.0.total)
}

/// `C` and every `c_n`.
pub fn residual_per_sample<T: Scalar>(
    y: &[T],
    ms: &MomentSequence<T>,
    sps: usize,
    h: &[T],
    hq: Option<&SymMatrix<T>>,
    center: usize,
) -> Result<Residual<T>> {
    Ok(run(y, ms, sps, h, hq, center, Mode::PerSample)?.0)
}

/// `C` and `dC` with respect to the moments and both kernels.
pub fn residual_with_grad<T: Scalar>(
    y: &[T],
    ms: &MomentSequence<T>,
    sps: usize,
    h: &[T],
    hq: Option<&SymMatrix<T>>,
    center: usize,
) -> Result<ResidualGrad<T>> {
    let (res, grad) = run(y, ms, sps, h, hq, center, Mode::Gradient)?;
    let (d_moments, d_h, d_hq) = grad.expect("gradient requested");
    Ok(ResidualGrad { total: res.total, d_moments, d_h, d_hq })
}

#[derive(Clone, Copy, PartialEq)]
enum Mode {
    Value,
    PerSample,
    Gradient,
}

type Grads<T> = (MomentSequence<T>, Vec<T>, Option<SymMatrix<T>>);

#[allow(clippy::too_many_arguments)]
fn run<T: Scalar>(
    y: &[T],
    ms: &MomentSequence<T>,
    sps: usize,
    h: &[T],
    hq: Option<&SymMatrix<T>>,
    center: usize,
    mode: Mode,
) -> Result<(Residual<T>, Option<Grads<T>>)> {
    if sps == 0 {
        return Err(Error::InvalidParameter("samples per symbol must be at least 1".into()));
    }
    let l = h.len();
    if let Some(hq) = hq {
        if hq.dim() != l {
            return Err(Error::Dimension(format!("{l}-tap h with a {0}x{0} H", hq.dim())));
        }
    }
    if !all_finite(y) {
        return Err(Error::NonFinite("received samples"));
    }
    if !(all_finite(&ms.m1) && all_finite(&ms.m2) && all_finite(&ms.m3) && all_finite(&ms.m4)) {
        return Err(Error::NonFinite("moment sequence"));
    }

    let (two, three, four, six) = (T::of(2.0), T::of(3.0), T::of(4.0), T::of(6.0));
    let n_up = (ms.len() * sps) as isize;

    // scratch, indexed by active slot
    let mut pos = Vec::with_capacity(l); // window index
    let mut sym = Vec::with_capacity(l); // symbol index
    let mut mu = Vec::with_capacity(l);
    let mut var = Vec::with_capacity(l);
    let mut k3 = Vec::with_capacity(l);
    let mut k4 = Vec::with_capacity(l);
    let mut hd = Vec::with_capacity(l); // H_ii
    let mut g = Vec::with_capacity(l);
    let mut gam = Vec::with_capacity(l);
    let mut w = Vec::with_capacity(l);
    let mut hg = Vec::with_capacity(l);

    let want_grad = mode == Mode::Gradient;
    let mut d_ms = if want_grad { MomentSequence::zeros(ms.len()) } else { MomentSequence::zeros(0) };
    let mut d_h = if want_grad { vec![T::zero(); l] } else { Vec::new() };
    let mut d_hq = match (want_grad, hq) {
        (true, Some(_)) => Some(SymMatrix::zeros(l)),
        _ => None,
    };

    let mut per_sample = if mode == Mode::PerSample { Vec::with_capacity(y.len()) } else { Vec::new() };
    let mut total = T::zero();

    for (t, &yt) in y.iter().enumerate() {
        pos.clear();
        sym.clear();
        mu.clear();
        var.clear();
        k3.clear();
        k4.clear();
        for i in 0..l {
            let q = t as isize + center as isize - i as isize;
            if q < 0 || q >= n_up || !(q as usize).is_multiple_of(sps) {
                continue;
            }
            let s = q as usize / sps;
            let (m1, m2, m3, m4) = (ms.m1[s], ms.m2[s], ms.m3[s], ms.m4[s]);
            pos.push(i);
            sym.push(s);
            mu.push(m1);
            var.push(m2 - m1 * m1);
            k3.push(m3 - three * m2 * m1 + two * m1 * m1 * m1);
            k4.push(m4 - four * m3 * m1 - three * m2 * m2 + T::of(12.0) * m2 * m1 * m1 - six * m1 * m1 * m1 * m1);
        }
        let k = pos.len();

        let mut mean = T::zero();
        for a in 0..k {
            mean += h[pos[a]] * mu[a];
        }
        g.clear();
        hd.clear();
        w.clear();
        match hq {
            None => {
                for a in 0..k {
                    g.push(h[pos[a]]);
                }
            }
            Some(hq) => {
                // p = H mu, w = (H o H) v over the active slots
                let mut s2 = T::zero();
                let mut dsum = T::zero();
                for a in 0..k {
                    let mut p = T::zero();
                    let mut wa = T::zero();
                    for b in 0..k {
                        let hab = hq.get(pos[a], pos[b]);
                        p += hab * mu[b];
                        wa += hab * hab * var[b];
                    }
                    let haa = hq.get(pos[a], pos[a]);
                    hd.push(haa);
                    w.push(wa);
                    s2 += mu[a] * p;
                    dsum += haa * var[a];
                    g.push(h[pos[a]] + two * p);
                }
                mean = mean + s2 + dsum;
            }
        }

        let mut vsum = T::zero();
        for a in 0..k {
            vsum += g[a] * g[a] * var[a];
        }
        if hq.is_some() {
            let mut skew = T::zero();
            let mut kurt = T::zero();
            let mut pair = T::zero();
            for a in 0..k {
                skew += g[a] * hd[a] * k3[a];
                kurt += hd[a] * hd[a] * k4[a];
                pair += var[a] * w[a];
            }
            vsum = vsum + two * skew + kurt + two * pair;
        }

        let r = yt - mean;
        let c = r * r + vsum;
        total += c;
        if mode == Mode::PerSample {
            per_sample.push(c);
        }
        if !want_grad {
            continue;
        }

        let m2r = -two * r;
        gam.clear();
        for a in 0..k {
            let mut ga = two * g[a] * var[a];
            if hq.is_some() {
                ga += two * hd[a] * k3[a];
            }
            gam.push(ga);
        }

        hg.clear();
        if let Some(hq) = hq {
            for a in 0..k {
                let mut acc = T::zero();
                for b in 0..k {
                    acc += hq.get(pos[a], pos[b]) * gam[b];
                }
                hg.push(acc);
            }
        }

        for a in 0..k {
            let (gmu, gv, gk3, gk4) = if hq.is_some() {
                (m2r * g[a] + two * hg[a], m2r * hd[a] + g[a] * g[a] + four * w[a], two * g[a] * hd[a], hd[a] * hd[a])
            } else {
                (m2r * g[a], g[a] * g[a], T::zero(), T::zero())
            };
            let s = sym[a];
            let m1 = mu[a];
            let m2 = ms.m2[s];
            let m3 = ms.m3[s];
            d_ms.m4[s] += gk4;
            d_ms.m3[s] += gk3 - four * m1 * gk4;
            d_ms.m2[s] += gv - three * m1 * gk3 + (T::of(12.0) * m1 * m1 - six * m2) * gk4;
            d_ms.m1[s] += gmu - two * m1 * gv
                + (six * m1 * m1 - three * m2) * gk3
                + (T::of(24.0) * m2 * m1 - four * m3 - T::of(24.0) * m1 * m1 * m1) * gk4;

            d_h[pos[a]] += m2r * mu[a] + gam[a];
        }

        if let (Some(hq), Some(dq)) = (hq, d_hq.as_mut()) {
            for a in 0..k {
                let (ia, ma, va) = (pos[a], mu[a], var[a]);
                let diag = m2r * (ma * ma + va)
                    + two * gam[a] * ma
                    + two * g[a] * k3[a]
                    + two * hd[a] * k4[a]
                    + four * hd[a] * va * va;
                dq.add_at(ia, ia, diag);
                for b in (a + 1)..k {
                    let (ib, mb, vb) = (pos[b], mu[b], var[b]);
                    let off =
                        two * m2r * ma * mb + two * (gam[a] * mb + gam[b] * ma) + T::of(8.0) * hq.get(ia, ib) * va * vb;
                    dq.add_at(ia, ib, off);
                }
            }
        }
    }

    let residual = Residual { total, per_sample };
    let grads = if want_grad { Some((d_ms, d_h, d_hq)) } else { None };
    Ok((residual, grads))
}
