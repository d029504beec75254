//! Term-by-term moment expansion of the expected squared residual.
//!
//! Every sum below runs over all index tuples without exclusions; the
//! correction families then remove the overcounted coincident indices.
//! Written as plain nested loops on purpose: this is the slow reference the
//! factorized evaluator in [`super::fast`] is checked against.

use super::{LinearChannelModel, MomentWindow, Residual, VolterraChannelModel};
use crate::error::{Error, Result};
use crate::qstats::MomentSequence;
use crate::scalar::{all_finite, Scalar};
use crate::sym::SymMatrix;

fn check_inputs<T: Scalar>(y: &[T], ms: &MomentSequence<T>) -> Result<()> {
    if !all_finite(y) {
        return Err(Error::NonFinite("received samples"));
    }
    if !(all_finite(&ms.m1) && all_finite(&ms.m2) && all_finite(&ms.m3) && all_finite(&ms.m4)) {
        return Err(Error::NonFinite("moment sequence"));
    }
    Ok(())
}

fn check_window<T: Scalar>(w: &MomentWindow<T>, dim: usize) -> Result<()> {
    if w.len() != dim {
        return Err(Error::Dimension(format!("window of {} moments for a {dim}-tap kernel", w.len())));
    }
    Ok(())
}

/// `E[x]^T h`.
pub fn mean_linear<T: Scalar>(w: &MomentWindow<T>, h: &[T]) -> T {
    w.m1.iter().zip(h).map(|(&m, &h)| m * h).sum()
}

/// `E[(x^T h)^2] = (E[x]^T h)^2 + sum_i (E[x_i^2] - E[x_i]^2) h_i^2`.
pub fn second_linear<T: Scalar>(w: &MomentWindow<T>, h: &[T]) -> T {
    let s = mean_linear(w, h);
    let var: T = (0..h.len()).map(|i| (w.m2[i] - w.m1[i] * w.m1[i]) * h[i] * h[i]).sum();
    s * s + var
}

/// `E[x^T H x] = sum_{i != j} E[x_i] E[x_j] H_ij + sum_i E[x_i^2] H_ii`.
pub fn mean_quad<T: Scalar>(w: &MomentWindow<T>, hq: &SymMatrix<T>) -> T {
    let l = hq.dim();
    let mut acc = T::zero();
    for i in 0..l {
        for j in 0..l {
            if i != j {
                acc += w.m1[i] * w.m1[j] * hq.get(i, j);
            }
        }
    }
    for i in 0..l {
        acc += w.m2[i] * hq.get(i, i);
    }
    acc
}

/// `E[(x^T h)(x^T H x)]`.
pub fn cross_moment<T: Scalar>(w: &MomentWindow<T>, h: &[T], hq: &SymMatrix<T>) -> Result<T> {
    let l = hq.dim();
    if h.len() != l {
        return Err(Error::Dimension(format!("{}-tap h with a {l}x{l} H", h.len())));
    }
    check_window(w, l)?;
    let (m1, m2, m3) = (&w.m1, &w.m2, &w.m3);
    let (two, three) = (T::of(2.0), T::of(3.0));

    let mut lead = T::zero();
    for i in 0..l {
        for j in 0..l {
            for k in 0..l {
                lead += m1[i] * m1[j] * m1[k] * h[i] * hq.get(j, k);
            }
        }
    }

    let mut pair = T::zero();
    for i in 0..l {
        for j in 0..l {
            let moment = m2[i] * m1[j] - m1[i] * m1[i] * m1[j];
            let kernel = two * h[i] * hq.get(i, j) + h[j] * hq.get(i, i);
            pair += moment * kernel;
        }
    }

    let mut single = T::zero();
    for i in 0..l {
        let moment = m3[i] - three * m2[i] * m1[i] + two * m1[i] * m1[i] * m1[i];
        single += moment * h[i] * hq.get(i, i);
    }

    Ok(lead + pair + single)
}

/// `E[(x^T H x)^2]`.
pub fn quad_sq_moment<T: Scalar>(w: &MomentWindow<T>, hq: &SymMatrix<T>) -> Result<T> {
    let l = hq.dim();
    check_window(w, l)?;
    let (m1, m2, m3, m4) = (&w.m1, &w.m2, &w.m3, &w.m4);
    let c = |x: f64| T::of(x);

    let mut lead = T::zero();
    for i in 0..l {
        for j in 0..l {
            for k in 0..l {
                for q in 0..l {
                    lead += m1[i] * m1[j] * m1[k] * m1[q] * hq.get(i, j) * hq.get(k, q);
                }
            }
        }
    }

    let mut triple = T::zero();
    for i in 0..l {
        for j in 0..l {
            for k in 0..l {
                let moment = m2[i] * m1[j] * m1[k] - m1[i] * m1[i] * m1[j] * m1[k];
                let kernel = c(2.0) * hq.get(i, i) * hq.get(j, k) + c(4.0) * hq.get(i, j) * hq.get(i, k);
                triple += moment * kernel;
            }
        }
    }

    let mut pair_sq = T::zero();
    let mut pair_cube = T::zero();
    for i in 0..l {
        for j in 0..l {
            let moment = m2[i] * m2[j] - m2[i] * m1[j] * m1[j] - m1[i] * m1[i] * m2[j] + m1[i] * m1[i] * m1[j] * m1[j];
            let hij = hq.get(i, j);
            pair_sq += moment * (c(2.0) * hij * hij + hq.get(i, i) * hq.get(j, j));

            let moment = m3[i] * m1[j] - c(3.0) * m2[i] * m1[i] * m1[j] + c(2.0) * m1[i] * m1[i] * m1[i] * m1[j];
            pair_cube += moment * c(4.0) * hq.get(i, i) * hij;
        }
    }

    let mut single = T::zero();
    for i in 0..l {
        let mu = m1[i];
        let moment = m4[i] + c(12.0) * m2[i] * mu * mu
            - c(3.0) * m2[i] * m2[i]
            - c(4.0) * m3[i] * mu
            - c(6.0) * mu * mu * mu * mu;
        let hii = hq.get(i, i);
        single += moment * hii * hii;
    }

    Ok(lead + triple + pair_sq + pair_cube + single)
}

/// `c_n = y_n^2 - 2 y_n E[x_n]^T h + E[(x_n^T h)^2]` for every sample.
///
/// `ms` is indexed at the sample rate (already zero-stuffed).
pub fn residual_linear<T: Scalar>(
    y: &[T],
    ms: &MomentSequence<T>,
    model: &LinearChannelModel<T>,
) -> Result<Residual<T>> {
    check_inputs(y, ms)?;
    let two = T::of(2.0);
    let per_sample: Vec<T> = (0..y.len())
        .map(|t| {
            let w = MomentWindow::gather(ms, t, model.h.len(), model.center);
            let yt = y[t];
            yt * yt - two * yt * mean_linear(&w, &model.h) + second_linear(&w, &model.h)
        })
        .collect();
    let total = per_sample.iter().copied().sum();
    Ok(Residual { total, per_sample })
}

/// Six-term expansion of `E[(y_n - x^T h - x^T H x)^2]` for every sample.
///
/// Terms are accumulated in the order of [`residual_linear`] first, so a
/// zero `H` reproduces it exactly.
pub fn residual_volterra<T: Scalar>(
    y: &[T],
    ms: &MomentSequence<T>,
    model: &VolterraChannelModel<T>,
) -> Result<Residual<T>> {
    check_inputs(y, ms)?;
    let two = T::of(2.0);
    let mut per_sample = Vec::with_capacity(y.len());
    for t in 0..y.len() {
        let w = MomentWindow::gather(ms, t, model.h.len(), model.center);
        let yt = y[t];
        let mut c = yt * yt - two * yt * mean_linear(&w, &model.h) + second_linear(&w, &model.h);
        c -= two * yt * mean_quad(&w, &model.hq);
        c += two * cross_moment(&w, &model.h, &model.hq)?;
        c += quad_sq_moment(&w, &model.hq)?;
        per_sample.push(c);
    }
    let total = per_sample.iter().copied().sum();
    Ok(Residual { total, per_sample })
}
