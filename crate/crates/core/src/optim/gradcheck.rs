//! Central finite-difference check of analytic gradients.

use crate::scalar::Scalar;

/// Relative step: `h = rel_step * max(1, |p|)`.
pub const DEFAULT_REL_STEP: f64 = 1e-6;

#[derive(Debug, Clone, PartialEq)]
pub struct GradCheckReport {
    pub max_rel_error: f64,
    /// Coordinate where the worst error occurred.
    pub worst: usize,
    pub analytic: Vec<f64>,
    pub numeric: Vec<f64>,
}

/// Compares `analytic` against central differences of `f` at the listed
/// coordinates (all of them when `coords` is `None`).
///
/// The relative error of coordinate `k` is
/// `|a_k - n_k| / max(|a_k|, |n_k|, 1e-3 * max_j |n_j|)`: coordinates whose
/// true derivative is negligible next to the largest one are judged on an
/// absolute scale instead of amplifying rounding noise.
pub fn grad_check<T, F>(
    mut f: F,
    params: &[T],
    analytic: &[T],
    coords: Option<&[usize]>,
    rel_step: f64,
) -> GradCheckReport
where
    T: Scalar,
    F: FnMut(&[T]) -> T,
{
    let all: Vec<usize>;
    let coords = match coords {
        Some(c) => c,
        None => {
            all = (0..params.len()).collect();
            &all
        }
    };
    let mut p = params.to_vec();
    let mut numeric = Vec::with_capacity(coords.len());
    for &k in coords {
        let x = params[k];
        let h = T::of(rel_step) * x.abs().max(T::one());
        p[k] = x + h;
        let up = f(&p);
        p[k] = x - h;
        let down = f(&p);
        p[k] = x;
        // use the step actually representable around x
        let span = (x + h) - (x - h);
        numeric.push(((up - down) / span).f64());
    }
    let analytic: Vec<f64> = coords.iter().map(|&k| analytic[k].f64()).collect();
    let scale = numeric.iter().fold(0.0f64, |m, v| m.max(v.abs()));
    let floor = (1e-3 * scale).max(f64::MIN_POSITIVE);
    let mut max_rel_error = 0.0;
    let mut worst = coords.first().copied().unwrap_or(0);
    for (i, (&a, &n)) in analytic.iter().zip(&numeric).enumerate() {
        let err = (a - n).abs() / a.abs().max(n.abs()).max(floor);
        if err > max_rel_error || err.is_nan() {
            max_rel_error = if err.is_nan() { f64::INFINITY } else { err };
            worst = coords[i];
        }
    }
    GradCheckReport { max_rel_error, worst, analytic, numeric }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn quad(p: &[f64]) -> f64 {
        3.0 * p[0] * p[0] - 2.0 * p[0] * p[1] + 0.5 * p[1] * p[1] + 4.0 * p[2]
    }

    fn quad_grad(p: &[f64]) -> Vec<f64> {
        vec![6.0 * p[0] - 2.0 * p[1], -2.0 * p[0] + p[1], 4.0]
    }

    #[test]
    fn exact_on_quadratics() {
        let p = [0.7, -1.3, 250.0];
        let r = grad_check(quad, &p, &quad_grad(&p), None, DEFAULT_REL_STEP);
        assert!(r.max_rel_error < 1e-9, "{}", r.max_rel_error);
    }

    #[test]
    fn detects_doubled_coordinate() {
        let p = [0.7, -1.3, 2.0];
        let mut g = quad_grad(&p);
        g[0] *= 2.0;
        let r = grad_check(quad, &p, &g, None, DEFAULT_REL_STEP);
        assert!(r.max_rel_error > 0.3);
        assert_eq!(r.worst, 0);
    }

    #[test]
    fn subset_of_coordinates() {
        let p = [0.7, -1.3, 2.0];
        let mut g = quad_grad(&p);
        g[0] = 100.0;
        let r = grad_check(quad, &p, &g, Some(&[1, 2]), DEFAULT_REL_STEP);
        assert!(r.max_rel_error < 1e-9);
        assert_eq!(r.analytic.len(), 2);
    }
}
