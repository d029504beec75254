use num_complex::Complex;

use crate::error::{Error, Result};
use crate::scalar::Scalar;

/// Coefficients of the reverse Bessel polynomial of order `n`, lowest
/// power first: `a_k = (2n - k)! / (2^(n-k) k! (n-k)!)`.
pub fn reverse_bessel_poly(n: usize) -> Vec<f64> {
    let fact = |k: usize| (1..=k).fold(1.0f64, |acc, i| acc * i as f64);
    (0..=n).map(|k| fact(2 * n - k) / (2f64.powi((n - k) as i32) * fact(k) * fact(n - k))).collect()
}

fn eval(poly: &[f64], s: Complex<f64>) -> Complex<f64> {
    poly.iter().rev().fold(Complex::new(0.0, 0.0), |acc, &c| acc * s + c)
}

/// All roots of a polynomial with real coefficients (lowest power first)
/// by Aberth iteration.
fn roots(poly: &[f64]) -> Vec<Complex<f64>> {
    let n = poly.len() - 1;
    let lead = poly[n];
    let monic: Vec<f64> = poly.iter().map(|c| c / lead).collect();
    let deriv: Vec<f64> = (1..=n).map(|k| k as f64 * monic[k]).collect();
    // start on a circle with an irrational twist so no two guesses coincide
    let radius = 1.0 + monic[..n].iter().fold(0.0f64, |m, c| m.max(c.abs())).powf(1.0 / n as f64);
    let mut z: Vec<Complex<f64>> =
        (0..n).map(|k| Complex::from_polar(radius, 0.4 + 2.0 * std::f64::consts::PI * k as f64 / n as f64)).collect();
    for _ in 0..500 {
        let mut moved = 0.0f64;
        for i in 0..n {
            let ratio = eval(&monic, z[i]) / eval(&deriv, z[i]);
            let repulsion: Complex<f64> = (0..n).filter(|&j| j != i).map(|j| (z[i] - z[j]).inv()).sum();
            let step = ratio / (Complex::new(1.0, 0.0) - ratio * repulsion);
            z[i] -= step;
            moved = moved.max(step.norm());
        }
        if moved < 1e-15 {
            break;
        }
    }
    z
}

/// One second-order section, `a[0] = 1`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Biquad {
    pub b: [f64; 3],
    pub a: [f64; 3],
}

impl Biquad {
    fn response(&self, z_inv: Complex<f64>) -> Complex<f64> {
        let num = self.b[0] + z_inv * (self.b[1] + z_inv * self.b[2]);
        let den = self.a[0] + z_inv * (self.a[1] + z_inv * self.a[2]);
        num / den
    }
}

/// Digital Bessel low-pass as a cascade of second-order sections.
#[derive(Debug, Clone, PartialEq)]
pub struct BesselFilter {
    pub sections: Vec<Biquad>,
    pub cutoff_hz: f64,
    pub sample_rate: f64,
}

/// Bessel low-pass of the given order with its -3 dB point at `cutoff_hz`.
///
/// The analog prototype is scaled to unit -3 dB frequency, the cutoff is
/// prewarped and the poles are mapped with the bilinear transform. Each
/// section has unit DC gain.
pub fn bessel_lowpass(order: usize, cutoff_hz: f64, sample_rate: f64) -> Result<BesselFilter> {
    if order == 0 || order > 20 {
        return Err(Error::InvalidParameter(format!("Bessel order {order} outside 1..=20")));
    }
    if !(cutoff_hz > 0.0 && cutoff_hz < sample_rate / 2.0) {
        return Err(Error::InvalidParameter(format!(
            "cutoff {cutoff_hz} Hz must lie in (0, {}) Hz",
            sample_rate / 2.0
        )));
    }
    let poly = reverse_bessel_poly(order);
    // |H(jw)|^2 = a0^2 / |theta(jw)|^2 falls monotonically; bisect for 1/2
    let gain2 = |w: f64| (poly[0] / eval(&poly, Complex::new(0.0, w)).norm()).powi(2);
    let (mut lo, mut hi) = (0.0, 1.0);
    while gain2(hi) > 0.5 {
        hi *= 2.0;
    }
    for _ in 0..200 {
        let mid = 0.5 * (lo + hi);
        if gain2(mid) > 0.5 {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    let w3 = 0.5 * (lo + hi);

    let k = 2.0 * sample_rate;
    let wc = k * (std::f64::consts::PI * cutoff_hz / sample_rate).tan();
    let mut poles: Vec<Complex<f64>> = roots(&poly).into_iter().map(|p| p / w3 * wc).collect();
    poles.sort_by(|a, b| a.im.total_cmp(&b.im));

    let mut sections = Vec::new();
    for p in poles {
        if p.im.abs() <= 1e-9 * p.norm() {
            let p = p.re;
            let a0 = k - p;
            sections.push(Biquad { b: [-p / a0, -p / a0, 0.0], a: [1.0, (-k - p) / a0, 0.0] });
        } else if p.im > 0.0 {
            let (re, m2) = (p.re, p.norm_sqr());
            let a0 = k * k - 2.0 * re * k + m2;
            sections.push(Biquad {
                b: [m2 / a0, 2.0 * m2 / a0, m2 / a0],
                a: [1.0, (2.0 * m2 - 2.0 * k * k) / a0, (k * k + 2.0 * re * k + m2) / a0],
            });
        }
    }
    Ok(BesselFilter { sections, cutoff_hz, sample_rate })
}

impl BesselFilter {
    /// Filters `x` from a zero initial state.
    pub fn apply<T: Scalar>(&self, x: &[T]) -> Vec<T> {
        let mut buf: Vec<f64> = x.iter().map(|v| v.f64()).collect();
        for s in &self.sections {
            let (mut z1, mut z2) = (0.0, 0.0);
            for v in buf.iter_mut() {
                let input = *v;
                let out = s.b[0] * input + z1;
                z1 = s.b[1] * input - s.a[1] * out + z2;
                z2 = s.b[2] * input - s.a[2] * out;
                *v = out;
            }
        }
        buf.into_iter().map(T::of).collect()
    }

    /// Complex response at `f` Hz.
    pub fn response(&self, f: f64) -> Complex<f64> {
        let z_inv = Complex::from_polar(1.0, -2.0 * std::f64::consts::PI * f / self.sample_rate);
        self.sections.iter().map(|s| s.response(z_inv)).product()
    }

    /// `20 log10 |H(f)|`.
    pub fn magnitude_db(&self, f: f64) -> f64 {
        20.0 * self.response(f).norm().log10()
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn fifth_order_polynomial() {
        assert_eq!(reverse_bessel_poly(5), vec![945.0, 945.0, 420.0, 105.0, 15.0, 1.0]);
        assert_eq!(reverse_bessel_poly(2), vec![3.0, 3.0, 1.0]);
    }

    #[test]
    fn roots_are_roots() {
        let poly = reverse_bessel_poly(5);
        let r = roots(&poly);
        assert_eq!(r.len(), 5);
        for z in r {
            assert!(eval(&poly, z).norm() < 1e-8 * 945.0);
            assert!(z.re < 0.0);
        }
    }

    #[test]
    fn minus_three_db_at_cutoff() {
        let f = bessel_lowpass(5, 55e9, 400e9).unwrap();
        assert_eq!(f.sections.len(), 3);
        let g = f.magnitude_db(55e9);
        assert!((g + 10.0 * 2f64.log10()).abs() < 0.01, "{g}");
    }

    #[test]
    fn unity_dc_gain() {
        let f = bessel_lowpass(5, 55e9, 400e9).unwrap();
        assert!((f.response(0.0).norm() - 1.0).abs() < 1e-12);
        let y = f.apply(&vec![0.7f64; 400]);
        assert!((y[399] - 0.7).abs() < 1e-6);
    }

    #[test]
    fn magnitude_non_increasing_to_nyquist() {
        let f = bessel_lowpass(5, 55e9, 400e9).unwrap();
        let mut prev = f64::INFINITY;
        for i in 0..=2000 {
            let g = f.response(i as f64 * 200e9 / 2000.0).norm();
            assert!(g <= prev + 1e-12, "bin {i}");
            prev = g;
        }
    }

    #[test]
    fn measured_response_of_a_tone() {
        let f = bessel_lowpass(5, 55e9, 400e9).unwrap();
        let fs = 400e9;
        let tone: Vec<f64> = (0..8000).map(|i| (2.0 * std::f64::consts::PI * 55e9 * i as f64 / fs).sin()).collect();
        let y = f.apply(&tone);
        let rms = |v: &[f64]| (v.iter().map(|x| x * x).sum::<f64>() / v.len() as f64).sqrt();
        let g = 20.0 * (rms(&y[4000..]) / rms(&tone[4000..])).log10();
        assert!((g + 3.0).abs() < 0.2, "{g}");
    }

    #[test]
    fn rejects_cutoff_above_nyquist() {
        assert!(bessel_lowpass(5, 250e9, 400e9).is_err());
    }
}
