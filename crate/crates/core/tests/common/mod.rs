#![allow(dead_code)]

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use blindeq::qstats::SymbolProbabilities;
use blindeq::sym::SymMatrix;

pub fn rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

/// Random posterior rows, some of them nearly one-hot.
pub fn random_probs(rng: &mut ChaCha8Rng, n: usize, m: usize) -> SymbolProbabilities<f64> {
    let mut data = Vec::with_capacity(n * m);
    for _ in 0..n {
        let sharp = rng.gen_bool(0.2);
        let row: Vec<f64> =
            (0..m).map(|_| if sharp { rng.gen::<f64>().powi(8) + 1e-9 } else { rng.gen::<f64>() + 0.02 }).collect();
        let s: f64 = row.iter().sum();
        data.extend(row.iter().map(|v| v / s));
    }
    SymbolProbabilities::new(m, data).unwrap()
}

pub fn random_sym(rng: &mut ChaCha8Rng, l: usize, scale: f64) -> SymMatrix<f64> {
    SymMatrix::from_packed(l, (0..l * (l + 1) / 2).map(|_| scale * rng.gen_range(-1.0..1.0)).collect()).unwrap()
}

pub fn uniform(rng: &mut ChaCha8Rng, n: usize, lim: f64) -> Vec<f64> {
    (0..n).map(|_| rng.gen_range(-lim..lim)).collect()
}

pub fn close(a: f64, b: f64, tol: f64) -> bool {
    (a - b).abs() <= tol * b.abs().max(1e-300)
}
