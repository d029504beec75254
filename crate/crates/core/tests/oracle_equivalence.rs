mod common;

use proptest::prelude::*;

use blindeq::elbo::oracle::{oracle_residual, window_expectation, Slot};
use blindeq::elbo::{fast, reference, LinearChannelModel, MomentWindow, VolterraChannelModel};
use blindeq::qstats::{compute_moments, upsample_moments, Constellation};
use common::{close, random_probs, random_sym, rng, uniform};

fn slots<'a>(
    probs: &'a blindeq::qstats::SymbolProbabilities<f64>,
    t: usize,
    l: usize,
    center: usize,
    sps: usize,
) -> Vec<Slot<'a, f64>> {
    let n_up = (probs.len() * sps) as isize;
    (0..l)
        .map(|i| {
            let q = t as isize + center as isize - i as isize;
            if q < 0 || q >= n_up || !(q as usize).is_multiple_of(sps) {
                Slot::Zero
            } else {
                Slot::Random(probs.row(q as usize / sps))
            }
        })
        .collect()
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(256))]

    #[test]
    fn residuals_match_enumeration(seed in any::<u64>(), l in 1usize..=4, m in prop::sample::select(vec![2usize, 4]), sps in 1usize..=3) {
        let mut r = rng(seed);
        let c = Constellation::<f64>::pam(m);
        let n = 5;
        let probs = random_probs(&mut r, n, m);
        let ms = compute_moments(&probs, &c).unwrap();
        let up = upsample_moments(&ms, sps).unwrap();
        let y = uniform(&mut r, n * sps, 4.0);
        let h = uniform(&mut r, l, 1.0);
        let hq = random_sym(&mut r, l, 0.4);
        let center = (seed as usize) % l;

        let lin = LinearChannelModel::new(h.clone(), center, 1.0).unwrap();
        let vol = VolterraChannelModel::new(h.clone(), hq.clone(), center, 1.0).unwrap();
        let o_lin = oracle_residual(&probs, &c, &y, &h, None, center, sps).unwrap();
        let o_vol = oracle_residual(&probs, &c, &y, &h, Some(&hq), center, sps).unwrap();
        let candidates = [
            (&o_lin, reference::residual_linear(&y, &up, &lin).unwrap()),
            (&o_lin, fast::residual_per_sample(&y, &ms, sps, &h, None, center).unwrap()),
            (&o_vol, reference::residual_volterra(&y, &up, &vol).unwrap()),
            (&o_vol, fast::residual_per_sample(&y, &ms, sps, &h, Some(&hq), center).unwrap()),
        ];
        for (o, got) in &candidates {
            prop_assert!(close(got.total, o.total, 1e-10), "{} vs {}", got.total, o.total);
            for (a, b) in got.per_sample.iter().zip(&o.per_sample) {
                prop_assert!(close(*a, *b, 1e-10), "{a} vs {b}");
            }
        }
    }

    #[test]
    fn higher_order_terms_match_enumeration(seed in any::<u64>(), l in 1usize..=4, m in prop::sample::select(vec![2usize, 4])) {
        let mut r = rng(seed);
        let c = Constellation::<f64>::pam(m);
        let probs = random_probs(&mut r, 6, m);
        let up = compute_moments(&probs, &c).unwrap();
        let h = uniform(&mut r, l, 1.0);
        let hq = random_sym(&mut r, l, 0.5);
        let dense = hq.to_full();
        let quad = |x: &[f64]| -> f64 { (0..l).map(|i| (0..l).map(|j| x[i] * dense[i * l + j] * x[j]).sum::<f64>()).sum() };
        let lin = |x: &[f64]| -> f64 { x.iter().zip(&h).map(|(a, b)| a * b).sum() };
        for t in 0..6 {
            let s = slots(&probs, t, l, 0, 1);
            let w = MomentWindow::gather(&up, t, l, 0);
            let cross = reference::cross_moment(&w, &h, &hq).unwrap();
            let cross_o = window_expectation(&s, &c, |x| lin(x) * quad(x)).unwrap();
            let scale = window_expectation(&s, &c, |x| (lin(x) * quad(x)).abs()).unwrap();
            prop_assert!((cross - cross_o).abs() <= 1e-10 * cross_o.abs().max(1e-9 * scale), "{cross} vs {cross_o}");
            let sq = reference::quad_sq_moment(&w, &hq).unwrap();
            let sq_o = window_expectation(&s, &c, |x| quad(x).powi(2)).unwrap();
            prop_assert!(close(sq, sq_o, 1e-10), "{sq} vs {sq_o}");
        }
    }

    #[test]
    fn residual_is_nonnegative(seed in any::<u64>(), l in 1usize..=9) {
        let mut r = rng(seed);
        let c = Constellation::<f64>::pam4();
        let probs = random_probs(&mut r, 40, 4);
        let ms = compute_moments(&probs, &c).unwrap();
        let y = uniform(&mut r, 80, 4.0);
        let h = uniform(&mut r, l, 1.0);
        let hq = random_sym(&mut r, l, 0.3);
        let res = fast::residual_per_sample(&y, &ms, 2, &h, Some(&hq), l / 2).unwrap();
        prop_assert!(res.per_sample.iter().all(|&v| v >= -1e-9 * res.total.max(1.0)));
    }
}

#[test]
fn oracle_refuses_oversized_windows() {
    let c = Constellation::<f64>::pam4();
    let mut r = rng(1);
    let probs = random_probs(&mut r, 4, 4);
    let h = vec![0.1; 12];
    assert!(oracle_residual(&probs, &c, &[0.0; 4], &h, None, 0, 1).is_err());
}
