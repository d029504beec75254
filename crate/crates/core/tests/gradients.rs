mod common;

use proptest::prelude::*;
use rand::Rng;

use blindeq::elbo::{fast, SymbolPrior};
use blindeq::optim::{blind_objective, grad_check, Batch, BlindModel, DEFAULT_REL_STEP};
use blindeq::qstats::{compute_moments, Constellation};
use common::{random_probs, random_sym, rng, uniform};

fn objective_error(volterra: bool, seed: u64, taps1: usize, taps2: usize, channel: usize) -> f64 {
    let mut r = rng(seed);
    let c = Constellation::pam4();
    let prior = SymbolPrior::flat(4);
    let signal = uniform(&mut r, 60, 3.5);
    let batch = Batch { signal: &signal, sps: 2, start: 6, count: 16 };
    let mut model =
        if volterra { BlindModel::v2vae(taps1, taps2, channel, 4) } else { BlindModel::vae(taps1, taps2, channel, 4) };
    let mut p = model.params();
    for v in &mut p {
        *v += 0.2 * r.gen_range(-1.0..1.0);
    }
    model.set_params(&p);
    model.demapper.project();
    let sigma2 = r.gen_range(0.3..2.0);
    let mut g = vec![0.0; model.num_params()];
    blind_objective(&model, &c, &prior, &batch, sigma2, Some(&mut g)).unwrap();
    let f = |q: &[f64]| {
        let mut m = model.clone();
        m.set_params(q);
        blind_objective(&m, &c, &prior, &batch, sigma2, None).unwrap().loss
    };
    grad_check(f, &model.params(), &g, None, DEFAULT_REL_STEP).max_rel_error
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(24))]

    #[test]
    fn vae_gradient(seed in any::<u64>(), taps1 in 1usize..=9, taps2 in 1usize..=5, channel in 1usize..=7) {
        let e = objective_error(false, seed, taps1, taps2, channel);
        prop_assert!(e < 1e-4, "{e}");
    }

    #[test]
    fn v2vae_gradient(seed in any::<u64>(), taps1 in 1usize..=9, taps2 in 1usize..=5, channel in 1usize..=7) {
        let e = objective_error(true, seed, taps1, taps2, channel);
        prop_assert!(e < 1e-4, "{e}");
    }

    #[test]
    fn residual_kernel_gradients(seed in any::<u64>(), l in 1usize..=6, sps in 1usize..=2) {
        let mut r = rng(seed);
        let c = Constellation::pam4();
        let probs = random_probs(&mut r, 12, 4);
        let ms = compute_moments(&probs, &c).unwrap();
        let y = uniform(&mut r, 12 * sps, 3.0);
        let h = uniform(&mut r, l, 1.0);
        let hq = random_sym(&mut r, l, 0.3);
        let center = l / 2;
        let g = fast::residual_with_grad(&y, &ms, sps, &h, Some(&hq), center).unwrap();
        let fh = |p: &[f64]| fast::residual(&y, &ms, sps, p, Some(&hq), center).unwrap();
        prop_assert!(grad_check(fh, &h, &g.d_h, None, DEFAULT_REL_STEP).max_rel_error < 1e-5);
        let d_hq = g.d_hq.unwrap();
        let fq = |p: &[f64]| {
            let q = blindeq::sym::SymMatrix::from_packed(l, p.to_vec()).unwrap();
            fast::residual(&y, &ms, sps, &h, Some(&q), center).unwrap()
        };
        prop_assert!(grad_check(fq, hq.packed(), d_hq.packed(), None, DEFAULT_REL_STEP).max_rel_error < 1e-5);
    }
}
