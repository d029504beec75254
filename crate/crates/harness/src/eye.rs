//! Eye-diagram and modulator-curve export for the IM/DD link.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use blindeq::channels::{mzm, simulate_imdd_eye, ImddConfig, SPS_CHANNEL};
use blindeq::qstats::Constellation;

/// Symbols per eye trace.
pub const EYE_SPAN: usize = 2;

/// Matched-filter output at 4 samples per symbol, folded into traces of
/// [`EYE_SPAN`] symbols starting half a symbol before a decision instant.
pub fn eye_traces(cfg: &ImddConfig, n_symbols: usize, seed: u64) -> blindeq::Result<Vec<Vec<f64>>> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let c = Constellation::<f64>::pam4();
    let idx: Vec<usize> = (0..n_symbols).map(|_| rng.gen_range(0..c.len())).collect();
    let rx: Vec<f64> = simulate_imdd_eye(&c.symbols(&idx), cfg, &mut rng)?;
    let len = EYE_SPAN * SPS_CHANNEL;
    let half = SPS_CHANNEL / 2;
    Ok((1..n_symbols.saturating_sub(EYE_SPAN))
        .map(|k| rx[k * SPS_CHANNEL - half..k * SPS_CHANNEL - half + len + 1].to_vec())
        .collect())
}

/// `trace,t,value` with `t` in symbol periods relative to the decision
/// instant.
pub fn eye_csv(traces: &[Vec<f64>]) -> String {
    let mut s = String::from("trace,t,value\n");
    let half = (SPS_CHANNEL / 2) as f64;
    for (k, tr) in traces.iter().enumerate() {
        for (i, v) in tr.iter().enumerate() {
            s.push_str(&format!("{k},{},{v:e}\n", (i as f64 - half) / SPS_CHANNEL as f64));
        }
    }
    s
}

/// Same content, one gnuplot block per trace.
pub fn eye_dat(traces: &[Vec<f64>]) -> String {
    let mut s = String::from("# t value\n");
    let half = (SPS_CHANNEL / 2) as f64;
    for tr in traces {
        for (i, v) in tr.iter().enumerate() {
            s.push_str(&format!("{} {v:e}\n", (i as f64 - half) / SPS_CHANNEL as f64));
        }
        s.push('\n');
    }
    s
}

/// `voltage,field,power` over `[-vpp/2, vpp/2]` (the DAC output range),
/// `n` points.
pub fn mzm_curve_csv(cfg: &ImddConfig, n: usize) -> String {
    let n = n.max(2);
    let v: Vec<f64> = (0..n).map(|i| -cfg.vpp / 2.0 + cfg.vpp * i as f64 / (n - 1) as f64).collect();
    let e = mzm(&v, cfg.p_in, cfg.v_pi, cfg.v_b, cfg.mzm_pi);
    let mut s = String::from("voltage,field,power\n");
    for (x, y) in v.iter().zip(&e) {
        s.push_str(&format!("{x:e},{y:e},{:e}\n", y * y));
    }
    s
}
