//! Change-point tracking: blind training on a stream whose first WH filter
//! alternates between two systems every segment, at a fixed learning rate.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::Serialize;

use blindeq::dsp::symbol_error_rate;
use blindeq::elbo::SymbolPrior;
use blindeq::optim::{AdamConfig, Batch, BlindModel, BlindTrainer};
use blindeq::qstats::Constellation;

use crate::config::ExperimentConfig;
use crate::runner::{blind_decisions, Link, Method, SPS};
use crate::seeds::derive_seed;
use crate::stats::{ci95, mean, std_dev};

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct TrackRow {
    pub method: Method,
    pub seed: usize,
    pub batch: usize,
    pub segment: usize,
    /// 1 or 2.
    pub system: usize,
    pub loss: f64,
}

/// SER on the held-out set of the active system at the end of a segment.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct SegmentSer {
    pub method: Method,
    pub seed: usize,
    pub segment: usize,
    pub system: usize,
    pub ser: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct TrackingResult {
    pub config_hash: String,
    pub batches_per_segment: usize,
    pub rows: Vec<TrackRow>,
    pub segment_ser: Vec<SegmentSer>,
    /// Runs that failed, as (method, seed, message).
    pub failures: Vec<(Method, usize, String)>,
}

/// System (1 or 2) active in segment `k`.
pub fn system_of(segment: usize, switch: bool) -> usize {
    if switch && segment % 2 == 1 {
        2
    } else {
        1
    }
}

fn stream_seed(cfg: &ExperimentConfig, seed: usize, segment: usize) -> u64 {
    derive_seed(cfg.master_seed, &["tracking", &format!("seed={seed}"), &format!("segment={segment}")])
}

fn validation_seed(cfg: &ExperimentConfig, seed: usize, system: usize) -> u64 {
    derive_seed(cfg.master_seed, &["tracking", &format!("seed={seed}"), &format!("validation={system}")])
}

type Data = (Vec<usize>, Vec<f64>);

struct SeedData {
    segments: Vec<Data>,
    validation: [Data; 2],
}

fn seed_data(cfg: &ExperimentConfig, seed: usize) -> blindeq::Result<SeedData> {
    let t = &cfg.tracking;
    let gen = |system: usize, n: usize, s: u64| {
        Link::Wh(cfg.tracking_link(system - 1)).generate(n, &mut ChaCha8Rng::seed_from_u64(s))
    };
    let segments = (0..t.segments)
        .map(|k| gen(system_of(k, t.switch), t.segment_symbols, stream_seed(cfg, seed, k)))
        .collect::<blindeq::Result<Vec<_>>>()?;
    let validation = [
        gen(1, t.validation_symbols, validation_seed(cfg, seed, 1))?,
        gen(2, t.validation_symbols, validation_seed(cfg, seed, 2))?,
    ];
    Ok(SeedData { segments, validation })
}

fn track_one(
    cfg: &ExperimentConfig,
    method: Method,
    seed: usize,
    data: &SeedData,
) -> blindeq::Result<(Vec<TrackRow>, Vec<SegmentSer>)> {
    let t = &cfg.tracking;
    let s = cfg.sizes;
    let c = Constellation::<f64>::pam4();
    let model = match method {
        Method::Vae => BlindModel::vae(s.taps1, s.taps2, s.channel_taps, c.len()),
        _ => BlindModel::v2vae(s.taps1, s.taps2, s.channel_taps, c.len()),
    };
    let mut trainer = BlindTrainer::new(model, c.clone(), SymbolPrior::flat(c.len()), AdamConfig::default());
    let per_segment = t.segment_symbols / t.batch_size;
    let mut rows = Vec::new();
    let mut sers = Vec::new();
    for (k, (_, rx)) in data.segments.iter().enumerate() {
        let system = system_of(k, t.switch);
        for b in 0..per_segment {
            let batch = Batch { signal: rx, sps: SPS, start: b * t.batch_size, count: t.batch_size };
            let row = trainer.step(&batch, t.lr)?;
            rows.push(TrackRow { method, seed, batch: row.iteration, segment: k, system, loss: row.loss });
        }
        let (truth, vrx) = &data.validation[system - 1];
        let ser = symbol_error_rate(&blind_decisions(&trainer.model, vrx)?, truth)?;
        sers.push(SegmentSer { method, seed, segment: k, system, ser });
    }
    Ok((rows, sers))
}

pub fn run_tracking(cfg: &ExperimentConfig) -> blindeq::Result<TrackingResult> {
    let t = &cfg.tracking;
    let data: Vec<SeedData> =
        (0..cfg.seeds).into_par_iter().map(|s| seed_data(cfg, s)).collect::<blindeq::Result<_>>()?;
    let jobs: Vec<(Method, usize)> = t.methods.iter().flat_map(|&m| (0..cfg.seeds).map(move |s| (m, s))).collect();
    let outs: Vec<_> = jobs.par_iter().map(|&(m, s)| (m, s, track_one(cfg, m, s, &data[s]))).collect();
    let mut res = TrackingResult {
        config_hash: cfg.short_hash(),
        batches_per_segment: t.segment_symbols / t.batch_size,
        rows: Vec::new(),
        segment_ser: Vec::new(),
        failures: Vec::new(),
    };
    for (m, s, out) in outs {
        match out {
            Ok((rows, sers)) => {
                res.rows.extend(rows);
                res.segment_ser.extend(sers);
            }
            Err(e) => res.failures.push((m, s, e.to_string())),
        }
    }
    Ok(res)
}

/// Fraction of each segment, at its end, treated as the plateau.
pub const PLATEAU_FRACTION: f64 = 0.2;

impl TrackingResult {
    pub fn losses(&self, method: Method, seed: usize) -> Vec<f64> {
        self.rows.iter().filter(|r| r.method == method && r.seed == seed).map(|r| r.loss).collect()
    }

    pub fn seeds(&self, method: Method) -> Vec<usize> {
        let mut s: Vec<usize> = self.segment_ser.iter().filter(|r| r.method == method).map(|r| r.seed).collect();
        s.dedup();
        s
    }

    /// Batch indices at which a new segment starts.
    pub fn switch_batches(&self, segments: usize) -> Vec<usize> {
        (1..segments).map(|k| k * self.batches_per_segment).collect()
    }

    /// Per seed: mean loss over the last [`PLATEAU_FRACTION`] of every
    /// segment, averaged over segments.
    pub fn plateau(&self, method: Method) -> Vec<f64> {
        let n = self.batches_per_segment;
        let tail = ((n as f64 * PLATEAU_FRACTION).ceil() as usize).clamp(1, n);
        self.seeds(method)
            .into_iter()
            .map(|s| {
                let l = self.losses(method, s);
                let per: Vec<f64> = l.chunks(n).map(|seg| mean(&seg[seg.len().saturating_sub(tail)..])).collect();
                mean(&per)
            })
            .collect()
    }

    /// Per seed: SER on system `system` averaged over its segments.
    pub fn system_ser(&self, method: Method, system: usize) -> Vec<f64> {
        self.seeds(method)
            .into_iter()
            .map(|s| {
                let v: Vec<f64> = self
                    .segment_ser
                    .iter()
                    .filter(|r| r.method == method && r.seed == s && r.system == system)
                    .map(|r| r.ser)
                    .collect();
                mean(&v)
            })
            .collect()
    }

    pub fn trace_csv(&self) -> String {
        let mut s = String::from("config_hash,method,seed,batch,segment,system,loss\n");
        for r in &self.rows {
            s.push_str(&format!(
                "{},{},{},{},{},{},{:e}\n",
                self.config_hash, r.method, r.seed, r.batch, r.segment, r.system, r.loss
            ));
        }
        s
    }

    pub fn ser_csv(&self) -> String {
        let mut s = String::from("config_hash,method,seed,segment,system,ser\n");
        for r in &self.segment_ser {
            s.push_str(&format!(
                "{},{},{},{},{},{:e}\n",
                self.config_hash, r.method, r.seed, r.segment, r.system, r.ser
            ));
        }
        for (m, seed, e) in &self.failures {
            s.push_str(&format!("{},{m},{seed},,,\"error: {}\"\n", self.config_hash, e.replace('"', "'")));
        }
        s
    }

    /// `method,system,n,mean_ser,ci_low,ci_high,plateau_loss`.
    pub fn summary_csv(&self, methods: &[Method]) -> String {
        let mut s = String::from("method,system,n,mean_ser,ci_low,ci_high,plateau_loss\n");
        for &m in methods {
            let plateau = mean(&self.plateau(m));
            for sys in [1, 2] {
                let v = self.system_ser(m, sys);
                if v.iter().all(|x| x.is_nan()) {
                    continue;
                }
                let ci = ci95(&v);
                s.push_str(&format!("{m},{sys},{},{:e},{:e},{:e},{:e}\n", v.len(), ci.mean, ci.low, ci.high, plateau));
            }
        }
        s
    }
}

/// For each switch batch `s`, whether the loss right after the switch
/// rises above the pre-switch level: the mean over `[s, s + w)` exceeds the
/// mean over `[s - w, s)` by more than three pre-switch standard
/// deviations.
pub fn spikes_at(losses: &[f64], switches: &[usize], w: usize) -> Vec<bool> {
    switches
        .iter()
        .map(|&s| {
            if s < w || s + w > losses.len() {
                return false;
            }
            let before = &losses[s - w..s];
            let after = &losses[s..s + w];
            mean(after) > mean(before) + 3.0 * std_dev(before)
        })
        .collect()
}
