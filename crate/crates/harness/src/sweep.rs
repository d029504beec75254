//! Grid sweeps and learning-rate screening.
//!
//! Every (point, method, lr, seed) run is independent. Runs execute on
//! the rayon pool and are merged in coordinate order, so the output does
//! not depend on scheduling.

use std::collections::BTreeMap;

use rayon::prelude::*;
use serde::Serialize;

use crate::config::{ExperimentConfig, Point};
use crate::runner::{run, Method, RunOutcome, RunSpec};
use crate::seeds::derive_seed;
use crate::stats::{ci95, mean, median};

/// Data seed of restart `seed` at `point`. Methods and learning rates at
/// the same coordinates share it and therefore see identical data.
pub fn data_seed(cfg: &ExperimentConfig, point: &Point, seed: usize) -> u64 {
    derive_seed(cfg.master_seed, &[&point.label, &format!("seed={seed}")])
}

pub fn run_spec(cfg: &ExperimentConfig, point: &Point, method: Method, lr: f64, seed: usize) -> RunSpec {
    RunSpec {
        link: point.link.clone(),
        method,
        lr,
        sizes: cfg.sizes,
        train_symbols: cfg.train.train_symbols,
        test_symbols: cfg.train.test_symbols,
        batch_size: cfg.train.batch_size,
        epochs: cfg.train.epochs,
        data_seed: data_seed(cfg, point, seed),
    }
}

/// One run. `outcome` is `Err` with the message when the run failed.
#[derive(Debug, Clone, PartialEq)]
pub struct RunRecord {
    pub point: String,
    pub method: Method,
    pub lr: f64,
    pub seed: usize,
    pub data_seed: u64,
    pub outcome: Result<RunOutcome, String>,
}

impl RunRecord {
    pub fn ser(&self) -> Option<f64> {
        self.outcome.as_ref().ok().map(|o| o.ser)
    }

    pub fn wall_secs(&self) -> f64 {
        self.outcome.as_ref().map_or(f64::NAN, |o| o.wall_secs)
    }
}

pub const RAW_HEADER: &str = "config_hash,point,method,lr,seed,data_seed,ser,final_loss,status";

/// One line of the raw CSV (no newline). Contains nothing that depends
/// on timing.
pub fn raw_row(hash: &str, r: &RunRecord) -> String {
    let (ser, loss, status) = match &r.outcome {
        Ok(o) => (format!("{:e}", o.ser), format!("{:e}", o.final_loss), "ok".to_string()),
        Err(e) => (String::new(), String::new(), format!("\"error: {}\"", e.replace('"', "'"))),
    };
    format!("{hash},{},{},{:e},{},{},{ser},{loss},{status}", r.point, r.method, r.lr, r.seed, r.data_seed)
}

/// Best learning rate of one (point, method) cell with its per-seed SERs.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct CellSummary {
    pub point: String,
    pub group: String,
    pub x: f64,
    pub method: Method,
    pub best_lr: f64,
    pub n_ok: usize,
    pub n_failed: usize,
    pub mean_ser: f64,
    pub ci_low: f64,
    pub ci_high: f64,
    pub median_ser: f64,
    /// Successful runs only, ordered by seed.
    pub sers: Vec<f64>,
}

pub const SUMMARY_HEADER: &str = "point,group,x,method,best_lr,n_ok,n_failed,mean_ser,ci_low,ci_high,median_ser";

impl CellSummary {
    pub fn csv_row(&self) -> String {
        format!(
            "{},{},{},{},{:e},{},{},{:e},{:e},{:e},{:e}",
            self.point,
            self.group,
            self.x,
            self.method,
            self.best_lr,
            self.n_ok,
            self.n_failed,
            self.mean_ser,
            self.ci_low,
            self.ci_high,
            self.median_ser
        )
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct SweepResult {
    pub config_hash: String,
    /// Sorted by point, method, lr candidate order, seed.
    pub records: Vec<RunRecord>,
    pub summary: Vec<CellSummary>,
}

impl SweepResult {
    pub fn raw_csv(&self) -> String {
        let mut s = String::from(RAW_HEADER);
        s.push('\n');
        for r in &self.records {
            s.push_str(&raw_row(&self.config_hash, r));
            s.push('\n');
        }
        s
    }

    pub fn summary_csv(&self) -> String {
        let mut s = String::from(SUMMARY_HEADER);
        s.push('\n');
        for c in &self.summary {
            s.push_str(&c.csv_row());
            s.push('\n');
        }
        s
    }

    pub fn cell(&self, point: &str, method: Method) -> Option<&CellSummary> {
        self.summary.iter().find(|c| c.point == point && c.method == method)
    }
}

/// Picks the best candidate of one cell: fewest failures, then lowest mean
/// SER, then the smaller learning rate.
pub fn select_lr(point: &Point, method: Method, records: &[&RunRecord]) -> Option<CellSummary> {
    let mut by_lr: BTreeMap<u64, (f64, Vec<f64>, usize)> = BTreeMap::new();
    for r in records {
        let e = by_lr.entry(r.lr.to_bits()).or_insert((r.lr, Vec::new(), 0));
        match r.ser() {
            Some(s) => e.1.push(s),
            None => e.2 += 1,
        }
    }
    let best = by_lr
        .into_values()
        .filter(|(_, sers, _)| !sers.is_empty())
        .min_by(|a, b| a.2.cmp(&b.2).then(mean(&a.1).total_cmp(&mean(&b.1))).then(a.0.total_cmp(&b.0)))?;
    let (lr, sers, failed) = best;
    let ci = ci95(&sers);
    Some(CellSummary {
        point: point.label.clone(),
        group: point.group.clone(),
        x: point.x,
        method,
        best_lr: lr,
        n_ok: sers.len(),
        n_failed: failed,
        mean_ser: ci.mean,
        ci_low: ci.low,
        ci_high: ci.high,
        median_ser: median(&sers),
        sers,
    })
}

/// Runs every candidate at the chosen points with `runner` and selects the
/// best learning rate per (point, method). A failed run becomes a record
/// with its error; the sweep continues.
pub fn sweep_points<F>(cfg: &ExperimentConfig, points: &[Point], runner: F) -> SweepResult
where
    F: Fn(&RunSpec) -> blindeq::Result<RunOutcome> + Sync,
{
    let mut jobs = Vec::new();
    for (pi, p) in points.iter().enumerate() {
        for (mi, &m) in cfg.methods.iter().enumerate() {
            for (li, &lr) in cfg.train.lr_candidates.iter().enumerate() {
                for s in 0..cfg.seeds {
                    jobs.push(((pi, mi, li, s), p, m, lr));
                }
            }
        }
    }
    let mut done: Vec<((usize, usize, usize, usize), RunRecord)> = jobs
        .into_par_iter()
        .map(|(key, p, m, lr)| {
            let spec = run_spec(cfg, p, m, lr, key.3);
            let outcome = runner(&spec).map_err(|e| e.to_string());
            (key, RunRecord { point: p.label.clone(), method: m, lr, seed: key.3, data_seed: spec.data_seed, outcome })
        })
        .collect();
    done.sort_by_key(|(k, _)| *k);
    let records: Vec<RunRecord> = done.into_iter().map(|(_, r)| r).collect();

    let mut summary = Vec::new();
    for p in points {
        for &m in &cfg.methods {
            let cell: Vec<&RunRecord> = records.iter().filter(|r| r.point == p.label && r.method == m).collect();
            if let Some(c) = select_lr(p, m, &cell) {
                summary.push(c);
            }
        }
    }
    SweepResult { config_hash: cfg.short_hash(), records, summary }
}

/// Full grid sweep with the real runner.
pub fn run_sweep(cfg: &ExperimentConfig) -> SweepResult {
    sweep_points(cfg, &cfg.points(), run)
}

/// Learning-rate screen at a single grid point.
#[derive(Debug, Clone, PartialEq)]
pub struct ScreenResult {
    pub best: BTreeMap<Method, f64>,
    pub sweep: SweepResult,
}

pub const SCREEN_HEADER: &str = "config_hash,point,method,lr,n_ok,mean_ser,selected";

impl ScreenResult {
    /// Every candidate, not only the winner.
    pub fn csv(&self) -> String {
        let mut s = String::from(SCREEN_HEADER);
        s.push('\n');
        let mut seen = Vec::new();
        for r in &self.sweep.records {
            if seen.contains(&(r.method, r.lr.to_bits())) {
                continue;
            }
            seen.push((r.method, r.lr.to_bits()));
            let sers: Vec<f64> = self
                .sweep
                .records
                .iter()
                .filter(|q| q.method == r.method && q.lr == r.lr)
                .filter_map(|q| q.ser())
                .collect();
            let selected = self.best.get(&r.method) == Some(&r.lr);
            s.push_str(&format!(
                "{},{},{},{:e},{},{:e},{}\n",
                self.sweep.config_hash,
                r.point,
                r.method,
                r.lr,
                sers.len(),
                mean(&sers),
                selected
            ));
        }
        s
    }
}

pub fn screen_lr_with<F>(cfg: &ExperimentConfig, point: &Point, runner: F) -> ScreenResult
where
    F: Fn(&RunSpec) -> blindeq::Result<RunOutcome> + Sync,
{
    let sweep = sweep_points(cfg, std::slice::from_ref(point), runner);
    let best = sweep.summary.iter().map(|c| (c.method, c.best_lr)).collect();
    ScreenResult { best, sweep }
}

pub fn screen_lr(cfg: &ExperimentConfig, point: &Point) -> ScreenResult {
    screen_lr_with(cfg, point, run)
}

/// Key of a raw CSV row: point label, method, lr and seed.
#[derive(Debug, Clone, PartialEq)]
pub struct RowKey {
    pub config_hash: String,
    pub point: String,
    pub method: Method,
    pub lr: f64,
    pub seed: usize,
}

impl RowKey {
    /// Parses the leading columns of a raw CSV row.
    pub fn parse(line: &str) -> anyhow::Result<Self> {
        let f: Vec<&str> = line.splitn(6, ',').collect();
        anyhow::ensure!(f.len() == 6, "not a raw sweep row: {line}");
        let method = Method::ALL
            .into_iter()
            .find(|m| m.name() == f[2])
            .ok_or_else(|| anyhow::anyhow!("unknown method {}", f[2]))?;
        Ok(Self { config_hash: f[0].into(), point: f[1].into(), method, lr: f[3].parse()?, seed: f[4].parse()? })
    }
}

/// Regenerates one raw row in isolation from the config it was produced
/// with. Fails if the config hash does not match.
pub fn rerun_row(cfg: &ExperimentConfig, key: &RowKey) -> anyhow::Result<String> {
    anyhow::ensure!(
        key.config_hash == cfg.short_hash(),
        "row was produced by config {}, this config is {}",
        key.config_hash,
        cfg.short_hash()
    );
    let point = cfg
        .points()
        .into_iter()
        .find(|p| p.label == key.point)
        .ok_or_else(|| anyhow::anyhow!("no grid point {}", key.point))?;
    let spec = run_spec(cfg, &point, key.method, key.lr, key.seed);
    let outcome = run(&spec).map_err(|e| e.to_string());
    let rec = RunRecord {
        point: point.label,
        method: key.method,
        lr: key.lr,
        seed: key.seed,
        data_seed: spec.data_seed,
        outcome,
    };
    Ok(raw_row(&cfg.short_hash(), &rec))
}

#[cfg(test)]
mod tests {
    use super::*;
    use blindeq::optim::LossTrace;
    use blindeq::Error;

    fn cfg(lrs: &[f64], seeds: usize) -> ExperimentConfig {
        let text = format!(
            "schema_version = 1\nseeds = {seeds}\nmethods = [\"ffe\", \"vae\"]\n[train]\nlr_candidates = {lrs:?}\n\
             [channel]\nkind = \"wh\"\nalpha = [0.1]\nsnr_db = [16.0]\n"
        );
        ExperimentConfig::from_toml(&text).unwrap()
    }

    fn outcome(ser: f64) -> RunOutcome {
        RunOutcome { ser, final_loss: 1.0, trace: LossTrace::default(), wall_secs: 0.0 }
    }

    #[test]
    fn single_candidate_wins() {
        let c = cfg(&[5e-4], 2);
        let p = &c.points()[0];
        let r = screen_lr_with(&c, p, |_| Ok(outcome(0.1)));
        assert_eq!(r.best[&Method::Ffe], 5e-4);
        assert_eq!(r.best[&Method::Vae], 5e-4);
    }

    #[test]
    fn monotone_stub_selects_smallest_lr() {
        let c = cfg(&[5e-3, 5e-4, 5e-5], 3);
        let p = &c.points()[0];
        let r = screen_lr_with(&c, p, |s| Ok(outcome(s.lr * 10.0)));
        assert_eq!(r.best[&Method::Ffe], 5e-5);
        // every candidate is listed
        let csv = r.csv();
        assert_eq!(csv.lines().count(), 1 + 2 * 3);
        assert_eq!(csv.matches(",true").count(), 2);
    }

    #[test]
    fn ties_go_to_smaller_lr() {
        let c = cfg(&[5e-3, 5e-4], 2);
        let r = screen_lr_with(&c, &c.points()[0], |_| Ok(outcome(0.2)));
        assert_eq!(r.best[&Method::Vae], 5e-4);
    }

    #[test]
    fn failures_are_recorded_not_fatal() {
        let c = cfg(&[5e-3, 5e-4], 2);
        let r = sweep_points(&c, &c.points(), |s| {
            if s.lr == 5e-4 && s.method == Method::Vae {
                Err(Error::Diverged { batch: 3, loss: f64::NAN })
            } else {
                Ok(outcome(0.3))
            }
        });
        assert_eq!(r.records.len(), 2 * 2 * 2);
        let failed: Vec<_> = r.records.iter().filter(|x| x.outcome.is_err()).collect();
        assert_eq!(failed.len(), 2);
        let csv = r.raw_csv();
        assert_eq!(csv.matches("error: training diverged").count(), 2, "{csv}");
        // the failing candidate loses even though it would win the tie
        assert_eq!(r.cell(&c.points()[0].label, Method::Vae).unwrap().best_lr, 5e-3);
    }

    #[test]
    fn summary_mean_is_mean_of_raw_rows() {
        let c = cfg(&[5e-3], 4);
        let r = sweep_points(&c, &c.points(), |s| Ok(outcome((s.data_seed % 97) as f64 / 100.0)));
        for cell in &r.summary {
            let raw: Vec<f64> = r.records.iter().filter(|x| x.method == cell.method).filter_map(|x| x.ser()).collect();
            assert_eq!(cell.sers, raw);
            assert_eq!(cell.mean_ser, mean(&raw));
        }
        // methods share data seeds
        let seeds: Vec<Vec<u64>> = [Method::Ffe, Method::Vae]
            .iter()
            .map(|m| r.records.iter().filter(|x| x.method == *m).map(|x| x.data_seed).collect())
            .collect();
        assert_eq!(seeds[0], seeds[1]);
    }

    #[test]
    fn row_key_round_trip() {
        let c = cfg(&[5e-3], 1);
        let p = &c.points()[0];
        let rec = RunRecord {
            point: p.label.clone(),
            method: Method::V2vae,
            lr: 5e-4,
            seed: 3,
            data_seed: 17,
            outcome: Ok(outcome(0.25)),
        };
        let line = raw_row("abc", &rec);
        let k = RowKey::parse(&line).unwrap();
        assert_eq!(
            k,
            RowKey { config_hash: "abc".into(), point: p.label.clone(), method: Method::V2vae, lr: 5e-4, seed: 3 }
        );
        assert!(rerun_row(&c, &k).is_err());
    }
}
