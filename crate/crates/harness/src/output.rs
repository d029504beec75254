//! Files written by the CLI.
//!
//! Everything except `wall_times.csv` is a pure function of the resolved
//! config, so reruns produce identical bytes.

use std::fs;
use std::path::{Path, PathBuf};

use anyhow::Context;
use serde::Serialize;

use crate::config::{ChannelBlock, DispersionReport, ExperimentConfig};
use crate::runner::Method;
use crate::sweep::{CellSummary, SweepResult};
use crate::tracking::TrackingResult;

pub const SEED_DERIVATION: &str = "first 8 bytes (little endian) of SHA-256(master_seed as u64 LE || for each \
     coordinate: byte length as u64 LE || utf-8 bytes); sweep coordinates are [point label, \"seed=<i>\"], \
     tracking uses [\"tracking\", \"seed=<i>\", \"segment=<k>\" | \"validation=<system>\"]";

#[derive(Debug, Serialize)]
pub struct Versions {
    #[serde(rename = "blindeq-core")]
    pub core: &'static str,
    #[serde(rename = "blindeq-harness")]
    pub harness: &'static str,
}

pub const VERSIONS: Versions = Versions { core: blindeq::VERSION, harness: env!("CARGO_PKG_VERSION") };

#[derive(Debug, Serialize)]
pub struct Manifest<'a> {
    pub command: &'a str,
    pub name: &'a str,
    pub config_hash: String,
    pub short_hash: String,
    pub schema_version: u32,
    pub versions: Versions,
    pub seed_derivation: &'static str,
    pub dispersion: Option<DispersionReport>,
    pub files: Vec<String>,
    pub config: &'a ExperimentConfig,
}

pub fn manifest<'a>(cfg: &'a ExperimentConfig, command: &'a str, files: &[PathBuf]) -> Manifest<'a> {
    let dispersion = match &cfg.channel {
        ChannelBlock::Imdd(m) => Some(m.dispersion_report()),
        ChannelBlock::Wh(_) => None,
    };
    Manifest {
        command,
        name: &cfg.name,
        config_hash: cfg.hash(),
        short_hash: cfg.short_hash(),
        schema_version: cfg.schema_version,
        versions: VERSIONS,
        seed_derivation: SEED_DERIVATION,
        dispersion,
        files: files.iter().map(|p| p.file_name().unwrap_or_default().to_string_lossy().into_owned()).collect(),
        config: cfg,
    }
}

fn write(dir: &Path, name: &str, body: &str, files: &mut Vec<PathBuf>) -> anyhow::Result<()> {
    let p = dir.join(name);
    fs::write(&p, body).with_context(|| format!("writing {}", p.display()))?;
    files.push(p);
    Ok(())
}

fn finish(dir: &Path, cfg: &ExperimentConfig, command: &str, mut files: Vec<PathBuf>) -> anyhow::Result<Vec<PathBuf>> {
    let m = manifest(cfg, command, &files);
    let p = dir.join("manifest.json");
    fs::write(&p, serde_json::to_string_pretty(&m)? + "\n")?;
    files.push(p);
    Ok(files)
}

/// gnuplot data: one block per (group, method), separated by two blank
/// lines so `index` selects a curve. Columns: `x mean ci_low ci_high median`.
pub fn sweep_dat(summary: &[CellSummary], methods: &[Method]) -> String {
    let mut groups: Vec<&str> = Vec::new();
    for c in summary {
        if !groups.contains(&c.group.as_str()) {
            groups.push(&c.group);
        }
    }
    let mut s = String::new();
    for g in groups {
        for &m in methods {
            s.push_str(&format!("# {g} {m}\n# x mean_ser ci_low ci_high median_ser\n"));
            for c in summary.iter().filter(|c| c.group == g && c.method == m) {
                s.push_str(&format!("{} {:e} {:e} {:e} {:e}\n", c.x, c.mean_ser, c.ci_low, c.ci_high, c.median_ser));
            }
            s.push_str("\n\n");
        }
    }
    s
}

pub fn write_sweep(
    dir: &Path,
    cfg: &ExperimentConfig,
    res: &SweepResult,
    command: &str,
) -> anyhow::Result<Vec<PathBuf>> {
    fs::create_dir_all(dir)?;
    let mut files = Vec::new();
    write(dir, &format!("{command}_raw.csv"), &res.raw_csv(), &mut files)?;
    write(dir, &format!("{command}_summary.csv"), &res.summary_csv(), &mut files)?;
    if cfg.output.plot_data {
        write(dir, &format!("{command}.dat"), &sweep_dat(&res.summary, &cfg.methods), &mut files)?;
    }
    if cfg.output.traces {
        let tdir = dir.join("traces");
        fs::create_dir_all(&tdir)?;
        for r in &res.records {
            if let Ok(o) = &r.outcome {
                let name = format!("{}_{}_lr{:e}_seed{}.csv", r.point.replace([';', '='], "_"), r.method, r.lr, r.seed);
                let mut buf = Vec::new();
                o.trace.write_csv(&mut buf)?;
                fs::write(tdir.join(name), buf)?;
            }
        }
    }
    let mut wall = String::from("point,method,lr,seed,wall_secs\n");
    for r in &res.records {
        wall.push_str(&format!("{},{},{:e},{},{:.3}\n", r.point, r.method, r.lr, r.seed, r.wall_secs()));
    }
    write(dir, "wall_times.csv", &wall, &mut files)?;
    finish(dir, cfg, command, files)
}

pub fn write_tracking(dir: &Path, cfg: &ExperimentConfig, res: &TrackingResult) -> anyhow::Result<Vec<PathBuf>> {
    fs::create_dir_all(dir)?;
    let mut files = Vec::new();
    write(dir, "tracking_loss.csv", &res.trace_csv(), &mut files)?;
    write(dir, "tracking_ser.csv", &res.ser_csv(), &mut files)?;
    write(dir, "tracking_summary.csv", &res.summary_csv(&cfg.tracking.methods), &mut files)?;
    if cfg.output.plot_data {
        let mut s = String::new();
        for &m in &cfg.tracking.methods {
            for seed in res.seeds(m) {
                s.push_str(&format!("# {m} seed {seed}\n# batch loss\n"));
                for r in res.rows.iter().filter(|r| r.method == m && r.seed == seed) {
                    s.push_str(&format!("{} {:e}\n", r.batch, r.loss));
                }
                s.push_str("\n\n");
            }
        }
        write(dir, "tracking_loss.dat", &s, &mut files)?;
    }
    finish(dir, cfg, "tracking", files)
}

pub fn write_eye(dir: &Path, cfg: &ExperimentConfig, parts: &[(String, String)]) -> anyhow::Result<Vec<PathBuf>> {
    fs::create_dir_all(dir)?;
    let mut files = Vec::new();
    for (name, body) in parts {
        write(dir, name, body, &mut files)?;
    }
    finish(dir, cfg, "eye", files)
}
