use std::path::PathBuf;

use anyhow::{bail, Context};
use clap::{Args, Parser, Subcommand};

use blindeq_harness::config::{ChannelBlock, ExperimentConfig};
use blindeq_harness::output;
use blindeq_harness::sweep::{rerun_row, run_sweep, screen_lr, RowKey};
use blindeq_harness::tracking::run_tracking;
use blindeq_harness::{eye, runner::Method};

#[derive(Parser)]
#[command(name = "blindeq-harness", version, about = "Blind equalizer experiments")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Args, Clone)]
struct Common {
    /// Experiment config (TOML).
    #[arg(long, short)]
    config: PathBuf,
    /// Output directory; overrides `output.dir`.
    #[arg(long, short)]
    out: Option<PathBuf>,
    /// Master seed; overrides `master_seed`.
    #[arg(long)]
    seed: Option<u64>,
    /// Desk-scale preset: symbol counts / 10, 5 restarts.
    #[arg(long)]
    desk: bool,
    /// Worker threads (default: all cores).
    #[arg(long)]
    threads: Option<usize>,
}

#[derive(Subcommand)]
enum Command {
    /// SER over the whole grid, every method and learning rate.
    Sweep(Common),
    /// Change-point tracking with the blind methods.
    Tracking(Common),
    /// Learning-rate screen at one grid point.
    Screen {
        #[command(flatten)]
        common: Common,
        /// Index into the grid, outer axis first.
        #[arg(long, default_value_t = 0)]
        point: usize,
    },
    /// Eye-diagram traces and the modulator curve for each V_pp of an
    /// IM/DD config.
    Eye {
        #[command(flatten)]
        common: Common,
        #[arg(long, default_value_t = 2000)]
        symbols: usize,
        /// Include photodiode noise.
        #[arg(long)]
        noisy: bool,
    },
    /// Check a config and print its hash and grid.
    Validate(Common),
    /// Regenerate one row of a raw sweep CSV and print it.
    Rerun {
        #[command(flatten)]
        common: Common,
        /// The row, as written in the CSV.
        #[arg(long)]
        row: String,
    },
}

fn load(c: &Common) -> anyhow::Result<ExperimentConfig> {
    let mut cfg = ExperimentConfig::load(&c.config)?;
    if let Some(s) = c.seed {
        cfg.master_seed = s;
    }
    if let Some(o) = &c.out {
        cfg.output.dir = o.clone();
    }
    if c.desk {
        cfg = cfg.desk();
    }
    cfg.validate()?;
    if let Some(n) = c.threads {
        rayon::ThreadPoolBuilder::new().num_threads(n).build_global().context("thread pool")?;
    }
    Ok(cfg)
}

fn report(files: &[PathBuf]) {
    for f in files {
        println!("wrote {}", f.display());
    }
}

fn main() -> anyhow::Result<()> {
    match Cli::parse().command {
        Command::Sweep(c) => {
            let cfg = load(&c)?;
            let res = run_sweep(&cfg);
            let failed = res.records.iter().filter(|r| r.outcome.is_err()).count();
            report(&output::write_sweep(&cfg.output.dir, &cfg, &res, "sweep")?);
            print!("{}", res.summary_csv());
            if failed > 0 {
                eprintln!("{failed} of {} runs failed; see sweep_raw.csv", res.records.len());
            }
        }
        Command::Tracking(c) => {
            let cfg = load(&c)?;
            let res = run_tracking(&cfg)?;
            report(&output::write_tracking(&cfg.output.dir, &cfg, &res)?);
            print!("{}", res.summary_csv(&cfg.tracking.methods));
        }
        Command::Screen { common, point } => {
            let cfg = load(&common)?;
            let points = cfg.points();
            let Some(p) = points.get(point) else { bail!("grid has {} points", points.len()) };
            let res = screen_lr(&cfg, p);
            let mut files = output::write_sweep(&cfg.output.dir, &cfg, &res.sweep, "screen")?;
            let path = cfg.output.dir.join("screen_candidates.csv");
            std::fs::write(&path, res.csv())?;
            files.push(path);
            report(&files);
            print!("{}", res.csv());
        }
        Command::Eye { common, symbols, noisy } => {
            let cfg = load(&common)?;
            let ChannelBlock::Imdd(block) = &cfg.channel else { bail!("eye export needs an IM/DD config") };
            let mut parts = Vec::new();
            for p in cfg.points() {
                let blindeq_harness::runner::Link::Imdd(mut link) = p.link else { unreachable!() };
                link.noiseless = !noisy;
                let tag = p.label.replace([';', '='], "_");
                let traces = eye::eye_traces(&link, symbols, cfg.master_seed)?;
                parts.push((format!("eye_{tag}.csv"), eye::eye_csv(&traces)));
                if cfg.output.plot_data {
                    parts.push((format!("eye_{tag}.dat"), eye::eye_dat(&traces)));
                }
                if link.fiber_km == block.fiber_km[0] {
                    parts.push((format!("mzm_vpp_{}.csv", link.vpp), eye::mzm_curve_csv(&link, 201)));
                }
            }
            report(&output::write_eye(&cfg.output.dir, &cfg, &parts)?);
        }
        Command::Validate(c) => {
            let cfg = load(&c)?;
            println!("config {} ok", c.config.display());
            println!("hash {}", cfg.hash());
            let methods: Vec<&str> = cfg.methods.iter().map(|m: &Method| m.name()).collect();
            println!("methods {}", methods.join(","));
            println!(
                "runs {} ({} points x {} methods x {} learning rates x {} seeds)",
                cfg.points().len() * cfg.methods.len() * cfg.train.lr_candidates.len() * cfg.seeds,
                cfg.points().len(),
                cfg.methods.len(),
                cfg.train.lr_candidates.len(),
                cfg.seeds
            );
            if let ChannelBlock::Imdd(m) = &cfg.channel {
                let d = m.dispersion_report();
                println!(
                    "dispersion stated {} formula {:.4} used {} ps/(nm km)",
                    d.stated_ps_nm_km, d.formula_ps_nm_km, d.used_ps_nm_km
                );
            }
            for p in cfg.points() {
                println!("  {}", p.label);
            }
        }
        Command::Rerun { common, row } => {
            let cfg = load(&common)?;
            println!("{}", rerun_row(&cfg, &RowKey::parse(&row)?)?);
        }
    }
    Ok(())
}
