use std::path::Path;
use std::process::Command;

use blindeq_harness::config::ExperimentConfig;
use blindeq_harness::runner::Method;
use blindeq_harness::stats::block_trend;
use blindeq_harness::tracking::{run_tracking, spikes_at};

const BIN: &str = env!("CARGO_BIN_EXE_blindeq-harness");

const SMALL: &str = r#"
schema_version = 1
name = "small"
seeds = 2
methods = ["ffe", "vae"]

[train]
train_symbols = 3000
test_symbols = 3000
batch_size = 500
epochs = 2
lr_candidates = [5e-3]

[channel]
kind = "wh"
alpha = [0.2]
snr_db = [14.0, 18.0]
"#;

fn harness(args: &[&str]) -> (bool, String, String) {
    let out = Command::new(BIN).args(args).output().expect("binary runs");
    (
        out.status.success(),
        String::from_utf8_lossy(&out.stdout).into_owned(),
        String::from_utf8_lossy(&out.stderr).into_owned(),
    )
}

fn shipped(name: &str) -> String {
    Path::new(env!("CARGO_MANIFEST_DIR")).join("../../configs").join(name).display().to_string()
}

#[test]
fn shipped_configs_validate() {
    let (ok, out, err) = harness(&["validate", "-c", &shipped("wh.toml")]);
    assert!(ok, "{err}");
    assert!(out.contains("runs 2160 (18 points x 4 methods x 3 learning rates x 10 seeds)"), "{out}");
    let (ok, out, err) = harness(&["validate", "-c", &shipped("imdd.toml"), "--desk"]);
    assert!(ok, "{err}");
    assert!(out.contains("dispersion stated -15.43 formula -3.8575 used -15.43"), "{out}");
}

#[test]
fn malformed_config_is_rejected() {
    let dir = tempfile::tempdir().unwrap();
    let p = dir.path().join("bad.toml");
    std::fs::write(&p, SMALL.replace("seeds = 2", "seeds = 2\nsneaky = 1")).unwrap();
    let (ok, _, err) = harness(&["validate", "-c", p.to_str().unwrap()]);
    assert!(!ok);
    assert!(err.contains("sneaky"), "{err}");
}

#[test]
fn sweep_writes_outputs_and_rows_rerun() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = dir.path().join("small.toml");
    std::fs::write(&cfg, SMALL).unwrap();
    let out_dir = dir.path().join("out");
    let (ok, out, err) = harness(&["sweep", "-c", cfg.to_str().unwrap(), "-o", out_dir.to_str().unwrap()]);
    assert!(ok, "{err}");
    assert!(out.starts_with("wrote "));
    for f in ["sweep_raw.csv", "sweep_summary.csv", "sweep.dat", "wall_times.csv", "manifest.json"] {
        assert!(out_dir.join(f).is_file(), "missing {f}");
    }
    let manifest: serde_json::Value =
        serde_json::from_str(&std::fs::read_to_string(out_dir.join("manifest.json")).unwrap()).unwrap();
    assert_eq!(manifest["command"], "sweep");
    assert!(manifest["dispersion"].is_null());

    let raw = std::fs::read_to_string(out_dir.join("sweep_raw.csv")).unwrap();
    let rows: Vec<&str> = raw.lines().skip(1).collect();
    assert_eq!(rows.len(), 2 * 2 * 2);
    let (ok, again, err) = harness(&["rerun", "-c", cfg.to_str().unwrap(), "--row", rows[5]]);
    assert!(ok, "{err}");
    assert_eq!(again.trim_end(), rows[5]);

    // a different master seed is a different config
    let (ok, _, err) = harness(&["rerun", "-c", cfg.to_str().unwrap(), "--seed", "7", "--row", rows[5]]);
    assert!(!ok);
    assert!(err.contains("config"), "{err}");
}

#[test]
fn tracking_without_switch_is_flat_after_convergence() {
    let path = Path::new(env!("CARGO_MANIFEST_DIR")).join("../../configs/wh.toml");
    let mut cfg = ExperimentConfig::load(&path).unwrap().desk();
    cfg.seeds = 1;
    cfg.tracking.methods = vec![Method::Vae];
    cfg.tracking.switch = false;
    let res = run_tracking(&cfg).unwrap();
    let losses = res.losses(Method::Vae, 0);
    let n = res.batches_per_segment;
    let switches = res.switch_batches(cfg.tracking.segments);
    assert_eq!(losses.len(), cfg.tracking.segments * n);
    assert!(spikes_at(&losses, &switches, 20).iter().all(|s| !s));
    let t = block_trend(&losses[losses.len() / 2..], 50).unwrap();
    assert!(t.contains_zero(), "{t:?}");

    cfg.tracking.switch = true;
    let res = run_tracking(&cfg).unwrap();
    let losses = res.losses(Method::Vae, 0);
    assert!(spikes_at(&losses, &switches, 20).iter().all(|&s| s));
}
