//! End-to-end tests of the command-line harness.

use std::fs;
use std::path::Path;
use std::process::Command;

use proptest::prelude::*;
use tempfile::TempDir;

use vortex_spectra::basis::GridConfig;
use vortex_spectra::cli::{config_to_toml, parse_config, run_sweep, RunConfig, EXIT_CONFIG, EXIT_NUMERIC};

fn bin() -> Command {
    Command::new(env!("CARGO_BIN_EXE_vortex-spectra"))
}

fn read(dir: &Path, name: &str) -> String {
    fs::read_to_string(dir.join(name)).unwrap_or_else(|e| panic!("{name}: {e}"))
}

fn small_grid_config(dir: &Path) -> String {
    format!(
        "output_dir = {:?}\n\n[grid]\nr_max = 40.0\nelements = 60\n",
        dir.display().to_string()
    )
}

#[test]
fn profile_outside_window_exits_numeric() {
    let dir = TempDir::new().unwrap();
    let out = bin()
        .args(["profile", "--omega", "0.25", "--m", "1", "--out"])
        .arg(dir.path())
        .output()
        .unwrap();
    assert_eq!(out.status.code(), Some(EXIT_NUMERIC));
    let err = String::from_utf8_lossy(&out.stderr);
    assert!(err.contains("OutsideWindow") && err.contains("0.1875"), "{err}");
}

#[test]
fn unknown_key_exits_config_with_path() {
    let dir = TempDir::new().unwrap();
    let cfg = dir.path().join("run.toml");
    fs::write(&cfg, "[sweep]\npoints = 3\nstep = 0.1\n").unwrap();
    let out = bin().args(["sweep", "--config"]).arg(&cfg).output().unwrap();
    assert_eq!(out.status.code(), Some(EXIT_CONFIG));
    let err = String::from_utf8_lossy(&out.stderr);
    assert!(err.contains("sweep") && err.contains("step"), "{err}");
}

#[test]
fn missing_subcommand_is_a_usage_error() {
    assert_eq!(bin().output().unwrap().status.code(), Some(EXIT_CONFIG));
}

#[test]
fn model1_preset_writes_predicted_column() {
    let dir = TempDir::new().unwrap();
    let status = bin()
        .args(["fgr-model1", "--preset", "gaussian", "--z0", "0.4", "--out"])
        .arg(dir.path())
        .status()
        .unwrap();
    assert!(status.success());
    let csv = read(dir.path(), "model1.csv");
    let mut lines = csv.lines();
    let header: Vec<&str> = lines.next().unwrap().split(',').collect();
    assert_eq!(header, ["t", "z1_abs2", "signed_energy", "leak_integral", "field_l2", "predicted"]);
    let mut last_leak = 0.0;
    for line in lines {
        let cols: Vec<f64> = line.split(',').map(|c| c.parse().unwrap()).collect();
        assert_eq!(cols.len(), header.len());
        assert!(cols[5] > 0.0 && cols[5] <= 0.16 + 1e-12);
        assert!(cols[3] >= last_leak);
        last_leak = cols[3];
    }
    let manifest: serde_json::Value = serde_json::from_str(&read(dir.path(), "manifest.json")).unwrap();
    assert_eq!(manifest["command"], "fgr-model1");
    assert_eq!(manifest["outputs"].as_array().unwrap().len(), 2);
}

#[test]
fn identical_config_reproduces_payloads() {
    let a = TempDir::new().unwrap();
    let b = TempDir::new().unwrap();
    for dir in [&a, &b] {
        let cfg = dir.path().join("run.toml");
        fs::write(&cfg, small_grid_config(dir.path())).unwrap();
        let status = bin().args(["profile", "--omega", "0.15", "--config"]).arg(&cfg).status().unwrap();
        assert!(status.success());
    }
    for name in ["profile.csv", "profile.json"] {
        assert_eq!(read(a.path(), name), read(b.path(), name));
    }
    let ma: serde_json::Value = serde_json::from_str(&read(a.path(), "manifest.json")).unwrap();
    let mb: serde_json::Value = serde_json::from_str(&read(b.path(), "manifest.json")).unwrap();
    assert_eq!(ma["outputs"], mb["outputs"]);
    // the output directory differs, so the config hash does too
    assert_ne!(ma["config_hash"], mb["config_hash"]);
}

#[test]
fn workers_from_environment() {
    let dir = TempDir::new().unwrap();
    let status = bin()
        .env("VORTEX_SPECTRA_WORKERS", "3")
        .args(["gamma", "--preset", "single", "--samples", "6", "--out"])
        .arg(dir.path())
        .status()
        .unwrap();
    assert!(status.success());
    let manifest: serde_json::Value = serde_json::from_str(&read(dir.path(), "manifest.json")).unwrap();
    assert_eq!(manifest["workers"], 3);
    let gamma: serde_json::Value = serde_json::from_str(&read(dir.path(), "gamma.json")).unwrap();
    let values = gamma["gamma_values"].as_array().unwrap();
    assert_eq!(values.len(), 6);
    assert!(values.iter().all(|v| v.as_f64().unwrap() <= 0.0));
    let bad = bin()
        .env("VORTEX_SPECTRA_WORKERS", "zero")
        .args(["report", "--out"])
        .arg(dir.path())
        .status()
        .unwrap();
    assert_eq!(bad.code(), Some(EXIT_CONFIG));
}

#[test]
fn coupling_constraint_is_a_config_error() {
    let dir = TempDir::new().unwrap();
    let cfg = dir.path().join("run.toml");
    let text = r#"
[fgr]
omega = 1.0
box = 64.0
n_grid = 64
dt = 0.05
t_final = 1.0
z0 = [[0.1, 0.0]]
modes = [{ lambda = 0.3, s = -1 }]
couplings = [{ alpha = [2], G = [{ kind = "zero" }, { kind = "gaussian", amplitude = [1.0, 0.0], width = 1.0 }] }]
"#;
    fs::write(&cfg, text).unwrap();
    let out = bin().args(["fgr-model2", "--config"]).arg(&cfg).output().unwrap();
    assert_eq!(out.status.code(), Some(EXIT_CONFIG));
    assert!(String::from_utf8_lossy(&out.stderr).contains("CouplingConstraint"));
}

#[test]
fn small_sweep_is_worker_independent() {
    let mut cfg = RunConfig::default();
    cfg.grid = GridConfig {
        r_max: 40.0,
        elements: 60,
        ..Default::default()
    };
    cfg.spectrum.k_max = 3;
    cfg.sweep.points = 5;
    cfg.sweep.chains = 2;
    let one = run_sweep(&cfg, 1).unwrap();
    let three = run_sweep(&cfg, 3).unwrap();
    assert_eq!(one.ledger_csv, three.ledger_csv);
    assert_eq!(one.reports, three.reports);
    assert_eq!(one.ledger_csv.lines().count(), 6);
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(32))]

    #[test]
    fn config_round_trips(
        r_max in 10.0f64..100.0, elements in 10usize..500, points in 1usize..40,
        lo in 0.01f64..0.1, width in 0.01f64..0.08, chains in 1usize..8, workers in prop::option::of(1usize..16),
        eps in 0.0f64..0.05, k_max in 0i64..12,
    ) {
        let mut cfg = RunConfig::default();
        cfg.grid.r_max = r_max;
        cfg.grid.elements = elements;
        cfg.sweep.points = points;
        cfg.sweep.omega_min = lo;
        cfg.sweep.omega_max = lo + width;
        cfg.sweep.chains = chains;
        cfg.workers = workers;
        cfg.potential = vortex_spectra::profiles::RadialPotential::gaussian_well(eps);
        cfg.spectrum.k_max = k_max;
        let text = config_to_toml(&cfg);
        let back = parse_config(&text).unwrap();
        prop_assert_eq!(&back, &cfg);
        prop_assert_eq!(config_to_toml(&back), text);
    }
}
