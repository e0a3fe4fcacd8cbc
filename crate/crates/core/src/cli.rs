//! Command-line harness: configuration, sweep orchestration and output files.

use std::fmt;
use std::fs;
use std::path::{Path, PathBuf};
use std::time::Instant;

use clap::{Args, Parser, Subcommand};
use num_complex::Complex64;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::basis::GridConfig;
use crate::error::{FgrError, ProfileError, SpectraError};
use crate::fgr::{gamma_model2, simulate_model1, simulate_model2, GammaResult, Model1Config, Model2Config, TimeSeries};
use crate::profiles::{
    existence_window, family_from, solve_profile_on, NonlinearityModel, RadialPotential, RadialProfile, SolverConfig,
    WINDOW_S_MAX,
};
use crate::spectra::{detect_omega_cr, full_spectrum, hypothesis_ledger, ledger_csv, OmegaCrConfig, SpectrumConfig, StabilityLedger};
use crate::basis::SplineBasis;

pub const WORKERS_ENV: &str = "VORTEX_SPECTRA_WORKERS";
pub const EXIT_OK: i32 = 0;
pub const EXIT_CONFIG: i32 = 2;
pub const EXIT_NUMERIC: i32 = 3;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct ProfileSection {
    pub omega: f64,
    pub m: i64,
}

impl Default for ProfileSection {
    fn default() -> Self {
        ProfileSection { omega: 0.16, m: 1 }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct SweepSection {
    pub m: i64,
    pub omega_min: f64,
    pub omega_max: f64,
    pub points: usize,
    /// contiguous continuation chains; fixed by the config, not by the worker count
    pub chains: usize,
}

impl Default for SweepSection {
    fn default() -> Self {
        SweepSection {
            m: 1,
            omega_min: 0.13,
            omega_max: 0.18,
            points: 11,
            chains: 4,
        }
    }
}

impl SweepSection {
    pub fn omegas(&self) -> Vec<f64> {
        if self.points < 2 {
            return vec![self.omega_min; self.points];
        }
        let h = (self.omega_max - self.omega_min) / (self.points - 1) as f64;
        (0..self.points).map(|i| self.omega_min + h * i as f64).collect()
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct OmegaCrSection {
    pub m: i64,
    pub bracket: [f64; 2],
    /// repeat the detection on the doubled grid
    pub check_refined: bool,
    #[serde(flatten)]
    pub search: OmegaCrConfig,
}

impl Default for OmegaCrSection {
    fn default() -> Self {
        OmegaCrSection {
            m: 1,
            bracket: [0.13, 0.17],
            check_refined: false,
            search: OmegaCrConfig::default(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct GammaSection {
    pub samples: usize,
    pub seed: u64,
}

impl Default for GammaSection {
    fn default() -> Self {
        GammaSection { samples: 64, seed: 7 }
    }
}

/// Either model, told apart by the presence of `modes`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum FgrSection {
    Model2(Model2Config),
    Model1(Model1Config),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct RunConfig {
    pub output_dir: PathBuf,
    pub workers: Option<usize>,
    pub model: NonlinearityModel,
    pub potential: RadialPotential,
    pub grid: GridConfig,
    pub solver: SolverConfig,
    pub spectrum: SpectrumConfig,
    pub profile: ProfileSection,
    pub sweep: SweepSection,
    pub omega_cr: OmegaCrSection,
    pub gamma: GammaSection,
    pub fgr: Option<FgrSection>,
}

impl Default for RunConfig {
    fn default() -> Self {
        RunConfig {
            output_dir: PathBuf::from("out"),
            workers: None,
            model: NonlinearityModel::default(),
            potential: RadialPotential::default(),
            grid: GridConfig::default(),
            solver: SolverConfig::default(),
            spectrum: SpectrumConfig::default(),
            profile: ProfileSection::default(),
            sweep: SweepSection::default(),
            omega_cr: OmegaCrSection::default(),
            gamma: GammaSection::default(),
            fgr: None,
        }
    }
}

#[derive(Debug)]
pub enum HarnessError {
    Config(String),
    Io(String),
    Profile(ProfileError),
    Spectra(SpectraError),
    Fgr(FgrError),
}

impl HarnessError {
    pub fn exit_code(&self) -> i32 {
        match self {
            HarnessError::Config(_) | HarnessError::Fgr(FgrError::InvalidConfig(_)) => EXIT_CONFIG,
            HarnessError::Fgr(FgrError::CouplingConstraint { .. }) => EXIT_CONFIG,
            _ => EXIT_NUMERIC,
        }
    }
}

impl fmt::Display for HarnessError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            HarnessError::Config(m) => write!(f, "ConfigError: {m}"),
            HarnessError::Io(m) => write!(f, "IoError: {m}"),
            HarnessError::Profile(e) => write!(f, "{e}"),
            HarnessError::Spectra(e) => write!(f, "{e}"),
            HarnessError::Fgr(e) => write!(f, "{e}"),
        }
    }
}

impl From<ProfileError> for HarnessError {
    fn from(e: ProfileError) -> Self {
        HarnessError::Profile(e)
    }
}

impl From<SpectraError> for HarnessError {
    fn from(e: SpectraError) -> Self {
        HarnessError::Spectra(e)
    }
}

impl From<FgrError> for HarnessError {
    fn from(e: FgrError) -> Self {
        HarnessError::Fgr(e)
    }
}

impl From<std::io::Error> for HarnessError {
    fn from(e: std::io::Error) -> Self {
        HarnessError::Io(e.to_string())
    }
}

/// Parses a TOML config; unknown or mistyped keys are reported with their path.
pub fn parse_config(text: &str) -> Result<RunConfig, HarnessError> {
    let table: toml::Table = text.parse().map_err(|e: toml::de::Error| HarnessError::Config(e.to_string()))?;
    let mut fgr = None;
    let mut rest = table;
    if let Some(v) = rest.remove("fgr") {
        fgr = Some(parse_fgr(v)?);
    }
    let mut cfg: RunConfig = serde_path_to_error::deserialize(toml::Value::Table(rest))
        .map_err(|e| HarnessError::Config(format!("at `{}`: {}", e.path(), e.inner())))?;
    cfg.fgr = fgr;
    Ok(cfg)
}

fn parse_fgr(v: toml::Value) -> Result<FgrSection, HarnessError> {
    let is_model2 = v.as_table().is_some_and(|t| t.contains_key("modes"));
    let wrap = |e: serde_path_to_error::Error<toml::de::Error>| HarnessError::Config(format!("at `fgr.{}`: {}", e.path(), e.inner()));
    if is_model2 {
        serde_path_to_error::deserialize(v).map(FgrSection::Model2).map_err(wrap)
    } else {
        serde_path_to_error::deserialize(v).map(FgrSection::Model1).map_err(wrap)
    }
}

pub fn config_to_toml(cfg: &RunConfig) -> String {
    toml::to_string(cfg).expect("config serializes")
}

pub fn load_config(path: &Path) -> Result<RunConfig, HarnessError> {
    let text = fs::read_to_string(path).map_err(|e| HarnessError::Config(format!("{}: {e}", path.display())))?;
    parse_config(&text)
}

/// Explicit value, then the config, then the environment, then the machine.
pub fn resolve_workers(flag: Option<usize>, cfg: Option<usize>) -> Result<usize, HarnessError> {
    if let Some(w) = flag.or(cfg) {
        return if w == 0 { Err(HarnessError::Config("workers must be positive".into())) } else { Ok(w) };
    }
    if let Ok(v) = std::env::var(WORKERS_ENV) {
        return match v.trim().parse::<usize>() {
            Ok(w) if w > 0 => Ok(w),
            _ => Err(HarnessError::Config(format!("{WORKERS_ENV}={v} is not a positive integer"))),
        };
    }
    Ok(std::thread::available_parallelism().map_or(1, |n| n.get()))
}

#[derive(Debug, Clone, Serialize)]
pub struct TaskStatus {
    pub task: String,
    pub status: String,
}

#[derive(Debug, Clone, Serialize)]
pub struct OutputDigest {
    pub file: String,
    pub sha256: String,
}

#[derive(Debug, Clone, Serialize)]
pub struct RunManifest {
    pub command: String,
    pub config_hash: String,
    pub version: String,
    pub grid: GridConfig,
    pub workers: usize,
    pub wall_clock_seconds: f64,
    pub tasks: Vec<TaskStatus>,
    pub outputs: Vec<OutputDigest>,
}

pub fn sha256_hex(bytes: &[u8]) -> String {
    Sha256::digest(bytes).iter().map(|b| format!("{b:02x}")).collect()
}

/// Collects output payloads and writes them together with the manifest.
struct Outputs {
    dir: PathBuf,
    files: Vec<(String, Vec<u8>)>,
    tasks: Vec<TaskStatus>,
}

impl Outputs {
    fn new(dir: &Path) -> Outputs {
        Outputs {
            dir: dir.to_path_buf(),
            files: Vec::new(),
            tasks: Vec::new(),
        }
    }

    fn add(&mut self, name: impl Into<String>, data: impl Into<Vec<u8>>) {
        self.files.push((name.into(), data.into()));
    }

    fn json(&mut self, name: &str, value: &impl Serialize) {
        let mut s = serde_json::to_string_pretty(value).expect("json");
        s.push('\n');
        self.add(name, s);
    }

    fn task(&mut self, task: impl Into<String>, status: impl Into<String>) {
        self.tasks.push(TaskStatus {
            task: task.into(),
            status: status.into(),
        });
    }

    fn finish(self, command: &str, cfg: &RunConfig, workers: usize, start: Instant) -> Result<(), HarnessError> {
        let mut outputs = Vec::new();
        for (name, data) in &self.files {
            let path = self.dir.join(name);
            if let Some(parent) = path.parent() {
                fs::create_dir_all(parent)?;
            }
            fs::write(&path, data)?;
            outputs.push(OutputDigest {
                file: name.clone(),
                sha256: sha256_hex(data),
            });
        }
        let manifest = RunManifest {
            command: command.to_string(),
            config_hash: sha256_hex(config_to_toml(cfg).as_bytes()),
            version: env!("CARGO_PKG_VERSION").to_string(),
            grid: cfg.grid,
            workers,
            wall_clock_seconds: start.elapsed().as_secs_f64(),
            tasks: self.tasks,
            outputs,
        };
        fs::create_dir_all(&self.dir)?;
        let mut s = serde_json::to_string_pretty(&manifest).expect("json");
        s.push('\n');
        fs::write(self.dir.join("manifest.json"), s)?;
        Ok(())
    }
}

/// Profiles solved chain by chain; each chain continues from its own first member.
pub fn solve_chains(cfg: &RunConfig, omegas: &[f64], m: i64, chains: usize) -> Vec<Result<RadialProfile, ProfileError>> {
    let chains = chains.clamp(1, omegas.len().max(1));
    let per = omegas.len().div_ceil(chains);
    let parts: Vec<&[f64]> = omegas.chunks(per.max(1)).collect();
    let solved: Vec<Vec<Result<RadialProfile, ProfileError>>> = parts
        .par_iter()
        .map(|chain| {
            let basis = SplineBasis::new(cfg.grid);
            let mut out: Vec<Result<RadialProfile, ProfileError>> = Vec::with_capacity(chain.len());
            let mut last: Option<RadialProfile> = None;
            for &w in chain.iter() {
                let r = solve_profile_on(&basis, &cfg.model, &cfg.potential, w, m, last.as_ref(), &cfg.solver).or_else(|e| {
                    if last.is_some() {
                        solve_profile_on(&basis, &cfg.model, &cfg.potential, w, m, None, &cfg.solver)
                    } else {
                        Err(e)
                    }
                });
                if let Ok(p) = &r {
                    last = Some(p.clone());
                }
                out.push(r);
            }
            out
        })
        .collect();
    solved.into_iter().flatten().collect()
}

pub struct SweepOutput {
    pub ledger_csv: String,
    pub rows: Vec<StabilityLedger>,
    /// per-frequency JSON payloads in sweep order
    pub reports: Vec<(String, String)>,
    pub failures: Vec<String>,
}

/// Full hypothesis sweep on a pool of `workers` threads; the output does not depend on `workers`.
pub fn run_sweep(cfg: &RunConfig, workers: usize) -> Result<SweepOutput, HarnessError> {
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(workers)
        .build()
        .map_err(|e| HarnessError::Config(e.to_string()))?;
    pool.install(|| sweep_inner(cfg))
}

fn sweep_inner(cfg: &RunConfig) -> Result<SweepOutput, HarnessError> {
    let sw = &cfg.sweep;
    let omegas = sw.omegas();
    if omegas.is_empty() {
        return Err(HarnessError::Config("sweep.points must be positive".into()));
    }
    let solved = solve_chains(cfg, &omegas, sw.m, sw.chains);
    let mut failures = Vec::new();
    let mut profiles = Vec::new();
    for (w, r) in omegas.iter().zip(solved) {
        match r {
            Ok(p) => profiles.push(p),
            Err(e) => failures.push(format!("{w:?},{}", e.name())),
        }
    }
    let family = family_from(profiles);
    let indices: Vec<usize> = (0..family.profiles.len()).collect();
    let h5 = !family.q_prime_sign_change && family.q_prime.iter().all(|q| *q != 0.0);
    let rows: Vec<(StabilityLedger, Option<crate::spectra::SpectrumReport>)> = if family.profiles.len() >= 3 {
        indices
            .par_iter()
            .map(|&i| crate::spectra::ledger_row(&family.profiles[i], family.q_prime[i], h5, &cfg.spectrum))
            .collect()
    } else {
        hypothesis_ledger(&family, &cfg.spectrum)
    };
    let mut reports = Vec::new();
    for (i, (row, rep)) in rows.iter().enumerate() {
        let payload = serde_json::json!({
            "ledger": row,
            "spectrum": rep.as_ref().map(|r| r.json()),
            "catalog": rep.as_ref().map(|r| &r.catalog),
        });
        let mut s = serde_json::to_string_pretty(&payload).expect("json");
        s.push('\n');
        reports.push((format!("reports/omega_{i:03}.json"), s));
    }
    let ledger: Vec<StabilityLedger> = rows.into_iter().map(|r| r.0).collect();
    let mut csv = ledger_csv(&ledger);
    for f in &failures {
        csv.push_str(&format!("{f}\n"));
    }
    Ok(SweepOutput {
        ledger_csv: csv,
        rows: ledger,
        reports,
        failures,
    })
}

/// Points uniform on the unit sphere of C^n.
pub fn sphere_samples(n_modes: usize, count: usize, seed: u64) -> Vec<Vec<Complex64>> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    (0..count)
        .map(|_| {
            let v: Vec<Complex64> = (0..n_modes)
                .map(|_| Complex64::new(StandardNormal.sample(&mut rng), StandardNormal.sample(&mut rng)))
                .collect();
            let norm = v.iter().map(|z| z.norm_sqr()).sum::<f64>().sqrt();
            v.into_iter().map(|z| z / norm).collect()
        })
        .collect()
}

#[derive(Parser, Debug)]
#[command(name = "vortex-spectra", version, about = "Vortex profiles, Krein signatures and golden-rule radiation models")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Args, Debug, Clone, Default)]
pub struct Common {
    /// TOML configuration file
    #[arg(long, global = true)]
    pub config: Option<PathBuf>,
    /// output directory
    #[arg(long, global = true)]
    pub out: Option<PathBuf>,
    /// worker threads (overrides the config and VORTEX_SPECTRA_WORKERS)
    #[arg(long, global = true)]
    pub workers: Option<usize>,
}

#[derive(Subcommand, Debug)]
pub enum Command {
    /// Solve one vortex profile
    Profile {
        #[arg(long)]
        omega: Option<f64>,
        #[arg(long)]
        m: Option<i64>,
        #[arg(long)]
        epsilon: Option<f64>,
        #[command(flatten)]
        common: Common,
    },
    /// Point spectrum, signatures and catalog at one frequency
    Spectrum {
        #[arg(long)]
        omega: Option<f64>,
        #[arg(long)]
        m: Option<i64>,
        #[command(flatten)]
        common: Common,
    },
    /// Hypothesis ledger over a frequency range
    Sweep {
        #[arg(long)]
        m: Option<i64>,
        #[arg(long, num_args = 2, value_names = ["MIN", "MAX"])]
        range: Option<Vec<f64>>,
        #[arg(long)]
        points: Option<usize>,
        #[command(flatten)]
        common: Common,
    },
    /// Critical frequency of the first eigenvalue collision
    OmegaCr {
        #[arg(long)]
        m: Option<i64>,
        #[arg(long, num_args = 2, value_names = ["LO", "HI"])]
        bracket: Option<Vec<f64>>,
        /// repeat on the doubled grid
        #[arg(long)]
        check_refined: bool,
        #[command(flatten)]
        common: Common,
    },
    /// Single mode radiating through the cubic channel
    FgrModel1 {
        #[arg(long, value_parser = ["gaussian"])]
        preset: Option<String>,
        #[arg(long)]
        z0: Option<f64>,
        #[command(flatten)]
        common: Common,
    },
    /// Several modes of either signature coupled to a two-component field
    FgrModel2 {
        #[arg(long, value_parser = ["single", "two-mode"])]
        preset: Option<String>,
        #[command(flatten)]
        common: Common,
    },
    /// Radiation quadratic form on random unit vectors
    Gamma {
        #[arg(long, value_parser = ["single", "two-mode"])]
        preset: Option<String>,
        #[arg(long)]
        samples: Option<usize>,
        #[arg(long)]
        seed: Option<u64>,
        #[command(flatten)]
        common: Common,
    },
    /// Summary of the results found in the output directory
    Report {
        #[command(flatten)]
        common: Common,
    },
}

impl Command {
    fn common(&self) -> &Common {
        match self {
            Command::Profile { common, .. }
            | Command::Spectrum { common, .. }
            | Command::Sweep { common, .. }
            | Command::OmegaCr { common, .. }
            | Command::FgrModel1 { common, .. }
            | Command::FgrModel2 { common, .. }
            | Command::Gamma { common, .. }
            | Command::Report { common } => common,
        }
    }

    fn name(&self) -> &'static str {
        match self {
            Command::Profile { .. } => "profile",
            Command::Spectrum { .. } => "spectrum",
            Command::Sweep { .. } => "sweep",
            Command::OmegaCr { .. } => "omega-cr",
            Command::FgrModel1 { .. } => "fgr-model1",
            Command::FgrModel2 { .. } => "fgr-model2",
            Command::Gamma { .. } => "gamma",
            Command::Report { .. } => "report",
        }
    }
}

/// Parses argv, runs the command and returns the process exit code.
pub fn cli<I, T>(argv: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<std::ffi::OsString> + Clone,
{
    let parsed = match Cli::try_parse_from(argv) {
        Ok(c) => c,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() { EXIT_CONFIG } else { EXIT_OK };
        }
    };
    match run(parsed.command) {
        Ok(()) => EXIT_OK,
        Err(e) => {
            eprintln!("error: {e}");
            e.exit_code()
        }
    }
}

fn model1_config(cfg: &RunConfig, preset: Option<&str>, z0: Option<f64>) -> Result<Model1Config, HarnessError> {
    let mut m1 = match (preset, &cfg.fgr) {
        (Some(_), _) => Model1Config::gaussian_preset(z0.unwrap_or(0.3)),
        (None, Some(FgrSection::Model1(m))) => m.clone(),
        (None, _) => return Err(HarnessError::Config("fgr-model1 needs --preset or an [fgr] section with G".into())),
    };
    if let (None, Some(z)) = (preset, z0) {
        m1.z0 = Complex64::new(z, 0.0);
    }
    Ok(m1)
}

fn model2_config(cfg: &RunConfig, preset: Option<&str>) -> Result<Model2Config, HarnessError> {
    match (preset, &cfg.fgr) {
        (Some("single"), _) => Ok(Model2Config::single_mode_preset()),
        (Some(_), _) => Ok(Model2Config::two_mode_preset()),
        (None, Some(FgrSection::Model2(m))) => Ok(m.clone()),
        (None, _) => Err(HarnessError::Config("this command needs --preset or an [fgr] section with modes".into())),
    }
}

fn series_summary(ts: &TimeSeries) -> serde_json::Value {
    let e0 = ts.signed_energy[0].abs().max(f64::MIN_POSITIVE);
    serde_json::json!({
        "samples": ts.t.len(),
        "t_final": ts.t.last(),
        "hamiltonian_drift": ts.hamiltonian_drift(),
        "ledger_drift": ts.ledger_drift(e0),
        "max_boundary_fraction": ts.max_boundary_fraction,
        "fgr_constant": ts.fgr_constant,
    })
}

pub fn run(command: Command) -> Result<(), HarnessError> {
    let start = Instant::now();
    let common = command.common().clone();
    let mut cfg = match &common.config {
        Some(p) => load_config(p)?,
        None => RunConfig::default(),
    };
    if let Some(o) = &common.out {
        cfg.output_dir = o.clone();
    }
    let workers = resolve_workers(common.workers, cfg.workers)?;
    let name = command.name();
    let mut out = Outputs::new(&cfg.output_dir);
    match command {
        Command::Profile { omega, m, epsilon, .. } => {
            if let Some(w) = omega {
                cfg.profile.omega = w;
            }
            if let Some(m) = m {
                cfg.profile.m = m;
            }
            if let Some(e) = epsilon {
                cfg.potential.epsilon = e;
            }
            let p = solve(&cfg)?;
            out.add("profile.csv", p.to_csv());
            out.json("profile.json", &p.sidecar());
            out.task("profile", "ok");
        }
        Command::Spectrum { omega, m, .. } => {
            if let Some(w) = omega {
                cfg.profile.omega = w;
            }
            if let Some(m) = m {
                cfg.profile.m = m;
            }
            let p = solve(&cfg)?;
            let rep = full_spectrum(&p, &cfg.spectrum)?;
            out.json(
                "spectrum.json",
                &serde_json::json!({
                    "spectrum": rep.json(),
                    "catalog": rep.catalog,
                    "h8_ok": rep.h8_ok,
                    "unstable_harmonics": rep.unstable_harmonics,
                }),
            );
            out.task("spectrum", "ok");
        }
        Command::Sweep { m, range, points, .. } => {
            if let Some(m) = m {
                cfg.sweep.m = m;
            }
            if let Some(r) = range {
                cfg.sweep.omega_min = r[0];
                cfg.sweep.omega_max = r[1];
            }
            if let Some(p) = points {
                cfg.sweep.points = p;
            }
            let s = run_sweep(&cfg, workers)?;
            out.add("ledger.csv", s.ledger_csv.clone());
            for (name, payload) in &s.reports {
                out.add(name.clone(), payload.clone());
            }
            for row in &s.rows {
                let status = if row.errors.is_empty() { "ok".to_string() } else { row.errors.join(";") };
                out.task(format!("omega={:?}", row.omega), status);
            }
            for f in &s.failures {
                out.task(format!("omega={}", f.split(',').next().unwrap_or("")), f.clone());
            }
        }
        Command::OmegaCr {
            m, bracket, check_refined, ..
        } => {
            if let Some(m) = m {
                cfg.omega_cr.m = m;
            }
            if let Some(b) = bracket {
                cfg.omega_cr.bracket = [b[0], b[1]];
            }
            cfg.omega_cr.check_refined |= check_refined;
            let oc = &cfg.omega_cr;
            let detect = |grid: GridConfig| {
                detect_omega_cr(
                    &cfg.model,
                    &cfg.potential,
                    oc.m,
                    (oc.bracket[0], oc.bracket[1]),
                    grid,
                    &cfg.solver,
                    &cfg.spectrum,
                    &oc.search,
                )
            };
            let r = detect(cfg.grid)?;
            out.task("omega_cr", "ok");
            let refined = if oc.check_refined {
                let rr = detect(cfg.grid.refined())?;
                out.task("omega_cr_refined", "ok");
                Some(serde_json::json!({
                    "omega_cr": rr.omega_cr,
                    "lambda_cr": rr.lambda_cr,
                    "within_tol": (rr.omega_cr - r.omega_cr).abs() <= oc.search.tol_omega,
                }))
            } else {
                None
            };
            out.json("omega_cr.json", &serde_json::json!({ "result": r, "refined": refined }));
        }
        Command::FgrModel1 { preset, z0, .. } => {
            let m1 = model1_config(&cfg, preset.as_deref(), z0)?;
            let ts = simulate_model1(&m1)?;
            out.add("model1.csv", ts.to_csv());
            out.json("model1.json", &series_summary(&ts));
            out.task("model1", "ok");
        }
        Command::FgrModel2 { preset, .. } => {
            let m2 = model2_config(&cfg, preset.as_deref())?;
            let ts = simulate_model2(&m2)?;
            out.add("model2.csv", ts.to_csv());
            out.json("model2.json", &series_summary(&ts));
            out.task("model2", "ok");
        }
        Command::Gamma {
            preset, samples, seed, ..
        } => {
            let m2 = model2_config(&cfg, preset.as_deref())?;
            if let Some(s) = samples {
                cfg.gamma.samples = s;
            }
            if let Some(s) = seed {
                cfg.gamma.seed = s;
            }
            let zeta = sphere_samples(m2.modes.len(), cfg.gamma.samples, cfg.gamma.seed);
            let chunks: Vec<&[Vec<Complex64>]> = zeta.chunks(zeta.len().div_ceil(workers).max(1)).collect();
            let pool = rayon::ThreadPoolBuilder::new()
                .num_threads(workers)
                .build()
                .map_err(|e| HarnessError::Config(e.to_string()))?;
            let parts: Vec<Result<GammaResult, FgrError>> = pool.install(|| chunks.par_iter().map(|c| gamma_model2(&m2, c)).collect());
            let mut values = Vec::new();
            let mut margin = f64::INFINITY;
            let mut levels = Vec::new();
            for p in parts {
                let p = p?;
                values.extend(p.gamma_values);
                margin = margin.min(p.h13_margin);
                levels = p.levels;
            }
            let samples: Vec<Vec<[f64; 2]>> = zeta.iter().map(|z| z.iter().map(|c| [c.re, c.im]).collect()).collect();
            out.json(
                "gamma.json",
                &serde_json::json!({
                    "levels": levels,
                    "gamma_values": values,
                    "h13_margin": margin,
                    "samples": samples,
                }),
            );
            out.task("gamma", "ok");
        }
        Command::Report { .. } => {
            out.json("report.json", &report(&cfg)?);
            out.task("report", "ok");
        }
    }
    out.finish(name, &cfg, workers, start)
}

fn solve(cfg: &RunConfig) -> Result<RadialProfile, HarnessError> {
    let basis = SplineBasis::new(cfg.grid);
    Ok(solve_profile_on(
        &basis,
        &cfg.model,
        &cfg.potential,
        cfg.profile.omega,
        cfg.profile.m,
        None,
        &cfg.solver,
    )?)
}

fn read_json(dir: &Path, name: &str) -> Option<serde_json::Value> {
    fs::read_to_string(dir.join(name)).ok().and_then(|s| serde_json::from_str(&s).ok())
}

/// Existence window plus whatever earlier commands left in the output directory.
fn report(cfg: &RunConfig) -> Result<serde_json::Value, HarnessError> {
    let dir = &cfg.output_dir;
    let window = existence_window(&cfg.model, WINDOW_S_MAX)?;
    let ledger = fs::read_to_string(dir.join("ledger.csv")).ok().map(|csv| {
        let mut lines = csv.lines();
        let header: Vec<&str> = lines.next().unwrap_or("").split(',').collect();
        let col = |name: &str| header.iter().position(|h| *h == name);
        let (h6, res) = (col("h6"), col("identity_residual"));
        let rows: Vec<Vec<&str>> = lines.map(|l| l.split(',').collect()).collect();
        let h6_values: Vec<&str> = rows.iter().filter_map(|r| h6.and_then(|i| r.get(i).copied())).collect();
        let flips = h6_values.windows(2).filter(|w| w[0] != w[1]).count();
        let residuals: Vec<&str> = rows.iter().filter_map(|r| res.and_then(|i| r.get(i).copied())).collect();
        serde_json::json!({ "rows": rows.len(), "h6_flips": flips, "identity_residuals": residuals })
    });
    Ok(serde_json::json!({
        "existence_window": { "omega_star": window.omega_star },
        "sweep": ledger,
        "omega_cr": read_json(dir, "omega_cr.json").map(|v| v["result"].clone()),
        "model1": read_json(dir, "model1.json"),
        "model2": read_json(dir, "model2.json"),
        "gamma": read_json(dir, "gamma.json").map(|v| serde_json::json!({ "h13_margin": v["h13_margin"], "levels": v["levels"] })),
    }))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn unknown_key_reports_path() {
        let e = parse_config("[grid]\nr_max = 40.0\nelements = 10\nbogus = 1\n").unwrap_err();
        assert!(e.to_string().contains("grid"), "{e}");
        assert_eq!(e.exit_code(), EXIT_CONFIG);
        let e = parse_config("[fgr]\nmodes = []\nomega = 1.0\ncouplings = []\nbox = 10.0\nn_grid = 8\ndt = 0.1\nt_final = 1.0\nz0 = []\nextra = 2\n").unwrap_err();
        assert!(e.to_string().contains("fgr"), "{e}");
    }

    #[test]
    fn default_config_round_trips() {
        let cfg = RunConfig::default();
        assert_eq!(parse_config(&config_to_toml(&cfg)).unwrap(), cfg);
    }

    #[test]
    fn sphere_samples_are_unit_and_seeded() {
        let a = sphere_samples(3, 10, 1);
        assert_eq!(a, sphere_samples(3, 10, 1));
        for z in &a {
            assert!((z.iter().map(|c| c.norm_sqr()).sum::<f64>() - 1.0).abs() < 1e-12);
        }
    }

    #[test]
    fn sweep_grid_includes_endpoints() {
        let s = SweepSection::default();
        let w = s.omegas();
        assert_eq!(w.len(), 11);
        assert_eq!(w[0], 0.13);
        assert!((w[10] - 0.18).abs() < 1e-15);
    }
}
