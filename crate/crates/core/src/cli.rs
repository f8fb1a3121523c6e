//! Run-config parsing, scenario orchestration, reports, plots and manifests.
//!
//! Config files are line-oriented `section.key = value` with `#` comments.
//! Lists are comma separated; atoms are `volume:number` pairs.

use std::collections::BTreeMap;
use std::fmt::{self, Write as _};
use std::fs;
use std::path::{Path, PathBuf};
use std::time::Instant;

use rayon::prelude::*;
use sha2::{Digest, Sha256};
use thiserror::Error;

use crate::diagnostics::{
    self, blowup_time_bound, diagnostics_csv, gelation_time_from_series, positivity_cascade_probe, sweep_csv,
    tail_decay_fit, DiagnosticRow, GelationEstimate, KernelConstants,
};
use crate::kernels::{certify_assumption, DeclaredParams, Kernel, KernelForm, SamplingSpec};
use crate::measures::{MassPairSearch, SizeDistribution};
use crate::solver_fv::{self, FvConfig, RunStatus};
use crate::solver_mc::{self, InitSpec, McConfig};

pub const VERSION: &str = env!("CARGO_PKG_VERSION");

pub const KERNEL_FORMS: &[&str] =
    &["differential_sedimentation", "sum", "power_difference", "abs_difference", "constant"];

pub const INIT_FORMS: &[&str] = &["exponential", "uniform", "dirac"];

const KNOWN_KEYS: &[&str] = &[
    "run.scenario",
    "run.id",
    "run.seed",
    "run.out_dir",
    "kernel.form",
    "kernel.gamma",
    "kernel.d1",
    "kernel.d2",
    "kernel.rate",
    "init.form",
    "init.mean",
    "init.lo",
    "init.hi",
    "init.total",
    "init.atoms",
    "solver.v_min",
    "solver.v_max",
    "solver.bins_per_decade",
    "solver.dt_safety",
    "solver.t_end",
    "solver.sample_interval",
    "solver.max_dt",
    "solver.min_dt",
    "solver.stop_at_gel_fraction",
    "mc.n_particles",
    "mc.t_end",
    "mc.n_replicas",
    "diagnostics.epsilon",
    "diagnostics.theta",
    "diagnostics.r_values",
    "diagnostics.m_values",
    "diagnostics.snapshot_time",
    "sweep.v_max",
    "sweep.n",
    "cascade.time",
    "cascade.n_steps",
    "cascade.horizon",
    "cascade.n_max",
    "certify.require_diagonal_vanishing",
    "certify.gamma",
    "certify.crossover",
    "certify.h_lower",
    "certify.h_upper",
    "certify.g_lower",
    "certify.g_upper",
    "certify.vanishing_order",
    "certify.v_min",
    "certify.v_max",
    "certify.n_v",
    "certify.n_x",
];

#[derive(Debug, Error, Clone, PartialEq)]
pub enum ConfigError {
    #[error("line {line}: expected `section.key = value`, got `{text}`")]
    Syntax { line: usize, text: String },
    #[error("line {line}: unknown key `{key}`")]
    UnknownKey { line: usize, key: String },
    #[error("line {line}: duplicate key `{key}`")]
    DuplicateKey { line: usize, key: String },
    #[error("missing required key `{0}`")]
    MissingKey(String),
    #[error("line {line}: malformed number `{value}` for `{key}`")]
    MalformedNumber { line: usize, key: String, value: String },
    #[error("unknown kernel form `{given}`; valid forms: {}", KERNEL_FORMS.join(", "))]
    UnknownKernelForm { given: String },
    #[error("unknown initial-data form `{given}`; valid forms: {}", INIT_FORMS.join(", "))]
    UnknownInitForm { given: String },
    #[error("unknown scenario `{0}`; valid scenarios: simulate_fv, simulate_mc, sweep_vmax, sweep_n, certify_kernel, cascade_probe")]
    UnknownScenario(String),
    #[error("invalid configuration: {0}")]
    Invalid(String),
}

#[derive(Debug, Error)]
pub enum CliError {
    #[error(transparent)]
    Config(#[from] ConfigError),
    #[error("I/O error on {path}: {source}")]
    Io { path: PathBuf, source: std::io::Error },
    #[error("numerical failure: {0}")]
    Numerical(String),
    #[error("nothing to report")]
    NothingToReport,
}

impl CliError {
    /// Process exit code: 2 config, 3 numerical, 4 I/O.
    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Config(_) => 2,
            CliError::Numerical(_) | CliError::NothingToReport => 3,
            CliError::Io { .. } => 4,
        }
    }
}

fn io_err(path: &Path) -> impl FnOnce(std::io::Error) -> CliError + '_ {
    move |source| CliError::Io { path: path.to_path_buf(), source }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum Scenario {
    SimulateFv,
    SimulateMc,
    SweepVmax,
    SweepN,
    CertifyKernel,
    CascadeProbe,
}

impl Scenario {
    pub const ALL: [Scenario; 6] = [
        Scenario::SimulateFv,
        Scenario::SimulateMc,
        Scenario::SweepVmax,
        Scenario::SweepN,
        Scenario::CertifyKernel,
        Scenario::CascadeProbe,
    ];

    pub fn name(self) -> &'static str {
        match self {
            Scenario::SimulateFv => "simulate_fv",
            Scenario::SimulateMc => "simulate_mc",
            Scenario::SweepVmax => "sweep_vmax",
            Scenario::SweepN => "sweep_n",
            Scenario::CertifyKernel => "certify_kernel",
            Scenario::CascadeProbe => "cascade_probe",
        }
    }

    fn required_keys(self) -> &'static [&'static str] {
        match self {
            Scenario::SimulateFv => &["kernel.form", "init.form", "solver.v_max", "solver.t_end"],
            Scenario::SimulateMc => &["kernel.form", "init.form", "mc.n_particles", "mc.t_end"],
            Scenario::SweepVmax => &["kernel.form", "init.form", "sweep.v_max", "solver.t_end"],
            Scenario::SweepN => &["kernel.form", "init.form", "sweep.n", "mc.t_end"],
            Scenario::CertifyKernel => &["kernel.form"],
            Scenario::CascadeProbe => &["kernel.form", "init.form", "solver.v_max", "cascade.time"],
        }
    }
}

impl fmt::Display for Scenario {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl std::str::FromStr for Scenario {
    type Err = ConfigError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        Scenario::ALL.into_iter().find(|sc| sc.name() == s).ok_or_else(|| ConfigError::UnknownScenario(s.to_string()))
    }
}

/// Initial data shared by both solvers.
#[derive(Debug, Clone, PartialEq)]
pub enum InitData {
    /// Exponential number density carrying `total` particles.
    Exponential {
        mean: f64,
        total: f64,
    },
    Uniform {
        lo: f64,
        hi: f64,
        total: f64,
    },
    /// Atoms `(volume, number)`.
    Dirac(Vec<(f64, f64)>),
}

impl InitData {
    pub fn on_grid(&self, fv: &FvConfig) -> Result<SizeDistribution, CliError> {
        let grid = fv.grid().map_err(|e| ConfigError::Invalid(e.to_string()))?;
        let dist = match self {
            InitData::Exponential { mean, total } => SizeDistribution::exponential(grid, *mean, *total),
            InitData::Uniform { lo, hi, total } => SizeDistribution::uniform(grid, *lo, *hi, *total),
            InitData::Dirac(atoms) => SizeDistribution::from_atoms(grid, atoms),
        };
        dist.map_err(|e| ConfigError::Invalid(e.to_string()).into())
    }

    pub fn mc_spec(&self) -> InitSpec {
        match self {
            InitData::Exponential { mean, .. } => InitSpec::Exponential { mean: *mean },
            InitData::Uniform { lo, hi, .. } => InitSpec::Uniform { lo: *lo, hi: *hi },
            InitData::Dirac(atoms) => InitSpec::Dirac(atoms.clone()),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct DiagnosticsSpec {
    pub epsilon: f64,
    pub theta: f64,
    pub r_values: Vec<f64>,
    pub m_values: Vec<f64>,
    /// Snapshot used for the tail fit and blow-up bound; defaults to the
    /// last pre-gelation sample.
    pub snapshot_time: Option<f64>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct CascadeSpec {
    pub time: f64,
    pub n_steps: usize,
    pub horizon: f64,
    pub n_max: u32,
}

#[derive(Debug, Clone, PartialEq)]
pub struct CertifySpec {
    pub declared: DeclaredParams,
    pub sampling: SamplingSpec,
}

#[derive(Debug, Clone, PartialEq)]
pub struct RunConfig {
    pub scenario: Scenario,
    pub run_id: String,
    pub seed: u64,
    pub out_dir: PathBuf,
    pub kernel: Kernel,
    pub init: Option<InitData>,
    pub fv: FvConfig,
    pub mc: McConfig,
    pub diagnostics: DiagnosticsSpec,
    pub sweep_vmax: Vec<f64>,
    pub sweep_n: Vec<usize>,
    pub cascade: CascadeSpec,
    pub certify: CertifySpec,
    /// SHA-256 of the config text.
    pub config_hash: String,
    /// Every key with its effective value, defaults included, sorted.
    pub resolved: BTreeMap<String, String>,
}

struct Entries {
    values: BTreeMap<String, (usize, String)>,
    resolved: BTreeMap<String, String>,
}

impl Entries {
    fn parse(text: &str) -> Result<Entries, ConfigError> {
        let mut values = BTreeMap::new();
        for (idx, raw) in text.lines().enumerate() {
            let line = idx + 1;
            let content = raw.split('#').next().unwrap_or("").trim();
            if content.is_empty() {
                continue;
            }
            let (key, value) = content
                .split_once('=')
                .map(|(k, v)| (k.trim(), v.trim()))
                .filter(|(k, _)| k.contains('.') && !k.is_empty())
                .ok_or_else(|| ConfigError::Syntax { line, text: raw.trim().to_string() })?;
            if !KNOWN_KEYS.contains(&key) {
                return Err(ConfigError::UnknownKey { line, key: key.to_string() });
            }
            if values.insert(key.to_string(), (line, value.to_string())).is_some() {
                return Err(ConfigError::DuplicateKey { line, key: key.to_string() });
            }
        }
        Ok(Entries { values, resolved: BTreeMap::new() })
    }

    fn raw(&mut self, key: &str) -> Option<(usize, String)> {
        let v = self.values.get(key).cloned();
        if let Some((_, s)) = &v {
            self.resolved.insert(key.to_string(), s.clone());
        }
        v
    }

    fn number<T: std::str::FromStr + ToString>(&mut self, key: &str) -> Result<Option<T>, ConfigError> {
        match self.raw(key) {
            None => Ok(None),
            Some((line, s)) => s.parse::<T>().map(Some).map_err(|_| ConfigError::MalformedNumber {
                line,
                key: key.to_string(),
                value: s,
            }),
        }
    }

    fn number_or<T: std::str::FromStr + ToString + Clone>(&mut self, key: &str, default: T) -> Result<T, ConfigError> {
        let v = self.number(key)?.unwrap_or(default);
        self.resolved.insert(key.to_string(), v.to_string());
        Ok(v)
    }

    fn required<T: std::str::FromStr + ToString>(&mut self, key: &str) -> Result<T, ConfigError> {
        self.number(key)?.ok_or_else(|| ConfigError::MissingKey(key.to_string()))
    }

    fn list<T: std::str::FromStr>(&mut self, key: &str) -> Result<Option<Vec<T>>, ConfigError> {
        match self.raw(key) {
            None => Ok(None),
            Some((line, s)) => s
                .split(',')
                .map(|x| x.trim())
                .filter(|x| !x.is_empty())
                .map(|x| {
                    x.parse::<T>().map_err(|_| ConfigError::MalformedNumber {
                        line,
                        key: key.to_string(),
                        value: x.to_string(),
                    })
                })
                .collect::<Result<Vec<T>, _>>()
                .map(Some),
        }
    }

    fn flag(&mut self, key: &str, default: bool) -> Result<bool, ConfigError> {
        let v = match self.raw(key) {
            None => default,
            Some((line, s)) => match s.as_str() {
                "true" => true,
                "false" => false,
                _ => return Err(ConfigError::Syntax { line, text: format!("{key} = {s} (expected true or false)") }),
            },
        };
        self.resolved.insert(key.to_string(), v.to_string());
        Ok(v)
    }
}

fn parse_kernel(e: &mut Entries) -> Result<Kernel, ConfigError> {
    let form = e.raw("kernel.form").map(|(_, s)| s).ok_or_else(|| ConfigError::MissingKey("kernel.form".into()))?;
    let form = match form.as_str() {
        "differential_sedimentation" => KernelForm::DifferentialSedimentation,
        "sum" => KernelForm::Sum { gamma: e.required("kernel.gamma")? },
        "power_difference" => {
            KernelForm::PowerDifference { d1: e.required("kernel.d1")?, d2: e.required("kernel.d2")? }
        }
        "abs_difference" => KernelForm::AbsDifference { d1: e.required("kernel.d1")?, d2: e.required("kernel.d2")? },
        "constant" => KernelForm::Constant { rate: e.number_or("kernel.rate", 1.0)? },
        _ => return Err(ConfigError::UnknownKernelForm { given: form }),
    };
    Kernel::new(form).map_err(|err| ConfigError::Invalid(err.to_string()))
}

fn parse_init(e: &mut Entries) -> Result<Option<InitData>, ConfigError> {
    let Some((_, form)) = e.raw("init.form") else {
        return Ok(None);
    };
    let init = match form.as_str() {
        "exponential" => {
            InitData::Exponential { mean: e.number_or("init.mean", 1.0)?, total: e.number_or("init.total", 1.0)? }
        }
        "uniform" => InitData::Uniform {
            lo: e.required("init.lo")?,
            hi: e.required("init.hi")?,
            total: e.number_or("init.total", 1.0)?,
        },
        "dirac" => {
            let (line, text) = e.raw("init.atoms").ok_or_else(|| ConfigError::MissingKey("init.atoms".into()))?;
            let atoms = text
                .split(',')
                .map(|a| a.trim())
                .filter(|a| !a.is_empty())
                .map(|a| {
                    let bad = || ConfigError::MalformedNumber { line, key: "init.atoms".into(), value: a.to_string() };
                    let (v, w) = a.split_once(':').ok_or_else(bad)?;
                    Ok((v.trim().parse::<f64>().map_err(|_| bad())?, w.trim().parse::<f64>().map_err(|_| bad())?))
                })
                .collect::<Result<Vec<_>, ConfigError>>()?;
            if atoms.is_empty() {
                return Err(ConfigError::Invalid("init.atoms is empty".into()));
            }
            InitData::Dirac(atoms)
        }
        _ => return Err(ConfigError::UnknownInitForm { given: form }),
    };
    Ok(Some(init))
}

/// Parses and validates a config for `scenario`; `seed` overrides `run.seed`.
pub fn parse_config_str(text: &str, scenario: Scenario, seed: Option<u64>) -> Result<RunConfig, ConfigError> {
    let mut e = Entries::parse(text)?;
    if let Some((_, s)) = e.raw("run.scenario") {
        let declared: Scenario = s.parse()?;
        if declared != scenario {
            return Err(ConfigError::Invalid(format!(
                "config declares scenario {declared} but {scenario} was requested"
            )));
        }
    }
    e.resolved.insert("run.scenario".into(), scenario.name().into());
    for key in scenario.required_keys() {
        if !e.values.contains_key(*key) {
            return Err(ConfigError::MissingKey(key.to_string()));
        }
    }
    let config_seed = e.number_or("run.seed", 0u64)?;
    let seed = seed.unwrap_or(config_seed);
    e.resolved.insert("run.seed".into(), seed.to_string());
    let run_id = e.raw("run.id").map(|(_, s)| s).unwrap_or_else(|| scenario.name().to_string());
    e.resolved.insert("run.id".into(), run_id.clone());
    if run_id.contains(',') || run_id.contains('\n') {
        return Err(ConfigError::Invalid("run.id must not contain commas".into()));
    }
    let out_dir = e.raw("run.out_dir").map(|(_, s)| s).unwrap_or_else(|| "out".to_string());

    let kernel = parse_kernel(&mut e)?;
    let init = parse_init(&mut e)?;

    let d = FvConfig::default();
    let fv = FvConfig {
        v_min: e.number_or("solver.v_min", d.v_min)?,
        v_max: e.number_or("solver.v_max", d.v_max)?,
        bins_per_decade: e.number_or("solver.bins_per_decade", d.bins_per_decade)?,
        dt_safety: e.number_or("solver.dt_safety", d.dt_safety)?,
        t_end: e.number_or("solver.t_end", d.t_end)?,
        sample_interval: e.number_or("solver.sample_interval", d.sample_interval)?,
        max_dt: e.number_or("solver.max_dt", d.max_dt)?,
        min_dt: e.number_or("solver.min_dt", d.min_dt)?,
        stop_at_gel_fraction: e.number("solver.stop_at_gel_fraction")?,
        truncation_policy: d.truncation_policy,
    };
    let theta = e.number_or("diagnostics.theta", 0.2)?;
    let dm = McConfig::default();
    let mc = McConfig {
        n_particles: e.number_or("mc.n_particles", dm.n_particles)?,
        t_end: e.number_or("mc.t_end", dm.t_end)?,
        giant_fraction_theta: theta,
        seed,
        n_replicas: e.number_or("mc.n_replicas", dm.n_replicas)?,
    };
    let epsilon = e.number_or("diagnostics.epsilon", diagnostics::DEFAULT_EPSILON)?;
    if !(epsilon > 0.0 && epsilon < 1.0) {
        return Err(ConfigError::Invalid("diagnostics.epsilon must be in (0, 1)".into()));
    }
    let diagnostics = DiagnosticsSpec {
        epsilon,
        theta,
        r_values: e.list("diagnostics.r_values")?.unwrap_or_else(|| vec![4.0, 8.0, 16.0, 32.0, 64.0]),
        m_values: e.list("diagnostics.m_values")?.unwrap_or_else(|| vec![3.0, 5.0, 10.0]),
        snapshot_time: e.number("diagnostics.snapshot_time")?,
    };
    let sweep_vmax = e.list("sweep.v_max")?.unwrap_or_default();
    let sweep_n = e.list("sweep.n")?.unwrap_or_default();
    let cascade = CascadeSpec {
        time: e.number_or("cascade.time", 0.5)?,
        n_steps: e.number_or("cascade.n_steps", 3usize)?,
        horizon: e.number_or("cascade.horizon", 4.0)?,
        n_max: e.number_or("cascade.n_max", 20u32)?,
    };
    let ds = SamplingSpec::default();
    let certify = CertifySpec {
        declared: DeclaredParams {
            gamma: e.number("certify.gamma")?,
            crossover: e.number("certify.crossover")?,
            h_lower: e.number("certify.h_lower")?,
            h_upper: e.number("certify.h_upper")?,
            g_lower: e.number("certify.g_lower")?,
            g_upper: e.number("certify.g_upper")?,
            vanishing_order: e.number("certify.vanishing_order")?,
            require_diagonal_vanishing: e.flag("certify.require_diagonal_vanishing", false)?,
        },
        sampling: SamplingSpec {
            v_min: e.number_or("certify.v_min", ds.v_min)?,
            v_max: e.number_or("certify.v_max", ds.v_max)?,
            n_v: e.number_or("certify.n_v", ds.n_v)?,
            n_x: e.number_or("certify.n_x", ds.n_x)?,
            r_checks: ds.r_checks,
        },
    };

    let invalid = |m: String| ConfigError::Invalid(m);
    match scenario {
        Scenario::SimulateFv | Scenario::CascadeProbe => fv.validate().map_err(|x| invalid(x.to_string()))?,
        Scenario::SimulateMc | Scenario::SweepN => mc.validate().map_err(|x| invalid(x.to_string()))?,
        Scenario::SweepVmax => {
            if sweep_vmax.is_empty() {
                return Err(invalid("sweep.v_max is empty".into()));
            }
            for &v in &sweep_vmax {
                FvConfig { v_max: v, ..fv.clone() }.validate().map_err(|x| invalid(format!("sweep.v_max {v}: {x}")))?;
            }
        }
        Scenario::CertifyKernel => {}
    }
    if scenario == Scenario::SweepN && sweep_n.iter().any(|&n| n < 2) {
        return Err(invalid("sweep.n entries must be at least 2".into()));
    }
    if scenario == Scenario::SweepN && sweep_n.is_empty() {
        return Err(invalid("sweep.n is empty".into()));
    }

    let config_hash = hex::encode(Sha256::digest(text.as_bytes()));
    Ok(RunConfig {
        scenario,
        run_id,
        seed,
        out_dir: PathBuf::from(out_dir),
        kernel,
        init,
        fv,
        mc,
        diagnostics,
        sweep_vmax,
        sweep_n,
        cascade,
        certify,
        config_hash,
        resolved: e.resolved,
    })
}

/// Reads and parses the config file at `path`.
pub fn parse_config(path: &Path, scenario: Scenario, seed: Option<u64>) -> Result<RunConfig, CliError> {
    let text = fs::read_to_string(path).map_err(io_err(path))?;
    Ok(parse_config_str(&text, scenario, seed)?)
}

/// A named output file.
#[derive(Debug, Clone, PartialEq)]
pub struct Artifact {
    pub name: String,
    pub contents: String,
}

impl Artifact {
    fn new(name: impl Into<String>, contents: String) -> Self {
        Artifact { name: name.into(), contents }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct RunRecord {
    pub label: String,
    pub status: String,
}

/// Everything a scenario produced, before it is written out.
#[derive(Debug, Clone, PartialEq)]
pub struct ScenarioOutput {
    pub artifacts: Vec<Artifact>,
    pub runs: Vec<RunRecord>,
    /// One-line human summary.
    pub summary: String,
    /// Set when a run failed numerically; artifacts are still written.
    pub failure: Option<String>,
}

pub struct Manifest<'a> {
    pub config: &'a RunConfig,
    pub wall_clock_seconds: f64,
    pub runs: &'a [RunRecord],
    pub files: &'a [String],
}

impl Manifest<'_> {
    pub fn render(&self) -> String {
        let mut out = String::new();
        let _ = writeln!(out, "tool = gelab");
        let _ = writeln!(out, "version = {VERSION}");
        let _ = writeln!(out, "config_hash = sha256:{}", self.config.config_hash);
        let _ = writeln!(out, "seed = {}", self.config.seed);
        let _ = writeln!(out, "wall_clock_seconds = {:.3}", self.wall_clock_seconds);
        let _ = writeln!(out, "\n[config]");
        for (k, v) in &self.config.resolved {
            let _ = writeln!(out, "{k} = {v}");
        }
        let _ = writeln!(out, "\n[runs]");
        for r in self.runs {
            let _ = writeln!(out, "{} = {}", r.label, r.status);
        }
        let _ = writeln!(out, "\n[files]");
        for f in self.files {
            let _ = writeln!(out, "{f}");
        }
        out
    }
}

/// Fails early when `dir` cannot be created or written.
pub fn ensure_writable(dir: &Path) -> Result<(), CliError> {
    fs::create_dir_all(dir).map_err(io_err(dir))?;
    let probe = dir.join(".gelab_write_probe");
    fs::write(&probe, b"").map_err(io_err(&probe))?;
    fs::remove_file(&probe).map_err(io_err(&probe))
}

/// Writes `artifacts` in order and returns their paths.
pub fn write_artifacts(artifacts: &[Artifact], out_dir: &Path) -> Result<Vec<PathBuf>, CliError> {
    let mut paths = Vec::with_capacity(artifacts.len());
    for a in artifacts {
        let path = out_dir.join(&a.name);
        fs::write(&path, &a.contents).map_err(io_err(&path))?;
        paths.push(path);
    }
    Ok(paths)
}

/// Sweep table (`v_max,t_gel_eps`) and its log-log plot, ordered by `v_max`.
pub fn gelation_report(estimates: &[GelationEstimate]) -> Result<Vec<Artifact>, CliError> {
    if estimates.is_empty() {
        return Err(CliError::NothingToReport);
    }
    let mut sorted = estimates.to_vec();
    sorted.sort_by(|a, b| a.v_max.total_cmp(&b.v_max));
    let points: Vec<(f64, f64)> = sorted.iter().filter_map(|e| e.t_gel_eps.map(|t| (e.v_max, t))).collect();
    Ok(vec![
        Artifact::new("sweep_vmax.csv", sweep_csv(&sorted)),
        Artifact::new("sweep_vmax.svg", svg_plot("t_gel_eps vs v_max", "v_max", "t_gel_eps", &points, true, true)),
    ])
}

/// Writes the gelation report for `estimates` into `out_dir`.
pub fn emit_report(estimates: &[GelationEstimate], out_dir: &Path) -> Result<Vec<PathBuf>, CliError> {
    let artifacts = gelation_report(estimates)?;
    write_artifacts(&artifacts, out_dir)
}

fn numerical(e: impl fmt::Display) -> CliError {
    CliError::Numerical(e.to_string())
}

fn fv_status(status: RunStatus) -> (String, Option<String>) {
    match status {
        RunStatus::Completed => ("completed".into(), None),
        RunStatus::StoppedOnGel { time } => (format!("stopped_on_gel t={time}"), None),
        RunStatus::GelationRunaway { last_time } => {
            let s = format!("gelation_runaway t={last_time}");
            (s.clone(), Some(s))
        }
    }
}

fn require_init(config: &RunConfig) -> Result<&InitData, CliError> {
    config.init.as_ref().ok_or_else(|| ConfigError::MissingKey("init.form".into()).into())
}

/// Kernel constants for the blow-up bound: the canonical `H0 = 1/2` and the
/// certified profile floor.
fn kernel_constants(kernel: &Kernel) -> Option<KernelConstants> {
    let gamma = kernel.degree()?;
    if gamma <= 1.0 {
        return None;
    }
    let sampling = SamplingSpec { n_v: 24, n_x: 2001, ..SamplingSpec::default() };
    let report = certify_assumption(kernel, &DeclaredParams::default(), &sampling).ok()?;
    let p = report.params()?;
    Some(KernelConstants { h0: p.h_lower, g0: p.g_lower, k: p.vanishing_order, gamma, crossover: p.crossover })
}

fn simulate_fv(config: &RunConfig) -> Result<ScenarioOutput, CliError> {
    let init = require_init(config)?.on_grid(&config.fv)?;
    let traj = solver_fv::run(&init, &config.kernel, &config.fv).map_err(numerical)?;
    let id = &config.run_id;
    let est = gelation_time_from_series(&traj, config.diagnostics.epsilon).map_err(numerical)?;
    let mut rows = vec![
        DiagnosticRow::new(id, "steps", traj.steps as f64),
        DiagnosticRow::new(id, "final_time", *traj.times.last().unwrap()),
        DiagnosticRow::new(id, "final_gel_mass", traj.last().gel_mass),
        DiagnosticRow::new(id, "max_ledger_drift", traj.max_ledger_drift()),
        DiagnosticRow::new(id, "t_gel_eps", est.t_gel_eps.unwrap_or(f64::NAN)),
    ];
    // snapshot: requested time, else the last sample before the ε crossing
    let snap_t = config.diagnostics.snapshot_time.unwrap_or_else(|| {
        let limit = est.t_gel_eps.unwrap_or(f64::INFINITY);
        traj.times.iter().copied().rfind(|&t| t < limit).unwrap_or(0.0)
    });
    let snap = traj.state_at(snap_t);
    rows.push(DiagnosticRow::new(id, "snapshot_time", snap_t));
    let mut artifacts = vec![Artifact::new("trajectory.csv", traj.to_csv())];
    let gamma = config.kernel.degree().unwrap_or(1.0);
    let r_values = &config.diagnostics.r_values;
    let mut decay_points = Vec::new();
    match tail_decay_fit(snap, gamma, r_values) {
        Ok(fit) => {
            rows.push(DiagnosticRow::new(id, "tail_fit_slope", fit.slope));
            rows.push(DiagnosticRow::new(id, "tail_fit_intercept", fit.intercept));
            rows.push(DiagnosticRow::new(id, "tail_fit_r_squared", fit.r_squared));
            for (r, ok) in &fit.dini_flags {
                rows.push(DiagnosticRow::new(id, format!("dini_ok_R{r}"), if *ok { 1.0 } else { 0.0 }));
            }
            decay_points = fit.points.clone();
        }
        Err(e) => rows.push(DiagnosticRow::new(id, format!("tail_fit_unavailable: {e}").replace(',', ";"), f64::NAN)),
    }
    if let Some(consts) = kernel_constants(&config.kernel) {
        let v0 = traj.initial().mass();
        let r = r_values.iter().copied().fold(consts.crossover, f64::max);
        for &m in config.diagnostics.m_values.iter().filter(|&&m| m > 2.0) {
            if let Ok(b) = blowup_time_bound(snap, snap_t, r, m, consts, v0) {
                rows.push(DiagnosticRow::new(id, format!("blowup_bound_m{m}"), b.bound));
                rows.push(DiagnosticRow::new(id, format!("blowup_k_m{m}"), b.k_m));
            }
        }
    }
    artifacts.push(Artifact::new("diagnostics.csv", diagnostics_csv(&rows)));
    artifacts.push(Artifact::new("snapshot.csv", snap.to_csv()));
    artifacts.push(Artifact::new("final_state.csv", traj.last().to_csv()));
    artifacts.push(Artifact::new("tail_decay.svg", svg_plot("I_R decay", "R", "I_R", &decay_points, true, true)));
    let (status, failure) = fv_status(traj.status);
    let summary = format!(
        "simulate_fv: {} steps, gel_mass {:.6e}, t_gel_eps {}",
        traj.steps,
        traj.last().gel_mass,
        est.t_gel_eps.map_or("none".into(), |t| t.to_string())
    );
    Ok(ScenarioOutput { artifacts, runs: vec![RunRecord { label: id.clone(), status }], summary, failure })
}

fn simulate_mc(config: &RunConfig) -> Result<ScenarioOutput, CliError> {
    let spec = require_init(config)?.mc_spec();
    let mut system = solver_mc::init_system(&spec, &config.mc, 0).map_err(|e| ConfigError::Invalid(e.to_string()))?;
    let log = solver_mc::simulate(&mut system, &config.kernel, &config.mc);
    let id = &config.run_id;
    let detect = solver_mc::detect_gelation(&log, config.diagnostics.theta);
    let rows = vec![
        DiagnosticRow::new(id, "events", log.events.len() as f64),
        DiagnosticRow::new(id, "final_particles", log.final_count as f64),
        DiagnosticRow::new(id, "largest_final_particle", log.final_largest.get()),
        DiagnosticRow::new(id, "total_volume", log.total_volume_f64()),
        DiagnosticRow::new(id, "t_detect", detect.unwrap_or(f64::NAN)),
    ];
    let sizes: Vec<(f64, f64)> = log.events.iter().map(|e| (e.time, e.merged().get())).collect();
    let artifacts = vec![
        Artifact::new("events.csv", log.to_csv()),
        Artifact::new("diagnostics.csv", diagnostics_csv(&rows)),
        Artifact::new("merged_sizes.svg", svg_plot("merged particle volume", "time", "volume", &sizes, false, true)),
    ];
    let summary = format!(
        "simulate_mc: {} events, {} particles left, largest {}",
        log.events.len(),
        log.final_count,
        log.final_largest.get()
    );
    Ok(ScenarioOutput {
        artifacts,
        runs: vec![RunRecord { label: id.clone(), status: "completed".into() }],
        summary,
        failure: None,
    })
}

fn sweep_vmax(config: &RunConfig) -> Result<ScenarioOutput, CliError> {
    let init = require_init(config)?;
    let mut values = config.sweep_vmax.clone();
    values.sort_by(f64::total_cmp);
    values.dedup();
    let results: Vec<Result<(f64, GelationEstimate, RunStatus, usize), CliError>> = values
        .par_iter()
        .map(|&v_max| {
            let fv = FvConfig { v_max, ..config.fv.clone() };
            let dist = init.on_grid(&fv)?;
            let traj = solver_fv::run(&dist, &config.kernel, &fv).map_err(numerical)?;
            let est = gelation_time_from_series(&traj, config.diagnostics.epsilon).map_err(numerical)?;
            Ok((v_max, est, traj.status, traj.steps))
        })
        .collect();
    let mut estimates = Vec::new();
    let mut runs = Vec::new();
    let mut rows = Vec::new();
    let mut failure = None;
    for r in results {
        let (v_max, est, status, steps) = r?;
        let label = format!("{}_vmax_{v_max}", config.run_id);
        let (s, f) = fv_status(status);
        failure = failure.or(f);
        rows.push(DiagnosticRow::new(&label, "t_gel_eps", est.t_gel_eps.unwrap_or(f64::NAN)));
        rows.push(DiagnosticRow::new(&label, "steps", steps as f64));
        runs.push(RunRecord { label, status: s });
        estimates.push(est);
    }
    let mut artifacts = gelation_report(&estimates)?;
    artifacts.push(Artifact::new("diagnostics.csv", diagnostics_csv(&rows)));
    let summary = format!("sweep_vmax: {} runs", estimates.len());
    Ok(ScenarioOutput { artifacts, runs, summary, failure })
}

fn sweep_n(config: &RunConfig) -> Result<ScenarioOutput, CliError> {
    let spec = require_init(config)?.mc_spec();
    let mut ns = config.sweep_n.clone();
    ns.sort_unstable();
    ns.dedup();
    let mut table = String::from("n,median_tgel,q25,q75,censored,replicas\n");
    let mut artifacts = Vec::new();
    let mut runs = Vec::new();
    let mut points = Vec::new();
    for &n in &ns {
        let mc = McConfig { n_particles: n, ..config.mc.clone() };
        let s =
            solver_mc::ensemble_tgel(&spec, &config.kernel, &mc).map_err(|e| ConfigError::Invalid(e.to_string()))?;
        let fmt_opt = |x: Option<f64>| x.map_or("none".to_string(), |t| t.to_string());
        let _ = writeln!(
            table,
            "{n},{},{},{},{},{}",
            fmt_opt(s.median),
            fmt_opt(s.quartiles.map(|q| q.0)),
            fmt_opt(s.quartiles.map(|q| q.1)),
            s.censored,
            s.replicas.len()
        );
        if let Some(m) = s.median {
            points.push((n as f64, m));
        }
        artifacts.push(Artifact::new(format!("replicas_n{n}.csv"), s.to_csv()));
        runs.push(RunRecord {
            label: format!("{}_n_{n}", config.run_id),
            status: if s.all_censored() { "all_censored".into() } else { "completed".into() },
        });
    }
    artifacts.insert(0, Artifact::new("sweep_n.csv", table));
    artifacts.push(Artifact::new(
        "sweep_n.svg",
        svg_plot("median detection time vs n", "n", "t_detect", &points, true, true),
    ));
    Ok(ScenarioOutput { artifacts, runs, summary: format!("sweep_n: {} sizes", ns.len()), failure: None })
}

fn certify_kernel(config: &RunConfig) -> Result<ScenarioOutput, CliError> {
    let report = certify_assumption(&config.kernel, &config.certify.declared, &config.certify.sampling)
        .map_err(|e| ConfigError::Invalid(e.to_string()))?;
    let failed: Vec<String> = report
        .checks
        .iter()
        .filter(|c| c.status == crate::kernels::BoundStatus::Fail)
        .map(|c| match c.witness {
            Some((v, w)) => format!("{} at witness ({v}, {w})", c.name),
            None => c.name.clone(),
        })
        .collect();
    let failure = if failed.is_empty() { None } else { Some(format!("kernel not certified: {}", failed.join("; "))) };
    let status = if failure.is_none() { "certified" } else { "not_certified" };
    Ok(ScenarioOutput {
        artifacts: vec![Artifact::new("certificate.csv", report.to_csv())],
        runs: vec![RunRecord { label: config.run_id.clone(), status: status.into() }],
        summary: format!("certify_kernel: {} checks, {} failed", report.checks.len(), failed.len()),
        failure,
    })
}

fn cascade_probe(config: &RunConfig) -> Result<ScenarioOutput, CliError> {
    let init = require_init(config)?.on_grid(&config.fv)?;
    let spec = &config.cascade;
    let pair = match init.find_separated_mass_pair(spec.horizon, spec.n_max).map_err(numerical)? {
        MassPairSearch::Pair(p) => p,
        MassPairSearch::SingleAtom(v) => {
            return Err(CliError::Numerical(format!("initial data is a single atom at {v}; no separated pair")))
        }
    };
    let fv = FvConfig { t_end: config.fv.t_end.max(spec.time), ..config.fv.clone() };
    let traj = solver_fv::run(&init, &config.kernel, &fv).map_err(numerical)?;
    let floor = 1e-12 * traj.initial().total_number();
    let balls = positivity_cascade_probe(&traj, &pair, spec.time, spec.n_steps).map_err(numerical)?;
    let mut csv = String::from("step,center,radius,mass,above_floor\n");
    for (n, b) in balls.iter().enumerate() {
        let _ = writeln!(csv, "{},{},{},{},{}", n + 1, b.center, b.radius, b.mass, b.mass > floor);
    }
    let id = &config.run_id;
    let rows = vec![
        DiagnosticRow::new(id, "x1", pair.x1),
        DiagnosticRow::new(id, "x2", pair.x2),
        DiagnosticRow::new(id, "eta0", pair.eta0),
        DiagnosticRow::new(id, "probe_time", spec.time),
        DiagnosticRow::new(id, "floor", floor),
    ];
    let bars: Vec<(String, f64)> = balls.iter().map(|b| (format!("{:.3}", b.center), b.mass)).collect();
    let (status, failure) = fv_status(traj.status);
    let positive = balls.iter().filter(|b| b.mass > floor).count();
    Ok(ScenarioOutput {
        artifacts: vec![
            Artifact::new("cascade.csv", csv),
            Artifact::new("diagnostics.csv", diagnostics_csv(&rows)),
            Artifact::new("cascade.svg", svg_bars("cascade ball contents", &bars)),
        ],
        runs: vec![RunRecord { label: id.clone(), status }],
        summary: format!("cascade_probe: {positive}/{} balls above floor", balls.len()),
        failure,
    })
}

/// Computes a scenario without touching the file system.
pub fn compute_scenario(config: &RunConfig) -> Result<ScenarioOutput, CliError> {
    match config.scenario {
        Scenario::SimulateFv => simulate_fv(config),
        Scenario::SimulateMc => simulate_mc(config),
        Scenario::SweepVmax => sweep_vmax(config),
        Scenario::SweepN => sweep_n(config),
        Scenario::CertifyKernel => certify_kernel(config),
        Scenario::CascadeProbe => cascade_probe(config),
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct RunReport {
    pub files: Vec<PathBuf>,
    pub summary: String,
    /// Numerical failure, reported after all artifacts were written.
    pub failure: Option<String>,
}

impl RunReport {
    pub fn exit_code(&self) -> i32 {
        if self.failure.is_some() {
            3
        } else {
            0
        }
    }
}

/// Checks the output directory, computes the scenario, writes its artifacts
/// and the manifest (listed last).
pub fn run_scenario(config: &RunConfig) -> Result<RunReport, CliError> {
    ensure_writable(&config.out_dir)?;
    let start = Instant::now();
    let output = compute_scenario(config)?;
    let mut files = write_artifacts(&output.artifacts, &config.out_dir)?;
    let mut names: Vec<String> = output.artifacts.iter().map(|a| a.name.clone()).collect();
    names.push("manifest.txt".into());
    let manifest =
        Manifest { config, wall_clock_seconds: start.elapsed().as_secs_f64(), runs: &output.runs, files: &names };
    let path = config.out_dir.join("manifest.txt");
    fs::write(&path, manifest.render()).map_err(io_err(&path))?;
    files.push(path);
    Ok(RunReport { files, summary: output.summary, failure: output.failure })
}

/// Full command-line entry: parse, optionally build a thread pool, run.
/// Returns the process exit code.
pub fn execute(
    scenario: &str,
    config_path: &Path,
    out: Option<&Path>,
    seed: Option<u64>,
    threads: Option<usize>,
) -> i32 {
    let result = (|| -> Result<RunReport, CliError> {
        let scenario: Scenario = scenario.parse()?;
        let mut config = parse_config(config_path, scenario, seed)?;
        if let Some(out) = out {
            config.out_dir = out.to_path_buf();
            config.resolved.insert("run.out_dir".into(), out.display().to_string());
        } else {
            config.resolved.insert("run.out_dir".into(), config.out_dir.display().to_string());
        }
        match threads {
            Some(n) => {
                let pool = rayon::ThreadPoolBuilder::new()
                    .num_threads(n)
                    .build()
                    .map_err(|e| ConfigError::Invalid(format!("thread pool: {e}")))?;
                pool.install(|| run_scenario(&config))
            }
            None => run_scenario(&config),
        }
    })();
    match result {
        Ok(report) => {
            println!("{}", report.summary);
            for f in &report.files {
                println!("wrote {}", f.display());
            }
            if let Some(f) = &report.failure {
                eprintln!("error: {f}");
            }
            report.exit_code()
        }
        Err(e) => {
            eprintln!("error: {e}");
            e.exit_code()
        }
    }
}

const SVG_W: f64 = 480.0;
const SVG_H: f64 = 320.0;
const MARGIN: f64 = 56.0;

fn svg_header(title: &str) -> String {
    format!(
        "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"{SVG_W}\" height=\"{SVG_H}\" viewBox=\"0 0 {SVG_W} {SVG_H}\">\n\
         <rect width=\"100%\" height=\"100%\" fill=\"white\"/>\n\
         <text x=\"{}\" y=\"20\" text-anchor=\"middle\" font-family=\"sans-serif\" font-size=\"14\">{}</text>\n",
        SVG_W / 2.0,
        xml_escape(title)
    )
}

fn xml_escape(s: &str) -> String {
    s.replace('&', "&amp;").replace('<', "&lt;").replace('>', "&gt;")
}

/// Scatter-and-line plot; non-positive values are dropped on log axes.
pub fn svg_plot(title: &str, xlabel: &str, ylabel: &str, points: &[(f64, f64)], log_x: bool, log_y: bool) -> String {
    let tx = |x: f64| if log_x { x.log10() } else { x };
    let ty = |y: f64| if log_y { y.log10() } else { y };
    let pts: Vec<(f64, f64)> = points
        .iter()
        .filter(|&&(x, y)| (!log_x || x > 0.0) && (!log_y || y > 0.0) && x.is_finite() && y.is_finite())
        .map(|&(x, y)| (tx(x), ty(y)))
        .collect();
    let mut out = svg_header(title);
    let (x0, y0, x1, y1) = (MARGIN, SVG_H - MARGIN, SVG_W - 16.0, 32.0);
    let _ = writeln!(out, "<line x1=\"{x0}\" y1=\"{y0}\" x2=\"{x1}\" y2=\"{y0}\" stroke=\"black\"/>");
    let _ = writeln!(out, "<line x1=\"{x0}\" y1=\"{y0}\" x2=\"{x0}\" y2=\"{y1}\" stroke=\"black\"/>");
    let axis = |label: &str, log: bool| if log { format!("log10 {label}") } else { label.to_string() };
    let _ = writeln!(
        out,
        "<text x=\"{}\" y=\"{}\" text-anchor=\"middle\" font-family=\"sans-serif\" font-size=\"12\">{}</text>",
        (x0 + x1) / 2.0,
        SVG_H - 16.0,
        xml_escape(&axis(xlabel, log_x))
    );
    let _ = writeln!(
        out,
        "<text x=\"16\" y=\"{}\" transform=\"rotate(-90 16 {})\" text-anchor=\"middle\" font-family=\"sans-serif\" font-size=\"12\">{}</text>",
        (y0 + y1) / 2.0,
        (y0 + y1) / 2.0,
        xml_escape(&axis(ylabel, log_y))
    );
    if !pts.is_empty() {
        let (mut xmin, mut xmax, mut ymin, mut ymax) =
            (f64::INFINITY, f64::NEG_INFINITY, f64::INFINITY, f64::NEG_INFINITY);
        for &(x, y) in &pts {
            xmin = xmin.min(x);
            xmax = xmax.max(x);
            ymin = ymin.min(y);
            ymax = ymax.max(y);
        }
        let span = |lo: f64, hi: f64| if hi > lo { hi - lo } else { 1.0 };
        let (sx, sy) = (span(xmin, xmax), span(ymin, ymax));
        let px = |x: f64| x0 + 8.0 + (x - xmin) / sx * (x1 - x0 - 16.0);
        let py = |y: f64| y0 - 8.0 - (y - ymin) / sy * (y0 - y1 - 16.0);
        for (v, x, y, anchor) in [(xmin, x0, y0 + 14.0, "start"), (xmax, x1, y0 + 14.0, "end")] {
            let _ = writeln!(out, "<text x=\"{x}\" y=\"{y}\" text-anchor=\"{anchor}\" font-family=\"sans-serif\" font-size=\"10\">{v:.3}</text>");
        }
        for (v, y) in [(ymin, y0 - 4.0), (ymax, y1 + 10.0)] {
            let _ = writeln!(out, "<text x=\"{}\" y=\"{y}\" text-anchor=\"end\" font-family=\"sans-serif\" font-size=\"10\">{v:.3}</text>", x0 - 4.0);
        }
        let path: Vec<String> = pts.iter().map(|&(x, y)| format!("{:.2},{:.2}", px(x), py(y))).collect();
        let _ = writeln!(out, "<polyline fill=\"none\" stroke=\"steelblue\" points=\"{}\"/>", path.join(" "));
        for &(x, y) in &pts {
            let _ = writeln!(out, "<circle cx=\"{:.2}\" cy=\"{:.2}\" r=\"3\" fill=\"steelblue\"/>", px(x), py(y));
        }
    }
    out.push_str("</svg>\n");
    out
}

/// Bar chart with one labelled bar per entry, heights on a linear scale.
pub fn svg_bars(title: &str, bars: &[(String, f64)]) -> String {
    let mut out = svg_header(title);
    let (x0, y0, x1, y1) = (MARGIN, SVG_H - MARGIN, SVG_W - 16.0, 32.0);
    let _ = writeln!(out, "<line x1=\"{x0}\" y1=\"{y0}\" x2=\"{x1}\" y2=\"{y0}\" stroke=\"black\"/>");
    let top = bars.iter().map(|b| b.1).fold(0.0, f64::max);
    let n = bars.len().max(1) as f64;
    let slot = (x1 - x0) / n;
    for (k, (label, v)) in bars.iter().enumerate() {
        let h = if top > 0.0 { v.max(0.0) / top * (y0 - y1) } else { 0.0 };
        let x = x0 + k as f64 * slot + slot * 0.15;
        let _ = writeln!(
            out,
            "<rect x=\"{x:.2}\" y=\"{:.2}\" width=\"{:.2}\" height=\"{h:.2}\" fill=\"steelblue\"/>",
            y0 - h,
            slot * 0.7
        );
        let _ = writeln!(
            out,
            "<text x=\"{:.2}\" y=\"{}\" text-anchor=\"middle\" font-family=\"sans-serif\" font-size=\"10\">{}</text>",
            x + slot * 0.35,
            y0 + 14.0,
            xml_escape(label)
        );
        let _ = writeln!(
            out,
            "<text x=\"{:.2}\" y=\"{:.2}\" text-anchor=\"middle\" font-family=\"sans-serif\" font-size=\"10\">{v:.3e}</text>",
            x + slot * 0.35,
            y0 - h - 4.0
        );
    }
    out.push_str("</svg>\n");
    out
}

#[cfg(test)]
mod tests {
    use super::*;

    const SWEEP: &str =
        "kernel.form = differential_sedimentation\ninit.form = exponential\nsweep.v_max = 64, 256\nsolver.t_end = 1\n";

    #[test]
    fn minimal_sweep_defaults() {
        let c = parse_config_str(SWEEP, Scenario::SweepVmax, None).unwrap();
        assert_eq!(c.diagnostics.epsilon, 0.01);
        assert_eq!(c.fv.dt_safety, 0.5);
        assert_eq!(c.diagnostics.theta, 0.2);
        assert_eq!(c.resolved["diagnostics.epsilon"], "0.01");
        assert_eq!(c.resolved["solver.dt_safety"], "0.5");
        assert_eq!(c.resolved["diagnostics.theta"], "0.2");
        assert_eq!(c.sweep_vmax, vec![64.0, 256.0]);
    }

    #[test]
    fn unknown_form_lists_valid_forms() {
        let text = SWEEP.replace("differential_sedimentation", "rainn");
        let err = parse_config_str(&text, Scenario::SweepVmax, None).unwrap_err();
        let msg = err.to_string();
        assert!(matches!(err, ConfigError::UnknownKernelForm { .. }));
        for f in KERNEL_FORMS {
            assert!(msg.contains(f), "{msg}");
        }
    }

    #[test]
    fn missing_vmax_named() {
        let text = "kernel.form = differential_sedimentation\ninit.form = exponential\nsolver.t_end = 1\n";
        let err = parse_config_str(text, Scenario::SimulateFv, None).unwrap_err();
        assert_eq!(err, ConfigError::MissingKey("solver.v_max".into()));
        assert!(err.to_string().contains("solver.v_max"));
    }

    #[test]
    fn malformed_number_has_line() {
        let text = format!("{SWEEP}# comment\nsolver.dt_safety = 0.5x\n");
        match parse_config_str(&text, Scenario::SweepVmax, None).unwrap_err() {
            ConfigError::MalformedNumber { line, key, .. } => {
                assert_eq!(line, 6);
                assert_eq!(key, "solver.dt_safety");
            }
            other => panic!("{other:?}"),
        }
    }

    #[test]
    fn unknown_and_duplicate_keys_rejected() {
        let text = format!("{SWEEP}solver.vmax = 3\n");
        assert!(matches!(
            parse_config_str(&text, Scenario::SweepVmax, None),
            Err(ConfigError::UnknownKey { line: 5, .. })
        ));
        let text = format!("{SWEEP}solver.t_end = 2\n");
        assert!(matches!(
            parse_config_str(&text, Scenario::SweepVmax, None),
            Err(ConfigError::DuplicateKey { line: 5, .. })
        ));
        assert!(matches!(
            parse_config_str("nonsense\n", Scenario::CertifyKernel, None),
            Err(ConfigError::Syntax { line: 1, .. })
        ));
    }

    #[test]
    fn seed_override_and_hash() {
        let a = parse_config_str(SWEEP, Scenario::SweepVmax, Some(9)).unwrap();
        assert_eq!(a.seed, 9);
        assert_eq!(a.mc.seed, 9);
        assert_eq!(a.config_hash.len(), 64);
        let b = parse_config_str(&format!("{SWEEP}\n"), Scenario::SweepVmax, None).unwrap();
        assert_ne!(a.config_hash, b.config_hash);
    }

    #[test]
    fn empty_report_is_an_error() {
        assert!(matches!(gelation_report(&[]), Err(CliError::NothingToReport)));
        assert_eq!(CliError::NothingToReport.to_string(), "nothing to report");
    }

    #[test]
    fn single_estimate_report() {
        let e = GelationEstimate { epsilon: 0.01, t_gel_eps: Some(0.4), v_max: 64.0 };
        let arts = gelation_report(&[e]).unwrap();
        assert_eq!(arts[0].contents, "v_max,t_gel_eps\n64,0.4\n");
        assert_eq!(arts[1].contents.matches("<circle").count(), 1);
    }

    #[test]
    fn atoms_parse() {
        let text = "kernel.form = constant\ninit.form = dirac\ninit.atoms = 1:1, 2.5:0.4\nsolver.v_max = 100\nsolver.t_end = 1\n";
        let c = parse_config_str(text, Scenario::SimulateFv, None).unwrap();
        assert_eq!(c.init, Some(InitData::Dirac(vec![(1.0, 1.0), (2.5, 0.4)])));
        let bad = text.replace("2.5:0.4", "2.5;0.4");
        assert!(matches!(
            parse_config_str(&bad, Scenario::SimulateFv, None),
            Err(ConfigError::MalformedNumber { line: 3, .. })
        ));
    }
}
