//! Marcus–Lushnikov stochastic coalescent.
//!
//! `n` particles coalesce pairwise; the unordered pair `{i, j}` merges at
//! rate `K(v_i, v_j) / n_initial`. Events are drawn with the direct method
//! from a per-particle rate table `r_i = Σ_{j≠i} K(v_i, v_j) / n_initial`,
//! updated in `O(n)` per event.
//!
//! Volumes are held in fixed point (units of 2^-32) so that a merge is an
//! integer addition and the total volume is conserved exactly.

use std::fmt::Write as _;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::Exp1;
use rayon::prelude::*;
use thiserror::Error;

use crate::kernels::Kernel;

const FRAC_BITS: i32 = 32;
const QUANTUM: f64 = 1.0 / (1u64 << FRAC_BITS) as f64;

/// Full rate-table rebuild interval, in events per particle.
const REBUILD_EVERY: usize = 1;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum McError {
    #[error("initial data carries no mass (weights sum to zero)")]
    EmptyMeasure,
    #[error("invalid initial data: {0}")]
    InitSpec(String),
    #[error("invalid Monte Carlo configuration: {0}")]
    Config(String),
    #[error("every replica was censored; no gelation time observed")]
    AllCensored,
}

/// Particle volume in fixed point.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct Volume(u64);

impl Volume {
    /// Nearest representable volume, at least one quantum.
    pub fn from_f64(v: f64) -> Volume {
        Volume(((v / QUANTUM).round() as u64).max(1))
    }

    pub fn get(self) -> f64 {
        self.0 as f64 * QUANTUM
    }

    pub fn raw(self) -> u64 {
        self.0
    }
}

/// Initial size distribution.
#[derive(Debug, Clone, PartialEq)]
pub enum InitSpec {
    /// Atoms `(volume, number weight)`.
    Dirac(Vec<(f64, f64)>),
    /// Exponential density with the given mean volume.
    Exponential { mean: f64 },
    /// Uniform density on `[lo, hi]`.
    Uniform { lo: f64, hi: f64 },
}

#[derive(Debug, Clone, PartialEq)]
pub struct McConfig {
    pub n_particles: usize,
    pub t_end: f64,
    pub giant_fraction_theta: f64,
    pub seed: u64,
    pub n_replicas: usize,
}

impl Default for McConfig {
    fn default() -> Self {
        McConfig { n_particles: 1000, t_end: 10.0, giant_fraction_theta: 0.2, seed: 0, n_replicas: 32 }
    }
}

impl McConfig {
    pub fn validate(&self) -> Result<(), McError> {
        if self.n_particles < 2 {
            return Err(McError::Config("n_particles must be at least 2".into()));
        }
        if !(self.giant_fraction_theta > 0.0 && self.giant_fraction_theta < 1.0) {
            return Err(McError::Config("theta must be in (0, 1)".into()));
        }
        if !(self.t_end >= 0.0) {
            return Err(McError::Config("t_end must be >= 0".into()));
        }
        if self.n_replicas == 0 {
            return Err(McError::Config("n_replicas must be at least 1".into()));
        }
        Ok(())
    }
}

/// Random stream for replica `stream` of the master `seed`.
pub fn replica_rng(seed: u64, stream: u64) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(stream);
    rng
}

#[derive(Debug, Clone)]
pub struct ParticleSystem {
    volumes: Vec<Volume>,
    pub n_initial: usize,
    /// `1 / n_initial`.
    pub rate_scale: f64,
    pub clock: f64,
    pub stream: u64,
    rng: ChaCha8Rng,
}

impl ParticleSystem {
    pub fn new(volumes: Vec<Volume>, seed: u64, stream: u64) -> Self {
        let n = volumes.len();
        ParticleSystem {
            volumes,
            n_initial: n,
            rate_scale: 1.0 / n as f64,
            clock: 0.0,
            stream,
            rng: replica_rng(seed, stream),
        }
    }

    pub fn volumes(&self) -> &[Volume] {
        &self.volumes
    }

    pub fn len(&self) -> usize {
        self.volumes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.volumes.is_empty()
    }

    pub fn total_volume(&self) -> u128 {
        self.volumes.iter().map(|v| v.0 as u128).sum()
    }

    pub fn largest(&self) -> Volume {
        self.volumes.iter().copied().max().unwrap_or(Volume(0))
    }
}

/// Draws `config.n_particles` initial volumes on random stream `stream`.
///
/// Atoms are allocated deterministically by largest remainder; densities are
/// sampled by inverse transform.
pub fn init_system(spec: &InitSpec, config: &McConfig, stream: u64) -> Result<ParticleSystem, McError> {
    config.validate()?;
    let n = config.n_particles;
    let mut rng = replica_rng(config.seed, stream);
    let volumes = match spec {
        InitSpec::Dirac(atoms) => {
            if atoms.iter().any(|&(v, w)| !(v > 0.0 && v.is_finite() && w >= 0.0 && w.is_finite())) {
                return Err(McError::InitSpec("atoms need positive volume and nonnegative weight".into()));
            }
            let total: f64 = atoms.iter().map(|a| a.1).sum();
            if !(total > 0.0) {
                return Err(McError::EmptyMeasure);
            }
            let quotas: Vec<f64> = atoms.iter().map(|a| n as f64 * a.1 / total).collect();
            let mut counts: Vec<usize> = quotas.iter().map(|q| q.floor() as usize).collect();
            let mut left = n - counts.iter().sum::<usize>();
            let mut order: Vec<usize> = (0..atoms.len()).collect();
            order.sort_by(|&a, &b| {
                let (ra, rb) = (quotas[a] - quotas[a].floor(), quotas[b] - quotas[b].floor());
                rb.total_cmp(&ra).then(a.cmp(&b))
            });
            for &i in order.iter().cycle() {
                if left == 0 {
                    break;
                }
                counts[i] += 1;
                left -= 1;
            }
            atoms.iter().zip(&counts).flat_map(|(&(v, _), &c)| std::iter::repeat_n(Volume::from_f64(v), c)).collect()
        }
        InitSpec::Exponential { mean } => {
            if !(*mean > 0.0 && mean.is_finite()) {
                return Err(McError::InitSpec("exponential mean must be positive".into()));
            }
            (0..n)
                .map(|_| {
                    let u: f64 = rng.random();
                    Volume::from_f64(-mean * (-u).ln_1p())
                })
                .collect()
        }
        InitSpec::Uniform { lo, hi } => {
            if !(*lo >= 0.0 && hi > lo && hi.is_finite()) {
                return Err(McError::InitSpec("uniform needs 0 <= lo < hi".into()));
            }
            (0..n)
                .map(|_| {
                    let u: f64 = rng.random();
                    Volume::from_f64(lo + (hi - lo) * u)
                })
                .collect()
        }
    };
    let mut system = ParticleSystem::new(volumes, config.seed, stream);
    // continue the same stream after the initial draws
    system.rng = rng;
    Ok(system)
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Event {
    pub time: f64,
    pub v_small: Volume,
    pub v_large: Volume,
}

impl Event {
    pub fn merged(&self) -> Volume {
        Volume(self.v_small.0 + self.v_large.0)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct EventLog {
    pub n_initial: usize,
    pub total_volume: u128,
    pub initial_largest: Volume,
    pub events: Vec<Event>,
    /// Time the simulation stopped.
    pub final_time: f64,
    pub final_count: usize,
    pub final_largest: Volume,
}

impl EventLog {
    pub fn total_volume_f64(&self) -> f64 {
        self.total_volume as f64 * QUANTUM
    }

    /// CSV with columns `event_index,time,v_small,v_large,v_merged`.
    pub fn to_csv(&self) -> String {
        let mut out = String::from("event_index,time,v_small,v_large,v_merged\n");
        for (i, e) in self.events.iter().enumerate() {
            let _ = writeln!(out, "{},{},{},{},{}", i, e.time, e.v_small.get(), e.v_large.get(), e.merged().get());
        }
        out
    }

    /// Particle count after each event, starting with `n_initial` at `t = 0`.
    pub fn count_at(&self, t: f64) -> usize {
        self.n_initial - self.events.partition_point(|e| e.time <= t)
    }
}

/// Runs the exact stochastic dynamics until `config.t_end` or one particle.
pub fn simulate(system: &mut ParticleSystem, kernel: &Kernel, config: &McConfig) -> EventLog {
    simulate_until(system, kernel, config.t_end, |_| false)
}

/// As [`simulate`], additionally stopping after the first event for which
/// `stop` returns true.
pub fn simulate_until(
    system: &mut ParticleSystem,
    kernel: &Kernel,
    t_end: f64,
    mut stop: impl FnMut(&ParticleSystem) -> bool,
) -> EventLog {
    let scale = system.rate_scale;
    let mut log = EventLog {
        n_initial: system.n_initial,
        total_volume: system.total_volume(),
        initial_largest: system.largest(),
        events: Vec::new(),
        final_time: t_end,
        final_count: system.len(),
        final_largest: system.largest(),
    };
    let mut values: Vec<f64> = system.volumes.iter().map(|v| v.get()).collect();
    let mut rates = full_rates(kernel, &values, scale);
    let mut since_rebuild = 0usize;

    while values.len() >= 2 {
        let total: f64 = rates.iter().sum::<f64>() * 0.5;
        if !(total > 0.0) {
            break;
        }
        let wait: f64 = system.rng.sample::<f64, _>(Exp1) / total;
        if system.clock + wait > t_end {
            break;
        }
        // first particle in proportion to its rate
        let target = system.rng.random::<f64>() * 2.0 * total;
        let i = pick(&rates, target);
        // partner in proportion to K(v_i, v_j), from fresh kernel values
        let vi = values[i];
        let row: Vec<f64> =
            values.iter().enumerate().map(|(j, &vj)| if j == i { 0.0 } else { kernel.rate(vi, vj) }).collect();
        let row_sum: f64 = row.iter().sum();
        if !(row_sum > 0.0) {
            // stale rate from round-off; repair and redraw
            rates[i] = 0.0;
            continue;
        }
        system.clock += wait;
        let j = pick(&row, system.rng.random::<f64>() * row_sum);

        let (a, b) = (system.volumes[i], system.volumes[j]);
        let merged = Volume(a.0 + b.0);
        let vm = merged.get();
        let vj = values[j];
        let mut merged_rate = 0.0;
        for l in 0..values.len() {
            if l == i || l == j {
                continue;
            }
            let vl = values[l];
            let k_new = kernel.rate(vl, vm);
            merged_rate += k_new;
            rates[l] = (rates[l] + scale * (k_new - row[l] - kernel.rate(vl, vj))).max(0.0);
        }
        system.volumes[i] = merged;
        values[i] = vm;
        rates[i] = scale * merged_rate;
        system.volumes.swap_remove(j);
        values.swap_remove(j);
        rates.swap_remove(j);

        log.events.push(Event { time: system.clock, v_small: a.min(b), v_large: a.max(b) });
        since_rebuild += 1;
        if since_rebuild >= REBUILD_EVERY * values.len().max(1) {
            rates = full_rates(kernel, &values, scale);
            since_rebuild = 0;
        }
        if stop(system) {
            log.final_time = system.clock;
            break;
        }
    }
    log.final_count = system.len();
    log.final_largest = system.largest();
    log
}

fn full_rates(kernel: &Kernel, values: &[f64], scale: f64) -> Vec<f64> {
    let n = values.len();
    let mut rates = vec![0.0; n];
    for i in 0..n {
        for j in (i + 1)..n {
            let k = kernel.rate(values[i], values[j]);
            rates[i] += k;
            rates[j] += k;
        }
    }
    rates.iter_mut().for_each(|r| *r *= scale);
    rates
}

/// Index `i` with `Σ_{l<i} w_l <= target < Σ_{l<=i} w_l`, skipping zero weights.
fn pick(weights: &[f64], target: f64) -> usize {
    let mut acc = 0.0;
    let mut last_positive = 0;
    for (i, &w) in weights.iter().enumerate() {
        if w > 0.0 {
            acc += w;
            last_positive = i;
            if target < acc {
                return i;
            }
        }
    }
    last_positive
}

/// First time the largest particle exceeds `theta` times the total volume.
pub fn detect_gelation(log: &EventLog, theta: f64) -> Option<f64> {
    let threshold = theta * log.total_volume as f64;
    let mut largest = log.initial_largest.0;
    if largest as f64 > threshold {
        return Some(0.0);
    }
    for e in &log.events {
        largest = largest.max(e.merged().0);
        if largest as f64 > threshold {
            return Some(e.time);
        }
    }
    None
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ReplicaOutcome {
    pub replica: usize,
    /// Detection time, `None` if censored at `t_end`.
    pub tgel: Option<f64>,
    /// Largest particle when the replica stopped.
    pub largest_final: f64,
    pub events: usize,
}

#[derive(Debug, Clone, PartialEq)]
pub struct EnsembleSummary {
    pub replicas: Vec<ReplicaOutcome>,
    pub censored: usize,
    pub median: Option<f64>,
    pub quartiles: Option<(f64, f64)>,
}

impl EnsembleSummary {
    pub fn all_censored(&self) -> bool {
        self.censored == self.replicas.len()
    }

    /// CSV with columns `replica,tgel_or_censored,largest_final_particle`.
    pub fn to_csv(&self) -> String {
        let mut out = String::from("replica,tgel_or_censored,largest_final_particle\n");
        for r in &self.replicas {
            let t = r.tgel.map_or_else(|| "censored".to_string(), |t| t.to_string());
            let _ = writeln!(out, "{},{},{}", r.replica, t, r.largest_final);
        }
        out
    }
}

/// Linear-interpolation quantile of sorted data; `+∞` entries stand for
/// censored replicas.
fn quantile(sorted: &[f64], q: f64) -> f64 {
    let pos = q * (sorted.len() - 1) as f64;
    let lo = pos.floor() as usize;
    let hi = pos.ceil() as usize;
    if lo == hi || sorted[lo] == sorted[hi] {
        return sorted[lo];
    }
    if sorted[hi].is_infinite() {
        return f64::INFINITY;
    }
    sorted[lo] + (pos - lo as f64) * (sorted[hi] - sorted[lo])
}

/// One replica of the gelation experiment, stopped at detection.
pub fn run_replica(
    spec: &InitSpec,
    kernel: &Kernel,
    config: &McConfig,
    replica: usize,
) -> Result<ReplicaOutcome, McError> {
    let mut system = init_system(spec, config, replica as u64)?;
    let threshold = config.giant_fraction_theta * system.total_volume() as f64;
    let log = simulate_until(&mut system, kernel, config.t_end, |s| s.largest().0 as f64 > threshold);
    Ok(ReplicaOutcome {
        replica,
        tgel: detect_gelation(&log, config.giant_fraction_theta),
        largest_final: log.final_largest.get(),
        events: log.events.len(),
    })
}

/// Runs `config.n_replicas` independent replicas (in parallel on the current
/// rayon pool) and summarises their detection times. Results are ordered by
/// replica index.
pub fn ensemble_tgel(spec: &InitSpec, kernel: &Kernel, config: &McConfig) -> Result<EnsembleSummary, McError> {
    config.validate()?;
    let replicas: Vec<ReplicaOutcome> = (0..config.n_replicas)
        .into_par_iter()
        .map(|r| run_replica(spec, kernel, config, r))
        .collect::<Result<_, _>>()?;
    let censored = replicas.iter().filter(|r| r.tgel.is_none()).count();
    let mut times: Vec<f64> = replicas.iter().map(|r| r.tgel.unwrap_or(f64::INFINITY)).collect();
    times.sort_by(f64::total_cmp);
    let finite = |x: f64| if x.is_finite() { Some(x) } else { None };
    let median = finite(quantile(&times, 0.5));
    let quartiles = match (finite(quantile(&times, 0.25)), finite(quantile(&times, 0.75))) {
        (Some(a), Some(b)) => Some((a, b)),
        _ => None,
    };
    Ok(EnsembleSummary { replicas, censored, median, quartiles })
}
