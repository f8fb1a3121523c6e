//! Fixed-pivot sectional solver for the truncated coagulation equation.
//!
//! Every coalescence product `v = p_j + p_k` is split between the two pivots
//! bracketing it so that both number and mass are conserved. Products above
//! the truncation volume `v_max` leave the domain and are booked into the
//! gel ledger, so `M1_in(t) + gel_mass(t)` stays constant. Products between
//! the last pivot and `v_max` are assigned to the last bin with a
//! mass-conserving number.
//!
//! Time stepping is explicit Euler with the step bounded by
//! `dt_safety / max_i Σ_j K(p_i, p_j) N_j` over occupied bins, which keeps
//! every count nonnegative.

use std::fmt::Write as _;

use thiserror::Error;

use crate::kernels::Kernel;
use crate::measures::{Grid, MeasureError, SizeDistribution};

#[derive(Debug, Error, Clone, PartialEq)]
pub enum FvError {
    #[error("step rejected: dt = {requested} exceeds the stability bound {admissible}")]
    StepRejected { requested: f64, admissible: f64 },
    #[error("invalid solver configuration: {0}")]
    Config(String),
    #[error("initial data lives on a grid reaching {top}, but v_max = {v_max}")]
    InitOutsideDomain { top: f64, v_max: f64 },
    #[error("test function support reaches {top}, beyond v_max = {v_max}")]
    TestFunctionSupport { top: f64, v_max: f64 },
    #[error("time {0} is not a sample instant of the trajectory")]
    NotASample(f64),
    #[error(transparent)]
    Measure(#[from] MeasureError),
}

/// What happens to coalescence products above `v_max`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum TruncationPolicy {
    /// Remove them from the domain and add their mass to the gel ledger.
    #[default]
    RemoveAndAccount,
}

#[derive(Debug, Clone, PartialEq)]
pub struct FvConfig {
    pub v_min: f64,
    pub v_max: f64,
    pub bins_per_decade: u32,
    pub dt_safety: f64,
    pub t_end: f64,
    /// Spacing of the recorded samples.
    pub sample_interval: f64,
    /// Upper cap on the Euler step, independent of stability.
    pub max_dt: f64,
    /// A stability bound below this is treated as rate blow-up.
    pub min_dt: f64,
    /// Stop once the gel ledger holds this fraction of the initial mass.
    pub stop_at_gel_fraction: Option<f64>,
    pub truncation_policy: TruncationPolicy,
}

impl Default for FvConfig {
    fn default() -> Self {
        FvConfig {
            v_min: 1e-3,
            v_max: 1e3,
            bins_per_decade: 16,
            dt_safety: 0.5,
            t_end: 1.0,
            sample_interval: 0.05,
            max_dt: 0.05,
            min_dt: 1e-12,
            stop_at_gel_fraction: None,
            truncation_policy: TruncationPolicy::RemoveAndAccount,
        }
    }
}

impl FvConfig {
    pub fn validate(&self) -> Result<(), FvError> {
        let bad = |m: &str| Err(FvError::Config(m.to_string()));
        if !(self.v_min > 0.0 && self.v_max > self.v_min && self.v_max.is_finite()) {
            return bad("need 0 < v_min < v_max");
        }
        if self.bins_per_decade < 4 {
            return bad("bins_per_decade must be at least 4");
        }
        if !(self.dt_safety > 0.0 && self.dt_safety <= 1.0) {
            return bad("dt_safety must be in (0, 1]");
        }
        if !(self.t_end >= 0.0 && self.t_end.is_finite()) {
            return bad("t_end must be finite and >= 0");
        }
        if !(self.sample_interval > 0.0) {
            return bad("sample_interval must be positive");
        }
        if !(self.max_dt > 0.0 && self.min_dt >= 0.0) {
            return bad("need max_dt > 0 and min_dt >= 0");
        }
        if let Some(f) = self.stop_at_gel_fraction {
            if !(f > 0.0 && f <= 1.0) {
                return bad("stop_at_gel_fraction must be in (0, 1]");
            }
        }
        Ok(())
    }

    pub fn grid(&self) -> Result<Grid, FvError> {
        build_grid(self.v_min, self.v_max, self.bins_per_decade)
    }
}

/// Geometric grid with ratio `10^{1/bins_per_decade}` and top edge `v_max`.
pub fn build_grid(v_min: f64, v_max: f64, bins_per_decade: u32) -> Result<Grid, FvError> {
    Ok(Grid::geometric(v_min, v_max, bins_per_decade)?)
}

#[derive(Debug, Clone, Copy, PartialEq)]
enum Destination {
    /// Split between pivots `lo` and `lo + 1` with the given number fractions.
    Split {
        lo: usize,
        to_lo: f64,
        to_hi: f64,
    },
    /// Mass-conserving assignment to the last bin.
    Last {
        number: f64,
    },
    Gel,
}

#[derive(Debug, Clone, Copy)]
struct Pair {
    j: usize,
    k: usize,
    /// `K(p_j, p_k)`, halved on the diagonal.
    weight: f64,
    volume: f64,
    dest: Destination,
}

/// Instantaneous rates of the discrete system.
#[derive(Debug, Clone)]
pub struct Rates {
    pub gain: Vec<f64>,
    pub loss: Vec<f64>,
    /// Mass per unit time leaving the domain.
    pub gel_flux: f64,
    /// `max_i Σ_j K_ij N_j` over occupied bins.
    pub max_rate: f64,
}

/// Precomputed pair table for one grid and kernel.
#[derive(Debug, Clone)]
pub struct SectionalSolver {
    grid: Grid,
    kernel: Kernel,
    /// Row-major `K(p_i, p_j)`.
    matrix: Vec<f64>,
    pairs: Vec<Pair>,
    v_max: f64,
    dt_safety: f64,
}

impl SectionalSolver {
    /// Builds the pair table on the grid of `template` (including relocated
    /// pivots); the truncation volume is the grid's top edge.
    pub fn new(template: &SizeDistribution, kernel: &Kernel, dt_safety: f64) -> Result<Self, FvError> {
        if !(dt_safety > 0.0 && dt_safety <= 1.0) {
            return Err(FvError::Config("dt_safety must be in (0, 1]".into()));
        }
        let grid = template.grid().clone();
        let n = grid.len();
        let pivots = grid.pivots();
        let v_max = grid.v_max();
        let last = pivots[n - 1];
        let mut matrix = vec![0.0; n * n];
        for i in 0..n {
            for j in 0..n {
                matrix[i * n + j] = kernel.rate(pivots[i], pivots[j]);
            }
        }
        let mut pairs = Vec::new();
        for j in 0..n {
            for k in j..n {
                let rate = matrix[j * n + k];
                if rate == 0.0 {
                    continue;
                }
                let volume = pivots[j] + pivots[k];
                let dest = if volume > v_max {
                    Destination::Gel
                } else if volume >= last {
                    Destination::Last { number: volume / last }
                } else {
                    let lo = pivots.partition_point(|&p| p <= volume) - 1;
                    let (a, b) = (pivots[lo], pivots[lo + 1]);
                    let to_hi = (volume - a) / (b - a);
                    Destination::Split { lo, to_lo: 1.0 - to_hi, to_hi }
                };
                let weight = if j == k { 0.5 * rate } else { rate };
                pairs.push(Pair { j, k, weight, volume, dest });
            }
        }
        Ok(SectionalSolver { grid, kernel: kernel.clone(), matrix, pairs, v_max, dt_safety })
    }

    pub fn grid(&self) -> &Grid {
        &self.grid
    }

    pub fn kernel(&self) -> &Kernel {
        &self.kernel
    }

    pub fn v_max(&self) -> f64 {
        self.v_max
    }

    /// `K(p_i, p_j)` from the precomputed table.
    pub fn k(&self, i: usize, j: usize) -> f64 {
        self.matrix[i * self.grid.len() + j]
    }

    pub fn rates(&self, counts: &[f64]) -> Rates {
        let n = self.grid.len();
        let mut gain = vec![0.0; n];
        let mut loss = vec![0.0; n];
        let mut gel_flux = 0.0;
        for pair in &self.pairs {
            let (nj, nk) = (counts[pair.j], counts[pair.k]);
            if nj == 0.0 || nk == 0.0 {
                continue;
            }
            let events = pair.weight * nj * nk;
            loss[pair.j] += events;
            loss[pair.k] += events;
            match pair.dest {
                Destination::Split { lo, to_lo, to_hi } => {
                    gain[lo] += events * to_lo;
                    gain[lo + 1] += events * to_hi;
                }
                Destination::Last { number } => gain[n - 1] += events * number,
                Destination::Gel => gel_flux += events * pair.volume,
            }
        }
        let mut max_rate: f64 = 0.0;
        for i in 0..n {
            if counts[i] > 0.0 {
                let row = &self.matrix[i * n..(i + 1) * n];
                let r: f64 = row.iter().zip(counts).map(|(k, c)| k * c).sum();
                max_rate = max_rate.max(r);
            }
        }
        Rates { gain, loss, gel_flux, max_rate }
    }

    /// Largest admissible Euler step for `state`.
    pub fn stable_dt(&self, rates: &Rates) -> f64 {
        if rates.max_rate > 0.0 {
            self.dt_safety / rates.max_rate
        } else {
            f64::INFINITY
        }
    }

    fn apply(&self, state: &SizeDistribution, rates: &Rates, dt: f64) -> SizeDistribution {
        let counts: Vec<f64> = state
            .counts()
            .iter()
            .zip(rates.gain.iter().zip(&rates.loss))
            .map(|(&c, (&g, &l))| if g == 0.0 && l == 0.0 { c } else { (c + dt * (g - l)).max(0.0) })
            .collect();
        state.with_counts(counts, state.gel_mass + dt * rates.gel_flux)
    }

    /// One explicit Euler step.
    pub fn step(&self, state: &SizeDistribution, dt: f64) -> Result<SizeDistribution, FvError> {
        let rates = self.rates(state.counts());
        let admissible = self.stable_dt(&rates);
        if !(dt >= 0.0) || dt > admissible {
            return Err(FvError::StepRejected { requested: dt, admissible });
        }
        Ok(self.apply(state, &rates, dt))
    }
}

/// One explicit Euler step of `state` under `kernel`, with the default
/// stability factor 0.5.
pub fn step(state: &SizeDistribution, kernel: &Kernel, dt: f64) -> Result<SizeDistribution, FvError> {
    SectionalSolver::new(state, kernel, FvConfig::default().dt_safety)?.step(state, dt)
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LedgerSample {
    pub m0: f64,
    pub m1_in: f64,
    pub gel_mass: f64,
}

impl LedgerSample {
    fn of(state: &SizeDistribution) -> Self {
        LedgerSample { m0: state.total_number(), m1_in: state.mass(), gel_mass: state.gel_mass }
    }

    pub fn total_mass(&self) -> f64 {
        self.m1_in + self.gel_mass
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum RunStatus {
    Completed,
    /// The gel ledger reached the configured stop fraction.
    StoppedOnGel {
        time: f64,
    },
    /// The stability bound collapsed below `min_dt`.
    GelationRunaway {
        last_time: f64,
    },
}

#[derive(Debug, Clone, PartialEq)]
pub struct Trajectory {
    pub times: Vec<f64>,
    pub states: Vec<SizeDistribution>,
    pub diagnostics: Vec<LedgerSample>,
    pub status: RunStatus,
    pub steps: usize,
}

impl Trajectory {
    pub fn initial(&self) -> &SizeDistribution {
        &self.states[0]
    }

    pub fn last(&self) -> &SizeDistribution {
        self.states.last().unwrap()
    }

    /// Index of the sample at time `t` (within a relative 1e-9).
    pub fn sample_index(&self, t: f64) -> Option<usize> {
        let tol = 1e-9 * t.abs().max(1e-12);
        self.times.iter().position(|&s| (s - t).abs() <= tol)
    }

    /// Latest sample at or before `t`.
    pub fn state_at(&self, t: f64) -> &SizeDistribution {
        let k = self.times.partition_point(|&s| s <= t * (1.0 + 1e-12));
        &self.states[k.saturating_sub(1)]
    }

    /// `|M1_in(t) + gel(t) - M1_in(0)| / M1_in(0)`, maximised over samples.
    pub fn max_ledger_drift(&self) -> f64 {
        let m = self.diagnostics[0].total_mass();
        if m == 0.0 {
            return 0.0;
        }
        self.diagnostics.iter().map(|d| (d.total_mass() - m).abs() / m).fold(0.0, f64::max)
    }

    /// CSV with columns `time,M0,M1_in,gel_mass`.
    pub fn to_csv(&self) -> String {
        let mut out = String::from("time,M0,M1_in,gel_mass\n");
        for (t, d) in self.times.iter().zip(&self.diagnostics) {
            let _ = writeln!(out, "{},{},{},{}", t, d.m0, d.m1_in, d.gel_mass);
        }
        out
    }
}

/// Integrates `init` to `config.t_end`, recording a sample every
/// `config.sample_interval`. Steps are cut so that sample instants are hit
/// exactly.
pub fn run(init: &SizeDistribution, kernel: &Kernel, config: &FvConfig) -> Result<Trajectory, FvError> {
    config.validate()?;
    let top = init.grid().v_max();
    if (top - config.v_max).abs() > 1e-12 * config.v_max {
        return Err(FvError::InitOutsideDomain { top, v_max: config.v_max });
    }
    let solver = SectionalSolver::new(init, kernel, config.dt_safety)?;
    let initial_mass = init.mass() + init.gel_mass;
    let mut state = init.clone();
    let mut t = 0.0;
    let mut traj = Trajectory {
        times: vec![0.0],
        states: vec![state.clone()],
        diagnostics: vec![LedgerSample::of(&state)],
        status: RunStatus::Completed,
        steps: 0,
    };
    let mut next_sample = 1usize;
    loop {
        let target = (next_sample as f64 * config.sample_interval).min(config.t_end);
        if t >= config.t_end {
            break;
        }
        let rates = solver.rates(state.counts());
        let stable = solver.stable_dt(&rates);
        if stable < config.min_dt {
            traj.status = RunStatus::GelationRunaway { last_time: t };
            break;
        }
        let remaining = target - t;
        let dt = stable.min(config.max_dt);
        let (dt, hits_sample) = if dt >= remaining { (remaining, true) } else { (dt, false) };
        state = solver.apply(&state, &rates, dt);
        traj.steps += 1;
        t = if hits_sample { target } else { t + dt };
        let stop = config.stop_at_gel_fraction.is_some_and(|f| state.gel_mass >= f * initial_mass);
        if hits_sample || stop {
            traj.times.push(t);
            traj.diagnostics.push(LedgerSample::of(&state));
            traj.states.push(state.clone());
            if hits_sample {
                next_sample += 1;
            }
        }
        if stop {
            traj.status = RunStatus::StoppedOnGel { time: t };
            break;
        }
    }
    if *traj.times.last().unwrap() != t {
        traj.times.push(t);
        traj.diagnostics.push(LedgerSample::of(&state));
        traj.states.push(state);
    }
    Ok(traj)
}

/// Continuous, compactly supported (hat) or power-type test function.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum TestFunction {
    /// 1 on `|v - center| <= inner`, 0 beyond `outer`, linear in between.
    HatOnBall { center: f64, inner: f64, outer: f64 },
    /// `(v - R)_+^m`; not compactly supported.
    PowerTruncated { m: f64, r: f64 },
}

impl TestFunction {
    pub fn eval(&self, v: f64) -> f64 {
        match *self {
            TestFunction::HatOnBall { center, inner, outer } => {
                let d = (v - center).abs();
                if d <= inner {
                    1.0
                } else if d >= outer {
                    0.0
                } else {
                    (outer - d) / (outer - inner)
                }
            }
            TestFunction::PowerTruncated { m, r } => {
                if v > r {
                    (v - r).powf(m)
                } else {
                    0.0
                }
            }
        }
    }

    /// Closure of the support.
    pub fn support(&self) -> (f64, f64) {
        match *self {
            TestFunction::HatOnBall { center, outer, .. } => (center - outer, center + outer),
            TestFunction::PowerTruncated { r, .. } => (r, f64::INFINITY),
        }
    }

    /// `Θ_φ(v, v') = φ(v + v') - φ(v) - φ(v')`.
    pub fn theta(&self, v: f64, vprime: f64) -> f64 {
        self.eval(v + vprime) - self.eval(v) - self.eval(vprime)
    }

    /// `∫ φ f` by pivot quadrature.
    pub fn integrate(&self, dist: &SizeDistribution) -> f64 {
        dist.grid().pivots().iter().zip(dist.counts()).map(|(&p, &c)| self.eval(p) * c).sum()
    }
}

/// `|∫φ f(t) - ∫φ f(0) - ½ ∫_0^t ∫∫ K Θ_φ f f|` with pivot quadrature in
/// volume and the trapezoid rule over the recorded samples in time.
pub fn weak_form_residual(traj: &Trajectory, kernel: &Kernel, phi: &TestFunction, t: f64) -> Result<f64, FvError> {
    let v_max = traj.initial().grid().v_max();
    let (lo, hi) = phi.support();
    if hi > v_max {
        return Err(FvError::TestFunctionSupport { top: hi, v_max });
    }
    if let TestFunction::HatOnBall { inner, outer, .. } = *phi {
        if !(lo > 0.0 && outer > inner && inner >= 0.0) {
            return Err(FvError::Config("hat must satisfy 0 <= inner < outer and stay inside (0, v_max]".into()));
        }
    }
    let idx = traj.sample_index(t).ok_or(FvError::NotASample(t))?;
    let pivots = traj.initial().grid().pivots();
    let n = pivots.len();
    let mut theta = vec![0.0; n * n];
    for j in 0..n {
        for k in 0..n {
            theta[j * n + k] = kernel.rate(pivots[j], pivots[k]) * phi.theta(pivots[j], pivots[k]);
        }
    }
    let source = |s: &SizeDistribution| -> f64 {
        let c = s.counts();
        let mut total = 0.0;
        for j in 0..n {
            if c[j] == 0.0 {
                continue;
            }
            let row: f64 = theta[j * n..(j + 1) * n].iter().zip(c).map(|(w, ck)| w * ck).sum();
            total += c[j] * row;
        }
        0.5 * total
    };
    let mut integral = 0.0;
    let mut prev = source(&traj.states[0]);
    for i in 1..=idx {
        let cur = source(&traj.states[i]);
        integral += 0.5 * (traj.times[i] - traj.times[i - 1]) * (prev + cur);
        prev = cur;
    }
    let change = phi.integrate(&traj.states[idx]) - phi.integrate(traj.initial());
    Ok((change - integral).abs())
}

#[cfg(test)]
mod tests {
    use super::*;

    fn rain() -> Kernel {
        Kernel::differential_sedimentation()
    }

    #[test]
    fn monodisperse_step_is_identity() {
        let grid = build_grid(0.1, 100.0, 8).unwrap();
        let d = SizeDistribution::from_atoms(grid, &[(3.0, 2.0)]).unwrap();
        let next = step(&d, &rain(), 0.3).unwrap();
        assert_eq!(next, d);
        assert_eq!(next.gel_mass, 0.0);
    }

    #[test]
    fn two_atom_product_lands_on_bracketing_pivots() {
        let grid = build_grid(0.1, 100.0, 8).unwrap();
        let d = SizeDistribution::from_atoms(grid, &[(1.0, 1.0), (2.5, 1.0)]).unwrap();
        let solver = SectionalSolver::new(&d, &rain(), 0.5).unwrap();
        let rates = solver.rates(d.counts());
        let dt = 0.5 * solver.stable_dt(&rates);
        let next = solver.step(&d, dt).unwrap();
        let pivots = next.grid().pivots();
        let hi = pivots.partition_point(|&p| p <= 3.5);
        let (a, b) = (pivots[hi - 1], pivots[hi]);
        assert!(a < 3.5 && 3.5 < b);
        let events = dt * rain().rate(1.0, 2.5);
        let to_hi = (3.5 - a) / (b - a);
        let gain = |i: usize| next.counts()[i] - d.counts()[i] + if pivots[i] == 2.5 { events } else { 0.0 };
        assert!((gain(hi) - events * to_hi).abs() < 1e-15);
        assert!((gain(hi - 1) - events * (1.0 - to_hi)).abs() < 1e-15);
        assert!((next.mass() - d.mass()).abs() < 1e-14);
        assert!((next.total_number() - (2.0 - events)).abs() < 1e-14);
    }

    #[test]
    fn constant_kernel_number_loss_first_order() {
        let grid = build_grid(0.1, 1000.0, 8).unwrap();
        let d = SizeDistribution::from_atoms(grid, &[(1.0, 2.0)]).unwrap();
        let k = Kernel::constant(1.0).unwrap();
        let dt = 0.01;
        let next = step(&d, &k, dt).unwrap();
        let expected = 2.0 - 0.5 * 4.0 * dt;
        assert!((next.total_number() - expected).abs() < 1e-14);
        assert!((next.mass() - 2.0).abs() < 1e-14);
    }

    #[test]
    fn oversized_step_is_rejected() {
        let grid = build_grid(0.1, 100.0, 8).unwrap();
        let d = SizeDistribution::from_atoms(grid, &[(1.0, 1.0), (2.5, 1.0)]).unwrap();
        match step(&d, &rain(), 10.0) {
            Err(FvError::StepRejected { admissible, .. }) => {
                assert!(admissible < 10.0);
                assert!(step(&d, &rain(), admissible).is_ok());
            }
            other => panic!("{other:?}"),
        }
    }

    #[test]
    fn products_beyond_vmax_become_gel() {
        let grid = build_grid(1.0, 10.0, 8).unwrap();
        let d = SizeDistribution::from_atoms(grid, &[(4.0, 1.0), (9.0, 1.0)]).unwrap();
        let next = step(&d, &rain(), 1e-4).unwrap();
        let events = 1e-4 * rain().rate(4.0, 9.0);
        assert!((next.gel_mass - 13.0 * events).abs() < 1e-15);
        assert!((next.mass() + next.gel_mass - d.mass()).abs() < 1e-13);
    }

    #[test]
    fn pair_order_does_not_matter() {
        // full ½ Σ_j Σ_k reference against the unordered pair table
        let grid = build_grid(0.01, 100.0, 8).unwrap();
        let d = SizeDistribution::exponential(grid, 1.0, 1.0).unwrap();
        let kern = rain();
        let solver = SectionalSolver::new(&d, &kern, 0.5).unwrap();
        let rates = solver.rates(d.counts());
        let n = d.grid().len();
        let c = d.counts();
        for i in 0..n {
            let loss: f64 = (0..n).map(|j| solver.k(i, j) * c[i] * c[j]).sum();
            assert!((loss - rates.loss[i]).abs() <= 1e-12 * loss.max(1e-300), "bin {i}");
            for j in 0..n {
                assert_eq!(solver.k(i, j).to_bits(), solver.k(j, i).to_bits());
            }
        }
    }

    #[test]
    fn run_conserves_ledger_and_positivity() {
        let config = FvConfig { v_min: 1e-2, v_max: 64.0, t_end: 0.5, sample_interval: 0.05, ..FvConfig::default() };
        let init = SizeDistribution::exponential(config.grid().unwrap(), 1.0, 1.0).unwrap();
        let traj = run(&init, &rain(), &config).unwrap();
        assert!(traj.max_ledger_drift() < 1e-10);
        for w in traj.diagnostics.windows(2) {
            assert!(w[1].gel_mass >= w[0].gel_mass);
        }
        for s in &traj.states {
            assert!(s.counts().iter().all(|&c| c >= 0.0));
        }
        assert_eq!(traj.times.len(), 11);
        assert!((traj.times[10] - 0.5).abs() < 1e-15);
    }

    #[test]
    fn dirac_run_is_constant() {
        let config = FvConfig { t_end: 100.0, sample_interval: 10.0, ..FvConfig::default() };
        let init = SizeDistribution::from_atoms(config.grid().unwrap(), &[(2.0, 1.5)]).unwrap();
        let traj = run(&init, &rain(), &config).unwrap();
        assert_eq!(traj.status, RunStatus::Completed);
        for s in &traj.states {
            assert_eq!(s, &init);
        }
        let phi = TestFunction::HatOnBall { center: 2.0, inner: 0.5, outer: 1.0 };
        assert!(weak_form_residual(&traj, &rain(), &phi, 100.0).unwrap() < 1e-12);
    }

    #[test]
    fn init_beyond_vmax_rejected() {
        let grid = build_grid(0.1, 100.0, 8).unwrap();
        let init = SizeDistribution::from_atoms(grid, &[(50.0, 1.0)]).unwrap();
        let config = FvConfig { v_min: 0.1, v_max: 10.0, ..FvConfig::default() };
        assert!(matches!(run(&init, &rain(), &config), Err(FvError::InitOutsideDomain { .. })));
        let config = FvConfig { v_min: 0.1, v_max: 100.0, t_end: 0.1, ..FvConfig::default() };
        assert!(run(&init, &rain(), &config).is_ok());
    }

    #[test]
    fn runaway_is_flagged() {
        let config = FvConfig { v_min: 1e-2, v_max: 64.0, t_end: 1.0, min_dt: 1.0, ..FvConfig::default() };
        let init = SizeDistribution::exponential(config.grid().unwrap(), 1.0, 1.0).unwrap();
        let traj = run(&init, &rain(), &config).unwrap();
        assert_eq!(traj.status, RunStatus::GelationRunaway { last_time: 0.0 });
    }

    #[test]
    fn test_function_support_checks() {
        let config = FvConfig { t_end: 0.1, ..FvConfig::default() };
        let init = SizeDistribution::exponential(config.grid().unwrap(), 1.0, 1.0).unwrap();
        let traj = run(&init, &Kernel::constant(1.0).unwrap(), &config).unwrap();
        let far = TestFunction::HatOnBall { center: 999.0, inner: 1.0, outer: 2.0 };
        assert!(matches!(weak_form_residual(&traj, &rain(), &far, 0.1), Err(FvError::TestFunctionSupport { .. })));
        let power = TestFunction::PowerTruncated { m: 2.0, r: 1.0 };
        assert!(weak_form_residual(&traj, &rain(), &power, 0.1).is_err());
        assert!(matches!(
            weak_form_residual(&traj, &rain(), &TestFunction::HatOnBall { center: 2.0, inner: 0.5, outer: 1.0 }, 0.033),
            Err(FvError::NotASample(_))
        ));
    }

    #[test]
    fn power_test_function_matches_truncated_moment() {
        let grid = build_grid(0.01, 100.0, 8).unwrap();
        let d = SizeDistribution::exponential(grid, 2.0, 1.0).unwrap();
        let phi = TestFunction::PowerTruncated { m: 3.0, r: 2.0 };
        let a = phi.integrate(&d);
        let b = d.truncated_moment(2.0, 3.0);
        assert!((a - b).abs() <= 1e-14 * b);
    }
}
