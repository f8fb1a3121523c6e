//! Post-processing of trajectories: gelation-time surrogate, tail decay fit,
//! blow-up time bound and the positivity cascade probe.

use std::fmt::Write as _;

use thiserror::Error;

use crate::measures::{MeasureError, SeparatedPair, SizeDistribution};
use crate::solver_fv::Trajectory;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum DiagnosticsError {
    #[error("domain error: {0}")]
    Domain(String),
    #[error("insufficient data: need at least 3 positive I_R values, found {found}")]
    InsufficientData { found: usize },
    #[error(transparent)]
    Measure(#[from] MeasureError),
}

pub const DEFAULT_EPSILON: f64 = 0.01;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct GelationEstimate {
    pub epsilon: f64,
    pub t_gel_eps: Option<f64>,
    pub v_max: f64,
}

/// First time the gel ledger reaches `ε·M1(0)`, linearly interpolated
/// between the bracketing samples.
pub fn gelation_time_from_series(traj: &Trajectory, epsilon: f64) -> Result<GelationEstimate, DiagnosticsError> {
    if !(epsilon > 0.0 && epsilon < 1.0) {
        return Err(DiagnosticsError::Domain(format!("epsilon must be in (0, 1), got {epsilon}")));
    }
    let v_max = traj.initial().grid().v_max();
    let threshold = epsilon * traj.diagnostics[0].total_mass();
    let gel: Vec<f64> = traj.diagnostics.iter().map(|d| d.gel_mass).collect();
    let t_gel_eps = crossing_time(&traj.times, &gel, threshold);
    Ok(GelationEstimate { epsilon, t_gel_eps, v_max })
}

/// First `t` where the piecewise-linear series reaches `threshold`.
pub fn crossing_time(times: &[f64], values: &[f64], threshold: f64) -> Option<f64> {
    let k = values.iter().position(|&g| g >= threshold)?;
    if k == 0 {
        return Some(times[0]);
    }
    let (t0, t1) = (times[k - 1], times[k]);
    let (g0, g1) = (values[k - 1], values[k]);
    Some(t0 + (threshold - g0) / (g1 - g0) * (t1 - t0))
}

#[derive(Debug, Clone, PartialEq)]
pub struct DecayFit {
    pub gamma: f64,
    pub slope: f64,
    pub intercept: f64,
    pub r_squared: f64,
    /// Points used, as `(R, I_R)`.
    pub points: Vec<(f64, f64)>,
    /// Per requested `R`: whether `J_{R/2-1} >= v0/2` held (empty for
    /// synthetic fits).
    pub dini_flags: Vec<(f64, bool)>,
}

impl DecayFit {
    /// Least squares of `ln I_R` against `R^{γ-1}` over the positive samples.
    pub fn from_samples(gamma: f64, samples: &[(f64, f64)]) -> Result<DecayFit, DiagnosticsError> {
        let points: Vec<(f64, f64)> = samples.iter().copied().filter(|&(_, i)| i > 0.0).collect();
        if points.len() < 3 {
            return Err(DiagnosticsError::InsufficientData { found: points.len() });
        }
        let xs: Vec<f64> = points.iter().map(|&(r, _)| r.powf(gamma - 1.0)).collect();
        let ys: Vec<f64> = points.iter().map(|&(_, i)| i.ln()).collect();
        let n = xs.len() as f64;
        let mx = xs.iter().sum::<f64>() / n;
        let my = ys.iter().sum::<f64>() / n;
        let sxx: f64 = xs.iter().map(|x| (x - mx).powi(2)).sum();
        let sxy: f64 = xs.iter().zip(&ys).map(|(x, y)| (x - mx) * (y - my)).sum();
        let syy: f64 = ys.iter().map(|y| (y - my).powi(2)).sum();
        if sxx == 0.0 {
            return Err(DiagnosticsError::Domain("R values give a degenerate regressor".into()));
        }
        let slope = sxy / sxx;
        let intercept = my - slope * mx;
        let r_squared = if syy == 0.0 { 1.0 } else { (sxy * sxy / (sxx * syy)).clamp(0.0, 1.0) };
        Ok(DecayFit { gamma, slope, intercept, r_squared, points, dini_flags: Vec::new() })
    }
}

/// Fits `ln I_R ≈ intercept + slope·R^{γ-1}` on `dist`, and flags each `R`
/// by whether the mass below the cutoff `J_{R/2-1}` is at least half the
/// total.
pub fn tail_decay_fit(dist: &SizeDistribution, gamma: f64, r_values: &[f64]) -> Result<DecayFit, DiagnosticsError> {
    if !(gamma > 0.0) {
        return Err(DiagnosticsError::Domain(format!("gamma must be positive, got {gamma}")));
    }
    let samples: Vec<(f64, f64)> = r_values.iter().map(|&r| (r, dist.cutoff_pair(r).0)).collect();
    let mut fit = DecayFit::from_samples(gamma, &samples)?;
    let v0 = dist.mass();
    fit.dini_flags = r_values.iter().map(|&r| (r, dist.cutoff_pair(r / 2.0 - 1.0).1 >= v0 / 2.0)).collect();
    Ok(fit)
}

/// Kernel constants entering the blow-up bound.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct KernelConstants {
    pub h0: f64,
    pub g0: f64,
    pub k: f64,
    pub gamma: f64,
    /// Crossover `H` beyond which the power lower bound on `h` holds.
    pub crossover: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct BlowupBound {
    pub t: f64,
    pub r: f64,
    pub m: f64,
    pub k_m: f64,
    /// `+∞` when the truncated moment vanishes.
    pub bound: f64,
    pub truncated_moment: f64,
    /// Named factors of the prefactor `A`, in assembly order; the last entry
    /// is `A` itself.
    pub constant_chain: Vec<(String, f64)>,
    /// `R >= H`.
    pub r_beyond_crossover: bool,
    /// `J_{R/2-1} >= v0/2`.
    pub dini_ok: bool,
}

/// `k_m = (γ - 1)/(m - 1)`.
pub fn k_m(gamma: f64, m: f64) -> f64 {
    (gamma - 1.0) / (m - 1.0)
}

/// Upper bound on the existence time of a mass-conserving solution from the
/// comparison ODE `M' >= A M^{1 + k_m}` for `M = M_{R,m}`:
/// `T <= t + M^{-k_m} / (A k_m)` with
/// `A = c_K m v0 (1 + v0)^{-(γ-1)}`, `c_K = H0 G0 / (4·6^k)`.
///
/// The factor `1/4` in `c_K` collects the `1/2` of the coagulation operator
/// and the `v0/2` lower bound on the mass below the cutoff.
pub fn blowup_time_bound(
    dist: &SizeDistribution,
    t: f64,
    r: f64,
    m: f64,
    consts: KernelConstants,
    v0: f64,
) -> Result<BlowupBound, DiagnosticsError> {
    if !(m > 2.0) {
        return Err(DiagnosticsError::Domain(format!("m must exceed 2, got {m}")));
    }
    if !(consts.gamma > 1.0) {
        return Err(DiagnosticsError::Domain(format!("gamma must exceed 1, got {}", consts.gamma)));
    }
    if !(v0 > 0.0 && consts.h0 > 0.0 && consts.g0 > 0.0 && consts.k >= 0.0) {
        return Err(DiagnosticsError::Domain("v0, H0, G0 must be positive and k nonnegative".into()));
    }
    let km = k_m(consts.gamma, m);
    let operator_half = 0.5;
    let dini_half = 0.5;
    let g_floor = consts.g0 / 6f64.powf(consts.k);
    let c_k = operator_half * dini_half * consts.h0 * g_floor;
    let mass_factor = v0 * (1.0 + v0).powf(-(consts.gamma - 1.0));
    let a = c_k * m * mass_factor;
    let constant_chain = vec![
        ("operator_half".to_string(), operator_half),
        ("dini_half".to_string(), dini_half),
        ("H0".to_string(), consts.h0),
        ("G0/6^k".to_string(), g_floor),
        ("c_K".to_string(), c_k),
        ("m".to_string(), m),
        ("v0(1+v0)^-(gamma-1)".to_string(), mass_factor),
        ("A".to_string(), a),
    ];
    let mrm = dist.truncated_moment(r, m);
    let bound = if mrm > 0.0 { t + mrm.powf(-km) / (a * km) } else { f64::INFINITY };
    let dini_ok = dist.cutoff_pair(r / 2.0 - 1.0).1 >= v0 / 2.0;
    Ok(BlowupBound {
        t,
        r,
        m,
        k_m: km,
        bound,
        truncated_moment: mrm,
        constant_chain,
        r_beyond_crossover: r >= consts.crossover,
        dini_ok,
    })
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CascadeBall {
    pub center: f64,
    pub radius: f64,
    pub mass: f64,
}

/// Contents of the balls `B(n·x1 + x2, ρ_n)`, `n = 1..=n_steps`, with
/// `ρ_1 = 5η0/2` and `ρ_n = η0` after, in the latest sample at or before `t`.
pub fn positivity_cascade_probe(
    traj: &Trajectory,
    pair: &SeparatedPair,
    t: f64,
    n_steps: usize,
) -> Result<Vec<CascadeBall>, DiagnosticsError> {
    if !(pair.eta0 > 0.0) {
        return Err(DiagnosticsError::Domain(format!("pair is not separated: eta0 = {}", pair.eta0)));
    }
    let state = traj.state_at(t);
    (1..=n_steps)
        .map(|n| {
            let center = n as f64 * pair.x1 + pair.x2;
            let radius = if n == 1 { 2.5 * pair.eta0 } else { pair.eta0 };
            Ok(CascadeBall { center, radius, mass: state.ball_mass(center, radius)? })
        })
        .collect()
}

/// One `(run_id, diagnostic_name, value)` record.
#[derive(Debug, Clone, PartialEq)]
pub struct DiagnosticRow {
    pub run_id: String,
    pub name: String,
    pub value: f64,
}

impl DiagnosticRow {
    pub fn new(run_id: impl Into<String>, name: impl Into<String>, value: f64) -> Self {
        DiagnosticRow { run_id: run_id.into(), name: name.into(), value }
    }
}

/// CSV with columns `run_id,diagnostic_name,value`.
pub fn diagnostics_csv(rows: &[DiagnosticRow]) -> String {
    let mut out = String::from("run_id,diagnostic_name,value\n");
    for r in rows {
        let _ = writeln!(out, "{},{},{}", r.run_id, r.name, r.value);
    }
    out
}

/// CSV with columns `v_max,t_gel_eps`, ordered by `v_max`; an estimate that
/// never crossed is written as `none`.
pub fn sweep_csv(estimates: &[GelationEstimate]) -> String {
    let mut sorted = estimates.to_vec();
    sorted.sort_by(|a, b| a.v_max.total_cmp(&b.v_max));
    let mut out = String::from("v_max,t_gel_eps\n");
    for e in &sorted {
        match e.t_gel_eps {
            Some(t) => {
                let _ = writeln!(out, "{},{}", e.v_max, t);
            }
            None => {
                let _ = writeln!(out, "{},none", e.v_max);
            }
        }
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::measures::Grid;
    use crate::solver_fv::{LedgerSample, RunStatus};

    fn ledger_traj(times: &[f64], gel: &[f64]) -> Trajectory {
        let grid = Grid::geometric(1e-3, 1e3, 4).unwrap();
        let dist = SizeDistribution::from_atoms(grid, &[(1.0, 1.0)]).unwrap();
        Trajectory {
            times: times.to_vec(),
            states: vec![dist; times.len()],
            diagnostics: gel.iter().map(|&g| LedgerSample { m0: 1.0, m1_in: 1.0 - g, gel_mass: g }).collect(),
            status: RunStatus::Completed,
            steps: times.len(),
        }
    }

    #[test]
    fn constant_mass_never_gels() {
        let tr = ledger_traj(&[0.0, 1.0, 2.0], &[0.0, 0.0, 0.0]);
        assert_eq!(gelation_time_from_series(&tr, 0.01).unwrap().t_gel_eps, None);
    }

    #[test]
    fn linear_loss_crossing() {
        // gel(t) = 0.2 t, M1(0) = 1 → t = 0.01 / 0.2 = 0.05
        let times: Vec<f64> = (0..11).map(|k| k as f64 * 0.1).collect();
        let gel: Vec<f64> = times.iter().map(|t| 0.2 * t).collect();
        let e = gelation_time_from_series(&ledger_traj(&times, &gel), 0.01).unwrap();
        assert!((e.t_gel_eps.unwrap() - 0.05).abs() < 1e-15);
    }

    #[test]
    fn epsilon_domain() {
        let tr = ledger_traj(&[0.0], &[0.0]);
        assert!(gelation_time_from_series(&tr, 0.0).is_err());
        assert!(gelation_time_from_series(&tr, 1.0).is_err());
    }

    #[test]
    fn exponential_fit_recovery() {
        let samples: Vec<(f64, f64)> =
            [8.0f64, 27.0, 64.0, 125.0].iter().map(|&r| (r, 2.0 * (-0.5 * r.cbrt()).exp())).collect();
        let fit = DecayFit::from_samples(4.0 / 3.0, &samples).unwrap();
        assert!((fit.slope + 0.5).abs() < 1e-9);
        assert!((fit.intercept - 2f64.ln()).abs() < 1e-9);
        assert!((fit.r_squared - 1.0).abs() < 1e-9);
    }

    #[test]
    fn empty_tail_is_insufficient() {
        let grid = Grid::geometric(1e-3, 1e3, 8).unwrap();
        let dist = SizeDistribution::from_atoms(grid, &[(1.0, 1.0)]).unwrap();
        assert_eq!(
            tail_decay_fit(&dist, 4.0 / 3.0, &[2.0, 4.0, 8.0]).unwrap_err(),
            DiagnosticsError::InsufficientData { found: 0 }
        );
    }

    #[test]
    fn k_m_hand_value() {
        assert!((k_m(4.0 / 3.0, 3.0) - 1.0 / 6.0).abs() < 1e-15);
        assert_eq!(k_m(2.0, 5.0), 0.25);
    }

    #[test]
    fn zero_tail_gives_infinite_bound() {
        let grid = Grid::geometric(1e-3, 1e3, 8).unwrap();
        let dist = SizeDistribution::from_atoms(grid, &[(1.0, 1.0)]).unwrap();
        let c = KernelConstants { h0: 0.5, g0: 0.1, k: 1.0, gamma: 4.0 / 3.0, crossover: 2.0 };
        let b = blowup_time_bound(&dist, 0.3, 5.0, 3.0, c, 1.0).unwrap();
        assert_eq!(b.bound, f64::INFINITY);
        assert_eq!(b.constant_chain.last().unwrap().0, "A");
        assert!(blowup_time_bound(&dist, 0.3, 5.0, 2.0, c, 1.0).is_err());
    }

    #[test]
    fn sweep_rows_sorted() {
        let e = |v, t| GelationEstimate { epsilon: 0.01, t_gel_eps: t, v_max: v };
        let csv = sweep_csv(&[e(1024.0, Some(0.5)), e(64.0, Some(1.0)), e(256.0, None)]);
        assert_eq!(csv, "v_max,t_gel_eps\n64,1\n256,none\n1024,0.5\n");
    }

    #[test]
    fn unseparated_pair_rejected() {
        let tr = ledger_traj(&[0.0], &[0.0]);
        let pair = SeparatedPair { x1: 1.0, x2: 2.5, eta0: 0.0, depth: 1, cells: (0, 2), horizon: 4.0 };
        assert!(positivity_cascade_probe(&tr, &pair, 0.0, 1).is_err());
    }
}
