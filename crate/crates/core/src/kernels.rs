//! Coagulation kernels of the form `K(v, v') = h(v, v') g(v / (v + v'))`.
//!
//! Every kernel is decomposed with the canonical choice `h(v, v') = (v + v')^γ`,
//! which makes the profile `g` unique for scale-homogeneous kernels:
//! `g(x) = K(x s, (1 - x) s) / s^γ` for any `s > 0`. With this choice the
//! comparison constants of `h` are `H0 = 1/2` and `H1 = 2^γ`.
//!
//! [`certify_assumption`] checks the structural bounds (lower/upper growth of
//! `h`, positivity on compacts, the `g` envelope `G0 |x - 1/2|^k <= g <= G1`)
//! on a sampled grid. A PASS only certifies the sampled set.

use std::fmt;

use thiserror::Error;

/// Scale factors used by the homogeneity checks.
pub const SCALE_FACTORS: [f64; 4] = [0.125, 0.5, 2.0, 8.0];

/// Off-diagonal probe pairs for the numerical homogeneity estimate.
const PROBE_PAIRS: [(f64, f64); 5] = [(1.0, 2.0), (1.0, 3.0), (0.5, 4.0), (1.0, 1.5), (2.0, 7.0)];

/// Relative tolerance of the scaling test applied to tabulated kernels.
const HOMOGENEITY_TOL: f64 = 1e-9;

/// Samples closer than this to `x = 1/2` are skipped when extracting `G0`.
const G0_EXCLUSION: f64 = 1e-6;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum KernelError {
    #[error("kernel arguments must be positive and finite, got ({0}, {1})")]
    Domain(f64, f64),
    #[error("profile argument {0} is outside [0, 1]")]
    FractionDomain(f64),
    #[error("kernel is not scale-homogeneous (relative deviation {deviation:.3e} at ({v}, {vprime}))")]
    NotHomogeneous { deviation: f64, v: f64, vprime: f64 },
    #[error("kernel vanishes on every probe pair; homogeneity degree is indeterminate")]
    Indeterminate,
    #[error("invalid kernel parameter: {0}")]
    InvalidParameter(String),
    #[error("sampling configuration error: {0}")]
    Sampling(String),
}

/// Structural constants of a kernel satisfying the growth assumptions.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct KernelParams {
    /// Homogeneity exponent, `> 1`.
    pub gamma: f64,
    /// Crossover size `H > 1` above which the lower growth bound holds.
    pub crossover: f64,
    /// Lower comparison constant `H0` of `h`.
    pub h_lower: f64,
    /// Upper comparison constant `H1` of `h`.
    pub h_upper: f64,
    /// Lower constant `G0` of the `g` envelope.
    pub g_lower: f64,
    /// Upper bound `G1` of `g`.
    pub g_upper: f64,
    /// Order `k >= 1` of the vanishing of `g` at `1/2`.
    pub vanishing_order: f64,
}

impl KernelParams {
    pub fn new(
        gamma: f64,
        crossover: f64,
        h_lower: f64,
        h_upper: f64,
        g_lower: f64,
        g_upper: f64,
        vanishing_order: f64,
    ) -> Result<Self, KernelError> {
        let p = KernelParams { gamma, crossover, h_lower, h_upper, g_lower, g_upper, vanishing_order };
        p.validate()?;
        Ok(p)
    }

    pub fn validate(&self) -> Result<(), KernelError> {
        let bad = |what: &str| Err(KernelError::InvalidParameter(what.to_string()));
        if !(self.gamma > 1.0 && self.gamma.is_finite()) {
            return bad("gamma must exceed 1");
        }
        if !(self.crossover > 1.0 && self.crossover.is_finite()) {
            return bad("crossover H must exceed 1");
        }
        if !(self.h_lower > 0.0 && self.h_lower <= self.h_upper && self.h_upper.is_finite()) {
            return bad("need 0 < H0 <= H1");
        }
        if !(self.g_lower > 0.0 && self.g_lower <= self.g_upper && self.g_upper.is_finite()) {
            return bad("need 0 < G0 <= G1");
        }
        if !(self.vanishing_order >= 1.0 && self.vanishing_order.is_finite()) {
            return bad("vanishing order k must be at least 1");
        }
        Ok(())
    }
}

/// Piecewise-linear profile on `[1/2, 1]`, reflected to `[0, 1/2]`.
#[derive(Debug, Clone, PartialEq)]
pub struct TabulatedProfile {
    xs: Vec<f64>,
    values: Vec<f64>,
}

impl TabulatedProfile {
    /// Nodes must be strictly increasing and cover `[1/2, 1]`. Nodes below
    /// `1/2` are ignored: the profile is always evaluated at `max(x, 1 - x)`.
    pub fn new(xs: Vec<f64>, values: Vec<f64>) -> Result<Self, KernelError> {
        if xs.len() != values.len() || xs.len() < 2 {
            return Err(KernelError::InvalidParameter("profile needs at least two (x, g) nodes".into()));
        }
        if xs.windows(2).any(|w| !(w[1] > w[0])) {
            return Err(KernelError::InvalidParameter("profile nodes must be strictly increasing".into()));
        }
        if xs[0] > 0.5 || *xs.last().unwrap() < 1.0 {
            return Err(KernelError::InvalidParameter("profile nodes must cover [1/2, 1]".into()));
        }
        if values.iter().any(|g| !(g.is_finite() && *g >= 0.0)) {
            return Err(KernelError::InvalidParameter("profile values must be finite and nonnegative".into()));
        }
        Ok(TabulatedProfile { xs, values })
    }

    fn eval(&self, u: f64) -> f64 {
        let k = self.xs.partition_point(|&x| x <= u);
        if k == 0 {
            return self.values[0];
        }
        if k == self.xs.len() {
            return *self.values.last().unwrap();
        }
        let (x0, x1) = (self.xs[k - 1], self.xs[k]);
        let (g0, g1) = (self.values[k - 1], self.values[k]);
        g0 + (g1 - g0) * (u - x0) / (x1 - x0)
    }
}

/// Size factor `h` of a composed kernel, as a function of `s = v + v'`.
#[derive(Debug, Clone, PartialEq)]
pub enum HProfile {
    /// `h = s^γ`, the canonical homogeneous choice.
    Power { gamma: f64 },
    /// `h` interpolated log-log through `(s, h)` nodes, extrapolated with the
    /// end slopes. Generally not homogeneous.
    Tabulated { sizes: Vec<f64>, values: Vec<f64> },
}

impl HProfile {
    fn validate(&self) -> Result<(), KernelError> {
        match self {
            HProfile::Power { gamma } if gamma.is_finite() && *gamma >= 0.0 => Ok(()),
            HProfile::Power { .. } => Err(KernelError::InvalidParameter("h exponent must be finite and >= 0".into())),
            HProfile::Tabulated { sizes, values } => {
                if sizes.len() != values.len() || sizes.len() < 2 {
                    return Err(KernelError::InvalidParameter("h table needs at least two nodes".into()));
                }
                if sizes.iter().chain(values).any(|x| !(x.is_finite() && *x > 0.0)) {
                    return Err(KernelError::InvalidParameter("h table entries must be positive".into()));
                }
                if sizes.windows(2).any(|w| !(w[1] > w[0])) {
                    return Err(KernelError::InvalidParameter("h table sizes must be strictly increasing".into()));
                }
                Ok(())
            }
        }
    }

    fn eval(&self, s: f64) -> f64 {
        match self {
            HProfile::Power { gamma } => s.powf(*gamma),
            HProfile::Tabulated { sizes, values } => {
                if s <= 0.0 {
                    return 0.0;
                }
                let ls = s.ln();
                let k = sizes.partition_point(|&x| x <= s).clamp(1, sizes.len() - 1);
                let (s0, s1) = (sizes[k - 1].ln(), sizes[k].ln());
                let (h0, h1) = (values[k - 1].ln(), values[k].ln());
                (h0 + (h1 - h0) * (ls - s0) / (s1 - s0)).exp()
            }
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub enum KernelForm {
    /// `|v^{2/3} - v'^{2/3}| (v^{1/3} + v'^{1/3})^2`, homogeneity 4/3.
    DifferentialSedimentation,
    /// `v^γ + v'^γ`.
    Sum { gamma: f64 },
    /// `|v^{d1} - v'^{d1}| (v^{d2} + v'^{d2})`.
    PowerDifference { d1: f64, d2: f64 },
    /// `|v - v'|^{d1} (v^{d2} + v'^{d2})`.
    AbsDifference { d1: f64, d2: f64 },
    /// `h(v + v') g(v / (v + v'))` from tabulated profiles.
    Composed { h: HProfile, g: TabulatedProfile },
    /// `K ≡ rate`; a control kernel for analytic oracles.
    Constant { rate: f64 },
}

/// An immutable, symmetric, nonnegative coagulation kernel.
#[derive(Debug, Clone, PartialEq)]
pub struct Kernel {
    form: KernelForm,
}

impl Kernel {
    pub fn new(form: KernelForm) -> Result<Self, KernelError> {
        let nonneg = |name: &str, x: f64| {
            if x.is_finite() && x >= 0.0 {
                Ok(())
            } else {
                Err(KernelError::InvalidParameter(format!("{name} must be finite and >= 0, got {x}")))
            }
        };
        match &form {
            KernelForm::DifferentialSedimentation => {}
            KernelForm::Sum { gamma } => nonneg("gamma", *gamma)?,
            KernelForm::PowerDifference { d1, d2 } | KernelForm::AbsDifference { d1, d2 } => {
                nonneg("d1", *d1)?;
                nonneg("d2", *d2)?;
            }
            KernelForm::Composed { h, .. } => h.validate()?,
            KernelForm::Constant { rate } => nonneg("rate", *rate)?,
        }
        Ok(Kernel { form })
    }

    pub fn differential_sedimentation() -> Self {
        Kernel { form: KernelForm::DifferentialSedimentation }
    }

    pub fn sum(gamma: f64) -> Result<Self, KernelError> {
        Self::new(KernelForm::Sum { gamma })
    }

    pub fn power_difference(d1: f64, d2: f64) -> Result<Self, KernelError> {
        Self::new(KernelForm::PowerDifference { d1, d2 })
    }

    pub fn abs_difference(d1: f64, d2: f64) -> Result<Self, KernelError> {
        Self::new(KernelForm::AbsDifference { d1, d2 })
    }

    pub fn constant(rate: f64) -> Result<Self, KernelError> {
        Self::new(KernelForm::Constant { rate })
    }

    pub fn composed(h: HProfile, g: TabulatedProfile) -> Result<Self, KernelError> {
        Self::new(KernelForm::Composed { h, g })
    }

    pub fn form(&self) -> &KernelForm {
        &self.form
    }

    /// Closed-form homogeneity degree, when the form has one.
    pub fn degree(&self) -> Option<f64> {
        match &self.form {
            KernelForm::DifferentialSedimentation => Some(4.0 / 3.0),
            KernelForm::Sum { gamma } => Some(*gamma),
            KernelForm::PowerDifference { d1, d2 } | KernelForm::AbsDifference { d1, d2 } => Some(d1 + d2),
            KernelForm::Composed { h: HProfile::Power { gamma }, .. } => Some(*gamma),
            KernelForm::Composed { .. } => None,
            KernelForm::Constant { .. } => Some(0.0),
        }
    }

    /// Whether the form vanishes identically on the diagonal `v = v'`.
    pub fn is_diagonal_vanishing(&self) -> bool {
        match &self.form {
            KernelForm::DifferentialSedimentation => true,
            KernelForm::PowerDifference { d1, .. } | KernelForm::AbsDifference { d1, .. } => *d1 > 0.0,
            KernelForm::Composed { g, .. } => g.eval(0.5) == 0.0,
            KernelForm::Sum { .. } | KernelForm::Constant { .. } => false,
        }
    }

    /// `K(v, v')` for `v, v' > 0`.
    pub fn evaluate(&self, v: f64, vprime: f64) -> Result<f64, KernelError> {
        if !(v > 0.0 && vprime > 0.0 && v.is_finite() && vprime.is_finite()) {
            return Err(KernelError::Domain(v, vprime));
        }
        Ok(self.rate(v, vprime))
    }

    /// Unchecked evaluation; also defined on the boundary `v = 0` or `v' = 0`.
    ///
    /// Arguments are put in ascending order first, so swapping them gives a
    /// bit-identical result.
    #[inline]
    pub fn rate(&self, v: f64, vprime: f64) -> f64 {
        let (a, b) = if v <= vprime { (v, vprime) } else { (vprime, v) };
        match &self.form {
            KernelForm::DifferentialSedimentation => {
                let (ca, cb) = (a.cbrt(), b.cbrt());
                let s = ca + cb;
                (cb * cb - ca * ca) * s * s
            }
            KernelForm::Sum { gamma } => a.powf(*gamma) + b.powf(*gamma),
            KernelForm::PowerDifference { d1, d2 } => (b.powf(*d1) - a.powf(*d1)).abs() * (a.powf(*d2) + b.powf(*d2)),
            KernelForm::AbsDifference { d1, d2 } => (b - a).powf(*d1) * (a.powf(*d2) + b.powf(*d2)),
            KernelForm::Composed { h, g } => {
                let s = a + b;
                if s == 0.0 {
                    return 0.0;
                }
                let x = a / s;
                h.eval(s) * g.eval(x.max(1.0 - x))
            }
            KernelForm::Constant { rate } => *rate,
        }
    }

    /// Largest relative deviation from `K(λv, λv') = λ^γ K(v, v')` over the
    /// probe pairs and [`SCALE_FACTORS`], with its witness pair.
    pub fn scaling_deviation(&self, gamma: f64, pairs: &[(f64, f64)]) -> (f64, (f64, f64)) {
        let mut worst = (0.0, pairs.first().copied().unwrap_or((1.0, 2.0)));
        for &(v, w) in pairs {
            let base = self.rate(v, w);
            for &lambda in &SCALE_FACTORS {
                let scaled = self.rate(lambda * v, lambda * w);
                let expected = lambda.powf(gamma) * base;
                let denom = expected.abs().max(scaled.abs());
                let dev = if denom == 0.0 { 0.0 } else { (scaled - expected).abs() / denom };
                if dev > worst.0 {
                    worst = (dev, (v, w));
                }
            }
        }
        worst
    }
}

impl fmt::Display for Kernel {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match &self.form {
            KernelForm::DifferentialSedimentation => write!(f, "differential_sedimentation"),
            KernelForm::Sum { gamma } => write!(f, "sum(gamma={gamma})"),
            KernelForm::PowerDifference { d1, d2 } => write!(f, "power_difference(d1={d1}, d2={d2})"),
            KernelForm::AbsDifference { d1, d2 } => write!(f, "abs_difference(d1={d1}, d2={d2})"),
            KernelForm::Composed { .. } => write!(f, "composed"),
            KernelForm::Constant { rate } => write!(f, "constant({rate})"),
        }
    }
}

/// Numerical homogeneity degree from `ln(K(2v, 2v') / K(v, v')) / ln 2` at the
/// first probe pair where the kernel is positive.
pub fn homogeneity_degree(kernel: &Kernel) -> Result<f64, KernelError> {
    for &(v, w) in &PROBE_PAIRS {
        let base = kernel.rate(v, w);
        if base > 0.0 {
            let scaled = kernel.rate(2.0 * v, 2.0 * w);
            return Ok((scaled / base).ln() / std::f64::consts::LN_2);
        }
    }
    Err(KernelError::Indeterminate)
}

/// The profile `g(x) = K(x, 1 - x)` under the `h = (v + v')^γ` convention.
///
/// The kernel is evaluated at the canonical pair `(1 - u, u)` with
/// `u = max(x, 1 - x)`, so `g(x) == g(1 - x)` holds bit for bit.
pub fn g_profile(kernel: &Kernel, x: f64) -> Result<f64, KernelError> {
    if !(0.0..=1.0).contains(&x) {
        return Err(KernelError::FractionDomain(x));
    }
    if let KernelForm::Composed { .. } = kernel.form {
        let gamma = homogeneity_degree(kernel)?;
        let (dev, (v, vprime)) = kernel.scaling_deviation(gamma, &PROBE_PAIRS);
        if dev > HOMOGENEITY_TOL {
            return Err(KernelError::NotHomogeneous { deviation: dev, v, vprime });
        }
    }
    let u = x.max(1.0 - x);
    Ok(kernel.rate(1.0 - u, u))
}

/// The canonical size factor `h(v, v') = (v + v')^γ`.
pub fn h_canonical(gamma: f64, v: f64, vprime: f64) -> f64 {
    (v + vprime).powf(gamma)
}

/// Declared constants to be checked; missing entries are derived from samples.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct DeclaredParams {
    pub gamma: Option<f64>,
    pub crossover: Option<f64>,
    pub h_lower: Option<f64>,
    pub h_upper: Option<f64>,
    pub g_lower: Option<f64>,
    pub g_upper: Option<f64>,
    pub vanishing_order: Option<f64>,
    pub require_diagonal_vanishing: bool,
}

/// Sampled region for certification: a geometric `n_v × n_v` grid on
/// `[v_min, v_max]²` and `n_x` equispaced fractions in `[0, 1]`.
#[derive(Debug, Clone, PartialEq)]
pub struct SamplingSpec {
    pub v_min: f64,
    pub v_max: f64,
    pub n_v: usize,
    pub n_x: usize,
    pub r_checks: Vec<f64>,
}

impl Default for SamplingSpec {
    fn default() -> Self {
        SamplingSpec { v_min: 1e-3, v_max: 1e3, n_v: 200, n_x: 10_001, r_checks: vec![2.0, 10.0] }
    }
}

impl SamplingSpec {
    fn volumes(&self) -> Vec<f64> {
        if self.n_v == 1 {
            return vec![self.v_min];
        }
        let ratio = (self.v_max / self.v_min).ln() / (self.n_v - 1) as f64;
        (0..self.n_v).map(|i| self.v_min * (ratio * i as f64).exp()).collect()
    }

    fn fractions(&self) -> Vec<f64> {
        if self.n_x == 1 {
            return vec![0.5];
        }
        (0..self.n_x).map(|i| i as f64 / (self.n_x - 1) as f64).collect()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum BoundStatus {
    Pass,
    Fail,
}

impl fmt::Display for BoundStatus {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            BoundStatus::Pass => "PASS",
            BoundStatus::Fail => "FAIL",
        })
    }
}

/// One checked bound. `margin` is the slack of the inequality (negative on
/// failure); `witness` is the worst sampled point.
#[derive(Debug, Clone, PartialEq)]
pub struct BoundCheck {
    pub name: String,
    pub status: BoundStatus,
    pub margin: f64,
    pub witness: Option<(f64, f64)>,
}

impl BoundCheck {
    fn new(name: impl Into<String>, margin: f64, witness: Option<(f64, f64)>) -> Self {
        let status = if margin >= 0.0 { BoundStatus::Pass } else { BoundStatus::Fail };
        BoundCheck { name: name.into(), status, margin, witness }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct CertificateReport {
    pub checks: Vec<BoundCheck>,
    /// Sampled `C_R = min h` over `[1/R, R]²` for each requested `R`.
    pub c_r: Vec<(f64, f64)>,
    /// Constants used for the checks (declared where given, derived otherwise).
    pub used: DeclaredParams,
}

impl CertificateReport {
    pub fn all_pass(&self) -> bool {
        self.checks.iter().all(|c| c.status == BoundStatus::Pass)
    }

    pub fn check(&self, name: &str) -> Option<&BoundCheck> {
        self.checks.iter().find(|c| c.name == name)
    }

    /// The certified constants, if every bound passed.
    pub fn params(&self) -> Option<KernelParams> {
        if !self.all_pass() {
            return None;
        }
        let u = &self.used;
        KernelParams::new(u.gamma?, u.crossover?, u.h_lower?, u.h_upper?, u.g_lower?, u.g_upper?, u.vanishing_order?)
            .ok()
    }

    /// CSV with columns `bound_name,status,margin,witness_v,witness_vprime`.
    pub fn to_csv(&self) -> String {
        let mut out = String::from("bound_name,status,margin,witness_v,witness_vprime\n");
        for c in &self.checks {
            let (wv, ww) = match c.witness {
                Some((a, b)) => (a.to_string(), b.to_string()),
                None => (String::new(), String::new()),
            };
            out.push_str(&format!("{},{},{},{},{}\n", c.name, c.status, c.margin, wv, ww));
        }
        out
    }
}

/// Checks the growth and profile bounds of `kernel` against `declared` on the
/// sampled set described by `sampling`.
pub fn certify_assumption(
    kernel: &Kernel,
    declared: &DeclaredParams,
    sampling: &SamplingSpec,
) -> Result<CertificateReport, KernelError> {
    if sampling.n_v == 0 || sampling.n_x == 0 {
        return Err(KernelError::Sampling("empty sampling grid".into()));
    }
    if !(sampling.v_min > 0.0 && sampling.v_min < sampling.v_max && sampling.v_max.is_finite()) {
        return Err(KernelError::Sampling("need 0 < v_min < v_max".into()));
    }
    for &r in &sampling.r_checks {
        if !(r > 1.0 && sampling.v_min <= 1.0 / r && r <= sampling.v_max) {
            return Err(KernelError::Sampling(format!(
                "R check {r} is not covered by [{}, {}]",
                sampling.v_min, sampling.v_max
            )));
        }
    }

    let vs = sampling.volumes();
    let xs = sampling.fractions();
    let measured_gamma = homogeneity_degree(kernel)?;
    let mut used = declared.clone();
    let gamma = *used.gamma.get_or_insert(measured_gamma);
    let crossover = *used.crossover.get_or_insert(2.0);
    let h_lower = *used.h_lower.get_or_insert(0.5);
    let h_upper = *used.h_upper.get_or_insert(2f64.powf(gamma));
    let k = *used.vanishing_order.get_or_insert(1.0);
    let mut checks = Vec::new();

    // symmetry
    let mut sym = (0.0f64, None);
    for &v in &vs {
        for &w in &vs {
            let d = (kernel.rate(v, w) - kernel.rate(w, v)).abs();
            if d > sym.0 {
                sym = (d, Some((v, w)));
            }
        }
    }
    checks.push(BoundCheck::new("symmetry", -sym.0, sym.1));

    // homogeneity of the declared degree over the whole sample grid
    let pairs: Vec<(f64, f64)> =
        vs.iter().step_by(7).flat_map(|&v| vs.iter().step_by(11).map(move |&w| (v, w))).collect();
    let (dev, witness) = kernel.scaling_deviation(gamma, &pairs);
    let tol = HOMOGENEITY_TOL.max(1e-12 * (1.0 + gamma.abs()));
    checks.push(BoundCheck::new("homogeneity", tol - dev, if dev > tol { Some(witness) } else { None }));
    checks.push(BoundCheck::new("gamma_gt_one", gamma - 1.0, None));

    if declared.require_diagonal_vanishing {
        let mut worst: Option<(f64, f64)> = None;
        for &v in std::iter::once(&1.0).chain(vs.iter()) {
            let kd = kernel.rate(v, v);
            if kd != 0.0 {
                worst = Some((v, kd));
                break;
            }
        }
        match worst {
            Some((v, kd)) => checks.push(BoundCheck::new("diagonal_vanishing", -kd, Some((v, v)))),
            None => checks.push(BoundCheck::new("diagonal_vanishing", 0.0, None)),
        }
    }

    // h bounds under the canonical decomposition, with the measured degree
    let mut lower = (f64::INFINITY, None);
    let mut upper = (f64::NEG_INFINITY, None);
    for &v in &vs {
        for &w in &vs {
            let h = h_canonical(measured_gamma, v, w);
            let sum_pow = v.powf(gamma) + w.powf(gamma);
            let ratio = h / sum_pow;
            if v + w > crossover && ratio < lower.0 {
                lower = (ratio, Some((v, w)));
            }
            if ratio > upper.0 {
                upper = (ratio, Some((v, w)));
            }
        }
    }
    checks.push(BoundCheck::new("h_lower", lower.0 - h_lower, lower.1));
    checks.push(BoundCheck::new("h_upper", h_upper - upper.0, upper.1));

    let mut c_r = Vec::new();
    for &r in &sampling.r_checks {
        let mut min_h = (f64::INFINITY, None);
        for &v in vs.iter().filter(|&&v| v >= 1.0 / r && v <= r) {
            for &w in vs.iter().filter(|&&w| w >= 1.0 / r && w <= r) {
                let h = h_canonical(measured_gamma, v, w);
                if h < min_h.0 {
                    min_h = (h, Some((v, w)));
                }
            }
        }
        let margin = if min_h.0 > 0.0 && min_h.0.is_finite() { min_h.0 } else { -1.0 };
        checks.push(BoundCheck::new(format!("h_positive[R={r}]"), margin, min_h.1));
        c_r.push((r, min_h.0));
    }

    // g envelope
    let mut g_max = (f64::NEG_INFINITY, 0.0);
    let mut ratio_min = (f64::INFINITY, 0.0);
    let mut g_sym = (0.0f64, None);
    for &x in &xs {
        let g = g_profile(kernel, x)?;
        let g_mirror = g_profile(kernel, 1.0 - x)?;
        let d = (g - g_mirror).abs();
        if d > g_sym.0 {
            g_sym = (d, Some((x, 1.0 - x)));
        }
        if g > g_max.0 {
            g_max = (g, x);
        }
        let dist = (x - 0.5).abs();
        if dist >= G0_EXCLUSION {
            let r = g / dist.powf(k);
            if r < ratio_min.0 {
                ratio_min = (r, x);
            }
        }
    }
    checks.push(BoundCheck::new("g_symmetry", -g_sym.0, g_sym.1));
    let g_half = g_profile(kernel, 0.5)?;
    checks.push(BoundCheck::new("g_half_zero", -g_half, if g_half != 0.0 { Some((0.5, 0.5)) } else { None }));
    let g_lower = *used.g_lower.get_or_insert(0.5 * ratio_min.0);
    let g_upper = *used.g_upper.get_or_insert(g_max.0);
    checks.push(BoundCheck::new("g_lower", ratio_min.0 - g_lower, Some((ratio_min.1, 1.0 - ratio_min.1))));
    checks.push(BoundCheck::new("g_upper", g_upper - g_max.0, Some((g_max.1, 1.0 - g_max.1))));
    checks.push(BoundCheck::new("g_lower_positive", g_lower, None));

    // K <= G1 H1 (v^γ + v'^γ)
    let mut envelope = (f64::INFINITY, None);
    for &v in &vs {
        for &w in &vs {
            let kv = kernel.rate(v, w);
            let cap = g_upper * h_upper * (v.powf(gamma) + w.powf(gamma));
            let slack = (cap - kv) / cap.max(f64::MIN_POSITIVE);
            if slack < envelope.0 {
                envelope = (slack, Some((v, w)));
            }
        }
    }
    checks.push(BoundCheck::new("growth_envelope", envelope.0, envelope.1));

    Ok(CertificateReport { checks, c_r, used })
}
