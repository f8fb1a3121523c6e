//! Binned size distributions and the measure-level functionals used by the
//! gelation diagnostics.
//!
//! A [`SizeDistribution`] stores, per bin, the number of particles in that
//! bin (the integral of the density over the bin). Each bin is either a
//! point mass located at its pivot, or spread uniformly over the bin. The
//! distinction only matters for functionals that look inside bins
//! ([`SizeDistribution::ball_mass`] and the dyadic pair search); moments use
//! pivot quadrature throughout.

use std::fmt::Write as _;

use thiserror::Error;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum MeasureError {
    #[error("domain error: {0}")]
    Domain(String),
    #[error("the measure carries no mass")]
    EmptyMeasure,
    #[error("dyadic search unresolved at depth {depth}: mass sits in two adjacent cells")]
    Unresolved { depth: u32 },
    #[error("malformed distribution CSV at line {line}: {reason}")]
    Parse { line: usize, reason: String },
}

/// Bin boundaries `e_0 < … < e_n` and one representative volume per bin.
#[derive(Debug, Clone, PartialEq)]
pub struct Grid {
    edges: Vec<f64>,
    pivots: Vec<f64>,
}

impl Grid {
    /// Geometric grid with ratio `10^{1/bins_per_decade}`, anchored so that the
    /// top edge is exactly `v_max`; the bottom edge is the largest grid point
    /// not above `v_min`. Pivots sit at geometric bin midpoints.
    pub fn geometric(v_min: f64, v_max: f64, bins_per_decade: u32) -> Result<Grid, MeasureError> {
        if !(v_min > 0.0 && v_min.is_finite()) {
            return Err(MeasureError::Domain(format!("v_min must be positive, got {v_min}")));
        }
        if !(v_max > v_min && v_max.is_finite()) {
            return Err(MeasureError::Domain(format!("need v_min < v_max, got {v_min} >= {v_max}")));
        }
        if bins_per_decade == 0 {
            return Err(MeasureError::Domain("bins_per_decade must be positive".into()));
        }
        let bpd = bins_per_decade as f64;
        let n = ((v_max / v_min).log10() * bpd - 1e-9).ceil().max(1.0) as usize;
        let edges: Vec<f64> =
            (0..=n).map(|i| if i == n { v_max } else { v_max * 10f64.powf(-((n - i) as f64) / bpd) }).collect();
        let pivots = edges.windows(2).map(|w| (w[0] * w[1]).sqrt()).collect();
        Ok(Grid { edges, pivots })
    }

    /// Grid from explicit edges and pivots. Pivots must be strictly increasing
    /// and lie in their closed bins.
    pub fn from_parts(edges: Vec<f64>, pivots: Vec<f64>) -> Result<Grid, MeasureError> {
        if edges.len() < 2 || pivots.len() + 1 != edges.len() {
            return Err(MeasureError::Domain("need n + 1 edges for n pivots, n >= 1".into()));
        }
        if !(edges[0] > 0.0) || edges.windows(2).any(|w| !(w[1] > w[0])) || !edges.last().unwrap().is_finite() {
            return Err(MeasureError::Domain("edges must be positive, finite and strictly increasing".into()));
        }
        let grid = Grid { edges, pivots };
        for i in 0..grid.len() {
            let p = grid.pivots[i];
            if !(p >= grid.edges[i] && p <= grid.edges[i + 1]) {
                return Err(MeasureError::Domain(format!("pivot {p} outside bin {i}")));
            }
        }
        if grid.pivots.windows(2).any(|w| !(w[1] > w[0])) {
            return Err(MeasureError::Domain("pivots must be strictly increasing".into()));
        }
        Ok(grid)
    }

    pub fn len(&self) -> usize {
        self.pivots.len()
    }

    pub fn is_empty(&self) -> bool {
        self.pivots.is_empty()
    }

    pub fn edges(&self) -> &[f64] {
        &self.edges
    }

    pub fn pivots(&self) -> &[f64] {
        &self.pivots
    }

    pub fn lower(&self, i: usize) -> f64 {
        self.edges[i]
    }

    pub fn upper(&self, i: usize) -> f64 {
        self.edges[i + 1]
    }

    pub fn width(&self, i: usize) -> f64 {
        self.edges[i + 1] - self.edges[i]
    }

    pub fn v_min(&self) -> f64 {
        self.edges[0]
    }

    pub fn v_max(&self) -> f64 {
        *self.edges.last().unwrap()
    }

    /// Bin `i` with `e_i <= v < e_{i+1}`; the top edge belongs to the last bin.
    pub fn bin_of(&self, v: f64) -> Option<usize> {
        if !(v >= self.v_min() && v <= self.v_max()) {
            return None;
        }
        let k = self.edges.partition_point(|&e| e <= v);
        Some(k.saturating_sub(1).min(self.len() - 1))
    }
}

/// Shape of the mass inside one bin.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum BinShape {
    /// All of the bin's number sits at its pivot.
    Point,
    /// Number spread uniformly over the bin.
    Uniform,
}

/// Nonnegative binned measure on a [`Grid`], plus the mass already removed
/// past the truncation volume.
#[derive(Debug, Clone, PartialEq)]
pub struct SizeDistribution {
    grid: Grid,
    counts: Vec<f64>,
    shapes: Vec<BinShape>,
    pub gel_mass: f64,
}

/// Two disjoint balls `B(x1, η0)`, `B(x2, η0)` of positive mass, `x1 < x2`,
/// separated by at least `η0`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SeparatedPair {
    pub x1: f64,
    pub x2: f64,
    pub eta0: f64,
    /// Dyadic depth at which the pair was found.
    pub depth: u32,
    /// Dyadic cell indices of `x1` and `x2` at that depth.
    pub cells: (u64, u64),
    /// Horizon `L` of the dyadic subdivision of `(0, L]`.
    pub horizon: f64,
}

/// Outcome of the dyadic separated-mass search.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum MassPairSearch {
    Pair(SeparatedPair),
    /// All mass concentrates at a single point.
    SingleAtom(f64),
}

/// Smooth cutoff `χ_R`: 1 on `(0, R]`, 0 above `R + 1`, linear in between.
pub fn chi(r: f64, v: f64) -> f64 {
    if v <= r {
        1.0
    } else if v > r + 1.0 {
        0.0
    } else {
        r + 1.0 - v
    }
}

impl SizeDistribution {
    pub fn empty(grid: Grid) -> Self {
        let n = grid.len();
        SizeDistribution { grid, counts: vec![0.0; n], shapes: vec![BinShape::Uniform; n], gel_mass: 0.0 }
    }

    /// Distribution with the given per-bin numbers, spread uniformly in each bin.
    pub fn from_counts(grid: Grid, counts: Vec<f64>) -> Result<Self, MeasureError> {
        if counts.len() != grid.len() {
            return Err(MeasureError::Domain("one count per bin required".into()));
        }
        if counts.iter().any(|c| !(c.is_finite() && *c >= 0.0)) {
            return Err(MeasureError::Domain("counts must be finite and nonnegative".into()));
        }
        let n = grid.len();
        Ok(SizeDistribution { grid, counts, shapes: vec![BinShape::Uniform; n], gel_mass: 0.0 })
    }

    /// Bins a density given through its cumulative number `cdf(v) = ∫_0^v f`.
    pub fn from_cdf(grid: Grid, cdf: impl Fn(f64) -> f64) -> Result<Self, MeasureError> {
        let counts = (0..grid.len()).map(|i| (cdf(grid.upper(i)) - cdf(grid.lower(i))).max(0.0)).collect();
        Self::from_counts(grid, counts)
    }

    /// Exponential density `(total / mean) e^{-v / mean}`, binned exactly.
    pub fn exponential(grid: Grid, mean: f64, total: f64) -> Result<Self, MeasureError> {
        if !(mean > 0.0 && total >= 0.0) {
            return Err(MeasureError::Domain("exponential needs mean > 0 and total >= 0".into()));
        }
        Self::from_cdf(grid, |v| -total * (-v / mean).exp_m1())
    }

    /// Uniform density carrying `total` particles on `[lo, hi]`.
    pub fn uniform(grid: Grid, lo: f64, hi: f64, total: f64) -> Result<Self, MeasureError> {
        if !(lo >= 0.0 && hi > lo && total >= 0.0) {
            return Err(MeasureError::Domain("uniform needs 0 <= lo < hi and total >= 0".into()));
        }
        Self::from_cdf(grid, |v| total * ((v.clamp(lo, hi) - lo) / (hi - lo)))
    }

    /// Point masses `(volume, number)`. Each atom goes entirely to the bin that
    /// contains it; a bin holding atoms has its pivot moved to their
    /// number-weighted mean position, so a lone atom sits exactly at its volume.
    pub fn from_atoms(grid: Grid, atoms: &[(f64, f64)]) -> Result<Self, MeasureError> {
        let mut dist = Self::empty(grid);
        let n = dist.grid.len();
        let mut number = vec![0.0; n];
        let mut first_moment = vec![0.0; n];
        let mut hits = vec![0usize; n];
        for &(v, w) in atoms {
            if !(w.is_finite() && w >= 0.0) {
                return Err(MeasureError::Domain(format!("atom weight must be nonnegative, got {w}")));
            }
            let i = dist.grid.bin_of(v).ok_or_else(|| {
                MeasureError::Domain(format!("atom at {v} outside grid [{}, {}]", dist.grid.v_min(), dist.grid.v_max()))
            })?;
            number[i] += w;
            first_moment[i] += w * v;
            hits[i] += 1;
            if hits[i] == 1 {
                dist.grid.pivots[i] = v;
            }
        }
        for i in 0..n {
            if hits[i] == 0 {
                continue;
            }
            if hits[i] > 1 && number[i] > 0.0 {
                dist.grid.pivots[i] = (first_moment[i] / number[i]).clamp(dist.grid.lower(i), dist.grid.upper(i));
            }
            dist.counts[i] = number[i];
            dist.shapes[i] = BinShape::Point;
        }
        if dist.grid.pivots.windows(2).any(|w| !(w[1] > w[0])) {
            return Err(MeasureError::Domain("relocated pivots collide; refine the grid".into()));
        }
        Ok(dist)
    }

    pub fn grid(&self) -> &Grid {
        &self.grid
    }

    pub fn counts(&self) -> &[f64] {
        &self.counts
    }

    pub fn shapes(&self) -> &[BinShape] {
        &self.shapes
    }

    /// Replaces the per-bin numbers, keeping grid and shapes.
    pub fn with_counts(&self, counts: Vec<f64>, gel_mass: f64) -> Self {
        debug_assert_eq!(counts.len(), self.counts.len());
        SizeDistribution { grid: self.grid.clone(), counts, shapes: self.shapes.clone(), gel_mass }
    }

    /// Scales every bin whose pivot is at least `threshold` by `factor`.
    pub fn scale_tail(&self, threshold: f64, factor: f64) -> Self {
        let counts = self
            .counts
            .iter()
            .zip(&self.grid.pivots)
            .map(|(&c, &p)| if p >= threshold { c * factor } else { c })
            .collect();
        self.with_counts(counts, self.gel_mass)
    }

    pub fn total_number(&self) -> f64 {
        self.counts.iter().sum()
    }

    /// `Σ_i p_i^m N_i`. `m = 1` is the in-domain mass.
    pub fn moment(&self, m: f64) -> Result<f64, MeasureError> {
        if !(m >= 0.0 && m.is_finite()) {
            return Err(MeasureError::Domain(format!("moment order must be finite and >= 0, got {m}")));
        }
        Ok(if m == 0.0 {
            self.total_number()
        } else if m == 1.0 {
            self.mass()
        } else {
            self.counts.iter().zip(&self.grid.pivots).map(|(&c, &p)| p.powf(m) * c).sum()
        })
    }

    /// In-domain first moment `Σ p_i N_i`.
    pub fn mass(&self) -> f64 {
        self.counts.iter().zip(&self.grid.pivots).map(|(&c, &p)| p * c).sum()
    }

    /// Shifted tail moment `Σ_{p_i >= R} (p_i - R)^m N_i`.
    pub fn truncated_moment(&self, r: f64, m: f64) -> f64 {
        self.counts.iter().zip(&self.grid.pivots).filter(|&(_, &p)| p >= r).map(|(&c, &p)| (p - r).powf(m) * c).sum()
    }

    /// Number of particles with pivot at or above `v`.
    pub fn tail_number(&self, v: f64) -> f64 {
        self.counts.iter().zip(&self.grid.pivots).filter(|&(_, &p)| p >= v).map(|(&c, _)| c).sum()
    }

    /// `(I_R, J_R)`: mass above and below the cutoff `χ_R`.
    ///
    /// `I_R + J_R` reproduces [`SizeDistribution::mass`] bit for bit. The
    /// part that is at least half the total is taken as a complement, so by
    /// Sterbenz's lemma every subtraction below is exact.
    pub fn cutoff_pair(&self, r: f64) -> (f64, f64) {
        let total = self.mass();
        let j: f64 = self.counts.iter().zip(&self.grid.pivots).map(|(&c, &p)| p * chi(r, p) * c).sum();
        let j = j.clamp(0.0, total);
        if j >= 0.5 * total {
            (total - j, j)
        } else {
            let i = total - j;
            (i, total - i)
        }
    }

    /// Number of particles in the closed ball `[center - radius, center + radius]`
    /// intersected with `(0, ∞)`. Spread bins contribute in proportion to
    /// their overlap with the ball.
    pub fn ball_mass(&self, center: f64, radius: f64) -> Result<f64, MeasureError> {
        if !(radius > 0.0) {
            return Err(MeasureError::Domain(format!("ball radius must be positive, got {radius}")));
        }
        let lo = (center - radius).max(0.0);
        let hi = center + radius;
        Ok(self.interval_number(lo, hi, true))
    }

    /// Number in `[lo, hi]` (closed) or `(lo, hi]` (half-open).
    fn interval_number(&self, lo: f64, hi: f64, closed: bool) -> f64 {
        let mut total = 0.0;
        for i in 0..self.grid.len() {
            let c = self.counts[i];
            if c == 0.0 {
                continue;
            }
            match self.shapes[i] {
                BinShape::Point => {
                    let p = self.grid.pivots[i];
                    let inside = if closed { p >= lo && p <= hi } else { p > lo && p <= hi };
                    if inside {
                        total += c;
                    }
                }
                BinShape::Uniform => {
                    let overlap = hi.min(self.grid.upper(i)) - lo.max(self.grid.lower(i));
                    if overlap > 0.0 {
                        total += c * (overlap / self.grid.width(i)).min(1.0);
                    }
                }
            }
        }
        total
    }

    /// Occupied pieces of the support as `(lo, hi, number)`; `lo == hi` for
    /// point bins.
    fn support_pieces(&self) -> impl Iterator<Item = (f64, f64)> + '_ {
        (0..self.grid.len()).filter(|&i| self.counts[i] > 0.0).map(|i| match self.shapes[i] {
            BinShape::Point => (self.grid.pivots[i], self.grid.pivots[i]),
            BinShape::Uniform => (self.grid.lower(i), self.grid.upper(i)),
        })
    }

    /// Dyadic search for two separated regions of positive mass.
    ///
    /// `(0, L]` is split into `2^n` cells for `n = 1, 2, …, n_max`. At the
    /// first depth where the lowest and highest occupied cells are at least
    /// two indices apart, the pair is returned with `x1`, `x2` support points
    /// inside those cells and `η0` a quarter of the cell width (half the
    /// width one level deeper), capped below 1. If a single cell stays
    /// occupied down to `n_max`, the horizon is extended once to cover the
    /// whole support; a lone atom there is reported as
    /// [`MassPairSearch::SingleAtom`].
    pub fn find_separated_mass_pair(&self, horizon: f64, n_max: u32) -> Result<MassPairSearch, MeasureError> {
        if !(horizon > 0.0 && horizon.is_finite()) {
            return Err(MeasureError::Domain(format!("horizon must be positive, got {horizon}")));
        }
        if n_max == 0 || n_max > 60 {
            return Err(MeasureError::Domain("n_max must be in 1..=60".into()));
        }
        let top = self.support_pieces().map(|(_, hi)| hi).fold(0.0, f64::max);
        if top == 0.0 {
            return Err(MeasureError::EmptyMeasure);
        }
        let mut horizon = horizon;
        if self.interval_number(0.0, horizon, false) <= 0.0 {
            horizon = top.ceil();
        }
        let first = self.dyadic_search(horizon, n_max)?;
        match first {
            MassPairSearch::SingleAtom(_) if top > horizon => {
                // mass beyond the horizon: one extension to cover the support
                self.dyadic_search(top.ceil().max(horizon + 1.0), n_max)
            }
            other => Ok(other),
        }
    }

    fn dyadic_search(&self, horizon: f64, n_max: u32) -> Result<MassPairSearch, MeasureError> {
        let pieces: Vec<(f64, f64)> = self
            .support_pieces()
            .filter(|&(lo, hi)| if lo == hi { lo > 0.0 && lo <= horizon } else { lo < horizon })
            .map(|(lo, hi)| (lo, hi.min(horizon)))
            .collect();
        if pieces.is_empty() {
            return Err(MeasureError::EmptyMeasure);
        }
        let mut last_adjacent = false;
        for depth in 1..=n_max {
            let cells = 1u64 << depth;
            let width = horizon / cells as f64;
            let cell_of_point = |v: f64| (((v / width).ceil() as u64).max(1) - 1).min(cells - 1);
            let mut lowest: Option<(u64, f64)> = None;
            let mut highest: Option<(u64, f64)> = None;
            for &(lo, hi) in &pieces {
                let (first, last) = if lo == hi {
                    let c = cell_of_point(lo);
                    (c, c)
                } else {
                    let first = ((lo / width).floor() as u64).min(cells - 1);
                    let last = (((hi / width).ceil() as u64).max(1) - 1).min(cells - 1);
                    (first, last.max(first))
                };
                if lowest.is_none_or(|(c, _)| first < c) {
                    let x = support_point(lo, hi, first, width);
                    lowest = Some((first, x));
                }
                if highest.is_none_or(|(c, _)| last > c) {
                    let x = support_point(lo, hi, last, width);
                    highest = Some((last, x));
                }
            }
            let (l1, x1) = lowest.unwrap();
            let (l2, x2) = highest.unwrap();
            if l2 >= l1 + 2 {
                let eta0 = (width / 4.0).min(0.5);
                return Ok(MassPairSearch::Pair(SeparatedPair { x1, x2, eta0, depth, cells: (l1, l2), horizon }));
            }
            last_adjacent = l2 == l1 + 1;
        }
        if last_adjacent {
            return Err(MeasureError::Unresolved { depth: n_max });
        }
        let number: f64 = self.interval_number(0.0, horizon, false);
        let first: f64 = pieces.iter().map(|&(lo, hi)| 0.5 * (lo + hi)).sum::<f64>() / pieces.len() as f64;
        let x0 = if number > 0.0 && pieces.len() == 1 { pieces[0].0 } else { first };
        Ok(MassPairSearch::SingleAtom(x0))
    }

    /// `(lhs, rhs, holds)` for `M_{R,m}^{1/m} >= R (∫_{[2R, ∞)} f)^{1/m}`.
    pub fn moment_root_inequality_check(&self, r: f64, m: f64) -> (f64, f64, bool) {
        let lhs = self.truncated_moment(r, m).powf(1.0 / m);
        let rhs = r * self.tail_number(2.0 * r).powf(1.0 / m);
        (lhs, rhs, lhs >= rhs - 1e-12 * rhs)
    }

    /// CSV with a `# gel_mass=` comment line and columns
    /// `bin_lower,bin_upper,pivot,count`.
    pub fn to_csv(&self) -> String {
        let mut out = String::new();
        let _ = writeln!(out, "# gel_mass={}", self.gel_mass);
        out.push_str("bin_lower,bin_upper,pivot,count\n");
        for i in 0..self.grid.len() {
            let _ = writeln!(
                out,
                "{},{},{},{}",
                self.grid.lower(i),
                self.grid.upper(i),
                self.grid.pivots[i],
                self.counts[i]
            );
        }
        out
    }

    /// Parses [`SizeDistribution::to_csv`] output. Bin shapes are not part of
    /// the format; parsed bins are spread uniformly.
    pub fn from_csv(text: &str) -> Result<Self, MeasureError> {
        let mut gel_mass = 0.0;
        let mut edges = Vec::new();
        let mut pivots = Vec::new();
        let mut counts = Vec::new();
        let mut seen_header = false;
        for (idx, line) in text.lines().enumerate() {
            let lineno = idx + 1;
            let err = |reason: &str| MeasureError::Parse { line: lineno, reason: reason.to_string() };
            let line = line.trim();
            if line.is_empty() {
                continue;
            }
            if let Some(rest) = line.strip_prefix('#') {
                if let Some(v) = rest.trim().strip_prefix("gel_mass=") {
                    gel_mass = v.trim().parse().map_err(|_| err("bad gel_mass"))?;
                }
                continue;
            }
            if !seen_header {
                if line != "bin_lower,bin_upper,pivot,count" {
                    return Err(err("unexpected header"));
                }
                seen_header = true;
                continue;
            }
            let fields: Vec<f64> = line
                .split(',')
                .map(|f| f.trim().parse::<f64>())
                .collect::<Result<_, _>>()
                .map_err(|_| err("malformed number"))?;
            if fields.len() != 4 {
                return Err(err("expected 4 columns"));
            }
            if let Some(&last) = edges.last() {
                if fields[0] != last {
                    return Err(err("bins are not contiguous"));
                }
            } else {
                edges.push(fields[0]);
            }
            edges.push(fields[1]);
            pivots.push(fields[2]);
            counts.push(fields[3]);
        }
        let grid = Grid::from_parts(edges, pivots)?;
        let mut dist = Self::from_counts(grid, counts)?;
        dist.gel_mass = gel_mass;
        Ok(dist)
    }
}

/// A point of the support piece `[lo, hi]` inside dyadic cell `cell`.
fn support_point(lo: f64, hi: f64, cell: u64, width: f64) -> f64 {
    if lo == hi {
        return lo;
    }
    let a = lo.max(cell as f64 * width);
    let b = hi.min((cell + 1) as f64 * width);
    0.5 * (a + b)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn grid() -> Grid {
        Grid::geometric(0.01, 100.0, 8).unwrap()
    }

    fn atoms(a: &[(f64, f64)]) -> SizeDistribution {
        SizeDistribution::from_atoms(grid(), a).unwrap()
    }

    #[test]
    fn geometric_grid_examples() {
        let g = Grid::geometric(1.0, 10.0, 1).unwrap();
        assert_eq!(g.edges(), &[1.0, 10.0]);
        let g = Grid::geometric(1.0, 100.0, 1).unwrap();
        assert_eq!(g.len(), 2);
        assert!((g.edges()[1] - 10.0).abs() < 1e-12);
        assert_eq!(g.edges()[2], 100.0);
        let g = Grid::geometric(0.1, 10.0, 4).unwrap();
        assert_eq!(g.len(), 8);
        let r = 10f64.powf(0.25);
        for w in g.edges().windows(2) {
            assert!((w[1] / w[0] - r).abs() < 1e-12);
        }
        for i in 0..g.len() {
            assert!(g.pivots()[i] > g.lower(i) && g.pivots()[i] < g.upper(i));
        }
        assert!(Grid::geometric(0.0, 1.0, 4).is_err());
        assert!(Grid::geometric(2.0, 1.0, 4).is_err());
    }

    #[test]
    fn moments_of_atoms() {
        let d = atoms(&[(2.0, 3.0)]);
        assert_eq!(d.moment(1.0).unwrap(), 6.0);
        assert_eq!(d.moment(0.0).unwrap(), 3.0);
        assert!(d.moment(-1.0).is_err());
        let e = SizeDistribution::empty(grid());
        assert_eq!(e.moment(3.5).unwrap(), 0.0);
    }

    #[test]
    fn exponential_second_moment() {
        // ∫ v² e^{-v} dv = 2, checked by composite Simpson on [0, 60]
        let n = 60_000;
        let h = 60.0 / n as f64;
        let f = |v: f64| v * v * (-v).exp();
        let simpson: f64 = (0..=n)
            .map(|i| {
                let w = if i == 0 || i == n {
                    1.0
                } else if i % 2 == 1 {
                    4.0
                } else {
                    2.0
                };
                w * f(i as f64 * h)
            })
            .sum::<f64>()
            * h
            / 3.0;
        assert!((simpson - 2.0).abs() < 1e-10);
        let d = SizeDistribution::exponential(Grid::geometric(1e-4, 100.0, 64).unwrap(), 1.0, 1.0).unwrap();
        let m2 = d.moment(2.0).unwrap();
        assert!((m2 - simpson).abs() / simpson < 2e-3, "m2 = {m2}");
    }

    #[test]
    fn truncated_moment_examples() {
        let r = 2.0;
        let d = atoms(&[(3.0 * r, 1.0)]);
        assert!((d.truncated_moment(r, 3.0) - (2.0 * r).powi(3)).abs() < 1e-12);
        assert_eq!(atoms(&[(1.0, 1.0)]).truncated_moment(r, 2.0), 0.0);
        let d = atoms(&[(r + 1.0, 1.0), (r + 2.0, 1.0)]);
        assert_eq!(d.truncated_moment(r, 2.0), 5.0);
    }

    #[test]
    fn cutoff_pair_examples() {
        let r = 4.0;
        assert_eq!(atoms(&[(r / 2.0, 1.0)]).cutoff_pair(r), (0.0, r / 2.0));
        assert_eq!(atoms(&[(r + 2.0, 1.0)]).cutoff_pair(r), (r + 2.0, 0.0));
        let (i, j) = atoms(&[(r + 0.5, 1.0)]).cutoff_pair(r);
        assert_eq!(i, (r + 0.5) / 2.0);
        assert_eq!(j, (r + 0.5) / 2.0);
    }

    #[test]
    fn ball_mass_examples() {
        let d = atoms(&[(3.5, 2.0)]);
        assert_eq!(d.ball_mass(3.5, 0.1).unwrap(), 2.0);
        assert_eq!(d.ball_mass(5.0, 0.1).unwrap(), 0.0);
        let g = Grid::from_parts(vec![0.5, 1.0, 2.0, 4.0], vec![0.7, 1.5, 3.0]).unwrap();
        let u = SizeDistribution::uniform(g, 1.0, 2.0, 1.0).unwrap();
        assert!((u.ball_mass(1.5, 0.25).unwrap() - 0.5).abs() < 1e-15);
        // ball reaching below zero is clamped
        assert_eq!(d.ball_mass(0.1, 10.0).unwrap(), 2.0);
        assert!(d.ball_mass(1.0, 0.0).is_err());
    }

    #[test]
    fn dyadic_search_single_atom() {
        let d = atoms(&[(1.0, 1.0)]);
        assert_eq!(d.find_separated_mass_pair(1.0, 20).unwrap(), MassPairSearch::SingleAtom(1.0));
        assert_eq!(d.find_separated_mass_pair(4.0, 20).unwrap(), MassPairSearch::SingleAtom(1.0));
    }

    #[test]
    fn dyadic_search_two_atoms() {
        let d = atoms(&[(1.0, 1.0), (2.5, 1.0)]);
        let MassPairSearch::Pair(p) = d.find_separated_mass_pair(4.0, 20).unwrap() else { panic!() };
        assert_eq!((p.x1, p.x2), (1.0, 2.5));
        assert_eq!(p.depth, 2);
        assert_eq!(p.eta0, 0.25);
        assert!(p.x2 - p.x1 - 2.0 * p.eta0 >= p.eta0);
        assert!(d.ball_mass(p.x1, p.eta0).unwrap() > 0.0);
        assert!(d.ball_mass(p.x2, p.eta0).unwrap() > 0.0);
    }

    #[test]
    fn dyadic_search_uniform_block() {
        let g = Grid::from_parts(vec![0.5, 1.0, 2.0, 4.0], vec![0.7, 1.5, 3.0]).unwrap();
        let u = SizeDistribution::uniform(g, 1.0, 2.0, 1.0).unwrap();
        let MassPairSearch::Pair(p) = u.find_separated_mass_pair(2.0, 20).unwrap() else { panic!() };
        assert_eq!(p.depth, 3);
        assert_eq!(p.cells, (4, 7));
        assert_eq!((p.x1, p.x2), (1.125, 1.875));
        assert!(u.ball_mass(p.x1, p.eta0).unwrap() > 0.0);
    }

    #[test]
    fn dyadic_search_extends_horizon() {
        let d = atoms(&[(1.0, 1.0), (7.0, 2.0)]);
        let MassPairSearch::Pair(p) = d.find_separated_mass_pair(2.0, 20).unwrap() else { panic!() };
        assert_eq!((p.x1, p.x2), (1.0, 7.0));
        assert!(p.horizon >= 7.0);
    }

    #[test]
    fn dyadic_search_empty_measure() {
        let e = SizeDistribution::empty(grid());
        assert_eq!(e.find_separated_mass_pair(4.0, 10), Err(MeasureError::EmptyMeasure));
    }

    #[test]
    fn moment_root_examples() {
        let r = 1.5;
        let (l, rr, ok) = atoms(&[(2.0 * r, 1.0)]).moment_root_inequality_check(r, 3.0);
        assert!((l - r).abs() < 1e-12 && (rr - r).abs() < 1e-12 && ok);
        let (l, rr, ok) = atoms(&[(3.0 * r, 1.0)]).moment_root_inequality_check(r, 2.0);
        assert!((l - 2.0 * r).abs() < 1e-12 && (rr - r).abs() < 1e-12 && ok);
    }

    #[test]
    fn csv_round_trip() {
        let mut d = SizeDistribution::exponential(grid(), 1.0, 1.0).unwrap();
        d.gel_mass = 0.125;
        let parsed = SizeDistribution::from_csv(&d.to_csv()).unwrap();
        assert_eq!(parsed.counts(), d.counts());
        assert_eq!(parsed.grid(), d.grid());
        assert_eq!(parsed.gel_mass, 0.125);
        assert!(matches!(
            SizeDistribution::from_csv("bin_lower,bin_upper,pivot,count\n1,2,x,3\n"),
            Err(MeasureError::Parse { line: 2, .. })
        ));
    }
}
