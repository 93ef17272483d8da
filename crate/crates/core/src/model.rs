//! Physical parameterization of the driven exciton array: the Rydberg level
//! ladder, the drive schedule, site geometry and van der Waals tables.
//!
//! Units: time in ns, angular frequencies in rad/ns, lengths in μm and
//! interaction coefficients in rad/ns·μm⁶.

use std::f64::consts::PI;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

pub const TWO_PI: f64 = 2.0 * PI;

/// Constant Rabi frequency of the target transition, 2π·1.404 GHz.
pub const DEFAULT_OMEGA: f64 = TWO_PI * 1.404;
/// Gap from n = 25 to n = 26, 2π·2.81 GHz.
pub const DEFAULT_GAP_UP: f64 = TWO_PI * 2.81;
/// Gap from n = 24 to n = 25, 2π·3.18 GHz.
pub const DEFAULT_GAP_DOWN: f64 = TWO_PI * 3.18;
pub const DEFAULT_LINEWIDTH: f64 = TWO_PI * 0.102;
pub const DEFAULT_DURATION: f64 = 0.24;
/// Default magnitude of the detuning clamps.
pub const DEFAULT_CLAMP: f64 = TWO_PI * 1.4;
/// Nearest-neighbour spacing in units of the blockade radius.
pub const DEFAULT_SPACING_FACTOR: f64 = 0.958;
pub const DEFAULT_SPACING_UM: f64 = 2.72;
pub const DEFAULT_N_VALUES: [u32; 3] = [24, 25, 26];
pub const DEFAULT_TARGET_N: u32 = 25;

/// Two-photon Rabi frequency through a detuned intermediate state.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct EffectiveRabi {
    pub omega: f64,
    /// Set when `|δ| < 10·max(Ω₁, Ω₂)`, outside the adiabatic-elimination regime.
    pub regime_warning: bool,
}

pub fn effective_rabi(omega1: f64, omega2: f64, delta_intermediate: f64) -> Result<EffectiveRabi> {
    if delta_intermediate == 0.0 {
        return Err(Error::ZeroDetuning);
    }
    let omega = omega1 * omega2 / delta_intermediate;
    let regime_warning = delta_intermediate.abs() < 10.0 * omega1.abs().max(omega2.abs());
    if regime_warning {
        log::warn!(
            "intermediate detuning {delta_intermediate} is not >> max(Ω₁, Ω₂) = {}",
            omega1.abs().max(omega2.abs())
        );
    }
    Ok(EffectiveRabi { omega, regime_warning })
}

fn gap_above(ry: f64, defect: f64, n: f64) -> f64 {
    ry * ((n - defect).powi(-2) - (n + 1.0 - defect).powi(-2))
}

fn gap_below(ry: f64, defect: f64, n: f64) -> f64 {
    ry * ((n - 1.0 - defect).powi(-2) - (n - defect).powi(-2))
}

/// Hydrogenic level gaps `(up, down)` around `n_target` for given `(Ry, δ_p)`.
pub fn level_gaps(rydberg_constant: f64, quantum_defect: f64, n_target: u32) -> (f64, f64) {
    let n = n_target as f64;
    (gap_above(rydberg_constant, quantum_defect, n), gap_below(rydberg_constant, quantum_defect, n))
}

/// Solves for `(Ry, δ_p)` reproducing the two gaps adjacent to `n_target`.
///
/// `Ry` cancels from the gap ratio, leaving a one-dimensional bracketed
/// root in `δ_p ∈ [0, 1)`; `Ry` follows from the upper gap.
pub fn fit_level_structure(gap_up: f64, gap_down: f64, n_target: u32) -> Result<(f64, f64)> {
    if !(gap_up > 0.0) || !(gap_down > 0.0) {
        return Err(Error::NonPositiveInput("level gaps"));
    }
    if n_target < 3 {
        return Err(Error::InvalidLevels(format!("target n = {n_target} must be >= 3")));
    }
    let n = n_target as f64;
    let observed = gap_down / gap_up;
    let ratio = |d: f64| gap_below(1.0, d, n) / gap_above(1.0, d, n) - observed;

    let tol = 1e-9 * gap_up;
    let finish = |d: f64| -> Result<(f64, f64)> {
        let ry = gap_up / gap_above(1.0, d, n);
        let residual = (gap_below(ry, d, n) - gap_down).abs().max((gap_above(ry, d, n) - gap_up).abs());
        if residual < tol {
            Ok((ry, d))
        } else {
            Err(Error::NoConvergence(format!("residual {residual:.3e} at δ_p = {d}")))
        }
    };

    let (mut lo, mut hi) = (0.0_f64, 1.0 - 1e-12);
    let (f_lo, f_hi) = (ratio(lo), ratio(hi));
    if f_lo.abs() <= 1e-14 {
        return finish(lo);
    }
    if f_lo.signum() == f_hi.signum() {
        return Err(Error::NoConvergence(format!(
            "gap ratio {observed} not bracketed by δ_p in [0, 1)"
        )));
    }
    for _ in 0..200 {
        let mid = 0.5 * (lo + hi);
        let f_mid = ratio(mid);
        if f_mid == 0.0 {
            return finish(mid);
        }
        if f_mid.signum() == f_lo.signum() {
            lo = mid;
        } else {
            hi = mid;
        }
        if hi - lo < 1e-16 {
            break;
        }
    }
    finish(0.5 * (lo + hi))
}

/// The Rydberg ladder driven at each site.
///
/// Level codes in the basis are `index + 1`, so with the default
/// `n_values = [24, 25, 26]` the target n = 25 is code 2.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LevelSet {
    n_values: Vec<u32>,
    target_index: usize,
    rydberg_constant: f64,
    quantum_defect: f64,
    mu_ratio: Vec<f64>,
    c6: Vec<f64>,
    linewidth: f64,
}

impl LevelSet {
    pub fn new(
        n_values: Vec<u32>,
        target_index: usize,
        rydberg_constant: f64,
        quantum_defect: f64,
        mu_ratio: Vec<f64>,
        c6: Vec<f64>,
        linewidth: f64,
    ) -> Result<Self> {
        if n_values.is_empty() {
            return Err(Error::InvalidLevels("no Rydberg levels".into()));
        }
        if n_values.len() > 35 {
            return Err(Error::InvalidLevels("at most 35 Rydberg levels are supported".into()));
        }
        if n_values.windows(2).any(|w| w[0] >= w[1]) {
            return Err(Error::InvalidLevels("n values must be strictly increasing".into()));
        }
        if target_index >= n_values.len() {
            return Err(Error::InvalidLevels("target level not in n values".into()));
        }
        if mu_ratio.len() != n_values.len() || c6.len() != n_values.len() {
            return Err(Error::InvalidLevels("mu_ratio and C arrays must match n values".into()));
        }
        if (mu_ratio[target_index] - 1.0).abs() > 1e-12 {
            return Err(Error::InvalidLevels("mu_ratio at the target level must be 1".into()));
        }
        if mu_ratio.iter().any(|&m| !(m > 0.0) || !m.is_finite()) {
            return Err(Error::InvalidLevels("mu_ratio entries must be positive".into()));
        }
        if c6.iter().any(|&c| !(c > 0.0) || !c.is_finite()) {
            return Err(Error::InvalidLevels("all C_k must be positive".into()));
        }
        if n_values.len() > 1 && quantum_defect >= n_values[0] as f64 {
            return Err(Error::InvalidLevels("quantum defect exceeds the lowest n".into()));
        }
        Ok(LevelSet { n_values, target_index, rydberg_constant, quantum_defect, mu_ratio, c6, linewidth })
    }

    /// Ladder with μ_k ∝ k⁻³ and C_k ∝ k¹¹ scaled from the target values.
    pub fn with_default_scalings(
        n_values: Vec<u32>,
        target_n: u32,
        rydberg_constant: f64,
        quantum_defect: f64,
        c6_target: f64,
        linewidth: f64,
    ) -> Result<Self> {
        let target_index = n_values
            .iter()
            .position(|&n| n == target_n)
            .ok_or(Error::UnknownLevel(target_n))?;
        let kt = target_n as f64;
        let mu_ratio = n_values.iter().map(|&k| (kt / k as f64).powi(3)).collect();
        let c6 = n_values.iter().map(|&k| c6_target * (k as f64 / kt).powi(11)).collect();
        LevelSet::new(n_values, target_index, rydberg_constant, quantum_defect, mu_ratio, c6, linewidth)
    }

    /// n = 24, 25, 26 with gaps fitted to 2π·3.18 / 2π·2.81 GHz and C₂₅ set so
    /// that 2.72 μm is 0.958 blockade radii at `omega`.
    pub fn cu2o_default(omega: f64) -> Result<Self> {
        let (ry, defect) = fit_level_structure(DEFAULT_GAP_UP, DEFAULT_GAP_DOWN, DEFAULT_TARGET_N)?;
        let c6 = c6_for_spacing(omega, DEFAULT_SPACING_UM, DEFAULT_SPACING_FACTOR);
        LevelSet::with_default_scalings(DEFAULT_N_VALUES.to_vec(), DEFAULT_TARGET_N, ry, defect, c6, DEFAULT_LINEWIDTH)
    }

    /// A single Rydberg level with the given C₆ (two-level sites).
    pub fn single(n: u32, c6: f64) -> Result<Self> {
        LevelSet::new(vec![n], 0, 0.0, 0.0, vec![1.0], vec![c6], 0.0)
    }

    pub fn len(&self) -> usize {
        self.n_values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.n_values.is_empty()
    }

    pub fn n_values(&self) -> &[u32] {
        &self.n_values
    }

    pub fn target_index(&self) -> usize {
        self.target_index
    }

    pub fn target_n(&self) -> u32 {
        self.n_values[self.target_index]
    }

    /// Basis level code of the target level.
    pub fn target_code(&self) -> u8 {
        (self.target_index + 1) as u8
    }

    pub fn rydberg_constant(&self) -> f64 {
        self.rydberg_constant
    }

    pub fn quantum_defect(&self) -> f64 {
        self.quantum_defect
    }

    pub fn mu_ratio(&self) -> &[f64] {
        &self.mu_ratio
    }

    pub fn c6(&self) -> &[f64] {
        &self.c6
    }

    pub fn linewidth(&self) -> f64 {
        self.linewidth
    }

    pub fn index_of(&self, n: u32) -> Result<usize> {
        self.n_values.iter().position(|&k| k == n).ok_or(Error::UnknownLevel(n))
    }

    /// Offset `Δ_k − Δ_k'` for the level at `index`.
    pub fn detuning_offset(&self, index: usize) -> f64 {
        if index == self.target_index {
            return 0.0;
        }
        let ry = self.rydberg_constant;
        let d = self.quantum_defect;
        let kt = self.n_values[self.target_index] as f64;
        let k = self.n_values[index] as f64;
        ry / (kt - d).powi(2) - ry / (k - d).powi(2)
    }

    /// Per-code detunings with `[0] = 0` for the ground state.
    pub fn detunings_by_code(&self, delta_target: f64) -> Vec<f64> {
        std::iter::once(0.0)
            .chain((0..self.len()).map(|i| delta_target + self.detuning_offset(i)))
            .collect()
    }

    /// Per-code Rabi frequencies with `[0] = 0`.
    pub fn rabi_by_code(&self, omega_target: f64) -> Vec<f64> {
        std::iter::once(0.0)
            .chain(self.mu_ratio.iter().map(|m| omega_target * m.sqrt()))
            .collect()
    }
}

/// `Δ_k = Δ_k' + Ry/(k' − δ_p)² − Ry/(k − δ_p)²` for principal number `k`.
pub fn detuning_ladder(levels: &LevelSet, delta_target: f64, k: u32) -> Result<f64> {
    let index = levels.index_of(k)?;
    Ok(delta_target + levels.detuning_offset(index))
}

/// `Ω_k = √(μ_k/μ_k') Ω_k'` for principal number `k`.
pub fn rabi_ladder(levels: &LevelSet, omega_target: f64, k: u32) -> Result<f64> {
    let index = levels.index_of(k)?;
    Ok(omega_target * levels.mu_ratio[index].sqrt())
}

pub fn blockade_radius(c6: f64, omega: f64) -> Result<f64> {
    if !(c6 > 0.0) {
        return Err(Error::NonPositiveInput("c6"));
    }
    if !(omega > 0.0) {
        return Err(Error::NonPositiveInput("omega"));
    }
    Ok((c6 / omega).powf(1.0 / 6.0))
}

/// C₆ placing `spacing_um` at `spacing_factor` blockade radii for `omega`.
pub fn c6_for_spacing(omega: f64, spacing_um: f64, spacing_factor: f64) -> f64 {
    omega * (spacing_um / spacing_factor).powi(6)
}

/// Constant Rabi drive with a clamped cubic detuning sweep on the target level.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct DriveSchedule {
    pub omega: f64,
    pub a: f64,
    pub b: f64,
    pub c: f64,
    pub delta_min: f64,
    pub delta_max: f64,
    pub duration: f64,
}

impl Default for DriveSchedule {
    fn default() -> Self {
        DriveSchedule {
            omega: DEFAULT_OMEGA,
            a: 0.0,
            b: 0.0,
            c: 0.0,
            delta_min: -DEFAULT_CLAMP,
            delta_max: DEFAULT_CLAMP,
            duration: DEFAULT_DURATION,
        }
    }
}

impl DriveSchedule {
    /// Resonant drive for `duration` with no sweep.
    pub fn resonant(omega: f64, duration: f64) -> Self {
        DriveSchedule { omega, duration, ..DriveSchedule::default() }
    }

    pub fn validate(&self) -> Result<()> {
        let all = [self.omega, self.a, self.b, self.c, self.delta_min, self.delta_max, self.duration];
        if all.iter().any(|v| !v.is_finite()) {
            return Err(Error::InvalidSchedule("non-finite parameter".into()));
        }
        if self.delta_min > self.delta_max {
            return Err(Error::InvalidSchedule("delta_min > delta_max".into()));
        }
        if !(self.duration > 0.0) {
            return Err(Error::InvalidSchedule("duration must be positive".into()));
        }
        if self.omega < 0.0 {
            return Err(Error::InvalidSchedule("omega must be non-negative".into()));
        }
        Ok(())
    }

    /// Target-level detuning `clamp(a t³ + b t + c)` at time `t`.
    pub fn detuning(&self, t: f64) -> Result<f64> {
        let slack = 1e-12 * self.duration.max(1.0);
        if !(t >= -slack && t <= self.duration + slack) {
            return Err(Error::TimeOutOfRange { t, duration: self.duration });
        }
        Ok(self.detuning_unchecked(t))
    }

    #[inline]
    pub(crate) fn detuning_unchecked(&self, t: f64) -> f64 {
        let raw = self.a * t * t * t + self.b * t + self.c;
        raw.max(self.delta_min).min(self.delta_max)
    }
}

pub fn detuning_profile(schedule: &DriveSchedule, t: f64) -> Result<f64> {
    schedule.detuning(t)
}

/// Site positions (μm) and their pairwise distances.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Geometry {
    positions: Vec<[f64; 2]>,
    distance: Vec<Vec<f64>>,
}

impl Geometry {
    pub fn from_positions(positions: Vec<[f64; 2]>) -> Result<Self> {
        if positions.is_empty() {
            return Err(Error::InvalidGeometry("no sites".into()));
        }
        if positions.iter().flatten().any(|v| !v.is_finite()) {
            return Err(Error::InvalidGeometry("non-finite coordinate".into()));
        }
        let n = positions.len();
        let mut distance = vec![vec![0.0; n]; n];
        for i in 0..n {
            for j in (i + 1)..n {
                let dx = positions[i][0] - positions[j][0];
                let dy = positions[i][1] - positions[j][1];
                let r = dx.hypot(dy);
                if !(r > 0.0) {
                    return Err(Error::InvalidGeometry(format!("sites {i} and {j} coincide")));
                }
                distance[i][j] = r;
                distance[j][i] = r;
            }
        }
        Ok(Geometry { positions, distance })
    }

    pub fn n_sites(&self) -> usize {
        self.positions.len()
    }

    pub fn positions(&self) -> &[[f64; 2]] {
        &self.positions
    }

    pub fn distance(&self, i: usize, j: usize) -> f64 {
        self.distance[i][j]
    }

    pub fn distances(&self) -> &[Vec<f64>] {
        &self.distance
    }

    /// Evenly spaced sites on a line.
    pub fn chain(n_sites: usize, spacing: f64) -> Result<Self> {
        Geometry::from_positions((0..n_sites).map(|i| [i as f64 * spacing, 0.0]).collect())
    }
}

/// Regular n-gon whose nearest-neighbour chord equals `spacing`.
pub fn polygon_geometry(n_sites: usize, spacing: f64) -> Result<Geometry> {
    if n_sites < 3 {
        return Err(Error::TooFewSites(n_sites));
    }
    if !(spacing > 0.0) {
        return Err(Error::NonPositiveInput("spacing"));
    }
    let radius = spacing / (2.0 * (PI / n_sites as f64).sin());
    let positions = (0..n_sites)
        .map(|i| {
            let phi = 2.0 * PI * i as f64 / n_sites as f64;
            [radius * phi.cos(), radius * phi.sin()]
        })
        .collect();
    Geometry::from_positions(positions)
}

/// `V[level][i][j] = C_level / R_ij⁶`, zero on the diagonal.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct InteractionTable {
    values: Vec<Vec<Vec<f64>>>,
}

impl InteractionTable {
    pub fn n_levels(&self) -> usize {
        self.values.len()
    }

    pub fn n_sites(&self) -> usize {
        self.values.first().map_or(0, |v| v.len())
    }

    /// Interaction for the level at `index` (code `index + 1`).
    pub fn get(&self, index: usize, i: usize, j: usize) -> f64 {
        self.values[index][i][j]
    }

    pub fn level(&self, index: usize) -> &[Vec<f64>] {
        &self.values[index]
    }
}

pub fn interaction_table(geometry: &Geometry, levels: &LevelSet) -> InteractionTable {
    let n = geometry.n_sites();
    let values = levels
        .c6()
        .iter()
        .map(|&c| {
            let mut v = vec![vec![0.0; n]; n];
            for i in 0..n {
                for j in (i + 1)..n {
                    let value = c / geometry.distance(i, j).powi(6);
                    v[i][j] = value;
                    v[j][i] = value;
                }
            }
            v
        })
        .collect();
    InteractionTable { values }
}
