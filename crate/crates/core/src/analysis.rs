//! Closed-form estimates: exponential scaling fits, run budgets, decay loss
//! and photon-counting statistics for exciton readout.

use serde::Serialize;

use crate::error::{Error, Result};
use crate::observables::check_probability;

/// Bohr radius of the exciton in Cu₂O, in μm.
pub const EXCITON_BOHR_RADIUS_UM: f64 = 0.00111;

/// `P(n) = A·exp(−γ n)` fitted by least squares on `ln P`.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ScalingFit {
    pub amplitude: f64,
    pub rate: f64,
    /// Covariance of `(ln A, γ)`.
    pub covariance: [[f64; 2]; 2],
    pub points: Vec<(f64, f64)>,
    /// `ln P_observed − ln P_fit` per point.
    pub residuals: Vec<f64>,
}

impl ScalingFit {
    pub fn ln_amplitude(&self) -> f64 {
        self.amplitude.ln()
    }

    pub fn predict(&self, n: f64) -> f64 {
        (self.ln_amplitude() - self.rate * n).exp()
    }

    /// Coefficient of determination of the log-linear fit.
    pub fn r_squared(&self) -> f64 {
        let ys: Vec<f64> = self.points.iter().map(|p| p.1.ln()).collect();
        let mean = ys.iter().sum::<f64>() / ys.len() as f64;
        let total: f64 = ys.iter().map(|y| (y - mean).powi(2)).sum();
        let residual: f64 = self.residuals.iter().map(|r| r * r).sum();
        if total == 0.0 {
            1.0
        } else {
            1.0 - residual / total
        }
    }
}

pub fn fit_exponential_scaling(points: &[(f64, f64)]) -> Result<ScalingFit> {
    if points.len() < 2 {
        return Err(Error::DegenerateInput("need at least two points".into()));
    }
    if let Some(&(_, p)) = points.iter().find(|(_, p)| !(*p > 0.0) || !p.is_finite()) {
        return Err(Error::InvalidProbability { name: "P", value: p });
    }
    let m = points.len() as f64;
    let mean_x = points.iter().map(|p| p.0).sum::<f64>() / m;
    let mean_y = points.iter().map(|p| p.1.ln()).sum::<f64>() / m;
    let sxx: f64 = points.iter().map(|p| (p.0 - mean_x).powi(2)).sum();
    if sxx == 0.0 {
        return Err(Error::DegenerateInput("all n are equal".into()));
    }
    let sxy: f64 = points.iter().map(|p| (p.0 - mean_x) * (p.1.ln() - mean_y)).sum();
    let slope = sxy / sxx;
    let intercept = mean_y - slope * mean_x;
    let residuals: Vec<f64> = points.iter().map(|p| p.1.ln() - (intercept + slope * p.0)).collect();
    let dof = points.len().saturating_sub(2);
    let s2 = if dof == 0 { 0.0 } else { residuals.iter().map(|r| r * r).sum::<f64>() / dof as f64 };
    let var_slope = s2 / sxx;
    let var_intercept = s2 * (1.0 / m + mean_x * mean_x / sxx);
    let cov_intercept_slope = -s2 * mean_x / sxx;
    // γ = −slope flips the sign of the cross term
    let covariance = [[var_intercept, -cov_intercept_slope], [-cov_intercept_slope, var_slope]];
    Ok(ScalingFit {
        amplitude: intercept.exp(),
        rate: -slope,
        covariance,
        points: points.to_vec(),
        residuals,
    })
}

/// Predicted `P(n)` and its one-sigma uncertainty.
pub fn extrapolate(fit: &ScalingFit, n: f64) -> (f64, f64) {
    let p = fit.predict(n);
    let c = &fit.covariance;
    let var_ln = c[0][0] + n * n * c[1][1] - 2.0 * n * c[0][1];
    (p, p * var_ln.max(0.0).sqrt())
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct RunBudget {
    pub p_run: f64,
    pub runs: u64,
    pub wall_time_s: f64,
}

/// Runs needed to see a success at least once with the given confidence.
pub fn runs_for_confidence(p_run: f64, confidence: f64) -> Result<u64> {
    if !(confidence > 0.0 && confidence < 1.0) {
        return Err(Error::InvalidProbability { name: "confidence", value: confidence });
    }
    check_probability("p_run", p_run)?;
    if p_run == 0.0 {
        return Err(Error::ImpossibleBudget);
    }
    if p_run == 1.0 {
        return Ok(1);
    }
    let runs = ((-confidence).ln_1p() / (-p_run).ln_1p()).ceil();
    Ok(runs.max(1.0) as u64)
}

pub fn run_budget(
    p_objective: f64,
    eta_per_exciton: f64,
    k_excitations: u32,
    confidence: f64,
    t_single_run_s: f64,
) -> Result<RunBudget> {
    if !(p_objective > 0.0 && p_objective <= 1.0) {
        return Err(Error::InvalidProbability { name: "P_objective", value: p_objective });
    }
    if !(eta_per_exciton > 0.0 && eta_per_exciton <= 1.0) {
        return Err(Error::InvalidProbability { name: "eta", value: eta_per_exciton });
    }
    if !(t_single_run_s >= 0.0) {
        return Err(Error::NonPositiveInput("t_single_run"));
    }
    let p_run = p_objective * eta_per_exciton.powi(k_excitations as i32);
    let runs = runs_for_confidence(p_run, confidence)?;
    Ok(RunBudget { p_run, runs, wall_time_s: runs as f64 * t_single_run_s })
}

/// Objective probability for which [`run_budget`] returns exactly `runs`.
pub fn objective_probability_for_runs(runs: u64, eta_per_exciton: f64, k_excitations: u32, confidence: f64) -> Result<f64> {
    if runs == 0 {
        return Err(Error::NonPositiveInput("runs"));
    }
    if !(confidence > 0.0 && confidence < 1.0) {
        return Err(Error::InvalidProbability { name: "confidence", value: confidence });
    }
    // aim halfway between runs − 1 and runs so the ceiling lands on `runs`
    let target = runs as f64 - 0.5;
    let p_run = -((-confidence).ln_1p() / target).exp_m1();
    let p = p_run / eta_per_exciton.powi(k_excitations as i32);
    if p > 1.0 {
        return Err(Error::ImpossibleBudget);
    }
    Ok(p)
}

/// Upper bound and typical value for the decay probability of one exciton
/// excited at `onset` and held until `duration`.
pub fn decay_bound(duration: f64, onset: f64, lifetime: f64) -> Result<(f64, f64)> {
    if !(lifetime > 0.0) {
        return Err(Error::NonPositiveInput("lifetime"));
    }
    if onset > duration {
        return Err(Error::DegenerateInput(format!("onset {onset} after duration {duration}")));
    }
    let max = -(-(duration - onset) / lifetime).exp_m1();
    Ok((max, max / 2.0))
}

/// Mean orbital radius `½ a_B (3n² − l(l+1))` in μm.
pub fn exciton_radius(n: u32, l: u32) -> Result<f64> {
    if n == 0 || l >= n {
        return Err(Error::InvalidQuantumNumbers { n, l });
    }
    let (n, l) = (n as f64, l as f64);
    Ok(0.5 * EXCITON_BOHR_RADIUS_UM * (3.0 * n * n - l * (l + 1.0)))
}

/// Lifetime ratio `(n_high/n_low)³`.
pub fn cycle_count(n_high: u32, n_low: u32) -> Result<f64> {
    if n_low == 0 || n_high < n_low {
        return Err(Error::InvalidQuantumNumbers { n: n_low, l: 0 });
    }
    Ok((n_high as f64 / n_low as f64).powi(3))
}

/// `6σ/x̄` for a binomial photon count with `n` trials and success `p`.
pub fn distinguishability(n: f64, p: f64) -> Result<f64> {
    if !(n >= 1.0) {
        return Err(Error::NonPositiveInput("N"));
    }
    if !(p > 0.0 && p <= 1.0) {
        return Err(Error::InvalidProbability { name: "p", value: p });
    }
    Ok(6.0 * ((1.0 - p) / (n * p)).sqrt())
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct PhotonBudget {
    pub cycles: f64,
    pub simultaneous_excitons: f64,
    pub photons: f64,
    pub distinguishability: f64,
}

/// Photons emitted while a Rydberg exciton cycles through a low-lying probe
/// state that fits many excitons in the same volume.
pub fn photon_budget(
    n_high: u32,
    l_high: u32,
    n_low: u32,
    l_low: u32,
    wait_lifetimes: f64,
    p_collect: f64,
) -> Result<PhotonBudget> {
    if !(wait_lifetimes >= 1.0) {
        return Err(Error::NonPositiveInput("wait_lifetimes"));
    }
    let cycles = cycle_count(n_high, n_low)?;
    let ratio = exciton_radius(n_high, l_high)? / exciton_radius(n_low, l_low)?;
    let simultaneous_excitons = ratio.powi(3);
    let photons = cycles / wait_lifetimes * simultaneous_excitons;
    Ok(PhotonBudget {
        cycles,
        simultaneous_excitons,
        photons,
        distinguishability: distinguishability(photons, p_collect)?,
    })
}
