//! Derivative-free search over the detuning sweep `(a, b, c, Δ_min, Δ_max)`
//! maximizing the final-time weight on the maximum independent sets of a
//! small instance.

use std::cmp::Ordering;

use rand::Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::basis::{BasisIndex, StateVector};
use crate::error::{Error, Result};
use crate::mis::{blockade_graph, objective_states};
use crate::model::{polygon_geometry, DriveSchedule, Geometry, LevelSet, DEFAULT_CLAMP, DEFAULT_SPACING_UM};
use crate::observables::objective_probability;
use crate::propagator::{evolve_until, HamiltonianContext, DEFAULT_DT};
use crate::rng;

/// Largest instance dimension the search accepts.
pub const MAX_SEARCH_DIMENSION: usize = 4096;

pub const PARAMETER_NAMES: [&str; 5] = ["a", "b", "c", "delta_min", "delta_max"];

/// Closed interval per parameter, in the order of [`PARAMETER_NAMES`].
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ParameterBounds(pub [[f64; 2]; 5]);

impl Default for ParameterBounds {
    fn default() -> Self {
        ParameterBounds([
            [-5e4, 5e4],
            [-200.0, 200.0],
            [-20.0, 20.0],
            [-DEFAULT_CLAMP, 0.0],
            [0.0, DEFAULT_CLAMP],
        ])
    }
}

impl ParameterBounds {
    fn params_from_unit(&self, u: &[f64; 5]) -> [f64; 5] {
        let mut x = [0.0; 5];
        for k in 0..5 {
            let [lo, hi] = self.0[k];
            x[k] = lo + u[k].clamp(0.0, 1.0) * (hi - lo);
        }
        x
    }

    fn unit_from_params(&self, x: &[f64; 5]) -> [f64; 5] {
        let mut u = [0.0; 5];
        for k in 0..5 {
            let [lo, hi] = self.0[k];
            u[k] = if hi > lo { ((x[k] - lo) / (hi - lo)).clamp(0.0, 1.0) } else { 0.0 };
        }
        u
    }

    pub fn contains(&self, x: &[f64; 5]) -> bool {
        x.iter().zip(&self.0).all(|(v, [lo, hi])| *v >= *lo && *v <= *hi)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PulseSearchSpec {
    pub n_sites: usize,
    pub spacing_um: f64,
    pub bounds: ParameterBounds,
    /// Evaluations per restart.
    pub budget: usize,
    pub restarts: usize,
    pub seed: u64,
    pub dt: f64,
}

impl Default for PulseSearchSpec {
    fn default() -> Self {
        PulseSearchSpec {
            n_sites: 5,
            spacing_um: DEFAULT_SPACING_UM,
            bounds: ParameterBounds::default(),
            budget: 400,
            restarts: 8,
            seed: 0,
            dt: DEFAULT_DT,
        }
    }
}

impl PulseSearchSpec {
    pub fn validate(&self, levels: &LevelSet) -> Result<()> {
        if self.budget == 0 {
            return Err(Error::InvalidSearch("budget must be >= 1".into()));
        }
        if self.restarts == 0 {
            return Err(Error::InvalidSearch("restarts must be >= 1".into()));
        }
        for (name, [lo, hi]) in PARAMETER_NAMES.iter().zip(&self.bounds.0) {
            if !lo.is_finite() || !hi.is_finite() || lo > hi {
                return Err(Error::InvalidSearch(format!("bad bounds for {name}: [{lo}, {hi}]")));
            }
        }
        let gap = smallest_level_gap(levels);
        for k in 3..5 {
            if self.bounds.0[k].iter().any(|v| v.abs() >= gap) {
                return Err(Error::InvalidSearch(format!("{} bound reaches a neighbouring level", PARAMETER_NAMES[k])));
            }
        }
        Ok(())
    }
}

/// Smallest spacing between the target level and any other Rydberg level.
pub fn smallest_level_gap(levels: &LevelSet) -> f64 {
    (0..levels.len())
        .filter(|&i| i != levels.target_index())
        .map(|i| levels.detuning_offset(i).abs())
        .fold(f64::INFINITY, f64::min)
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Evaluation {
    pub restart: usize,
    pub params: [f64; 5],
    pub objective: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct PulseSearchResult {
    pub best_params: [f64; 5],
    pub best_probability: f64,
    pub best_schedule: DriveSchedule,
    /// Objective at the template schedule.
    pub initial_probability: f64,
    pub evaluations: Vec<Evaluation>,
    /// True when some restart stopped on budget rather than convergence.
    pub budget_exhausted: bool,
}

impl PulseSearchResult {
    /// Running maximum over the evaluation log.
    pub fn best_so_far(&self) -> Vec<f64> {
        let mut best = f64::NEG_INFINITY;
        self.evaluations
            .iter()
            .map(|e| {
                best = best.max(e.objective);
                best
            })
            .collect()
    }
}

fn apply_params(template: &DriveSchedule, x: &[f64; 5]) -> DriveSchedule {
    let (lo, hi) = if x[3] <= x[4] { (x[3], x[4]) } else { (x[4], x[3]) };
    DriveSchedule { a: x[0], b: x[1], c: x[2], delta_min: lo, delta_max: hi, ..*template }
}

pub fn schedule_params(s: &DriveSchedule) -> [f64; 5] {
    [s.a, s.b, s.c, s.delta_min, s.delta_max]
}

/// Evaluates schedules on one instance.
pub struct ObjectiveEvaluator {
    ctx: HamiltonianContext,
    targets: Vec<BasisIndex>,
    psi0: StateVector,
    dt: f64,
}

impl ObjectiveEvaluator {
    pub fn new(levels: &LevelSet, template: &DriveSchedule, geometry: &Geometry, dt: f64) -> Result<Self> {
        let graph = blockade_graph(geometry, levels, template.omega)?;
        let targets = objective_states(&graph, levels)?;
        let ctx = HamiltonianContext::new(levels.clone(), *template, geometry)?;
        let psi0 = StateVector::ground(geometry.n_sites(), levels.len())?;
        Ok(ObjectiveEvaluator { ctx, targets, psi0, dt })
    }

    pub fn objective_states(&self) -> &[BasisIndex] {
        &self.targets
    }

    pub fn evaluate(&mut self, schedule: &DriveSchedule) -> Result<f64> {
        self.ctx.set_schedule(*schedule)?;
        // halve the step when a sweep trips the norm gate
        let mut dt = self.dt;
        let traj = loop {
            match evolve_until(&self.psi0, &self.ctx, dt, schedule.duration, &[]) {
                Err(Error::NormDriftExceeded { .. }) if dt > self.dt / 8.0 => dt /= 2.0,
                other => break other?,
            }
        };
        objective_probability(traj.final_state().expect("final snapshot"), &self.targets)
    }
}

fn cmp_params(a: &[f64; 5], b: &[f64; 5]) -> Ordering {
    a.iter().zip(b).map(|(x, y)| x.total_cmp(y)).find(|o| o.is_ne()).unwrap_or(Ordering::Equal)
}

struct RestartOutcome {
    log: Vec<Evaluation>,
    exhausted: bool,
}

fn nelder_mead<F: FnMut(&[f64; 5]) -> Result<f64>>(start: [f64; 5], budget: usize, mut f: F) -> Result<bool> {
    // minimizes −objective in the unit box; returns true if the budget ran out
    let mut used = 0usize;
    let mut eval = |u: &[f64; 5], used: &mut usize| -> Result<Option<f64>> {
        if *used >= budget {
            return Ok(None);
        }
        *used += 1;
        Ok(Some(-f(u)?))
    };
    let project = |u: [f64; 5]| u.map(|v| v.clamp(0.0, 1.0));
    let mut simplex: Vec<([f64; 5], f64)> = Vec::with_capacity(6);
    let Some(f0) = eval(&start, &mut used)? else { return Ok(true) };
    simplex.push((start, f0));
    for k in 0..5 {
        let mut v = start;
        v[k] = if v[k] + 0.1 <= 1.0 { v[k] + 0.1 } else { v[k] - 0.1 };
        let Some(fv) = eval(&v, &mut used)? else { return Ok(true) };
        simplex.push((v, fv));
    }
    loop {
        simplex.sort_by(|a, b| a.1.total_cmp(&b.1).then_with(|| cmp_params(&a.0, &b.0)));
        let spread = simplex[5].1 - simplex[0].1;
        let size = simplex.iter().map(|(v, _)| v.iter().zip(&simplex[0].0).map(|(a, b)| (a - b).abs()).fold(0.0, f64::max)).fold(0.0, f64::max);
        if spread.abs() < 1e-10 && size < 1e-6 {
            return Ok(false);
        }
        let mut centroid = [0.0; 5];
        for (v, _) in &simplex[..5] {
            for k in 0..5 {
                centroid[k] += v[k] / 5.0;
            }
        }
        let worst = simplex[5];
        let along = |t: f64| project(std::array::from_fn(|k| centroid[k] + t * (worst.0[k] - centroid[k])));
        let reflected = along(-1.0);
        let Some(fr) = eval(&reflected, &mut used)? else { return Ok(true) };
        if fr < simplex[0].1 {
            let expanded = along(-2.0);
            let Some(fe) = eval(&expanded, &mut used)? else { return Ok(true) };
            simplex[5] = if fe < fr { (expanded, fe) } else { (reflected, fr) };
            continue;
        }
        if fr < simplex[4].1 {
            simplex[5] = (reflected, fr);
            continue;
        }
        let (contracted, target) = if fr < worst.1 { (along(-0.5), fr) } else { (along(0.5), worst.1) };
        let Some(fc) = eval(&contracted, &mut used)? else { return Ok(true) };
        if fc < target {
            simplex[5] = (contracted, fc);
            continue;
        }
        let best = simplex[0].0;
        for entry in simplex.iter_mut().skip(1) {
            let v: [f64; 5] = std::array::from_fn(|k| best[k] + 0.5 * (entry.0[k] - best[k]));
            let Some(fv) = eval(&v, &mut used)? else { return Ok(true) };
            *entry = (v, fv);
        }
    }
}

/// Simplex search with random restarts. Restart 0 starts at the template
/// schedule; the others start at seeded uniform points inside the bounds.
pub fn optimize_pulse(spec: &PulseSearchSpec, levels: &LevelSet, template: &DriveSchedule) -> Result<PulseSearchResult> {
    spec.validate(levels)?;
    let geometry = polygon_geometry(spec.n_sites, spec.spacing_um)?;
    let dim = crate::basis::dimension(spec.n_sites, levels.len() + 1)?;
    if dim > MAX_SEARCH_DIMENSION {
        return Err(Error::InvalidSearch(format!("instance dimension {dim} exceeds {MAX_SEARCH_DIMENSION}")));
    }
    let bounds = spec.bounds;
    let restart_seed = rng::derive_seed(spec.seed, "restart");
    let starts: Vec<[f64; 5]> = (0..spec.restarts)
        .map(|r| {
            if r == 0 {
                bounds.unit_from_params(&schedule_params(template))
            } else {
                let mut g = rng::stream(restart_seed, r as u64);
                std::array::from_fn(|_| g.random::<f64>())
            }
        })
        .collect();
    let outcomes: Vec<RestartOutcome> = starts
        .par_iter()
        .enumerate()
        .map(|(restart, start)| {
            let mut evaluator = ObjectiveEvaluator::new(levels, template, &geometry, spec.dt)?;
            let mut log = Vec::new();
            let exhausted = nelder_mead(*start, spec.budget, |u| {
                let params = bounds.params_from_unit(u);
                let objective = evaluator.evaluate(&apply_params(template, &params))?;
                log.push(Evaluation { restart, params, objective });
                Ok(objective)
            })?;
            Ok(RestartOutcome { log, exhausted })
        })
        .collect::<Result<_>>()?;
    let budget_exhausted = outcomes.iter().any(|o| o.exhausted);
    let evaluations: Vec<Evaluation> = outcomes.into_iter().flat_map(|o| o.log).collect();
    let initial_probability = evaluations[0].objective;
    let best = evaluations
        .iter()
        .max_by(|a, b| a.objective.total_cmp(&b.objective).then_with(|| cmp_params(&b.params, &a.params)))
        .expect("at least one evaluation");
    let best_schedule = apply_params(template, &best.params);
    Ok(PulseSearchResult {
        best_params: schedule_params(&best_schedule),
        best_probability: best.objective,
        best_schedule,
        initial_probability,
        evaluations,
        budget_exhausted,
    })
}

/// The optimized schedule, unchanged, for a polygon of any size.
pub fn transfer_schedule(result: &PulseSearchResult, _n_sites: usize) -> DriveSchedule {
    result.best_schedule
}
