//! Measurements on an evolved state: probabilities, objective weight, the
//! connected density correlator g², projective sampling, detection loss and
//! excitation-count histograms.

use std::collections::{BTreeMap, BTreeSet};
use std::io::Write;

use rayon::prelude::*;
use serde::Serialize;

use crate::basis::{decode_into, BasisIndex, Occupancies, StateVector, CHUNK};
use crate::error::{Error, Result};
use crate::model::LevelSet;
use crate::propagator::fmt_f64;
use crate::rng;

/// Which projector plays the role of `n_i`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub enum ProjectorMode {
    /// `|r_k⟩⟨r_k|` for one level code.
    TargetLevel(u8),
    /// Any Rydberg level.
    AnyRydberg,
}

impl ProjectorMode {
    pub fn target(levels: &LevelSet) -> Self {
        ProjectorMode::TargetLevel(levels.target_code())
    }

    #[inline]
    pub fn counts(self, code: u8) -> bool {
        match self {
            ProjectorMode::TargetLevel(k) => code == k,
            ProjectorMode::AnyRydberg => code > 0,
        }
    }

    pub fn level_filter(self) -> Option<u8> {
        match self {
            ProjectorMode::TargetLevel(k) => Some(k),
            ProjectorMode::AnyRydberg => None,
        }
    }
}

/// Nonzero probabilities keyed by basis index.
pub fn state_probabilities(state: &StateVector) -> BTreeMap<BasisIndex, f64> {
    state
        .amplitudes()
        .iter()
        .enumerate()
        .filter_map(|(i, a)| {
            let p = a.norm_sqr();
            (p > 0.0).then_some((BasisIndex(i), p))
        })
        .collect()
}

/// Total weight on a set of objective basis states.
pub fn objective_probability(state: &StateVector, objective: &[BasisIndex]) -> Result<f64> {
    if objective.is_empty() {
        return Err(Error::EmptyObjective);
    }
    let distinct: BTreeSet<BasisIndex> = objective.iter().copied().collect();
    distinct
        .iter()
        .map(|&idx| {
            if idx.0 >= state.dim() {
                Err(Error::IndexOutOfRange { index: idx.0, dimension: state.dim() })
            } else {
                Ok(state.probability(idx))
            }
        })
        .sum()
}

/// `g²_ij = ⟨n_i n_j⟩ − ⟨n_i⟩⟨n_j⟩`.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct G2Matrix {
    pub values: Vec<Vec<f64>>,
    pub projector_mode: ProjectorMode,
}

impl G2Matrix {
    pub fn n_sites(&self) -> usize {
        self.values.len()
    }

    pub fn get(&self, i: usize, j: usize) -> f64 {
        self.values[i][j]
    }

    /// Mean of `g²_{i, i+d}` around a ring.
    pub fn ring_average(&self, separation: usize) -> f64 {
        let n = self.n_sites();
        (0..n).map(|i| self.values[i][(i + separation) % n]).sum::<f64>() / n as f64
    }

    pub fn write_csv<W: Write>(&self, mut w: W) -> Result<()> {
        writeln!(w, "i,j,value")?;
        for (i, row) in self.values.iter().enumerate() {
            for (j, v) in row.iter().enumerate() {
                writeln!(w, "{i},{j},{}", fmt_f64(*v))?;
            }
        }
        Ok(())
    }

    fn from_moments(mean: &[f64], pair: &[Vec<f64>], projector_mode: ProjectorMode) -> Self {
        let n = mean.len();
        let values = (0..n)
            .map(|i| (0..n).map(|j| pair[i][j] - mean[i] * mean[j]).collect())
            .collect();
        G2Matrix { values, projector_mode }
    }
}

/// Exact g² from the wavefunction.
pub fn g2_matrix(state: &StateVector, projector_mode: ProjectorMode) -> G2Matrix {
    let n = state.n_sites();
    let radix = state.levels_per_site();
    let amps = state.amplitudes();
    // pair[i][j] with i <= j; pair[i][i] is ⟨n_i⟩ since projectors are idempotent
    let partials: Vec<Vec<f64>> = amps
        .par_chunks(CHUNK)
        .enumerate()
        .map(|(chunk, block)| {
            let mut pair = vec![0.0; n * n];
            let mut digits = vec![0u8; n];
            let mut hits = Vec::with_capacity(n);
            for (offset, a) in block.iter().enumerate() {
                let p = a.norm_sqr();
                if p == 0.0 {
                    continue;
                }
                decode_into(chunk * CHUNK + offset, radix, &mut digits);
                hits.clear();
                hits.extend((0..n).filter(|&i| projector_mode.counts(digits[i])));
                for (x, &i) in hits.iter().enumerate() {
                    for &j in &hits[x..] {
                        pair[i * n + j] += p;
                    }
                }
            }
            pair
        })
        .collect();
    let mut pair = vec![vec![0.0; n]; n];
    for part in &partials {
        for i in 0..n {
            for j in i..n {
                pair[i][j] += part[i * n + j];
            }
        }
    }
    for i in 0..n {
        for j in 0..i {
            pair[i][j] = pair[j][i];
        }
    }
    let mean: Vec<f64> = (0..n).map(|i| pair[i][i]).collect();
    G2Matrix::from_moments(&mean, &pair, projector_mode)
}

/// g² estimated from sampled occupancies.
pub fn sampled_g2(samples: &SampleSet, projector_mode: ProjectorMode) -> Result<G2Matrix> {
    let runs = samples.draws.len();
    if runs == 0 {
        return Err(Error::DegenerateInput("no samples".into()));
    }
    let n = samples.draws[0].len();
    let mut mean = vec![0.0; n];
    let mut pair = vec![vec![0.0; n]; n];
    for draw in &samples.draws {
        let hits: Vec<usize> = (0..n).filter(|&i| projector_mode.counts(draw.0[i])).collect();
        for &i in &hits {
            mean[i] += 1.0;
            for &j in &hits {
                pair[i][j] += 1.0;
            }
        }
    }
    let scale = 1.0 / runs as f64;
    mean.iter_mut().for_each(|m| *m *= scale);
    pair.iter_mut().flatten().for_each(|p| *p *= scale);
    Ok(G2Matrix::from_moments(&mean, &pair, projector_mode))
}

/// Inverse-CDF sampler over a state's basis probabilities.
#[derive(Debug, Clone)]
pub struct Sampler {
    cumulative: Vec<f64>,
    n_sites: usize,
    radix: usize,
}

impl Sampler {
    pub fn new(state: &StateVector) -> Self {
        let mut acc = 0.0;
        let cumulative = state
            .amplitudes()
            .iter()
            .map(|a| {
                acc += a.norm_sqr();
                acc
            })
            .collect();
        Sampler { cumulative, n_sites: state.n_sites(), radix: state.levels_per_site() }
    }

    pub fn n_sites(&self) -> usize {
        self.n_sites
    }

    /// Outcome of run `run` under `seed`.
    pub fn draw(&self, seed: u64, run: u64) -> BasisIndex {
        let total = *self.cumulative.last().expect("non-empty state");
        let u = rng::uniform(seed, run, 0) * total;
        let idx = self.cumulative.partition_point(|&c| c <= u);
        BasisIndex(idx.min(self.cumulative.len() - 1))
    }

    pub fn draw_occupancies(&self, seed: u64, run: u64) -> Occupancies {
        let mut digits = vec![0u8; self.n_sites];
        decode_into(self.draw(seed, run).0, self.radix, &mut digits);
        Occupancies(digits)
    }
}

/// Sampled measurement outcomes.
#[derive(Debug, Clone, PartialEq)]
pub struct SampleSet {
    pub draws: Vec<Occupancies>,
    pub seed: u64,
    pub run_count: usize,
}

impl SampleSet {
    /// One JSON string per line, e.g. `"0102"`.
    pub fn write_jsonl<W: Write>(&self, mut w: W) -> Result<()> {
        for draw in &self.draws {
            serde_json::to_writer(&mut w, &draw.label())?;
            writeln!(w)?;
        }
        Ok(())
    }

    pub fn mean_count(&self, level_filter: Option<u8>) -> f64 {
        let total: usize = self.draws.iter().map(|d| crate::basis::rydberg_count(d, level_filter)).sum();
        total as f64 / self.draws.len().max(1) as f64
    }
}

/// Draws `runs` i.i.d. outcomes with probability `|amplitude|²`.
pub fn sample_states(state: &StateVector, runs: usize, seed: u64) -> Result<SampleSet> {
    if runs == 0 {
        return Err(Error::DegenerateInput("runs must be >= 1".into()));
    }
    let sampler = Sampler::new(state);
    let draws = (0..runs as u64)
        .into_par_iter()
        .map(|run| sampler.draw_occupancies(seed, run))
        .collect();
    Ok(SampleSet { draws, seed, run_count: runs })
}

/// Applies per-exciton Bernoulli(η) detection: each excited site of run `r`
/// survives iff `uniform(seed, r, site) < η`.
pub fn thin_occupancies(occ: &Occupancies, eta: f64, seed: u64, run: u64) -> Occupancies {
    Occupancies(
        occ.0
            .iter()
            .enumerate()
            .map(|(site, &code)| {
                if code > 0 && rng::uniform(seed, run, site as u64) >= eta {
                    0
                } else {
                    code
                }
            })
            .collect(),
    )
}

pub fn thin_detection(samples: &SampleSet, eta: f64, seed: u64) -> Result<SampleSet> {
    check_probability("eta", eta)?;
    let draws = samples
        .draws
        .par_iter()
        .enumerate()
        .map(|(run, occ)| thin_occupancies(occ, eta, seed, run as u64))
        .collect();
    Ok(SampleSet { draws, seed, run_count: samples.run_count })
}

pub(crate) fn check_probability(name: &'static str, value: f64) -> Result<()> {
    if (0.0..=1.0).contains(&value) {
        Ok(())
    } else {
        Err(Error::InvalidProbability { name, value })
    }
}

/// Counts of detected excitation numbers for one detection efficiency.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct HistogramResult {
    pub eta: f64,
    /// `counts[m]` is the number of runs with `m` detected excitons.
    pub counts: Vec<u64>,
}

impl HistogramResult {
    pub fn total(&self) -> u64 {
        self.counts.iter().sum()
    }
}

pub fn excitation_histogram(samples: &SampleSet, level_filter: Option<u8>, eta: f64) -> HistogramResult {
    let n = samples.draws.first().map_or(0, |d| d.len());
    let mut counts = vec![0u64; n + 1];
    for draw in &samples.draws {
        counts[crate::basis::rydberg_count(draw, level_filter)] += 1;
    }
    HistogramResult { eta, counts }
}

/// Writes `eta,excitons_detected,count` rows.
pub fn write_histograms_csv<W: Write>(mut w: W, histograms: &[HistogramResult]) -> Result<()> {
    writeln!(w, "eta,excitons_detected,count")?;
    for h in histograms {
        for (m, c) in h.counts.iter().enumerate() {
            writeln!(w, "{},{m},{c}", fmt_f64(h.eta))?;
        }
    }
    Ok(())
}
