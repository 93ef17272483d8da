//! Matrix-free Hamiltonian application and fixed-step fourth-order
//! integration of `i dψ/dt = H(t) ψ`.
//!
//! Per basis index the Hamiltonian has a diagonal part
//! `−Σ_i Δ_{k(i)}(t) + Σ_k Σ_{i<j} V_k,ij n_i^k n_j^k` and couples each site's
//! ground state to every Rydberg level `k` with amplitude `Ω_k / 2`.

use std::io::Write;

use num_complex::Complex64;
use rayon::prelude::*;
use serde::Serialize;

use crate::basis::{self, decode_into, increment, BasisIndex, Occupancies, StateVector, CHUNK};
use crate::error::{Error, Result};
use crate::model::{interaction_table, DriveSchedule, Geometry, InteractionTable, LevelSet};

pub const DEFAULT_DT: f64 = 5e-4;
pub const NORM_DRIFT_LIMIT: f64 = 1e-8;
/// Above this many bytes the interaction diagonal is recomputed per index.
pub const DEFAULT_STATIC_DIAGONAL_LIMIT: u64 = 2 * 1024 * 1024 * 1024;

const MAX_SITES: usize = 64;
/// Largest in-block dimension (amplitudes) kept cache resident.
const BLOCK_TARGET: usize = 4096;
const ZERO: Complex64 = Complex64 { re: 0.0, im: 0.0 };

#[derive(Debug, Clone, Copy)]
pub struct ContextOptions {
    pub memory_cap: u64,
    pub static_diagonal_limit: u64,
}

impl Default for ContextOptions {
    fn default() -> Self {
        ContextOptions { memory_cap: basis::DEFAULT_MEMORY_CAP, static_diagonal_limit: DEFAULT_STATIC_DIAGONAL_LIMIT }
    }
}

/// Everything needed to apply the array Hamiltonian at any time.
#[derive(Debug, Clone)]
pub struct HamiltonianContext {
    levels: LevelSet,
    schedule: DriveSchedule,
    interactions: InteractionTable,
    n_sites: usize,
    radix: usize,
    dim: usize,
    strides: Vec<usize>,
    half_rabi: Vec<f64>,
    static_diagonal: Option<Vec<f64>>,
    /// Sites `0..low_sites` are handled inside one contiguous block.
    low_sites: usize,
    block: usize,
    low_digits: Vec<u8>,
}

impl HamiltonianContext {
    pub fn new(levels: LevelSet, schedule: DriveSchedule, geometry: &Geometry) -> Result<Self> {
        Self::with_options(levels, schedule, geometry, ContextOptions::default())
    }

    pub fn with_options(
        levels: LevelSet,
        schedule: DriveSchedule,
        geometry: &Geometry,
        options: ContextOptions,
    ) -> Result<Self> {
        schedule.validate()?;
        let n_sites = geometry.n_sites();
        if n_sites > MAX_SITES {
            return Err(Error::InvalidShape(format!("at most {MAX_SITES} sites are supported")));
        }
        let radix = levels.len() + 1;
        let dim = basis::dimension_with_cap(n_sites, radix, options.memory_cap)?;
        if dim >= basis::LONG_RUN_DIMENSION {
            log::info!("dimension {dim} is a long run");
        }
        let mut strides = Vec::with_capacity(n_sites);
        let mut s = 1usize;
        for _ in 0..n_sites {
            strides.push(s);
            s *= radix;
        }
        let half_rabi = levels.rabi_by_code(schedule.omega).into_iter().map(|w| 0.5 * w).collect();
        let interactions = interaction_table(geometry, &levels);
        let mut low_sites = 0;
        let mut block = 1usize;
        while low_sites < n_sites && block * radix <= BLOCK_TARGET {
            low_sites += 1;
            block *= radix;
        }
        let mut low_digits = vec![0u8; block * low_sites];
        for (j, digits) in low_digits.chunks_mut(low_sites.max(1)).enumerate().take(block) {
            if low_sites > 0 {
                decode_into(j, radix, digits);
            }
        }
        let mut ctx = HamiltonianContext {
            levels,
            schedule,
            interactions,
            n_sites,
            radix,
            dim,
            strides,
            half_rabi,
            static_diagonal: None,
            low_sites,
            block,
            low_digits,
        };
        if (dim as u64).saturating_mul(8) <= options.static_diagonal_limit {
            ctx.static_diagonal = Some(ctx.compute_static_diagonal());
        }
        Ok(ctx)
    }

    pub fn levels(&self) -> &LevelSet {
        &self.levels
    }

    pub fn schedule(&self) -> &DriveSchedule {
        &self.schedule
    }

    pub fn interactions(&self) -> &InteractionTable {
        &self.interactions
    }

    pub fn n_sites(&self) -> usize {
        self.n_sites
    }

    pub fn n_levels(&self) -> usize {
        self.radix - 1
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn static_diagonal(&self) -> Option<&[f64]> {
        self.static_diagonal.as_deref()
    }

    /// Swaps the drive schedule, keeping the precomputed diagonal.
    pub fn set_schedule(&mut self, schedule: DriveSchedule) -> Result<()> {
        schedule.validate()?;
        self.half_rabi = self.levels.rabi_by_code(schedule.omega).into_iter().map(|w| 0.5 * w).collect();
        self.schedule = schedule;
        Ok(())
    }

    /// Interaction energy of one product state.
    pub fn interaction_energy(&self, digits: &[u8]) -> f64 {
        interaction_energy(digits, &self.interactions)
    }

    /// Recomputes the static interaction diagonal from scratch.
    pub fn compute_static_diagonal(&self) -> Vec<f64> {
        let mut diag = vec![0.0; self.dim];
        let radix = self.radix;
        let n = self.n_sites;
        diag.par_chunks_mut(CHUNK).enumerate().for_each(|(chunk, out)| {
            let mut digits = [0u8; MAX_SITES];
            let digits = &mut digits[..n];
            decode_into(chunk * CHUNK, radix, digits);
            for slot in out.iter_mut() {
                *slot = interaction_energy(digits, &self.interactions);
                increment(digits, radix as u8);
            }
        });
        diag
    }

    fn detunings_at(&self, t: f64) -> Vec<f64> {
        self.levels.detunings_by_code(self.schedule.detuning_unchecked(t))
    }

    /// Detuning sums of the low sites for every in-block offset.
    fn low_detunings(&self, detunings: &[f64]) -> Vec<f64> {
        let m = self.low_sites;
        let radix = self.radix;
        let mut out = vec![0.0; self.block];
        // out[j] for j < radix^s extends out[j mod radix^(s-1)] by one digit
        let mut filled = 1usize;
        for _ in 0..m {
            for d in (1..radix).rev() {
                for j in 0..filled {
                    out[d * filled + j] = out[j] + detunings[d];
                }
            }
            filled *= radix;
        }
        out
    }

    /// Writes `(H src)` restricted to block `block` into `out`.
    fn apply_block(&self, detunings: &[f64], low_det: &[f64], src: &[Complex64], block: usize, out: &mut [Complex64]) {
        let radix = self.radix;
        let b = self.block;
        let m = self.low_sites;
        let n_high = self.n_sites - m;
        let start = block * b;
        let src_blk = &src[start..start + b];
        let half_rabi = &self.half_rabi[..];

        let mut high = [0u8; MAX_SITES];
        let high = &mut high[..n_high];
        decode_into(block, radix, high);
        let high_det: f64 = high.iter().map(|&d| detunings[d as usize]).sum();

        match &self.static_diagonal {
            Some(diag) => {
                let diag = &diag[start..start + b];
                for j in 0..b {
                    out[j] = src_blk[j] * (diag[j] - (low_det[j] + high_det));
                }
            }
            None => {
                let mut digits = [0u8; MAX_SITES];
                let digits = &mut digits[..self.n_sites];
                digits[m..].copy_from_slice(high);
                for j in 0..b {
                    digits[..m].copy_from_slice(&self.low_digits[j * m..(j + 1) * m]);
                    let interaction = interaction_energy(digits, &self.interactions);
                    out[j] = src_blk[j] * (interaction - (low_det[j] + high_det));
                }
            }
        }

        if m > 0 {
            for (src_grp, out_grp) in src_blk.chunks_exact(radix).zip(out.chunks_exact_mut(radix)) {
                let g = src_grp[0];
                let mut acc = ZERO;
                for k in 1..radix {
                    let w = half_rabi[k];
                    acc.re += w * src_grp[k].re;
                    acc.im += w * src_grp[k].im;
                    out_grp[k].re += w * g.re;
                    out_grp[k].im += w * g.im;
                }
                out_grp[0] += acc;
            }
        }
        for site in 1..m {
            let stride = self.strides[site];
            let span = stride * radix;
            for (src_grp, out_grp) in src_blk.chunks_exact(span).zip(out.chunks_exact_mut(span)) {
                let (src_g, src_rest) = src_grp.split_at(stride);
                let (out_g, out_rest) = out_grp.split_at_mut(stride);
                for ((src_k, out_k), &w) in src_rest
                    .chunks_exact(stride)
                    .zip(out_rest.chunks_exact_mut(stride))
                    .zip(&half_rabi[1..])
                {
                    axpy(out_g, src_k, w);
                    axpy(out_k, src_g, w);
                }
            }
        }

        let mut block_stride = 1usize;
        for &d in high.iter() {
            let d = d as usize;
            if d == 0 {
                for k in 1..radix {
                    let other = (block + k * block_stride) * b;
                    axpy(out, &src[other..other + b], half_rabi[k]);
                }
            } else {
                let other = (block - d * block_stride) * b;
                axpy(out, &src[other..other + b], half_rabi[d]);
            }
            block_stride *= radix;
        }
    }

    /// `out = H(t) src` over raw amplitude slices.
    pub fn apply_into(&self, t: f64, src: &[Complex64], out: &mut [Complex64]) -> Result<()> {
        if src.len() != self.dim {
            return Err(Error::DimensionMismatch { expected: self.dim, actual: src.len() });
        }
        if out.len() != self.dim {
            return Err(Error::DimensionMismatch { expected: self.dim, actual: out.len() });
        }
        let detunings = self.detunings_at(t);
        let low_det = self.low_detunings(&detunings);
        out.par_chunks_mut(self.block).enumerate().for_each(|(block, out)| {
            self.apply_block(&detunings, &low_det, src, block, out);
        });
        Ok(())
    }

    /// One RK4 stage: with `k = -i H(t) src`, sets `acc += w·k` (or
    /// `acc = base + w·k` when `init`) and `next = base + c·k`. Without
    /// `next` it returns `‖acc‖²` summed in block order.
    #[allow(clippy::too_many_arguments)]
    fn rk_stage(
        &self,
        t: f64,
        src: &[Complex64],
        base: &[Complex64],
        acc: &mut [Complex64],
        next: Option<&mut [Complex64]>,
        w: f64,
        c: f64,
        init: bool,
    ) -> f64 {
        let detunings = self.detunings_at(t);
        let low_det = self.low_detunings(&detunings);
        let b = self.block;
        let scratch = || vec![ZERO; b];
        // -i·h·x = (h·x.im, -h·x.re)
        let rot = |h: Complex64, s: f64| Complex64::new(h.im * s, -h.re * s);
        match next {
            Some(next) => {
                acc.par_chunks_mut(b)
                    .zip(next.par_chunks_mut(b))
                    .enumerate()
                    .for_each_init(scratch, |hbuf, (block, (acc, next))| {
                        self.apply_block(&detunings, &low_det, src, block, hbuf);
                        let base = &base[block * b..(block + 1) * b];
                        for j in 0..b {
                            let h = hbuf[j];
                            acc[j] = if init { base[j] + rot(h, w) } else { acc[j] + rot(h, w) };
                            next[j] = base[j] + rot(h, c);
                        }
                    });
                0.0
            }
            None => {
                let partials: Vec<f64> = acc
                    .par_chunks_mut(b)
                    .enumerate()
                    .map_init(scratch, |hbuf, (block, acc)| {
                        self.apply_block(&detunings, &low_det, src, block, hbuf);
                        let mut norm = 0.0;
                        for j in 0..b {
                            let v = acc[j] + rot(hbuf[j], w);
                            norm += v.norm_sqr();
                            acc[j] = v;
                        }
                        norm
                    })
                    .collect();
                partials.iter().sum()
            }
        }
    }
}

#[inline]
fn axpy(out: &mut [Complex64], x: &[Complex64], alpha: f64) {
    for (o, v) in out.iter_mut().zip(x) {
        o.re += alpha * v.re;
        o.im += alpha * v.im;
    }
}

/// `Σ_k Σ_{i<j} V_k,ij [occ_i = k][occ_j = k]`.
pub fn interaction_energy(digits: &[u8], table: &InteractionTable) -> f64 {
    let mut energy = 0.0;
    for i in 0..digits.len() {
        let k = digits[i];
        if k == 0 {
            continue;
        }
        let row = &table.level(k as usize - 1)[i];
        for j in (i + 1)..digits.len() {
            if digits[j] == k {
                energy += row[j];
            }
        }
    }
    energy
}

/// Returns `H(t) ψ`.
pub fn apply_hamiltonian(state: &StateVector, t: f64, ctx: &HamiltonianContext) -> Result<StateVector> {
    if state.n_sites() != ctx.n_sites || state.n_levels() != ctx.n_levels() {
        return Err(Error::DimensionMismatch { expected: ctx.dim, actual: state.dim() });
    }
    let mut out = vec![ZERO; ctx.dim];
    ctx.apply_into(t, state.amplitudes(), &mut out)?;
    StateVector::from_amplitudes(state.n_sites(), state.n_levels(), out)
}

/// `⟨ψ|H(t)|ψ⟩`; the imaginary part vanishes for a Hermitian `H`.
pub fn energy_expectation(state: &StateVector, t: f64, ctx: &HamiltonianContext) -> Result<Complex64> {
    let h_psi = apply_hamiltonian(state, t, ctx)?;
    state.inner(&h_psi)
}

/// Full-state snapshots at the recorded times.
#[derive(Debug, Clone)]
pub struct Trajectory {
    pub times: Vec<f64>,
    pub states: Vec<StateVector>,
    pub norm_drift: f64,
}

impl Trajectory {
    pub fn final_state(&self) -> Option<&StateVector> {
        self.states.last()
    }

    /// Writes `time_ns,state_label,probability` rows for the given states.
    pub fn write_csv<W: Write>(&self, mut w: W, states: &[BasisIndex]) -> Result<()> {
        writeln!(w, "time_ns,state_label,probability")?;
        for (t, psi) in self.times.iter().zip(&self.states) {
            for &idx in states {
                let label = basis::decode(idx, psi.n_sites(), psi.levels_per_site())?.label();
                writeln!(w, "{},{},{}", fmt_f64(*t), label, fmt_f64(psi.probability(idx)))?;
            }
        }
        Ok(())
    }
}

/// One entry of a final-time probability ranking.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct RankedState {
    pub state_label: String,
    pub index: usize,
    pub probability: f64,
}

/// Probability curves for tracked states plus a final top-k report.
#[derive(Debug, Clone)]
pub struct TrackedTrajectory {
    pub times: Vec<f64>,
    pub targets: Vec<BasisIndex>,
    /// `probabilities[r][j]` is the probability of `targets[j]` at `times[r]`.
    pub probabilities: Vec<Vec<f64>>,
    pub top_k: Vec<RankedState>,
    pub norm_drift: f64,
    pub final_state: StateVector,
}

impl TrackedTrajectory {
    pub fn write_csv<W: Write>(&self, mut w: W) -> Result<()> {
        writeln!(w, "time_ns,state_label,probability")?;
        let (n, radix) = (self.final_state.n_sites(), self.final_state.levels_per_site());
        let labels = self
            .targets
            .iter()
            .map(|&idx| basis::decode(idx, n, radix).map(|o| o.label()))
            .collect::<Result<Vec<_>>>()?;
        for (t, row) in self.times.iter().zip(&self.probabilities) {
            for (label, p) in labels.iter().zip(row) {
                writeln!(w, "{},{},{}", fmt_f64(*t), label, fmt_f64(*p))?;
            }
        }
        Ok(())
    }

    pub fn write_top_k_json<W: Write>(&self, w: W) -> Result<()> {
        serde_json::to_writer_pretty(w, &self.top_k)?;
        Ok(())
    }
}

/// Round-trip exact float rendering with 17 significant digits.
pub fn fmt_f64(x: f64) -> String {
    format!("{x:.16e}")
}

/// Step boundaries: every record time and the final time.
fn stop_times(record_times: &[f64], t_end: f64) -> Result<Vec<f64>> {
    let mut stops: Vec<f64> = record_times.to_vec();
    if stops.iter().any(|t| !t.is_finite() || *t < 0.0 || *t > t_end * (1.0 + 1e-12) + 1e-15) {
        return Err(Error::InvalidTimeGrid(format!("record times must lie in [0, {t_end}]")));
    }
    stops.sort_by(|a, b| a.total_cmp(b));
    stops.dedup_by(|a, b| (*a - *b).abs() <= 1e-12 * t_end.max(1e-12));
    if stops.last().is_none_or(|&t| (t - t_end).abs() > 1e-12 * t_end.max(1e-12)) {
        stops.push(t_end);
    }
    Ok(stops)
}

/// Integrates from `t = 0` to `t_end`, calling `record(t, ψ)` at each
/// requested time. Returns the final state and the max norm drift.
fn integrate<F: FnMut(f64, &[Complex64])>(
    psi0: &StateVector,
    ctx: &HamiltonianContext,
    dt: f64,
    t_end: f64,
    record_times: &[f64],
    mut record: F,
) -> Result<(StateVector, f64)> {
    if !(dt > 0.0) || !dt.is_finite() {
        return Err(Error::InvalidTimeGrid(format!("dt must be positive, got {dt}")));
    }
    if !(t_end >= 0.0) || t_end > ctx.schedule.duration * (1.0 + 1e-12) {
        return Err(Error::InvalidTimeGrid(format!(
            "end time {t_end} outside [0, {}]",
            ctx.schedule.duration
        )));
    }
    if psi0.n_sites() != ctx.n_sites || psi0.n_levels() != ctx.n_levels() {
        return Err(Error::DimensionMismatch { expected: ctx.dim, actual: psi0.dim() });
    }
    let initial_drift = (psi0.norm() - 1.0).abs();
    if initial_drift > NORM_DRIFT_LIMIT {
        return Err(Error::InvalidShape(format!("initial state not normalized (|‖ψ‖−1| = {initial_drift:.3e})")));
    }
    let wanted: Vec<f64> = record_times.to_vec();
    let is_wanted = |t: f64| wanted.iter().any(|&w| (w - t).abs() <= 1e-12 * t_end.max(1e-12));

    let dim = ctx.dim;
    let mut psi = psi0.amplitudes().to_vec();
    let mut acc = vec![ZERO; dim];
    let mut tmp_a = vec![ZERO; dim];
    let mut tmp_b = vec![ZERO; dim];
    let mut drift: f64 = 0.0;

    if is_wanted(0.0) {
        record(0.0, &psi);
    }
    let mut t = 0.0;
    if t_end > 0.0 {
        for stop in stop_times(record_times, t_end)? {
            if stop <= t {
                if stop == 0.0 {
                    continue;
                }
                return Err(Error::InvalidTimeGrid("record times must increase".into()));
            }
            let span = stop - t;
            let steps = ((span / dt) - 1e-9).ceil().max(1.0) as usize;
            let h = span / steps as f64;
            for step in 0..steps {
                let t0 = t + step as f64 * h;
                let half = t0 + 0.5 * h;
                let full = if step + 1 == steps { stop } else { t0 + h };
                ctx.rk_stage(t0, &psi, &psi, &mut acc, Some(&mut tmp_a), h / 6.0, 0.5 * h, true);
                ctx.rk_stage(half, &tmp_a, &psi, &mut acc, Some(&mut tmp_b), h / 3.0, 0.5 * h, false);
                ctx.rk_stage(half, &tmp_b, &psi, &mut acc, Some(&mut tmp_a), h / 3.0, h, false);
                let norm_sqr = ctx.rk_stage(full, &tmp_a, &psi, &mut acc, None, h / 6.0, 0.0, false);
                std::mem::swap(&mut psi, &mut acc);
                let d = (norm_sqr.sqrt() - 1.0).abs();
                drift = drift.max(d);
                if !(d <= NORM_DRIFT_LIMIT) {
                    return Err(Error::NormDriftExceeded { drift: d, limit: NORM_DRIFT_LIMIT, dt });
                }
            }
            t = stop;
            if is_wanted(stop) {
                record(stop, &psi);
            }
        }
    }
    let final_state = StateVector::from_amplitudes(psi0.n_sites(), psi0.n_levels(), psi)?;
    Ok((final_state, drift))
}

/// Evolves `ψ0` over the full schedule, recording snapshots.
pub fn evolve(psi0: &StateVector, ctx: &HamiltonianContext, dt: f64, record_times: &[f64]) -> Result<Trajectory> {
    evolve_until(psi0, ctx, dt, ctx.schedule.duration, record_times)
}

/// As [`evolve`] but stopping at `t_end`; the final state is always the
/// last snapshot.
pub fn evolve_until(
    psi0: &StateVector,
    ctx: &HamiltonianContext,
    dt: f64,
    t_end: f64,
    record_times: &[f64],
) -> Result<Trajectory> {
    let mut times = Vec::new();
    let mut states = Vec::new();
    let (n, l) = (psi0.n_sites(), psi0.n_levels());
    let (last, norm_drift) = integrate(psi0, ctx, dt, t_end, record_times, |t, amps| {
        times.push(t);
        states.push(StateVector::from_amplitudes(n, l, amps.to_vec()).expect("matching dimension"));
    })?;
    if times.last().is_none_or(|&t| t < t_end) {
        times.push(t_end);
        states.push(last);
    }
    Ok(Trajectory { times, states, norm_drift })
}

/// Evolves the all-ground state while keeping only target probabilities.
pub fn objective_tracking_evolve(
    ctx: &HamiltonianContext,
    targets: &[BasisIndex],
    dt: f64,
    record_times: &[f64],
    top_k: usize,
) -> Result<TrackedTrajectory> {
    let psi0 = StateVector::ground(ctx.n_sites, ctx.n_levels())?;
    tracking_evolve_from(&psi0, ctx, targets, dt, record_times, top_k)
}

pub fn tracking_evolve_from(
    psi0: &StateVector,
    ctx: &HamiltonianContext,
    targets: &[BasisIndex],
    dt: f64,
    record_times: &[f64],
    top_k: usize,
) -> Result<TrackedTrajectory> {
    if let Some(bad) = targets.iter().find(|t| t.0 >= ctx.dim) {
        return Err(Error::IndexOutOfRange { index: bad.0, dimension: ctx.dim });
    }
    let mut times = Vec::new();
    let mut probabilities = Vec::new();
    let (final_state, norm_drift) = integrate(psi0, ctx, dt, ctx.schedule.duration, record_times, |t, amps| {
        times.push(t);
        probabilities.push(targets.iter().map(|i| amps[i.0].norm_sqr()).collect());
    })?;
    let top_k = rank_states(&final_state, top_k);
    Ok(TrackedTrajectory { times, targets: targets.to_vec(), probabilities, top_k, norm_drift, final_state })
}

/// The `k` most probable basis states, ties broken by lower index.
pub fn rank_states(state: &StateVector, k: usize) -> Vec<RankedState> {
    let mut best: Vec<(f64, usize)> = Vec::with_capacity(k + 1);
    if k > 0 {
        for (idx, a) in state.amplitudes().iter().enumerate() {
            let p = a.norm_sqr();
            if best.len() == k && p <= best[k - 1].0 {
                continue;
            }
            let pos = best.partition_point(|&(q, _)| q >= p);
            best.insert(pos, (p, idx));
            best.truncate(k);
        }
    }
    let (n, radix) = (state.n_sites(), state.levels_per_site());
    best.into_iter()
        .map(|(probability, index)| {
            let mut digits = vec![0u8; n];
            decode_into(index, radix, &mut digits);
            RankedState { state_label: Occupancies(digits).label(), index, probability }
        })
        .collect()
}
