//! Mixed-radix product basis for `N` sites with `L + 1` local levels.
//!
//! Site 0 is the least-significant digit of a [`BasisIndex`]. Labels print
//! site 0 leftmost, so `encode([1, 0, 0])` is index 1 and reads `"100"`.

use num_complex::Complex64;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Default cap on the bytes a single dense state vector may occupy (6 GiB).
pub const DEFAULT_MEMORY_CAP: u64 = 6 * 1024 * 1024 * 1024;

/// Dimensions above this are allowed but reported as long runs.
pub const LONG_RUN_DIMENSION: usize = 1 << 22;

const BYTES_PER_AMPLITUDE: u128 = 16;

/// Chunk length for parallel maps and fixed-order reductions.
pub(crate) const CHUNK: usize = 1 << 12;

/// Index of a product state in the mixed-radix basis.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub struct BasisIndex(pub usize);

impl BasisIndex {
    pub fn value(self) -> usize {
        self.0
    }
}

/// Per-site level codes: 0 is ground, `j >= 1` the j-th Rydberg level.
#[derive(Debug, Clone, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct Occupancies(pub Vec<u8>);

impl Occupancies {
    pub fn ground(n_sites: usize) -> Self {
        Occupancies(vec![0; n_sites])
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }

    pub fn codes(&self) -> &[u8] {
        &self.0
    }

    /// Sites holding any Rydberg excitation.
    pub fn excited_sites(&self) -> Vec<usize> {
        self.0
            .iter()
            .enumerate()
            .filter(|(_, &c)| c > 0)
            .map(|(i, _)| i)
            .collect()
    }

    /// Full level-code label, e.g. `"0102"`.
    pub fn label(&self) -> String {
        self.0
            .iter()
            .map(|&c| char::from_digit(c as u32, 36).unwrap_or('?'))
            .collect()
    }

    /// `r`/`g` view. With a filter only that level prints as `r`.
    pub fn rg_label(&self, level_filter: Option<u8>) -> String {
        self.0
            .iter()
            .map(|&c| {
                let hit = match level_filter {
                    Some(level) => c == level,
                    None => c > 0,
                };
                if hit {
                    'r'
                } else {
                    'g'
                }
            })
            .collect()
    }

    /// Parses a full level-code label such as `"0102"`.
    pub fn from_label(label: &str) -> Result<Self> {
        label
            .chars()
            .map(|ch| {
                ch.to_digit(36)
                    .map(|d| d as u8)
                    .ok_or_else(|| Error::InvalidShape(format!("bad level code `{ch}` in `{label}`")))
            })
            .collect::<Result<Vec<u8>>>()
            .map(Occupancies)
    }
}

/// Dimension of the product space, checked against [`DEFAULT_MEMORY_CAP`].
pub fn dimension(n_sites: usize, levels_per_site: usize) -> Result<usize> {
    dimension_with_cap(n_sites, levels_per_site, DEFAULT_MEMORY_CAP)
}

pub fn dimension_with_cap(n_sites: usize, levels_per_site: usize, cap_bytes: u64) -> Result<usize> {
    if n_sites < 1 {
        return Err(Error::InvalidShape("need at least one site".into()));
    }
    if levels_per_site < 2 {
        return Err(Error::InvalidShape("need at least two levels per site".into()));
    }
    let mut dim: u128 = 1;
    for _ in 0..n_sites {
        dim = dim.saturating_mul(levels_per_site as u128);
    }
    let bytes = dim.saturating_mul(BYTES_PER_AMPLITUDE);
    if bytes > cap_bytes as u128 || dim > usize::MAX as u128 {
        return Err(Error::CapacityExceeded { dimension: dim, bytes, limit: cap_bytes });
    }
    Ok(dim as usize)
}

pub fn encode(occ: &Occupancies, levels_per_site: usize) -> Result<BasisIndex> {
    let mut index = 0usize;
    for (site, &code) in occ.0.iter().enumerate().rev() {
        if code as usize >= levels_per_site {
            return Err(Error::InvalidOccupancy { site, code, levels_per_site });
        }
        index = index * levels_per_site + code as usize;
    }
    Ok(BasisIndex(index))
}

pub fn decode(index: BasisIndex, n_sites: usize, levels_per_site: usize) -> Result<Occupancies> {
    let dim = dimension_with_cap(n_sites, levels_per_site, u64::MAX)?;
    if index.0 >= dim {
        return Err(Error::IndexOutOfRange { index: index.0, dimension: dim });
    }
    let mut occ = vec![0u8; n_sites];
    decode_into(index.0, levels_per_site, &mut occ);
    Ok(Occupancies(occ))
}

/// Unchecked decode into an existing digit buffer.
pub(crate) fn decode_into(mut index: usize, radix: usize, digits: &mut [u8]) {
    for d in digits.iter_mut() {
        *d = (index % radix) as u8;
        index /= radix;
    }
}

/// Advances `digits` to the next index (odometer increment).
#[inline]
pub(crate) fn increment(digits: &mut [u8], radix: u8) {
    for d in digits.iter_mut() {
        *d += 1;
        if *d < radix {
            return;
        }
        *d = 0;
    }
}

/// Counts excited sites; with a filter, only sites in that level.
pub fn rydberg_count(occ: &Occupancies, level_filter: Option<u8>) -> usize {
    match level_filter {
        Some(level) => occ.0.iter().filter(|&&c| c == level).count(),
        None => occ.0.iter().filter(|&&c| c > 0).count(),
    }
}

/// Dense amplitudes over the `(L + 1)^N` product basis.
#[derive(Debug, Clone, PartialEq)]
pub struct StateVector {
    amplitudes: Vec<Complex64>,
    n_sites: usize,
    n_levels: usize,
}

impl StateVector {
    /// All sites in the ground state.
    pub fn ground(n_sites: usize, n_levels: usize) -> Result<Self> {
        Self::basis_state(n_sites, n_levels, BasisIndex(0))
    }

    pub fn basis_state(n_sites: usize, n_levels: usize, index: BasisIndex) -> Result<Self> {
        let dim = dimension(n_sites, n_levels + 1)?;
        if index.0 >= dim {
            return Err(Error::IndexOutOfRange { index: index.0, dimension: dim });
        }
        let mut amplitudes = vec![Complex64::new(0.0, 0.0); dim];
        amplitudes[index.0] = Complex64::new(1.0, 0.0);
        Ok(StateVector { amplitudes, n_sites, n_levels })
    }

    pub fn from_amplitudes(n_sites: usize, n_levels: usize, amplitudes: Vec<Complex64>) -> Result<Self> {
        let dim = dimension(n_sites, n_levels + 1)?;
        if amplitudes.len() != dim {
            return Err(Error::DimensionMismatch { expected: dim, actual: amplitudes.len() });
        }
        Ok(StateVector { amplitudes, n_sites, n_levels })
    }

    /// Equal-weight superposition of the given basis states.
    pub fn superposition(n_sites: usize, n_levels: usize, indices: &[BasisIndex]) -> Result<Self> {
        let mut state = Self::basis_state(n_sites, n_levels, BasisIndex(0))?;
        state.amplitudes[0] = Complex64::new(0.0, 0.0);
        if indices.is_empty() {
            return Err(Error::InvalidShape("empty superposition".into()));
        }
        let weight = 1.0 / (indices.len() as f64).sqrt();
        let dimension = state.dim();
        for idx in indices {
            let slot = state
                .amplitudes
                .get_mut(idx.0)
                .ok_or(Error::IndexOutOfRange { index: idx.0, dimension })?;
            *slot += Complex64::new(weight, 0.0);
        }
        Ok(state)
    }

    pub fn n_sites(&self) -> usize {
        self.n_sites
    }

    /// Rydberg levels per site (`L`).
    pub fn n_levels(&self) -> usize {
        self.n_levels
    }

    pub fn levels_per_site(&self) -> usize {
        self.n_levels + 1
    }

    pub fn dim(&self) -> usize {
        self.amplitudes.len()
    }

    pub fn amplitudes(&self) -> &[Complex64] {
        &self.amplitudes
    }

    pub fn amplitudes_mut(&mut self) -> &mut [Complex64] {
        &mut self.amplitudes
    }

    pub fn into_amplitudes(self) -> Vec<Complex64> {
        self.amplitudes
    }

    pub fn probability(&self, index: BasisIndex) -> f64 {
        self.amplitudes.get(index.0).map_or(0.0, |a| a.norm_sqr())
    }

    pub fn norm_sqr(&self) -> f64 {
        norm_sqr(&self.amplitudes)
    }

    pub fn norm(&self) -> f64 {
        self.norm_sqr().sqrt()
    }

    /// `<self|other>`, summed in fixed chunk order.
    pub fn inner(&self, other: &StateVector) -> Result<Complex64> {
        if self.dim() != other.dim() {
            return Err(Error::DimensionMismatch { expected: self.dim(), actual: other.dim() });
        }
        Ok(inner(&self.amplitudes, &other.amplitudes))
    }
}

/// Squared 2-norm with a worker-count independent summation order.
pub(crate) fn norm_sqr(v: &[Complex64]) -> f64 {
    let partials: Vec<f64> = v
        .par_chunks(CHUNK)
        .map(|c| c.iter().map(|a| a.norm_sqr()).sum::<f64>())
        .collect();
    partials.iter().sum()
}

pub(crate) fn inner(a: &[Complex64], b: &[Complex64]) -> Complex64 {
    let partials: Vec<Complex64> = a
        .par_chunks(CHUNK)
        .zip(b.par_chunks(CHUNK))
        .map(|(x, y)| x.iter().zip(y).map(|(p, q)| p.conj() * q).sum::<Complex64>())
        .collect();
    partials.iter().sum()
}
