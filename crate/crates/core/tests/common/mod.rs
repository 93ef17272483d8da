//! Dense reference implementations shared by the integration tests.

#![allow(dead_code)]

use nalgebra::{DMatrix, DVector, SymmetricEigen};
use num_complex::Complex64;
use rydex::model::{DriveSchedule, Geometry, LevelSet};

/// Occupation digits of `index`, site 0 first.
pub fn digits(mut index: usize, n_sites: usize, radix: usize) -> Vec<usize> {
    (0..n_sites)
        .map(|_| {
            let d = index % radix;
            index /= radix;
            d
        })
        .collect()
}

pub fn index_of(digits: &[usize], radix: usize) -> usize {
    digits.iter().rev().fold(0, |acc, &d| acc * radix + d)
}

/// Per-level detuning `Δ + Ry/(k_t − δ)² − Ry/(k − δ)²`.
pub fn level_detuning(levels: &LevelSet, delta: f64, level: usize) -> f64 {
    let ry = levels.rydberg_constant();
    let d = levels.quantum_defect();
    let kt = levels.target_n() as f64;
    let k = levels.n_values()[level] as f64;
    if level == levels.target_index() {
        delta
    } else {
        delta + ry / (kt - d).powi(2) - ry / (k - d).powi(2)
    }
}

/// The full real-symmetric Hamiltonian at time `t`, assembled entry by entry.
pub fn dense_hamiltonian(levels: &LevelSet, schedule: &DriveSchedule, geometry: &Geometry, t: f64) -> DMatrix<f64> {
    let n = geometry.n_sites();
    let radix = levels.len() + 1;
    let dim = radix.pow(n as u32);
    let raw = schedule.a * t.powi(3) + schedule.b * t + schedule.c;
    let delta = raw.clamp(schedule.delta_min, schedule.delta_max);
    let mut h = DMatrix::<f64>::zeros(dim, dim);
    for col in 0..dim {
        let occ = digits(col, n, radix);
        let mut diag = 0.0;
        for i in 0..n {
            if occ[i] > 0 {
                diag -= level_detuning(levels, delta, occ[i] - 1);
            }
            for j in (i + 1)..n {
                if occ[i] > 0 && occ[i] == occ[j] {
                    let r = geometry.distance(i, j);
                    diag += levels.c6()[occ[i] - 1] / r.powi(6);
                }
            }
        }
        h[(col, col)] = diag;
        for i in 0..n {
            if occ[i] == 0 {
                for level in 0..levels.len() {
                    let mut up = occ.clone();
                    up[i] = level + 1;
                    let row = index_of(&up, radix);
                    let w = 0.5 * schedule.omega * levels.mu_ratio()[level].sqrt();
                    h[(row, col)] = w;
                    h[(col, row)] = w;
                }
            }
        }
    }
    h
}

pub fn matvec(h: &DMatrix<f64>, psi: &[Complex64]) -> Vec<Complex64> {
    let re = DVector::from_iterator(psi.len(), psi.iter().map(|z| z.re));
    let im = DVector::from_iterator(psi.len(), psi.iter().map(|z| z.im));
    let (hr, hi) = (h * re, h * im);
    hr.iter().zip(hi.iter()).map(|(&a, &b)| Complex64::new(a, b)).collect()
}

/// `exp(−iHt) ψ` through the eigendecomposition of a constant `H`.
pub fn propagate_exact(h: &DMatrix<f64>, psi: &[Complex64], t: f64) -> Vec<Complex64> {
    let eig = SymmetricEigen::new(h.clone());
    let v = &eig.eigenvectors;
    let dim = psi.len();
    let mut coeff = vec![Complex64::new(0.0, 0.0); dim];
    for k in 0..dim {
        let c: Complex64 = (0..dim).map(|r| v[(r, k)] * psi[r]).sum();
        coeff[k] = c * Complex64::from_polar(1.0, -eig.eigenvalues[k] * t);
    }
    (0..dim).map(|r| (0..dim).map(|k| v[(r, k)] * coeff[k]).sum()).collect()
}

/// Deterministic pseudo-random normalized vector.
pub fn random_state(dim: usize, seed: u64) -> Vec<Complex64> {
    let mut s = seed.wrapping_mul(6364136223846793005).wrapping_add(1442695040888963407);
    let mut next = || {
        s = s.wrapping_mul(6364136223846793005).wrapping_add(1442695040888963407);
        ((s >> 11) as f64 / (1u64 << 53) as f64) - 0.5
    };
    let mut v: Vec<Complex64> = (0..dim).map(|_| Complex64::new(next(), next())).collect();
    let norm = v.iter().map(|z| z.norm_sqr()).sum::<f64>().sqrt();
    v.iter_mut().for_each(|z| *z /= norm);
    v
}

pub fn max_abs_diff(a: &[Complex64], b: &[Complex64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| (x - y).norm()).fold(0.0, f64::max)
}
