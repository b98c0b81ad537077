#![allow(dead_code)]

use std::collections::BTreeMap;

use nalgebra::DMatrix;
use num_complex::Complex64;
use oqw_core::lattice::HomogeneousWalkZ;
use oqw_core::{ComplexMatrix, NodeId};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

pub fn rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

/// Diagonal line walk with modes `(1, 0)`, `(sqrt3/2, 1/2)`, `(3/5, 4/5)`.
pub fn three_mode_walk() -> HomogeneousWalkZ {
    let right = ComplexMatrix::from_real_diagonal(&[1.0, 3f64.sqrt() / 2.0, 0.6]);
    let left = ComplexMatrix::from_real_diagonal(&[0.0, 0.5, 0.8]);
    HomogeneousWalkZ::new(right, left, 1e-12).unwrap()
}

/// Binomial walk of `n` steps by dynamic programming over the row of
/// Pascal's triangle, no closed forms involved.
pub fn binomial_walk(n: usize, p_right: f64) -> BTreeMap<NodeId, f64> {
    let mut row = vec![1.0f64];
    for _ in 0..n {
        let mut next = vec![0.0; row.len() + 1];
        for (k, &m) in row.iter().enumerate() {
            next[k] += m * (1.0 - p_right);
            next[k + 1] += m * p_right;
        }
        row = next;
    }
    row.into_iter()
        .enumerate()
        .map(|(k, m)| (2 * k as NodeId - n as NodeId, m))
        .collect()
}

/// Equal-weight mixture of binomial walks.
pub fn binomial_mixture(n: usize, right_probs: &[f64]) -> BTreeMap<NodeId, f64> {
    let w = 1.0 / right_probs.len() as f64;
    let mut out = BTreeMap::new();
    for &p in right_probs {
        for (x, m) in binomial_walk(n, p) {
            *out.entry(x).or_insert(0.0) += w * m;
        }
    }
    out
}

/// Stationary law of the birth-death chain on `0..=t` with forward weight
/// `omega` and holding at both ends, by detailed balance.
pub fn birth_death_stationary(t: usize, omega: f64) -> Vec<f64> {
    let r = omega / (1.0 - omega);
    let raw: Vec<f64> = (0..=t).map(|j| r.powi(j as i32)).collect();
    let z: f64 = raw.iter().sum();
    raw.into_iter().map(|x| x / z).collect()
}

/// `r^T (r - 1) / (r^(T+1) - 1)` with `r = omega / (1 - omega)`.
pub fn last_node_mass(t: usize, omega: f64) -> f64 {
    let r = omega / (1.0 - omega);
    r.powi(t as i32) * (r - 1.0) / (r.powi(t as i32 + 1) - 1.0)
}

/// Dense unitary walk on a ring of `size` sites: coin `w` then a shift
/// moving coin state 0 right and coin state 1 left.
pub fn dense_ring_walk(w: &ComplexMatrix, size: usize) -> DMatrix<Complex64> {
    let dim = 2 * size;
    let mut u = DMatrix::zeros(dim, dim);
    for x in 0..size {
        let right = (x + 1) % size;
        let left = (x + size - 1) % size;
        for k in 0..2 {
            u[(2 * right, 2 * x + k)] = w[(0, k)];
            u[(2 * left + 1, 2 * x + k)] = w[(1, k)];
        }
    }
    u
}
