//! Seeded generators for random walks, unitaries and states.
//!
//! Used by the property tests and the acceptance suite; everything takes an
//! explicit RNG so instances are reproducible.

use std::collections::BTreeMap;

use nalgebra::DMatrix;
use num_complex::Complex64;
use rand::Rng;
use rand_distr::StandardNormal;

use crate::matrix::{c64, ComplexMatrix, ComplexVector};
use crate::walk::{BlockDiagonalState, OpenQuantumWalk};
use crate::NodeId;

fn gaussian<R: Rng + ?Sized>(rng: &mut R) -> Complex64 {
    let re: f64 = rng.sample(StandardNormal);
    let im: f64 = rng.sample(StandardNormal);
    c64(re, im)
}

fn gaussian_matrix<R: Rng + ?Sized>(rng: &mut R, rows: usize, cols: usize) -> DMatrix<Complex64> {
    DMatrix::from_fn(rows, cols, |_, _| gaussian(rng))
}

pub fn random_vector<R: Rng + ?Sized>(rng: &mut R, dim: usize) -> ComplexVector {
    let v = ComplexVector::from_fn(dim, |_, _| gaussian(rng));
    let n = v.norm();
    v / c64(n, 0.0)
}

/// Haar-ish unitary from the QR factor of a complex Gaussian matrix.
pub fn random_unitary<R: Rng + ?Sized>(rng: &mut R, dim: usize) -> ComplexMatrix {
    let q = gaussian_matrix(rng, dim, dim).qr().q();
    ComplexMatrix::new(q).expect("square")
}

/// `count` operators `B_k` of size `dim` with `sum_k B_k† B_k = I`.
pub fn random_kraus_family<R: Rng + ?Sized>(
    rng: &mut R,
    count: usize,
    dim: usize,
) -> Vec<ComplexMatrix> {
    let q = gaussian_matrix(rng, count * dim, dim).qr().q();
    (0..count)
        .map(|k| ComplexMatrix::new(q.rows(k * dim, dim).into_owned()).expect("square"))
        .collect()
}

/// Random valid walk: each source gets a random non-empty set of targets.
pub fn random_walk<R: Rng + ?Sized>(
    rng: &mut R,
    nodes: &[NodeId],
    coin_dim: usize,
) -> OpenQuantumWalk {
    let mut transitions = Vec::new();
    for &from in nodes {
        let mut targets: Vec<NodeId> = nodes
            .iter()
            .copied()
            .filter(|_| rng.random_bool(0.6))
            .collect();
        if targets.is_empty() {
            targets.push(nodes[rng.random_range(0..nodes.len())]);
        }
        let ops = random_kraus_family(rng, targets.len(), coin_dim);
        transitions.extend(targets.into_iter().zip(ops).map(|(to, op)| (from, to, op)));
    }
    OpenQuantumWalk::new(coin_dim, nodes.to_vec(), transitions).expect("structurally valid")
}

/// Random density matrix of full rank with unit trace.
pub fn random_density<R: Rng + ?Sized>(rng: &mut R, dim: usize) -> ComplexMatrix {
    let g = gaussian_matrix(rng, dim, dim);
    let rho = &g * g.adjoint();
    let tr = rho.trace().re;
    ComplexMatrix::new(rho / c64(tr, 0.0))
        .expect("square")
        .hermitian_part()
}

/// Random block-diagonal state supported on every node in `nodes`.
pub fn random_block_state<R: Rng + ?Sized>(
    rng: &mut R,
    nodes: &[NodeId],
    coin_dim: usize,
) -> BlockDiagonalState {
    let weights: Vec<f64> = nodes.iter().map(|_| rng.random::<f64>() + 0.05).collect();
    let total: f64 = weights.iter().sum();
    let blocks: BTreeMap<_, _> = nodes
        .iter()
        .zip(weights)
        .map(|(&n, w)| (n, random_density(rng, coin_dim).scale(w / total)))
        .collect();
    BlockDiagonalState::from_blocks(coin_dim, blocks).expect("consistent dims")
}

/// Random row-stochastic matrix; each entry is zero with probability 1/4.
pub fn random_stochastic_rows<R: Rng + ?Sized>(rng: &mut R, n: usize) -> Vec<Vec<f64>> {
    (0..n)
        .map(|_| {
            let mut row: Vec<f64> = (0..n)
                .map(|_| {
                    if rng.random_bool(0.25) {
                        0.0
                    } else {
                        rng.random::<f64>()
                    }
                })
                .collect();
            if row.iter().all(|&x| x == 0.0) {
                row[rng.random_range(0..n)] = 1.0;
            }
            let s: f64 = row.iter().sum();
            row.iter_mut().for_each(|x| *x /= s);
            row
        })
        .collect()
}
