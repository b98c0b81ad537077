//! Discrete-time open quantum walks.
//!
//! The crate covers exact evolution of the completely positive walk map on
//! finite graphs ([`walk`]) and on the integer line ([`lattice`]), pure-state
//! and density-valued trajectory sampling ([`trajectories`]), the unitary
//! dilation of a walk step and the coherent walk it reduces to
//! ([`dilation`]), the embedding of classical Markov chains
//! ([`classical`]), and the walk formulation of dissipative quantum
//! computing ([`dqc`]).

pub mod classical;
pub mod dilation;
pub mod dqc;
pub mod error;
pub mod gates;
pub mod io;
pub mod lattice;
pub mod matrix;
pub mod random;
pub mod table;
pub mod trajectories;
pub mod walk;

/// Opaque node identifier.
pub type NodeId = i64;

pub use error::{OqwError, Result};
pub use matrix::{c64, ComplexMatrix, ComplexVector};
pub use walk::{
    apply_full_map, evolve, node_distribution, step, validate_walk, BlockDiagonalState, FullState,
    OpenQuantumWalk, Transitions, ValidationReport,
};

/// Total variation distance `1/2 sum |p - q|` between two distributions.
pub fn total_variation(
    p: &std::collections::BTreeMap<NodeId, f64>,
    q: &std::collections::BTreeMap<NodeId, f64>,
) -> f64 {
    let mut sum = 0.0;
    for (node, a) in p {
        sum += (a - q.get(node).copied().unwrap_or(0.0)).abs();
    }
    for (node, b) in q {
        if !p.contains_key(node) {
            sum += b.abs();
        }
    }
    0.5 * sum
}
