//! Classical random walks embedded as open quantum walks.
//!
//! `P[from][to]` is the probability of a jump `from -> to`; each row sums to
//! one. Choosing `B(from -> to) = sqrt(P[from][to]) U(from -> to)` with
//! unitary `U` gives a valid walk whose node distribution follows the
//! classical chain whatever the unitaries are.

use std::collections::BTreeMap;

use crate::error::{OqwError, Result};
use crate::matrix::ComplexMatrix;
use crate::walk::OpenQuantumWalk;
use crate::NodeId;

pub const STOCHASTIC_TOL: f64 = 1e-12;

/// Row-stochastic transition matrix over nodes `0..n`.
#[derive(Debug, Clone, PartialEq)]
pub struct ClassicalTransitionMatrix {
    rows: Vec<Vec<f64>>,
}

impl ClassicalTransitionMatrix {
    pub fn new(rows: Vec<Vec<f64>>) -> Result<Self> {
        let n = rows.len();
        if n == 0 {
            return Err(OqwError::InvalidParameter("empty transition matrix".into()));
        }
        for (from, row) in rows.iter().enumerate() {
            if row.len() != n {
                return Err(OqwError::DimensionMismatch {
                    context: format!("row {from} of the transition matrix"),
                    expected: n,
                    found: row.len(),
                });
            }
            if let Some(&bad) = row.iter().find(|x| !x.is_finite()) {
                return Err(OqwError::NonFinite(format!(
                    "transition matrix row {from} ({bad})"
                )));
            }
            if let Some(&bad) = row.iter().find(|&&x| !(0.0..=1.0).contains(&x)) {
                return Err(OqwError::InvalidParameter(format!(
                    "transition probability {bad} in row {from} outside [0, 1]"
                )));
            }
            let s: f64 = row.iter().sum();
            if (s - 1.0).abs() > STOCHASTIC_TOL {
                return Err(OqwError::InvalidParameter(format!(
                    "row {from} of the transition matrix sums to {s}"
                )));
            }
        }
        Ok(Self { rows })
    }

    pub fn size(&self) -> usize {
        self.rows.len()
    }

    /// Probability of the jump `from -> to`.
    pub fn prob(&self, from: usize, to: usize) -> f64 {
        self.rows[from][to]
    }

    pub fn rows(&self) -> &[Vec<f64>] {
        &self.rows
    }
}

/// Coin attached to each edge of the embedding.
#[derive(Debug, Clone, PartialEq)]
pub enum CoinChoice {
    /// One-dimensional coins `sqrt(P)`.
    Scalar,
    /// Identity coins of the given dimension.
    Identity(usize),
    /// Unitaries per edge `(from, to)`; missing edges get the identity.
    Unitaries {
        dim: usize,
        family: BTreeMap<(NodeId, NodeId), ComplexMatrix>,
    },
}

pub fn embed_classical(
    p: &ClassicalTransitionMatrix,
    coins: &CoinChoice,
) -> Result<OpenQuantumWalk> {
    let n = p.size();
    let dim = match coins {
        CoinChoice::Scalar => 1,
        CoinChoice::Identity(d) | CoinChoice::Unitaries { dim: d, .. } => *d,
    };
    if dim == 0 {
        return Err(OqwError::InvalidParameter(
            "coin dimension must be positive".into(),
        ));
    }
    if let CoinChoice::Unitaries { family, .. } = coins {
        for (&(from, to), u) in family {
            if u.dim() != dim {
                return Err(OqwError::DimensionMismatch {
                    context: format!("unitary on edge {from} -> {to}"),
                    expected: dim,
                    found: u.dim(),
                });
            }
            let defect = u.unitarity_defect();
            if defect > crate::walk::DEFAULT_KRAUS_TOL {
                return Err(OqwError::NotUnitary {
                    context: format!("coin on edge {from} -> {to}"),
                    defect,
                });
            }
        }
    }
    let identity = ComplexMatrix::identity(dim);
    let mut transitions = Vec::new();
    for from in 0..n {
        for to in 0..n {
            let prob = p.prob(from, to);
            if prob == 0.0 {
                continue;
            }
            let key = (from as NodeId, to as NodeId);
            let u = match coins {
                CoinChoice::Unitaries { family, .. } => family.get(&key).unwrap_or(&identity),
                _ => &identity,
            };
            transitions.push((key.0, key.1, u.scale(prob.sqrt())));
        }
    }
    OpenQuantumWalk::new(dim, (0..n as NodeId).collect(), transitions)
}

/// `p_{n+1}(i) = sum_k P[k][i] p_n(k)`, iterated `n` times.
pub fn classical_marginal(
    p: &ClassicalTransitionMatrix,
    initial: &BTreeMap<NodeId, f64>,
    n: usize,
) -> Result<BTreeMap<NodeId, f64>> {
    let size = p.size();
    let mut masses = vec![0.0; size];
    for (&node, &m) in initial {
        let idx = usize::try_from(node)
            .ok()
            .filter(|&i| i < size)
            .ok_or(OqwError::UnknownNode(node))?;
        masses[idx] = m;
    }
    for _ in 0..n {
        let mut next = vec![0.0; size];
        for (k, &mk) in masses.iter().enumerate() {
            for (i, slot) in next.iter_mut().enumerate() {
                *slot += p.prob(k, i) * mk;
            }
        }
        masses = next;
    }
    Ok(masses
        .into_iter()
        .enumerate()
        .map(|(i, m)| (i as NodeId, m))
        .collect())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::walk::{evolve, node_distribution, validate_walk, BlockDiagonalState};

    fn swap() -> ClassicalTransitionMatrix {
        ClassicalTransitionMatrix::new(vec![vec![0.0, 1.0], vec![1.0, 0.0]]).unwrap()
    }

    #[test]
    fn rejects_bad_matrices() {
        assert!(ClassicalTransitionMatrix::new(vec![vec![0.5, 0.4], vec![0.0, 1.0]]).is_err());
        assert!(ClassicalTransitionMatrix::new(vec![vec![1.5, -0.5], vec![0.0, 1.0]]).is_err());
        assert!(ClassicalTransitionMatrix::new(vec![vec![1.0]; 2]).is_err());
        assert!(ClassicalTransitionMatrix::new(vec![vec![f64::NAN]]).is_err());
    }

    #[test]
    fn swap_alternates() {
        let walk = embed_classical(&swap(), &CoinChoice::Scalar).unwrap();
        assert!(validate_walk(&walk, 1e-12).passed());
        let state = BlockDiagonalState::localized(0, ComplexMatrix::identity(1)).unwrap();
        for n in 0..5 {
            let d = node_distribution(&evolve(&walk, &state, n).unwrap());
            let at = (n % 2) as NodeId;
            assert!((d[&at] - 1.0).abs() < 1e-15, "step {n}");
        }
        let m = classical_marginal(&swap(), &BTreeMap::from([(0, 1.0)]), 1).unwrap();
        assert_eq!(m, BTreeMap::from([(0, 0.0), (1, 1.0)]));
        let m = classical_marginal(&swap(), &BTreeMap::from([(0, 1.0)]), 2).unwrap();
        assert_eq!(m, BTreeMap::from([(0, 1.0), (1, 0.0)]));
    }

    #[test]
    fn direction_convention_is_row_to_column() {
        // node 0 always goes to 1, node 1 stays
        let p = ClassicalTransitionMatrix::new(vec![vec![0.0, 1.0], vec![0.0, 1.0]]).unwrap();
        let walk = embed_classical(&p, &CoinChoice::Identity(2)).unwrap();
        assert!(walk.transition(0, 1).is_some());
        assert!(walk.transition(1, 0).is_none());
        let m = classical_marginal(&p, &BTreeMap::from([(0, 1.0)]), 1).unwrap();
        assert_eq!(m[&1], 1.0);
    }

    #[test]
    fn zero_marginal_steps_returns_input() {
        let p = ClassicalTransitionMatrix::new(vec![vec![0.2, 0.8], vec![0.5, 0.5]]).unwrap();
        let init = BTreeMap::from([(0, 0.3), (1, 0.7)]);
        assert_eq!(classical_marginal(&p, &init, 0).unwrap(), init);
        assert!(classical_marginal(&p, &BTreeMap::from([(5, 1.0)]), 1).is_err());
    }

    #[test]
    fn non_unitary_coin_is_rejected() {
        let family = BTreeMap::from([((0, 1), ComplexMatrix::identity(2).scale(0.5))]);
        let err = embed_classical(&swap(), &CoinChoice::Unitaries { dim: 2, family }).unwrap_err();
        assert!(matches!(err, OqwError::NotUnitary { .. }));
    }
}
