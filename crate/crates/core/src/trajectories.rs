//! Quantum-trajectory unravelling of open quantum walks.
//!
//! A walker in the pure state `|phi> (x) |i>` jumps to node `j` with
//! probability `||B(i->j) phi||^2` and continues in the renormalized state.
//! Averaged over jumps this reproduces the exact walk map. The same holds
//! for the density-valued chain obtained by measuring the position after
//! every step.
//!
//! Sampling is reproducible: trajectory `k` of an ensemble with seed `s`
//! draws from ChaCha8 stream `k` of key `s`, so results do not depend on how
//! rayon schedules the work.

use std::collections::BTreeMap;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;

use crate::error::{OqwError, Result};
use crate::matrix::{c64, ComplexMatrix, ComplexVector};
use crate::walk::{BlockDiagonalState, Transitions};
use crate::NodeId;

pub const NORM_TOL: f64 = 1e-12;

#[derive(Debug, Clone, PartialEq)]
pub struct PureWalkerState {
    amplitude: ComplexVector,
    node: NodeId,
}

impl PureWalkerState {
    pub fn new(amplitude: ComplexVector, node: NodeId) -> Result<Self> {
        if amplitude.is_empty() {
            return Err(OqwError::InvalidState("empty coin vector".into()));
        }
        if amplitude
            .iter()
            .any(|z| !z.re.is_finite() || !z.im.is_finite())
        {
            return Err(OqwError::NonFinite("coin vector".into()));
        }
        let norm = amplitude.norm();
        if (norm - 1.0).abs() > NORM_TOL {
            return Err(OqwError::InvalidState(format!(
                "coin vector norm {norm} is not 1"
            )));
        }
        Ok(Self { amplitude, node })
    }

    /// Rescales a nonzero vector to unit norm.
    pub fn normalized(amplitude: ComplexVector, node: NodeId) -> Result<Self> {
        let norm = amplitude.norm();
        if norm.is_nan() || norm <= 0.0 || !norm.is_finite() {
            return Err(OqwError::InvalidState(
                "coin vector has zero or non-finite norm".into(),
            ));
        }
        Self::new(amplitude / c64(norm, 0.0), node)
    }

    pub fn amplitude(&self) -> &ComplexVector {
        &self.amplitude
    }

    pub fn node(&self) -> NodeId {
        self.node
    }

    /// `|phi><phi|` as a state localized at the walker's node.
    pub fn to_block_state(&self) -> BlockDiagonalState {
        BlockDiagonalState::from_blocks(
            self.amplitude.len(),
            BTreeMap::from([(self.node, ComplexMatrix::outer(&self.amplitude))]),
        )
        .expect("consistent dimension")
    }
}

/// One possible jump: target, probability and the unnormalized `B phi`.
#[derive(Debug, Clone)]
pub struct Branch {
    pub target: NodeId,
    pub probability: f64,
    pub unnormalized: ComplexVector,
}

fn check_dim<W: Transitions + ?Sized>(walk: &W, dim: usize) -> Result<()> {
    if walk.coin_dim() != dim {
        return Err(OqwError::DimensionMismatch {
            context: "walker coin vector".into(),
            expected: walk.coin_dim(),
            found: dim,
        });
    }
    Ok(())
}

/// All jumps out of the walker's node, ascending by target.
pub fn branches<W: Transitions + ?Sized>(walk: &W, state: &PureWalkerState) -> Result<Vec<Branch>> {
    check_dim(walk, state.amplitude.len())?;
    if !walk.contains(state.node) {
        return Err(OqwError::UnknownNode(state.node));
    }
    let mut out = Vec::with_capacity(2);
    walk.for_each_from(state.node, &mut |target, op| {
        let unnormalized = op.apply(&state.amplitude);
        let probability = unnormalized.norm_squared();
        out.push(Branch {
            target,
            probability,
            unnormalized,
        });
    });
    Ok(out)
}

/// `p(j) = ||B(i->j) phi||^2` for the walker's current node `i`.
pub fn jump_probabilities<W: Transitions + ?Sized>(
    walk: &W,
    state: &PureWalkerState,
) -> Result<BTreeMap<NodeId, f64>> {
    Ok(branches(walk, state)?
        .into_iter()
        .map(|b| (b.target, b.probability))
        .collect())
}

/// Inverse-CDF selection with a single uniform draw over `weights`.
fn select<R: Rng + ?Sized>(
    rng: &mut R,
    weights: impl Iterator<Item = f64> + Clone,
) -> Result<usize> {
    let total: f64 = weights.clone().sum();
    if total.is_nan() || total <= 0.0 {
        return Err(OqwError::Invariant("all jump probabilities vanish".into()));
    }
    let u = rng.random::<f64>() * total;
    let mut acc = 0.0;
    let mut last_positive = 0;
    for (k, w) in weights.enumerate() {
        if w <= 0.0 {
            continue;
        }
        acc += w;
        last_positive = k;
        if u < acc {
            return Ok(k);
        }
    }
    Ok(last_positive)
}

pub fn trajectory_step<W: Transitions + ?Sized, R: Rng + ?Sized>(
    walk: &W,
    state: &PureWalkerState,
    rng: &mut R,
) -> Result<PureWalkerState> {
    let mut b = branches(walk, state)?;
    let k = select(rng, b.iter().map(|x| x.probability))?;
    let chosen = b.swap_remove(k);
    let amplitude = chosen.unnormalized / c64(chosen.probability.sqrt(), 0.0);
    Ok(PureWalkerState {
        amplitude,
        node: chosen.target,
    })
}

/// The generator used for trajectory `stream` of an ensemble seeded by `seed`.
pub fn trajectory_rng(seed: u64, stream: u64) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(stream);
    rng
}

#[derive(Debug, Clone, PartialEq)]
pub struct TrajectoryRecord {
    pub seed: u64,
    pub stream: u64,
    /// Node after each step, starting with the initial node.
    pub positions: Vec<NodeId>,
    pub final_state: PureWalkerState,
}

pub fn run_trajectory<W: Transitions + ?Sized>(
    walk: &W,
    initial: &PureWalkerState,
    n_steps: usize,
    seed: u64,
    stream: u64,
) -> Result<TrajectoryRecord> {
    let mut rng = trajectory_rng(seed, stream);
    let mut state = initial.clone();
    let mut positions = Vec::with_capacity(n_steps + 1);
    positions.push(state.node);
    for _ in 0..n_steps {
        state = trajectory_step(walk, &state, &mut rng)?;
        positions.push(state.node);
    }
    Ok(TrajectoryRecord {
        seed,
        stream,
        positions,
        final_state: state,
    })
}

fn final_node<W: Transitions + ?Sized>(
    walk: &W,
    initial: &PureWalkerState,
    n_steps: usize,
    seed: u64,
    stream: u64,
) -> Result<NodeId> {
    let mut rng = trajectory_rng(seed, stream);
    let mut state = initial.clone();
    for _ in 0..n_steps {
        state = trajectory_step(walk, &state, &mut rng)?;
    }
    Ok(state.node)
}

/// The first `count` trajectories of the ensemble with this seed, with
/// full position histories.
pub fn sample_paths<W: Transitions + ?Sized>(
    walk: &W,
    initial: &PureWalkerState,
    n_steps: usize,
    count: usize,
    seed: u64,
) -> Result<Vec<TrajectoryRecord>> {
    (0..count as u64)
        .map(|k| run_trajectory(walk, initial, n_steps, seed, k))
        .collect()
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct EnsembleEstimate {
    pub counts: BTreeMap<NodeId, u64>,
    pub n_trajectories: u64,
}

impl EnsembleEstimate {
    pub fn distribution(&self) -> BTreeMap<NodeId, f64> {
        let n = self.n_trajectories as f64;
        self.counts
            .iter()
            .map(|(&k, &c)| (k, c as f64 / n))
            .collect()
    }
}

fn merge_counts(mut a: BTreeMap<NodeId, u64>, b: BTreeMap<NodeId, u64>) -> BTreeMap<NodeId, u64> {
    for (k, c) in b {
        *a.entry(k).or_insert(0) += c;
    }
    a
}

/// Final-position histogram of `n_traj` independent trajectories.
pub fn run_ensemble<W: Transitions + ?Sized>(
    walk: &W,
    initial: &PureWalkerState,
    n_steps: usize,
    n_traj: u64,
    seed: u64,
) -> Result<EnsembleEstimate> {
    if n_traj == 0 {
        return Err(OqwError::InvalidParameter(
            "n_traj must be at least 1".into(),
        ));
    }
    check_dim(walk, initial.amplitude.len())?;
    let counts = (0..n_traj)
        .into_par_iter()
        .try_fold(BTreeMap::new, |mut acc, k| {
            let node = final_node(walk, initial, n_steps, seed, k)?;
            *acc.entry(node).or_insert(0u64) += 1;
            Ok::<_, OqwError>(acc)
        })
        .try_reduce(BTreeMap::new, |a, b| Ok(merge_counts(a, b)))?;
    Ok(EnsembleEstimate {
        counts,
        n_trajectories: n_traj,
    })
}

/// Exhaustive average over every jump sequence of length `n`:
/// `sum_paths p(path) |phi_path><phi_path| (x) |node_path>`.
///
/// Cost grows like (out-degree)^n; meant for small checks.
pub fn branch_average<W: Transitions + ?Sized>(
    walk: &W,
    initial: &PureWalkerState,
    n: usize,
) -> Result<BlockDiagonalState> {
    let mut frontier = vec![(1.0, initial.clone())];
    for _ in 0..n {
        let mut next = Vec::new();
        for (p, state) in &frontier {
            for b in branches(walk, state)? {
                if b.probability > 0.0 {
                    let amp = b.unnormalized / c64(b.probability.sqrt(), 0.0);
                    next.push((
                        p * b.probability,
                        PureWalkerState {
                            amplitude: amp,
                            node: b.target,
                        },
                    ));
                }
            }
        }
        frontier = next;
    }
    let d = initial.amplitude.len();
    let mut blocks: BTreeMap<NodeId, ComplexMatrix> = BTreeMap::new();
    for (p, state) in frontier {
        let term = ComplexMatrix::outer(&state.amplitude).scale(p);
        blocks
            .entry(state.node)
            .and_modify(|acc| *acc = &*acc + &term)
            .or_insert(term);
    }
    BlockDiagonalState::from_blocks(d, blocks)
}

/// A possible outcome of measuring the position after one step.
#[derive(Debug, Clone)]
pub struct MeasurementOutcome {
    pub target: NodeId,
    pub probability: f64,
    /// `B rho B† / p`, localized at `target`; `None` when `p = 0`.
    pub conditional: Option<BlockDiagonalState>,
}

/// All outcomes for a state localized at one node, ascending by target.
pub fn measurement_outcomes<W: Transitions + ?Sized>(
    walk: &W,
    state: &BlockDiagonalState,
) -> Result<Vec<MeasurementOutcome>> {
    if state.coin_dim() != walk.coin_dim() {
        return Err(OqwError::DimensionMismatch {
            context: "state coin dimension".into(),
            expected: walk.coin_dim(),
            found: state.coin_dim(),
        });
    }
    let mut support = state.blocks().iter();
    let (node, rho) = match (support.next(), support.next()) {
        (Some(first), None) => first,
        _ => {
            return Err(OqwError::InvalidState(format!(
                "measurement chain needs a state on exactly one node, got {}",
                state.blocks().len()
            )))
        }
    };
    if !walk.contains(*node) {
        return Err(OqwError::UnknownNode(*node));
    }
    let d = state.coin_dim();
    let mut out = Vec::new();
    walk.for_each_from(*node, &mut |target, op| {
        let unnormalized = rho.conjugated_by(op);
        let probability = unnormalized.real_trace();
        let conditional = (probability > 0.0).then(|| {
            BlockDiagonalState::from_blocks(
                d,
                BTreeMap::from([(
                    target,
                    unnormalized.scale(1.0 / probability).hermitian_part(),
                )]),
            )
            .expect("consistent dimension")
        });
        out.push(MeasurementOutcome {
            target,
            probability,
            conditional,
        });
    });
    Ok(out)
}

pub fn measurement_chain_step<W: Transitions + ?Sized, R: Rng + ?Sized>(
    walk: &W,
    state: &BlockDiagonalState,
    rng: &mut R,
) -> Result<BlockDiagonalState> {
    let mut outcomes = measurement_outcomes(walk, state)?;
    let k = select(rng, outcomes.iter().map(|o| o.probability))?;
    outcomes
        .swap_remove(k)
        .conditional
        .ok_or_else(|| OqwError::Invariant("selected a zero-probability outcome".into()))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::lattice::HomogeneousWalkZ;
    use crate::walk::{node_distribution, step, OpenQuantumWalk};

    fn eq16() -> HomogeneousWalkZ {
        let b = ComplexMatrix::from_real_diagonal(&[1.0, 3f64.sqrt() / 2.0, 0.6]);
        let c = ComplexMatrix::from_real_diagonal(&[0.0, 0.5, 0.8]);
        HomogeneousWalkZ::new(b, c, 1e-12).unwrap()
    }

    fn uniform() -> PureWalkerState {
        let s = 1.0 / 3f64.sqrt();
        PureWalkerState::new(ComplexVector::from_element(3, c64(s, 0.0)), 0).unwrap()
    }

    #[test]
    fn basis_state_moves_right_only() {
        let phi = PureWalkerState::new(
            ComplexVector::from_vec(vec![c64(1., 0.), c64(0., 0.), c64(0., 0.)]),
            0,
        )
        .unwrap();
        let p = jump_probabilities(&eq16(), &phi).unwrap();
        assert_eq!(p[&1], 1.0);
        assert_eq!(p[&-1], 0.0);
        let mut rng = trajectory_rng(1, 0);
        for _ in 0..20 {
            let next = trajectory_step(&eq16(), &phi, &mut rng).unwrap();
            assert_eq!(next.node(), 1);
            assert!((next.amplitude()[0] - c64(1.0, 0.0)).norm() < 1e-15);
        }
    }

    #[test]
    fn uniform_coin_probabilities() {
        let p = jump_probabilities(&eq16(), &uniform()).unwrap();
        let right = (1.0 + 0.75 + 9.0 / 25.0) / 3.0;
        let left = (0.25 + 16.0 / 25.0) / 3.0;
        assert!((p[&1] - right).abs() < 1e-15);
        assert!((p[&-1] - left).abs() < 1e-15);
        assert!((p.values().sum::<f64>() - 1.0).abs() < 1e-12);
    }

    #[test]
    fn state_validation() {
        let v = ComplexVector::from_vec(vec![c64(1.0, 0.0), c64(1.0, 0.0)]);
        assert!(PureWalkerState::new(v.clone(), 0).is_err());
        assert!(
            (PureWalkerState::normalized(v, 0)
                .unwrap()
                .amplitude()
                .norm()
                - 1.0)
                .abs()
                < 1e-15
        );
        assert!(PureWalkerState::normalized(ComplexVector::zeros(2), 0).is_err());
    }

    #[test]
    fn same_seed_same_trajectory() {
        let a = run_trajectory(&eq16(), &uniform(), 30, 42, 3).unwrap();
        let b = run_trajectory(&eq16(), &uniform(), 30, 42, 3).unwrap();
        assert_eq!(a, b);
        assert_eq!(a.positions.len(), 31);
        let c = run_trajectory(&eq16(), &uniform(), 30, 42, 4).unwrap();
        assert_ne!(a.positions, c.positions);
    }

    #[test]
    fn zero_steps_keeps_everyone_home() {
        let e = run_ensemble(&eq16(), &uniform(), 0, 50, 1).unwrap();
        assert_eq!(e.counts, BTreeMap::from([(0, 50)]));
        assert!(run_ensemble(&eq16(), &uniform(), 3, 0, 1).is_err());
    }

    #[test]
    fn paths_are_the_ensemble_prefix() {
        let paths = sample_paths(&eq16(), &uniform(), 10, 5, 9).unwrap();
        let e = run_ensemble(&eq16(), &uniform(), 10, 5, 9).unwrap();
        let mut counts = BTreeMap::new();
        for p in &paths {
            *counts.entry(*p.positions.last().unwrap()).or_insert(0) += 1;
        }
        assert_eq!(counts, e.counts);
    }

    #[test]
    fn measurement_chain_requires_localized_state() {
        let mut blocks = BTreeMap::new();
        blocks.insert(0, ComplexMatrix::identity(3).scale(1.0 / 6.0));
        blocks.insert(1, ComplexMatrix::identity(3).scale(1.0 / 6.0));
        let spread = BlockDiagonalState::new(3, blocks).unwrap();
        let mut rng = trajectory_rng(0, 0);
        assert!(matches!(
            measurement_chain_step(&eq16(), &spread, &mut rng),
            Err(OqwError::InvalidState(_))
        ));
    }

    #[test]
    fn measurement_outcome_probabilities() {
        let rho =
            BlockDiagonalState::localized(0, ComplexMatrix::identity(3).scale(1.0 / 3.0)).unwrap();
        let outcomes = measurement_outcomes(&eq16(), &rho).unwrap();
        let b = eq16().right().clone();
        let expected = (&b * &b.adjoint()).real_trace() / 3.0;
        assert_eq!(outcomes[1].target, 1);
        assert!((outcomes[1].probability - expected).abs() < 1e-15);
    }

    #[test]
    fn measurement_average_is_one_step() {
        let h = ComplexMatrix::from_real_rows(&[&[0.6, 0.0], &[0.0, 0.8]]).unwrap();
        let g = ComplexMatrix::from_real_rows(&[&[0.0, 0.6], &[0.8, 0.0]]).unwrap();
        let walk = OpenQuantumWalk::new(
            2,
            vec![1, 2],
            [(1, 1, h.clone()), (1, 2, g.clone()), (2, 1, h), (2, 2, g)],
        )
        .unwrap()
        .validated(1e-12)
        .unwrap();
        let rho = ComplexMatrix::from_row_major(
            2,
            &[c64(0.5, 0.), c64(0.2, 0.1), c64(0.2, -0.1), c64(0.5, 0.)],
        )
        .unwrap();
        let state = BlockDiagonalState::localized(1, rho).unwrap();
        let mut avg: BTreeMap<NodeId, ComplexMatrix> = BTreeMap::new();
        for o in measurement_outcomes(&walk, &state).unwrap() {
            let cond = o.conditional.unwrap();
            for (n, b) in cond.blocks() {
                avg.insert(*n, b.scale(o.probability));
            }
        }
        let avg = BlockDiagonalState::from_blocks(2, avg).unwrap();
        assert!(avg.max_abs_diff(&step(&walk, &state).unwrap()) < 1e-15);
        assert_eq!(
            node_distribution(&avg).keys().collect::<Vec<_>>(),
            vec![&1, &2]
        );
    }
}
