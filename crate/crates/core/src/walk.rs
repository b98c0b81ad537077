//! Open quantum walks on finite graphs and their exact evolution.
//!
//! A walk assigns a transition operator `B` (acting on the internal coin
//! space) to every directed edge `from -> to`. For each source node the
//! operators leaving it must satisfy `sum_to B† B = I`; a missing edge is
//! the zero operator. States that matter for the dynamics are
//! block-diagonal in the node basis, `rho = sum_i rho_i (x) |i><i|`, and
//! one step maps `rho_i <- sum_j B(j->i) rho_j B(j->i)†`.

use std::collections::BTreeMap;

use crate::error::{OqwError, Result};
use crate::matrix::ComplexMatrix;
use crate::NodeId;

/// Default tolerance for the Kraus completeness check.
pub const DEFAULT_KRAUS_TOL: f64 = 1e-10;
/// Blocks with trace below this are dropped after a step.
pub const DEFAULT_PRUNE_THRESHOLD: f64 = 1e-15;
/// Tolerance used when validating user-supplied states.
pub const STATE_TOL: f64 = 1e-10;
/// Largest `coin_dim * |nodes|` for which the dense product space is built.
pub const MAX_DENSE_PRODUCT_DIM: usize = 1 << 12;

/// Read access to the transition operators of a walk.
///
/// Implemented by finite graph walks and by the homogeneous walk on the
/// integers, so that exact evolution and trajectory sampling share one code
/// path.
pub trait Transitions: Sync {
    fn coin_dim(&self) -> usize;

    fn contains(&self, node: NodeId) -> bool;

    /// Visits every transition leaving `from`, in ascending target order.
    fn for_each_from(&self, from: NodeId, f: &mut dyn FnMut(NodeId, &ComplexMatrix));
}

#[derive(Debug, Clone, PartialEq)]
pub struct OpenQuantumWalk {
    coin_dim: usize,
    nodes: Vec<NodeId>,
    // source -> [(target, B)], sorted by target
    outgoing: BTreeMap<NodeId, Vec<(NodeId, ComplexMatrix)>>,
}

impl OpenQuantumWalk {
    /// Builds a walk after structural checks only (node membership, matrix
    /// sizes, duplicates). Use [`validate_walk`] or [`Self::validated`] for
    /// the completeness condition.
    pub fn new(
        coin_dim: usize,
        nodes: Vec<NodeId>,
        transitions: impl IntoIterator<Item = (NodeId, NodeId, ComplexMatrix)>,
    ) -> Result<Self> {
        if coin_dim == 0 {
            return Err(OqwError::InvalidParameter(
                "coin_dim must be positive".into(),
            ));
        }
        if nodes.is_empty() {
            return Err(OqwError::InvalidParameter(
                "a walk needs at least one node".into(),
            ));
        }
        let mut seen = std::collections::BTreeSet::new();
        for &n in &nodes {
            if !seen.insert(n) {
                return Err(OqwError::Duplicate(format!("node {n}")));
            }
        }
        let mut outgoing: BTreeMap<NodeId, Vec<(NodeId, ComplexMatrix)>> = BTreeMap::new();
        for (from, to, op) in transitions {
            for n in [from, to] {
                if !seen.contains(&n) {
                    return Err(OqwError::UnknownNode(n));
                }
            }
            if op.dim() != coin_dim {
                return Err(OqwError::DimensionMismatch {
                    context: format!("transition {from} -> {to}"),
                    expected: coin_dim,
                    found: op.dim(),
                });
            }
            let edges = outgoing.entry(from).or_default();
            match edges.binary_search_by_key(&to, |(t, _)| *t) {
                Ok(_) => return Err(OqwError::Duplicate(format!("transition {from} -> {to}"))),
                Err(pos) => edges.insert(pos, (to, op)),
            }
        }
        Ok(Self {
            coin_dim,
            nodes,
            outgoing,
        })
    }

    /// Fails with [`OqwError::NotNormalized`] naming the worst node if the
    /// completeness condition is violated.
    pub fn validated(self, tol: f64) -> Result<Self> {
        validate_walk(&self, tol).into_result()?;
        Ok(self)
    }

    pub fn coin_dim(&self) -> usize {
        self.coin_dim
    }

    pub fn nodes(&self) -> &[NodeId] {
        &self.nodes
    }

    pub fn node_count(&self) -> usize {
        self.nodes.len()
    }

    pub fn node_position(&self, node: NodeId) -> Option<usize> {
        self.nodes.iter().position(|&n| n == node)
    }

    pub fn outgoing(&self, from: NodeId) -> &[(NodeId, ComplexMatrix)] {
        self.outgoing.get(&from).map(Vec::as_slice).unwrap_or(&[])
    }

    pub fn transition(&self, from: NodeId, to: NodeId) -> Option<&ComplexMatrix> {
        self.outgoing(from)
            .iter()
            .find(|(t, _)| *t == to)
            .map(|(_, op)| op)
    }

    /// All transitions as `(from, to, B)`, ordered by source then target.
    pub fn transitions(&self) -> impl Iterator<Item = (NodeId, NodeId, &ComplexMatrix)> + '_ {
        self.outgoing
            .iter()
            .flat_map(|(&from, edges)| edges.iter().map(move |(to, op)| (from, *to, op)))
    }
}

impl Transitions for OpenQuantumWalk {
    fn coin_dim(&self) -> usize {
        self.coin_dim
    }

    fn contains(&self, node: NodeId) -> bool {
        self.nodes.contains(&node)
    }

    fn for_each_from(&self, from: NodeId, f: &mut dyn FnMut(NodeId, &ComplexMatrix)) {
        for (to, op) in self.outgoing(from) {
            f(*to, op);
        }
    }
}

/// Per-node deviation `|| sum_i B(j->i)† B(j->i) - I ||` (operator norm).
#[derive(Debug, Clone, PartialEq)]
pub struct ValidationReport {
    pub tol: f64,
    pub deviations: BTreeMap<NodeId, f64>,
}

impl ValidationReport {
    pub fn passed(&self) -> bool {
        self.deviations.values().all(|&d| d <= self.tol)
    }

    pub fn worst(&self) -> Option<(NodeId, f64)> {
        self.deviations
            .iter()
            .map(|(&n, &d)| (n, d))
            .max_by(|a, b| a.1.total_cmp(&b.1))
    }

    pub fn into_result(self) -> Result<()> {
        match self.worst() {
            Some((node, deviation)) if deviation > self.tol => Err(OqwError::NotNormalized {
                node,
                deviation,
                tol: self.tol,
            }),
            _ => Ok(()),
        }
    }
}

/// Deviation of the Kraus completeness sum from the identity for the
/// operators `ops`.
pub fn completeness_deviation<'a>(
    dim: usize,
    ops: impl IntoIterator<Item = &'a ComplexMatrix>,
) -> f64 {
    let mut sum = ComplexMatrix::zeros(dim);
    for op in ops {
        sum = &sum + &(&op.adjoint() * op);
    }
    (&sum - &ComplexMatrix::identity(dim)).operator_norm()
}

pub fn validate_walk(walk: &OpenQuantumWalk, tol: f64) -> ValidationReport {
    let deviations = walk
        .nodes
        .iter()
        .map(|&j| {
            let dev =
                completeness_deviation(walk.coin_dim, walk.outgoing(j).iter().map(|(_, op)| op));
            (j, dev)
        })
        .collect();
    ValidationReport { tol, deviations }
}

/// `rho = sum_i rho_i (x) |i><i|` with positive blocks of unit total trace.
#[derive(Debug, Clone, PartialEq)]
pub struct BlockDiagonalState {
    coin_dim: usize,
    blocks: BTreeMap<NodeId, ComplexMatrix>,
    pruned_mass: f64,
}

impl BlockDiagonalState {
    /// Validated constructor: blocks must be hermitian PSD with unit total trace.
    pub fn new(coin_dim: usize, blocks: BTreeMap<NodeId, ComplexMatrix>) -> Result<Self> {
        let state = Self::from_blocks(coin_dim, blocks)?;
        for (node, block) in &state.blocks {
            if !block.is_positive_semidefinite(STATE_TOL) {
                return Err(OqwError::InvalidState(format!(
                    "block at node {node} is not hermitian positive semidefinite"
                )));
            }
        }
        let total = state.total_trace();
        if (total - 1.0).abs() > STATE_TOL {
            return Err(OqwError::InvalidState(format!(
                "total trace {total} is not 1"
            )));
        }
        Ok(state)
    }

    /// Unvalidated apart from block sizes. Used for intermediate results
    /// and for linear-map checks on non-physical inputs.
    pub fn from_blocks(coin_dim: usize, blocks: BTreeMap<NodeId, ComplexMatrix>) -> Result<Self> {
        for (node, block) in &blocks {
            if block.dim() != coin_dim {
                return Err(OqwError::DimensionMismatch {
                    context: format!("state block at node {node}"),
                    expected: coin_dim,
                    found: block.dim(),
                });
            }
        }
        Ok(Self {
            coin_dim,
            blocks,
            pruned_mass: 0.0,
        })
    }

    pub fn localized(node: NodeId, block: ComplexMatrix) -> Result<Self> {
        Self::new(block.dim(), BTreeMap::from([(node, block)]))
    }

    pub fn coin_dim(&self) -> usize {
        self.coin_dim
    }

    pub fn blocks(&self) -> &BTreeMap<NodeId, ComplexMatrix> {
        &self.blocks
    }

    pub fn block(&self, node: NodeId) -> Option<&ComplexMatrix> {
        self.blocks.get(&node)
    }

    pub fn support(&self) -> impl Iterator<Item = NodeId> + '_ {
        self.blocks.keys().copied()
    }

    pub fn total_trace(&self) -> f64 {
        self.blocks.values().map(ComplexMatrix::real_trace).sum()
    }

    /// Trace mass removed by pruning since the state was created.
    pub fn pruned_mass(&self) -> f64 {
        self.pruned_mass
    }

    /// `alpha * self + (1 - alpha) * other`.
    pub fn mix(&self, alpha: f64, other: &Self) -> Result<Self> {
        check_coin_dim(self.coin_dim, other.coin_dim)?;
        let mut blocks = BTreeMap::new();
        for node in self.blocks.keys().chain(other.blocks.keys()) {
            if blocks.contains_key(node) {
                continue;
            }
            let zero = ComplexMatrix::zeros(self.coin_dim);
            let a = self.blocks.get(node).unwrap_or(&zero).scale(alpha);
            let b = other.blocks.get(node).unwrap_or(&zero).scale(1.0 - alpha);
            blocks.insert(*node, &a + &b);
        }
        Self::from_blocks(self.coin_dim, blocks)
    }

    /// Largest entrywise difference over the union of supports.
    pub fn max_abs_diff(&self, other: &Self) -> f64 {
        let zero = ComplexMatrix::zeros(self.coin_dim);
        self.blocks
            .keys()
            .chain(other.blocks.keys())
            .map(|n| {
                let a = self.blocks.get(n).unwrap_or(&zero);
                let b = other.blocks.get(n).unwrap_or(&zero);
                a.max_abs_diff(b)
            })
            .fold(0.0, f64::max)
    }

    /// `sum_i || rho_i - sigma_i ||_1`
    pub fn trace_norm_distance(&self, other: &Self) -> f64 {
        self.blockwise_distance(other, ComplexMatrix::hermitian_trace_norm)
    }

    /// Sum of blockwise Frobenius distances, a lower bound on
    /// [`Self::trace_norm_distance`].
    pub fn frobenius_distance(&self, other: &Self) -> f64 {
        self.blockwise_distance(other, ComplexMatrix::frobenius_norm)
    }

    fn blockwise_distance(&self, other: &Self, norm: fn(&ComplexMatrix) -> f64) -> f64 {
        let zero = ComplexMatrix::zeros(self.coin_dim);
        let mut nodes: Vec<_> = self
            .blocks
            .keys()
            .chain(other.blocks.keys())
            .copied()
            .collect();
        nodes.sort_unstable();
        nodes.dedup();
        nodes
            .into_iter()
            .map(|n| {
                let a = self.blocks.get(&n).unwrap_or(&zero);
                let b = other.blocks.get(&n).unwrap_or(&zero);
                norm(&(a - b))
            })
            .sum()
    }
}

fn check_coin_dim(expected: usize, found: usize) -> Result<()> {
    if expected != found {
        return Err(OqwError::DimensionMismatch {
            context: "coin dimension".into(),
            expected,
            found,
        });
    }
    Ok(())
}

/// Post-processing applied after each exact step.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct StepOptions {
    pub prune_threshold: f64,
    pub symmetrize: bool,
}

impl Default for StepOptions {
    fn default() -> Self {
        Self {
            prune_threshold: DEFAULT_PRUNE_THRESHOLD,
            symmetrize: true,
        }
    }
}

impl StepOptions {
    pub fn exact() -> Self {
        Self {
            prune_threshold: 0.0,
            symmetrize: false,
        }
    }
}

/// One application of the walk map with default [`StepOptions`].
pub fn step<W: Transitions + ?Sized>(
    walk: &W,
    state: &BlockDiagonalState,
) -> Result<BlockDiagonalState> {
    step_with(walk, state, StepOptions::default())
}

pub fn step_with<W: Transitions + ?Sized>(
    walk: &W,
    state: &BlockDiagonalState,
    opts: StepOptions,
) -> Result<BlockDiagonalState> {
    check_coin_dim(walk.coin_dim(), state.coin_dim)?;
    let mut next: BTreeMap<NodeId, ComplexMatrix> = BTreeMap::new();
    for (&from, rho) in &state.blocks {
        if !walk.contains(from) {
            return Err(OqwError::UnknownNode(from));
        }
        walk.for_each_from(from, &mut |to, op| {
            let contribution = rho.conjugated_by(op);
            next.entry(to)
                .and_modify(|acc| *acc = &*acc + &contribution)
                .or_insert(contribution);
        });
    }
    let mut pruned = state.pruned_mass;
    let blocks = next
        .into_iter()
        .filter_map(|(node, block)| {
            let tr = block.real_trace();
            if tr < opts.prune_threshold {
                pruned += tr;
                return None;
            }
            Some((
                node,
                if opts.symmetrize {
                    block.hermitian_part()
                } else {
                    block
                },
            ))
        })
        .collect();
    Ok(BlockDiagonalState {
        coin_dim: state.coin_dim,
        blocks,
        pruned_mass: pruned,
    })
}

/// `n`-fold composition of [`step`]; `n = 0` returns the input.
pub fn evolve<W: Transitions + ?Sized>(
    walk: &W,
    state: &BlockDiagonalState,
    n: usize,
) -> Result<BlockDiagonalState> {
    check_coin_dim(walk.coin_dim(), state.coin_dim)?;
    let mut current = state.clone();
    for _ in 0..n {
        current = step(walk, &current)?;
    }
    Ok(current)
}

/// `p(i) = Tr rho_i`.
pub fn node_distribution(state: &BlockDiagonalState) -> BTreeMap<NodeId, f64> {
    state
        .blocks
        .iter()
        .map(|(&n, b)| (n, b.real_trace()))
        .collect()
}

/// A density matrix on the whole product space, indexed node-major:
/// row `pos * coin_dim + h` is coin level `h` at the node `nodes[pos]`.
#[derive(Debug, Clone, PartialEq)]
pub struct FullState {
    nodes: Vec<NodeId>,
    coin_dim: usize,
    matrix: ComplexMatrix,
}

impl FullState {
    pub fn new(nodes: Vec<NodeId>, coin_dim: usize, matrix: ComplexMatrix) -> Result<Self> {
        let state = Self::from_matrix(nodes, coin_dim, matrix)?;
        if !state.matrix.is_positive_semidefinite(STATE_TOL) {
            return Err(OqwError::InvalidState(
                "full state is not hermitian positive semidefinite".into(),
            ));
        }
        let tr = state.matrix.real_trace();
        if (tr - 1.0).abs() > STATE_TOL {
            return Err(OqwError::InvalidState(format!(
                "full state trace {tr} is not 1"
            )));
        }
        Ok(state)
    }

    pub(crate) fn from_matrix(
        nodes: Vec<NodeId>,
        coin_dim: usize,
        matrix: ComplexMatrix,
    ) -> Result<Self> {
        let required = coin_dim * nodes.len();
        if required > MAX_DENSE_PRODUCT_DIM {
            return Err(OqwError::Capacity {
                what: "dense product space",
                required,
                limit: MAX_DENSE_PRODUCT_DIM,
            });
        }
        if matrix.dim() != required {
            return Err(OqwError::DimensionMismatch {
                context: "full state".into(),
                expected: required,
                found: matrix.dim(),
            });
        }
        Ok(Self {
            nodes,
            coin_dim,
            matrix,
        })
    }

    pub fn from_block_diagonal(state: &BlockDiagonalState, nodes: &[NodeId]) -> Result<Self> {
        let d = state.coin_dim;
        let mut m = nalgebra::DMatrix::zeros(d * nodes.len(), d * nodes.len());
        for (&node, block) in &state.blocks {
            let pos = nodes
                .iter()
                .position(|&n| n == node)
                .ok_or(OqwError::UnknownNode(node))?;
            m.view_mut((pos * d, pos * d), (d, d))
                .copy_from(block.inner());
        }
        Self::from_matrix(nodes.to_vec(), d, ComplexMatrix::new(m)?)
    }

    pub fn nodes(&self) -> &[NodeId] {
        &self.nodes
    }

    pub fn coin_dim(&self) -> usize {
        self.coin_dim
    }

    pub fn matrix(&self) -> &ComplexMatrix {
        &self.matrix
    }

    /// The block `rho_{k,m}` between node positions `k` and `m`.
    pub fn node_block(&self, k: usize, m: usize) -> ComplexMatrix {
        node_block(&self.matrix, self.coin_dim, k, m)
    }

    /// Drops all node coherences.
    pub fn diagonal_part(&self) -> BlockDiagonalState {
        let blocks = self
            .nodes
            .iter()
            .enumerate()
            .map(|(pos, &n)| (n, self.node_block(pos, pos)))
            .collect();
        BlockDiagonalState {
            coin_dim: self.coin_dim,
            blocks,
            pruned_mass: 0.0,
        }
    }
}

pub(crate) fn node_block(m: &ComplexMatrix, d: usize, k: usize, l: usize) -> ComplexMatrix {
    ComplexMatrix::new(m.inner().view((k * d, l * d), (d, d)).into_owned())
        .expect("square sub-block")
}

/// The walk map applied to an arbitrary operator on the product space,
/// `X -> sum_{i,j} M_ij X M_ij†` with `M_ij = B(j->i) (x) |i><j|`.
///
/// Each term only reads the `(j, j)` node block of `X` and only writes the
/// `(i, i)` block of the result, so node coherences never propagate.
pub fn apply_full_map_matrix(walk: &OpenQuantumWalk, x: &ComplexMatrix) -> Result<ComplexMatrix> {
    let d = walk.coin_dim;
    let n = walk.node_count();
    let required = d * n;
    if required > MAX_DENSE_PRODUCT_DIM {
        return Err(OqwError::Capacity {
            what: "dense product space",
            required,
            limit: MAX_DENSE_PRODUCT_DIM,
        });
    }
    if x.dim() != required {
        return Err(OqwError::DimensionMismatch {
            context: "product-space operator".into(),
            expected: required,
            found: x.dim(),
        });
    }
    let mut out = nalgebra::DMatrix::zeros(required, required);
    for (j_pos, &j) in walk.nodes.iter().enumerate() {
        let x_jj = node_block(x, d, j_pos, j_pos);
        for (i, op) in walk.outgoing(j) {
            let i_pos = walk.node_position(*i).expect("validated on construction");
            let term = x_jj.conjugated_by(op);
            let mut view = out.view_mut((i_pos * d, i_pos * d), (d, d));
            view += term.inner();
        }
    }
    ComplexMatrix::new(out)
}

/// The walk map on a full product-space state. The result is exactly
/// block-diagonal in the node basis.
pub fn apply_full_map(walk: &OpenQuantumWalk, state: &FullState) -> Result<BlockDiagonalState> {
    if state.nodes != walk.nodes {
        return Err(OqwError::InvalidState(
            "full state node ordering differs from the walk".into(),
        ));
    }
    check_coin_dim(walk.coin_dim, state.coin_dim)?;
    let out = apply_full_map_matrix(walk, &state.matrix)?;
    let targets: std::collections::BTreeSet<NodeId> =
        walk.transitions().map(|(_, to, _)| to).collect();
    let blocks = walk
        .nodes
        .iter()
        .enumerate()
        .filter(|(_, n)| targets.contains(n))
        .map(|(pos, &node)| (node, node_block(&out, walk.coin_dim, pos, pos)))
        .collect();
    Ok(BlockDiagonalState {
        coin_dim: walk.coin_dim,
        blocks,
        pruned_mass: 0.0,
    })
}
