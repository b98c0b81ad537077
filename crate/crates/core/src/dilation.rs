//! Unitary realisation of a walk step, and the coherent walk obtained by
//! leaving out the dephasing stage.
//!
//! For every node `k` the operators leaving `k`, stacked over targets, form
//! an isometry from the coin space into coin (x) position. Completing it to
//! a unitary `U(k)` and controlling on a second position register gives
//! `U = sum_k U(k) (x) |k><k|` on coin (x) extra (x) position. One walk step
//! is then:
//!
//! 1. park the extra register in its first basis state,
//! 2. conjugate by `U`,
//! 3. dephase the extra register,
//! 4. swap the two position registers,
//! 5. trace out the extra register.
//!
//! Internally the product space coin (x) nodes is laid out node-major: index
//! `pos * coin_dim + h`.

use std::collections::BTreeMap;

use nalgebra::{DMatrix, DVector};
use num_complex::Complex64;

use crate::error::{OqwError, Result};
use crate::lattice::HomogeneousWalkZ;
use crate::matrix::{c64, ComplexMatrix, ComplexVector};
use crate::walk::{node_block, BlockDiagonalState, FullState, OpenQuantumWalk, DEFAULT_KRAUS_TOL};
use crate::NodeId;

/// Largest `coin_dim * |nodes|^2` accepted by the realisation procedure.
pub const MAX_TRIPLE_DIM: usize = 1 << 14;
/// Candidates whose residual falls below this are skipped during completion.
pub const INDEPENDENCE_THRESHOLD: f64 = 1e-8;
pub const UNITARY_TOL: f64 = 1e-10;

/// Order in which canonical basis vectors are offered to the completion.
/// Any order yields a valid dilation.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum Completion {
    #[default]
    Canonical,
    Reversed,
}

#[derive(Debug, Clone, PartialEq)]
pub struct LocalDilation {
    pub node: NodeId,
    /// Unitary on coin (x) nodes whose first block-column stacks the
    /// transition operators leaving `node`.
    pub unitary: ComplexMatrix,
}

impl LocalDilation {
    /// Block `(row, col)` of the unitary, in node positions.
    pub fn block(&self, row: usize, col: usize, coin_dim: usize) -> ComplexMatrix {
        node_block(&self.unitary, coin_dim, row, col)
    }
}

/// Completes the block column `[B_0; B_1; ...]` (one operator per target
/// position) to a unitary.
pub fn complete_isometry(node: NodeId, columns: &[ComplexMatrix]) -> Result<LocalDilation> {
    complete_isometry_with(node, columns, DEFAULT_KRAUS_TOL, Completion::Canonical)
}

pub fn complete_isometry_with(
    node: NodeId,
    columns: &[ComplexMatrix],
    tol: f64,
    completion: Completion,
) -> Result<LocalDilation> {
    let first = columns
        .first()
        .ok_or_else(|| OqwError::InvalidParameter("empty block column".into()))?;
    let d = first.dim();
    if let Some(bad) = columns.iter().find(|c| c.dim() != d) {
        return Err(OqwError::DimensionMismatch {
            context: format!("block column of node {node}"),
            expected: d,
            found: bad.dim(),
        });
    }
    let deviation = crate::walk::completeness_deviation(d, columns);
    if deviation > tol {
        return Err(OqwError::NotNormalized {
            node,
            deviation,
            tol,
        });
    }

    let dim = d * columns.len();
    let mut basis: Vec<DVector<Complex64>> = Vec::with_capacity(dim);
    for h in 0..d {
        let mut v = DVector::zeros(dim);
        for (pos, b) in columns.iter().enumerate() {
            v.rows_mut(pos * d, d).copy_from(&b.inner().column(h));
        }
        basis.push(v);
    }

    let candidates: Box<dyn Iterator<Item = usize>> = match completion {
        Completion::Canonical => Box::new(0..dim),
        Completion::Reversed => Box::new((0..dim).rev()),
    };
    for idx in candidates {
        if basis.len() == dim {
            break;
        }
        let mut w = DVector::zeros(dim);
        w[idx] = c64(1.0, 0.0);
        // two passes of Gram-Schmidt keep the result orthogonal to machine precision
        for _ in 0..2 {
            for q in &basis {
                let overlap = q.dotc(&w);
                w -= q * overlap;
            }
        }
        let norm = w.norm();
        if norm > INDEPENDENCE_THRESHOLD {
            basis.push(w / c64(norm, 0.0));
        }
    }
    if basis.len() != dim {
        return Err(OqwError::Invariant(format!(
            "completion of node {node} found only {} of {dim} columns",
            basis.len()
        )));
    }
    let unitary = ComplexMatrix::new(DMatrix::from_columns(&basis))?;
    let defect = unitary.unitarity_defect();
    if defect > UNITARY_TOL {
        return Err(OqwError::NotUnitary {
            context: format!("completed dilation of node {node}"),
            defect,
        });
    }
    Ok(LocalDilation { node, unitary })
}

/// `U = sum_k U(k) (x) |k><k|`.
#[derive(Debug, Clone, PartialEq)]
pub struct GlobalUnitary {
    pub coin_dim: usize,
    pub nodes: Vec<NodeId>,
    pub blocks: BTreeMap<NodeId, LocalDilation>,
}

impl GlobalUnitary {
    pub fn build(walk: &OpenQuantumWalk, completion: Completion) -> Result<Self> {
        let d = walk.coin_dim();
        let nodes = walk.nodes().to_vec();
        let mut blocks = BTreeMap::new();
        for &k in &nodes {
            let mut columns = vec![ComplexMatrix::zeros(d); nodes.len()];
            for (to, op) in walk.outgoing(k) {
                let pos = walk.node_position(*to).expect("validated on construction");
                columns[pos] = op.clone();
            }
            blocks.insert(
                k,
                complete_isometry_with(k, &columns, DEFAULT_KRAUS_TOL, completion)?,
            );
        }
        Ok(Self {
            coin_dim: d,
            nodes,
            blocks,
        })
    }

    /// Replaces `U(node)` by `U(node) (I (+) rotation)`, another completion of
    /// the same isometry. `rotation` acts on the completed columns.
    pub fn with_complement_rotation(
        mut self,
        node: NodeId,
        rotation: &ComplexMatrix,
    ) -> Result<Self> {
        let d = self.coin_dim;
        let local = d * self.nodes.len();
        let extra = local - d;
        if rotation.dim() != extra {
            return Err(OqwError::DimensionMismatch {
                context: format!("completion rotation of node {node}"),
                expected: extra,
                found: rotation.dim(),
            });
        }
        let defect = rotation.unitarity_defect();
        if defect > UNITARY_TOL {
            return Err(OqwError::NotUnitary {
                context: format!("completion rotation of node {node}"),
                defect,
            });
        }
        let block = self
            .blocks
            .get_mut(&node)
            .ok_or(OqwError::UnknownNode(node))?;
        let mut factor = DMatrix::identity(local, local);
        factor
            .view_mut((d, d), (extra, extra))
            .copy_from(rotation.inner());
        block.unitary = ComplexMatrix::new(block.unitary.inner() * factor)?;
        Ok(self)
    }

    /// Largest entrywise gap between the first block-columns and the walk's
    /// transition operators.
    pub fn dilation_error(&self, walk: &OpenQuantumWalk) -> Result<f64> {
        let d = self.coin_dim;
        if d != walk.coin_dim() || self.nodes != walk.nodes() {
            return Err(OqwError::InvalidParameter(
                "unitary was built for a different walk".into(),
            ));
        }
        let zero = ComplexMatrix::zeros(d);
        let mut worst: f64 = 0.0;
        for (pos, &k) in self.nodes.iter().enumerate() {
            for (row, &to) in self.nodes.iter().enumerate() {
                let want = walk.transition(k, to).unwrap_or(&zero);
                worst = worst.max(node_block(self.local(pos), d, row, 0).max_abs_diff(want));
            }
        }
        Ok(worst)
    }

    fn local(&self, pos: usize) -> &ComplexMatrix {
        &self.blocks[&self.nodes[pos]].unitary
    }

    /// Dense operator on position (x) extra (x) coin, position outermost.
    pub fn to_dense(&self) -> Result<ComplexMatrix> {
        let n = self.nodes.len();
        let local = self.coin_dim * n;
        check_triple_capacity(self.coin_dim, n)?;
        let mut m = DMatrix::zeros(local * n, local * n);
        for pos in 0..n {
            m.view_mut((pos * local, pos * local), (local, local))
                .copy_from(self.local(pos).inner());
        }
        ComplexMatrix::new(m)
    }
}

fn check_triple_capacity(coin_dim: usize, nodes: usize) -> Result<()> {
    let required = coin_dim * nodes * nodes;
    if required > MAX_TRIPLE_DIM {
        return Err(OqwError::Capacity {
            what: "realisation triple space",
            required,
            limit: MAX_TRIPLE_DIM,
        });
    }
    Ok(())
}

/// State on coin (x) extra (x) position, stored as blocks over pairs of
/// position-register indices; each block lives on coin (x) extra.
type TripleState = BTreeMap<(usize, usize), DMatrix<Complex64>>;

fn extend(state: &BlockDiagonalState, walk: &OpenQuantumWalk) -> Result<TripleState> {
    let d = walk.coin_dim();
    let local = d * walk.node_count();
    let mut out = TripleState::new();
    for (&node, rho) in state.blocks() {
        let pos = walk
            .node_position(node)
            .ok_or(OqwError::UnknownNode(node))?;
        let mut x = DMatrix::zeros(local, local);
        x.view_mut((0, 0), (d, d)).copy_from(rho.inner());
        out.insert((pos, pos), x);
    }
    Ok(out)
}

fn conjugate(unitary: &GlobalUnitary, state: TripleState) -> TripleState {
    state
        .into_iter()
        .map(|((b, bp), x)| {
            let y = unitary.local(b).inner() * x * unitary.local(bp).inner().adjoint();
            ((b, bp), y)
        })
        .collect()
}

fn dephase_extra(state: &mut TripleState, d: usize, n: usize) {
    for x in state.values_mut() {
        for a in 0..n {
            for ap in 0..n {
                if a != ap {
                    x.view_mut((a * d, ap * d), (d, d)).fill(c64(0.0, 0.0));
                }
            }
        }
    }
}

fn swap_positions(state: TripleState, d: usize, n: usize) -> TripleState {
    let local = d * n;
    let mut out = TripleState::new();
    for ((b, bp), x) in state {
        for a in 0..n {
            for ap in 0..n {
                let src = x.view((a * d, ap * d), (d, d));
                if src.iter().all(|z| *z == c64(0.0, 0.0)) {
                    continue;
                }
                let dst = out
                    .entry((a, ap))
                    .or_insert_with(|| DMatrix::zeros(local, local));
                dst.view_mut((b * d, bp * d), (d, d)).copy_from(&src);
            }
        }
    }
    out
}

/// Traces out the extra register; returns the node-major product-space matrix.
fn trace_extra(state: &TripleState, d: usize, n: usize) -> DMatrix<Complex64> {
    let mut out = DMatrix::zeros(d * n, d * n);
    for (&(a, ap), x) in state {
        let mut acc = DMatrix::zeros(d, d);
        for b in 0..n {
            acc += x.view((b * d, b * d), (d, d));
        }
        out.view_mut((a * d, ap * d), (d, d)).copy_from(&acc);
    }
    out
}

/// Runs the five stages; with `dephase = false` stage 3 is skipped and the
/// output keeps the node coherences produced by the unitary.
pub fn realisation_output(
    walk: &OpenQuantumWalk,
    state: &BlockDiagonalState,
    completion: Completion,
    dephase: bool,
) -> Result<FullState> {
    check_triple_capacity(walk.coin_dim(), walk.node_count())?;
    let unitary = GlobalUnitary::build(walk, completion)?;
    realisation_output_from(walk, state, &unitary, dephase)
}

/// [`realisation_output`] with a caller-supplied completion.
pub fn realisation_output_from(
    walk: &OpenQuantumWalk,
    state: &BlockDiagonalState,
    unitary: &GlobalUnitary,
    dephase: bool,
) -> Result<FullState> {
    let d = walk.coin_dim();
    let n = walk.node_count();
    check_triple_capacity(d, n)?;
    if state.coin_dim() != d {
        return Err(OqwError::DimensionMismatch {
            context: "state coin dimension".into(),
            expected: d,
            found: state.coin_dim(),
        });
    }
    let gap = unitary.dilation_error(walk)?;
    if gap > DEFAULT_KRAUS_TOL {
        return Err(OqwError::InvalidParameter(format!(
            "unitary does not dilate the walk (gap {gap:.3e})"
        )));
    }
    let ext = extend(state, walk)?;
    let mut rotated = conjugate(unitary, ext);
    if dephase {
        dephase_extra(&mut rotated, d, n);
    }
    let swapped = swap_positions(rotated, d, n);
    let reduced = trace_extra(&swapped, d, n);
    FullState::from_matrix(walk.nodes().to_vec(), d, ComplexMatrix::new(reduced)?)
}

/// One walk step computed through the unitary realisation.
pub fn run_realisation(
    walk: &OpenQuantumWalk,
    state: &BlockDiagonalState,
) -> Result<BlockDiagonalState> {
    run_realisation_with(walk, state, Completion::Canonical)
}

pub fn run_realisation_with(
    walk: &OpenQuantumWalk,
    state: &BlockDiagonalState,
    completion: Completion,
) -> Result<BlockDiagonalState> {
    let unitary = GlobalUnitary::build(walk, completion)?;
    run_realisation_from(walk, state, &unitary)
}

pub fn run_realisation_from(
    walk: &OpenQuantumWalk,
    state: &BlockDiagonalState,
    unitary: &GlobalUnitary,
) -> Result<BlockDiagonalState> {
    let full = realisation_output_from(walk, state, unitary, true)?;
    let mut out = full.diagonal_part();
    let blocks: BTreeMap<_, _> = out
        .blocks()
        .iter()
        .filter(|(_, b)| b.max_abs() > 0.0)
        .map(|(n, b)| (*n, b.clone()))
        .collect();
    out = BlockDiagonalState::from_blocks(walk.coin_dim(), blocks)?;
    Ok(out)
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct UqwDiagnostics {
    pub holds: bool,
    /// `||C† B||`
    pub cross_norm: f64,
    /// `||(B + C)†(B + C) - I||`
    pub sum_unitarity_defect: f64,
    /// `||B†B + C†C - I||`
    pub normalization_defect: f64,
}

/// Checks whether a line walk `(B, C)` reduces to a unitary walk.
pub fn check_uqw_condition(
    right: &ComplexMatrix,
    left: &ComplexMatrix,
    tol: f64,
) -> UqwDiagnostics {
    let cross_norm = (&left.adjoint() * right).operator_norm();
    let sum = right + left;
    UqwDiagnostics {
        holds: cross_norm <= tol,
        cross_norm,
        sum_unitarity_defect: sum.unitarity_defect(),
        normalization_defect: crate::walk::completeness_deviation(right.dim(), [right, left]),
    }
}

/// Pure state of the coherent walk on the line, one coin vector per site.
#[derive(Debug, Clone, PartialEq)]
pub struct CoherentState {
    pub coin_dim: usize,
    pub amplitudes: BTreeMap<NodeId, ComplexVector>,
}

impl CoherentState {
    pub fn localized(coin: ComplexVector, node: NodeId) -> Self {
        Self {
            coin_dim: coin.len(),
            amplitudes: BTreeMap::from([(node, coin)]),
        }
    }

    pub fn norm(&self) -> f64 {
        self.amplitudes
            .values()
            .map(|v| v.norm_squared())
            .sum::<f64>()
            .sqrt()
    }

    pub fn distribution(&self) -> BTreeMap<NodeId, f64> {
        self.amplitudes
            .iter()
            .map(|(&n, v)| (n, v.norm_squared()))
            .collect()
    }
}

/// One step of the realisation with stage 3 left out: every site sends
/// `B psi` right and `C psi` left, and the amplitudes arriving at a site
/// add coherently once the extra register is merged.
pub fn coherent_step(walk: &HomogeneousWalkZ, state: &CoherentState) -> CoherentState {
    let mut next: BTreeMap<NodeId, ComplexVector> = BTreeMap::new();
    for (&x, psi) in &state.amplitudes {
        for (target, op) in [(x - 1, walk.left()), (x + 1, walk.right())] {
            let v = op.apply(psi);
            next.entry(target).and_modify(|acc| *acc += &v).or_insert(v);
        }
    }
    CoherentState {
        coin_dim: state.coin_dim,
        amplitudes: next,
    }
}

/// `n` coherent steps from `coin (x) |node>`. Fails unless `C†B = 0`, the
/// condition under which the coherent step is norm preserving.
pub fn run_coherent(
    walk: &HomogeneousWalkZ,
    coin: ComplexVector,
    node: NodeId,
    n: usize,
    tol: f64,
) -> Result<CoherentState> {
    let diag = check_uqw_condition(walk.right(), walk.left(), tol);
    if !diag.holds {
        return Err(OqwError::UqwConditionViolated {
            cross_norm: diag.cross_norm,
        });
    }
    if coin.len() != walk.right().dim() {
        return Err(OqwError::DimensionMismatch {
            context: "coin vector".into(),
            expected: walk.right().dim(),
            found: coin.len(),
        });
    }
    let norm = coin.norm();
    if (norm - 1.0).abs() > 1e-12 {
        return Err(OqwError::InvalidState(format!(
            "coin vector norm {norm} is not 1"
        )));
    }
    let mut state = CoherentState::localized(coin, node);
    for _ in 0..n {
        state = coherent_step(walk, &state);
    }
    Ok(state)
}

/// The line pair `B = [[a, b], [0, 0]]`, `C = sign * [[0, 0], [-b*, a*]]`.
pub fn hadamard_pair(
    alpha: Complex64,
    beta: Complex64,
    sign: f64,
) -> Result<(ComplexMatrix, ComplexMatrix)> {
    let z = c64(0.0, 0.0);
    let right = ComplexMatrix::from_row_major(2, &[alpha, beta, z, z])?;
    let left = ComplexMatrix::from_row_major(2, &[z, z, -beta.conj(), alpha.conj()])?.scale(sign);
    Ok((right, left))
}
