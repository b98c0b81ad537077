//! The homogeneous nearest-neighbour walk on the integers.
//!
//! Every right jump applies `B`, every left jump applies `C`, with
//! `B†B + C†C = I`. Only visited sites are stored, so after `n` steps from a
//! single site the support is at most `2n + 1` blocks.
//!
//! When `B` and `C` are normal and commute they share an eigenbasis, and the
//! walk splits into independent classical components: component `k` jumps
//! right with probability `b_k^2` and left with `c_k^2`. A component with
//! `b_k c_k = 0` moves ballistically (a soliton); the others spread into
//! Gaussian packets with drift `b_k^2 - c_k^2` and diffusion `4 b_k^2 c_k^2`.

use std::collections::BTreeMap;

use nalgebra::DMatrix;
use serde::Serialize;

use crate::error::{OqwError, Result};
use crate::matrix::{c64, ComplexMatrix};
use crate::walk::{self, completeness_deviation, BlockDiagonalState, OpenQuantumWalk, Transitions};
use crate::NodeId;

/// Commutator and normality tolerance for the component analysis.
pub const DIAGONALIZABLE_TOL: f64 = 1e-10;

#[derive(Debug, Clone, PartialEq)]
pub struct HomogeneousWalkZ {
    right: ComplexMatrix,
    left: ComplexMatrix,
}

impl HomogeneousWalkZ {
    pub fn new(right: ComplexMatrix, left: ComplexMatrix, tol: f64) -> Result<Self> {
        if right.dim() != left.dim() {
            return Err(OqwError::DimensionMismatch {
                context: "left coin".into(),
                expected: right.dim(),
                found: left.dim(),
            });
        }
        let deviation = completeness_deviation(right.dim(), [&right, &left]);
        if deviation > tol {
            return Err(OqwError::NotNormalized {
                node: 0,
                deviation,
                tol,
            });
        }
        Ok(Self { right, left })
    }

    /// Right-jump operator `B`.
    pub fn right(&self) -> &ComplexMatrix {
        &self.right
    }

    /// Left-jump operator `C`.
    pub fn left(&self) -> &ComplexMatrix {
        &self.left
    }

    /// Finite segment `lo..=hi`; a jump that would leave the segment keeps
    /// the walker on the boundary site with the same operator, so the
    /// completeness condition still holds everywhere.
    pub fn truncate(&self, lo: NodeId, hi: NodeId) -> Result<OpenQuantumWalk> {
        if hi <= lo {
            return Err(OqwError::InvalidParameter(format!(
                "truncation needs lo < hi, got {lo}..={hi}"
            )));
        }
        let mut transitions = Vec::new();
        for x in lo..=hi {
            transitions.push((x, (x - 1).max(lo), self.left.clone()));
            transitions.push((x, (x + 1).min(hi), self.right.clone()));
        }
        OpenQuantumWalk::new(self.right.dim(), (lo..=hi).collect(), transitions)
    }
}

impl Transitions for HomogeneousWalkZ {
    fn coin_dim(&self) -> usize {
        self.right.dim()
    }

    fn contains(&self, _node: NodeId) -> bool {
        true
    }

    fn for_each_from(&self, from: NodeId, f: &mut dyn FnMut(NodeId, &ComplexMatrix)) {
        f(from - 1, &self.left);
        f(from + 1, &self.right);
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct LatticeState {
    pub state: BlockDiagonalState,
    pub step_count: usize,
}

impl LatticeState {
    pub fn localized(node: NodeId, block: ComplexMatrix) -> Result<Self> {
        Ok(Self {
            state: BlockDiagonalState::localized(node, block)?,
            step_count: 0,
        })
    }

    pub fn distribution(&self) -> BTreeMap<NodeId, f64> {
        walk::node_distribution(&self.state)
    }
}

/// `rho_i <- B rho_{i-1} B† + C rho_{i+1} C†`
pub fn step_z(walk: &HomogeneousWalkZ, state: &LatticeState) -> Result<LatticeState> {
    Ok(LatticeState {
        state: walk::step(walk, &state.state)?,
        step_count: state.step_count + 1,
    })
}

pub fn evolve_z(walk: &HomogeneousWalkZ, initial: &LatticeState, n: usize) -> Result<LatticeState> {
    let mut s = initial.clone();
    for _ in 0..n {
        s = step_z(walk, &s)?;
    }
    Ok(s)
}

pub fn distribution_after(
    walk: &HomogeneousWalkZ,
    initial: &LatticeState,
    n: usize,
) -> Result<BTreeMap<NodeId, f64>> {
    Ok(evolve_z(walk, initial, n)?.distribution())
}

/// Mean and variance of a distribution over integer positions.
pub fn moments(distribution: &BTreeMap<NodeId, f64>) -> Result<(f64, f64)> {
    let mass: f64 = distribution.values().sum();
    if distribution.is_empty() || mass <= 0.0 {
        return Err(OqwError::EmptyDistribution);
    }
    let mean = distribution
        .iter()
        .map(|(&x, &p)| x as f64 * p)
        .sum::<f64>()
        / mass;
    let var = distribution
        .iter()
        .map(|(&x, &p)| (x as f64 - mean).powi(2) * p)
        .sum::<f64>()
        / mass;
    Ok((mean, var.max(0.0)))
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum ComponentKind {
    Soliton,
    Gaussian,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Component {
    /// `|eigenvalue of B|`
    pub right_amplitude: f64,
    /// `|eigenvalue of C|`
    pub left_amplitude: f64,
    pub weight: f64,
    pub kind: ComponentKind,
    pub drift: f64,
    pub diffusion: f64,
}

impl Component {
    pub fn right_probability(&self) -> f64 {
        self.right_amplitude * self.right_amplitude
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ComponentAnalysis {
    pub components: Vec<Component>,
}

impl ComponentAnalysis {
    /// Weighted mean drift per step.
    pub fn mean_drift(&self) -> f64 {
        self.components.iter().map(|c| c.weight * c.drift).sum()
    }

    /// Position distribution after `n` steps as a weighted mixture of
    /// binomial walks.
    pub fn predicted_distribution(&self, n: usize) -> BTreeMap<NodeId, f64> {
        let mut out = BTreeMap::new();
        for comp in &self.components {
            let p = comp.right_probability();
            for (k, prob) in binomial_pmf(n, p).into_iter().enumerate() {
                let pos = 2 * k as NodeId - n as NodeId;
                *out.entry(pos).or_insert(0.0) += comp.weight * prob;
            }
        }
        out
    }
}

/// `P(k successes of n)` for `k = 0..=n`, via the stable multiplicative
/// recurrence.
fn binomial_pmf(n: usize, p: f64) -> Vec<f64> {
    let mut out = vec![0.0; n + 1];
    if p <= 0.0 {
        out[0] = 1.0;
        return out;
    }
    if p >= 1.0 {
        out[n] = 1.0;
        return out;
    }
    // log-space to avoid underflow for large n
    let (lp, lq) = (p.ln(), (1.0 - p).ln());
    let mut log_choose = 0.0;
    for (k, slot) in out.iter_mut().enumerate() {
        if k > 0 {
            log_choose += ((n - k + 1) as f64).ln() - (k as f64).ln();
        }
        *slot = (log_choose + k as f64 * lp + (n - k) as f64 * lq).exp();
    }
    out
}

pub fn analyze_components(
    walk: &HomogeneousWalkZ,
    initial_block: &ComplexMatrix,
) -> Result<ComponentAnalysis> {
    let (b, c) = (walk.right(), walk.left());
    let d = b.dim();
    if initial_block.dim() != d {
        return Err(OqwError::DimensionMismatch {
            context: "initial block".into(),
            expected: d,
            found: initial_block.dim(),
        });
    }
    if !b.is_normal(DIAGONALIZABLE_TOL) {
        return Err(OqwError::NotSimultaneouslyDiagonalizable(
            "B is not normal".into(),
        ));
    }
    if !c.is_normal(DIAGONALIZABLE_TOL) {
        return Err(OqwError::NotSimultaneouslyDiagonalizable(
            "C is not normal".into(),
        ));
    }
    let commutator = (&(b * c) - &(c * b)).operator_norm();
    if commutator > DIAGONALIZABLE_TOL {
        return Err(OqwError::NotSimultaneouslyDiagonalizable(format!(
            "||BC - CB|| = {commutator:.3e}"
        )));
    }

    // Commuting normal B, C: the hermitian and anti-hermitian parts of both
    // commute pairwise, so a generic real combination of them is a single
    // hermitian matrix whose eigenbasis diagonalizes B and C together.
    let (bi, ci) = (b.inner(), c.inner());
    let i = c64(0.0, 1.0);
    let coeffs = [
        1.0,
        std::f64::consts::SQRT_2,
        3f64.sqrt() / 7.0,
        5f64.sqrt() / 11.0,
    ];
    let h: DMatrix<_> = (bi + bi.adjoint()) * c64(coeffs[0], 0.0)
        + (bi - bi.adjoint()) * (i * coeffs[1])
        + (ci + ci.adjoint()) * c64(coeffs[2], 0.0)
        + (ci - ci.adjoint()) * (i * coeffs[3]);
    let eig = h.symmetric_eigen();

    let mut raw = Vec::with_capacity(d);
    for k in 0..d {
        let v = eig.eigenvectors.column(k).into_owned();
        let beta = (v.adjoint() * bi * &v)[(0, 0)];
        let gamma = (v.adjoint() * ci * &v)[(0, 0)];
        let residual = (bi * &v - &v * beta)
            .norm()
            .max((ci * &v - &v * gamma).norm());
        if residual > 1e-8 {
            return Err(OqwError::Invariant(format!(
                "joint eigenvector residual {residual:.3e}"
            )));
        }
        let weight = (v.adjoint() * initial_block.inner() * &v)[(0, 0)].re;
        raw.push((beta.norm(), gamma.norm(), weight));
    }
    raw.sort_by(|x, y| y.0.total_cmp(&x.0).then(x.1.total_cmp(&y.1)));

    // components with equal jump amplitudes behave identically
    let mut merged: Vec<(f64, f64, f64)> = Vec::new();
    for (bk, ck, w) in raw {
        match merged.last_mut() {
            Some(last) if (last.0 - bk).abs() < 1e-9 && (last.1 - ck).abs() < 1e-9 => last.2 += w,
            _ => merged.push((bk, ck, w)),
        }
    }

    let components = merged
        .into_iter()
        .map(|(bk, ck, weight)| {
            let (pr, pl) = (bk * bk, ck * ck);
            Component {
                right_amplitude: bk,
                left_amplitude: ck,
                weight,
                kind: if bk * ck <= DIAGONALIZABLE_TOL {
                    ComponentKind::Soliton
                } else {
                    ComponentKind::Gaussian
                },
                drift: pr - pl,
                diffusion: 4.0 * pr * pl,
            }
        })
        .collect();
    Ok(ComponentAnalysis { components })
}
