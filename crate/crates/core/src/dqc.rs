//! Dissipative quantum computing as an open quantum walk on a chain.
//!
//! A circuit `U_1 .. U_T` is laid out on nodes `0..=T`. The walker hops
//! forward with weight `omega` (applying the next gate) and backward with
//! weight `lambda = 1 - omega` (undoing the last one); the end nodes keep
//! the walker with the remaining weight. Started from `|psi_0>` at node 0
//! the chain relaxes to `sum_t p_t |psi_t><psi_t| (x) |t><t|` with
//! `|psi_t> = U_t .. U_1 |psi_0>`, so the circuit output sits at node `T`.

use std::collections::BTreeMap;

use nalgebra::DMatrix;
use num_complex::Complex64;
use rayon::prelude::*;

use crate::error::{OqwError, Result};
use crate::gates;
use crate::matrix::{c64, ComplexMatrix, ComplexVector};
use crate::walk::{BlockDiagonalState, OpenQuantumWalk};
use crate::NodeId;

pub const GATE_TOL: f64 = 1e-10;
/// Default convergence threshold on the summed trace-norm residual.
pub const DEFAULT_STEADY_TOL: f64 = 1e-6;

#[derive(Debug, Clone, PartialEq)]
pub struct Gate {
    pub label: String,
    pub matrix: ComplexMatrix,
}

#[derive(Debug, Clone, PartialEq)]
pub struct GateCircuit {
    qubits: usize,
    gates: Vec<Gate>,
    sparse: Vec<SparsePair>,
}

/// Nonzero entries of a gate and of its adjoint, row by row.
#[derive(Debug, Clone, PartialEq)]
struct SparsePair {
    forward: Vec<Vec<(usize, Complex64)>>,
    adjoint: Vec<Vec<(usize, Complex64)>>,
}

impl SparsePair {
    fn new(m: &ComplexMatrix) -> Self {
        let d = m.dim();
        let zero = c64(0.0, 0.0);
        let rows = |f: &dyn Fn(usize, usize) -> Complex64| -> Vec<Vec<(usize, Complex64)>> {
            (0..d)
                .map(|r| {
                    (0..d)
                        .map(|c| (c, f(r, c)))
                        .filter(|(_, v)| *v != zero)
                        .collect()
                })
                .collect()
        };
        Self {
            forward: rows(&|r, c| m.inner()[(r, c)]),
            adjoint: rows(&|r, c| m.inner()[(c, r)].conj()),
        }
    }
}

/// `U rho U†` with `U` given by its nonzero rows.
fn sandwich(rows: &[Vec<(usize, Complex64)>], rho: &ComplexMatrix) -> ComplexMatrix {
    let d = rows.len();
    let rho = rho.inner();
    let mut left = DMatrix::<Complex64>::zeros(d, d);
    for (r, row) in rows.iter().enumerate() {
        for &(c, v) in row {
            for k in 0..d {
                left[(r, k)] += v * rho[(c, k)];
            }
        }
    }
    let mut out = DMatrix::<Complex64>::zeros(d, d);
    for (k, row) in rows.iter().enumerate() {
        for &(j, v) in row {
            let v = v.conj();
            for i in 0..d {
                out[(i, k)] += left[(i, j)] * v;
            }
        }
    }
    ComplexMatrix::new(out).expect("square")
}

impl GateCircuit {
    pub fn new(qubits: usize, gates: Vec<Gate>) -> Result<Self> {
        if qubits == 0 || qubits > gates::MAX_QUBITS {
            return Err(OqwError::InvalidParameter(format!(
                "register of {qubits} qubits (supported: 1..={})",
                gates::MAX_QUBITS
            )));
        }
        if gates.is_empty() {
            return Err(OqwError::InvalidParameter(
                "a circuit needs at least one gate".into(),
            ));
        }
        let dim = 1 << qubits;
        for (t, g) in gates.iter().enumerate() {
            if g.matrix.dim() != dim {
                return Err(OqwError::DimensionMismatch {
                    context: format!("gate {} ({})", t + 1, g.label),
                    expected: dim,
                    found: g.matrix.dim(),
                });
            }
            let defect = g.matrix.unitarity_defect();
            if defect > GATE_TOL {
                return Err(OqwError::NotUnitary {
                    context: format!("gate {} ({})", t + 1, g.label),
                    defect,
                });
            }
        }
        let sparse = gates.iter().map(|g| SparsePair::new(&g.matrix)).collect();
        Ok(Self {
            qubits,
            gates,
            sparse,
        })
    }

    /// `U_t rho U_t†`, or `rho` for `t = 0`.
    fn forward(&self, t: usize, rho: &ComplexMatrix) -> ComplexMatrix {
        match t {
            0 => rho.clone(),
            _ => sandwich(&self.sparse[t - 1].forward, rho),
        }
    }

    /// `U_t† rho U_t`
    fn backward(&self, t: usize, rho: &ComplexMatrix) -> ComplexMatrix {
        sandwich(&self.sparse[t - 1].adjoint, rho)
    }

    pub fn qubits(&self) -> usize {
        self.qubits
    }

    pub fn dim(&self) -> usize {
        1 << self.qubits
    }

    /// Number of gates `T`.
    pub fn len(&self) -> usize {
        self.gates.len()
    }

    pub fn is_empty(&self) -> bool {
        self.gates.is_empty()
    }

    pub fn gates(&self) -> &[Gate] {
        &self.gates
    }

    /// `U_t` for `t` in `1..=T`.
    pub fn gate(&self, t: usize) -> &ComplexMatrix {
        &self.gates[t - 1].matrix
    }

    /// `U_T .. U_1`
    pub fn product(&self) -> ComplexMatrix {
        self.gates
            .iter()
            .fold(ComplexMatrix::identity(self.dim()), |acc, g| {
                &g.matrix * &acc
            })
    }

    /// `|psi_t> = U_t .. U_1 |psi_0>` for `t = 0..=T`.
    pub fn partial_states(&self, psi0: &ComplexVector) -> Vec<ComplexVector> {
        let mut out = Vec::with_capacity(self.len() + 1);
        out.push(psi0.clone());
        for g in &self.gates {
            let next = g.matrix.apply(out.last().expect("non-empty"));
            out.push(next);
        }
        out
    }
}

/// Which gate feeds the last node.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum BoundaryRule {
    /// `U_T`, so the last block carries `U_T .. U_1 |psi_0>`.
    #[default]
    Consistent,
    /// `U_{T-1}` (with `U_0 = I`), as the update is sometimes written.
    Literal,
}

#[derive(Debug, Clone, PartialEq)]
pub struct DqcChain {
    pub circuit: GateCircuit,
    pub omega: f64,
    pub lambda: f64,
    pub boundary: BoundaryRule,
}

impl DqcChain {
    pub fn new(circuit: GateCircuit, omega: f64) -> Result<Self> {
        if !(omega > 0.0 && omega < 1.0) {
            return Err(OqwError::InvalidParameter(format!(
                "omega must lie strictly between 0 and 1, got {omega}"
            )));
        }
        Ok(Self {
            circuit,
            omega,
            lambda: 1.0 - omega,
            boundary: BoundaryRule::Consistent,
        })
    }

    pub fn with_boundary(mut self, boundary: BoundaryRule) -> Self {
        self.boundary = boundary;
        self
    }

    /// Index `T` of the output node.
    pub fn last_node(&self) -> usize {
        self.circuit.len()
    }

    /// Index of the gate feeding the last node; `0` stands for the identity.
    fn last_gate_index(&self) -> usize {
        let t = self.last_node();
        match self.boundary {
            BoundaryRule::Consistent => t,
            BoundaryRule::Literal => t - 1,
        }
    }

    /// `|psi_0><psi_0|` at node 0.
    pub fn initial_state(&self, psi0: &ComplexVector) -> Result<BlockDiagonalState> {
        if psi0.len() != self.circuit.dim() {
            return Err(OqwError::DimensionMismatch {
                context: "initial register state".into(),
                expected: self.circuit.dim(),
                found: psi0.len(),
            });
        }
        BlockDiagonalState::localized(0, ComplexMatrix::outer(psi0))
    }

    /// The chain as a general walk with operators `sqrt(omega) U_{j+1}`
    /// forward, `sqrt(lambda) U_j†` backward and scalar self-loops at the
    /// ends.
    pub fn to_walk(&self) -> Result<OpenQuantumWalk> {
        let t_max = self.last_node();
        let d = self.circuit.dim();
        let (sw, sl) = (self.omega.sqrt(), self.lambda.sqrt());
        let mut tr = Vec::new();
        for j in 0..=t_max {
            let id = j as NodeId;
            if j == 0 {
                tr.push((id, id, ComplexMatrix::identity(d).scale(sl)));
            } else {
                tr.push((id, id - 1, self.circuit.gate(j).adjoint().scale(sl)));
            }
            if j == t_max {
                tr.push((id, id, ComplexMatrix::identity(d).scale(sw)));
            } else if j + 1 == t_max {
                tr.push((
                    id,
                    id + 1,
                    match self.last_gate_index() {
                        0 => ComplexMatrix::identity(self.circuit.dim()),
                        k => self.circuit.gate(k).clone(),
                    }
                    .scale(sw),
                ));
            } else {
                tr.push((id, id + 1, self.circuit.gate(j + 1).scale(sw)));
            }
        }
        OpenQuantumWalk::new(d, (0..=t_max as NodeId).collect(), tr)
    }
}

/// One application of the chain update.
pub fn dqc_step(chain: &DqcChain, state: &BlockDiagonalState) -> Result<BlockDiagonalState> {
    let d = chain.circuit.dim();
    if state.coin_dim() != d {
        return Err(OqwError::DimensionMismatch {
            context: "register dimension".into(),
            expected: d,
            found: state.coin_dim(),
        });
    }
    let t_max = chain.last_node();
    if let Some(n) = state.support().find(|&n| n < 0 || n > t_max as NodeId) {
        return Err(OqwError::UnknownNode(n));
    }
    let zero = ComplexMatrix::zeros(d);
    let rho = |j: usize| state.block(j as NodeId).unwrap_or(&zero);
    let (w, l) = (chain.omega, chain.lambda);
    let mut blocks = BTreeMap::new();
    for j in 0..=t_max {
        let c = &chain.circuit;
        let next = if j == 0 {
            &rho(0).scale(l) + &c.backward(1, rho(1)).scale(l)
        } else if j == t_max {
            &rho(t_max).scale(w) + &c.forward(chain.last_gate_index(), rho(t_max - 1)).scale(w)
        } else {
            &c.forward(j, rho(j - 1)).scale(w) + &c.backward(j + 1, rho(j + 1)).scale(l)
        };
        blocks.insert(j as NodeId, next.hermitian_part());
    }
    BlockDiagonalState::from_blocks(d, blocks)
}

#[derive(Debug, Clone, PartialEq)]
pub struct SteadyState {
    pub state: BlockDiagonalState,
    pub steps: usize,
    /// Trace-norm distance between the last two iterates.
    pub residual: f64,
}

pub fn run_to_steady(
    chain: &DqcChain,
    initial: &BlockDiagonalState,
    tol: f64,
    max_steps: usize,
) -> Result<SteadyState> {
    run_to_steady_observed(chain, initial, tol, max_steps, |_, _| {})
}

/// As [`run_to_steady`], calling `observe(step, state)` after every step.
pub fn run_to_steady_observed(
    chain: &DqcChain,
    initial: &BlockDiagonalState,
    tol: f64,
    max_steps: usize,
    mut observe: impl FnMut(usize, &BlockDiagonalState),
) -> Result<SteadyState> {
    if tol.is_nan() || tol <= 0.0 {
        return Err(OqwError::InvalidParameter(format!(
            "tolerance must be positive, got {tol}"
        )));
    }
    let mut current = initial.clone();
    let mut residual = f64::INFINITY;
    for n in 1..=max_steps {
        let next = dqc_step(chain, &current)?;
        residual = next.frobenius_distance(&current);
        if residual < tol || n == max_steps {
            residual = next.trace_norm_distance(&current);
        }
        observe(n, &next);
        current = next;
        if residual < tol {
            return Ok(SteadyState {
                state: current,
                steps: n,
                residual,
            });
        }
    }
    Err(OqwError::NotConverged {
        steps: max_steps,
        residual,
    })
}

/// `Tr(projector rho_node)`.
pub fn success_probability(
    state: &BlockDiagonalState,
    projector: &ComplexMatrix,
    node: NodeId,
) -> Result<f64> {
    if projector.dim() != state.coin_dim() {
        return Err(OqwError::DimensionMismatch {
            context: "projector".into(),
            expected: state.coin_dim(),
            found: projector.dim(),
        });
    }
    let idempotency = (&(projector * projector) - projector).max_abs();
    if !projector.is_hermitian(1e-10) || idempotency > 1e-10 {
        return Err(OqwError::InvalidParameter(
            "projector must be hermitian and idempotent".into(),
        ));
    }
    Ok(state
        .block(node)
        .map(|rho| (projector * rho).real_trace())
        .unwrap_or(0.0))
}

/// Phase estimation benchmark description.
#[derive(Debug, Clone, PartialEq)]
pub struct PhaseEstimationSpec {
    pub n_ancilla: usize,
    /// Unitary on the target register (dimension a power of two).
    pub target_unitary: ComplexMatrix,
    /// Eigenvector of the target unitary loaded into the target register.
    pub target_state: ComplexVector,
}

impl PhaseEstimationSpec {
    /// Single target qubit with `U = diag(1, e^{2 pi i phase})`, prepared in `|1>`.
    pub fn diagonal_phase(n_ancilla: usize, phase: f64) -> Self {
        Self {
            n_ancilla,
            target_unitary: gates::phase(2.0 * std::f64::consts::PI * phase),
            target_state: ComplexVector::from_vec(vec![c64(0.0, 0.0), c64(1.0, 0.0)]),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct PhaseEstimation {
    pub circuit: GateCircuit,
    pub n_ancilla: usize,
    pub target_qubits: usize,
    /// `|0..0> (x) |u>`
    pub initial: ComplexVector,
}

impl PhaseEstimation {
    /// Projector onto ancilla readout `value` (most significant ancilla first).
    pub fn readout_projector(&self, value: usize) -> ComplexMatrix {
        let tdim = 1 << self.target_qubits;
        let mut diag = vec![0.0; self.circuit.dim()];
        for t in 0..tdim {
            diag[value * tdim + t] = 1.0;
        }
        ComplexMatrix::from_real_diagonal(&diag)
    }

    /// Distribution of the ancilla readout for a register state `rho`.
    pub fn readout_distribution(&self, rho: &ComplexMatrix) -> Vec<f64> {
        let tdim = 1 << self.target_qubits;
        (0..1usize << self.n_ancilla)
            .map(|a| {
                (0..tdim)
                    .map(|t| rho[(a * tdim + t, a * tdim + t)].re)
                    .sum()
            })
            .collect()
    }
}

/// Gates used by the inverse QFT on `n` qubits: `n` Hadamards,
/// `n(n-1)/2` controlled phases and `n(n-1)/2` nearest-neighbour swaps
/// for the bit reversal, `n^2` in total.
pub fn inverse_qft_gate_count(n: usize) -> usize {
    n * n
}

/// Inverse QFT on qubits `0..n` of an `n_qubits` register, as labelled
/// gates in application order.
pub fn inverse_qft_gates(n_qubits: usize, n: usize) -> Result<Vec<Gate>> {
    let mut out = Vec::with_capacity(inverse_qft_gate_count(n));
    // bit reversal first (the QFT ends with it)
    for pass in 0..n {
        for q in 0..n.saturating_sub(1 + pass) {
            out.push(Gate {
                label: format!("swap({q},{})", q + 1),
                matrix: gates::embed(n_qubits, &[q, q + 1], &gates::swap_gate())?,
            });
        }
    }
    for j in (0..n).rev() {
        for k in ((j + 1)..n).rev() {
            let m = k - j + 1;
            let angle = -2.0 * std::f64::consts::PI / (1u64 << m) as f64;
            out.push(Gate {
                label: format!("cphase({k}->{j},-2pi/2^{m})"),
                matrix: gates::controlled_on(n_qubits, k, &[j], &gates::phase(angle))?,
            });
        }
        out.push(Gate {
            label: format!("h({j})"),
            matrix: gates::embed(n_qubits, &[j], &gates::hadamard())?,
        });
    }
    Ok(out)
}

/// Hadamard layer, controlled powers `U^(2^(n-1-j))` on ancilla `j`, then
/// the inverse QFT: `1 + n + n^2` gates. Ancillas occupy the most
/// significant qubits.
pub fn build_phase_estimation(spec: &PhaseEstimationSpec) -> Result<PhaseEstimation> {
    let n = spec.n_ancilla;
    if n == 0 {
        return Err(OqwError::InvalidParameter(
            "phase estimation needs at least one ancilla".into(),
        ));
    }
    let tdim = spec.target_unitary.dim();
    if !tdim.is_power_of_two() || tdim < 2 {
        return Err(OqwError::InvalidParameter(format!(
            "target unitary dimension {tdim} is not a power of two"
        )));
    }
    if spec.target_state.len() != tdim {
        return Err(OqwError::DimensionMismatch {
            context: "target state".into(),
            expected: tdim,
            found: spec.target_state.len(),
        });
    }
    let m = tdim.trailing_zeros() as usize;
    let total = n + m;
    if total > gates::MAX_QUBITS {
        return Err(OqwError::Capacity {
            what: "phase estimation register (qubits)",
            required: total,
            limit: gates::MAX_QUBITS,
        });
    }
    let ancillas: Vec<usize> = (0..n).collect();
    let targets: Vec<usize> = (n..total).collect();

    let mut circuit = vec![Gate {
        label: "hadamard-layer".into(),
        matrix: gates::layer(total, &ancillas, &gates::hadamard())?,
    }];
    for j in 0..n {
        let power = (n - 1 - j) as u32;
        circuit.push(Gate {
            label: format!("c-U^{}({j})", 1u64 << power),
            matrix: gates::controlled_on(
                total,
                j,
                &targets,
                &gates::power_of_two(&spec.target_unitary, power),
            )?,
        });
    }
    circuit.extend(inverse_qft_gates(total, n)?);
    debug_assert_eq!(circuit.len(), 1 + n + inverse_qft_gate_count(n));

    let mut initial = ComplexVector::zeros(1 << total);
    initial.rows_mut(0, tdim).copy_from(&spec.target_state);
    Ok(PhaseEstimation {
        circuit: GateCircuit::new(total, circuit)?,
        n_ancilla: n,
        target_qubits: m,
        initial,
    })
}

#[derive(Debug, Clone, PartialEq)]
pub struct SweepRow {
    pub omega: f64,
    pub steps_to_steady: usize,
    /// Steady probability of the last node.
    pub p_last: f64,
    pub success_probability: f64,
}

/// Runs the chain to steady state for every `omega`, in parallel.
pub fn sweep_omega(
    circuit: &GateCircuit,
    psi0: &ComplexVector,
    projector: &ComplexMatrix,
    omegas: &[f64],
    tol: f64,
    max_steps: usize,
) -> Result<Vec<SweepRow>> {
    omegas
        .par_iter()
        .map(|&omega| {
            let chain = DqcChain::new(circuit.clone(), omega)?;
            let initial = chain.initial_state(psi0)?;
            let steady = run_to_steady(&chain, &initial, tol, max_steps)?;
            let last = chain.last_node() as NodeId;
            Ok(SweepRow {
                omega,
                steps_to_steady: steady.steps,
                p_last: steady
                    .state
                    .block(last)
                    .map(|b| b.real_trace())
                    .unwrap_or(0.0),
                success_probability: success_probability(&steady.state, projector, last)?,
            })
        })
        .collect()
}
