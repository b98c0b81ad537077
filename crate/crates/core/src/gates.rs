//! Dense gate constructors on an `n`-qubit register.
//!
//! Qubit 0 is the most significant bit of the basis index.

use std::f64::consts::{FRAC_1_SQRT_2, PI};

use nalgebra::DMatrix;

use crate::error::{OqwError, Result};
use crate::matrix::{c64, ComplexMatrix};

/// Registers above this many qubits are refused.
pub const MAX_QUBITS: usize = 10;

pub fn hadamard() -> ComplexMatrix {
    ComplexMatrix::from_real_rows(&[&[1.0, 1.0], &[1.0, -1.0]])
        .expect("2x2")
        .scale(FRAC_1_SQRT_2)
}

pub fn pauli_x() -> ComplexMatrix {
    ComplexMatrix::from_real_rows(&[&[0.0, 1.0], &[1.0, 0.0]]).expect("2x2")
}

pub fn pauli_y() -> ComplexMatrix {
    let z = c64(0.0, 0.0);
    ComplexMatrix::from_row_major(2, &[z, c64(0.0, -1.0), c64(0.0, 1.0), z]).expect("2x2")
}

pub fn pauli_z() -> ComplexMatrix {
    ComplexMatrix::from_real_diagonal(&[1.0, -1.0])
}

/// `diag(1, e^{i angle})`
pub fn phase(angle: f64) -> ComplexMatrix {
    ComplexMatrix::from_diagonal(&[c64(1.0, 0.0), c64(0.0, angle).exp()])
}

pub fn swap_gate() -> ComplexMatrix {
    ComplexMatrix::from_real_rows(&[
        &[1.0, 0.0, 0.0, 0.0],
        &[0.0, 0.0, 1.0, 0.0],
        &[0.0, 1.0, 0.0, 0.0],
        &[0.0, 0.0, 0.0, 1.0],
    ])
    .expect("4x4")
}

/// `|0><0| (x) I + |1><1| (x) u`
pub fn controlled(u: &ComplexMatrix) -> ComplexMatrix {
    let d = u.dim();
    let mut m = DMatrix::identity(2 * d, 2 * d);
    m.view_mut((d, d), (d, d)).copy_from(u.inner());
    ComplexMatrix::new(m).expect("square")
}

fn check_register(n_qubits: usize, qubits: &[usize], gate: &ComplexMatrix) -> Result<()> {
    if n_qubits == 0 || n_qubits > MAX_QUBITS {
        return Err(OqwError::InvalidParameter(format!(
            "register of {n_qubits} qubits (supported: 1..={MAX_QUBITS})"
        )));
    }
    if gate.dim() != 1 << qubits.len() {
        return Err(OqwError::DimensionMismatch {
            context: "gate acting on listed qubits".into(),
            expected: 1 << qubits.len(),
            found: gate.dim(),
        });
    }
    for (k, &q) in qubits.iter().enumerate() {
        if q >= n_qubits {
            return Err(OqwError::InvalidParameter(format!(
                "qubit {q} outside register of {n_qubits}"
            )));
        }
        if qubits[..k].contains(&q) {
            return Err(OqwError::InvalidParameter(format!(
                "qubit {q} listed twice"
            )));
        }
    }
    Ok(())
}

/// Lifts `gate` acting on `qubits` (first listed is the gate's most
/// significant bit) to the full register.
pub fn embed(n_qubits: usize, qubits: &[usize], gate: &ComplexMatrix) -> Result<ComplexMatrix> {
    check_register(n_qubits, qubits, gate)?;
    let dim = 1usize << n_qubits;
    let k = qubits.len();
    let shift = |q: usize| n_qubits - 1 - q;
    let mask: usize = qubits.iter().map(|&q| 1 << shift(q)).sum();
    let sub_index = |x: usize| {
        qubits
            .iter()
            .fold(0usize, |acc, &q| (acc << 1) | ((x >> shift(q)) & 1))
    };
    let with_sub = |x: usize, s: usize| {
        let mut y = x & !mask;
        for (pos, &q) in qubits.iter().enumerate() {
            y |= ((s >> (k - 1 - pos)) & 1) << shift(q);
        }
        y
    };
    let mut m = DMatrix::zeros(dim, dim);
    for col in 0..dim {
        let sc = sub_index(col);
        for sr in 0..(1 << k) {
            let v = gate[(sr, sc)];
            if v != c64(0.0, 0.0) {
                m[(with_sub(col, sr), col)] = v;
            }
        }
    }
    ComplexMatrix::new(m)
}

/// The same single-qubit gate on every listed qubit, as one operator.
pub fn layer(n_qubits: usize, qubits: &[usize], gate: &ComplexMatrix) -> Result<ComplexMatrix> {
    let mut out = ComplexMatrix::identity(1 << n_qubits);
    for &q in qubits {
        out = &embed(n_qubits, &[q], gate)? * &out;
    }
    Ok(out)
}

/// `u` on `targets` controlled by `control`.
pub fn controlled_on(
    n_qubits: usize,
    control: usize,
    targets: &[usize],
    u: &ComplexMatrix,
) -> Result<ComplexMatrix> {
    let mut qubits = vec![control];
    qubits.extend_from_slice(targets);
    embed(n_qubits, &qubits, &controlled(u))
}

/// `u^(2^k)` by repeated squaring.
pub fn power_of_two(u: &ComplexMatrix, k: u32) -> ComplexMatrix {
    let mut out = u.clone();
    for _ in 0..k {
        out = &out * &out;
    }
    out
}

/// The QFT matrix `F_{jk} = exp(2 pi i jk / N) / sqrt N`.
pub fn dense_qft(n_qubits: usize) -> ComplexMatrix {
    let n = 1usize << n_qubits;
    let norm = 1.0 / (n as f64).sqrt();
    let m = DMatrix::from_fn(n, n, |j, k| {
        let angle = 2.0 * PI * ((j * k) % n) as f64 / n as f64;
        c64(0.0, angle).exp() * norm
    });
    ComplexMatrix::new(m).expect("square")
}

/// Named gate lookup used by circuit files.
pub fn named(name: &str, param: Option<f64>) -> Result<ComplexMatrix> {
    Ok(match name.to_ascii_lowercase().as_str() {
        "h" | "hadamard" => hadamard(),
        "x" => pauli_x(),
        "y" => pauli_y(),
        "z" => pauli_z(),
        "s" => phase(PI / 2.0),
        "t" => phase(PI / 4.0),
        "phase" | "p" => {
            phase(param.ok_or_else(|| OqwError::Parse("gate 'phase' needs an angle".into()))?)
        }
        "cnot" | "cx" => controlled(&pauli_x()),
        "cz" => controlled(&pauli_z()),
        "cphase" | "cp" => {
            controlled(&phase(param.ok_or_else(|| {
                OqwError::Parse("gate 'cphase' needs an angle".into())
            })?))
        }
        "swap" => swap_gate(),
        other => return Err(OqwError::Parse(format!("unknown gate '{other}'"))),
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn embed_single_qubit_msb_first() {
        // X on qubit 0 of 2: |00> -> |10> (index 0 -> 2)
        let x0 = embed(2, &[0], &pauli_x()).unwrap();
        assert_eq!(x0[(2, 0)], c64(1.0, 0.0));
        let x1 = embed(2, &[1], &pauli_x()).unwrap();
        assert_eq!(x1[(1, 0)], c64(1.0, 0.0));
    }

    #[test]
    fn cnot_orientation() {
        let c01 = embed(2, &[0, 1], &controlled(&pauli_x())).unwrap();
        // |10> -> |11>
        assert_eq!(c01[(3, 2)], c64(1.0, 0.0));
        let c10 = embed(2, &[1, 0], &controlled(&pauli_x())).unwrap();
        // |01> -> |11>
        assert_eq!(c10[(3, 1)], c64(1.0, 0.0));
    }

    #[test]
    fn swap_embedding_matches_permutation() {
        let s = embed(3, &[0, 2], &swap_gate()).unwrap();
        // |100> (4) -> |001> (1)
        assert_eq!(s[(1, 4)], c64(1.0, 0.0));
        assert!(s.is_unitary(1e-14));
    }

    #[test]
    fn register_checks() {
        assert!(embed(2, &[2], &pauli_x()).is_err());
        assert!(embed(2, &[0, 0], &swap_gate()).is_err());
        assert!(embed(11, &[0], &pauli_x()).is_err());
        assert!(embed(2, &[0], &swap_gate()).is_err());
        assert!(named("frobnicate", None).is_err());
        assert!(named("cphase", None).is_err());
    }

    #[test]
    fn qft_is_unitary() {
        assert!(dense_qft(3).is_unitary(1e-12));
    }
}
