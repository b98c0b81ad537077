//! JSON file formats for walks, states, lattice walks, stochastic matrices
//! and circuits.
//!
//! Every matrix is a flat row-major list of entries. An entry is either a
//! scalar (real) or a `[re, im]` pair, and each scalar is a JSON number or
//! a string expression such as `"3/5"`, `"-sqrt(3)/2"` or `"pi/4"`.
//! Non-finite values are rejected.

use std::collections::BTreeMap;

use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::classical::ClassicalTransitionMatrix;
use crate::dqc::{Gate, GateCircuit};
use crate::error::{OqwError, Result};
use crate::gates;
use crate::lattice::HomogeneousWalkZ;
use crate::matrix::{c64, ComplexMatrix, ComplexVector};
use crate::walk::{BlockDiagonalState, OpenQuantumWalk};
use crate::NodeId;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum Scalar {
    Number(f64),
    Expr(String),
}

impl Scalar {
    pub fn value(&self) -> Result<f64> {
        let v = match self {
            Scalar::Number(x) => *x,
            Scalar::Expr(s) => parse_scalar(s)?,
        };
        if !v.is_finite() {
            return Err(OqwError::NonFinite(format!("entry {self:?}")));
        }
        Ok(v)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum Entry {
    Real(Scalar),
    Complex([Scalar; 2]),
}

impl Entry {
    pub fn value(&self) -> Result<Complex64> {
        match self {
            Entry::Real(x) => Ok(c64(x.value()?, 0.0)),
            Entry::Complex([re, im]) => Ok(c64(re.value()?, im.value()?)),
        }
    }

    fn from_complex(z: Complex64) -> Self {
        Entry::Complex([Scalar::Number(z.re), Scalar::Number(z.im)])
    }
}

pub fn entries_to_matrix(dim: usize, entries: &[Entry], context: &str) -> Result<ComplexMatrix> {
    if entries.len() != dim * dim {
        return Err(OqwError::DimensionMismatch {
            context: context.to_string(),
            expected: dim * dim,
            found: entries.len(),
        });
    }
    let values = entries
        .iter()
        .map(|e| e.value().map_err(|err| in_context(err, context)))
        .collect::<Result<Vec<_>>>()?;
    ComplexMatrix::from_row_major(dim, &values).map_err(|err| in_context(err, context))
}

/// Square matrix whose dimension is inferred from the entry count.
pub fn entries_to_square(entries: &[Entry], context: &str) -> Result<ComplexMatrix> {
    let dim = (entries.len() as f64).sqrt().round() as usize;
    if dim == 0 || dim * dim != entries.len() {
        return Err(OqwError::Parse(format!(
            "{context}: {} entries do not form a square matrix",
            entries.len()
        )));
    }
    entries_to_matrix(dim, entries, context)
}

pub fn entries_to_vector(entries: &[Entry], context: &str) -> Result<ComplexVector> {
    let values = entries
        .iter()
        .map(|e| e.value().map_err(|err| in_context(err, context)))
        .collect::<Result<Vec<_>>>()?;
    Ok(ComplexVector::from_vec(values))
}

pub fn matrix_to_entries(m: &ComplexMatrix) -> Vec<Entry> {
    m.to_row_major()
        .into_iter()
        .map(Entry::from_complex)
        .collect()
}

fn in_context(err: OqwError, context: &str) -> OqwError {
    match err {
        OqwError::NonFinite(what) => OqwError::NonFinite(format!("{context}: {what}")),
        OqwError::Parse(what) => OqwError::Parse(format!("{context}: {what}")),
        other => other,
    }
}

fn from_json<T: for<'de> Deserialize<'de>>(text: &str, what: &str) -> Result<T> {
    serde_json::from_str(text).map_err(|e| OqwError::Parse(format!("{what}: {e}")))
}

fn to_json<T: Serialize>(value: &T) -> String {
    let mut s = serde_json::to_string_pretty(value).expect("serializable");
    s.push('\n');
    s
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TransitionSpec {
    pub from: NodeId,
    pub to: NodeId,
    pub matrix: Vec<Entry>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct WalkFile {
    pub coin_dim: usize,
    pub nodes: Vec<NodeId>,
    pub transitions: Vec<TransitionSpec>,
}

impl WalkFile {
    /// Builds the walk; the normalization check is left to the caller.
    pub fn to_walk(&self) -> Result<OpenQuantumWalk> {
        let mut transitions = Vec::with_capacity(self.transitions.len());
        for t in &self.transitions {
            let ctx = format!("transition {} -> {}", t.from, t.to);
            transitions.push((
                t.from,
                t.to,
                entries_to_matrix(self.coin_dim, &t.matrix, &ctx)?,
            ));
        }
        OpenQuantumWalk::new(self.coin_dim, self.nodes.clone(), transitions)
    }

    pub fn from_walk(walk: &OpenQuantumWalk) -> Self {
        Self {
            coin_dim: walk.coin_dim(),
            nodes: walk.nodes().to_vec(),
            transitions: walk
                .transitions()
                .map(|(from, to, m)| TransitionSpec {
                    from,
                    to,
                    matrix: matrix_to_entries(m),
                })
                .collect(),
        }
    }
}

pub fn parse_walk(text: &str) -> Result<OpenQuantumWalk> {
    from_json::<WalkFile>(text, "walk file")?.to_walk()
}

pub fn write_walk(walk: &OpenQuantumWalk) -> String {
    to_json(&WalkFile::from_walk(walk))
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct BlockSpec {
    pub node: NodeId,
    pub matrix: Vec<Entry>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct StateFile {
    pub blocks: Vec<BlockSpec>,
}

/// Validated block-diagonal state; the coin dimension comes from the blocks.
pub fn parse_state(text: &str) -> Result<BlockDiagonalState> {
    let file: StateFile = from_json(text, "state file")?;
    let first = file
        .blocks
        .first()
        .ok_or_else(|| OqwError::InvalidState("state file has no blocks".into()))?;
    let dim = entries_to_square(&first.matrix, &format!("block at node {}", first.node))?.dim();
    let mut blocks = BTreeMap::new();
    for b in &file.blocks {
        let m = entries_to_matrix(dim, &b.matrix, &format!("block at node {}", b.node))?;
        if blocks.insert(b.node, m).is_some() {
            return Err(OqwError::Duplicate(format!("block at node {}", b.node)));
        }
    }
    BlockDiagonalState::new(dim, blocks)
}

pub fn write_state(state: &BlockDiagonalState) -> String {
    to_json(&StateFile {
        blocks: state
            .blocks()
            .iter()
            .map(|(&node, m)| BlockSpec {
                node,
                matrix: matrix_to_entries(m),
            })
            .collect(),
    })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct LatticeFile {
    pub coin_dim: usize,
    /// Operator for a jump to the right.
    pub right: Vec<Entry>,
    /// Operator for a jump to the left.
    pub left: Vec<Entry>,
}

pub fn parse_lattice(text: &str, tol: f64) -> Result<HomogeneousWalkZ> {
    let file: LatticeFile = from_json(text, "lattice walk file")?;
    let right = entries_to_matrix(file.coin_dim, &file.right, "right-jump operator")?;
    let left = entries_to_matrix(file.coin_dim, &file.left, "left-jump operator")?;
    HomogeneousWalkZ::new(right, left, tol)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct StochasticFile {
    /// `rows[from][to]`
    pub rows: Vec<Vec<Scalar>>,
}

pub fn parse_stochastic(text: &str) -> Result<ClassicalTransitionMatrix> {
    let file: StochasticFile = from_json(text, "stochastic matrix file")?;
    let rows = file
        .rows
        .iter()
        .map(|row| row.iter().map(Scalar::value).collect::<Result<Vec<_>>>())
        .collect::<Result<Vec<_>>>()?;
    ClassicalTransitionMatrix::new(rows)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GateSpec {
    /// Named constructor (`h`, `x`, `y`, `z`, `s`, `t`, `phase`, `cnot`,
    /// `cz`, `cphase`, `swap`); mutually exclusive with `matrix`.
    #[serde(default)]
    pub name: Option<String>,
    #[serde(default)]
    pub param: Option<Scalar>,
    #[serde(default)]
    pub matrix: Option<Vec<Entry>>,
    /// Qubits the gate acts on, most significant first. Omitted for a
    /// full-register matrix.
    #[serde(default)]
    pub qubits: Option<Vec<usize>>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CircuitFile {
    pub qubits: usize,
    pub gates: Vec<GateSpec>,
    /// Initial register vector; defaults to `|0..0>`.
    #[serde(default)]
    pub initial: Option<Vec<Entry>>,
    /// Basis states counted as success at the output node.
    #[serde(default)]
    pub accept: Option<Vec<usize>>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ParsedCircuit {
    pub circuit: GateCircuit,
    pub initial: ComplexVector,
    /// Diagonal projector onto the accepted basis states (identity if none given).
    pub projector: ComplexMatrix,
}

pub fn parse_circuit(text: &str) -> Result<ParsedCircuit> {
    let file: CircuitFile = from_json(text, "circuit file")?;
    let n = file.qubits;
    if n == 0 || n > gates::MAX_QUBITS {
        return Err(OqwError::InvalidParameter(format!(
            "register of {n} qubits (supported: 1..={})",
            gates::MAX_QUBITS
        )));
    }
    let dim = 1usize << n;
    let mut list = Vec::with_capacity(file.gates.len());
    for (k, g) in file.gates.iter().enumerate() {
        let ctx = format!("gate {}", k + 1);
        let (label, local) = match (&g.name, &g.matrix) {
            (Some(name), None) => {
                let param = g.param.as_ref().map(Scalar::value).transpose()?;
                (
                    name.clone(),
                    gates::named(name, param).map_err(|e| in_context(e, &ctx))?,
                )
            }
            (None, Some(entries)) => ("matrix".to_string(), entries_to_square(entries, &ctx)?),
            _ => {
                return Err(OqwError::Parse(format!(
                    "{ctx}: give exactly one of `name` or `matrix`"
                )));
            }
        };
        let matrix = match &g.qubits {
            Some(qs) => gates::embed(n, qs, &local)?,
            None if local.dim() == dim => local,
            None => {
                return Err(OqwError::DimensionMismatch {
                    context: format!("{ctx} without `qubits`"),
                    expected: dim,
                    found: local.dim(),
                });
            }
        };
        list.push(Gate { label, matrix });
    }
    let circuit = GateCircuit::new(n, list)?;
    let initial = match &file.initial {
        Some(entries) => {
            let v = entries_to_vector(entries, "initial register state")?;
            if v.len() != dim {
                return Err(OqwError::DimensionMismatch {
                    context: "initial register state".into(),
                    expected: dim,
                    found: v.len(),
                });
            }
            let norm = v.norm();
            if (norm - 1.0).abs() > 1e-10 {
                return Err(OqwError::InvalidState(format!(
                    "initial register state has norm {norm}"
                )));
            }
            v
        }
        None => {
            let mut v = ComplexVector::zeros(dim);
            v[0] = c64(1.0, 0.0);
            v
        }
    };
    let projector = match &file.accept {
        Some(list) => {
            let mut diag = vec![0.0; dim];
            for &b in list {
                if b >= dim {
                    return Err(OqwError::InvalidParameter(format!(
                        "accepted basis state {b} outside register"
                    )));
                }
                diag[b] = 1.0;
            }
            ComplexMatrix::from_real_diagonal(&diag)
        }
        None => ComplexMatrix::identity(dim),
    };
    Ok(ParsedCircuit {
        circuit,
        initial,
        projector,
    })
}

pub fn parse_vector(text: &str) -> Result<ComplexVector> {
    let entries: Vec<Entry> = from_json(text, "vector")?;
    entries_to_vector(&entries, "vector")
}

/// Evaluates a scalar expression: numbers, `pi`, `+ - * /`, parentheses
/// and `sqrt(..)`.
pub fn parse_scalar(text: &str) -> Result<f64> {
    let mut p = ExprParser {
        src: text.as_bytes(),
        pos: 0,
    };
    let v = p.expr()?;
    p.skip_ws();
    if p.pos != p.src.len() {
        return Err(OqwError::Parse(format!(
            "unexpected input in '{text}' at offset {}",
            p.pos
        )));
    }
    if !v.is_finite() {
        return Err(OqwError::NonFinite(format!("'{text}'")));
    }
    Ok(v)
}

struct ExprParser<'a> {
    src: &'a [u8],
    pos: usize,
}

impl ExprParser<'_> {
    fn skip_ws(&mut self) {
        while self.pos < self.src.len() && self.src[self.pos].is_ascii_whitespace() {
            self.pos += 1;
        }
    }

    fn peek(&mut self) -> Option<u8> {
        self.skip_ws();
        self.src.get(self.pos).copied()
    }

    fn error(&self, what: &str) -> OqwError {
        OqwError::Parse(format!(
            "{what} in '{}' at offset {}",
            String::from_utf8_lossy(self.src),
            self.pos
        ))
    }

    fn expr(&mut self) -> Result<f64> {
        let mut acc = self.term()?;
        while let Some(op @ (b'+' | b'-')) = self.peek() {
            self.pos += 1;
            let rhs = self.term()?;
            acc = if op == b'+' { acc + rhs } else { acc - rhs };
        }
        Ok(acc)
    }

    fn term(&mut self) -> Result<f64> {
        let mut acc = self.factor()?;
        while let Some(op @ (b'*' | b'/')) = self.peek() {
            self.pos += 1;
            let rhs = self.factor()?;
            acc = if op == b'*' { acc * rhs } else { acc / rhs };
        }
        Ok(acc)
    }

    fn factor(&mut self) -> Result<f64> {
        match self.peek() {
            Some(b'-') => {
                self.pos += 1;
                Ok(-self.factor()?)
            }
            Some(b'+') => {
                self.pos += 1;
                self.factor()
            }
            Some(b'(') => {
                self.pos += 1;
                let v = self.expr()?;
                self.expect(b')')?;
                Ok(v)
            }
            Some(c) if c.is_ascii_digit() || c == b'.' => self.number(),
            Some(c) if c.is_ascii_alphabetic() => {
                let start = self.pos;
                while self.pos < self.src.len() && self.src[self.pos].is_ascii_alphanumeric() {
                    self.pos += 1;
                }
                let ident = &self.src[start..self.pos];
                if [&b"nan"[..], b"inf", b"infinity"]
                    .iter()
                    .any(|w| ident.eq_ignore_ascii_case(w))
                {
                    return Err(OqwError::NonFinite(format!(
                        "'{}'",
                        String::from_utf8_lossy(self.src)
                    )));
                }
                match ident {
                    b"pi" => Ok(std::f64::consts::PI),
                    b"sqrt" => {
                        self.expect(b'(')?;
                        let v = self.expr()?;
                        self.expect(b')')?;
                        if v < 0.0 {
                            return Err(self.error("square root of a negative number"));
                        }
                        Ok(v.sqrt())
                    }
                    _ => {
                        self.pos = start;
                        Err(self.error("unknown identifier"))
                    }
                }
            }
            _ => Err(self.error("expected a number")),
        }
    }

    fn number(&mut self) -> Result<f64> {
        let start = self.pos;
        while self.pos < self.src.len()
            && (self.src[self.pos].is_ascii_digit() || self.src[self.pos] == b'.')
        {
            self.pos += 1;
        }
        if self.pos < self.src.len() && matches!(self.src[self.pos], b'e' | b'E') {
            self.pos += 1;
            if self.pos < self.src.len() && matches!(self.src[self.pos], b'+' | b'-') {
                self.pos += 1;
            }
            while self.pos < self.src.len() && self.src[self.pos].is_ascii_digit() {
                self.pos += 1;
            }
        }
        std::str::from_utf8(&self.src[start..self.pos])
            .expect("ascii")
            .parse::<f64>()
            .map_err(|_| self.error("malformed number"))
    }

    fn expect(&mut self, c: u8) -> Result<()> {
        if self.peek() == Some(c) {
            self.pos += 1;
            Ok(())
        } else {
            Err(self.error(&format!("expected '{}'", c as char)))
        }
    }
}
