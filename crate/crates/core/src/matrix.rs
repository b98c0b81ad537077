//! Dense square complex matrices.
//!
//! [`ComplexMatrix`] is a thin wrapper over `nalgebra::DMatrix<Complex64>`
//! that keeps the matrix square and adds the predicates the rest of the
//! crate leans on (hermiticity, positivity, unitarity).

use std::fmt;
use std::ops::{Add, Index, Mul, Sub};

use nalgebra::{DMatrix, DVector};
use num_complex::Complex64;

use crate::error::{OqwError, Result};

/// Column vector of complex amplitudes.
pub type ComplexVector = DVector<Complex64>;

#[inline]
pub fn c64(re: f64, im: f64) -> Complex64 {
    Complex64::new(re, im)
}

#[derive(Clone, PartialEq)]
pub struct ComplexMatrix(DMatrix<Complex64>);

impl ComplexMatrix {
    pub fn new(inner: DMatrix<Complex64>) -> Result<Self> {
        let (rows, cols) = inner.shape();
        if rows != cols || rows == 0 {
            return Err(OqwError::NotSquare { rows, cols });
        }
        if inner.iter().any(|z| !z.re.is_finite() || !z.im.is_finite()) {
            return Err(OqwError::NonFinite("matrix".into()));
        }
        Ok(Self(inner))
    }

    pub fn zeros(dim: usize) -> Self {
        assert!(dim > 0, "matrix dimension must be positive");
        Self(DMatrix::zeros(dim, dim))
    }

    pub fn identity(dim: usize) -> Self {
        assert!(dim > 0, "matrix dimension must be positive");
        Self(DMatrix::identity(dim, dim))
    }

    /// Builds a `dim`x`dim` matrix from row-major entries.
    pub fn from_row_major(dim: usize, entries: &[Complex64]) -> Result<Self> {
        if dim == 0 {
            return Err(OqwError::NotSquare { rows: 0, cols: 0 });
        }
        if entries.len() != dim * dim {
            return Err(OqwError::DimensionMismatch {
                context: "row-major matrix entries".into(),
                expected: dim * dim,
                found: entries.len(),
            });
        }
        Self::new(DMatrix::from_row_slice(dim, dim, entries))
    }

    pub fn from_real_rows(rows: &[&[f64]]) -> Result<Self> {
        let dim = rows.len();
        let mut entries = Vec::with_capacity(dim * dim);
        for row in rows {
            if row.len() != dim {
                return Err(OqwError::NotSquare {
                    rows: dim,
                    cols: row.len(),
                });
            }
            entries.extend(row.iter().map(|&x| c64(x, 0.0)));
        }
        Self::from_row_major(dim, &entries)
    }

    pub fn from_diagonal(diag: &[Complex64]) -> Self {
        assert!(!diag.is_empty(), "matrix dimension must be positive");
        Self(DMatrix::from_diagonal(&DVector::from_column_slice(diag)))
    }

    pub fn from_real_diagonal(diag: &[f64]) -> Self {
        let d: Vec<_> = diag.iter().map(|&x| c64(x, 0.0)).collect();
        Self::from_diagonal(&d)
    }

    /// The projector `|v><v|`.
    pub fn outer(v: &ComplexVector) -> Self {
        assert!(!v.is_empty(), "vector dimension must be positive");
        Self(v * v.adjoint())
    }

    pub fn dim(&self) -> usize {
        self.0.nrows()
    }

    pub fn inner(&self) -> &DMatrix<Complex64> {
        &self.0
    }

    pub fn into_inner(self) -> DMatrix<Complex64> {
        self.0
    }

    /// Row-major copy of the entries.
    pub fn to_row_major(&self) -> Vec<Complex64> {
        let d = self.dim();
        let mut out = Vec::with_capacity(d * d);
        for r in 0..d {
            for c in 0..d {
                out.push(self.0[(r, c)]);
            }
        }
        out
    }

    pub fn adjoint(&self) -> Self {
        Self(self.0.adjoint())
    }

    pub fn scale(&self, factor: f64) -> Self {
        Self(&self.0 * c64(factor, 0.0))
    }

    pub fn scale_complex(&self, factor: Complex64) -> Self {
        Self(&self.0 * factor)
    }

    pub fn trace(&self) -> Complex64 {
        self.0.trace()
    }

    /// `Re Tr`, the probability carried by a density block.
    pub fn real_trace(&self) -> f64 {
        self.0.trace().re
    }

    /// `op · self · op†`
    pub fn conjugated_by(&self, op: &ComplexMatrix) -> Self {
        Self(&op.0 * &self.0 * op.0.adjoint())
    }

    /// `op† · self · op`
    pub fn conjugated_by_adjoint(&self, op: &ComplexMatrix) -> Self {
        Self(op.0.adjoint() * &self.0 * &op.0)
    }

    pub fn apply(&self, v: &ComplexVector) -> ComplexVector {
        &self.0 * v
    }

    /// `(A + A†) / 2`
    pub fn hermitian_part(&self) -> Self {
        Self((&self.0 + self.0.adjoint()) * c64(0.5, 0.0))
    }

    pub fn kron(&self, other: &ComplexMatrix) -> Self {
        Self(self.0.kronecker(&other.0))
    }

    pub fn max_abs_diff(&self, other: &ComplexMatrix) -> f64 {
        assert_eq!(self.dim(), other.dim(), "dimension mismatch");
        self.0
            .iter()
            .zip(other.0.iter())
            .map(|(a, b)| (a - b).norm())
            .fold(0.0, f64::max)
    }

    pub fn max_abs(&self) -> f64 {
        self.0.iter().map(|z| z.norm()).fold(0.0, f64::max)
    }

    /// Largest singular value.
    pub fn operator_norm(&self) -> f64 {
        self.0
            .clone()
            .singular_values()
            .iter()
            .copied()
            .fold(0.0, f64::max)
    }

    /// Eigenvalues of the hermitian part, ascending.
    pub fn hermitian_eigenvalues(&self) -> Vec<f64> {
        let mut ev: Vec<f64> = self
            .hermitian_part()
            .0
            .symmetric_eigenvalues()
            .iter()
            .copied()
            .collect();
        ev.sort_by(|a, b| a.total_cmp(b));
        ev
    }

    /// Trace norm of the hermitian part.
    pub fn frobenius_norm(&self) -> f64 {
        self.0.norm()
    }

    pub fn hermitian_trace_norm(&self) -> f64 {
        self.hermitian_eigenvalues().iter().map(|x| x.abs()).sum()
    }

    pub fn is_hermitian(&self, tol: f64) -> bool {
        let d = self.dim();
        (0..d).all(|r| (r..d).all(|c| (self.0[(r, c)] - self.0[(c, r)].conj()).norm() <= tol))
    }

    pub fn is_positive_semidefinite(&self, tol: f64) -> bool {
        self.is_hermitian(tol)
            && self
                .hermitian_eigenvalues()
                .first()
                .is_none_or(|&min| min >= -tol)
    }

    /// Operator-norm distance of `self† self` from the identity.
    pub fn unitarity_defect(&self) -> f64 {
        let gram = ComplexMatrix(self.0.adjoint() * &self.0);
        (&gram - &ComplexMatrix::identity(self.dim())).operator_norm()
    }

    pub fn is_unitary(&self, tol: f64) -> bool {
        self.unitarity_defect() <= tol
    }

    pub fn is_normal(&self, tol: f64) -> bool {
        let a = &self.0;
        (a * a.adjoint() - a.adjoint() * a).norm() <= tol
    }
}

impl Index<(usize, usize)> for ComplexMatrix {
    type Output = Complex64;
    fn index(&self, idx: (usize, usize)) -> &Complex64 {
        &self.0[idx]
    }
}

impl<'a> Mul<&'a ComplexMatrix> for &'a ComplexMatrix {
    type Output = ComplexMatrix;
    fn mul(self, rhs: &'a ComplexMatrix) -> ComplexMatrix {
        ComplexMatrix(&self.0 * &rhs.0)
    }
}

impl<'a> Add<&'a ComplexMatrix> for &'a ComplexMatrix {
    type Output = ComplexMatrix;
    fn add(self, rhs: &'a ComplexMatrix) -> ComplexMatrix {
        ComplexMatrix(&self.0 + &rhs.0)
    }
}

impl<'a> Sub<&'a ComplexMatrix> for &'a ComplexMatrix {
    type Output = ComplexMatrix;
    fn sub(self, rhs: &'a ComplexMatrix) -> ComplexMatrix {
        ComplexMatrix(&self.0 - &rhs.0)
    }
}

impl fmt::Debug for ComplexMatrix {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "ComplexMatrix{}", self.0)
    }
}
