//! Dense complex matrices and the Hermitian spectral toolkit the rest of the
//! crate is built on: eigendecomposition, spectral functions and Kronecker
//! products.
//!
//! Storage and the eigensolver are delegated to `nalgebra`. Every matrix
//! handled here is at most [`DEFAULT_DIM_CAP`] wide, so dense routines are
//! always adequate.

use nalgebra::{DMatrix, SymmetricEigen};
use num_complex::Complex64;

use crate::error::{Error, Result};

pub type C64 = Complex64;

/// Largest matrix dimension produced by Kronecker products and tensor powers.
pub const DEFAULT_DIM_CAP: usize = 64;

/// Tolerance on `‖m − m†‖_F` (relative to `max(1, ‖m‖_F)`).
pub const HERMITIAN_TOL: f64 = 1e-10;

/// Eigenvalues at or below this are treated as zero by domain checks.
pub const ZERO_EIGENVALUE_TOL: f64 = 1e-12;

/// A finite dense complex matrix.
#[derive(Clone, Debug, PartialEq)]
pub struct ComplexMatrix(DMatrix<C64>);

impl ComplexMatrix {
    /// Builds a matrix from row-major entries.
    pub fn new(rows: usize, cols: usize, entries: Vec<C64>) -> Result<Self> {
        if rows == 0 || cols == 0 {
            return Err(Error::DimensionMismatch(format!("empty {rows}x{cols} matrix")));
        }
        if entries.len() != rows * cols {
            return Err(Error::DimensionMismatch(format!(
                "{} entries for a {rows}x{cols} matrix",
                entries.len()
            )));
        }
        Self::from_dmatrix(DMatrix::from_row_slice(rows, cols, &entries))
    }

    pub fn from_dmatrix(m: DMatrix<C64>) -> Result<Self> {
        if m.iter().any(|z| !z.re.is_finite() || !z.im.is_finite()) {
            return Err(Error::NonFinite);
        }
        Ok(ComplexMatrix(m))
    }

    pub fn from_real_rows(rows: &[&[f64]]) -> Result<Self> {
        let r = rows.len();
        let c = rows.first().map_or(0, |row| row.len());
        if rows.iter().any(|row| row.len() != c) {
            return Err(Error::DimensionMismatch("ragged rows".into()));
        }
        let entries = rows
            .iter()
            .flat_map(|row| row.iter().map(|&x| C64::new(x, 0.0)))
            .collect();
        Self::new(r, c, entries)
    }

    pub fn identity(n: usize) -> Self {
        ComplexMatrix(DMatrix::identity(n, n))
    }

    pub fn zeros(rows: usize, cols: usize) -> Self {
        ComplexMatrix(DMatrix::zeros(rows, cols))
    }

    pub fn from_diagonal(diag: &[f64]) -> Self {
        let n = diag.len();
        ComplexMatrix(DMatrix::from_fn(n, n, |i, j| {
            if i == j {
                C64::new(diag[i], 0.0)
            } else {
                C64::new(0.0, 0.0)
            }
        }))
    }

    /// `|v⟩⟨v|` for a column vector `v`.
    pub fn outer(v: &[C64]) -> Self {
        let n = v.len();
        ComplexMatrix(DMatrix::from_fn(n, n, |i, j| v[i] * v[j].conj()))
    }

    pub fn rows(&self) -> usize {
        self.0.nrows()
    }

    pub fn cols(&self) -> usize {
        self.0.ncols()
    }

    pub fn is_square(&self) -> bool {
        self.rows() == self.cols()
    }

    pub fn get(&self, i: usize, j: usize) -> C64 {
        self.0[(i, j)]
    }

    pub fn as_dmatrix(&self) -> &DMatrix<C64> {
        &self.0
    }

    pub fn into_dmatrix(self) -> DMatrix<C64> {
        self.0
    }

    /// Row-major copy of the entries.
    pub fn to_row_major(&self) -> Vec<C64> {
        let mut out = Vec::with_capacity(self.rows() * self.cols());
        for i in 0..self.rows() {
            for j in 0..self.cols() {
                out.push(self.0[(i, j)]);
            }
        }
        out
    }

    pub fn adjoint(&self) -> Self {
        ComplexMatrix(self.0.adjoint())
    }

    pub fn trace(&self) -> C64 {
        self.0.trace()
    }

    pub fn frobenius_norm(&self) -> f64 {
        self.0.iter().map(|z| z.norm_sqr()).sum::<f64>().sqrt()
    }

    /// `‖m − m†‖_F`.
    pub fn hermiticity_defect(&self) -> f64 {
        if !self.is_square() {
            return f64::INFINITY;
        }
        (&self.0 - self.0.adjoint())
            .iter()
            .map(|z| z.norm_sqr())
            .sum::<f64>()
            .sqrt()
    }

    pub fn is_hermitian(&self) -> bool {
        self.hermiticity_defect() <= HERMITIAN_TOL * self.frobenius_norm().max(1.0)
    }

    pub fn matmul(&self, other: &ComplexMatrix) -> ComplexMatrix {
        assert_eq!(self.cols(), other.rows(), "matmul dimension mismatch");
        ComplexMatrix(&self.0 * &other.0)
    }

    pub fn add(&self, other: &ComplexMatrix) -> ComplexMatrix {
        assert_eq!(self.0.shape(), other.0.shape(), "add dimension mismatch");
        ComplexMatrix(&self.0 + &other.0)
    }

    pub fn sub(&self, other: &ComplexMatrix) -> ComplexMatrix {
        assert_eq!(self.0.shape(), other.0.shape(), "sub dimension mismatch");
        ComplexMatrix(&self.0 - &other.0)
    }

    pub fn scale(&self, s: f64) -> ComplexMatrix {
        ComplexMatrix(self.0.map(|z| z * s))
    }

    /// `[a, b] = ab − ba`.
    pub fn commutator(&self, other: &ComplexMatrix) -> ComplexMatrix {
        self.matmul(other).sub(&other.matmul(self))
    }

    /// `Re Tr[self · other]` without forming the product.
    pub fn trace_product_re(&self, other: &ComplexMatrix) -> f64 {
        assert_eq!(self.cols(), other.rows());
        assert_eq!(self.rows(), other.cols());
        let mut acc = 0.0;
        for i in 0..self.rows() {
            for k in 0..self.cols() {
                acc += (self.0[(i, k)] * other.0[(k, i)]).re;
            }
        }
        acc
    }

    /// `(m + m†)/2`.
    pub fn hermitian_part(&self) -> ComplexMatrix {
        ComplexMatrix((&self.0 + self.0.adjoint()).map(|z| z * 0.5))
    }

    /// Unitary conjugation `u · self · u†`.
    pub fn conjugate_by(&self, u: &ComplexMatrix) -> ComplexMatrix {
        u.matmul(self).matmul(&u.adjoint())
    }
}

/// Eigendecomposition of a Hermitian matrix with ascending eigenvalues.
#[derive(Clone, Debug)]
pub struct HermitianEig {
    pub eigenvalues: Vec<f64>,
    /// Column `j` is the eigenvector for `eigenvalues[j]`.
    pub eigenvectors: ComplexMatrix,
}

impl HermitianEig {
    pub fn dim(&self) -> usize {
        self.eigenvalues.len()
    }

    pub fn min_eigenvalue(&self) -> f64 {
        self.eigenvalues[0]
    }

    pub fn max_eigenvalue(&self) -> f64 {
        *self.eigenvalues.last().expect("non-empty spectrum")
    }

    /// `V diag(f(λ)) V†` for a complex-valued `f`.
    pub fn reconstruct_with(&self, f: impl Fn(f64) -> C64) -> ComplexMatrix {
        let v = self.eigenvectors.as_dmatrix();
        let n = self.dim();
        let mut scaled = v.clone();
        for j in 0..n {
            let fj = f(self.eigenvalues[j]);
            for i in 0..n {
                scaled[(i, j)] *= fj;
            }
        }
        ComplexMatrix(scaled * v.adjoint())
    }

    pub fn reconstruct(&self) -> ComplexMatrix {
        self.reconstruct_with(|l| C64::new(l, 0.0))
    }

    /// Column `j` of the eigenvector matrix.
    pub fn eigenvector(&self, j: usize) -> Vec<C64> {
        self.eigenvectors.as_dmatrix().column(j).iter().copied().collect()
    }
}

fn check_hermitian(m: &ComplexMatrix) -> Result<()> {
    if !m.is_square() {
        return Err(Error::DimensionMismatch(format!(
            "{}x{} matrix is not square",
            m.rows(),
            m.cols()
        )));
    }
    let defect = m.hermiticity_defect();
    if defect > HERMITIAN_TOL * m.frobenius_norm().max(1.0) {
        return Err(Error::NotHermitian { defect });
    }
    Ok(())
}

/// Eigendecomposition of a Hermitian matrix. The input is symmetrized before
/// decomposition, so round-off below the tolerance is absorbed.
pub fn hermitian_eig(m: &ComplexMatrix) -> Result<HermitianEig> {
    check_hermitian(m)?;
    let sym = m.hermitian_part();
    let n = sym.rows();
    let eig = SymmetricEigen::new(sym.0);
    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&a, &b| eig.eigenvalues[a].total_cmp(&eig.eigenvalues[b]));
    let eigenvalues = order.iter().map(|&j| eig.eigenvalues[j]).collect();
    let eigenvectors = DMatrix::from_fn(n, n, |i, j| eig.eigenvectors[(i, order[j])]);
    if eigenvectors.iter().any(|z| !z.re.is_finite() || !z.im.is_finite()) {
        return Err(Error::NonFinite);
    }
    Ok(HermitianEig {
        eigenvalues,
        eigenvectors: ComplexMatrix(eigenvectors),
    })
}

/// `V diag(f(λ)) V†`. Fails with `DomainError` if `f` yields a non-finite value.
pub fn spectral_map(m: &ComplexMatrix, f: impl Fn(f64) -> f64) -> Result<ComplexMatrix> {
    let eig = hermitian_eig(m)?;
    spectral_map_eig(&eig, f)
}

pub fn spectral_map_eig(eig: &HermitianEig, f: impl Fn(f64) -> f64) -> Result<ComplexMatrix> {
    for &l in &eig.eigenvalues {
        if !f(l).is_finite() {
            return Err(Error::DomainError { eigenvalue: l });
        }
    }
    Ok(eig.reconstruct_with(|l| C64::new(f(l), 0.0)).hermitian_part())
}

/// Natural logarithm of a positive definite matrix.
pub fn matrix_log(m: &ComplexMatrix) -> Result<ComplexMatrix> {
    matrix_log_eig(&hermitian_eig(m)?)
}

pub fn matrix_log_eig(eig: &HermitianEig) -> Result<ComplexMatrix> {
    if let Some(&bad) = eig.eigenvalues.iter().find(|&&l| l <= ZERO_EIGENVALUE_TOL) {
        return Err(Error::DomainError { eigenvalue: bad });
    }
    spectral_map_eig(eig, f64::ln)
}

/// `m^{-1/2}` for a positive definite matrix.
pub fn matrix_inv_sqrt_eig(eig: &HermitianEig) -> Result<ComplexMatrix> {
    if let Some(&bad) = eig.eigenvalues.iter().find(|&&l| l <= ZERO_EIGENVALUE_TOL) {
        return Err(Error::DomainError { eigenvalue: bad });
    }
    spectral_map_eig(eig, |l| 1.0 / l.sqrt())
}

/// `exp(i·t·H)` for Hermitian `H`, given its eigendecomposition.
pub fn unitary_exp_eig(eig: &HermitianEig, t: f64) -> ComplexMatrix {
    eig.reconstruct_with(|l| C64::from_polar(1.0, t * l))
}

/// Kronecker product with the default dimension cap.
pub fn kron(a: &ComplexMatrix, b: &ComplexMatrix) -> Result<ComplexMatrix> {
    kron_with_cap(a, b, DEFAULT_DIM_CAP)
}

pub fn kron_with_cap(a: &ComplexMatrix, b: &ComplexMatrix, cap: usize) -> Result<ComplexMatrix> {
    let rows = a.rows() * b.rows();
    let cols = a.cols() * b.cols();
    if rows.max(cols) > cap {
        return Err(Error::Overflow {
            dim: rows.max(cols),
            cap,
        });
    }
    Ok(ComplexMatrix(a.0.kronecker(&b.0)))
}
