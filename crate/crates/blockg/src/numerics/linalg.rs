//! Small dense symmetric kernels on top of `nalgebra`.
//!
//! Every matrix that reaches these routines is at most `p_gamma x p_gamma`,
//! so plain dense Cholesky is the only factorization we need.

use nalgebra::{Cholesky, DMatrix, DVector};

use super::NumericsError;

const SYMMETRY_TOL: f64 = 1e-12;

/// Dense symmetric matrix.
#[derive(Debug, Clone, PartialEq)]
pub struct SymMatrix(DMatrix<f64>);

impl SymMatrix {
    /// Wraps a square matrix, checking symmetry to a relative tolerance.
    pub fn new(m: DMatrix<f64>) -> Result<Self, NumericsError> {
        if m.nrows() != m.ncols() {
            return Err(NumericsError::DimensionMismatch {
                expected: m.nrows(),
                found: m.ncols(),
            });
        }
        let scale = m.amax().max(f64::MIN_POSITIVE);
        for i in 0..m.nrows() {
            for j in 0..i {
                if (m[(i, j)] - m[(j, i)]).abs() > SYMMETRY_TOL * scale {
                    return Err(NumericsError::NotSymmetric { row: i, col: j });
                }
            }
        }
        Ok(SymMatrix(m))
    }

    /// Builds from a row-major slice of length `dim * dim`.
    pub fn from_row_major(dim: usize, entries: &[f64]) -> Result<Self, NumericsError> {
        if entries.len() != dim * dim {
            return Err(NumericsError::DimensionMismatch {
                expected: dim * dim,
                found: entries.len(),
            });
        }
        Self::new(DMatrix::from_row_slice(dim, dim, entries))
    }

    pub fn identity(dim: usize) -> Self {
        SymMatrix(DMatrix::identity(dim, dim))
    }

    pub fn from_diagonal(diag: &[f64]) -> Self {
        SymMatrix(DMatrix::from_diagonal(&DVector::from_column_slice(diag)))
    }

    /// `M'M` for any matrix `M`; symmetric by construction.
    pub fn gram(m: &DMatrix<f64>) -> Self {
        let g = m.tr_mul(m);
        SymMatrix(symmetrize(g))
    }

    pub fn dim(&self) -> usize {
        self.0.nrows()
    }

    pub fn get(&self, i: usize, j: usize) -> f64 {
        self.0[(i, j)]
    }

    pub fn as_matrix(&self) -> &DMatrix<f64> {
        &self.0
    }

    /// Principal submatrix on the given (ordered) indices.
    pub fn select(&self, idx: &[usize]) -> SymMatrix {
        let k = idx.len();
        SymMatrix(DMatrix::from_fn(k, k, |r, c| self.0[(idx[r], idx[c])]))
    }
}

fn symmetrize(mut m: DMatrix<f64>) -> DMatrix<f64> {
    let n = m.nrows();
    for i in 0..n {
        for j in 0..i {
            let v = 0.5 * (m[(i, j)] + m[(j, i)]);
            m[(i, j)] = v;
            m[(j, i)] = v;
        }
    }
    m
}

/// Lower-triangular Cholesky factor `L` with `L L' = M`.
#[derive(Debug, Clone)]
pub struct CholeskyFactor {
    l: DMatrix<f64>,
}

impl CholeskyFactor {
    pub fn dim(&self) -> usize {
        self.l.nrows()
    }

    pub fn l(&self) -> &DMatrix<f64> {
        &self.l
    }

    /// Solves `L x = b`.
    pub fn solve_lower(&self, b: &DVector<f64>) -> DVector<f64> {
        self.l
            .solve_lower_triangular(b)
            .expect("Cholesky diagonal is strictly positive")
    }

    /// Solves `L' x = b`.
    pub fn solve_upper(&self, b: &DVector<f64>) -> DVector<f64> {
        self.l
            .tr_solve_lower_triangular(b)
            .expect("Cholesky diagonal is strictly positive")
    }

    /// `L^{-1} B` for a matrix right-hand side.
    pub fn solve_lower_mat(&self, b: &DMatrix<f64>) -> DMatrix<f64> {
        self.l
            .solve_lower_triangular(b)
            .expect("Cholesky diagonal is strictly positive")
    }
}

pub fn cholesky(m: &SymMatrix) -> Result<CholeskyFactor, NumericsError> {
    if m.dim() == 0 {
        return Ok(CholeskyFactor { l: DMatrix::zeros(0, 0) });
    }
    let chol = Cholesky::new(m.0.clone()).ok_or(NumericsError::NotPositiveDefinite)?;
    let l = chol.unpack();
    if l.diagonal().iter().any(|d| !(d.is_finite() && *d > 0.0)) {
        return Err(NumericsError::NotPositiveDefinite);
    }
    Ok(CholeskyFactor { l })
}

pub fn logdet_from_cholesky(f: &CholeskyFactor) -> f64 {
    2.0 * f.l.diagonal().iter().map(|d| d.ln()).sum::<f64>()
}

pub fn solve_spd(f: &CholeskyFactor, rhs: &DVector<f64>) -> Result<DVector<f64>, NumericsError> {
    if rhs.len() != f.dim() {
        return Err(NumericsError::DimensionMismatch {
            expected: f.dim(),
            found: rhs.len(),
        });
    }
    Ok(f.solve_upper(&f.solve_lower(rhs)))
}
