//! Symmetric linear operators and the dense reference computations used to
//! check every stochastic estimate.

use std::sync::Arc;

use crate::error::{Error, Result};
use crate::linalg::{Cholesky, Matrix, SymmetricEigen};
use crate::scalar::Scalar;

/// Largest dimension the dense oracles accept by default.
pub const DEFAULT_ORACLE_CAP: usize = 4096;

/// A symmetric linear map `v ↦ A v`.
pub trait LinearOperator<T: Scalar>: Send + Sync {
    fn dim(&self) -> usize;

    /// Writes `A v` into `out`. Both slices have length `dim()`.
    fn apply_into(&self, v: &[T], out: &mut [T]);

    fn apply(&self, v: &[T]) -> Vec<T> {
        let mut out = vec![T::zero(); self.dim()];
        self.apply_into(v, &mut out);
        out
    }

    /// Materialised matrix, if the operator has one.
    fn dense_form(&self) -> Option<Matrix<T>> {
        None
    }

    /// Row `i` of the matrix, if entries are accessible.
    fn row(&self, _i: usize) -> Option<Vec<T>> {
        None
    }

    fn diagonal(&self) -> Option<Vec<T>> {
        None
    }
}

/// Marker for operators that are symmetric positive definite.
pub trait SpdOperator<T: Scalar>: LinearOperator<T> {}

/// `A v` with a dimension check.
pub fn matvec<T: Scalar, O: LinearOperator<T> + ?Sized>(op: &O, v: &[T]) -> Result<Vec<T>> {
    if v.len() != op.dim() {
        return Err(Error::DimensionMismatch {
            expected: op.dim(),
            got: v.len(),
        });
    }
    Ok(op.apply(v))
}

macro_rules! forward_operator {
    ($wrapper:ty) => {
        impl<T: Scalar, O: LinearOperator<T> + ?Sized> LinearOperator<T> for $wrapper {
            fn dim(&self) -> usize {
                (**self).dim()
            }
            fn apply_into(&self, v: &[T], out: &mut [T]) {
                (**self).apply_into(v, out)
            }
            fn dense_form(&self) -> Option<Matrix<T>> {
                (**self).dense_form()
            }
            fn row(&self, i: usize) -> Option<Vec<T>> {
                (**self).row(i)
            }
            fn diagonal(&self) -> Option<Vec<T>> {
                (**self).diagonal()
            }
        }
        impl<T: Scalar, O: SpdOperator<T> + ?Sized> SpdOperator<T> for $wrapper {}
    };
}

forward_operator!(&O);
forward_operator!(Box<O>);
forward_operator!(Arc<O>);

/// Operator backed by a dense symmetric matrix.
#[derive(Debug, Clone)]
pub struct DenseOperator<T> {
    matrix: Matrix<T>,
}

impl<T: Scalar> DenseOperator<T> {
    /// Wraps a square symmetric matrix. Symmetry is checked exactly.
    pub fn new(matrix: Matrix<T>) -> Result<Self> {
        if !matrix.is_square() {
            return Err(Error::DimensionMismatch {
                expected: matrix.rows(),
                got: matrix.cols(),
            });
        }
        if !matrix.all_finite() {
            return Err(Error::NonFinite("dense operator entries".into()));
        }
        if !matrix.is_symmetric() {
            return Err(Error::InvalidArgument("matrix is not symmetric".into()));
        }
        Ok(Self { matrix })
    }

    pub fn matrix(&self) -> &Matrix<T> {
        &self.matrix
    }

    pub fn into_matrix(self) -> Matrix<T> {
        self.matrix
    }
}

impl<T: Scalar> LinearOperator<T> for DenseOperator<T> {
    fn dim(&self) -> usize {
        self.matrix.rows()
    }

    fn apply_into(&self, v: &[T], out: &mut [T]) {
        self.matrix.matvec_into(v, out)
    }

    fn dense_form(&self) -> Option<Matrix<T>> {
        Some(self.matrix.clone())
    }

    fn row(&self, i: usize) -> Option<Vec<T>> {
        Some(self.matrix.row(i).to_vec())
    }

    fn diagonal(&self) -> Option<Vec<T>> {
        Some(self.matrix.diagonal())
    }
}

impl<T: Scalar> SpdOperator<T> for DenseOperator<T> {}

/// `diag(d)`, positive entries.
#[derive(Debug, Clone)]
pub struct DiagonalOperator<T> {
    diag: Vec<T>,
}

impl<T: Scalar> DiagonalOperator<T> {
    pub fn new(diag: Vec<T>) -> Result<Self> {
        if let Some(d) = diag.iter().find(|d| !(**d > T::zero())) {
            return Err(Error::NonPositiveSpectrum {
                lambda_min: d.to_f64_lossy(),
            });
        }
        Ok(Self { diag })
    }

    pub fn identity(n: usize) -> Self {
        Self {
            diag: vec![T::one(); n],
        }
    }
}

impl<T: Scalar> LinearOperator<T> for DiagonalOperator<T> {
    fn dim(&self) -> usize {
        self.diag.len()
    }

    fn apply_into(&self, v: &[T], out: &mut [T]) {
        for ((o, d), x) in out.iter_mut().zip(&self.diag).zip(v) {
            *o = *d * *x;
        }
    }

    fn dense_form(&self) -> Option<Matrix<T>> {
        Some(Matrix::from_diagonal(&self.diag))
    }

    fn row(&self, i: usize) -> Option<Vec<T>> {
        let mut r = vec![T::zero(); self.diag.len()];
        r[i] = self.diag[i];
        Some(r)
    }

    fn diagonal(&self) -> Option<Vec<T>> {
        Some(self.diag.clone())
    }
}

impl<T: Scalar> SpdOperator<T> for DiagonalOperator<T> {}

/// Exact dense quantities for `A x = y`.
#[derive(Debug, Clone, PartialEq)]
pub struct DenseOracleResult<T> {
    pub logdet: T,
    pub solution: Vec<T>,
    pub quad_form: T,
}

/// Cholesky-based `log|A|`, `A⁻¹y` and `yᵀA⁻¹y`, for `n ≤ cap`.
pub fn dense_cholesky_oracle_capped<T: Scalar>(
    a: &Matrix<T>,
    y: &[T],
    cap: usize,
) -> Result<DenseOracleResult<T>> {
    if a.rows() > cap {
        return Err(Error::OracleTooLarge { n: a.rows(), cap });
    }
    if y.len() != a.rows() {
        return Err(Error::DimensionMismatch {
            expected: a.rows(),
            got: y.len(),
        });
    }
    let chol = Cholesky::factor(a)?;
    let solution = chol.solve(y);
    let quad_form = crate::linalg::dot(y, &solution);
    Ok(DenseOracleResult {
        logdet: chol.logdet(),
        solution,
        quad_form,
    })
}

pub fn dense_cholesky_oracle<T: Scalar>(a: &Matrix<T>, y: &[T]) -> Result<DenseOracleResult<T>> {
    dense_cholesky_oracle_capped(a, y, DEFAULT_ORACLE_CAP)
}

fn checked_spectrum<T: Scalar>(a: &Matrix<T>) -> Result<Vec<T>> {
    if a.rows() > DEFAULT_ORACLE_CAP {
        return Err(Error::OracleTooLarge {
            n: a.rows(),
            cap: DEFAULT_ORACLE_CAP,
        });
    }
    let ev = SymmetricEigen::new(a)?.values;
    match ev.first() {
        None => Err(Error::InvalidArgument("empty matrix".into())),
        Some(l) if !(*l > T::zero()) => Err(Error::NonPositiveSpectrum {
            lambda_min: l.to_f64_lossy(),
        }),
        Some(_) => Ok(ev),
    }
}

/// `λ_max / λ_min` from a full symmetric eigendecomposition.
pub fn condition_number_dense<T: Scalar>(a: &Matrix<T>) -> Result<T> {
    let ev = checked_spectrum(a)?;
    Ok(ev[ev.len() - 1] / ev[0])
}

/// `tr(log A)` from the eigenvalues.
pub fn logdet_dense_eigen<T: Scalar>(a: &Matrix<T>) -> Result<T> {
    Ok(checked_spectrum(a)?.into_iter().map(|l| l.ln()).sum())
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;

    #[test]
    fn identity_and_diagonal_matvec() {
        let i3 = DiagonalOperator::<f64>::identity(3);
        assert_eq!(matvec(&i3, &[1.0, 2.0, 3.0]).unwrap(), vec![1.0, 2.0, 3.0]);
        let d = DiagonalOperator::new(vec![2.0, 5.0]).unwrap();
        assert_eq!(matvec(&d, &[1.0, 1.0]).unwrap(), vec![2.0, 5.0]);
        assert!(matches!(
            matvec(&d, &[1.0]),
            Err(Error::DimensionMismatch { expected: 2, got: 1 })
        ));
    }

    #[test]
    fn oracle_examples() {
        let r = dense_cholesky_oracle(&Matrix::identity(2), &[1.0, 1.0]).unwrap();
        assert_eq!(r.logdet, 0.0);
        assert_eq!(r.solution, vec![1.0, 1.0]);
        assert_eq!(r.quad_form, 2.0);

        let r = dense_cholesky_oracle(&Matrix::from_diagonal(&[2.0, 8.0]), &[2.0, 4.0]).unwrap();
        assert_relative_eq!(r.logdet, 16f64.ln(), epsilon = 1e-14);
        assert_relative_eq!(r.solution[0], 1.0);
        assert_relative_eq!(r.solution[1], 0.5);
        assert_relative_eq!(r.quad_form, 4.0);

        let a = Matrix::from_rows(&[vec![2.0, 1.0], vec![1.0, 2.0]]).unwrap();
        let r = dense_cholesky_oracle(&a, &[1.0, 0.0]).unwrap();
        assert_relative_eq!(r.logdet, 3f64.ln(), epsilon = 1e-14);
        assert_relative_eq!(r.quad_form, 2.0 / 3.0, epsilon = 1e-14);
    }

    #[test]
    fn oracle_rejects_indefinite_and_oversized() {
        let a = Matrix::from_rows(&[vec![1.0, 0.0], vec![0.0, -1.0]]).unwrap();
        assert!(matches!(
            dense_cholesky_oracle(&a, &[1.0, 1.0]),
            Err(Error::NotPositiveDefinite { pivot: 1, .. })
        ));
        let a = Matrix::<f64>::identity(3);
        assert!(matches!(
            dense_cholesky_oracle_capped(&a, &[1.0; 3], 2),
            Err(Error::OracleTooLarge { n: 3, cap: 2 })
        ));
    }

    #[test]
    fn condition_numbers() {
        assert_relative_eq!(condition_number_dense(&Matrix::<f64>::identity(4)).unwrap(), 1.0);
        assert_relative_eq!(
            condition_number_dense(&Matrix::from_diagonal(&[1.0, 100.0])).unwrap(),
            100.0,
            epsilon = 1e-12
        );
        let a = Matrix::from_rows(&[vec![2.0, 1.0], vec![1.0, 2.0]]).unwrap();
        assert_relative_eq!(condition_number_dense(&a).unwrap(), 3.0, epsilon = 1e-12);
        let bad = Matrix::from_diagonal(&[1.0, -1.0]);
        assert!(matches!(
            condition_number_dense(&bad),
            Err(Error::NonPositiveSpectrum { .. })
        ));
    }

    #[test]
    fn dense_operator_requires_symmetry() {
        let a = Matrix::from_rows(&[vec![1.0, 2.0], vec![0.0, 1.0]]).unwrap();
        assert!(DenseOperator::new(a).is_err());
    }
}
