//! Low-rank-plus-shift preconditioners `M = ηI + UUᵀ` built by greedy pivoted
//! Cholesky, with `M⁻¹`, the symmetric `M^{-1/2}` and `log|M|` in `O(nr)`.

use crate::error::{Error, Result};
use crate::linalg::{axpy, dot, norm2, Matrix, SymmetricEigen};
use crate::operators::LinearOperator;
use crate::scalar::Scalar;

/// An SPD preconditioner `M`.
pub trait Preconditioner<T: Scalar>: Send + Sync {
    fn dim(&self) -> usize;
    fn apply_minv_into(&self, v: &[T], out: &mut [T]);
    /// Symmetric (principal) inverse square root.
    fn apply_minv_sqrt_into(&self, v: &[T], out: &mut [T]);
    fn apply_m_into(&self, v: &[T], out: &mut [T]);
    fn logdet(&self) -> T;

    fn apply_minv(&self, v: &[T]) -> Vec<T> {
        let mut out = vec![T::zero(); self.dim()];
        self.apply_minv_into(v, &mut out);
        out
    }

    fn apply_minv_sqrt(&self, v: &[T]) -> Vec<T> {
        let mut out = vec![T::zero(); self.dim()];
        self.apply_minv_sqrt_into(v, &mut out);
        out
    }

    fn apply_m(&self, v: &[T]) -> Vec<T> {
        let mut out = vec![T::zero(); self.dim()];
        self.apply_m_into(v, &mut out);
        out
    }
}

/// `M = ηI + UUᵀ`, stored through an orthonormal `W` and `σ²` with
/// `UUᵀ = W diag(σ²) Wᵀ`.
#[derive(Debug, Clone)]
pub struct LowRankShiftPreconditioner<T> {
    n: usize,
    eta: T,
    factor: Vec<Vec<T>>,
    pivots: Vec<usize>,
    directions: Vec<Vec<T>>,
    sigma2: Vec<T>,
}

impl<T: Scalar> LowRankShiftPreconditioner<T> {
    /// `M = ηI`.
    pub fn shift_only(n: usize, eta: T) -> Result<Self> {
        Self::from_factor(n, Vec::new(), eta)
    }

    /// `M = ηI + UUᵀ` with `U` given by its columns.
    pub fn from_factor(n: usize, columns: Vec<Vec<T>>, eta: T) -> Result<Self> {
        if !(eta > T::zero()) {
            return Err(Error::InvalidArgument(format!("shift must be positive, got {eta}")));
        }
        if let Some(c) = columns.iter().find(|c| c.len() != n) {
            return Err(Error::DimensionMismatch {
                expected: n,
                got: c.len(),
            });
        }
        let (directions, sigma2) = thin_spectral_factor(&columns)?;
        Ok(Self {
            n,
            eta,
            factor: columns,
            pivots: Vec::new(),
            directions,
            sigma2,
        })
    }

    pub fn eta(&self) -> T {
        self.eta
    }

    pub fn rank(&self) -> usize {
        self.factor.len()
    }

    /// Columns of `U`.
    pub fn factor(&self) -> &[Vec<T>] {
        &self.factor
    }

    /// Pivot order chosen by the pivoted Cholesky build.
    pub fn pivots(&self) -> &[usize] {
        &self.pivots
    }

    /// Eigenvalues of `UUᵀ` on its range.
    pub fn sigma2(&self) -> &[T] {
        &self.sigma2
    }

    /// Materialised `M`.
    pub fn dense(&self) -> Matrix<T> {
        let mut m = Matrix::identity(self.n).scaled(self.eta);
        for c in &self.factor {
            for i in 0..self.n {
                for j in 0..self.n {
                    m[(i, j)] += c[i] * c[j];
                }
            }
        }
        m
    }

    // out = a·v + W diag(g) Wᵀ v
    fn spectral_apply(&self, a: T, g: impl Fn(T) -> T, v: &[T], out: &mut [T]) {
        for (o, x) in out.iter_mut().zip(v) {
            *o = a * *x;
        }
        for (w, s2) in self.directions.iter().zip(&self.sigma2) {
            let c = g(*s2) * dot(w, v);
            axpy(c, w, out);
        }
    }
}

impl<T: Scalar> Preconditioner<T> for LowRankShiftPreconditioner<T> {
    fn dim(&self) -> usize {
        self.n
    }

    fn apply_minv_into(&self, v: &[T], out: &mut [T]) {
        let eta = self.eta;
        let inv = T::one() / eta;
        self.spectral_apply(inv, |s2| -inv * s2 / (eta + s2), v, out);
    }

    fn apply_minv_sqrt_into(&self, v: &[T], out: &mut [T]) {
        let eta = self.eta;
        let inv = T::one() / eta.sqrt();
        self.spectral_apply(inv, |s2| -inv * (T::one() - (eta / (eta + s2)).sqrt()), v, out);
    }

    fn apply_m_into(&self, v: &[T], out: &mut [T]) {
        self.spectral_apply(self.eta, |s2| s2, v, out);
    }

    fn logdet(&self) -> T {
        let eta = self.eta;
        T::of_usize(self.n) * eta.ln()
            + self
                .sigma2
                .iter()
                .map(|s2| (*s2 / eta).ln_1p())
                .sum::<T>()
    }
}

// Orthonormal W and σ² with UUᵀ = W diag(σ²) Wᵀ, via modified Gram–Schmidt
// (two passes) U = QR followed by the eigendecomposition of RRᵀ.
fn thin_spectral_factor<T: Scalar>(columns: &[Vec<T>]) -> Result<(Vec<Vec<T>>, Vec<T>)> {
    let r = columns.len();
    if r == 0 {
        return Ok((Vec::new(), Vec::new()));
    }
    let scale = columns.iter().map(|c| norm2(c)).fold(T::zero(), T::max);
    let drop_tol = T::epsilon() * T::of(64.0) * scale;
    let mut q: Vec<Vec<T>> = Vec::with_capacity(r);
    // R stored densely as rows over kept directions, columns over inputs
    let mut rmat: Vec<Vec<T>> = Vec::with_capacity(r);
    for (j, c) in columns.iter().enumerate() {
        let mut w = c.clone();
        let mut coeffs = vec![T::zero(); q.len()];
        for _ in 0..2 {
            for (k, qk) in q.iter().enumerate() {
                let h = dot(qk, &w);
                coeffs[k] += h;
                axpy(-h, qk, &mut w);
            }
        }
        for (k, h) in coeffs.into_iter().enumerate() {
            rmat[k][j] = h;
        }
        let nw = norm2(&w);
        if nw > drop_tol {
            for x in w.iter_mut() {
                *x /= nw;
            }
            let mut row = vec![T::zero(); r];
            row[j] = nw;
            q.push(w);
            rmat.push(row);
        }
    }
    let k = q.len();
    let rrt = Matrix::from_fn(k, k, |a, b| dot(&rmat[a], &rmat[b]));
    let eig = SymmetricEigen::new(&rrt)?;
    let n = columns[0].len();
    let mut directions = Vec::with_capacity(k);
    let mut sigma2 = Vec::with_capacity(k);
    for e in 0..k {
        let s2 = eig.values[e].max(T::zero());
        let mut w = vec![T::zero(); n];
        for (a, qa) in q.iter().enumerate() {
            axpy(eig.vectors[(a, e)], qa, &mut w);
        }
        directions.push(w);
        sigma2.push(s2);
    }
    Ok((directions, sigma2))
}

/// Greedy pivoted Cholesky of `A − ηI` (largest residual diagonal first),
/// `rank` steps or until the residual trace falls below `1e-12` of its
/// initial value.
pub fn build_pivoted_cholesky<T: Scalar, O: LinearOperator<T> + ?Sized>(
    op: &O,
    rank: usize,
    eta: T,
) -> Result<LowRankShiftPreconditioner<T>> {
    let n = op.dim();
    if rank > n {
        return Err(Error::InvalidArgument(format!("rank {rank} exceeds dimension {n}")));
    }
    if !(eta > T::zero()) {
        return Err(Error::InvalidArgument(format!("shift must be positive, got {eta}")));
    }
    let mut resid: Vec<T> = op
        .diagonal()
        .ok_or(Error::NoDenseAccess)?
        .into_iter()
        .map(|d| d - eta)
        .collect();
    let scale = resid.iter().fold(T::one(), |m, d| m.max(d.abs()));
    let neg_tol = T::of(1e-10) * scale;
    let clamp = |resid: &mut [T]| -> Result<()> {
        for (i, d) in resid.iter_mut().enumerate() {
            if *d < -neg_tol {
                return Err(Error::NegativeResidual {
                    index: i,
                    value: d.to_f64_lossy(),
                });
            }
            if *d < T::zero() {
                *d = T::zero();
            }
        }
        Ok(())
    };
    clamp(&mut resid)?;
    let initial_trace: T = resid.iter().copied().sum();
    let stop = T::of(1e-12) * initial_trace;

    let mut columns: Vec<Vec<T>> = Vec::with_capacity(rank);
    let mut pivots = Vec::with_capacity(rank);
    for _ in 0..rank {
        let trace: T = resid.iter().copied().sum();
        if !(trace > stop) || trace == T::zero() {
            break;
        }
        let (p, dp) = resid
            .iter()
            .enumerate()
            .fold((0, T::neg_infinity()), |(bi, bv), (i, v)| if *v > bv { (i, *v) } else { (bi, bv) });
        if !(dp > T::zero()) {
            break;
        }
        let mut col = op.row(p).ok_or(Error::NoDenseAccess)?;
        col[p] -= eta;
        for c in &columns {
            let cp = c[p];
            axpy(-cp, c, &mut col);
        }
        let s = dp.sqrt();
        for x in col.iter_mut() {
            *x /= s;
        }
        for (d, x) in resid.iter_mut().zip(&col) {
            *d -= *x * *x;
        }
        resid[p] = T::zero();
        clamp(&mut resid)?;
        pivots.push(p);
        columns.push(col);
    }
    let mut pre = LowRankShiftPreconditioner::from_factor(n, columns, eta)?;
    pre.pivots = pivots;
    Ok(pre)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::linalg::Cholesky;
    use crate::operators::{DenseOperator, DiagonalOperator};
    use approx::assert_relative_eq;

    fn rank_one_plus_shift(v: &[f64], eta: f64) -> DenseOperator<f64> {
        let n = v.len();
        let mut m = Matrix::from_fn(n, n, |i, j| v[i] * v[j]);
        m.add_diagonal(eta);
        DenseOperator::new(m).unwrap()
    }

    #[test]
    fn shift_only_operator_has_empty_factor() {
        let op = DiagonalOperator::new(vec![0.5; 4]).unwrap();
        let p = build_pivoted_cholesky(&op, 3, 0.5).unwrap();
        assert_eq!(p.rank(), 0);
        let v = [1.0, -2.0, 3.0, 0.5];
        let mi = p.apply_minv(&v);
        let ms = p.apply_minv_sqrt(&v);
        for i in 0..4 {
            assert_relative_eq!(mi[i], v[i] / 0.5, epsilon = 1e-15);
            assert_relative_eq!(ms[i], v[i] / 0.5f64.sqrt(), epsilon = 1e-15);
        }
    }

    #[test]
    fn rank_one_is_reproduced_exactly() {
        let v = [0.3, -1.2, 2.0, 0.7];
        let op = rank_one_plus_shift(&v, 0.25);
        let p = build_pivoted_cholesky(&op, 1, 0.25).unwrap();
        assert_eq!(p.rank(), 1);
        let u = &p.factor()[0];
        let sign = u[2].signum();
        for i in 0..4 {
            assert_relative_eq!(sign * u[i], v[i], epsilon = 1e-14);
        }
        assert!(p.dense().max_abs_diff(op.matrix()) < 1e-14);
    }

    #[test]
    fn logdet_examples() {
        let p = LowRankShiftPreconditioner::shift_only(3, 2.0).unwrap();
        assert_relative_eq!(p.logdet(), 3.0 * 2f64.ln(), epsilon = 1e-14);
        let p = LowRankShiftPreconditioner::from_factor(3, vec![vec![1.0, 0.0, 0.0]], 1.0).unwrap();
        assert_relative_eq!(p.logdet(), 2f64.ln(), epsilon = 1e-14);
    }

    #[test]
    fn orthogonal_probe_sees_only_the_shift() {
        let p = LowRankShiftPreconditioner::from_factor(3, vec![vec![1.0, 2.0, 0.0]], 0.5).unwrap();
        let v = [0.0, 0.0, 4.0];
        assert_relative_eq!(p.apply_minv(&v)[2], 8.0, epsilon = 1e-14);
        assert_relative_eq!(p.apply_minv_sqrt(&v)[2], 4.0 / 0.5f64.sqrt(), epsilon = 1e-14);
    }

    #[test]
    fn applications_match_dense_matrices() {
        let n = 12;
        let cols: Vec<Vec<f64>> = (0..3)
            .map(|k| (0..n).map(|i| ((i * (k + 2)) as f64 * 0.7).sin()).collect())
            .collect();
        let p = LowRankShiftPreconditioner::from_factor(n, cols, 0.3).unwrap();
        let m = p.dense();
        let chol = Cholesky::factor(&m).unwrap();
        assert_relative_eq!(p.logdet(), chol.logdet(), epsilon = 1e-12);
        let v: Vec<f64> = (0..n).map(|i| (i as f64 * 1.3).cos()).collect();
        let want = chol.solve(&v);
        let got = p.apply_minv(&v);
        for i in 0..n {
            assert_relative_eq!(got[i], want[i], epsilon = 1e-10);
        }
        let twice = p.apply_minv_sqrt(&p.apply_minv_sqrt(&v));
        for i in 0..n {
            assert_relative_eq!(twice[i], want[i], epsilon = 1e-10);
        }
        let back = p.apply_minv(&p.apply_m(&v));
        for i in 0..n {
            assert_relative_eq!(back[i], v[i], epsilon = 1e-12);
        }
    }

    #[test]
    fn negative_residual_is_an_error() {
        let op = DiagonalOperator::new(vec![1.0, 0.1]).unwrap();
        assert!(matches!(
            build_pivoted_cholesky(&op, 1, 0.5),
            Err(Error::NegativeResidual { index: 1, .. })
        ));
    }
}
