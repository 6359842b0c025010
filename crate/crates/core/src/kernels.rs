//! Stationary kernels, regularised gram matrices `K̂ = f²(K + μI)` and their
//! hyperparameter derivatives.

use std::fmt;
use std::str::FromStr;

use crate::error::{Error, Result};
use crate::linalg::{dot, Matrix};
use crate::operators::DenseOperator;
use crate::scalar::Scalar;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum KernelFamily {
    Rbf,
    Matern32,
}

impl FromStr for KernelFamily {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "rbf" | "gaussian" => Ok(Self::Rbf),
            "matern32" | "matern-3/2" | "matern3/2" => Ok(Self::Matern32),
            _ => Err(Error::InvalidArgument(format!("unknown kernel family `{s}`"))),
        }
    }
}

impl fmt::Display for KernelFamily {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Self::Rbf => "rbf",
            Self::Matern32 => "matern32",
        })
    }
}

/// A kernel hyperparameter.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum Hyper {
    /// Output scale `f`.
    F,
    /// Length-scale `l`.
    L,
    /// Noise / regularisation `μ`.
    Mu,
}

impl Hyper {
    pub const ALL: [Hyper; 3] = [Hyper::F, Hyper::L, Hyper::Mu];

    pub fn name(self) -> &'static str {
        match self {
            Self::F => "f",
            Self::L => "l",
            Self::Mu => "mu",
        }
    }
}

impl FromStr for Hyper {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        match s {
            "f" => Ok(Self::F),
            "l" => Ok(Self::L),
            "mu" => Ok(Self::Mu),
            _ => Err(Error::UnknownHyperparameter(s.to_string())),
        }
    }
}

impl fmt::Display for Hyper {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct KernelSpec<T> {
    pub family: KernelFamily,
    pub f: T,
    pub l: T,
    pub mu: T,
}

impl<T: Scalar> KernelSpec<T> {
    pub fn new(family: KernelFamily, f: T, l: T, mu: T) -> Result<Self> {
        let spec = Self { family, f, l, mu };
        spec.validate()?;
        Ok(spec)
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.f > T::zero() && self.f.is_finite()) {
            return Err(Error::InvalidArgument(format!("f must be positive, got {}", self.f)));
        }
        if !(self.l > T::zero() && self.l.is_finite()) {
            return Err(Error::InvalidArgument(format!("l must be positive, got {}", self.l)));
        }
        if !(self.mu >= T::zero() && self.mu.is_finite()) {
            return Err(Error::InvalidArgument(format!("mu must be nonnegative, got {}", self.mu)));
        }
        Ok(())
    }

    pub fn get(&self, h: Hyper) -> T {
        match h {
            Hyper::F => self.f,
            Hyper::L => self.l,
            Hyper::Mu => self.mu,
        }
    }

    pub fn with(mut self, h: Hyper, value: T) -> Self {
        match h {
            Hyper::F => self.f = value,
            Hyper::L => self.l = value,
            Hyper::Mu => self.mu = value,
        }
        self
    }

    /// Provable lower bound `f²μ` on the spectrum of `K̂`.
    pub fn lambda_min_floor(&self) -> T {
        self.f * self.f * self.mu
    }
}

/// Input points, one per row.
#[derive(Debug, Clone, PartialEq)]
pub struct Dataset<T> {
    x: Matrix<T>,
}

impl<T: Scalar> Dataset<T> {
    pub fn new(x: Matrix<T>) -> Result<Self> {
        if x.rows() == 0 || x.cols() == 0 {
            return Err(Error::InvalidArgument("dataset must have n, d >= 1".into()));
        }
        if !x.all_finite() {
            return Err(Error::NonFinite("dataset entries".into()));
        }
        Ok(Self { x })
    }

    pub fn from_points(points: &[Vec<T>]) -> Result<Self> {
        Self::new(Matrix::from_rows(points)?)
    }

    /// One-dimensional dataset.
    pub fn from_1d(xs: &[T]) -> Result<Self> {
        Self::new(Matrix::from_row_major(xs.len(), 1, xs.to_vec())?)
    }

    pub fn n(&self) -> usize {
        self.x.rows()
    }

    pub fn d(&self) -> usize {
        self.x.cols()
    }

    pub fn point(&self, i: usize) -> &[T] {
        self.x.row(i)
    }

    pub fn points(&self) -> &Matrix<T> {
        &self.x
    }
}

/// Kernel value as a function of distance, unit at `r = 0`.
#[inline]
pub fn kernel_of_distance<T: Scalar>(family: KernelFamily, l: T, r: T) -> T {
    match family {
        KernelFamily::Rbf => {
            let s = r / l;
            (-(s * s) / T::of(2.0)).exp()
        }
        KernelFamily::Matern32 => {
            let u = T::of(3.0).sqrt() * r / l;
            (T::one() + u) * (-u).exp()
        }
    }
}

/// `∂κ/∂l` as a function of distance.
#[inline]
pub fn kernel_dl_of_distance<T: Scalar>(family: KernelFamily, l: T, r: T) -> T {
    let l3 = l * l * l;
    match family {
        KernelFamily::Rbf => kernel_of_distance(family, l, r) * r * r / l3,
        KernelFamily::Matern32 => {
            let u = T::of(3.0).sqrt() * r / l;
            T::of(3.0) * r * r / l3 * (-u).exp()
        }
    }
}

/// `κ(x, y)` with `r = ‖x − y‖₂`.
pub fn kernel_eval<T: Scalar>(spec: &KernelSpec<T>, x: &[T], y: &[T]) -> T {
    let r2: T = x.iter().zip(y).map(|(a, b)| (*a - *b) * (*a - *b)).sum();
    kernel_of_distance(spec.family, spec.l, r2.sqrt())
}

/// Pairwise distances via `max(0, ‖x‖² + ‖y‖² − 2xᵀy)`; the diagonal is
/// exactly zero and the result exactly symmetric.
pub fn pairwise_distances<T: Scalar>(data: &Dataset<T>) -> Matrix<T> {
    let n = data.n();
    let sq: Vec<T> = (0..n).map(|i| dot(data.point(i), data.point(i))).collect();
    let mut r = Matrix::zeros(n, n);
    for i in 0..n {
        for j in i + 1..n {
            let d2 = (sq[i] + sq[j] - T::of(2.0) * dot(data.point(i), data.point(j))).max(T::zero());
            let d = d2.sqrt();
            r[(i, j)] = d;
            r[(j, i)] = d;
        }
    }
    r
}

fn map_distances<T: Scalar>(r: &Matrix<T>, diag: T, f: impl Fn(T) -> T) -> Matrix<T> {
    let n = r.rows();
    let mut k = Matrix::zeros(n, n);
    for i in 0..n {
        k[(i, i)] = diag;
        for j in i + 1..n {
            let v = f(r[(i, j)]);
            k[(i, j)] = v;
            k[(j, i)] = v;
        }
    }
    k
}

/// Unscaled, unregularised kernel matrix `κ(X, X)`.
pub fn kernel_matrix<T: Scalar>(spec: &KernelSpec<T>, data: &Dataset<T>) -> Matrix<T> {
    let r = pairwise_distances(data);
    map_distances(&r, T::one(), |d| kernel_of_distance(spec.family, spec.l, d))
}

fn finite_operator<T: Scalar>(m: Matrix<T>, what: &str) -> Result<DenseOperator<T>> {
    if !m.all_finite() {
        return Err(Error::NonFinite(what.to_string()));
    }
    DenseOperator::new(m)
}

/// `K̂ = f²(κ(X, X) + μI)`.
pub fn gram_matrix<T: Scalar>(spec: &KernelSpec<T>, data: &Dataset<T>) -> Result<DenseOperator<T>> {
    spec.validate()?;
    let f2 = spec.f * spec.f;
    let r = pairwise_distances(data);
    let m = map_distances(&r, f2 * (T::one() + spec.mu), |d| {
        f2 * kernel_of_distance(spec.family, spec.l, d)
    });
    finite_operator(m, "gram matrix")
}

/// `∂K̂/∂θ` as a dense symmetric operator (not positive definite in general).
pub fn gram_derivative<T: Scalar>(
    spec: &KernelSpec<T>,
    data: &Dataset<T>,
    theta: Hyper,
) -> Result<DenseOperator<T>> {
    spec.validate()?;
    let n = data.n();
    let f2 = spec.f * spec.f;
    let m = match theta {
        Hyper::F => {
            let two_f = T::of(2.0) * spec.f;
            let r = pairwise_distances(data);
            map_distances(&r, two_f * (T::one() + spec.mu), |d| {
                two_f * kernel_of_distance(spec.family, spec.l, d)
            })
        }
        Hyper::Mu => Matrix::from_diagonal(&vec![f2; n]),
        Hyper::L => {
            let r = pairwise_distances(data);
            map_distances(&r, T::zero(), |d| {
                f2 * kernel_dl_of_distance(spec.family, spec.l, d)
            })
        }
    };
    finite_operator(m, "gram derivative")
}

/// `gram_derivative` addressed by name (`"f"`, `"l"`, `"mu"`).
pub fn gram_derivative_named<T: Scalar>(
    spec: &KernelSpec<T>,
    data: &Dataset<T>,
    theta: &str,
) -> Result<DenseOperator<T>> {
    gram_derivative(spec, data, theta.parse()?)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::linalg::symmetric_eigenvalues;
    use crate::operators::LinearOperator;
    use approx::assert_relative_eq;

    fn line3() -> Dataset<f64> {
        Dataset::from_1d(&[0.0, 1.0, 2.0]).unwrap()
    }

    #[test]
    fn kernel_values() {
        let rbf = KernelSpec::new(KernelFamily::Rbf, 1.0, 1.0, 0.0).unwrap();
        assert_eq!(kernel_eval(&rbf, &[0.3, -2.0], &[0.3, -2.0]), 1.0);
        assert_relative_eq!(kernel_eval(&rbf, &[0.0, 0.0], &[1.0, 1.0]), (-1f64).exp(), epsilon = 1e-15);
        let mat = KernelSpec::new(KernelFamily::Matern32, 1.0, 1.0, 0.0).unwrap();
        assert_eq!(kernel_eval(&mat, &[4.0], &[4.0]), 1.0);
    }

    #[test]
    fn gram_examples() {
        let spec = KernelSpec::new(KernelFamily::Rbf, 1.0, 1.0, 0.01).unwrap();
        let one = Dataset::from_1d(&[3.0]).unwrap();
        let g = gram_matrix(&spec, &one).unwrap();
        assert_relative_eq!(g.matrix()[(0, 0)], 1.01, epsilon = 1e-15);

        let dup = Dataset::from_1d(&[1.5, 1.5]).unwrap();
        let spec0 = KernelSpec::new(KernelFamily::Rbf, 1.0, 1.0, 0.0).unwrap();
        let g = gram_matrix(&spec0, &dup).unwrap();
        assert_eq!(g.matrix().as_slice(), &[1.0, 1.0, 1.0, 1.0]);

        let spec = KernelSpec::new(KernelFamily::Rbf, 2.0, 1.0, 0.5).unwrap();
        let g = gram_matrix(&spec, &line3()).unwrap();
        let m = g.matrix();
        assert_relative_eq!(m[(0, 0)], 4.0 * 1.5, epsilon = 1e-14);
        assert_relative_eq!(m[(0, 1)], 4.0 * (-0.5f64).exp(), epsilon = 1e-14);
        assert_relative_eq!(m[(0, 2)], 4.0 * (-2f64).exp(), epsilon = 1e-14);
        assert!(m.is_symmetric());
    }

    #[test]
    fn matvec_picks_out_a_column() {
        let spec = KernelSpec::new(KernelFamily::Rbf, 1.0, 1.0, 0.0).unwrap();
        let g = gram_matrix(&spec, &line3()).unwrap();
        let col = g.apply(&[1.0, 0.0, 0.0]);
        assert_relative_eq!(col[0], 1.0);
        assert_relative_eq!(col[1], (-0.5f64).exp(), epsilon = 1e-15);
        assert_relative_eq!(col[2], (-2f64).exp(), epsilon = 1e-15);
    }

    #[test]
    fn derivative_examples() {
        let data = Dataset::from_1d(&[0.0, 1.0]).unwrap();
        let spec = KernelSpec::new(KernelFamily::Rbf, 1.0, 1.0, 0.0).unwrap();
        let dmu = gram_derivative(&spec, &data, Hyper::Mu).unwrap();
        assert_eq!(dmu.matrix(), &Matrix::identity(2));
        let df = gram_derivative(&spec, &data, Hyper::F).unwrap();
        let k = kernel_matrix(&spec, &data);
        assert!(df.matrix().max_abs_diff(&k.scaled(2.0)) < 1e-15);
        let dl = gram_derivative(&spec, &data, Hyper::L).unwrap();
        assert_relative_eq!(dl.matrix()[(0, 1)], (-0.5f64).exp(), epsilon = 1e-14);
        assert!(gram_derivative_named(&spec, &data, "sigma").is_err());
    }

    #[test]
    fn length_scale_derivative_matches_finite_difference_of_kernel() {
        for family in [KernelFamily::Rbf, KernelFamily::Matern32] {
            for (l, r) in [(1.0, 1.0), (0.7, 2.3), (3.0, 0.4)] {
                let h = 1e-6;
                let fd = (kernel_of_distance(family, l + h, r) - kernel_of_distance(family, l - h, r))
                    / (2.0 * h);
                let an = kernel_dl_of_distance(family, l, r);
                assert_relative_eq!(an, fd, max_relative = 1e-6);
            }
        }
    }

    #[test]
    fn spectrum_floor() {
        let pts: Vec<Vec<f64>> = (0..40)
            .map(|i| {
                let t = i as f64;
                vec![(t * 0.37).sin() * 3.0, (t * 0.11).cos() * 2.0]
            })
            .collect();
        let data = Dataset::from_points(&pts).unwrap();
        let spec = KernelSpec::new(KernelFamily::Matern32, 1.3, 2.0, 0.05).unwrap();
        let g = gram_matrix(&spec, &data).unwrap();
        let ev = symmetric_eigenvalues(g.matrix()).unwrap();
        assert!(ev[0] >= spec.lambda_min_floor() * (1.0 - 1e-10));
    }
}
