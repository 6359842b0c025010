#![allow(dead_code)]

use ptss_core::kernels::{gram_matrix, Dataset, KernelFamily, KernelSpec};
use ptss_core::operators::DenseOperator;
use ptss_core::rng::{uniform01, Rng};
use ptss_core::Matrix;

pub fn cube_points(rng: &mut Rng, n: usize, d: usize, side: f64) -> Dataset<f64> {
    let m = Matrix::from_fn(n, d, |_, _| side * uniform01(rng));
    Dataset::new(m).unwrap()
}

pub fn uniform_vec(rng: &mut Rng, n: usize, lo: f64, hi: f64) -> Vec<f64> {
    (0..n).map(|_| lo + (hi - lo) * uniform01(rng)).collect()
}

pub struct KernelSystem {
    pub spec: KernelSpec<f64>,
    pub data: Dataset<f64>,
    pub op: DenseOperator<f64>,
    pub y: Vec<f64>,
}

/// Random kernel system on a cube of side `n^{1/3}`, random family, length
/// scale in [0.5, 3] and noise in [0.01, 0.5].
pub fn random_kernel_system(rng: &mut Rng, n: usize) -> KernelSystem {
    let family = if uniform01(rng) < 0.5 { KernelFamily::Rbf } else { KernelFamily::Matern32 };
    let l = 0.5 + 2.5 * uniform01(rng);
    let mu = 0.01 + 0.49 * uniform01(rng);
    let spec = KernelSpec::new(family, 1.0, l, mu).unwrap();
    let data = cube_points(rng, n, 3, (n as f64).cbrt());
    let op = gram_matrix(&spec, &data).unwrap();
    let y = uniform_vec(rng, n, -1.0, 1.0);
    KernelSystem { spec, data, op, y }
}

pub fn rel_err(a: &[f64], b: &[f64]) -> f64 {
    let num: f64 = a.iter().zip(b).map(|(x, y)| (x - y) * (x - y)).sum::<f64>().sqrt();
    let den: f64 = b.iter().map(|y| y * y).sum::<f64>().sqrt();
    num / den.max(f64::MIN_POSITIVE)
}

pub fn max_abs_diff(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).fold(0.0, |m, (x, y)| m.max((x - y).abs()))
}

/// `Q diag(eigenvalues) Qᵀ` with `Q` the orthogonal factor of a Gaussian matrix.
pub fn rotated_spd(rng: &mut Rng, eigenvalues: &[f64]) -> DenseOperator<f64> {
    let n = eigenvalues.len();
    let g = nalgebra::DMatrix::<f64>::from_fn(n, n, |_, _| ptss_core::rng::standard_normal(rng));
    let q = g.qr().q();
    let a = &q * nalgebra::DMatrix::from_diagonal(&nalgebra::DVector::from_column_slice(eigenvalues)) * q.transpose();
    let m = Matrix::from_fn(n, n, |i, j| 0.5 * (a[(i, j)] + a[(j, i)]));
    DenseOperator::new(m).unwrap()
}

pub fn log_spaced(lo: f64, hi: f64, n: usize) -> Vec<f64> {
    (0..n)
        .map(|i| lo * (hi / lo).powf(i as f64 / (n - 1) as f64))
        .collect()
}

use ptss_core::truncation::{make_exponential, make_gamma_optimal, make_geometric, Flavor, TruncationDistribution};

/// A random truncation distribution on a random support inside `1..=cap`.
pub fn random_distribution(rng: &mut Rng, cap: usize, kappa: f64) -> TruncationDistribution {
    let i_min = 1 + (uniform01(rng) * (cap / 2) as f64) as usize;
    let i_max = (i_min + 1 + (uniform01(rng) * (cap - i_min) as f64) as usize).min(cap);
    match (uniform01(rng) * 5.0) as usize {
        0 => make_exponential(0.1 + uniform01(rng), i_min, i_max).unwrap(),
        1 => make_geometric(i_min, i_max).unwrap(),
        2 => TruncationDistribution::uniform(i_min, i_max).unwrap(),
        3 => make_gamma_optimal(Flavor::Solve, kappa, i_min, i_max).unwrap(),
        _ => {
            let w: Vec<f64> = (i_min..=i_max).map(|_| 0.05 + uniform01(rng)).collect();
            TruncationDistribution::from_weights(i_min, i_max, &w).unwrap()
        }
    }
}
