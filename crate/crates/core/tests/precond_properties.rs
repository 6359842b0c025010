mod common;

use common::{cube_points, random_kernel_system, rel_err, uniform_vec};
use ptss_core::estimators::{slq_logdet, SolverMode};
use ptss_core::kernels::{gram_matrix, KernelFamily, KernelSpec};
use ptss_core::krylov::{cg_run, ReorthPolicy};
use ptss_core::linalg::{Cholesky, Matrix};
use ptss_core::operators::{condition_number_dense, logdet_dense_eigen, DenseOperator, LinearOperator};
use ptss_core::precond::{build_pivoted_cholesky, LowRankShiftPreconditioner, Preconditioner};
use ptss_core::rng::stream;

fn dense_of(n: usize, apply: impl Fn(&[f64]) -> Vec<f64>) -> Matrix<f64> {
    let cols: Vec<Vec<f64>> = (0..n)
        .map(|j| {
            let mut e = vec![0.0; n];
            e[j] = 1.0;
            apply(&e)
        })
        .collect();
    Matrix::from_fn(n, n, |i, j| cols[j][i])
}

fn symmetrised(m: &Matrix<f64>) -> DenseOperator<f64> {
    let n = m.rows();
    DenseOperator::new(Matrix::from_fn(n, n, |i, j| 0.5 * (m[(i, j)] + m[(j, i)]))).unwrap()
}

fn rbf_system(n: usize, l: f64, mu: f64, seed: u64) -> (KernelSpec<f64>, DenseOperator<f64>) {
    let mut rng = stream(seed);
    let spec = KernelSpec::new(KernelFamily::Rbf, 1.0, l, mu).unwrap();
    let data = cube_points(&mut rng, n, 3, (n as f64).cbrt());
    let op = gram_matrix(&spec, &data).unwrap();
    (spec, op)
}

#[test]
fn preconditioner_actions_match_the_dense_matrix() {
    for seed in 0..5 {
        let mut rng = stream(10 + seed);
        let sys = random_kernel_system(&mut rng, 64);
        let eta = sys.spec.lambda_min_floor();
        let pre = build_pivoted_cholesky(&sys.op, 16, eta).unwrap();
        let n = 64;
        // ηI + UUᵀ from the raw factor columns.
        let mut m = Matrix::from_fn(n, n, |i, j| pre.factor().iter().map(|u| u[i] * u[j]).sum::<f64>());
        m.add_diagonal(eta);
        assert!(m.max_abs_diff(&pre.dense()) <= 1e-12 * m.frobenius_norm());
        let chol = Cholesky::factor(&m).unwrap();
        assert!((pre.logdet() - chol.logdet()).abs() <= 1e-9 * chol.logdet().abs().max(1.0));

        let v = uniform_vec(&mut rng, n, -1.0, 1.0);
        assert!(rel_err(&pre.apply_m(&v), &m.matvec(&v)) <= 1e-12);
        assert!(rel_err(&pre.apply_minv(&v), &chol.solve(&v)) <= 1e-9);
        let half = pre.apply_minv_sqrt(&pre.apply_minv_sqrt(&v));
        assert!(rel_err(&half, &pre.apply_minv(&v)) <= 1e-9);
        let s = dense_of(n, |e| pre.apply_minv_sqrt(e));
        assert!(s.max_abs_diff(&s.transpose()) <= 1e-12 * s.frobenius_norm());
    }
}

#[test]
fn pivots_are_distinct_and_rank_is_respected() {
    let mut rng = stream(20);
    let sys = random_kernel_system(&mut rng, 64);
    let pre = build_pivoted_cholesky(&sys.op, 24, sys.spec.lambda_min_floor()).unwrap();
    assert!(pre.rank() <= 24);
    let mut p = pre.pivots().to_vec();
    p.sort_unstable();
    p.dedup();
    assert_eq!(p.len(), pre.pivots().len());
    assert!(pre.sigma2().iter().all(|s| *s >= 0.0));
}

#[test]
fn shift_only_preconditioner_is_a_scaled_identity() {
    let pre = LowRankShiftPreconditioner::<f64>::shift_only(8, 4.0).unwrap();
    let v = vec![1.0, -2.0, 3.0, 0.5, 0.0, 1.0, 2.0, -1.0];
    let expect: Vec<f64> = v.iter().map(|x| x / 2.0).collect();
    assert!(rel_err(&pre.apply_minv_sqrt(&v), &expect) <= 1e-15);
    assert!((pre.logdet() - 8.0 * 4.0f64.ln()).abs() <= 1e-12);
}

#[test]
fn split_logdet_identity_holds_exactly() {
    let (_, op) = rbf_system(128, 2.0, 0.1, 30);
    for rank in [0usize, 8, 32] {
        let pre = build_pivoted_cholesky(&op, rank, 0.1).unwrap();
        let n = op.dim();
        let a_hat = symmetrised(&dense_of(n, |e| pre.apply_minv_sqrt(&op.apply(&pre.apply_minv_sqrt(e)))));
        let lhs = Cholesky::factor(op.matrix()).unwrap().logdet();
        let rhs = pre.logdet() + Cholesky::factor(a_hat.matrix()).unwrap().logdet();
        assert!((lhs - rhs).abs() <= 1e-8 * lhs.abs().max(1.0), "rank {rank}: {lhs} vs {rhs}");
    }
}

#[test]
fn preconditioning_reduces_condition_number_and_iterations() {
    let (spec, op) = rbf_system(256, 2.0, 0.01, 40);
    let pre = build_pivoted_cholesky(&op, 64, spec.lambda_min_floor()).unwrap();
    let n = op.dim();
    let a_hat = symmetrised(&dense_of(n, |e| pre.apply_minv_sqrt(&op.apply(&pre.apply_minv_sqrt(e)))));
    let k0 = condition_number_dense(op.matrix()).unwrap();
    let k1 = condition_number_dense(a_hat.matrix()).unwrap();
    assert!(k1 < k0 / 10.0, "κ {k0} -> {k1}");

    let mut rng = stream(41);
    let y = uniform_vec(&mut rng, n, -0.5, 0.5);
    let plain = cg_run(&op, &y, n, None, 1e-8).unwrap();
    let pcg = cg_run(&op, &y, n, Some(&pre as &dyn Preconditioner<f64>), 1e-8).unwrap();
    assert!(pcg.converged);
    assert!(pcg.m() < plain.m(), "{} vs {}", pcg.m(), plain.m());
}

#[test]
fn slq_log_determinant_is_within_five_percent() {
    let (_, op) = rbf_system(256, 2.0, 0.1, 50);
    let exact = Cholesky::factor(op.matrix()).unwrap().logdet();
    let eig = logdet_dense_eigen(op.matrix()).unwrap();
    assert!((exact - eig).abs() <= 1e-8 * exact.abs());
    let mut rng = stream(51);
    let est = slq_logdet(&op, 50, &SolverMode::Truncated(50), ReorthPolicy::Full, None, &mut rng).unwrap();
    assert!((est.estimate - exact).abs() <= 0.05 * exact.abs(), "{} vs {exact}", est.estimate);

    let pre = build_pivoted_cholesky(&op, 32, 0.1).unwrap();
    let est = slq_logdet(&op, 50, &SolverMode::Truncated(50), ReorthPolicy::Full, Some(&pre), &mut rng).unwrap();
    assert!((est.estimate - exact).abs() <= 0.05 * exact.abs(), "{} vs {exact}", est.estimate);
    assert_eq!(est.logdet_m, pre.logdet());
}
