mod common;

use common::{log_spaced, max_abs_diff, random_kernel_system, rel_err, rotated_spd, uniform_vec};
use proptest::prelude::*;
use ptss_core::krylov::{cg_run, cg_to_tridiagonal, lanczos_run, ReorthPolicy};
use ptss_core::linalg::{dot, norm2, symmetric_eigenvalues};
use ptss_core::operators::{dense_cholesky_oracle, DenseOperator, LinearOperator};
use ptss_core::precond::{build_pivoted_cholesky, Preconditioner};
use ptss_core::rng::{stream, uniform01};
use ptss_core::Matrix;

fn unit(v: &[f64]) -> Vec<f64> {
    let n = norm2(v);
    v.iter().map(|x| x / n).collect()
}

/// `BᵀB + I` for a random `n × n` matrix `B`; generic, well separated spectrum.
fn random_spd(seed: u64, n: usize) -> DenseOperator<f64> {
    let mut rng = stream(seed);
    let b = Matrix::from_fn(n, n, |_, _| uniform01(&mut rng) - 0.5);
    let mut a = b.transpose().matmul(&b).unwrap();
    a.add_diagonal(1.0);
    let sym = Matrix::from_fn(n, n, |i, j| 0.5 * (a[(i, j)] + a[(j, i)]));
    DenseOperator::new(sym).unwrap()
}

#[test]
fn cg_coefficients_reproduce_lanczos_tridiagonal() {
    for seed in 0..20 {
        let mut rng = stream(100 + seed);
        let op = rotated_spd(&mut rng, &log_spaced(1.0, 1e3, 32));
        let y = uniform_vec(&mut rng, 32, -1.0, 1.0);
        let cg = cg_run(&op, &y, 10, None, 0.0).unwrap();
        assert_eq!(cg.m(), 10);
        let from_cg = cg_to_tridiagonal(&cg, 10).unwrap();
        let lz = lanczos_run(&op, &unit(&y), 10, ReorthPolicy::Full, None).unwrap();
        let from_lz = lz.tridiagonal(10);
        assert!(max_abs_diff(&from_cg.diag, &from_lz.diag) <= 1e-8, "seed {seed}");
        assert!(max_abs_diff(&from_cg.offdiag, &from_lz.offdiag) <= 1e-8, "seed {seed}");
    }
}

#[test]
fn full_reorthogonalisation_keeps_basis_orthonormal() {
    for (seed, n) in [(1u64, 16usize), (2, 40), (3, 64)] {
        let mut rng = stream(seed);
        let sys = random_kernel_system(&mut rng, n);
        let m = n / 2;
        let lz = lanczos_run(&sys.op, &unit(&sys.y), m, ReorthPolicy::Full, None).unwrap();
        let q = &lz.basis;
        assert_eq!(q.len(), lz.m());
        for i in 0..q.len() {
            for j in 0..q.len() {
                let target = if i == j { 1.0 } else { 0.0 };
                assert!((dot(&q[i], &q[j]) - target).abs() <= 1e-8, "n={n} ({i},{j})");
            }
        }
    }
}

#[test]
fn ritz_values_lie_inside_the_spectrum() {
    for seed in 0..8 {
        let mut rng = stream(200 + seed);
        let sys = random_kernel_system(&mut rng, 48);
        let eig = symmetric_eigenvalues(sys.op.matrix()).unwrap();
        let (lo, hi) = (eig[0], eig[eig.len() - 1]);
        let z = uniform_vec(&mut rng, 48, -1.0, 1.0);
        for policy in [ReorthPolicy::Full, ReorthPolicy::Window(2), ReorthPolicy::none()] {
            let lz = lanczos_run(&sys.op, &unit(&z), 20, policy, None).unwrap();
            let cg = cg_run(&sys.op, &sys.y, 20, None, 0.0).unwrap();
            let eps = 1e-6 * hi;
            for j in 1..=cg.m() {
                for t in cg_to_tridiagonal(&cg, j).unwrap().eigenvalues().unwrap() {
                    assert!(t >= lo - eps && t <= hi + eps, "CG Ritz value {t} outside [{lo}, {hi}]");
                }
            }
            for j in 1..=lz.m() {
                for t in lz.tridiagonal(j).eigenvalues().unwrap() {
                    assert!(t >= lo * (1.0 - 1e-9) && t <= hi * (1.0 + 1e-9), "{t} outside [{lo}, {hi}]");
                }
            }
        }
    }
}

#[test]
fn complete_lanczos_recovers_dense_spectrum() {
    let n = 32;
    let op = random_spd(7, n);
    let eig = symmetric_eigenvalues(op.matrix()).unwrap();
    let mut rng = stream(8);
    let z = uniform_vec(&mut rng, n, -1.0, 1.0);
    let lz = lanczos_run(&op, &unit(&z), n, ReorthPolicy::Full, None).unwrap();
    assert_eq!(lz.m(), n);
    let ritz = lz.tridiagonal(n).eigenvalues().unwrap();
    assert!(rel_err(&ritz, &eig) <= 1e-10);
    assert!(max_abs_diff(&ritz, &eig) <= 1e-8 * eig[n - 1]);
}

#[test]
fn cg_converges_to_the_cholesky_solution() {
    let mut rng = stream(9);
    let sys = random_kernel_system(&mut rng, 64);
    let oracle = dense_cholesky_oracle(sys.op.matrix(), &sys.y).unwrap();
    let cg = cg_run(&sys.op, &sys.y, 400, None, 1e-12).unwrap();
    assert!(rel_err(&cg.solution(), &oracle.solution) <= 1e-8);
}

#[test]
fn pcg_matches_cg_on_the_split_preconditioned_operator() {
    for seed in 0..5 {
        let mut rng = stream(300 + seed);
        let sys = random_kernel_system(&mut rng, 48);
        let eta = sys.spec.lambda_min_floor();
        let pre = build_pivoted_cholesky(&sys.op, 8, eta).unwrap();
        let n = sys.op.dim();
        // Â = M^{-1/2} A M^{-1/2}, assembled column by column.
        let cols: Vec<Vec<f64>> = (0..n)
            .map(|j| {
                let mut e = vec![0.0; n];
                e[j] = 1.0;
                pre.apply_minv_sqrt(&sys.op.apply(&pre.apply_minv_sqrt(&e)))
            })
            .collect();
        let a_hat = Matrix::from_fn(n, n, |i, j| 0.5 * (cols[j][i] + cols[i][j]));
        let a_hat = DenseOperator::new(a_hat).unwrap();
        let y_hat = pre.apply_minv_sqrt(&sys.y);
        let pcg = cg_run(&sys.op, &sys.y, 12, Some(&pre as &dyn Preconditioner<f64>), 0.0).unwrap();
        let cg = cg_run(&a_hat, &y_hat, 12, None, 0.0).unwrap();
        for j in 1..=pcg.m().min(cg.m()) {
            let tp = cg_to_tridiagonal(&pcg, j).unwrap();
            let tc = cg_to_tridiagonal(&cg, j).unwrap();
            let scale = tc.diag.iter().fold(1.0f64, |m, v| m.max(v.abs()));
            assert!(max_abs_diff(&tp.diag, &tc.diag) <= 1e-8 * scale, "seed {seed} j {j}");
            assert!(max_abs_diff(&tp.offdiag, &tc.offdiag) <= 1e-8 * scale, "seed {seed} j {j}");
            let mapped = pre.apply_minv_sqrt(&cg.iterate(j));
            assert!(rel_err(&pcg.iterate(j), &mapped) <= 1e-7, "seed {seed} j {j}");
        }
    }
}

#[test]
fn iterates_are_partial_sums_of_increments() {
    let mut rng = stream(11);
    let sys = random_kernel_system(&mut rng, 40);
    let cg = cg_run(&sys.op, &sys.y, 15, None, 0.0).unwrap();
    let mut acc = cg.x0.clone();
    for j in 1..=cg.m() {
        for (a, d) in acc.iter_mut().zip(&cg.increments[j - 1]) {
            *a += d;
        }
        assert_eq!(acc, cg.iterate(j));
        assert_eq!(cg.increment(j), cg.increments[j - 1]);
    }
    assert!(cg.increment(cg.m() + 3).iter().all(|v| *v == 0.0));
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(24))]

    #[test]
    fn cg_residual_norms_match_explicit_residuals(seed in 0u64..1000, m in 1usize..20) {
        let mut rng = stream(seed);
        let sys = random_kernel_system(&mut rng, 32);
        let cg = cg_run(&sys.op, &sys.y, m, None, 0.0).unwrap();
        for j in 1..=cg.m() {
            let x = cg.iterate(j);
            let ax = sys.op.apply(&x);
            let r: Vec<f64> = sys.y.iter().zip(&ax).map(|(a, b)| a - b).collect();
            let scale = norm2(&sys.y);
            prop_assert!((norm2(&r) - cg.residual_norms[j - 1]).abs() <= 1e-6 * scale);
        }
    }

    #[test]
    fn lanczos_tridiagonal_is_projection_of_operator(seed in 0u64..1000, m in 2usize..12) {
        let mut rng = stream(seed);
        let sys = random_kernel_system(&mut rng, 24);
        let z = uniform_vec(&mut rng, 24, -1.0, 1.0);
        let lz = lanczos_run(&sys.op, &unit(&z), m, ReorthPolicy::Full, None).unwrap();
        let k = lz.m();
        let t = lz.tridiagonal(k).to_dense();
        let scale = t.frobenius_norm();
        for i in 0..k {
            let aq = sys.op.apply(&lz.basis[i]);
            for j in 0..k {
                prop_assert!((dot(&lz.basis[j], &aq) - t[(j, i)]).abs() <= 1e-9 * scale);
            }
        }
    }
}
