mod common;

use common::{random_kernel_system, rel_err};
use nalgebra::{DMatrix, DVector};
use ptss_core::linalg::{symmetric_eigenvalues, Cholesky, SymTridiagonal};
use ptss_core::operators::dense_cholesky_oracle;
use ptss_core::rng::{stream, uniform01};
use ptss_core::Matrix;

fn to_na(m: &Matrix<f64>) -> DMatrix<f64> {
    DMatrix::from_fn(m.rows(), m.cols(), |i, j| m[(i, j)])
}

#[test]
fn eigenvalues_and_cholesky_agree_with_nalgebra() {
    for seed in 0..10 {
        let mut rng = stream(seed);
        let sys = random_kernel_system(&mut rng, 48);
        let a = to_na(sys.op.matrix());
        let mut ours = symmetric_eigenvalues(sys.op.matrix()).unwrap();
        let mut theirs: Vec<f64> = a.clone().symmetric_eigen().eigenvalues.iter().copied().collect();
        ours.sort_by(f64::total_cmp);
        theirs.sort_by(f64::total_cmp);
        assert!(rel_err(&ours, &theirs) <= 1e-12);

        let chol = a.clone().cholesky().unwrap();
        let logdet: f64 = chol.l().diagonal().iter().map(|d| 2.0 * d.ln()).sum();
        let x = chol.solve(&DVector::from_column_slice(&sys.y));
        let oracle = dense_cholesky_oracle(sys.op.matrix(), &sys.y).unwrap();
        assert!((oracle.logdet - logdet).abs() <= 1e-10 * logdet.abs().max(1.0));
        assert!(rel_err(&oracle.solution, x.as_slice()) <= 1e-10);
        let ours = Cholesky::factor(sys.op.matrix()).unwrap();
        assert!((ours.logdet() - logdet).abs() <= 1e-10 * logdet.abs().max(1.0));
    }
}

#[test]
fn tridiagonal_spectrum_and_solve_agree_with_nalgebra() {
    let mut rng = stream(99);
    for n in [1usize, 2, 5, 17] {
        let diag: Vec<f64> = (0..n).map(|_| 3.0 + uniform01(&mut rng)).collect();
        let off: Vec<f64> = (0..n.saturating_sub(1)).map(|_| uniform01(&mut rng)).collect();
        let t = SymTridiagonal::new(diag, off).unwrap();
        let dense = to_na(&t.to_dense());
        let eig = dense.clone().symmetric_eigen();
        let mut theirs: Vec<f64> = eig.eigenvalues.iter().copied().collect();
        theirs.sort_by(f64::total_cmp);
        assert!(rel_err(&t.eigenvalues().unwrap(), &theirs) <= 1e-12);

        // e₁ᵀ log(T) e₁ through the full eigendecomposition.
        let quad: f64 = (0..n).map(|k| eig.eigenvectors[(0, k)].powi(2) * eig.eigenvalues[k].ln()).sum();
        assert!((t.e1_quadrature(f64::ln).unwrap() - quad).abs() <= 1e-12 * quad.abs().max(1.0));

        let b: Vec<f64> = (0..n).map(|i| i as f64 - 1.0).collect();
        let x = dense.lu().solve(&DVector::from_column_slice(&b)).unwrap();
        assert!(rel_err(&t.solve(&b).unwrap(), x.as_slice()) <= 1e-12);
    }
}
