//! Gaussian-process negative log marginal likelihood
//! `L = ½(yᵀK̂⁻¹y + log|K̂| + n log 2π)` and its gradient, exactly (dense
//! Cholesky) and stochastically (TSS solves, SLQ, Hutchinson).

use crate::error::{Error, Result};
use crate::estimators::{hutchinson_with_cost, quad_form_terms, slq_logdet, SolverMode};
use crate::kernels::{gram_derivative, gram_matrix, Dataset, Hyper, KernelSpec};
use crate::krylov::ReorthPolicy;
use crate::linalg::{dot, Cholesky};
use crate::operators::{DenseOperator, LinearOperator, DEFAULT_ORACLE_CAP};
use crate::precond::{build_pivoted_cholesky, LowRankShiftPreconditioner, Preconditioner};
use crate::rng::{standard_normal_vec, Rng};
use crate::scalar::Scalar;

/// Inputs, labels and kernel hyperparameters.
#[derive(Debug, Clone)]
pub struct GpModel<T> {
    pub data: Dataset<T>,
    pub labels: Vec<T>,
    pub spec: KernelSpec<T>,
}

impl<T: Scalar> GpModel<T> {
    pub fn new(data: Dataset<T>, labels: Vec<T>, spec: KernelSpec<T>) -> Result<Self> {
        if labels.len() != data.n() {
            return Err(Error::DimensionMismatch {
                expected: data.n(),
                got: labels.len(),
            });
        }
        if labels.iter().any(|v| !v.is_finite()) {
            return Err(Error::NonFinite("labels".into()));
        }
        spec.validate()?;
        Ok(Self { data, labels, spec })
    }

    pub fn n(&self) -> usize {
        self.data.n()
    }

    pub fn with_spec(&self, spec: KernelSpec<T>) -> Self {
        Self {
            data: self.data.clone(),
            labels: self.labels.clone(),
            spec,
        }
    }

    pub fn gram(&self) -> Result<DenseOperator<T>> {
        gram_matrix(&self.spec, &self.data)
    }

    pub fn gram_derivative(&self, h: Hyper) -> Result<DenseOperator<T>> {
        gram_derivative(&self.spec, &self.data, h)
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct NlmlValue<T> {
    pub value: T,
}

/// `∂L/∂θ` for each hyperparameter; entries not requested are zero.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct NlmlGradient<T> {
    grads: [T; 3],
}

fn slot(h: Hyper) -> usize {
    match h {
        Hyper::F => 0,
        Hyper::L => 1,
        Hyper::Mu => 2,
    }
}

impl<T: Scalar> NlmlGradient<T> {
    pub fn zero() -> Self {
        Self { grads: [T::zero(); 3] }
    }

    pub fn get(&self, h: Hyper) -> T {
        self.grads[slot(h)]
    }

    pub fn set(&mut self, h: Hyper, v: T) {
        self.grads[slot(h)] = v;
    }

    pub fn iter(&self) -> impl Iterator<Item = (Hyper, T)> + '_ {
        Hyper::ALL.iter().map(move |h| (*h, self.get(*h)))
    }

    pub fn is_finite(&self) -> bool {
        self.grads.iter().all(|g| g.is_finite())
    }
}

fn half<T: Scalar>() -> T {
    T::of(0.5)
}

fn log_2pi_n<T: Scalar>(n: usize) -> T {
    T::of_usize(n) * (T::of(2.0) * T::PI()).ln()
}

fn check_cap(n: usize) -> Result<()> {
    if n > DEFAULT_ORACLE_CAP {
        return Err(Error::OracleTooLarge {
            n,
            cap: DEFAULT_ORACLE_CAP,
        });
    }
    Ok(())
}

/// Exact NLML by dense Cholesky.
pub fn nlml_exact<T: Scalar>(model: &GpModel<T>) -> Result<NlmlValue<T>> {
    check_cap(model.n())?;
    let g = model.gram()?;
    let chol = Cholesky::factor(g.matrix())?;
    let alpha = chol.solve(&model.labels);
    let value = half::<T>() * (dot(&model.labels, &alpha) + chol.logdet() + log_2pi_n(model.n()));
    Ok(NlmlValue { value })
}

/// Exact NLML and gradient
/// `∂L/∂θ = −½(αᵀ(∂K̂/∂θ)α − tr(K̂⁻¹ ∂K̂/∂θ))`, `α = K̂⁻¹y`.
pub fn nlml_and_grad_exact<T: Scalar>(model: &GpModel<T>, active: &[Hyper]) -> Result<(NlmlValue<T>, NlmlGradient<T>)> {
    check_cap(model.n())?;
    let g = model.gram()?;
    let chol = Cholesky::factor(g.matrix())?;
    let alpha = chol.solve(&model.labels);
    let value = half::<T>() * (dot(&model.labels, &alpha) + chol.logdet() + log_2pi_n(model.n()));
    let kinv = chol.inverse();
    let mut grad = NlmlGradient::zero();
    for h in active {
        let d = model.gram_derivative(*h)?;
        let dm = d.matrix();
        let quad = dot(&alpha, &dm.matvec(&alpha));
        let trace: T = kinv.as_slice().iter().zip(dm.as_slice()).map(|(a, b)| *a * *b).sum();
        grad.set(*h, -half::<T>() * (quad - trace));
    }
    Ok((NlmlValue { value }, grad))
}

pub fn nlml_grad_exact<T: Scalar>(model: &GpModel<T>) -> Result<NlmlGradient<T>> {
    Ok(nlml_and_grad_exact(model, &Hyper::ALL)?.1)
}

/// Preconditioner construction for the stochastic NLML.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PrecondSettings {
    /// Pivoted-Cholesky rank `r`.
    pub rank: usize,
    /// Shift `η`; `None` uses `f²μ`.
    pub eta: Option<f64>,
}

/// Settings for the stochastic NLML estimators.
#[derive(Debug, Clone, PartialEq)]
pub struct EstimatorConfig {
    /// Truncation of the linear solves.
    pub solver: SolverMode,
    /// Truncation of the Lanczos log-determinant quadrature.
    pub logdet_solver: SolverMode,
    /// Probe count for SLQ and Hutchinson.
    pub k_z: usize,
    pub policy: ReorthPolicy,
    pub precond: Option<PrecondSettings>,
}

impl EstimatorConfig {
    /// Same truncation for solves and log-determinant, full reorthogonalisation,
    /// no preconditioner.
    pub fn new(solver: SolverMode, k_z: usize) -> Self {
        Self {
            logdet_solver: solver.clone(),
            solver,
            k_z,
            policy: ReorthPolicy::Full,
            precond: None,
        }
    }
}

/// Builds the configured preconditioner for `K̂`.
pub fn build_preconditioner<T: Scalar>(
    model: &GpModel<T>,
    gram: &DenseOperator<T>,
    settings: &PrecondSettings,
) -> Result<LowRankShiftPreconditioner<T>> {
    let eta = settings.eta.map_or(model.spec.lambda_min_floor(), T::of);
    build_pivoted_cholesky(gram, settings.rank.min(model.n()), eta)
}

/// A stochastic NLML evaluation.
#[derive(Debug, Clone, PartialEq)]
pub struct NlmlEstimate<T> {
    pub value: Option<T>,
    pub grad: NlmlGradient<T>,
    /// Operator applications spent.
    pub matvecs: usize,
}

/// Stochastic NLML value and/or gradient. The quadratic-form solve is shared
/// between the value and the gradient; probes are fresh on every call.
pub fn nlml_estimate_full<T: Scalar>(
    model: &GpModel<T>,
    cfg: &EstimatorConfig,
    want_value: bool,
    active: &[Hyper],
    rng: &mut Rng,
) -> Result<NlmlEstimate<T>> {
    let gram = model.gram()?;
    let pre = cfg
        .precond
        .as_ref()
        .map(|s| build_preconditioner(model, &gram, s))
        .transpose()?;
    let pre_dyn = pre.as_ref().map(|p| p as &dyn Preconditioner<T>);
    let derivs = active
        .iter()
        .map(|h| model.gram_derivative(*h))
        .collect::<Result<Vec<_>>>()?;
    let d_refs: Vec<&dyn LinearOperator<T>> = derivs.iter().map(|d| d as &dyn LinearOperator<T>).collect();

    let quad = quad_form_terms(&gram, &d_refs, &model.labels, &cfg.solver, pre_dyn, rng)?;
    let mut matvecs = quad.matvecs;
    let value = if want_value {
        let slq = slq_logdet(&gram, cfg.k_z, &cfg.logdet_solver, cfg.policy, pre_dyn, rng)?;
        matvecs += slq.lanczos_steps;
        Some(half::<T>() * (quad.value + slq.estimate + log_2pi_n(model.n())))
    } else {
        None
    };
    let mut grad = NlmlGradient::zero();
    if !active.is_empty() {
        let (traces, spent) = hutchinson_with_cost(&gram, &d_refs, cfg.k_z, &cfg.solver, pre_dyn, rng)?;
        matvecs += spent;
        for ((h, q), t) in active.iter().zip(&quad.grads).zip(traces) {
            grad.set(*h, -half::<T>() * (*q - t));
        }
    }
    if let Some(v) = value {
        if !v.is_finite() {
            return Err(Error::NonFinite("NLML estimate".into()));
        }
    }
    if !grad.is_finite() {
        return Err(Error::NonFinite("NLML gradient estimate".into()));
    }
    Ok(NlmlEstimate { value, grad, matvecs })
}

/// `½(yᵀx̂ + SLQ + n log 2π)`.
pub fn nlml_estimate<T: Scalar>(model: &GpModel<T>, cfg: &EstimatorConfig, rng: &mut Rng) -> Result<NlmlValue<T>> {
    let e = nlml_estimate_full(model, cfg, true, &[], rng)?;
    Ok(NlmlValue {
        value: e.value.expect("value requested"),
    })
}

/// `−½(x̃ᵀ(∂K̂/∂θ)x̃′ − Hutchinson)` for every hyperparameter.
pub fn nlml_grad_estimate<T: Scalar>(model: &GpModel<T>, cfg: &EstimatorConfig, rng: &mut Rng) -> Result<NlmlGradient<T>> {
    Ok(nlml_estimate_full(model, cfg, false, &Hyper::ALL, rng)?.grad)
}

/// `y = L g` with `K̂ = LLᵀ` and `g` standard normal.
pub fn sample_labels_from_prior<T: Scalar>(spec: &KernelSpec<T>, data: &Dataset<T>, rng: &mut Rng) -> Result<Vec<T>> {
    check_cap(data.n())?;
    let g = gram_matrix(spec, data)?;
    let chol = Cholesky::factor(g.matrix())?;
    let z: Vec<T> = standard_normal_vec(rng, data.n());
    Ok(chol.mul_lower(&z))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::kernels::KernelFamily;
    use crate::rng::stream;
    use approx::assert_relative_eq;

    #[test]
    fn scalar_nlml_examples() {
        let data = Dataset::from_1d(&[0.0]).unwrap();
        let m = GpModel::new(data.clone(), vec![0.0], KernelSpec::new(KernelFamily::Rbf, 1.0, 1.0, 0.0).unwrap()).unwrap();
        assert_relative_eq!(nlml_exact(&m).unwrap().value, 0.918938533204673, epsilon = 1e-14);
        // K̂ = [2] via μ = 1
        let m = GpModel::new(data, vec![1.0], KernelSpec::new(KernelFamily::Rbf, 1.0, 1.0, 1.0).unwrap()).unwrap();
        let want = 0.5 * (0.5 + 2f64.ln() + (2.0 * std::f64::consts::PI).ln());
        assert_relative_eq!(nlml_exact(&m).unwrap().value, want, epsilon = 1e-14);
        assert_relative_eq!(want, 1.51551, epsilon = 1e-5);
    }

    #[test]
    fn identity_kernel_estimate_is_exact() {
        // far-apart points make K numerically the identity
        let data = Dataset::from_1d(&[0.0, 100.0, 200.0]).unwrap();
        let y = vec![1.0, -2.0, 0.5];
        let m = GpModel::new(data, y.clone(), KernelSpec::new(KernelFamily::Rbf, 1.0, 1.0, 0.0).unwrap()).unwrap();
        let cfg = EstimatorConfig::new(SolverMode::Truncated(1), 2);
        let v = nlml_estimate(&m, &cfg, &mut stream(1)).unwrap().value;
        let want = 0.5 * (5.25 + 3.0 * (2.0 * std::f64::consts::PI).ln());
        assert_relative_eq!(v, want, epsilon = 1e-12);
    }

    #[test]
    fn prior_samples_are_reproducible_and_scaled() {
        let data = Dataset::from_1d(&[0.0]).unwrap();
        // K̂ = 4 via f = 2, μ = 0
        let spec = KernelSpec::new(KernelFamily::Rbf, 2.0, 1.0, 0.0).unwrap();
        let mut rng = stream(3);
        let draws = 20_000;
        let s: Vec<f64> = (0..draws).map(|_| sample_labels_from_prior(&spec, &data, &mut rng).unwrap()[0]).collect();
        let var = s.iter().map(|v| v * v).sum::<f64>() / draws as f64;
        // Var of the sample second moment is 2σ⁴/N
        assert!((var - 4.0).abs() <= 3.0 * (2.0 * 16.0 / draws as f64).sqrt(), "{var}");
        let a = sample_labels_from_prior(&spec, &data, &mut stream(9)).unwrap();
        let b = sample_labels_from_prior(&spec, &data, &mut stream(9)).unwrap();
        assert_eq!(a, b);
    }

    #[test]
    fn exact_gradient_matches_finite_differences() {
        let pts: Vec<Vec<f64>> = (0..12).map(|i| vec![(i as f64 * 0.9).sin() * 2.0, i as f64 * 0.3]).collect();
        let data = Dataset::from_points(&pts).unwrap();
        let y: Vec<f64> = (0..12).map(|i| (i as f64 * 1.7).cos()).collect();
        for family in [KernelFamily::Rbf, KernelFamily::Matern32] {
            let spec = KernelSpec::new(family, 1.3, 0.8, 0.2).unwrap();
            let m = GpModel::new(data.clone(), y.clone(), spec).unwrap();
            let g = nlml_grad_exact(&m).unwrap();
            for h in Hyper::ALL {
                let t = spec.get(h);
                let step = 1e-6 * t;
                let up = nlml_exact(&m.with_spec(spec.with(h, t + step))).unwrap().value;
                let dn = nlml_exact(&m.with_spec(spec.with(h, t - step))).unwrap().value;
                assert_relative_eq!(g.get(h), (up - dn) / (2.0 * step), max_relative = 1e-5);
            }
        }
    }
}
