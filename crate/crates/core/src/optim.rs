//! Softplus-reparameterised hyperparameter training with gradient descent or
//! Adam.

use crate::error::{Error, Result};
use crate::gp::{nlml_and_grad_exact, nlml_estimate_full, EstimatorConfig, GpModel, NlmlGradient};
use crate::kernels::{Hyper, KernelSpec};
use crate::rng::Rng;
use crate::scalar::Scalar;

/// `log(1 + eˣ)`, evaluated as `x + log(1 + e^{−x})` for `x > 20`.
pub fn softplus<T: Scalar>(x: T) -> T {
    if x > T::of(20.0) {
        x + (-x).exp().ln_1p()
    } else {
        x.exp().ln_1p()
    }
}

/// Inverse of [`softplus`], `log(eʸ − 1)`.
pub fn softplus_inv<T: Scalar>(y: T) -> Result<T> {
    if !(y > T::zero()) {
        return Err(Error::InvalidArgument(format!("softplus_inv needs y > 0, got {y}")));
    }
    if y > T::of(20.0) {
        Ok(y + (-(-y).exp()).ln_1p())
    } else {
        Ok(y.exp_m1().ln())
    }
}

pub fn sigmoid<T: Scalar>(x: T) -> T {
    if x >= T::zero() {
        T::one() / (T::one() + (-x).exp())
    } else {
        let e = x.exp();
        e / (T::one() + e)
    }
}

/// `dL/dθ̃ = dL/dθ · σ(θ̃)` for `θ = softplus(θ̃)`.
pub fn chain_grad<T: Scalar>(theta_tilde: T, dl_dtheta: T) -> T {
    dl_dtheta * sigmoid(theta_tilde)
}

/// Unconstrained values `θ̃` for `(f, l, μ)` and the subset being optimised.
#[derive(Debug, Clone, PartialEq)]
pub struct UnconstrainedParams<T> {
    tilde: [T; 3],
    active: Vec<Hyper>,
}

fn slot(h: Hyper) -> usize {
    match h {
        Hyper::F => 0,
        Hyper::L => 1,
        Hyper::Mu => 2,
    }
}

impl<T: Scalar> UnconstrainedParams<T> {
    pub fn from_unconstrained(tilde: [T; 3], active: &[Hyper]) -> Self {
        Self {
            tilde,
            active: active.to_vec(),
        }
    }

    /// Inverts softplus on constrained `(f, l, μ)`.
    pub fn from_constrained(f: T, l: T, mu: T, active: &[Hyper]) -> Result<Self> {
        Ok(Self {
            tilde: [softplus_inv(f)?, softplus_inv(l)?, softplus_inv(mu)?],
            active: active.to_vec(),
        })
    }

    pub fn tilde(&self, h: Hyper) -> T {
        self.tilde[slot(h)]
    }

    pub fn set_tilde(&mut self, h: Hyper, v: T) {
        self.tilde[slot(h)] = v;
    }

    pub fn value(&self, h: Hyper) -> T {
        softplus(self.tilde(h))
    }

    pub fn active(&self) -> &[Hyper] {
        &self.active
    }

    /// Constrained spec with the given family.
    pub fn to_spec(&self, template: &KernelSpec<T>) -> Result<KernelSpec<T>> {
        KernelSpec::new(template.family, self.value(Hyper::F), self.value(Hyper::L), self.value(Hyper::Mu))
    }

    /// Gradient with respect to the active `θ̃`.
    pub fn chain(&self, grad: &NlmlGradient<T>) -> Vec<T> {
        self.active
            .iter()
            .map(|h| chain_grad(self.tilde(*h), grad.get(*h)))
            .collect()
    }

    pub fn active_values(&self) -> Vec<T> {
        self.active.iter().map(|h| self.tilde(*h)).collect()
    }

    pub fn set_active_values(&mut self, vals: &[T]) {
        for (h, v) in self.active.clone().iter().zip(vals) {
            self.set_tilde(*h, *v);
        }
    }
}

fn check_finite<T: Scalar>(grads: &[T]) -> Result<()> {
    if let Some(g) = grads.iter().find(|g| !g.is_finite()) {
        return Err(Error::NonFinite(format!("gradient entry {g}")));
    }
    Ok(())
}

/// `θ̃ ← θ̃ − lr·g`.
pub fn gd_step<T: Scalar>(params: &mut [T], grads: &[T], lr: T) -> Result<()> {
    check_finite(grads)?;
    for (p, g) in params.iter_mut().zip(grads) {
        *p -= lr * *g;
    }
    Ok(())
}

#[derive(Debug, Clone, PartialEq)]
pub struct AdamState<T> {
    pub first_moment: Vec<T>,
    pub second_moment: Vec<T>,
    pub step_count: u32,
    pub lr: T,
    pub beta1: T,
    pub beta2: T,
    pub eps: T,
}

impl<T: Scalar> AdamState<T> {
    /// `β₁ = 0.9`, `β₂ = 0.999`, `ε = 1e-8`.
    pub fn new(dim: usize, lr: T) -> Self {
        Self {
            first_moment: vec![T::zero(); dim],
            second_moment: vec![T::zero(); dim],
            step_count: 0,
            lr,
            beta1: T::of(0.9),
            beta2: T::of(0.999),
            eps: T::of(1e-8),
        }
    }
}

/// One bias-corrected Adam update.
pub fn adam_step<T: Scalar>(params: &mut [T], grads: &[T], state: &mut AdamState<T>) -> Result<()> {
    check_finite(grads)?;
    if grads.len() != state.first_moment.len() || params.len() != grads.len() {
        return Err(Error::DimensionMismatch {
            expected: state.first_moment.len(),
            got: grads.len(),
        });
    }
    state.step_count += 1;
    let t = state.step_count as i32;
    let one = T::one();
    let c1 = one - state.beta1.powi(t);
    let c2 = one - state.beta2.powi(t);
    for i in 0..params.len() {
        let g = grads[i];
        state.first_moment[i] = state.beta1 * state.first_moment[i] + (one - state.beta1) * g;
        state.second_moment[i] = state.beta2 * state.second_moment[i] + (one - state.beta2) * g * g;
        let mh = state.first_moment[i] / c1;
        let vh = state.second_moment[i] / c2;
        params[i] -= state.lr * mh / (vh.sqrt() + state.eps);
    }
    Ok(())
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum OptimizerKind {
    GradientDescent { lr: f64 },
    Adam { lr: f64 },
}

/// Where gradients come from.
#[derive(Debug, Clone, PartialEq)]
pub enum GradientSource {
    Exact,
    Estimated(EstimatorConfig),
}

#[derive(Debug, Clone, PartialEq)]
pub struct TrainConfig {
    pub optimizer: OptimizerKind,
    pub iterations: usize,
    /// Optimise `L/n` instead of `L`.
    pub normalize_by_n: bool,
    /// Record the exact NLML at every step (dense Cholesky).
    pub record_exact_nlml: bool,
}

impl TrainConfig {
    pub fn new(optimizer: OptimizerKind, iterations: usize) -> Self {
        Self {
            optimizer,
            iterations,
            normalize_by_n: true,
            record_exact_nlml: false,
        }
    }
}

/// State before the update of step `step`.
#[derive(Debug, Clone, PartialEq)]
pub struct TrainRecord<T> {
    pub step: usize,
    pub f: T,
    pub l: T,
    pub mu: T,
    /// NLML at these parameters when it was computed (exact source or
    /// `record_exact_nlml`), unnormalised.
    pub nlml: Option<T>,
    /// `∂L/∂θ` used for the update (unnormalised, constrained space).
    pub grad: NlmlGradient<T>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Trajectory<T> {
    pub records: Vec<TrainRecord<T>>,
    /// Parameters after the last completed update.
    pub final_spec: KernelSpec<T>,
    /// Reason the run stopped early, if it did.
    pub failure: Option<String>,
}

/// Runs the optimiser; stops at the first error and reports it in
/// `failure`, keeping the records so far.
pub fn train<T: Scalar>(
    model: &GpModel<T>,
    init: UnconstrainedParams<T>,
    cfg: &TrainConfig,
    source: &GradientSource,
    rng: &mut Rng,
) -> Result<Trajectory<T>> {
    if cfg.iterations == 0 {
        return Err(Error::InvalidArgument("training needs at least one iteration".into()));
    }
    let mut params = init;
    let mut spec = params.to_spec(&model.spec)?;
    let scale = if cfg.normalize_by_n {
        T::one() / T::of_usize(model.n())
    } else {
        T::one()
    };
    let mut adam = match cfg.optimizer {
        OptimizerKind::Adam { lr } => Some(AdamState::new(params.active().len(), T::of(lr))),
        OptimizerKind::GradientDescent { .. } => None,
    };
    let mut records = Vec::with_capacity(cfg.iterations);
    let mut failure = None;
    for step in 0..cfg.iterations {
        let current = model.with_spec(spec);
        let outcome = (|| -> Result<(Option<T>, NlmlGradient<T>)> {
            match source {
                GradientSource::Exact => {
                    let (v, g) = nlml_and_grad_exact(&current, params.active())?;
                    Ok((Some(v.value), g))
                }
                GradientSource::Estimated(ec) => {
                    let e = nlml_estimate_full(&current, ec, false, params.active(), rng)?;
                    let v = if cfg.record_exact_nlml {
                        Some(crate::gp::nlml_exact(&current)?.value)
                    } else {
                        None
                    };
                    Ok((v, e.grad))
                }
            }
        })();
        let (nlml, grad) = match outcome {
            Ok(x) => x,
            Err(e) => {
                failure = Some(format!("step {step}: {e}"));
                break;
            }
        };
        records.push(TrainRecord {
            step,
            f: spec.f,
            l: spec.l,
            mu: spec.mu,
            nlml,
            grad,
        });
        let g: Vec<T> = params.chain(&grad).into_iter().map(|v| v * scale).collect();
        let mut vals = params.active_values();
        let res = match (&cfg.optimizer, adam.as_mut()) {
            (OptimizerKind::GradientDescent { lr }, _) => gd_step(&mut vals, &g, T::of(*lr)),
            (OptimizerKind::Adam { .. }, Some(state)) => adam_step(&mut vals, &g, state),
            (OptimizerKind::Adam { .. }, None) => unreachable!("Adam state initialised above"),
        };
        if let Err(e) = res {
            failure = Some(format!("step {step}: {e}"));
            break;
        }
        params.set_active_values(&vals);
        match params.to_spec(&model.spec) {
            Ok(s) => spec = s,
            Err(e) => {
                failure = Some(format!("step {step}: {e}"));
                break;
            }
        }
    }
    Ok(Trajectory {
        records,
        final_spec: spec,
        failure,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;

    #[test]
    fn softplus_examples() {
        assert_relative_eq!(softplus(0.0f64), 2f64.ln(), epsilon = 1e-15);
        assert_relative_eq!(softplus_inv(softplus(3.7f64)).unwrap(), 3.7, epsilon = 1e-12);
        assert_relative_eq!(softplus_inv(softplus(45.0f64)).unwrap(), 45.0, epsilon = 1e-12);
        assert_relative_eq!(softplus(50.0f64), 50.0, epsilon = 1e-15);
        assert!(softplus_inv(0.0f64).is_err());
        assert_relative_eq!(chain_grad(0.0f64, 2.0), 1.0);
    }

    #[test]
    fn gd_and_adam_steps() {
        let mut p = [0.0f64];
        gd_step(&mut p, &[1.0], 0.1).unwrap();
        assert_relative_eq!(p[0], -0.1);
        gd_step(&mut p, &[0.0], 0.1).unwrap();
        assert_relative_eq!(p[0], -0.1);
        assert!(gd_step(&mut p, &[f64::NAN], 0.1).is_err());

        let mut p = [0.5f64];
        let mut st = AdamState::new(1, 0.01);
        adam_step(&mut p, &[0.0], &mut st).unwrap();
        assert_eq!(p[0], 0.5);
        let mut st = AdamState::new(1, 0.01);
        adam_step(&mut p, &[1.0], &mut st).unwrap();
        assert_relative_eq!(p[0], 0.5 - 0.01, epsilon = 1e-9);
        assert_eq!(st.step_count, 1);
    }
}
