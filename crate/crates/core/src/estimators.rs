//! Truncated single-sample (TSS) estimators for `A⁻¹y` and `zᵀlog(A)z`, the
//! single-sample and Russian-roulette baselines, stochastic Lanczos
//! quadrature, Hutchinson trace derivatives, exact TSS moments and the
//! theoretical variance bounds.
//!
//! For increments `Δ_j` of a convergent sequence and `Q ~ p_Q` on
//! `{i_min..i_max}` the TSS estimate is `Σ_{i<i_min} Δ_i + Δ_Q / P(Q)`,
//! whose mean is the `i_max`-th partial sum.

use crate::error::{Error, Result};
use crate::krylov::{cg_run, lanczos_run, CgTrace, LanczosTrace, ReorthPolicy};
use crate::linalg::{axpy, dot, norm2};
use crate::operators::LinearOperator;
use crate::precond::Preconditioner;
use crate::rng::{standard_normal_vec, Rng};
use crate::scalar::Scalar;
use crate::truncation::{gamma_optimal_closed_form, Flavor, GammaFactor, TruncationDistribution};

/// Outcome of a TSS solve.
#[derive(Debug, Clone, PartialEq)]
pub struct TssSolveResult<T> {
    pub estimate: Vec<T>,
    pub sampled_q: usize,
    /// CG iterations actually run; below `sampled_q` only after convergence.
    pub iterations_run: usize,
    /// The estimator's mean is the CG iterate with this index (`i_max`).
    pub target_iteration: usize,
    /// CG converged before the sampled truncation level.
    pub converged: bool,
}

/// Outcome of a scalar TSS estimate such as TSS-LogQF.
#[derive(Debug, Clone, PartialEq)]
pub struct TssScalarResult<T> {
    /// Estimate of `zᵀ f(A) z / ‖z‖²`.
    pub estimate: T,
    pub sampled_q: usize,
    pub probe_norm_sq: T,
    /// Lanczos broke down (exact invariant subspace) before `sampled_q`.
    pub breakdown: bool,
}

fn p_of<T: Scalar>(dist: &TruncationDistribution, q: usize) -> Result<T> {
    let p = dist.prob(q);
    if p <= 0.0 {
        return Err(Error::InvalidArgument(format!(
            "truncation level {q} outside support {}..={}",
            dist.i_min(),
            dist.i_max()
        )));
    }
    Ok(T::of(p))
}

/// TSS combination of a recorded CG trace for a fixed truncation level `q`:
/// `x_{i_min−1} + Δ_q / P(q)`. Increments past convergence are zero.
pub fn tss_solve_from_trace<T: Scalar>(
    trace: &CgTrace<T>,
    dist: &TruncationDistribution,
    q: usize,
) -> Result<Vec<T>> {
    let p: T = p_of(dist, q)?;
    let mut x = trace.iterate(dist.i_min() - 1);
    if q <= trace.m() {
        axpy(T::one() / p, &trace.increments[q - 1], &mut x);
    } else if !trace.converged {
        return Err(Error::MissingIterations {
            requested: q,
            available: trace.m(),
        });
    }
    Ok(x)
}

/// TSS-Solve with a given truncation level (runs `q` (P)CG iterations).
pub fn tss_solve_with_q<T: Scalar, O: LinearOperator<T> + ?Sized>(
    op: &O,
    y: &[T],
    dist: &TruncationDistribution,
    q: usize,
    precond: Option<&dyn Preconditioner<T>>,
) -> Result<TssSolveResult<T>> {
    check_support_fits(dist, op.dim())?;
    let trace = cg_run(op, y, q, precond, T::zero())?;
    let estimate = tss_solve_from_trace(&trace, dist, q)?;
    Ok(TssSolveResult {
        estimate,
        sampled_q: q,
        iterations_run: trace.m(),
        target_iteration: dist.i_max(),
        converged: trace.m() < q,
    })
}

/// TSS-Solve: draws `Q ~ dist` and returns `x_{i_min−1} + (x_Q − x_{Q−1})/P(Q)`.
pub fn tss_solve<T: Scalar, O: LinearOperator<T> + ?Sized>(
    op: &O,
    y: &[T],
    dist: &TruncationDistribution,
    precond: Option<&dyn Preconditioner<T>>,
    rng: &mut Rng,
) -> Result<TssSolveResult<T>> {
    let q = dist.sample(rng);
    tss_solve_with_q(op, y, dist, q, precond)
}

fn check_support_fits(dist: &TruncationDistribution, n: usize) -> Result<()> {
    if dist.i_max() > n {
        return Err(Error::InvalidSupport {
            i_min: dist.i_min(),
            i_max: dist.i_max(),
        });
    }
    Ok(())
}

/// Single-sample estimator `Δ_Q / P(Q)`; requires `i_min = 1`.
pub fn ss_solve<T: Scalar, O: LinearOperator<T> + ?Sized>(
    op: &O,
    y: &[T],
    dist: &TruncationDistribution,
    precond: Option<&dyn Preconditioner<T>>,
    rng: &mut Rng,
) -> Result<TssSolveResult<T>> {
    if dist.i_min() != 1 {
        return Err(Error::InvalidArgument("single-sample estimator needs i_min = 1".into()));
    }
    tss_solve(op, y, dist, precond, rng)
}

/// Russian-roulette combination `Σ_{i≤q} Δ_i / P(Q ≥ i)` of a recorded trace.
pub fn rr_solve_from_trace<T: Scalar>(
    trace: &CgTrace<T>,
    dist: &TruncationDistribution,
    q: usize,
) -> Result<Vec<T>> {
    p_of::<T>(dist, q)?;
    if q > trace.m() && !trace.converged {
        return Err(Error::MissingIterations {
            requested: q,
            available: trace.m(),
        });
    }
    let mut x = trace.x0.clone();
    for (i, d) in trace.increments.iter().enumerate().take(q) {
        let s = T::of(dist.survival(i + 1));
        axpy(T::one() / s, d, &mut x);
    }
    Ok(x)
}

/// Russian-roulette estimator `Σ_{i≤Q} Δ_i / P(Q ≥ i)`.
pub fn rr_solve<T: Scalar, O: LinearOperator<T> + ?Sized>(
    op: &O,
    y: &[T],
    dist: &TruncationDistribution,
    precond: Option<&dyn Preconditioner<T>>,
    rng: &mut Rng,
) -> Result<TssSolveResult<T>> {
    check_support_fits(dist, op.dim())?;
    let q = dist.sample(rng);
    let trace = cg_run(op, y, q, precond, T::zero())?;
    let estimate = rr_solve_from_trace(&trace, dist, q)?;
    Ok(TssSolveResult {
        estimate,
        sampled_q: q,
        iterations_run: trace.m(),
        target_iteration: dist.i_max(),
        converged: trace.m() < q,
    })
}

/// Exact mean and variance (`E‖x̃ − E x̃‖²`) of the TSS estimator built on
/// `deltas[j−1] = Δ_j`, `j = 1..=i_max`.
pub fn tss_exact_moments<T: Scalar>(deltas: &[Vec<T>], dist: &TruncationDistribution) -> Result<(Vec<T>, T)> {
    if deltas.len() < dist.i_max() {
        return Err(Error::MissingIterations {
            requested: dist.i_max(),
            available: deltas.len(),
        });
    }
    let n = deltas.first().map_or(0, Vec::len);
    let mut mean = vec![T::zero(); n];
    for d in &deltas[..dist.i_max()] {
        axpy(T::one(), d, &mut mean);
    }
    let mut star = vec![T::zero(); n];
    let mut weighted = T::zero();
    for j in dist.support() {
        let d = &deltas[j - 1];
        axpy(T::one(), d, &mut star);
        weighted += dot(d, d) / p_of::<T>(dist, j)?;
    }
    Ok((mean, weighted - dot(&star, &star)))
}

/// Scalar version of [`tss_exact_moments`].
pub fn tss_exact_moments_scalar<T: Scalar>(deltas: &[T], dist: &TruncationDistribution) -> Result<(T, T)> {
    let vecs: Vec<Vec<T>> = deltas.iter().map(|d| vec![*d]).collect();
    let (mean, var) = tss_exact_moments(&vecs, dist)?;
    Ok((mean[0], var))
}

/// `s_0, …, s_m` from scalar partial values: TSS estimate
/// `s_{i_min−1} + (s_q − s_{q−1})/P(q)`; values past the recorded length
/// repeat the last one.
pub fn tss_scalar_from_values<T: Scalar>(values: &[T], dist: &TruncationDistribution, q: usize) -> Result<T> {
    let p: T = p_of(dist, q)?;
    let last = values.len() - 1;
    let s = |j: usize| values[j.min(last)];
    Ok(s(dist.i_min() - 1) + (s(q) - s(q - 1)) / p)
}

/// Exact mean and variance of a scalar TSS estimate by enumerating `Q`.
pub fn enumerate_scalar_moments<T: Scalar>(values: &[T], dist: &TruncationDistribution) -> Result<(T, T)> {
    let mut outcomes = Vec::with_capacity(dist.len());
    for q in dist.support() {
        outcomes.push((dist.prob(q), tss_scalar_from_values(values, dist, q)?));
    }
    let mean: T = outcomes.iter().map(|(p, v)| T::of(*p) * *v).sum();
    let var: T = outcomes
        .iter()
        .map(|(p, v)| T::of(*p) * (*v - mean) * (*v - mean))
        .sum();
    Ok((mean, var))
}

/// Exact mean and variance (trace of covariance) of a vector-valued
/// estimator given `(probability, outcome)` pairs.
pub fn enumerate_vector_moments<T: Scalar>(outcomes: &[(f64, Vec<T>)]) -> (Vec<T>, T) {
    let n = outcomes.first().map_or(0, |o| o.1.len());
    let mut mean = vec![T::zero(); n];
    for (p, v) in outcomes {
        axpy(T::of(*p), v, &mut mean);
    }
    let mut var = T::zero();
    for (p, v) in outcomes {
        let d2: T = v.iter().zip(&mean).map(|(a, b)| (*a - *b) * (*a - *b)).sum();
        var += T::of(*p) * d2;
    }
    (mean, var)
}

/// `e₁ᵀ f(T_j) e₁` for `j = 0..=upto` (with value 0 at `j = 0`). Sections
/// beyond a breakdown reuse the last exact value.
pub fn lanczos_quadrature_values<T: Scalar>(
    trace: &LanczosTrace<T>,
    upto: usize,
    f: impl Fn(T) -> T,
) -> Result<Vec<T>> {
    let mut out = Vec::with_capacity(upto + 1);
    out.push(T::zero());
    for j in 1..=upto.min(trace.m()) {
        let spec = trace.tridiagonal(j).spectrum()?;
        if let Some(bad) = spec.values.iter().find(|v| !(**v > T::zero())) {
            return Err(Error::NonPositiveRitz {
                step: j,
                value: bad.to_f64_lossy(),
            });
        }
        let s: T = spec
            .values
            .iter()
            .zip(&spec.first_components)
            .map(|(t, w)| *w * *w * f(*t))
            .sum();
        out.push(s);
    }
    while out.len() <= upto {
        let last = *out.last().expect("non-empty");
        out.push(last);
    }
    Ok(out)
}

/// `s_j = e₁ᵀ log(T_j) e₁` for `j = 0..=upto`.
pub fn logqf_values<T: Scalar>(trace: &LanczosTrace<T>, upto: usize) -> Result<Vec<T>> {
    lanczos_quadrature_values(trace, upto, |t| t.ln())
}

/// `‖y‖² e₁ᵀ T_j⁻¹ e₁` for `j = 0..=upto`: the Lanczos form of the CG
/// quadratic-form iterates `yᵀx_j`.
pub fn lanczos_quad_form_values<T: Scalar>(trace: &LanczosTrace<T>, y_norm_sq: T, upto: usize) -> Result<Vec<T>> {
    let mut out = Vec::with_capacity(upto + 1);
    out.push(T::zero());
    for j in 1..=upto.min(trace.m()) {
        let mut e1 = vec![T::zero(); j];
        e1[0] = T::one();
        let u = trace.tridiagonal(j).solve(&e1)?;
        out.push(y_norm_sq * u[0]);
    }
    while out.len() <= upto {
        let last = *out.last().expect("non-empty");
        out.push(last);
    }
    Ok(out)
}

fn unit_probe<T: Scalar>(z: &[T]) -> Result<(Vec<T>, T)> {
    let zn2 = dot(z, z);
    if !(zn2 > T::zero()) {
        return Err(Error::InvalidArgument("probe vector must be nonzero".into()));
    }
    let zn = zn2.sqrt();
    Ok((z.iter().map(|v| *v / zn).collect(), zn2))
}

/// TSS-LogQF with a given truncation level: `q` Lanczos steps from
/// `z/‖z‖` (on `M^{-1/2}AM^{-1/2}` when preconditioned).
pub fn tss_logqf_with_q<T: Scalar, O: LinearOperator<T> + ?Sized>(
    op: &O,
    z: &[T],
    dist: &TruncationDistribution,
    q: usize,
    policy: ReorthPolicy,
    precond: Option<&dyn Preconditioner<T>>,
) -> Result<TssScalarResult<T>> {
    check_support_fits(dist, op.dim())?;
    p_of::<T>(dist, q)?;
    let (q1, zn2) = unit_probe(z)?;
    let trace = lanczos_run(op, &q1, q, policy, precond)?;
    let s = logqf_values(&trace, q)?;
    Ok(TssScalarResult {
        estimate: tss_scalar_from_values(&s, dist, q)?,
        sampled_q: q,
        probe_norm_sq: zn2,
        breakdown: trace.breakdown,
    })
}

/// TSS-LogQF: `s_{i_min−1} + (s_Q − s_{Q−1})/P(Q)` with `s_j = e₁ᵀlog(T_j)e₁`;
/// targets `zᵀlog(A)z / ‖z‖²`.
pub fn tss_logqf<T: Scalar, O: LinearOperator<T> + ?Sized>(
    op: &O,
    z: &[T],
    dist: &TruncationDistribution,
    policy: ReorthPolicy,
    precond: Option<&dyn Preconditioner<T>>,
    rng: &mut Rng,
) -> Result<TssScalarResult<T>> {
    let q = dist.sample(rng);
    tss_logqf_with_q(op, z, dist, q, policy, precond)
}

/// How each Krylov quantity is truncated.
#[derive(Debug, Clone, PartialEq)]
pub enum SolverMode {
    /// Deterministic truncation after `m` iterations.
    Truncated(usize),
    /// Randomised truncation.
    Tss(TruncationDistribution),
}

impl SolverMode {
    /// Expected number of iterations.
    pub fn expected_cost(&self) -> f64 {
        match self {
            Self::Truncated(m) => *m as f64,
            Self::Tss(d) => d.expected_q(),
        }
    }
}

/// A solution estimate together with what it cost.
#[derive(Debug, Clone, PartialEq)]
pub struct SolveEstimate<T> {
    pub x: Vec<T>,
    /// Truncation level used (fixed `m` or sampled `Q`).
    pub level: usize,
    /// Operator applications performed.
    pub matvecs: usize,
}

/// Estimate of `A⁻¹y` with the chosen solver.
pub fn solve_estimate<T: Scalar, O: LinearOperator<T> + ?Sized>(
    op: &O,
    y: &[T],
    solver: &SolverMode,
    precond: Option<&dyn Preconditioner<T>>,
    rng: &mut Rng,
) -> Result<SolveEstimate<T>> {
    match solver {
        SolverMode::Truncated(m) => {
            let trace = cg_run(op, y, (*m).max(1), precond, T::zero())?;
            Ok(SolveEstimate {
                x: trace.solution(),
                level: *m,
                matvecs: trace.m(),
            })
        }
        SolverMode::Tss(dist) => {
            let r = tss_solve(op, y, dist, precond, rng)?;
            Ok(SolveEstimate {
                x: r.estimate,
                level: r.sampled_q,
                matvecs: r.iterations_run,
            })
        }
    }
}

/// `yᵀx̂` with `x̂` the chosen estimate of `A⁻¹y`.
pub fn quad_form_estimate<T: Scalar, O: LinearOperator<T> + ?Sized>(
    op: &O,
    y: &[T],
    solver: &SolverMode,
    precond: Option<&dyn Preconditioner<T>>,
    rng: &mut Rng,
) -> Result<T> {
    let s = solve_estimate(op, y, solver, precond, rng)?;
    Ok(dot(y, &s.x))
}

/// Quadratic form and the derivative terms `xᵀ(∂A/∂θ)x` from shared solves.
#[derive(Debug, Clone, PartialEq)]
pub struct QuadFormTerms<T> {
    /// `yᵀx̂`.
    pub value: T,
    /// `x̂ᵀ(∂A/∂θ_k)x̂′` per derivative operator.
    pub grads: Vec<T>,
    pub matvecs: usize,
    /// Truncation levels of the solves (one, or two for TSS).
    pub levels: Vec<usize>,
}

/// Value and gradient terms of the quadratic form. Truncated solves use the
/// same iterate on both sides; TSS uses two independent draws so that
/// `E[x̃ᵀBx̃′] = x_{i_max}ᵀ B x_{i_max}`, and the first draw also gives the value.
pub fn quad_form_terms<T: Scalar, O: LinearOperator<T> + ?Sized>(
    op: &O,
    d_ops: &[&dyn LinearOperator<T>],
    y: &[T],
    solver: &SolverMode,
    precond: Option<&dyn Preconditioner<T>>,
    rng: &mut Rng,
) -> Result<QuadFormTerms<T>> {
    let first = solve_estimate(op, y, solver, precond, rng)?;
    let value = dot(y, &first.x);
    let mut levels = vec![first.level];
    let mut matvecs = first.matvecs;
    let second = match solver {
        SolverMode::Truncated(_) => None,
        SolverMode::Tss(_) => {
            let s = solve_estimate(op, y, solver, precond, rng)?;
            levels.push(s.level);
            matvecs += s.matvecs;
            Some(s.x)
        }
    };
    let right = second.as_deref().unwrap_or(&first.x);
    let grads = d_ops
        .iter()
        .map(|d| {
            check_dims(op.dim(), d.dim())?;
            Ok(dot(&first.x, &d.apply(right)))
        })
        .collect::<Result<Vec<T>>>()?;
    Ok(QuadFormTerms {
        value,
        grads,
        matvecs,
        levels,
    })
}

fn check_dims(n: usize, m: usize) -> Result<()> {
    if n != m {
        return Err(Error::DimensionMismatch { expected: n, got: m });
    }
    Ok(())
}

/// `x̂ᵀ(∂A/∂θ)x̂′`, see [`quad_form_terms`].
pub fn quad_form_grad_estimate<T: Scalar, O: LinearOperator<T> + ?Sized, D: LinearOperator<T>>(
    op: &O,
    d_op: &D,
    y: &[T],
    solver: &SolverMode,
    precond: Option<&dyn Preconditioner<T>>,
    rng: &mut Rng,
) -> Result<T> {
    let t = quad_form_terms(op, &[d_op as &dyn LinearOperator<T>], y, solver, precond, rng)?;
    Ok(t.grads[0])
}

/// Hutchinson estimates of `tr(A⁻¹ ∂A/∂θ_k)` for several derivative
/// operators sharing the same probes and solves.
pub fn hutchinson_trace_derivatives<T: Scalar, O: LinearOperator<T> + ?Sized>(
    op: &O,
    d_ops: &[&dyn LinearOperator<T>],
    k_z: usize,
    solver: &SolverMode,
    precond: Option<&dyn Preconditioner<T>>,
    rng: &mut Rng,
) -> Result<Vec<T>> {
    Ok(hutchinson_with_cost(op, d_ops, k_z, solver, precond, rng)?.0)
}

/// [`hutchinson_trace_derivatives`] plus the operator applications spent.
pub fn hutchinson_with_cost<T: Scalar, O: LinearOperator<T> + ?Sized>(
    op: &O,
    d_ops: &[&dyn LinearOperator<T>],
    k_z: usize,
    solver: &SolverMode,
    precond: Option<&dyn Preconditioner<T>>,
    rng: &mut Rng,
) -> Result<(Vec<T>, usize)> {
    if k_z == 0 {
        return Err(Error::InvalidArgument("need at least one probe".into()));
    }
    for d in d_ops {
        check_dims(op.dim(), d.dim())?;
    }
    let n = op.dim();
    let mut acc = vec![T::zero(); d_ops.len()];
    let mut matvecs = 0;
    for _ in 0..k_z {
        let z: Vec<T> = standard_normal_vec(rng, n);
        let u = solve_estimate(op, &z, solver, precond, rng)?;
        matvecs += u.matvecs;
        for (a, d) in acc.iter_mut().zip(d_ops) {
            *a += dot(&u.x, &d.apply(&z));
        }
    }
    let k = T::of_usize(k_z);
    Ok((acc.into_iter().map(|a| a / k).collect(), matvecs))
}

/// `(1/k_z) Σ uⁱᵀ(∂A/∂θ)zⁱ` with `uⁱ` estimating `A⁻¹zⁱ`.
pub fn hutchinson_trace_derivative<T: Scalar, O: LinearOperator<T> + ?Sized, D: LinearOperator<T>>(
    op: &O,
    d_op: &D,
    k_z: usize,
    solver: &SolverMode,
    precond: Option<&dyn Preconditioner<T>>,
    rng: &mut Rng,
) -> Result<T> {
    Ok(hutchinson_trace_derivatives(op, &[d_op as &dyn LinearOperator<T>], k_z, solver, precond, rng)?[0])
}

/// A stochastic Lanczos quadrature estimate.
#[derive(Debug, Clone, PartialEq)]
pub struct SlqEstimate<T> {
    pub estimate: T,
    /// `log|M|` included in `estimate` (zero without a preconditioner).
    pub logdet_m: T,
    pub lanczos_steps: usize,
}

/// SLQ `log|A| ≈ log|M| + (1/k_z) Σ ‖zⁱ‖² ŝ(zⁱ)` with `ŝ` the fixed-`m` or
/// TSS value of `e₁ᵀlog(T)e₁` on `M^{-1/2}AM^{-1/2}` (or `A`).
pub fn slq_logdet<T: Scalar, O: LinearOperator<T> + ?Sized>(
    op: &O,
    k_z: usize,
    solver: &SolverMode,
    policy: ReorthPolicy,
    precond: Option<&dyn Preconditioner<T>>,
    rng: &mut Rng,
) -> Result<SlqEstimate<T>> {
    if k_z == 0 {
        return Err(Error::InvalidArgument("need at least one probe".into()));
    }
    let n = op.dim();
    let mut acc = T::zero();
    let mut steps = 0;
    for _ in 0..k_z {
        let z: Vec<T> = standard_normal_vec(rng, n);
        let (q1, zn2) = unit_probe(&z)?;
        let s = match solver {
            SolverMode::Truncated(m) => {
                let m = (*m).clamp(1, n);
                let trace = lanczos_run(op, &q1, m, policy, precond)?;
                steps += trace.m();
                logqf_values(&trace, m)?[m]
            }
            SolverMode::Tss(dist) => {
                let q = dist.sample(rng);
                let r = tss_logqf_with_q(op, &z, dist, q, policy, precond)?;
                steps += q;
                r.estimate
            }
        };
        acc += zn2 * s;
    }
    let logdet_m = precond.map_or(T::zero(), |p| p.logdet());
    Ok(SlqEstimate {
        estimate: logdet_m + acc / T::of_usize(k_z),
        logdet_m,
        lanczos_steps: steps,
    })
}

/// Which variance bound a [`VarianceBound`] holds.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum BoundKind {
    Solve,
    LogQF,
    SolveOptimal,
    LogQFOptimal,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct VarianceBound {
    pub bound: f64,
    pub kappa: f64,
    pub gamma: f64,
    pub kind: BoundKind,
}

/// `16 κ² ‖x‖² Γ` (Solve) or `16 (√(κ+1)+1)² log²(2κ) Γ` (LogQF). The LogQF
/// bound presumes the spectrum lies in `[1, κ]`.
pub fn variance_bound(flavor: Flavor, kappa: f64, x_norm_sq: f64, gamma: &GammaFactor) -> Result<VarianceBound> {
    if !(kappa >= 1.0) {
        return Err(Error::InvalidConditionNumber(kappa));
    }
    if gamma.flavor != flavor {
        return Err(Error::InvalidArgument("Γ factor flavor does not match the bound".into()));
    }
    let (bound, kind) = match flavor {
        Flavor::Solve => (16.0 * kappa * kappa * x_norm_sq * gamma.value, BoundKind::Solve),
        Flavor::LogQF => (logqf_prefactor(kappa) * gamma.value, BoundKind::LogQF),
    };
    Ok(VarianceBound {
        bound,
        kappa,
        gamma: gamma.value,
        kind,
    })
}

fn logqf_prefactor(kappa: f64) -> f64 {
    let s = (kappa + 1.0).sqrt() + 1.0;
    let l = (2.0 * kappa).ln();
    16.0 * s * s * l * l
}

/// Bounds under the Γ-optimal distribution, in their simplified closed forms:
/// `4κ²‖x‖² ϱ^{2(i_min−1)} (ϱ^L − 1)² (√κ + 1)²` and
/// `(√(κ+1)+1)⁶ log²(2κ) / (κ+1) · ϱ^{4(i_min−1)} (ϱ^{2L} − 1)²`.
pub fn variance_bound_optimal(
    flavor: Flavor,
    kappa: f64,
    x_norm_sq: f64,
    i_min: usize,
    i_max: usize,
) -> Result<VarianceBound> {
    let gamma = gamma_optimal_closed_form(flavor, kappa, i_min, i_max)?;
    let len = (i_max - i_min + 1) as i32;
    let (bound, kind) = match flavor {
        Flavor::Solve => {
            let r = crate::truncation::rho_solve(kappa)?;
            let s = kappa.sqrt() + 1.0;
            let b = 4.0 * kappa * kappa * x_norm_sq * r.powi(2 * (i_min as i32 - 1)) * (r.powi(len) - 1.0).powi(2) * s * s;
            (b, BoundKind::SolveOptimal)
        }
        Flavor::LogQF => {
            let r = crate::truncation::rho_logqf(kappa)?;
            let s = (kappa + 1.0).sqrt() + 1.0;
            let l = (2.0 * kappa).ln();
            let b = s.powi(6) * l * l / (kappa + 1.0)
                * r.powi(4 * (i_min as i32 - 1))
                * (r.powi(2 * len) - 1.0).powi(2);
            (b, BoundKind::LogQFOptimal)
        }
    };
    Ok(VarianceBound {
        bound,
        kappa,
        gamma,
        kind,
    })
}

/// Squared Euclidean norm, for the `‖x‖²` factor of the Solve bound.
pub fn norm_sq<T: Scalar>(x: &[T]) -> T {
    let n = norm2(x);
    n * n
}
