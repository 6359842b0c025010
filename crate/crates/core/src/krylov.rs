//! CG/PCG and Lanczos iterations, the CG-to-Lanczos tridiagonal
//! reconstruction, and Ritz-value condition number estimates.

use std::collections::VecDeque;
use std::fmt;
use std::str::FromStr;

use crate::error::{Error, Result};
use crate::linalg::{axpy, dot, norm2, SymTridiagonal};
use crate::operators::LinearOperator;
use crate::precond::Preconditioner;
use crate::rng::{standard_normal_vec, Rng};
use crate::scalar::Scalar;

/// Record of a (P)CG run.
#[derive(Debug, Clone)]
pub struct CgTrace<T> {
    pub x0: Vec<T>,
    /// `Δ_j = x_j − x_{j−1}` for `j = 1..=m`.
    pub increments: Vec<Vec<T>>,
    /// `α_{j−1}` used to form `Δ_j`.
    pub alphas: Vec<T>,
    /// `β_{j−1}` computed after iteration `j`.
    pub betas: Vec<T>,
    /// `‖r_j‖₂` after iteration `j`.
    pub residual_norms: Vec<T>,
    pub initial_residual_norm: T,
    /// True when the run stopped before the iteration budget.
    pub converged: bool,
}

impl<T: Scalar> CgTrace<T> {
    pub fn m(&self) -> usize {
        self.increments.len()
    }

    pub fn dim(&self) -> usize {
        self.x0.len()
    }

    /// `x_j = x_0 + Σ_{i≤j} Δ_i`; `j` is clamped to the recorded count, which
    /// is exact after convergence since later increments vanish.
    pub fn iterate(&self, j: usize) -> Vec<T> {
        let mut x = self.x0.clone();
        for d in self.increments.iter().take(j) {
            axpy(T::one(), d, &mut x);
        }
        x
    }

    /// `Δ_j`, or the zero vector beyond convergence.
    pub fn increment(&self, j: usize) -> Vec<T> {
        assert!(j >= 1, "increments are indexed from 1");
        self.increments
            .get(j - 1)
            .cloned()
            .unwrap_or_else(|| vec![T::zero(); self.dim()])
    }

    pub fn solution(&self) -> Vec<T> {
        self.iterate(self.m())
    }
}

/// CG from `x₀ = 0`.
pub fn cg_run<T: Scalar, O: LinearOperator<T> + ?Sized>(
    op: &O,
    y: &[T],
    m: usize,
    precond: Option<&dyn Preconditioner<T>>,
    rtol: T,
) -> Result<CgTrace<T>> {
    cg_run_from(op, y, None, m, precond, rtol)
}

/// (P)CG on `A x = y` for at most `m` iterations. Stops early when
/// `‖r‖ ≤ rtol·‖y‖` (skipped for `rtol = 0`) or on exact breakdown
/// `rᵀM⁻¹r = 0`.
pub fn cg_run_from<T: Scalar, O: LinearOperator<T> + ?Sized>(
    op: &O,
    y: &[T],
    x0: Option<&[T]>,
    m: usize,
    precond: Option<&dyn Preconditioner<T>>,
    rtol: T,
) -> Result<CgTrace<T>> {
    let n = op.dim();
    if y.len() != n {
        return Err(Error::DimensionMismatch { expected: n, got: y.len() });
    }
    if let Some(p) = precond {
        if p.dim() != n {
            return Err(Error::DimensionMismatch { expected: n, got: p.dim() });
        }
    }
    if m == 0 {
        return Err(Error::InvalidArgument("CG needs at least one iteration".into()));
    }
    let x0 = match x0 {
        Some(x) if x.len() != n => return Err(Error::DimensionMismatch { expected: n, got: x.len() }),
        Some(x) => x.to_vec(),
        None => vec![T::zero(); n],
    };
    let mut r = y.to_vec();
    if x0.iter().any(|v| *v != T::zero()) {
        let ax = op.apply(&x0);
        axpy(-T::one(), &ax, &mut r);
    }
    let precondition = |r: &[T], z: &mut Vec<T>| match precond {
        Some(p) => p.apply_minv_into(r, z),
        None => z.copy_from_slice(r),
    };
    let mut z = vec![T::zero(); n];
    precondition(&r, &mut z);
    let mut p = z.clone();
    let mut rz = dot(&r, &z);
    let r0 = norm2(&r);
    let ynorm = norm2(y);
    let mut ap = vec![T::zero(); n];

    let mut trace = CgTrace {
        x0,
        increments: Vec::with_capacity(m),
        alphas: Vec::with_capacity(m),
        betas: Vec::with_capacity(m),
        residual_norms: Vec::with_capacity(m),
        initial_residual_norm: r0,
        converged: false,
    };
    let rz0 = rz;
    for k in 0..m {
        if rz == T::zero() || !rz.is_finite() {
            trace.converged = true;
            break;
        }
        op.apply_into(&p, &mut ap);
        let pap = dot(&p, &ap);
        let alpha = rz / pap;
        if !(alpha > T::zero()) || !alpha.is_finite() {
            // round-off level residual: treat as converged rather than indefinite
            if rz.abs() <= T::epsilon() * T::epsilon() * rz0.abs() {
                trace.converged = true;
                break;
            }
            return Err(Error::Indefinite {
                iteration: k + 1,
                alpha: alpha.to_f64_lossy(),
            });
        }
        let delta: Vec<T> = p.iter().map(|v| alpha * *v).collect();
        axpy(-alpha, &ap, &mut r);
        let rn = norm2(&r);
        trace.increments.push(delta);
        trace.alphas.push(alpha);
        trace.residual_norms.push(rn);
        if rtol > T::zero() && rn <= rtol * ynorm {
            trace.converged = true;
            break;
        }
        precondition(&r, &mut z);
        let rz_new = dot(&r, &z);
        let beta = rz_new / rz;
        trace.betas.push(beta);
        for (pi, zi) in p.iter_mut().zip(&z) {
            *pi = *zi + beta * *pi;
        }
        rz = rz_new;
    }
    Ok(trace)
}

/// Leading `j × j` Lanczos matrix reconstructed from CG scalars: diagonal
/// `1/α₀`, then `1/α_k + β_{k−1}/α_{k−1}`; off-diagonal `√β_k/α_k`.
pub fn cg_to_tridiagonal<T: Scalar>(trace: &CgTrace<T>, j: usize) -> Result<SymTridiagonal<T>> {
    if j == 0 || j > trace.m() {
        return Err(Error::MissingIterations {
            requested: j,
            available: trace.m(),
        });
    }
    if trace.betas.len() + 1 < j {
        return Err(Error::MissingIterations {
            requested: j,
            available: trace.betas.len() + 1,
        });
    }
    let a = &trace.alphas;
    let b = &trace.betas;
    let mut diag = Vec::with_capacity(j);
    let mut off = Vec::with_capacity(j.saturating_sub(1));
    diag.push(T::one() / a[0]);
    for k in 1..j {
        diag.push(T::one() / a[k] + b[k - 1] / a[k - 1]);
        off.push(b[k - 1].sqrt() / a[k - 1]);
    }
    SymTridiagonal::new(diag, off)
}

/// Reorthogonalisation window for Lanczos.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum ReorthPolicy {
    /// `i_orth`: the new vector is re-orthogonalised against the
    /// `min(i_orth − 1, k − 1)` most recent earlier basis vectors;
    /// `Window(1)` is the plain three-term recurrence.
    Window(usize),
    /// Against the whole basis.
    Full,
}

impl ReorthPolicy {
    pub fn window(i_orth: usize) -> Result<Self> {
        if i_orth == 0 {
            return Err(Error::InvalidArgument("i_orth must be at least 1".into()));
        }
        Ok(Self::Window(i_orth))
    }

    pub fn none() -> Self {
        Self::Window(1)
    }
}

impl fmt::Display for ReorthPolicy {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Self::Window(k) => write!(f, "{k}"),
            Self::Full => f.write_str("full"),
        }
    }
}

impl FromStr for ReorthPolicy {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        if s.eq_ignore_ascii_case("full") {
            return Ok(Self::Full);
        }
        let k: usize = s
            .parse()
            .map_err(|_| Error::InvalidArgument(format!("bad reorthogonalisation window `{s}`")))?;
        Self::window(k)
    }
}

/// Record of a Lanczos run.
#[derive(Debug, Clone)]
pub struct LanczosTrace<T> {
    pub diag: Vec<T>,
    /// Nonnegative couplings `β_k`, one fewer than `diag`.
    pub offdiag: Vec<T>,
    /// Stored basis vectors: every vector under `Full`, else the most recent
    /// `i_orth` ones (oldest first).
    pub basis: Vec<Vec<T>>,
    pub policy: ReorthPolicy,
    /// True when the run ended early on a vanishing coupling.
    pub breakdown: bool,
}

impl<T: Scalar> LanczosTrace<T> {
    pub fn m(&self) -> usize {
        self.diag.len()
    }

    /// Leading `j × j` section `T_j`, clamped to the recorded size.
    pub fn tridiagonal(&self, j: usize) -> SymTridiagonal<T> {
        let j = j.min(self.m());
        SymTridiagonal {
            diag: self.diag[..j].to_vec(),
            offdiag: self.offdiag[..j.saturating_sub(1)].to_vec(),
        }
    }
}

/// `m` Lanczos steps from unit `q1`. With a preconditioner the iteration runs
/// on `M^{-1/2} A M^{-1/2}`.
pub fn lanczos_run<T: Scalar, O: LinearOperator<T> + ?Sized>(
    op: &O,
    q1: &[T],
    m: usize,
    policy: ReorthPolicy,
    precond: Option<&dyn Preconditioner<T>>,
) -> Result<LanczosTrace<T>> {
    let n = op.dim();
    if q1.len() != n {
        return Err(Error::DimensionMismatch { expected: n, got: q1.len() });
    }
    if let Some(p) = precond {
        if p.dim() != n {
            return Err(Error::DimensionMismatch { expected: n, got: p.dim() });
        }
    }
    if m == 0 || m > n {
        return Err(Error::InvalidArgument(format!("Lanczos steps must be in 1..={n}, got {m}")));
    }
    let qn = norm2(q1);
    let unit_tol = if T::epsilon() < T::of(1e-10) { T::of(1e-12) } else { T::of(1e-5) };
    if (qn - T::one()).abs() > unit_tol {
        return Err(Error::InvalidArgument(format!("starting vector must be unit, norm {qn}")));
    }
    if policy == ReorthPolicy::Window(0) {
        return Err(Error::InvalidArgument("i_orth must be at least 1".into()));
    }

    let mut tmp = vec![T::zero(); n];
    let mut tmp2 = vec![T::zero(); n];
    let mut apply = |v: &[T], out: &mut [T]| match precond {
        Some(p) => {
            p.apply_minv_sqrt_into(v, &mut tmp);
            op.apply_into(&tmp, &mut tmp2);
            p.apply_minv_sqrt_into(&tmp2, out);
        }
        None => op.apply_into(v, out),
    };

    let keep = match policy {
        ReorthPolicy::Full => usize::MAX,
        ReorthPolicy::Window(k) => k.max(1),
    };
    let mut basis: VecDeque<Vec<T>> = VecDeque::new();
    basis.push_back(q1.to_vec());
    let mut diag = Vec::with_capacity(m);
    let mut offdiag = Vec::with_capacity(m);
    let mut frob2 = T::zero();
    let mut w = vec![T::zero(); n];
    let mut beta_prev = T::zero();
    let mut breakdown = false;
    for k in 1..=m {
        let last = basis.len() - 1;
        apply(&basis[last], &mut w);
        if k > 1 {
            axpy(-beta_prev, &basis[last - 1], &mut w);
        }
        let alpha = dot(&basis[last], &w);
        axpy(-alpha, &basis[last], &mut w);
        diag.push(alpha);
        frob2 += alpha * alpha;
        if k == m {
            break;
        }
        match policy {
            ReorthPolicy::Full => {
                for q in basis.iter() {
                    let h = dot(q, &w);
                    axpy(-h, q, &mut w);
                }
            }
            ReorthPolicy::Window(i_orth) => {
                let count = (i_orth - 1).min(k - 1).min(last);
                for q in basis.iter().rev().skip(1).take(count) {
                    let h = dot(q, &w);
                    axpy(-h, q, &mut w);
                }
            }
        }
        let beta = norm2(&w);
        if !(beta > T::of(1e-14) * frob2.sqrt()) {
            breakdown = true;
            break;
        }
        offdiag.push(beta);
        frob2 += T::of(2.0) * beta * beta;
        let next: Vec<T> = w.iter().map(|v| *v / beta).collect();
        basis.push_back(next);
        if basis.len() > keep.max(2) {
            basis.pop_front();
        }
        beta_prev = beta;
    }
    let mut basis: Vec<Vec<T>> = basis.into();
    if let ReorthPolicy::Window(k) = policy {
        while basis.len() > k {
            basis.remove(0);
        }
    }
    Ok(LanczosTrace {
        diag,
        offdiag,
        basis,
        policy,
        breakdown,
    })
}

/// Pilot-Lanczos estimate `κ̂ = 1.05 θ_max / max(0.5 θ_min, floor)`, never
/// below 1.
pub fn estimate_condition_number<T: Scalar, O: LinearOperator<T> + ?Sized>(
    op: &O,
    precond: Option<&dyn Preconditioner<T>>,
    pilot_steps: usize,
    lambda_min_floor: Option<T>,
    rng: &mut Rng,
) -> Result<T> {
    if pilot_steps < 2 {
        return Err(Error::InvalidArgument("pilot needs at least two steps".into()));
    }
    let n = op.dim();
    let mut z: Vec<T> = standard_normal_vec(rng, n);
    let zn = norm2(&z);
    for v in z.iter_mut() {
        *v /= zn;
    }
    let trace = lanczos_run(op, &z, pilot_steps.min(n), ReorthPolicy::Full, precond)?;
    let ritz = trace.tridiagonal(trace.m()).eigenvalues()?;
    let (lo, hi) = (ritz[0], ritz[ritz.len() - 1]);
    if !(lo > T::zero()) {
        return Err(Error::NonPositiveRitz {
            step: trace.m(),
            value: lo.to_f64_lossy(),
        });
    }
    let lmax = hi * T::of(1.05);
    let mut lmin = lo * T::of(0.5);
    if let Some(f) = lambda_min_floor {
        lmin = lmin.max(f);
    }
    Ok((lmax / lmin).max(T::one()))
}
