//! Lanczos reorthogonalisation window versus TSS variance, for the quadratic
//! form `yᵀK̂⁻¹y` and a single-probe log-determinant `log|M| + zᵀlog(K̃)z`.
//! Each (window, quantity) runs Lanczos once; replicates only redraw `Q`.

use ptss_core::estimators::{lanczos_quad_form_values, logqf_values, tss_scalar_from_values};
use ptss_core::kernels::gram_matrix;
use ptss_core::krylov::{lanczos_run, ReorthPolicy};
use ptss_core::linalg::{dot, SymmetricEigen};
use ptss_core::operators::{dense_cholesky_oracle, DenseOperator};
use ptss_core::precond::{LowRankShiftPreconditioner, Preconditioner};
use ptss_core::rng::standard_normal_vec;
use ptss_core::truncation::{Flavor, TruncationDistribution};

use super::{
    aux_rng, dense_preconditioned, distribution, distribution_label, kappa_hat, labels_at, level_iterations, load,
    longest_run, preconditioner, spec_at, tss_replicates, RowBase,
};
use crate::config::{ExperimentConfig, KappaSource, Truncation, Variant};
use crate::error::Result;
use crate::output::SweepRow;
use crate::stats::Summary;

/// Per-preconditioning quantities shared by all windows.
struct Setting {
    pre: Option<LowRankShiftPreconditioner<f64>>,
    kappa: f64,
    /// Lanczos start for the quadratic form and its squared norm.
    y_hat: (Vec<f64>, f64),
    logdet_m: f64,
    /// `log|M| + zᵀlog(K̃)z` from the dense eigendecomposition of `K̃`.
    exact_logdet: f64,
}

/// Lanczos values `v_0..=v_m` of one quantity, or why they are unavailable.
type Values = std::result::Result<Vec<f64>, String>;

pub(super) fn run(cfg: &ExperimentConfig) -> Result<Vec<SweepRow>> {
    let (data, dataset_labels) = load(cfg)?;
    let n = data.n();
    let steps = longest_run(cfg).min(n);
    let mut rows = Vec::new();
    for (p, &value) in cfg.sweep.values.iter().enumerate() {
        let spec = spec_at(cfg, value)?;
        let op = gram_matrix(&spec, &data)?;
        let y = labels_at(cfg, &data, dataset_labels.as_deref(), &spec, p)?;
        let z: Vec<f64> = standard_normal_vec(&mut aux_rng(cfg, p, 3), n);
        let z_norm_sq = dot(&z, &z);
        let exact_quad = dense_cholesky_oracle(op.matrix(), &y)?.quad_form;

        for precond in [false, true] {
            let variants: Vec<Variant> = cfg
                .estimator
                .variants
                .iter()
                .copied()
                .filter(|v| matches!(v, Variant::Krylov { precond: pc, .. } if *pc == precond))
                .collect();
            if variants.is_empty() {
                continue;
            }
            let s = setting(cfg, &op, &spec, &y, &z, precond, p)?;
            let pre_dyn = s.pre.as_ref().map(|m| m as &dyn Preconditioner<f64>);
            for &policy in &cfg.estimator.i_orth {
                let quad: Values = lanczos_run(&op, &unit(&s.y_hat.0, s.y_hat.1), steps, policy, pre_dyn)
                    .and_then(|t| lanczos_quad_form_values(&t, s.y_hat.1, steps))
                    .map_err(|e| e.to_string());
                let logdet: Values = lanczos_run(&op, &unit(&z, z_norm_sq), steps, policy, pre_dyn)
                    .and_then(|t| logqf_values(&t, steps))
                    .map(|v| v.iter().map(|s_j| s.logdet_m + z_norm_sq * s_j).collect())
                    .map_err(|e| e.to_string());
                for variant in &variants {
                    for (quantity, flavor, exact, values) in [
                        ("quad", Flavor::Solve, exact_quad, &quad),
                        ("logdet", Flavor::LogQF, s.exact_logdet, &logdet),
                    ] {
                        let base = RowBase {
                            cfg,
                            value,
                            quantity,
                            exact,
                            kappa: s.kappa,
                            label: variant.label_with(policy),
                        };
                        rows.push(row(&base, &s, *variant, flavor, values, policy, p)?);
                    }
                }
            }
        }
    }
    Ok(rows)
}

fn unit(v: &[f64], norm_sq: f64) -> Vec<f64> {
    let inv = 1.0 / norm_sq.sqrt();
    v.iter().map(|x| x * inv).collect()
}

fn setting(
    cfg: &ExperimentConfig,
    op: &DenseOperator<f64>,
    spec: &ptss_core::kernels::KernelSpec<f64>,
    y: &[f64],
    z: &[f64],
    precond: bool,
    p: usize,
) -> Result<Setting> {
    let pre = if precond { Some(preconditioner(cfg, op, spec)?) } else { None };
    let (dense, logdet_m, y_hat) = match &pre {
        Some(m) => {
            let y_hat = m.apply_minv_sqrt(y);
            (dense_preconditioned(op, m)?, m.logdet(), y_hat)
        }
        None => (op.clone(), 0.0, y.to_vec()),
    };
    let eig = SymmetricEigen::new(dense.matrix())?;
    let n = z.len();
    let mut quad_log = 0.0;
    for (k, lambda) in eig.values.iter().enumerate() {
        let proj: f64 = (0..n).map(|i| eig.vectors.row(i)[k] * z[i]).sum();
        quad_log += proj * proj * lambda.ln();
    }
    let kappa = match cfg.estimator.kappa_source {
        KappaSource::Dense => eig.max() / eig.min(),
        KappaSource::Pilot => kappa_hat(cfg, op, spec, pre.as_ref(), &mut aux_rng(cfg, p, 1 + precond as u64))?,
    };
    let y_norm_sq = dot(&y_hat, &y_hat);
    Ok(Setting {
        pre,
        kappa,
        y_hat: (y_hat, y_norm_sq),
        logdet_m,
        exact_logdet: logdet_m + quad_log,
    })
}

fn row(
    base: &RowBase<'_>,
    s: &Setting,
    variant: Variant,
    flavor: Flavor,
    values: &Values,
    policy: ReorthPolicy,
    p: usize,
) -> Result<SweepRow> {
    let cfg = base.cfg;
    let primary = distribution(cfg, cfg.estimator.distribution, flavor, s.kappa)?;
    let Variant::Krylov { truncation, .. } = variant else {
        unreachable!("only Krylov variants reach the reorthogonalisation driver");
    };
    let dist_label = match truncation {
        Truncation::Tss => distribution_label(cfg, cfg.estimator.distribution),
        Truncation::Fixed(_) => "none".to_string(),
    };
    let expected_cost = match truncation {
        Truncation::Tss => primary.expected_q(),
        Truncation::Fixed(level) => level_iterations(level, &primary) as f64,
    };
    let values = match values {
        Ok(v) => v,
        Err(reason) => return Ok(base.failed(dist_label, expected_cost, &format!("window {policy}: {reason}"))),
    };
    Ok(match truncation {
        Truncation::Tss => tss_row(base, s, values, &primary, dist_label, p)?,
        Truncation::Fixed(level) => {
            let m = level_iterations(level, &primary).min(values.len() - 1);
            base.row(
                dist_label,
                Summary::point(values[m] - base.exact),
                0.0,
                expected_cost,
                m as f64,
                lanczos_precond_applies(s, m as f64),
            )
        }
    })
}

fn tss_row(
    base: &RowBase<'_>,
    s: &Setting,
    values: &[f64],
    dist: &TruncationDistribution,
    dist_label: String,
    p: usize,
) -> Result<SweepRow> {
    let outcome: Vec<f64> = dist
        .support()
        .map(|q| Ok(tss_scalar_from_values(values, dist, q)? - base.exact))
        .collect::<Result<_>>()?;
    let (error, exact_std, mean_q) = tss_replicates(base.cfg, p, dist, &outcome);
    Ok(base.row(
        dist_label,
        error,
        exact_std,
        dist.expected_q(),
        mean_q,
        lanczos_precond_applies(s, mean_q),
    ))
}

/// Preconditioned Lanczos applies `M^{-1/2}` twice per step plus once to
/// form the start vector.
fn lanczos_precond_applies(s: &Setting, steps: f64) -> f64 {
    if s.pre.is_some() {
        2.0 * steps + 1.0
    } else {
        0.0
    }
}
