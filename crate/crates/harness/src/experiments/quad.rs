//! Inverse quadratic form `yᵀK̂⁻¹y` with fixed `y`: truncation bias
//! (`quad-sweep`) and distribution / preconditioner comparison
//! (`dist-compare`). The CG trace is computed once per point; replicates only
//! redraw `Q`.

use ptss_core::estimators::tss_solve_from_trace;
use ptss_core::kernels::{gram_matrix, KernelSpec};
use ptss_core::krylov::{cg_run, CgTrace};
use ptss_core::linalg::dot;
use ptss_core::operators::{dense_cholesky_oracle, DenseOperator};
use ptss_core::precond::{LowRankShiftPreconditioner, Preconditioner};
use ptss_core::truncation::{Flavor, TruncationDistribution};

use super::{
    aux_rng, distribution, distribution_label, kappa_hat, labels_at, level_iterations, load, longest_run,
    preconditioner, spec_at, tss_replicates, RowBase,
};
use crate::config::{DistKind, ExperimentConfig, Truncation, Variant};
use crate::error::Result;
use crate::output::SweepRow;
use crate::stats::Summary;

struct Setting {
    pre: Option<LowRankShiftPreconditioner<f64>>,
    kappa: f64,
    trace: std::result::Result<CgTrace<f64>, String>,
}

pub(super) fn run(cfg: &ExperimentConfig, dists: &[DistKind]) -> Result<Vec<SweepRow>> {
    let (data, dataset_labels) = load(cfg)?;
    let needs_kappa = dists.contains(&DistKind::GammaOptimal) || cfg.estimator.distribution == DistKind::GammaOptimal;
    let mut rows = Vec::new();
    for (p, &value) in cfg.sweep.values.iter().enumerate() {
        let spec = spec_at(cfg, value)?;
        let op = gram_matrix(&spec, &data)?;
        let y = labels_at(cfg, &data, dataset_labels.as_deref(), &spec, p)?;
        let exact = dense_cholesky_oracle(op.matrix(), &y)?.quad_form;
        let mut settings: [Option<Setting>; 2] = [None, None];
        for variant in &cfg.estimator.variants {
            let Variant::Krylov { precond, truncation } = *variant else {
                continue;
            };
            let slot = &mut settings[precond as usize];
            if slot.is_none() {
                *slot = Some(setting(cfg, &op, &spec, &y, precond, needs_kappa, p)?);
            }
            let s = slot.as_ref().expect("filled above");
            let base = RowBase {
                cfg,
                value,
                quantity: "quad",
                exact,
                kappa: s.kappa,
                label: variant.label_with(cfg.policy()),
            };
            match truncation {
                Truncation::Tss => {
                    for kind in dists {
                        let dist = distribution(cfg, *kind, Flavor::Solve, s.kappa)?;
                        rows.push(tss_row(&base, s, &y, &dist, distribution_label(cfg, *kind), p)?);
                    }
                }
                Truncation::Fixed(level) => {
                    let primary = distribution(cfg, cfg.estimator.distribution, Flavor::Solve, s.kappa)?;
                    let m = level_iterations(level, &primary);
                    rows.push(match &s.trace {
                        Ok(trace) => {
                            let err = dot(&y, &trace.iterate(m)) - exact;
                            let steps = m.min(trace.m()) as f64;
                            base.row(
                                "none".into(),
                                Summary::point(err),
                                0.0,
                                m as f64,
                                steps,
                                pcg_precond_applies(s, steps),
                            )
                        }
                        Err(reason) => base.failed("none".into(), m as f64, reason),
                    });
                }
            }
        }
    }
    Ok(rows)
}

fn setting(
    cfg: &ExperimentConfig,
    op: &DenseOperator<f64>,
    spec: &KernelSpec<f64>,
    y: &[f64],
    precond: bool,
    needs_kappa: bool,
    p: usize,
) -> Result<Setting> {
    let pre = if precond { Some(preconditioner(cfg, op, spec)?) } else { None };
    let kappa = if needs_kappa {
        kappa_hat(cfg, op, spec, pre.as_ref(), &mut aux_rng(cfg, p, 1 + precond as u64))?
    } else {
        f64::NAN
    };
    let trace = cg_run(op, y, longest_run(cfg), pre.as_ref().map(|p| p as &dyn Preconditioner<f64>), 0.0)
        .map_err(|e| e.to_string());
    Ok(Setting { pre, kappa, trace })
}

fn tss_row(
    base: &RowBase<'_>,
    s: &Setting,
    y: &[f64],
    dist: &TruncationDistribution,
    dist_label: String,
    p: usize,
) -> Result<SweepRow> {
    let trace = match &s.trace {
        Ok(t) => t,
        Err(reason) => return Ok(base.failed(dist_label, dist.expected_q(), reason)),
    };
    let outcome: Vec<f64> = dist
        .support()
        .map(|q| Ok(dot(y, &tss_solve_from_trace(trace, dist, q)?) - base.exact))
        .collect::<Result<_>>()?;
    let (error, exact_std, mean_q) = tss_replicates(base.cfg, p, dist, &outcome);
    Ok(base.row(
        dist_label,
        error,
        exact_std,
        dist.expected_q(),
        mean_q,
        pcg_precond_applies(s, mean_q),
    ))
}

/// PCG applies `M⁻¹` once up front and once per iteration.
fn pcg_precond_applies(s: &Setting, iterations: f64) -> f64 {
    if s.pre.is_some() {
        iterations + 1.0
    } else {
        0.0
    }
}
