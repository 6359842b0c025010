//! Stochastic NLML and gradient errors across a hyperparameter grid, per
//! variant, normalised by `n`. Every replicate draws fresh probes and a fresh
//! `Q`; replicate `r` uses the same generator for every variant.

use ptss_core::estimators::SolverMode;
use ptss_core::gp::{nlml_and_grad_exact, nlml_estimate_full, EstimatorConfig, GpModel, PrecondSettings};
use ptss_core::kernels::{gram_matrix, Hyper, KernelSpec};
use ptss_core::truncation::Flavor;

use super::{
    aux_rng, distribution, distribution_label, kappa_hat, labels_at, level_iterations, load, preconditioner,
    replicate_rng, replicates, spec_at, RowBase,
};
use crate::config::{DistKind, ExperimentConfig, Truncation, Variant};
use crate::error::Result;
use crate::output::SweepRow;
use crate::stats::Summary;

const QUANTITIES: [&str; 4] = ["nlml_per_n", "grad_f_per_n", "grad_l_per_n", "grad_mu_per_n"];

pub(super) fn run(cfg: &ExperimentConfig) -> Result<Vec<SweepRow>> {
    let (data, dataset_labels) = load(cfg)?;
    let n = data.n() as f64;
    let policy = cfg.policy();
    let mut rows = Vec::new();
    for (p, &value) in cfg.sweep.values.iter().enumerate() {
        let spec = spec_at(cfg, value)?;
        let y = labels_at(cfg, &data, dataset_labels.as_deref(), &spec, p)?;
        let model = GpModel::new(data.clone(), y, spec)?;
        let (nlml, grad) = nlml_and_grad_exact(&model, &Hyper::ALL)?;
        let exact = [
            nlml.value / n,
            grad.get(Hyper::F) / n,
            grad.get(Hyper::L) / n,
            grad.get(Hyper::Mu) / n,
        ];
        let mut kappas = [None, None];
        for variant in &cfg.estimator.variants {
            let Variant::Krylov { precond, truncation } = *variant else {
                continue;
            };
            let kappa = if cfg.estimator.distribution == DistKind::GammaOptimal {
                match kappas[precond as usize] {
                    Some(k) => k,
                    None => {
                        let k = condition_estimate(cfg, &model, &spec, precond, p)?;
                        kappas[precond as usize] = Some(k);
                        k
                    }
                }
            } else {
                f64::NAN
            };
            let solve_dist = distribution(cfg, cfg.estimator.distribution, Flavor::Solve, kappa)?;
            let logdet_dist = distribution(cfg, cfg.estimator.distribution, Flavor::LogQF, kappa)?;
            let (solver, logdet_solver, dist_label) = match truncation {
                Truncation::Tss => (
                    SolverMode::Tss(solve_dist),
                    SolverMode::Tss(logdet_dist),
                    distribution_label(cfg, cfg.estimator.distribution),
                ),
                Truncation::Fixed(level) => (
                    SolverMode::Truncated(level_iterations(level, &solve_dist)),
                    SolverMode::Truncated(level_iterations(level, &logdet_dist)),
                    "none".to_string(),
                ),
            };
            let expected_cost = solver.expected_cost();
            let est = EstimatorConfig {
                solver,
                logdet_solver,
                k_z: cfg.estimator.k_z,
                policy,
                precond: precond.then_some(PrecondSettings {
                    rank: cfg.estimator.precond_rank,
                    eta: cfg.estimator.precond_eta,
                }),
            };
            let outcomes = replicates(cfg.replicates, |r| {
                nlml_estimate_full(&model, &est, true, &Hyper::ALL, &mut replicate_rng(cfg, p, r))
            });
            let mut errors: [Vec<f64>; 4] = Default::default();
            let mut costs = Vec::new();
            let mut failure_reason = String::new();
            for o in &outcomes {
                match o {
                    Ok(e) => {
                        let v = e.value.expect("value requested");
                        let got = [
                            v / n,
                            e.grad.get(Hyper::F) / n,
                            e.grad.get(Hyper::L) / n,
                            e.grad.get(Hyper::Mu) / n,
                        ];
                        for k in 0..4 {
                            errors[k].push(got[k] - exact[k]);
                        }
                        costs.push(e.matvecs as f64);
                    }
                    Err(err) if failure_reason.is_empty() => failure_reason = err.to_string(),
                    Err(_) => {}
                }
            }
            let failures = outcomes.len() - costs.len();
            let mean_cost = Summary::from_values(&costs).mean;
            for (k, quantity) in QUANTITIES.iter().enumerate() {
                let base = RowBase {
                    cfg,
                    value,
                    quantity,
                    exact: exact[k],
                    kappa,
                    label: variant.label_with(policy),
                };
                // Preconditioner applications are not tracked through the
                // NLML pipeline.
                let precond_applies = if precond { f64::NAN } else { 0.0 };
                let mut row = base.row(
                    dist_label.clone(),
                    Summary::from_values(&errors[k]),
                    f64::NAN,
                    expected_cost,
                    mean_cost,
                    precond_applies,
                );
                row.failures = failures;
                row.failure_reason = failure_reason.clone();
                rows.push(row);
            }
        }
    }
    Ok(rows)
}

fn condition_estimate(
    cfg: &ExperimentConfig,
    model: &GpModel<f64>,
    spec: &KernelSpec<f64>,
    precond: bool,
    p: usize,
) -> Result<f64> {
    let op = gram_matrix(spec, &model.data)?;
    let pre = if precond { Some(preconditioner(cfg, &op, spec)?) } else { None };
    kappa_hat(cfg, &op, spec, pre.as_ref(), &mut aux_rng(cfg, p, 1 + precond as u64))
}
