//! Hyperparameter training with exact and stochastic gradients. Replicate
//! `r` has its own dataset and labels; within a replicate every variant
//! starts from the same point and consumes the same optimiser stream.

use ptss_core::estimators::SolverMode;
use ptss_core::gp::{nlml_exact, EstimatorConfig, GpModel, PrecondSettings};
use ptss_core::kernels::{gram_matrix, KernelSpec};
use ptss_core::optim::{train, GradientSource, OptimizerKind, TrainConfig, UnconstrainedParams};
use ptss_core::rng::{substream, substream_seed, uniform01, Rng};
use ptss_core::truncation::Flavor;
use rayon::prelude::*;

use super::{distribution, kappa_hat, level_iterations, preconditioner, RUN_STREAM};
use crate::config::{
    DistKind, ExperimentConfig, InitSpace, LabelSource, OptimizerName, TrainSection, Truncation, Variant,
};
use crate::datasets::load_dataset;
use crate::error::{HarnessError, Result};
use crate::output::TrajectoryRow;

pub(super) fn run(cfg: &ExperimentConfig) -> Result<Vec<TrajectoryRow>> {
    let t = cfg
        .train
        .as_ref()
        .ok_or_else(|| HarnessError::Config("training experiments need a [train] section".into()))?;
    let jobs: Vec<(usize, Variant)> = (0..cfg.replicates)
        .flat_map(|r| cfg.estimator.variants.iter().map(move |v| (r, *v)))
        .collect();
    let runs = jobs
        .par_iter()
        .map(|(r, v)| run_one(cfg, t, *r, *v))
        .collect::<Result<Vec<_>>>()?;
    Ok(runs.into_iter().flatten().collect())
}

fn run_rng(cfg: &ExperimentConfig, r: usize, tag: u64) -> Rng {
    substream(substream_seed(cfg.seed, RUN_STREAM + r as u64), tag)
}

fn replicate_model(cfg: &ExperimentConfig, t: &TrainSection, r: usize) -> Result<(GpModel<f64>, UnconstrainedParams<f64>)> {
    let (data, dataset_labels) = load_dataset(&cfg.dataset, &mut run_rng(cfg, r, 0))?;
    cfg.validate_for_n(data.n())?;
    let family = cfg.kernel.family;
    let labels = match cfg.labels.source {
        LabelSource::Dataset => {
            dataset_labels.ok_or_else(|| HarnessError::Config("dataset has no labels".into()))?
        }
        LabelSource::Uniform => {
            let mut rng = run_rng(cfg, r, 1);
            (0..data.n()).map(|_| uniform01(&mut rng) - 0.5).collect()
        }
        LabelSource::Prior => {
            let truth = match cfg.labels.truth {
                Some(tr) => KernelSpec::new(family, tr.f, tr.l, tr.mu)?,
                None => KernelSpec::new(family, cfg.kernel.f, cfg.kernel.l, cfg.kernel.mu)?,
            };
            ptss_core::gp::sample_labels_from_prior(&truth, &data, &mut run_rng(cfg, r, 1))?
        }
    };
    let [a, b, c] = t.init;
    let init = match t.init_space {
        InitSpace::Constrained => UnconstrainedParams::from_constrained(a, b, c, &t.active)?,
        InitSpace::Unconstrained => UnconstrainedParams::from_unconstrained(t.init, &t.active),
    };
    let template = KernelSpec::new(family, cfg.kernel.f, cfg.kernel.l, cfg.kernel.mu)?;
    let spec = init.to_spec(&template)?;
    Ok((GpModel::new(data, labels, spec)?, init))
}

fn gradient_source(cfg: &ExperimentConfig, model: &GpModel<f64>, variant: Variant, r: usize) -> Result<GradientSource> {
    let Variant::Krylov { precond, truncation } = variant else {
        return Ok(GradientSource::Exact);
    };
    let kappa = if cfg.estimator.distribution == DistKind::GammaOptimal {
        let op = gram_matrix(&model.spec, &model.data)?;
        let pre = if precond { Some(preconditioner(cfg, &op, &model.spec)?) } else { None };
        kappa_hat(cfg, &op, &model.spec, pre.as_ref(), &mut run_rng(cfg, r, 3 + precond as u64))?
    } else {
        f64::NAN
    };
    let solve_dist = distribution(cfg, cfg.estimator.distribution, Flavor::Solve, kappa)?;
    let logdet_dist = distribution(cfg, cfg.estimator.distribution, Flavor::LogQF, kappa)?;
    let (solver, logdet_solver) = match truncation {
        Truncation::Tss => (SolverMode::Tss(solve_dist), SolverMode::Tss(logdet_dist)),
        Truncation::Fixed(level) => (
            SolverMode::Truncated(level_iterations(level, &solve_dist)),
            SolverMode::Truncated(level_iterations(level, &logdet_dist)),
        ),
    };
    Ok(GradientSource::Estimated(EstimatorConfig {
        solver,
        logdet_solver,
        k_z: cfg.estimator.k_z,
        policy: cfg.policy(),
        precond: precond.then_some(PrecondSettings {
            rank: cfg.estimator.precond_rank,
            eta: cfg.estimator.precond_eta,
        }),
    }))
}

fn run_one(cfg: &ExperimentConfig, t: &TrainSection, r: usize, variant: Variant) -> Result<Vec<TrajectoryRow>> {
    let (model, init) = replicate_model(cfg, t, r)?;
    let source = gradient_source(cfg, &model, variant, r)?;
    let optimizer = match t.optimizer {
        OptimizerName::Gd => OptimizerKind::GradientDescent { lr: t.lr },
        OptimizerName::Adam => OptimizerKind::Adam { lr: t.lr },
    };
    let mut tc = TrainConfig::new(optimizer, t.iterations);
    tc.normalize_by_n = t.normalize_by_n;
    tc.record_exact_nlml = t.record_exact_nlml;
    let traj = train(&model, init, &tc, &source, &mut run_rng(cfg, r, 2))?;

    let label = variant.label_with(cfg.policy());
    let mut rows: Vec<TrajectoryRow> = traj
        .records
        .iter()
        .map(|rec| TrajectoryRow {
            variant: label.clone(),
            replicate: r,
            step: rec.step,
            f: rec.f,
            l: rec.l,
            mu: rec.mu,
            grad_f: rec.grad.get(ptss_core::kernels::Hyper::F),
            grad_l: rec.grad.get(ptss_core::kernels::Hyper::L),
            grad_mu: rec.grad.get(ptss_core::kernels::Hyper::Mu),
            nlml: rec.nlml.unwrap_or(f64::NAN),
            failure: String::new(),
        })
        .collect();
    let end = traj.final_spec;
    let final_nlml = if matches!(source, GradientSource::Exact) || t.record_exact_nlml {
        nlml_exact(&model.with_spec(end))?.value
    } else {
        f64::NAN
    };
    rows.push(TrajectoryRow {
        variant: label,
        replicate: r,
        step: traj.records.len(),
        f: end.f,
        l: end.l,
        mu: end.mu,
        grad_f: f64::NAN,
        grad_l: f64::NAN,
        grad_mu: f64::NAN,
        nlml: final_nlml,
        failure: traj.failure.unwrap_or_default(),
    });
    Ok(rows)
}

/// Euclidean distance in `(l, μ)` between the final states of two variants
/// in one replicate, or `None` if either run is missing.
pub fn endpoint_distance(rows: &[TrajectoryRow], variant_a: &str, variant_b: &str, replicate: usize) -> Option<f64> {
    let last = |v: &str| {
        rows.iter()
            .filter(|row| row.variant == v && row.replicate == replicate)
            .max_by_key(|row| row.step)
    };
    let (a, b) = (last(variant_a)?, last(variant_b)?);
    Some(((a.l - b.l).powi(2) + (a.mu - b.mu).powi(2)).sqrt())
}
