//! Experiment drivers. Every random quantity comes from a substream keyed by
//! the base seed and a fixed stream index, so outputs do not depend on the
//! worker count.

mod oracle;
mod quad;
mod reorth;
mod sweep;
mod train;

use ptss_core::kernels::{Dataset, Hyper, KernelSpec};
use ptss_core::krylov::estimate_condition_number;
use ptss_core::linalg::Matrix;
use ptss_core::operators::{condition_number_dense, DenseOperator, LinearOperator};
use ptss_core::precond::{build_pivoted_cholesky, LowRankShiftPreconditioner, Preconditioner};
use ptss_core::rng::{substream, substream_seed, uniform01, Rng};
use ptss_core::truncation::{make_exponential, make_gamma_optimal, make_geometric, Flavor, TruncationDistribution};
use rayon::prelude::*;

use crate::config::{DistKind, ExperimentConfig, ExperimentKind, KappaSource, LabelSource, Level, Truncation, Variant};
use crate::datasets::load_dataset;
use crate::error::{HarnessError, Result};
use crate::output::{ExperimentOutput, Rows, SweepRow};
use crate::stats::Summary;

pub use train::endpoint_distance;

const DATA_STREAM: u64 = 0;
const LABEL_STREAM: u64 = 1;
const POINT_STREAM: u64 = 1_000;
const AUX_STREAM: u64 = 2_000;
const RUN_STREAM: u64 = 3_000;

/// Runs an experiment on `threads` workers (0 = all cores).
pub fn run_experiment(cfg: &ExperimentConfig, threads: usize) -> Result<ExperimentOutput> {
    cfg.validate()?;
    let pool = rayon::ThreadPoolBuilder::new().num_threads(threads).build()?;
    let rows = pool.install(|| -> Result<Rows> {
        Ok(match cfg.experiment {
            ExperimentKind::QuadSweep => Rows::Sweep(quad::run(cfg, &[cfg.estimator.distribution])?),
            ExperimentKind::DistCompare => Rows::Sweep(quad::run(cfg, &cfg.estimator.distributions)?),
            ExperimentKind::ReorthVariance => Rows::Sweep(reorth::run(cfg)?),
            ExperimentKind::NlmlSweep => Rows::Sweep(sweep::run(cfg)?),
            ExperimentKind::Train2d | ExperimentKind::Train3d => Rows::Trajectory(train::run(cfg)?),
            ExperimentKind::Oracle => Rows::Oracle(oracle::run(cfg)?),
        })
    })?;
    Ok(ExperimentOutput {
        config: cfg.clone(),
        rows,
    })
}

/// Generator for replicate `r` at sweep point `p`; shared by all variants so
/// comparisons use common random numbers.
fn replicate_rng(cfg: &ExperimentConfig, p: usize, r: usize) -> Rng {
    substream(substream_seed(cfg.seed, POINT_STREAM + p as u64), r as u64)
}

/// Auxiliary generator for fixed per-point quantities (probes, pilots, labels).
fn aux_rng(cfg: &ExperimentConfig, p: usize, tag: u64) -> Rng {
    substream(substream_seed(cfg.seed, AUX_STREAM + p as u64), tag)
}

fn load(cfg: &ExperimentConfig) -> Result<(Dataset<f64>, Option<Vec<f64>>)> {
    let (data, labels) = load_dataset(&cfg.dataset, &mut substream(cfg.seed, DATA_STREAM))?;
    cfg.validate_for_n(data.n())?;
    Ok((data, labels))
}

fn spec_at(cfg: &ExperimentConfig, value: f64) -> Result<KernelSpec<f64>> {
    let k = &cfg.kernel;
    Ok(KernelSpec::new(k.family, k.f, k.l, k.mu)?.with(cfg.sweep.param, value))
}

/// Labels for a sweep point: fixed across points unless drawn from the
/// prior at the point's own kernel.
fn labels_at(
    cfg: &ExperimentConfig,
    data: &Dataset<f64>,
    dataset_labels: Option<&[f64]>,
    spec: &KernelSpec<f64>,
    p: usize,
) -> Result<Vec<f64>> {
    let n = data.n();
    match cfg.labels.source {
        LabelSource::Uniform => {
            let mut rng = substream(cfg.seed, LABEL_STREAM);
            Ok((0..n).map(|_| uniform01(&mut rng) - 0.5).collect())
        }
        LabelSource::Dataset => dataset_labels
            .map(<[f64]>::to_vec)
            .ok_or_else(|| HarnessError::Config("dataset has no labels".into())),
        LabelSource::Prior => match cfg.labels.truth {
            Some(t) => {
                let truth = KernelSpec::new(cfg.kernel.family, t.f, t.l, t.mu)?;
                Ok(ptss_core::gp::sample_labels_from_prior(
                    &truth,
                    data,
                    &mut substream(cfg.seed, LABEL_STREAM),
                )?)
            }
            None => Ok(ptss_core::gp::sample_labels_from_prior(spec, data, &mut aux_rng(cfg, p, 0))?),
        },
    }
}

fn eta_for(cfg: &ExperimentConfig, spec: &KernelSpec<f64>) -> f64 {
    cfg.estimator.precond_eta.unwrap_or(spec.lambda_min_floor())
}

fn preconditioner(
    cfg: &ExperimentConfig,
    op: &DenseOperator<f64>,
    spec: &KernelSpec<f64>,
) -> Result<LowRankShiftPreconditioner<f64>> {
    Ok(build_pivoted_cholesky(op, cfg.estimator.precond_rank, eta_for(cfg, spec))?)
}

/// `M^{-1/2} A M^{-1/2}` as a dense symmetric matrix.
fn dense_preconditioned(op: &DenseOperator<f64>, pre: &dyn Preconditioner<f64>) -> Result<DenseOperator<f64>> {
    let n = op.dim();
    let cols: Vec<Vec<f64>> = (0..n)
        .map(|j| {
            let mut e = vec![0.0; n];
            e[j] = 1.0;
            pre.apply_minv_sqrt(&op.apply(&pre.apply_minv_sqrt(&e)))
        })
        .collect();
    Ok(DenseOperator::new(Matrix::from_fn(n, n, |i, j| 0.5 * (cols[j][i] + cols[i][j])))?)
}

/// Condition number of the (preconditioned) operator from the configured source.
fn kappa_hat(
    cfg: &ExperimentConfig,
    op: &DenseOperator<f64>,
    spec: &KernelSpec<f64>,
    pre: Option<&LowRankShiftPreconditioner<f64>>,
    rng: &mut Rng,
) -> Result<f64> {
    match cfg.estimator.kappa_source {
        KappaSource::Dense => Ok(match pre {
            Some(p) => condition_number_dense(dense_preconditioned(op, p)?.matrix())?,
            None => condition_number_dense(op.matrix())?,
        }),
        KappaSource::Pilot => {
            // A − ηI ⪰ UUᵀ makes λ_min(M^{-1/2}AM^{-1/2}) ≥ 1 when η ≤ f²μ.
            let floor = match pre {
                Some(p) if p.eta() <= spec.lambda_min_floor() => Some(1.0),
                Some(_) => None,
                None => Some(spec.lambda_min_floor()),
            };
            let steps = cfg.estimator.pilot_steps.min(op.dim());
            Ok(estimate_condition_number(
                op,
                pre.map(|p| p as &dyn Preconditioner<f64>),
                steps,
                floor,
                rng,
            )?)
        }
    }
}

fn distribution(cfg: &ExperimentConfig, kind: DistKind, flavor: Flavor, kappa: f64) -> Result<TruncationDistribution> {
    let e = &cfg.estimator;
    Ok(match kind {
        DistKind::Exponential => make_exponential(e.c, e.i_min, e.i_max)?,
        DistKind::Geometric => make_geometric(e.i_min, e.i_max)?,
        DistKind::GammaOptimal => make_gamma_optimal(flavor, kappa, e.i_min, e.i_max)?,
        DistKind::Uniform => TruncationDistribution::uniform(e.i_min, e.i_max)?,
    })
}

fn distribution_label(cfg: &ExperimentConfig, kind: DistKind) -> String {
    match kind {
        DistKind::Exponential => format!("exponential({})", cfg.estimator.c),
        other => other.to_string(),
    }
}

/// Iteration count of a fixed-truncation level under the configured distribution.
fn level_iterations(level: Level, dist: &TruncationDistribution) -> usize {
    match level {
        Level::IMin => dist.i_min(),
        Level::CeilExpected => dist.expected_q_ceil(),
        Level::IMax => dist.i_max(),
        Level::Fixed(m) => m,
    }
}

/// Runs `f(r)` for every replicate on the current pool, results in index order.
fn replicates<T: Send>(count: usize, f: impl Fn(usize) -> T + Sync + Send) -> Vec<T> {
    (0..count).into_par_iter().map(f).collect()
}

fn hyper_label(h: Hyper) -> String {
    h.name().to_string()
}

/// Fields shared by the rows of one (point, quantity, variant).
struct RowBase<'a> {
    cfg: &'a ExperimentConfig,
    value: f64,
    quantity: &'static str,
    exact: f64,
    kappa: f64,
    label: String,
}

impl RowBase<'_> {
    fn row(
        &self,
        distribution: String,
        error: Summary,
        exact_std: f64,
        expected_cost: f64,
        mean_cost: f64,
        mean_precond_applies: f64,
    ) -> SweepRow {
        SweepRow {
            param: hyper_label(self.cfg.sweep.param),
            value: self.value,
            quantity: self.quantity.to_string(),
            variant: self.label.clone(),
            distribution,
            exact: self.exact,
            kappa: self.kappa,
            error,
            exact_std,
            expected_cost,
            mean_cost,
            mean_precond_applies,
            failures: 0,
            failure_reason: String::new(),
        }
    }

    fn failed(&self, distribution: String, expected_cost: f64, reason: &str) -> SweepRow {
        let mut r = self.row(
            distribution,
            Summary::from_values(&[]),
            f64::NAN,
            expected_cost,
            f64::NAN,
            f64::NAN,
        );
        r.failures = self.cfg.replicates;
        r.failure_reason = reason.to_string();
        r
    }
}

/// Replicate statistics of a TSS estimate whose value is a deterministic
/// function of `Q`: `outcome[q − i_min]` is the signed error at `Q = q`.
/// Returns the replicate summary, the exactly enumerated standard deviation
/// and the mean sampled `Q`.
fn tss_replicates(
    cfg: &ExperimentConfig,
    p: usize,
    dist: &TruncationDistribution,
    outcome: &[f64],
) -> (Summary, f64, f64) {
    let at = |q: usize| outcome[q - dist.i_min()];
    let mean: f64 = dist.support().map(|q| dist.prob(q) * at(q)).sum();
    let var: f64 = dist.support().map(|q| dist.prob(q) * (at(q) - mean).powi(2)).sum();
    let draws = replicates(cfg.replicates, |r| dist.sample(&mut replicate_rng(cfg, p, r)));
    let errors: Vec<f64> = draws.iter().map(|q| at(*q)).collect();
    let mean_q = draws.iter().sum::<usize>() as f64 / draws.len() as f64;
    (Summary::from_values(&errors), var.sqrt(), mean_q)
}

/// Largest explicit `np-t-<m>` level among the variants, or `i_max`.
fn longest_run(cfg: &ExperimentConfig) -> usize {
    cfg.estimator
        .variants
        .iter()
        .filter_map(|v| match v {
            Variant::Krylov {
                truncation: Truncation::Fixed(Level::Fixed(m)),
                ..
            } => Some(*m),
            _ => None,
        })
        .fold(cfg.estimator.i_max, usize::max)
}
