mod common;

use common::cube_points;
use ptss_core::estimators::SolverMode;
use ptss_core::gp::{nlml_and_grad_exact, nlml_estimate_full, nlml_exact, sample_labels_from_prior, EstimatorConfig, GpModel, PrecondSettings};
use ptss_core::kernels::{Hyper, KernelFamily, KernelSpec};
use ptss_core::optim::{chain_grad, softplus, softplus_inv, train, GradientSource, OptimizerKind, TrainConfig, UnconstrainedParams};
use ptss_core::rng::stream;
use ptss_core::truncation::make_exponential;
use proptest::prelude::*;

fn model(family: KernelFamily, n: usize, seed: u64) -> GpModel<f64> {
    let mut rng = stream(seed);
    let data = cube_points(&mut rng, n, 2, 4.0);
    let truth = KernelSpec::new(family, 1.0, 1.5, 0.3).unwrap();
    let y = sample_labels_from_prior(&truth, &data, &mut rng).unwrap();
    let spec = KernelSpec::new(family, 1.3, 1.1, 0.2).unwrap();
    GpModel::new(data, y, spec).unwrap()
}

#[test]
fn exact_gradient_matches_central_differences() {
    for family in [KernelFamily::Rbf, KernelFamily::Matern32] {
        let m = model(family, 64, 1);
        let (_, g) = nlml_and_grad_exact(&m, &Hyper::ALL).unwrap();
        for h in Hyper::ALL {
            let v = m.spec.get(h);
            let step = 1e-5 * v;
            let up = nlml_exact(&m.with_spec(m.spec.with(h, v + step))).unwrap().value;
            let down = nlml_exact(&m.with_spec(m.spec.with(h, v - step))).unwrap().value;
            let fd = (up - down) / (2.0 * step);
            let rel = (g.get(h) - fd).abs() / fd.abs().max(1e-8);
            assert!(rel <= 1e-5, "{family} {h}: analytic {} fd {fd}", g.get(h));
        }
    }
}

fn mean_and_se(xs: &[f64]) -> (f64, f64) {
    let n = xs.len() as f64;
    let mean = xs.iter().sum::<f64>() / n;
    let var = xs.iter().map(|x| (x - mean) * (x - mean)).sum::<f64>() / (n - 1.0);
    (mean, (var / n).sqrt())
}

#[test]
fn tss_nlml_agrees_in_mean_with_truncation_at_i_max() {
    let m = model(KernelFamily::Rbf, 64, 2);
    let dist = make_exponential(0.5, 3, 10).unwrap();
    let tss = EstimatorConfig::new(SolverMode::Tss(dist), 1);
    let trunc = EstimatorConfig::new(SolverMode::Truncated(10), 1);
    let reps = 400;
    let mut rng = stream(3);
    let mut collect = |cfg: &EstimatorConfig| {
        let mut v = Vec::new();
        let mut g = [Vec::new(), Vec::new(), Vec::new()];
        for _ in 0..reps {
            let e = nlml_estimate_full(&m, cfg, true, &Hyper::ALL, &mut rng).unwrap();
            v.push(e.value.unwrap());
            for (k, h) in Hyper::ALL.iter().enumerate() {
                g[k].push(e.grad.get(*h));
            }
        }
        (v, g)
    };
    let (tv, tg) = collect(&tss);
    let (rv, rg) = collect(&trunc);
    let check = |a: &[f64], b: &[f64], what: &str| {
        let (ma, sa) = mean_and_se(a);
        let (mb, sb) = mean_and_se(b);
        assert!((ma - mb).abs() <= 3.0 * (sa * sa + sb * sb).sqrt(), "{what}: {ma} ± {sa} vs {mb} ± {sb}");
    };
    check(&tv, &rv, "value");
    for k in 0..3 {
        check(&tg[k], &rg[k], Hyper::ALL[k].name());
    }
}

#[test]
fn preconditioned_estimate_tracks_the_exact_value() {
    let m = model(KernelFamily::Matern32, 64, 4);
    let exact = nlml_exact(&m).unwrap().value;
    let mut cfg = EstimatorConfig::new(SolverMode::Truncated(64), 30);
    cfg.precond = Some(PrecondSettings { rank: 16, eta: None });
    let mut rng = stream(5);
    let e = nlml_estimate_full(&m, &cfg, true, &[], &mut rng).unwrap();
    let v = e.value.unwrap();
    assert!((v - exact).abs() <= 0.05 * exact.abs(), "{v} vs {exact}");
    assert!(e.matvecs > 0);
}

#[test]
fn exact_descent_is_nearly_monotone() {
    let m = model(KernelFamily::Rbf, 64, 6);
    let init = UnconstrainedParams::from_constrained(1.0, 1.0, 0.5, &[Hyper::L, Hyper::Mu]).unwrap();
    let cfg = TrainConfig::new(OptimizerKind::GradientDescent { lr: 0.1 }, 50);
    let traj = train(&m, init, &cfg, &GradientSource::Exact, &mut stream(7)).unwrap();
    assert!(traj.failure.is_none());
    assert_eq!(traj.records.len(), 50);
    let values: Vec<f64> = traj.records.iter().map(|r| r.nlml.unwrap()).collect();
    let rises = values.windows(2).filter(|w| w[1] > w[0]).count();
    assert!(rises <= 5, "{rises} increases");
    assert!(values[49] < values[0]);
    assert!(traj.records.iter().all(|r| r.f == 1.0));
}

#[test]
fn stochastic_training_is_deterministic_for_a_seed() {
    let m = model(KernelFamily::Matern32, 48, 8);
    let init = UnconstrainedParams::from_constrained(1.0, 1.0, 0.5, &[Hyper::L, Hyper::Mu]).unwrap();
    let cfg = TrainConfig::new(OptimizerKind::Adam { lr: 0.05 }, 10);
    let src = GradientSource::Estimated(EstimatorConfig::new(SolverMode::Tss(make_exponential(0.5, 3, 10).unwrap()), 1));
    let a = train(&m, init.clone(), &cfg, &src, &mut stream(9)).unwrap();
    let b = train(&m, init.clone(), &cfg, &src, &mut stream(9)).unwrap();
    assert_eq!(a, b);
    let c = train(&m, init, &cfg, &src, &mut stream(10)).unwrap();
    assert_ne!(a.records, c.records);
}

#[test]
fn single_precision_pipeline_runs() {
    let m64 = model(KernelFamily::Rbf, 32, 11);
    let pts: Vec<Vec<f32>> = (0..32).map(|i| m64.data.point(i).iter().map(|v| *v as f32).collect()).collect();
    let data = ptss_core::Dataset32::from_points(&pts).unwrap();
    let y: Vec<f32> = m64.labels.iter().map(|v| *v as f32).collect();
    let spec = KernelSpec::new(KernelFamily::Rbf, 1.3f32, 1.1, 0.2).unwrap();
    let m32 = GpModel::new(data, y, spec).unwrap();
    let v32 = nlml_exact(&m32).unwrap().value as f64;
    let v64 = nlml_exact(&m64).unwrap().value;
    assert!((v32 - v64).abs() <= 1e-3 * v64.abs());
    let cfg = EstimatorConfig::new(SolverMode::Truncated(20), 4);
    let e = nlml_estimate_full(&m32, &cfg, true, &Hyper::ALL, &mut stream(12)).unwrap();
    assert!(e.value.unwrap().is_finite() && e.grad.is_finite());
}

proptest! {
    #[test]
    fn softplus_round_trips(x in -20.0f64..20.0) {
        let y = softplus(x);
        prop_assert!(y > 0.0);
        prop_assert!((softplus_inv(y).unwrap() - x).abs() <= 1e-8 * x.abs().max(1.0));
    }

    #[test]
    fn chain_rule_matches_finite_differences(t in -3.0f64..3.0, g in -5.0f64..5.0) {
        // d/dt of g·softplus(t).
        let h = 1e-6;
        let fd = g * (softplus(t + h) - softplus(t - h)) / (2.0 * h);
        prop_assert!((chain_grad(t, g) - fd).abs() <= 1e-6 * fd.abs().max(1.0));
    }
}
