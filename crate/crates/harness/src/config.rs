//! Experiment configuration: TOML files, built-in presets and the `# key=value`
//! echo written at the top of every CSV.

use std::fmt;
use std::path::Path;
use std::str::FromStr;

use ptss_core::kernels::{Hyper, KernelFamily};
use ptss_core::krylov::ReorthPolicy;
use serde::{Deserialize, Serialize};

use crate::error::{HarnessError, Result};

/// Largest problem the harness accepts (dense oracles are formed for every run).
pub const MAX_N: usize = 4096;

mod as_string {
    use std::fmt::Display;
    use std::str::FromStr;

    use serde::{de, Deserialize, Deserializer, Serializer};

    pub fn serialize<T: Display, S: Serializer>(v: &T, s: S) -> Result<S::Ok, S::Error> {
        s.collect_str(v)
    }

    pub fn deserialize<'de, T, D>(d: D) -> Result<T, D::Error>
    where
        T: FromStr,
        T::Err: Display,
        D: Deserializer<'de>,
    {
        String::deserialize(d)?.parse().map_err(de::Error::custom)
    }
}

mod as_string_vec {
    use std::fmt::Display;
    use std::str::FromStr;

    use serde::ser::SerializeSeq;
    use serde::{de, Deserialize, Deserializer, Serializer};

    pub fn serialize<T: Display, S: Serializer>(v: &[T], s: S) -> Result<S::Ok, S::Error> {
        let mut seq = s.serialize_seq(Some(v.len()))?;
        for x in v {
            seq.serialize_element(&x.to_string())?;
        }
        seq.end()
    }

    pub fn deserialize<'de, T, D>(d: D) -> Result<Vec<T>, D::Error>
    where
        T: FromStr,
        T::Err: Display,
        D: Deserializer<'de>,
    {
        Vec::<String>::deserialize(d)?
            .iter()
            .map(|s| s.parse().map_err(de::Error::custom))
            .collect()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum ExperimentKind {
    #[serde(rename = "quad-sweep")]
    QuadSweep,
    #[serde(rename = "dist-compare")]
    DistCompare,
    #[serde(rename = "reorth-variance")]
    ReorthVariance,
    #[serde(rename = "nlml-sweep")]
    NlmlSweep,
    #[serde(rename = "train-2d")]
    Train2d,
    #[serde(rename = "train-3d")]
    Train3d,
    #[serde(rename = "oracle")]
    Oracle,
}

impl ExperimentKind {
    pub const ALL: [ExperimentKind; 7] = [
        Self::QuadSweep,
        Self::DistCompare,
        Self::ReorthVariance,
        Self::NlmlSweep,
        Self::Train2d,
        Self::Train3d,
        Self::Oracle,
    ];

    pub fn name(self) -> &'static str {
        match self {
            Self::QuadSweep => "quad-sweep",
            Self::DistCompare => "dist-compare",
            Self::ReorthVariance => "reorth-variance",
            Self::NlmlSweep => "nlml-sweep",
            Self::Train2d => "train-2d",
            Self::Train3d => "train-3d",
            Self::Oracle => "oracle",
        }
    }
}

impl fmt::Display for ExperimentKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for ExperimentKind {
    type Err = HarnessError;

    fn from_str(s: &str) -> Result<Self> {
        Self::ALL
            .into_iter()
            .find(|k| k.name() == s)
            .ok_or_else(|| HarnessError::Config(format!("unknown experiment `{s}`")))
    }
}

/// Where the points (and possibly the labels) come from.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "kebab-case")]
pub enum DatasetSpec {
    /// Uniform points in `[0, side]^d`.
    Cube { n: usize, d: usize, side: f64 },
    /// Uniform points in `[0, 1]²` labelled by the Franke surface plus noise.
    Franke { n: usize, noise_sd: f64 },
    /// Numeric CSV with a header row; features are z-scored.
    Csv {
        path: String,
        label_column: String,
        #[serde(default, skip_serializing_if = "Option::is_none")]
        subsample_n: Option<usize>,
    },
}

impl DatasetSpec {
    /// Number of points, when known before loading.
    pub fn n(&self) -> Option<usize> {
        match self {
            Self::Cube { n, .. } | Self::Franke { n, .. } => Some(*n),
            Self::Csv { subsample_n, .. } => *subsample_n,
        }
    }

    pub fn provides_labels(&self) -> bool {
        !matches!(self, Self::Cube { .. })
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct KernelSection {
    #[serde(with = "as_string")]
    pub family: KernelFamily,
    pub f: f64,
    pub l: f64,
    pub mu: f64,
}

/// Values taken by one hyperparameter; the others stay at the kernel section.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SweepSection {
    #[serde(with = "as_string")]
    pub param: Hyper,
    pub values: Vec<f64>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum DistKind {
    /// `P(Q = j) ∝ e^{−c j}`.
    Exponential,
    /// `P(Q = j) ∝ 2^{−j}`.
    Geometric,
    /// Γ-minimising distribution for the estimated condition number.
    GammaOptimal,
    Uniform,
}

impl fmt::Display for DistKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Self::Exponential => "exponential",
            Self::Geometric => "geometric",
            Self::GammaOptimal => "gamma-optimal",
            Self::Uniform => "uniform",
        })
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum KappaSource {
    /// Dense eigendecomposition of the (preconditioned) operator.
    Dense,
    /// Ritz values of a short Lanczos pilot run.
    Pilot,
}

/// A truncation level given relative to the distribution support.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Level {
    IMin,
    /// `⌈E[Q]⌉`, the matched-cost baseline.
    CeilExpected,
    IMax,
    Fixed(usize),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Truncation {
    Tss,
    Fixed(Level),
}

/// An estimator variant: exact dense computation, or a Krylov estimator with
/// or without the pivoted-Cholesky preconditioner. Written `exact`,
/// `np-tss`, `pc-tss`, `np-t-imin`, `pc-t-ceil`, `pc-t-imax`, `np-t-12`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Variant {
    Exact,
    Krylov { precond: bool, truncation: Truncation },
}

impl Variant {
    pub fn precond(&self) -> bool {
        matches!(self, Self::Krylov { precond: true, .. })
    }

    /// Full label with the reorthogonalisation window appended.
    pub fn label_with(&self, policy: ReorthPolicy) -> String {
        match self {
            Self::Exact => "exact".into(),
            _ => format!("{self}-{policy}"),
        }
    }
}

impl fmt::Display for Variant {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Self::Exact => f.write_str("exact"),
            Self::Krylov { precond, truncation } => {
                f.write_str(if *precond { "pc-" } else { "np-" })?;
                match truncation {
                    Truncation::Tss => f.write_str("tss"),
                    Truncation::Fixed(Level::IMin) => f.write_str("t-imin"),
                    Truncation::Fixed(Level::CeilExpected) => f.write_str("t-ceil"),
                    Truncation::Fixed(Level::IMax) => f.write_str("t-imax"),
                    Truncation::Fixed(Level::Fixed(m)) => write!(f, "t-{m}"),
                }
            }
        }
    }
}

impl FromStr for Variant {
    type Err = HarnessError;

    fn from_str(s: &str) -> Result<Self> {
        let bad = || HarnessError::Config(format!("unknown estimator variant `{s}`"));
        if s == "exact" {
            return Ok(Self::Exact);
        }
        let (precond, rest) = if let Some(r) = s.strip_prefix("pc-") {
            (true, r)
        } else if let Some(r) = s.strip_prefix("np-") {
            (false, r)
        } else {
            return Err(bad());
        };
        let truncation = match rest {
            "tss" => Truncation::Tss,
            "t-imin" => Truncation::Fixed(Level::IMin),
            "t-ceil" => Truncation::Fixed(Level::CeilExpected),
            "t-imax" => Truncation::Fixed(Level::IMax),
            other => {
                let m = other
                    .strip_prefix("t-")
                    .and_then(|m| m.parse::<usize>().ok())
                    .filter(|m| *m > 0)
                    .ok_or_else(bad)?;
                Truncation::Fixed(Level::Fixed(m))
            }
        };
        Ok(Self::Krylov { precond, truncation })
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct EstimatorSection {
    pub i_min: usize,
    pub i_max: usize,
    /// Distribution used by `*-tss` variants.
    pub distribution: DistKind,
    /// Rate of the exponential distribution.
    pub c: f64,
    /// Distributions compared by `dist-compare`.
    pub distributions: Vec<DistKind>,
    /// Probe count for SLQ and Hutchinson.
    pub k_z: usize,
    /// Reorthogonalisation windows; experiments other than
    /// `reorth-variance` use the first entry.
    #[serde(with = "as_string_vec")]
    pub i_orth: Vec<ReorthPolicy>,
    /// Pivoted-Cholesky rank for `pc-*` variants.
    pub precond_rank: usize,
    /// Preconditioner shift; `f²μ` when absent.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub precond_eta: Option<f64>,
    pub kappa_source: KappaSource,
    pub pilot_steps: usize,
    #[serde(with = "as_string_vec")]
    pub variants: Vec<Variant>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum LabelSource {
    /// `y` with i.i.d. entries in `[−0.5, 0.5]`.
    Uniform,
    /// `y ~ N(0, K̂)` at `truth`, or at each sweep point when `truth` is absent.
    Prior,
    /// Labels shipped with the dataset (Franke, CSV).
    Dataset,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Truth {
    pub f: f64,
    pub l: f64,
    pub mu: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct LabelsSection {
    pub source: LabelSource,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub truth: Option<Truth>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum OptimizerName {
    Gd,
    Adam,
}

/// Whether `train.init` holds `(f, l, μ)` or their softplus pre-images.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum InitSpace {
    Constrained,
    Unconstrained,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TrainSection {
    pub optimizer: OptimizerName,
    pub lr: f64,
    pub iterations: usize,
    /// `(f, l, μ)`, in the space named by `init_space`.
    pub init: [f64; 3],
    pub init_space: InitSpace,
    #[serde(with = "as_string_vec")]
    pub active: Vec<Hyper>,
    pub normalize_by_n: bool,
    pub record_exact_nlml: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentConfig {
    pub experiment: ExperimentKind,
    pub seed: u64,
    /// Monte-Carlo replicates per sweep point (training: independent runs).
    pub replicates: usize,
    pub dataset: DatasetSpec,
    pub kernel: KernelSection,
    pub sweep: SweepSection,
    pub estimator: EstimatorSection,
    pub labels: LabelsSection,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub train: Option<TrainSection>,
}

fn grid(lo: f64, hi: f64, step: f64) -> Vec<f64> {
    let count = ((hi - lo) / step).round() as usize;
    (0..=count).map(|k| lo + step * k as f64).collect()
}

fn variants(names: &[&str]) -> Vec<Variant> {
    names.iter().map(|s| s.parse().expect("preset variant")).collect()
}

impl ExperimentConfig {
    /// Desk-scale defaults for each experiment.
    pub fn preset(kind: ExperimentKind) -> Self {
        let base = Self {
            experiment: kind,
            seed: 20_251_018,
            replicates: 10_000,
            dataset: DatasetSpec::Cube { n: 256, d: 3, side: 24.0 },
            kernel: KernelSection {
                family: KernelFamily::Rbf,
                f: 1.0,
                l: 1.0,
                mu: 0.01,
            },
            sweep: SweepSection {
                param: Hyper::L,
                values: grid(1.0, 10.0, 1.0),
            },
            estimator: EstimatorSection {
                i_min: 5,
                i_max: 10,
                distribution: DistKind::Exponential,
                c: 0.5,
                distributions: vec![DistKind::Exponential, DistKind::Geometric, DistKind::GammaOptimal],
                k_z: 1,
                i_orth: vec![ReorthPolicy::Full],
                precond_rank: 32,
                precond_eta: None,
                kappa_source: KappaSource::Pilot,
                pilot_steps: 20,
                variants: variants(&["pc-tss", "pc-t-imin", "pc-t-ceil", "pc-t-imax"]),
            },
            labels: LabelsSection {
                source: LabelSource::Uniform,
                truth: None,
            },
            train: None,
        };
        match kind {
            ExperimentKind::QuadSweep => base,
            ExperimentKind::DistCompare => {
                let mut c = base;
                c.sweep.values = grid(7.0, 8.25, 0.25);
                c.estimator.i_max = 15;
                c.estimator.precond_rank = 64;
                c.estimator.variants = variants(&["pc-tss", "np-tss"]);
                c
            }
            ExperimentKind::ReorthVariance => {
                let mut c = base;
                c.replicates = 1000;
                c.dataset = DatasetSpec::Cube { n: 256, d: 3, side: 6.3 };
                c.sweep.values = grid(2.0, 5.0, 0.5);
                c.estimator.i_min = 30;
                c.estimator.i_max = 50;
                c.estimator.precond_rank = 0;
                c.estimator.i_orth = vec![
                    ReorthPolicy::Full,
                    ReorthPolicy::Window(2),
                    ReorthPolicy::Window(5),
                    ReorthPolicy::Window(10),
                ];
                c.estimator.variants = variants(&["np-tss"]);
                c
            }
            ExperimentKind::NlmlSweep => {
                let mut c = base;
                c.replicates = 100;
                c.estimator.i_max = 15;
                c.estimator.precond_rank = 64;
                c.estimator.variants = variants(&["pc-tss", "np-tss", "pc-t-imin", "pc-t-ceil", "pc-t-imax"]);
                c.labels.source = LabelSource::Prior;
                c
            }
            ExperimentKind::Train2d => {
                let mut c = base;
                c.replicates = 3;
                c.dataset = DatasetSpec::Cube {
                    n: 200,
                    d: 3,
                    side: 200f64.cbrt(),
                };
                c.sweep.values = vec![1.0];
                c.estimator.i_max = 15;
                c.estimator.precond_rank = 0;
                c.estimator.variants = variants(&["exact", "np-tss", "np-t-imin", "np-t-ceil", "np-t-imax"]);
                c.labels = LabelsSection {
                    source: LabelSource::Prior,
                    truth: Some(Truth { f: 1.0, l: 2.0, mu: 0.5 }),
                };
                c.train = Some(TrainSection {
                    optimizer: OptimizerName::Gd,
                    lr: 0.1,
                    iterations: 1500,
                    init: [1.0, 1.0, 1.0],
                    init_space: InitSpace::Constrained,
                    active: vec![Hyper::L, Hyper::Mu],
                    normalize_by_n: true,
                    record_exact_nlml: false,
                });
                c
            }
            ExperimentKind::Train3d => {
                let mut c = base;
                c.replicates = 1;
                c.dataset = DatasetSpec::Franke { n: 256, noise_sd: 0.1 };
                c.kernel.family = KernelFamily::Matern32;
                c.sweep.values = vec![c.kernel.l];
                c.estimator.i_max = 15;
                c.estimator.precond_rank = 64;
                c.estimator.variants = variants(&["exact", "np-tss", "pc-tss"]);
                c.labels.source = LabelSource::Dataset;
                c.train = Some(TrainSection {
                    optimizer: OptimizerName::Adam,
                    lr: 0.01,
                    iterations: 1000,
                    init: [0.0, 0.0, 0.0],
                    init_space: InitSpace::Unconstrained,
                    active: Hyper::ALL.to_vec(),
                    normalize_by_n: true,
                    record_exact_nlml: false,
                });
                c
            }
            ExperimentKind::Oracle => {
                let mut c = base;
                c.replicates = 1;
                c.labels.source = LabelSource::Prior;
                c
            }
        }
    }

    /// Scales the dataset up to the sizes of the original study.
    pub fn paper_scale(mut self) -> Self {
        match (&mut self.dataset, self.experiment) {
            (DatasetSpec::Cube { n, side, .. }, ExperimentKind::ReorthVariance) => {
                *n = 1024;
                *side = 10.0;
            }
            (DatasetSpec::Cube { .. }, ExperimentKind::Train2d) => {}
            (DatasetSpec::Cube { n, side, .. }, _) => {
                *n = 4096;
                *side = 16.0;
            }
            (DatasetSpec::Franke { n, .. }, _) => *n = 4096,
            (DatasetSpec::Csv { subsample_n, .. }, _) => *subsample_n = Some(4096),
        }
        if self.experiment == ExperimentKind::DistCompare {
            self.sweep.values = grid(1.0, 10.0, 1.0);
        }
        self
    }

    pub fn from_toml_str(s: &str) -> Result<Self> {
        let cfg: Self = toml::from_str(s)?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|source| HarnessError::Io {
            path: path.to_path_buf(),
            source,
        })?;
        Self::from_toml_str(&text)
    }

    pub fn to_toml_string(&self) -> Result<String> {
        Ok(toml::to_string(self)?)
    }

    /// Flattened `(dotted.key, TOML literal)` pairs describing the config.
    pub fn echo(&self) -> Result<Vec<(String, String)>> {
        let value = toml::Value::try_from(self)?;
        let mut out = Vec::new();
        flatten("", &value, &mut out);
        Ok(out)
    }

    /// Rebuilds a config from [`echo`](Self::echo) pairs.
    pub fn from_echo(pairs: &[(String, String)]) -> Result<Self> {
        let text: String = pairs.iter().map(|(k, v)| format!("{k} = {v}\n")).collect();
        Self::from_toml_str(&text)
    }

    pub fn validate(&self) -> Result<()> {
        let bad = |m: String| Err(HarnessError::Config(m));
        if self.replicates == 0 {
            return bad("replicates must be at least 1".into());
        }
        if let Some(n) = self.dataset.n() {
            self.validate_for_n(n)?;
        }
        match &self.dataset {
            DatasetSpec::Cube { n, d, side } => {
                if *n == 0 || *d == 0 || !(*side > 0.0) {
                    return bad(format!("cube dataset needs n, d ≥ 1 and side > 0 (n={n}, d={d}, side={side})"));
                }
            }
            DatasetSpec::Franke { n, noise_sd } => {
                if *n == 0 || !(*noise_sd >= 0.0) {
                    return bad(format!("Franke dataset needs n ≥ 1 and noise_sd ≥ 0 (n={n}, noise_sd={noise_sd})"));
                }
            }
            DatasetSpec::Csv { subsample_n, .. } => {
                if *subsample_n == Some(0) {
                    return bad("subsample_n must be at least 1".into());
                }
            }
        }
        let k = &self.kernel;
        if !(k.f > 0.0 && k.l > 0.0 && k.mu > 0.0) {
            return bad(format!("kernel parameters must be positive (f={}, l={}, mu={})", k.f, k.l, k.mu));
        }
        if self.sweep.values.is_empty() || self.sweep.values.iter().any(|v| !(*v > 0.0)) {
            return bad("sweep values must be a non-empty list of positive numbers".into());
        }
        let e = &self.estimator;
        if e.i_min == 0 || e.i_min > e.i_max {
            return bad(format!("need 1 ≤ i_min ≤ i_max (i_min={}, i_max={})", e.i_min, e.i_max));
        }
        if e.distribution == DistKind::Exponential || e.distributions.contains(&DistKind::Exponential) {
            if !(e.c > 0.0) {
                return bad(format!("exponential rate c must be positive, got {}", e.c));
            }
        }
        if e.k_z == 0 {
            return bad("k_z must be at least 1".into());
        }
        if e.i_orth.is_empty() {
            return bad("i_orth needs at least one window".into());
        }
        if e.pilot_steps < 2 {
            return bad("pilot_steps must be at least 2".into());
        }
        if e.variants.is_empty() {
            return bad("at least one estimator variant is required".into());
        }
        if e.precond_eta.is_some_and(|eta| !(eta > 0.0)) {
            return bad("precond_eta must be positive".into());
        }
        if e.variants.iter().any(|v| v.precond()) && e.precond_rank == 0 {
            return bad("`pc-*` variants need precond_rank ≥ 1".into());
        }
        let training = matches!(self.experiment, ExperimentKind::Train2d | ExperimentKind::Train3d);
        if !training && e.variants.contains(&Variant::Exact) {
            return bad(format!("variant `exact` is only meaningful for training, not {}", self.experiment));
        }
        if training {
            let Some(t) = &self.train else {
                return bad(format!("{} needs a [train] section", self.experiment));
            };
            if t.iterations == 0 || !(t.lr > 0.0) || t.active.is_empty() {
                return bad("training needs iterations ≥ 1, lr > 0 and at least one active hyperparameter".into());
            }
            if t.init_space == InitSpace::Constrained && t.init.iter().any(|v| !(*v > 0.0)) {
                return bad("constrained initial values must be positive".into());
            }
        }
        if self.labels.source == LabelSource::Dataset && !self.dataset.provides_labels() {
            return bad("label source `dataset` needs a Franke or CSV dataset".into());
        }
        Ok(())
    }

    /// Checks that depend on the number of points.
    pub fn validate_for_n(&self, n: usize) -> Result<()> {
        if n > MAX_N {
            return Err(HarnessError::Config(format!("n = {n} exceeds the cap of {MAX_N}")));
        }
        if self.estimator.i_max > n {
            return Err(HarnessError::Config(format!(
                "i_max = {} exceeds the number of points {n}",
                self.estimator.i_max
            )));
        }
        if self.estimator.precond_rank > n {
            return Err(HarnessError::Config(format!(
                "precond_rank = {} exceeds the number of points {n}",
                self.estimator.precond_rank
            )));
        }
        Ok(())
    }

    /// Reorthogonalisation policy used by single-policy experiments.
    pub fn policy(&self) -> ReorthPolicy {
        self.estimator.i_orth[0]
    }
}

fn flatten(prefix: &str, v: &toml::Value, out: &mut Vec<(String, String)>) {
    match v {
        toml::Value::Table(t) => {
            for (k, child) in t {
                let key = if prefix.is_empty() { k.clone() } else { format!("{prefix}.{k}") };
                flatten(&key, child, out);
            }
        }
        other => out.push((prefix.to_string(), other.to_string())),
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn variant_names_round_trip() {
        for s in ["exact", "np-tss", "pc-tss", "np-t-imin", "pc-t-ceil", "pc-t-imax", "np-t-12"] {
            assert_eq!(s.parse::<Variant>().unwrap().to_string(), s);
        }
        for s in ["tss", "pc-t-0", "xx-tss", "np-t-"] {
            assert!(s.parse::<Variant>().is_err(), "{s}");
        }
        let v: Variant = "pc-tss".parse().unwrap();
        assert_eq!(v.label_with(ReorthPolicy::Window(2)), "pc-tss-2");
        assert_eq!(v.label_with(ReorthPolicy::Full), "pc-tss-full");
    }

    #[test]
    fn presets_validate_and_round_trip() {
        for kind in ExperimentKind::ALL {
            for cfg in [ExperimentConfig::preset(kind), ExperimentConfig::preset(kind).paper_scale()] {
                cfg.validate().unwrap();
                let text = cfg.to_toml_string().unwrap();
                assert_eq!(ExperimentConfig::from_toml_str(&text).unwrap(), cfg, "{kind}");
                let echo = cfg.echo().unwrap();
                assert_eq!(ExperimentConfig::from_echo(&echo).unwrap(), cfg, "{kind}");
            }
        }
    }

    #[test]
    fn invalid_configs_are_rejected() {
        let mut c = ExperimentConfig::preset(ExperimentKind::QuadSweep);
        c.estimator.i_min = 11;
        assert!(c.validate().is_err());
        let mut c = ExperimentConfig::preset(ExperimentKind::QuadSweep);
        c.replicates = 0;
        assert!(c.validate().is_err());
        let mut c = ExperimentConfig::preset(ExperimentKind::QuadSweep);
        c.dataset = DatasetSpec::Cube { n: 5000, d: 3, side: 16.0 };
        assert!(c.validate().is_err());
        let mut c = ExperimentConfig::preset(ExperimentKind::ReorthVariance);
        c.estimator.i_max = 300;
        assert!(c.validate().is_err());
        let mut c = ExperimentConfig::preset(ExperimentKind::Train2d);
        c.train = None;
        assert!(c.validate().is_err());
        let mut c = ExperimentConfig::preset(ExperimentKind::QuadSweep);
        c.estimator.variants = vec![Variant::Exact];
        assert!(c.validate().is_err());
        assert!(ExperimentConfig::from_toml_str("experiment = \"nope\"").is_err());
    }
}
