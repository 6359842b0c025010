//! Distributions of the random truncation index `Q` on `{i_min, …, i_max}`,
//! the Γ factors that control TSS variance, and Γ-optimal distributions.
//!
//! Probabilities are kept in `f64` regardless of the estimator scalar type.

use std::fmt;
use std::str::FromStr;

use crate::error::{Error, Result};
use crate::rng::{uniform01, Rng};

/// Smallest probability mass a distribution may carry.
pub const MASS_FLOOR: f64 = 1e-300;

/// Which estimator a Γ factor or optimal distribution refers to.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Flavor {
    Solve,
    LogQF,
}

impl Flavor {
    /// Exponent multiplier `c` in `ϱ^{c(j−1)}`.
    fn power(self) -> i32 {
        match self {
            Self::Solve => 2,
            Self::LogQF => 4,
        }
    }
}

impl FromStr for Flavor {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "solve" => Ok(Self::Solve),
            "logqf" => Ok(Self::LogQF),
            _ => Err(Error::InvalidArgument(format!("unknown flavor `{s}`"))),
        }
    }
}

impl fmt::Display for Flavor {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Self::Solve => "solve",
            Self::LogQF => "logqf",
        })
    }
}

fn check_kappa(kappa: f64) -> Result<()> {
    if !(kappa >= 1.0) || !kappa.is_finite() {
        return Err(Error::InvalidConditionNumber(kappa));
    }
    Ok(())
}

/// `ϱ_Solve = (√κ − 1)/(√κ + 1)`.
pub fn rho_solve(kappa: f64) -> Result<f64> {
    check_kappa(kappa)?;
    let s = kappa.sqrt();
    Ok((s - 1.0) / (s + 1.0))
}

/// `ϱ_LogQF = (√(κ+1) − 1)/(√(κ+1) + 1)`.
pub fn rho_logqf(kappa: f64) -> Result<f64> {
    check_kappa(kappa)?;
    let s = (kappa + 1.0).sqrt();
    Ok((s - 1.0) / (s + 1.0))
}

pub fn rho(flavor: Flavor, kappa: f64) -> Result<f64> {
    match flavor {
        Flavor::Solve => rho_solve(kappa),
        Flavor::LogQF => rho_logqf(kappa),
    }
}

/// Probability mass function of `Q` on a contiguous support.
#[derive(Debug, Clone, PartialEq)]
pub struct TruncationDistribution {
    i_min: usize,
    i_max: usize,
    pmf: Vec<f64>,
    cdf: Vec<f64>,
}

impl TruncationDistribution {
    /// Takes an explicit pmf indexed `i_min..=i_max`; it must sum to one
    /// within `1e-12` and every entry must be at least [`MASS_FLOOR`].
    pub fn new(i_min: usize, i_max: usize, pmf: Vec<f64>) -> Result<Self> {
        check_support(i_min, i_max)?;
        if pmf.len() != i_max - i_min + 1 {
            return Err(Error::DimensionMismatch {
                expected: i_max - i_min + 1,
                got: pmf.len(),
            });
        }
        for (k, p) in pmf.iter().enumerate() {
            if !p.is_finite() {
                return Err(Error::NonFinite(format!("probability at j = {}", i_min + k)));
            }
            if !(*p >= MASS_FLOOR) {
                return Err(Error::MassUnderflow {
                    index: i_min + k,
                    mass: *p,
                });
            }
        }
        let total: f64 = pmf.iter().sum();
        if (total - 1.0).abs() > 1e-12 {
            return Err(Error::InvalidArgument(format!("probabilities sum to {total}, not 1")));
        }
        let mut acc = 0.0;
        let mut cdf: Vec<f64> = pmf
            .iter()
            .map(|p| {
                acc += p;
                acc
            })
            .collect();
        *cdf.last_mut().expect("non-empty support") = 1.0;
        Ok(Self { i_min, i_max, pmf, cdf })
    }

    /// Normalises nonnegative weights over the support.
    pub fn from_weights(i_min: usize, i_max: usize, weights: &[f64]) -> Result<Self> {
        check_support(i_min, i_max)?;
        let total: f64 = weights.iter().sum();
        if !(total > 0.0) || !total.is_finite() {
            return Err(Error::InvalidArgument(format!("weights sum to {total}")));
        }
        let pmf: Vec<f64> = weights.iter().map(|w| w / total).collect();
        Self::new(i_min, i_max, pmf)
    }

    pub fn point_mass(j: usize) -> Result<Self> {
        Self::new(j, j, vec![1.0])
    }

    pub fn uniform(i_min: usize, i_max: usize) -> Result<Self> {
        check_support(i_min, i_max)?;
        let w = vec![1.0; i_max - i_min + 1];
        Self::from_weights(i_min, i_max, &w)
    }

    pub fn i_min(&self) -> usize {
        self.i_min
    }

    pub fn i_max(&self) -> usize {
        self.i_max
    }

    pub fn len(&self) -> usize {
        self.pmf.len()
    }

    pub fn is_empty(&self) -> bool {
        self.pmf.is_empty()
    }

    pub fn support(&self) -> std::ops::RangeInclusive<usize> {
        self.i_min..=self.i_max
    }

    pub fn pmf(&self) -> &[f64] {
        &self.pmf
    }

    /// `P(Q = j)`, zero off the support.
    pub fn prob(&self, j: usize) -> f64 {
        if j < self.i_min || j > self.i_max {
            0.0
        } else {
            self.pmf[j - self.i_min]
        }
    }

    /// `P(Q ≥ j)`.
    pub fn survival(&self, j: usize) -> f64 {
        if j <= self.i_min {
            1.0
        } else if j > self.i_max {
            0.0
        } else {
            self.pmf[j - self.i_min..].iter().sum()
        }
    }

    pub fn expected_q(&self) -> f64 {
        self.support().zip(&self.pmf).map(|(j, p)| j as f64 * p).sum()
    }

    /// `⌈E[Q]⌉`, the matched-cost deterministic truncation level.
    pub fn expected_q_ceil(&self) -> usize {
        // guard against E[Q] = 7.000000000000001 style round-off
        let e = self.expected_q();
        let r = e.round();
        if (e - r).abs() <= 1e-9 * e.max(1.0) {
            r as usize
        } else {
            e.ceil() as usize
        }
    }

    /// Inverse-CDF draw: the smallest `j` with `u < F(j)`.
    pub fn sample(&self, rng: &mut Rng) -> usize {
        self.quantile(uniform01(rng))
    }

    pub fn quantile(&self, u: f64) -> usize {
        let k = self.cdf.partition_point(|c| *c <= u);
        self.i_min + k.min(self.pmf.len() - 1)
    }
}

fn check_support(i_min: usize, i_max: usize) -> Result<()> {
    if i_min == 0 || i_max < i_min {
        return Err(Error::InvalidSupport { i_min, i_max });
    }
    Ok(())
}

/// `P(Q = j) ∝ e^{−c j}`.
pub fn make_exponential(c: f64, i_min: usize, i_max: usize) -> Result<TruncationDistribution> {
    check_support(i_min, i_max)?;
    if !(c > 0.0) || !c.is_finite() {
        return Err(Error::InvalidArgument(format!("decay rate must be positive, got {c}")));
    }
    let w: Vec<f64> = (i_min..=i_max).map(|j| (-c * (j - i_min) as f64).exp()).collect();
    TruncationDistribution::from_weights(i_min, i_max, &w)
}

/// `P(Q = j) ∝ 2^{−j}`.
pub fn make_geometric(i_min: usize, i_max: usize) -> Result<TruncationDistribution> {
    check_support(i_min, i_max)?;
    let w: Vec<f64> = (i_min..=i_max).map(|j| 0.5f64.powi((j - i_min) as i32)).collect();
    TruncationDistribution::from_weights(i_min, i_max, &w)
}

/// Γ-minimising distribution: `P ∝ ϱ_Solve^i` or `P ∝ ϱ_LogQF^{2i}`. When
/// `ϱ = 0` all mass sits on `i_min` and the support collapses to `{i_min}`.
pub fn make_gamma_optimal(
    flavor: Flavor,
    kappa: f64,
    i_min: usize,
    i_max: usize,
) -> Result<TruncationDistribution> {
    check_support(i_min, i_max)?;
    let r = rho(flavor, kappa)?;
    let base = match flavor {
        Flavor::Solve => r,
        Flavor::LogQF => r * r,
    };
    if base == 0.0 {
        return TruncationDistribution::point_mass(i_min);
    }
    let w: Vec<f64> = (i_min..=i_max).map(|j| base.powi((j - i_min) as i32)).collect();
    TruncationDistribution::from_weights(i_min, i_max, &w)
}

/// `Γ = Σ ϱ^{c(j−1)} / P(Q = j)` with its flavor and `ϱ`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct GammaFactor {
    pub value: f64,
    pub flavor: Flavor,
    pub rho: f64,
}

/// Exact Γ for a distribution (`0⁰ = 1`).
pub fn gamma_factor(dist: &TruncationDistribution, flavor: Flavor, kappa: f64) -> Result<GammaFactor> {
    let r = rho(flavor, kappa)?;
    let c = flavor.power();
    let mut value = 0.0;
    for (j, p) in dist.support().zip(dist.pmf()) {
        if *p <= 0.0 {
            return Err(Error::MassUnderflow { index: j, mass: *p });
        }
        value += r.powi(c * (j as i32 - 1)) / p;
    }
    Ok(GammaFactor { value, flavor, rho: r })
}

/// Minimum of Γ over all distributions on `{i_min..i_max}`:
/// `ϱ^{c(i_min−1)} (ϱ^{cL/2} − 1)² / (ϱ^{c/2} − 1)²`, `L = i_max − i_min + 1`.
pub fn gamma_optimal_closed_form(flavor: Flavor, kappa: f64, i_min: usize, i_max: usize) -> Result<f64> {
    check_support(i_min, i_max)?;
    let r = rho(flavor, kappa)?;
    let c = flavor.power();
    let len = (i_max - i_min + 1) as i32;
    let h = r.powi(c / 2);
    Ok(r.powi(c * (i_min as i32 - 1)) * (h.powi(len) - 1.0).powi(2) / (h - 1.0).powi(2))
}

/// Minimiser and minimum of `Σ_{i=m1}^{m2} tⁱ / p_i` over the probability
/// simplex: `p_i ∝ t^{i/2}` and `t^{m1}(t^{L/2} − 1)²/(t^{1/2} − 1)²`
/// (`L²` at `t = 1`).
pub fn minimize_weighted_sum(t: f64, m1: usize, m2: usize) -> Result<(TruncationDistribution, f64)> {
    check_support(m1, m2)?;
    if !(t > 0.0) || !t.is_finite() {
        return Err(Error::InvalidArgument(format!("t must be positive, got {t}")));
    }
    let len = (m2 - m1 + 1) as i32;
    let s = t.sqrt();
    let w: Vec<f64> = (0..len).map(|k| s.powi(k)).collect();
    let dist = TruncationDistribution::from_weights(m1, m2, &w)?;
    let min = if t == 1.0 {
        (len * len) as f64
    } else {
        t.powi(m1 as i32) * (s.powi(len) - 1.0).powi(2) / (s - 1.0).powi(2)
    };
    Ok((dist, min))
}
