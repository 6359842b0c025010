//! Replicate aggregation.

/// Normal quantile for a two-sided 95% band.
pub const Z95: f64 = 1.96;

/// Mean, spread and 95% bands of a replicate sample. `band_*` is the
/// standard-error band `mean ± 1.96·std/√k`; `spread_*` is `mean ± 1.96·std`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Summary {
    pub count: usize,
    pub mean: f64,
    /// Sample standard deviation (zero for a single value).
    pub std: f64,
    pub se: f64,
    pub band_lo: f64,
    pub band_hi: f64,
    pub spread_lo: f64,
    pub spread_hi: f64,
}

impl Summary {
    /// Summary of `values`, accumulated in order. Empty input gives NaN
    /// statistics with a zero count.
    pub fn from_values(values: &[f64]) -> Self {
        let k = values.len();
        if k == 0 {
            return Self {
                count: 0,
                mean: f64::NAN,
                std: f64::NAN,
                se: f64::NAN,
                band_lo: f64::NAN,
                band_hi: f64::NAN,
                spread_lo: f64::NAN,
                spread_hi: f64::NAN,
            };
        }
        let mean = values.iter().sum::<f64>() / k as f64;
        let std = if k > 1 {
            (values.iter().map(|v| (v - mean) * (v - mean)).sum::<f64>() / (k - 1) as f64).sqrt()
        } else {
            0.0
        };
        let se = std / (k as f64).sqrt();
        Self {
            count: k,
            mean,
            std,
            se,
            band_lo: mean - Z95 * se,
            band_hi: mean + Z95 * se,
            spread_lo: mean - Z95 * std,
            spread_hi: mean + Z95 * std,
        }
    }

    /// A deterministic quantity (zero spread).
    pub fn point(value: f64) -> Self {
        Self::from_values(&[value])
    }
}

/// Median, averaging the middle pair for even lengths. NaNs sort last.
pub fn median(values: &[f64]) -> f64 {
    if values.is_empty() {
        return f64::NAN;
    }
    let mut v = values.to_vec();
    v.sort_by(f64::total_cmp);
    let m = v.len() / 2;
    if v.len() % 2 == 1 {
        v[m]
    } else {
        0.5 * (v[m - 1] + v[m])
    }
}
