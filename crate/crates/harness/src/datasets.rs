//! Synthetic and file-backed datasets.

use std::path::Path;

use ptss_core::kernels::Dataset;
use ptss_core::linalg::Matrix;
use ptss_core::rng::{standard_normal, uniform01, Rng};

use crate::config::DatasetSpec;
use crate::error::{HarnessError, Result};

/// Standard deviations below this are treated as zero when z-scoring.
pub const STD_FLOOR: f64 = 1e-12;

/// I.i.d. uniform points in `[0, side]^d`.
pub fn generate_cube_dataset(n: usize, d: usize, side: f64, rng: &mut Rng) -> Result<Dataset<f64>> {
    if n == 0 || d == 0 || !(side > 0.0) {
        return Err(HarnessError::Config(format!(
            "cube dataset needs n, d ≥ 1 and side > 0 (n={n}, d={d}, side={side})"
        )));
    }
    let x = Matrix::from_fn(n, d, |_, _| side * uniform01(rng));
    Ok(Dataset::new(x)?)
}

/// The four-exponential Franke surface on `[0, 1]²`.
pub fn franke(x: f64, y: f64) -> f64 {
    let (a, b) = (9.0 * x, 9.0 * y);
    0.75 * (-((a - 2.0).powi(2) + (b - 2.0).powi(2)) / 4.0).exp()
        + 0.75 * (-(a + 1.0).powi(2) / 49.0 - (b + 1.0) / 10.0).exp()
        + 0.5 * (-((a - 7.0).powi(2) + (b - 3.0).powi(2)) / 4.0).exp()
        - 0.2 * (-(a - 4.0).powi(2) - (b - 7.0).powi(2)).exp()
}

/// Uniform points in `[0, 1]²` with labels `franke(x) + N(0, noise_sd²)`.
pub fn generate_franke_dataset(n: usize, noise_sd: f64, rng: &mut Rng) -> Result<(Dataset<f64>, Vec<f64>)> {
    if n == 0 || !(noise_sd >= 0.0) {
        return Err(HarnessError::Config(format!(
            "Franke dataset needs n ≥ 1 and noise_sd ≥ 0 (n={n}, noise_sd={noise_sd})"
        )));
    }
    let data = generate_cube_dataset(n, 2, 1.0, rng)?;
    let labels = (0..n)
        .map(|i| {
            let p = data.point(i);
            franke(p[0], p[1]) + noise_sd * standard_normal::<f64>(rng)
        })
        .collect();
    Ok((data, labels))
}

/// Reads a numeric CSV with a header row. Every column except `label_column`
/// is a feature and is z-scored over all rows; then `subsample_n` rows are
/// drawn uniformly without replacement, keeping file order.
pub fn ingest_csv_dataset(
    path: &Path,
    label_column: &str,
    subsample_n: Option<usize>,
    rng: &mut Rng,
) -> Result<(Dataset<f64>, Vec<f64>)> {
    let data_err = |message: String| HarnessError::Data {
        path: path.to_path_buf(),
        message,
    };
    let file = std::fs::File::open(path).map_err(|source| HarnessError::Io {
        path: path.to_path_buf(),
        source,
    })?;
    let mut reader = csv::ReaderBuilder::new().has_headers(true).trim(csv::Trim::All).from_reader(file);
    let headers = reader.headers()?.clone();
    let label_idx = headers
        .iter()
        .position(|h| h == label_column)
        .ok_or_else(|| data_err(format!("label column `{label_column}` not found")))?;
    if headers.len() < 2 {
        return Err(data_err("need at least one feature column besides the label".into()));
    }
    let mut features: Vec<Vec<f64>> = Vec::new();
    let mut labels = Vec::new();
    for (row, record) in reader.records().enumerate() {
        let record = record?;
        let mut feats = Vec::with_capacity(headers.len() - 1);
        for (col, cell) in record.iter().enumerate() {
            let v: f64 = cell.parse().map_err(|_| {
                data_err(format!(
                    "row {}: column `{}` is not numeric: `{cell}`",
                    row + 1,
                    &headers[col]
                ))
            })?;
            if !v.is_finite() {
                return Err(data_err(format!("row {}: column `{}` is not finite", row + 1, &headers[col])));
            }
            if col == label_idx {
                labels.push(v);
            } else {
                feats.push(v);
            }
        }
        features.push(feats);
    }
    if features.is_empty() {
        return Err(data_err("no data rows".into()));
    }
    zscore_columns(&mut features);

    let rows = features.len();
    let keep: Vec<usize> = match subsample_n {
        None => (0..rows).collect(),
        Some(k) if k > rows => {
            return Err(data_err(format!("cannot subsample {k} rows from {rows}")));
        }
        Some(k) => {
            let mut idx = rand::seq::index::sample(rng, rows, k).into_vec();
            idx.sort_unstable();
            idx
        }
    };
    let points: Vec<Vec<f64>> = keep.iter().map(|i| features[*i].clone()).collect();
    let labels = keep.iter().map(|i| labels[*i]).collect();
    Ok((Dataset::from_points(&points)?, labels))
}

/// In-place `(x − mean)/std` per column, sample standard deviation floored at
/// [`STD_FLOOR`] (constant columns become zero).
pub fn zscore_columns(rows: &mut [Vec<f64>]) {
    let n = rows.len();
    let d = rows.first().map_or(0, Vec::len);
    for j in 0..d {
        let mean = rows.iter().map(|r| r[j]).sum::<f64>() / n as f64;
        let ss: f64 = rows.iter().map(|r| (r[j] - mean).powi(2)).sum();
        let std = if n > 1 { (ss / (n - 1) as f64).sqrt() } else { 0.0 };
        let std = std.max(STD_FLOOR);
        for r in rows.iter_mut() {
            r[j] = (r[j] - mean) / std;
        }
    }
}

/// Points and, for Franke and CSV data, labels.
pub fn load_dataset(spec: &DatasetSpec, rng: &mut Rng) -> Result<(Dataset<f64>, Option<Vec<f64>>)> {
    match spec {
        DatasetSpec::Cube { n, d, side } => Ok((generate_cube_dataset(*n, *d, *side, rng)?, None)),
        DatasetSpec::Franke { n, noise_sd } => {
            let (data, y) = generate_franke_dataset(*n, *noise_sd, rng)?;
            Ok((data, Some(y)))
        }
        DatasetSpec::Csv {
            path,
            label_column,
            subsample_n,
        } => {
            let (data, y) = ingest_csv_dataset(Path::new(path), label_column, *subsample_n, rng)?;
            Ok((data, Some(y)))
        }
    }
}
