//! CSV output: `# key=value` config echo lines, a header row, then data rows
//! with floats in 17 significant digits.

use std::io::Write;

use crate::config::ExperimentConfig;
use crate::error::{HarnessError, Result};
use crate::stats::Summary;

pub fn fmt_float(v: f64) -> String {
    format!("{v:.16e}")
}

/// Statistics of one estimator variant at one sweep point.
#[derive(Debug, Clone, PartialEq)]
pub struct SweepRow {
    /// Swept hyperparameter name.
    pub param: String,
    pub value: f64,
    pub quantity: String,
    /// `[precond]-[truncation]-[i_orth]` label.
    pub variant: String,
    /// Truncation distribution, `none` for fixed truncation.
    pub distribution: String,
    /// Dense reference value.
    pub exact: f64,
    /// Condition-number estimate used by the run (NaN when not needed).
    pub kappa: f64,
    /// Signed error `estimate − exact` over the successful replicates.
    pub error: Summary,
    /// Standard deviation from exact enumeration over `Q` (NaN when the
    /// estimate also depends on fresh probes).
    pub exact_std: f64,
    /// `E[Q]` for TSS, `m` for fixed truncation.
    pub expected_cost: f64,
    /// Mean operator applications per replicate.
    pub mean_cost: f64,
    /// Mean preconditioner applications per replicate.
    pub mean_precond_applies: f64,
    pub failures: usize,
    pub failure_reason: String,
}

/// One optimiser state; the last row of a run has `step = iterations`
/// and NaN gradients.
#[derive(Debug, Clone, PartialEq)]
pub struct TrajectoryRow {
    pub variant: String,
    pub replicate: usize,
    pub step: usize,
    pub f: f64,
    pub l: f64,
    pub mu: f64,
    pub grad_f: f64,
    pub grad_l: f64,
    pub grad_mu: f64,
    /// Exact NLML when it was computed, else NaN.
    pub nlml: f64,
    pub failure: String,
}

/// Dense reference quantities at one sweep point.
#[derive(Debug, Clone, PartialEq)]
pub struct OracleRow {
    pub param: String,
    pub value: f64,
    pub n: usize,
    pub lambda_min: f64,
    pub lambda_max: f64,
    pub kappa: f64,
    pub logdet: f64,
    pub quad_form: f64,
    pub nlml: f64,
    pub grad_f: f64,
    pub grad_l: f64,
    pub grad_mu: f64,
}

pub trait CsvRow {
    fn columns() -> &'static [&'static str];
    fn cells(&self) -> Vec<String>;
}

impl CsvRow for SweepRow {
    fn columns() -> &'static [&'static str] {
        &[
            "param",
            "value",
            "quantity",
            "variant",
            "distribution",
            "exact",
            "kappa",
            "replicates",
            "mean_err",
            "std",
            "se",
            "se_band_lo",
            "se_band_hi",
            "spread_band_lo",
            "spread_band_hi",
            "exact_std",
            "expected_cost",
            "mean_cost",
            "mean_precond_applies",
            "failures",
            "failure_reason",
        ]
    }

    fn cells(&self) -> Vec<String> {
        let e = &self.error;
        vec![
            self.param.clone(),
            fmt_float(self.value),
            self.quantity.clone(),
            self.variant.clone(),
            self.distribution.clone(),
            fmt_float(self.exact),
            fmt_float(self.kappa),
            e.count.to_string(),
            fmt_float(e.mean),
            fmt_float(e.std),
            fmt_float(e.se),
            fmt_float(e.band_lo),
            fmt_float(e.band_hi),
            fmt_float(e.spread_lo),
            fmt_float(e.spread_hi),
            fmt_float(self.exact_std),
            fmt_float(self.expected_cost),
            fmt_float(self.mean_cost),
            fmt_float(self.mean_precond_applies),
            self.failures.to_string(),
            self.failure_reason.clone(),
        ]
    }
}

impl CsvRow for TrajectoryRow {
    fn columns() -> &'static [&'static str] {
        &[
            "variant", "replicate", "step", "f", "l", "mu", "grad_f", "grad_l", "grad_mu", "nlml", "failure",
        ]
    }

    fn cells(&self) -> Vec<String> {
        vec![
            self.variant.clone(),
            self.replicate.to_string(),
            self.step.to_string(),
            fmt_float(self.f),
            fmt_float(self.l),
            fmt_float(self.mu),
            fmt_float(self.grad_f),
            fmt_float(self.grad_l),
            fmt_float(self.grad_mu),
            fmt_float(self.nlml),
            self.failure.clone(),
        ]
    }
}

impl CsvRow for OracleRow {
    fn columns() -> &'static [&'static str] {
        &[
            "param",
            "value",
            "n",
            "lambda_min",
            "lambda_max",
            "kappa",
            "logdet",
            "quad_form",
            "nlml",
            "grad_f",
            "grad_l",
            "grad_mu",
        ]
    }

    fn cells(&self) -> Vec<String> {
        vec![
            self.param.clone(),
            fmt_float(self.value),
            self.n.to_string(),
            fmt_float(self.lambda_min),
            fmt_float(self.lambda_max),
            fmt_float(self.kappa),
            fmt_float(self.logdet),
            fmt_float(self.quad_form),
            fmt_float(self.nlml),
            fmt_float(self.grad_f),
            fmt_float(self.grad_l),
            fmt_float(self.grad_mu),
        ]
    }
}

#[derive(Debug, Clone, PartialEq)]
pub enum Rows {
    Sweep(Vec<SweepRow>),
    Trajectory(Vec<TrajectoryRow>),
    Oracle(Vec<OracleRow>),
}

/// Everything an experiment produces.
#[derive(Debug, Clone, PartialEq)]
pub struct ExperimentOutput {
    pub config: ExperimentConfig,
    pub rows: Rows,
}

impl ExperimentOutput {
    pub fn sweep_rows(&self) -> &[SweepRow] {
        match &self.rows {
            Rows::Sweep(r) => r,
            _ => &[],
        }
    }

    pub fn trajectory_rows(&self) -> &[TrajectoryRow] {
        match &self.rows {
            Rows::Trajectory(r) => r,
            _ => &[],
        }
    }

    pub fn oracle_rows(&self) -> &[OracleRow] {
        match &self.rows {
            Rows::Oracle(r) => r,
            _ => &[],
        }
    }

    pub fn write_csv<W: Write>(&self, mut w: W) -> Result<()> {
        for (k, v) in self.config.echo()? {
            writeln!(w, "# {k}={v}")?;
        }
        match &self.rows {
            Rows::Sweep(r) => write_rows(&mut w, r),
            Rows::Trajectory(r) => write_rows(&mut w, r),
            Rows::Oracle(r) => write_rows(&mut w, r),
        }
    }

    pub fn to_csv_string(&self) -> Result<String> {
        let mut buf = Vec::new();
        self.write_csv(&mut buf)?;
        String::from_utf8(buf).map_err(|e| HarnessError::Config(format!("non-UTF-8 output: {e}")))
    }
}

fn write_rows<W: Write, R: CsvRow>(w: W, rows: &[R]) -> Result<()> {
    let mut out = csv::Writer::from_writer(w);
    out.write_record(R::columns())?;
    for r in rows {
        out.write_record(r.cells())?;
    }
    out.flush()?;
    Ok(())
}

/// Config echo pairs from the `# key=value` lines at the top of a CSV.
pub fn read_echo(csv_text: &str) -> Vec<(String, String)> {
    csv_text
        .lines()
        .map_while(|l| l.strip_prefix("# "))
        .filter_map(|l| l.split_once('='))
        .map(|(k, v)| (k.to_string(), v.to_string()))
        .collect()
}
