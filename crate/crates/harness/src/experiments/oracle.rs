//! Dense reference quantities over the sweep grid.

use ptss_core::gp::{nlml_and_grad_exact, GpModel};
use ptss_core::kernels::{gram_matrix, Hyper};
use ptss_core::linalg::symmetric_eigenvalues;
use ptss_core::operators::dense_cholesky_oracle;

use super::{hyper_label, labels_at, load, spec_at};
use crate::config::ExperimentConfig;
use crate::error::Result;
use crate::output::OracleRow;

pub(super) fn run(cfg: &ExperimentConfig) -> Result<Vec<OracleRow>> {
    let (data, dataset_labels) = load(cfg)?;
    let mut rows = Vec::new();
    for (p, &value) in cfg.sweep.values.iter().enumerate() {
        let spec = spec_at(cfg, value)?;
        let op = gram_matrix(&spec, &data)?;
        let y = labels_at(cfg, &data, dataset_labels.as_deref(), &spec, p)?;
        let eig = symmetric_eigenvalues(op.matrix())?;
        let (lambda_min, lambda_max) = (eig[0], eig[eig.len() - 1]);
        let dense = dense_cholesky_oracle(op.matrix(), &y)?;
        let model = GpModel::new(data.clone(), y, spec)?;
        let (nlml, grad) = nlml_and_grad_exact(&model, &Hyper::ALL)?;
        rows.push(OracleRow {
            param: hyper_label(cfg.sweep.param),
            value,
            n: data.n(),
            lambda_min,
            lambda_max,
            kappa: lambda_max / lambda_min,
            logdet: dense.logdet,
            quad_form: dense.quad_form,
            nlml: nlml.value,
            grad_f: grad.get(Hyper::F),
            grad_l: grad.get(Hyper::L),
            grad_mu: grad.get(Hyper::Mu),
        });
    }
    Ok(rows)
}
