use std::fs::File;
use std::io::{self, BufWriter, Write};
use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use ptss_harness::config::DatasetSpec;
use ptss_harness::{run_experiment, ExperimentConfig, ExperimentKind, HarnessError, Result};

#[derive(Parser)]
#[command(name = "ptss", version, about = "Truncated-sum Krylov estimator experiments")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Truncation bias of the inverse quadratic form across a length-scale grid.
    QuadSweep(RunArgs),
    /// Truncation distributions with and without preconditioning.
    DistCompare(RunArgs),
    /// Reorthogonalisation window versus estimator variance.
    ReorthVariance(RunArgs),
    /// Stochastic NLML and gradient errors across a hyperparameter grid.
    NlmlSweep(RunArgs),
    /// Two-parameter training on prior-sampled labels.
    #[command(name = "train-2d")]
    Train2d(RunArgs),
    /// Three-parameter training on the Franke surface or a CSV dataset.
    #[command(name = "train-3d")]
    Train3d(RunArgs),
    /// Dense reference values over the sweep grid.
    Oracle(RunArgs),
}

#[derive(Args)]
struct RunArgs {
    /// TOML config; the experiment's preset is used when absent.
    #[arg(long)]
    config: Option<PathBuf>,
    /// Write the CSV here instead of stdout.
    #[arg(long)]
    out: Option<PathBuf>,
    #[arg(long)]
    seed: Option<u64>,
    #[arg(long)]
    replicates: Option<usize>,
    /// Worker threads (0 = all cores). Output does not depend on this.
    #[arg(long, default_value_t = 0)]
    threads: usize,
    /// Use the large dataset sizes.
    #[arg(long)]
    paper_scale: bool,
    /// Number of data points (CSV datasets: subsample size).
    #[arg(long)]
    n: Option<usize>,
    #[arg(long)]
    i_min: Option<usize>,
    #[arg(long)]
    i_max: Option<usize>,
    #[arg(long)]
    precond_rank: Option<usize>,
    #[arg(long)]
    k_z: Option<usize>,
    /// Training iterations.
    #[arg(long)]
    iterations: Option<usize>,
    /// Comma-separated sweep values.
    #[arg(long, value_delimiter = ',')]
    grid: Option<Vec<f64>>,
    /// Print the resolved config as TOML and exit.
    #[arg(long)]
    print_config: bool,
}

fn resolve(kind: ExperimentKind, a: &RunArgs) -> Result<ExperimentConfig> {
    let mut cfg = match &a.config {
        Some(path) => {
            let cfg = ExperimentConfig::load(path)?;
            if cfg.experiment != kind {
                return Err(HarnessError::Config(format!(
                    "{} holds a `{}` config, not `{kind}`",
                    path.display(),
                    cfg.experiment
                )));
            }
            cfg
        }
        None => ExperimentConfig::preset(kind),
    };
    if a.paper_scale {
        cfg = cfg.paper_scale();
    }
    if let Some(v) = a.seed {
        cfg.seed = v;
    }
    if let Some(v) = a.replicates {
        cfg.replicates = v;
    }
    if let Some(v) = a.n {
        match &mut cfg.dataset {
            DatasetSpec::Cube { n, .. } | DatasetSpec::Franke { n, .. } => *n = v,
            DatasetSpec::Csv { subsample_n, .. } => *subsample_n = Some(v),
        }
    }
    if let Some(v) = a.i_min {
        cfg.estimator.i_min = v;
    }
    if let Some(v) = a.i_max {
        cfg.estimator.i_max = v;
    }
    if let Some(v) = a.precond_rank {
        cfg.estimator.precond_rank = v;
    }
    if let Some(v) = a.k_z {
        cfg.estimator.k_z = v;
    }
    if let Some(v) = a.iterations {
        match cfg.train.as_mut() {
            Some(t) => t.iterations = v,
            None => return Err(HarnessError::Config(format!("`{kind}` has no training iterations"))),
        }
    }
    if let Some(v) = &a.grid {
        cfg.sweep.values = v.clone();
    }
    cfg.validate()?;
    Ok(cfg)
}

fn execute(kind: ExperimentKind, a: &RunArgs) -> Result<()> {
    let cfg = resolve(kind, a)?;
    if a.print_config {
        print!("{}", cfg.to_toml_string()?);
        return Ok(());
    }
    let output = run_experiment(&cfg, a.threads)?;
    match &a.out {
        Some(path) => {
            let file = File::create(path).map_err(|source| HarnessError::Io {
                path: path.clone(),
                source,
            })?;
            let mut w = BufWriter::new(file);
            output.write_csv(&mut w)?;
            w.flush()?;
        }
        None => output.write_csv(io::stdout().lock())?,
    }
    Ok(())
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let (kind, args) = match &cli.command {
        Command::QuadSweep(a) => (ExperimentKind::QuadSweep, a),
        Command::DistCompare(a) => (ExperimentKind::DistCompare, a),
        Command::ReorthVariance(a) => (ExperimentKind::ReorthVariance, a),
        Command::NlmlSweep(a) => (ExperimentKind::NlmlSweep, a),
        Command::Train2d(a) => (ExperimentKind::Train2d, a),
        Command::Train3d(a) => (ExperimentKind::Train3d, a),
        Command::Oracle(a) => (ExperimentKind::Oracle, a),
    };
    match execute(kind, args) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::FAILURE
        }
    }
}
