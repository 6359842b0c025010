//! Randomised-truncation Krylov estimators for linear solves, log-determinants
//! and their hyperparameter derivatives, with dense reference oracles and a
//! Gaussian-process training loop built on top.
//!
//! Numerical code is generic over [`Scalar`] (`f32` or `f64`); the `*64`
//! aliases at the crate root fix the double-precision types.

pub mod error;
pub mod estimators;
pub mod gp;
pub mod kernels;
pub mod krylov;
pub mod linalg;
pub mod operators;
pub mod optim;
pub mod precond;
pub mod rng;
pub mod scalar;
pub mod truncation;

pub use error::{Error, Result};
pub use estimators::{SolverMode, TssScalarResult, TssSolveResult, VarianceBound};
pub use gp::{EstimatorConfig, GpModel, NlmlGradient, NlmlValue, PrecondSettings};
pub use kernels::{Dataset, Hyper, KernelFamily, KernelSpec};
pub use krylov::{CgTrace, LanczosTrace, ReorthPolicy};
pub use linalg::{Matrix, SymTridiagonal};
pub use operators::{DenseOperator, DenseOracleResult, DiagonalOperator, LinearOperator, SpdOperator};
pub use precond::{LowRankShiftPreconditioner, Preconditioner};
pub use rng::Rng;
pub use scalar::Scalar;
pub use truncation::{Flavor, GammaFactor, TruncationDistribution};

pub type Matrix64 = Matrix<f64>;
pub type Dataset64 = Dataset<f64>;
pub type KernelSpec64 = KernelSpec<f64>;
pub type DenseOperator64 = DenseOperator<f64>;
pub type GpModel64 = GpModel<f64>;
pub type CgTrace64 = CgTrace<f64>;
pub type LanczosTrace64 = LanczosTrace<f64>;
pub type Preconditioner64 = LowRankShiftPreconditioner<f64>;

pub type Matrix32 = Matrix<f32>;
pub type Dataset32 = Dataset<f32>;
pub type KernelSpec32 = KernelSpec<f32>;
pub type DenseOperator32 = DenseOperator<f32>;
pub type GpModel32 = GpModel<f32>;
