//! Sequential re-estimation of linear and logistic regression models with a
//! targeted ridge penalty that shrinks each new estimate toward the previous
//! one.

pub mod baselines;
pub mod cli;
pub mod error;
mod linalg;
pub mod linear;
pub mod logistic;
pub mod model;
pub mod sim;
pub mod tuning;

pub use error::{Error, Result};
pub use linalg::largest_singular_value;
pub use model::{
    align_batch, assemble_target, mixture_target, Batch, CoefficientVector, CovariateRegistry,
    EstimatorState, Family, HistoryRecord, TargetSpec, TargetWeights,
};
