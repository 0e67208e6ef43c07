//! Surrogate modelling, optimization and benchmarking on hierarchical
//! mixed-discrete design spaces.

pub mod bench;
pub mod bo;
pub mod gp;
pub mod nsga2;
pub mod record;

use thiserror::Error;

pub use nsga2::{Integration, Nsga2Config};
pub use record::{EvalRecord, Evaluator, RecordError, RunHeader, RunRecord, RunWriter};

#[derive(Debug, Error)]
pub enum OptimError {
    #[error("invalid configuration: {0}")]
    Config(String),
    #[error(transparent)]
    Sampling(#[from] archopt_core::sampling::SamplingError),
    #[error(transparent)]
    Record(#[from] RecordError),
    #[error(transparent)]
    Gp(#[from] gp::GpError),
    #[error("{0}")]
    NoViablePoints(String),
}
