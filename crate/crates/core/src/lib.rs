//! Frame shrinkage `T^+ Prox T` as a proximity operator in the metric `||x||_T = ||T x||`.
//!
//! The crate provides the dense operator layer ([`operator`]), a catalog of
//! closed-form proximity maps with numerical oracles ([`prox`]), the frame
//! shrinkage operator and its induced regularizer ([`frame`]), baseline solvers
//! for the analysis-sparsity problem ([`solvers`]) and the command-line front
//! end ([`cli`]).

pub mod cli;
pub mod error;
pub mod frame;
pub mod matrix_io;
pub mod operator;
pub mod prox;
pub mod report;
pub mod sampling;
pub mod solvers;

pub use error::{Error, Result};
pub use frame::{FrameShrinkage, InducedRegularizer};
pub use operator::{AnalysisOperator, TMetric};
pub use prox::{ProxFunction, ProxMap};
pub use report::{SolveReport, VerifyReport};
