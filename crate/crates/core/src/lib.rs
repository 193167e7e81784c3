//! Bi-level proximal optimization with simultaneous descent on both levels,
//! a sparse low-rank factorization instance, reference baselines and an
//! experiment harness.

#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod baselines;
pub mod bilevel;
pub mod cli;
pub mod data;
pub mod matrix;
pub mod metrics;
pub mod prox;
pub mod report;
pub mod slrf;

pub use bilevel::{solve, BilevelProblem, Interval, SolveOutcome, SolverConfig, SolverError};
pub use matrix::{DenseMatrix, MatrixError};
pub use metrics::MetricReport;
pub use report::{RunReport, Termination};
pub use slrf::{solve_slrf, SlrfConfig, SlrfParams};
