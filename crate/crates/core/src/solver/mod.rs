//! Exact desk-scale MILP engine: bounded two-phase simplex, best-bound
//! branch-and-bound over binaries, and an exhaustive enumeration oracle.

mod branch;
mod oracle;
mod problem;
mod simplex;

use thiserror::Error;

pub use branch::{
    solve_milp, BoundTrace, BranchingRule, MilpResult, MilpStatus, NodeSelection, SolveOptions,
};
pub use oracle::{enumerate_oracle, MAX_ORACLE_BINARIES};
pub use problem::{Constraint, MilpProblem, Objective, ObjectiveSense, RowSense, Variable};
pub use simplex::{solve_lp, LpResult, LpStatus};

#[derive(Debug, Error, Clone, PartialEq)]
pub enum ProblemError {
    #[error("column {column} referenced by row {row:?} does not exist")]
    ColumnOutOfRange { row: Option<usize>, column: usize },
    #[error("column {column} has bounds [{lower}, {upper}]")]
    BadBounds { column: usize, lower: f64, upper: f64 },
    #[error("integer column {column} is not binary")]
    NonBinaryInteger { column: usize },
    #[error("non-finite coefficient in row {row:?}, column {column}")]
    NonFinite { row: Option<usize>, column: usize },
    #[error("problem has no variables")]
    Empty,
}

#[derive(Debug, Error, Clone, PartialEq)]
pub enum SolverError {
    #[error(transparent)]
    Problem(#[from] ProblemError),
    #[error("numerical breakdown: {0}")]
    Numerical(String),
    #[error("LP relaxation is unbounded")]
    Unbounded,
    #[error("enumeration oracle supports at most {max} binaries, got {got}")]
    TooManyBinaries { got: usize, max: usize },
    #[error("invalid solve options: {0}")]
    Options(String),
}
