//! Standard-form linear programs and an embedded simplex solver.

mod audit;
mod problem;
mod simplex;

pub use audit::{check_feasible, ConstraintRef, Violation};
pub use problem::{LpBuilder, Quantity, SparseRow, StandardLp, VarKey, VarRegistry};
pub use simplex::{solve_lp, LpSolution, LpStatus, SolverOptions};

#[derive(Debug, thiserror::Error, PartialEq)]
pub enum LpError {
    #[error("malformed linear program: {0}")]
    Structural(String),
    #[error("simplex stalled after {iterations} iterations")]
    Stalled { iterations: usize },
    #[error("numerical failure: {0}")]
    Numerical(String),
}
