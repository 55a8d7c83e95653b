//! Linear-arithmetic constraints, SMT-LIB2 emission and an external solver driver.
//!
//! The solver is a child process spoken to over its standard streams. Every
//! `sat` model is re-evaluated against the asserted formulas with exact
//! rational arithmetic, so no answer is trusted on the solver's word alone.

mod emit;
mod session;
pub mod sexp;
mod term;

use std::path::PathBuf;

use thiserror::Error;

pub use emit::emit_script;
pub use session::{solve, Outcome, Session, SolverConfig, SolverStats, SOLVER_ENV};
pub use term::{Cmp, Formula, LinTerm, Model, Problem, Sort};

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum SmtError {
    #[error("solver executable {0:?} not found")]
    SolverNotFound(PathBuf),
    #[error("solver process died: {0}")]
    SolverCrashed(String),
    #[error("solver reported an error: {0}")]
    SolverError(String),
    #[error("unexpected solver response {0:?}")]
    UnexpectedResponse(String),
    #[error("malformed model: {0}")]
    MalformedModel(String),
    #[error("model does not satisfy the constraints: {0}")]
    ModelRejected(String),
    #[error("model has no value for {0}")]
    UnassignedVariable(String),
    #[error("variable {0} used before declaration")]
    Undeclared(String),
    #[error("variable {name} redeclared as {new:?} (was {old:?})")]
    Redeclared { name: String, old: Sort, new: Sort },
    #[error("solver could not decide: {0}")]
    Inconclusive(String),
    #[error("pop without matching push")]
    PopBase,
    #[error("i/o: {0}")]
    Io(String),
}
