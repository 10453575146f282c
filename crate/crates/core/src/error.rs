use thiserror::Error;

use crate::expr::{EvalError, ParseError};

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum Error {
    #[error(transparent)]
    Parse(#[from] ParseError),

    #[error("{source} at {var} = {at}")]
    Eval {
        source: EvalError,
        var: &'static str,
        at: f64,
    },

    #[error("f failed at t = {t}, u = {u}: {source}")]
    OperatorEval { source: EvalError, t: f64, u: f64 },

    #[error("parameters are {label}: {detail}")]
    Inadmissible { label: &'static str, detail: String },

    #[error("invalid parameters: {0}")]
    InvalidParams(String),

    #[error("expected {expected} samples, got {found}")]
    LengthMismatch { expected: usize, found: usize },

    #[error("non-finite value: {0}")]
    NonFinite(String),

    #[error("degenerate problem data: {0}")]
    Degenerate(String),

    #[error("a vanishes on [eta, T]: {0}")]
    ConditionB2(String),

    #[error("singular linear system: {0}")]
    Singular(String),

    #[error("eta = {eta} is not a node of the grid")]
    EtaNotOnGrid { eta: f64 },

    #[error("asymptotic limit {which} is inconclusive from sampling; declare it explicitly")]
    Inconclusive { which: &'static str },

    #[error("no start converged (best residual {best_residual:e})")]
    NoConvergence { best_residual: f64 },

    #[error("problem file, line {line}: {msg}")]
    ProblemFile { line: usize, msg: String },
}
