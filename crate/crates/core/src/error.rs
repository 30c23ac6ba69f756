use thiserror::Error;

/// Errors raised by the solver, kernels, oracle and cost model.
#[derive(Debug, Error, Clone, PartialEq)]
pub enum Error {
    #[error("dimension mismatch: {0}")]
    Dimension(String),
    #[error("matrix not positive definite (pivot {pivot})")]
    NotPositiveDefinite { pivot: usize },
    #[error("invalid problem: {0}")]
    InvalidProblem(String),
    #[error("invalid model: {0}")]
    InvalidModel(String),
    #[error("non-finite value in {what} at iteration {iteration}")]
    Divergence { iteration: usize, what: &'static str },
    #[error("invalid option: {0}")]
    InvalidOption(String),
    #[error("invalid kernel config: {0}")]
    InvalidConfig(String),
    #[error("oracle refuses m = {m} constraints (limit {limit})")]
    TooManyConstraints { m: usize, limit: usize },
    #[error("oracle found no feasible active set")]
    OracleInfeasible,
    #[error("benchmark: {0}")]
    Bench(String),
    #[error(transparent)]
    Parse(#[from] ParseError),
}

/// Text-format errors. Every variant carries the 1-based line it refers to.
#[derive(Debug, Error, Clone, PartialEq)]
pub enum ParseError {
    #[error("line {line}: malformed header: {msg}")]
    Header { line: usize, msg: String },
    #[error("line {line}: dimension mismatch: {msg}")]
    Dimension { line: usize, msg: String },
    #[error("line {line}: not a number: {token:?}")]
    Number { line: usize, token: String },
    #[error("line {line}: {msg}")]
    Section { line: usize, msg: String },
    #[error("line {line}: unknown key {key:?}")]
    UnknownKey { line: usize, key: String },
}

impl ParseError {
    pub fn line(&self) -> usize {
        match self {
            ParseError::Header { line, .. }
            | ParseError::Dimension { line, .. }
            | ParseError::Number { line, .. }
            | ParseError::Section { line, .. }
            | ParseError::UnknownKey { line, .. } => *line,
        }
    }
}
