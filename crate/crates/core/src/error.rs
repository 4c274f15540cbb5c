use thiserror::Error;

/// Errors raised by the library. The CLI maps each variant onto an exit category.
#[derive(Debug, Clone, PartialEq, Error)]
pub enum Error {
    #[error("invalid shift: {0}")]
    InvalidShift(String),
    #[error("invalid word: {0}")]
    InvalidWord(String),
    #[error("invalid subset: {0}")]
    InvalidSubset(String),
    #[error("invalid measure: {0}")]
    InvalidMeasure(String),
    #[error("insufficient word length: need {needed} symbols, have {available}")]
    InsufficientLength { needed: usize, available: usize },
    #[error("configuration error: {0}")]
    Config(String),
    #[error("degenerate problem: {0}")]
    Degenerate(String),
    #[error("infeasible: {0}")]
    Infeasible(String),
    #[error("invariant breach: {0}")]
    Invariant(String),
    #[error("refused: {0}")]
    Refused(String),
}

pub type Result<T> = std::result::Result<T, Error>;

impl Error {
    /// Process exit code used by the `nbe` binary.
    pub fn exit_code(&self) -> i32 {
        match self {
            Error::InvalidShift(_)
            | Error::InvalidWord(_)
            | Error::InvalidSubset(_)
            | Error::InvalidMeasure(_)
            | Error::InsufficientLength { .. }
            | Error::Config(_) => 2,
            Error::Degenerate(_) | Error::Infeasible(_) | Error::Refused(_) => 3,
            Error::Invariant(_) => 4,
        }
    }

    /// Short machine-readable category name.
    pub fn category(&self) -> &'static str {
        match self.exit_code() {
            2 => "config",
            3 => "infeasible",
            _ => "invariant",
        }
    }
}
