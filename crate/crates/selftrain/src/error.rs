//! Error type shared by all modules.

use thiserror::Error;

/// Failure modes of estimators, theory evaluations, and experiment plumbing.
#[derive(Debug, Error)]
pub enum Error {
    /// A model or estimate collapsed to the zero vector (or an input vector
    /// required to be nonzero was zero).
    #[error("degenerate model: {0}")]
    DegenerateModel(&'static str),

    /// Every sample of a batch fell below the acceptance threshold. `round`
    /// is 0 for single-step estimators and 1-based inside iterations.
    #[error("all samples rejected at threshold (round {round})")]
    AllRejected { round: usize },

    /// The sandwich-bound resolution parameter is outside its valid range or
    /// makes a denominator nonpositive.
    #[error("invalid resolution epsilon = {epsilon}: {reason}")]
    InvalidResolution { epsilon: f64, reason: &'static str },

    /// A linear system that must be solved exactly is singular.
    #[error("ill-posed linear system: {0}")]
    IllPosed(&'static str),

    /// Constrained ERM has an empty feasible set.
    #[error("constrained ERM infeasible: no member satisfies the pseudo-risk budget {xi}")]
    Infeasible { xi: f64 },

    /// A documented precondition of an operation was violated.
    #[error("invalid input: {0}")]
    InvalidInput(String),

    /// Experiment configuration failed validation; `field` names the culprit.
    #[error("invalid config field `{field}`: {message}")]
    InvalidConfig { field: &'static str, message: String },

    #[error("i/o error: {0}")]
    Io(#[from] std::io::Error),

    #[error("serialization error: {0}")]
    Serde(#[from] serde_json::Error),

    #[error("csv error: {0}")]
    Csv(#[from] csv::Error),
}

impl Error {
    pub(crate) fn invalid_input(msg: impl Into<String>) -> Self {
        Error::InvalidInput(msg.into())
    }
}
