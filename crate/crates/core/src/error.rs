use thiserror::Error;

/// Errors raised by the learning engine.
#[derive(Debug, Error, Clone, PartialEq)]
pub enum Error {
    #[error("input outside its domain: {0}")]
    InputDomain(String),

    #[error("empty input: {0}")]
    EmptyInput(&'static str),

    #[error("unsupported by this hypothesis class: {0}")]
    Unsupported(String),

    #[error("invalid configuration: {0}")]
    Config(String),

    #[error("side pool exhausted: requested {requested} draws from a pool of {available}")]
    PoolExhausted { requested: usize, available: usize },

    #[error("adversary fault at round {round}: {reason}")]
    AdversaryFault { round: usize, reason: String },

    #[error("internal invariant breached: {0}")]
    Invariant(String),
}

pub type Result<T, E = Error> = std::result::Result<T, E>;
