use thiserror::Error;

/// Errors produced by the numerical, simulation and ingestion layers.
#[derive(Debug, Error)]
pub enum QdError {
    #[error("domain error: {0}")]
    Domain(String),

    #[error("singular exponent k2 = {k2}: use m_closed_k1limit for k2 = 1")]
    SingularExponent { k2: f64 },

    #[error("precision exhausted after escalating to {bits} bits")]
    PrecisionExhausted { bits: usize },

    #[error("oracle refused: {0}")]
    OracleRefused(String),

    #[error("no accepted string of length {n}")]
    EmptyLanguage { n: usize },

    #[error("enumeration budget of {budget} accepted strings exceeded")]
    EnumerationOverflow { budget: usize },

    #[error("prefix cannot be extended to an accepted string")]
    DeadPrefix,

    #[error("retained beam mass is zero")]
    EmptyBeam,

    #[error("infeasible: {0}")]
    Infeasible(String),

    #[error("input error at line {line}: {msg}")]
    Input { line: usize, msg: String },

    #[error(transparent)]
    Io(#[from] std::io::Error),
}

pub type Result<T> = std::result::Result<T, QdError>;

impl QdError {
    pub(crate) fn domain(msg: impl Into<String>) -> Self {
        QdError::Domain(msg.into())
    }

    pub(crate) fn input(line: usize, msg: impl Into<String>) -> Self {
        QdError::Input {
            line,
            msg: msg.into(),
        }
    }
}
