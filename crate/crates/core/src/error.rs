use thiserror::Error;

#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid input: {0}")]
    InvalidInput(String),

    #[error("matrix is not square ({rows}x{cols})")]
    NonSquare { rows: usize, cols: usize },

    #[error("graph shift is not symmetric; only symmetric shifts can be decomposed")]
    NonSymmetric,

    #[error("degenerate graph shift: largest eigenvalue magnitude is zero")]
    DegenerateShift,

    #[error("eigendecomposition failed: {0}")]
    Decomposition(String),

    #[error("degenerate clique: pose is not determined by the given pairs")]
    DegenerateClique,

    #[error("insufficient structure: no clique of size >= 3 survived")]
    InsufficientStructure,

    #[error("sampling error: {0}")]
    Sampling(String),

    #[error("parse error at line {line}: {msg}")]
    Parse { line: usize, msg: String },

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

impl Error {
    /// Short stable identifier, used for machine-parsable CLI failures.
    pub fn kind(&self) -> &'static str {
        match self {
            Error::InvalidInput(_) => "invalid_input",
            Error::NonSquare { .. } => "non_square",
            Error::NonSymmetric => "non_symmetric",
            Error::DegenerateShift => "degenerate_shift",
            Error::Decomposition(_) => "decomposition",
            Error::DegenerateClique => "degenerate_clique",
            Error::InsufficientStructure => "insufficient_structure",
            Error::Sampling(_) => "sampling",
            Error::Parse { .. } => "parse",
            Error::Io(_) => "io",
            Error::Json(_) => "json",
        }
    }
}

pub type Result<T> = std::result::Result<T, Error>;
