use thiserror::Error;

/// Errors raised by the completion library.
#[derive(Debug, Error)]
pub enum Error {
    #[error("shape mismatch: {0}")]
    ShapeMismatch(String),

    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    #[error("non-finite value at linear index {0}")]
    NonFinite(usize),

    /// The r-th singular value is negligible relative to the largest one.
    #[error("degenerate rank: sigma_{rank} = {sigma_r:e} vs sigma_1 = {sigma_1:e}")]
    DegenerateRank { rank: usize, sigma_r: f64, sigma_1: f64 },

    /// A core matricization is not of full row rank.
    #[error("degenerate core in mode {mode}: singular values {sigmas:?}")]
    DegenerateCore { mode: usize, sigmas: Vec<f64> },

    #[error("insufficient samples: the observation set is empty")]
    InsufficientSamples,

    #[error("factor in mode {mode} is not orthonormal (deviation {deviation:e})")]
    NotOrthonormal { mode: usize, deviation: f64 },

    #[error("infeasible condition number target {0}")]
    InfeasibleKappa(f64),

    #[error("bad file format: {0}")]
    Format(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),
}

impl Error {
    /// Short variant name, used in CLI diagnostics.
    pub fn variant(&self) -> &'static str {
        match self {
            Error::ShapeMismatch(_) => "ShapeMismatch",
            Error::InvalidArgument(_) => "InvalidArgument",
            Error::NonFinite(_) => "NonFinite",
            Error::DegenerateRank { .. } => "DegenerateRank",
            Error::DegenerateCore { .. } => "DegenerateCore",
            Error::InsufficientSamples => "InsufficientSamples",
            Error::NotOrthonormal { .. } => "NotOrthonormal",
            Error::InfeasibleKappa(_) => "InfeasibleKappa",
            Error::Format(_) => "Format",
            Error::Io(_) => "Io",
        }
    }
}

pub type Result<T> = std::result::Result<T, Error>;
