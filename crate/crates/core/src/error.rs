use thiserror::Error;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum Error {
    #[error("parse error: {0}")]
    Parse(String),

    #[error("invalid input: {0}")]
    InvalidInput(String),

    #[error("dimension {0} outside the supported range 2..=12")]
    UnsupportedDimension(usize),

    #[error("eigenvalue iteration did not converge")]
    NonConvergence,

    #[error("eigenvalue clusters cannot be separated: {0}")]
    IllConditioned(String),

    #[error("matrix exponential overflow (norm {norm:.3e})")]
    Overflow { norm: f64 },

    #[error("eigenvalue {re:.6e}{im:+.6e}i lies on the closed negative real axis")]
    BranchObstruction { re: f64, im: f64 },

    #[error("matrix is not nilpotent")]
    NotNilpotent,

    #[error("matrix is singular")]
    Singular,

    #[error("matrix is not elliptic: {0}")]
    NotElliptic(String),

    #[error("representation dimension {0} exceeds 1000")]
    DimensionTooLarge(usize),

    #[error("chain-oracle grid of {0} points is too large")]
    GridTooLarge(usize),

    #[error(
        "rank decision is ambiguous (singular-value ratio {ratio:.3e}, threshold {threshold:.3e})"
    )]
    RankAmbiguous { ratio: f64, threshold: f64 },

    #[error("integration looks stiff: {0}")]
    StiffnessSuspected(String),

    #[error("no real logarithm found for m up to {max_m}")]
    NoRealLog { max_m: u32 },

    #[error("discrete-time flows only accept integer times, got {0}")]
    NonIntegerTime(f64),
}

pub type Result<T> = std::result::Result<T, Error>;
