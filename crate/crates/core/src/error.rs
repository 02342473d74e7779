use thiserror::Error;

/// Errors produced by the numerical routines.
#[derive(Debug, Error, Clone, PartialEq)]
pub enum Error {
    #[error("invalid parameters: {0}")]
    InvalidParams(String),

    #[error("decay roots degenerate: mu = {mu} must be strictly below mu_bar = {mu_bar}")]
    RootDegeneracy { mu: f64, mu_bar: f64 },

    #[error("{what} did not converge after {iterations} iterations")]
    NonConvergence { what: &'static str, iterations: usize },

    #[error("invalid grid: {0}")]
    InvalidGrid(String),

    #[error("invalid profile: {0}")]
    InvalidProfile(String),

    #[error("radius {r} outside grid range [{r_min}, {r_max}]")]
    OutOfRange { r: f64, r_min: f64, r_max: f64 },

    /// Riesz potential is identically infinite: the density decays no
    /// faster than `t^{-(N - nu)}` at infinity.
    #[error("convolution diverges: fitted tail exponent {beta} <= N - nu = {threshold}")]
    Divergence { beta: f64, threshold: f64 },

    #[error("NaN or infinity encountered in {0}")]
    NotFinite(&'static str),

    #[error("zero profile: {0}")]
    ZeroProfile(&'static str),

    #[error("positivity lost: {clipped} of {total} nodes clipped")]
    PositivityLoss { clipped: usize, total: usize },

    #[error("linear system is not positive definite (pivot {pivot} at row {row})")]
    NotPositiveDefinite { row: usize, pivot: f64 },

    #[error("missing input: {0}")]
    MissingInput(String),

    #[error("parse error at line {line}: {msg}")]
    Parse { line: usize, msg: String },

    #[error("io error: {0}")]
    Io(String),
}

impl From<std::io::Error> for Error {
    fn from(e: std::io::Error) -> Self {
        Error::Io(e.to_string())
    }
}

pub type Result<T> = std::result::Result<T, Error>;
