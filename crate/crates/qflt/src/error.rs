use thiserror::Error;

/// Crate-wide error type.
///
/// The CLI maps variants to exit codes: configuration problems exit with 2,
/// numerical problems with 3 (see `main.rs`).
#[derive(Debug, Error)]
pub enum Error {
    /// Evaluation requested exactly at a non-removable singularity.
    #[error("singular point: {0}")]
    Singularity(String),

    /// Quadrature failed to reach the requested tolerance.
    #[error("quadrature accuracy not reached: achieved {achieved:.3e}, requested {requested:.3e}")]
    Accuracy { achieved: f64, requested: f64 },

    /// Input outside the operation's domain (ranges, table coverage, s >= t, ...).
    #[error("domain error: {0}")]
    Domain(String),

    /// Malformed frequency or time grid.
    #[error("grid error: {0}")]
    Grid(String),

    /// A spec evaluates to something that makes the operation meaningless
    /// (zero normalization denominator, L(1/T) = 0, ...).
    #[error("degenerate spec: {0}")]
    Degenerate(String),

    /// A documented precondition does not hold (e.g. regime mismatch).
    #[error("precondition violated: {0}")]
    Precondition(String),

    /// Config file parsing or validation failure.
    #[error("config error: {0}")]
    Config(String),

    #[error("io error: {0}")]
    Io(#[from] std::io::Error),
}

pub type Result<T> = std::result::Result<T, Error>;

impl Error {
    /// Exit code the CLI uses for this error class.
    pub fn exit_code(&self) -> i32 {
        match self {
            Error::Config(_) | Error::Io(_) => 2,
            _ => 3,
        }
    }
}
