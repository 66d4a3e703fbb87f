use thiserror::Error;

/// Errors raised by the decomposition and localization pipeline.
#[derive(Debug, Error, Clone, PartialEq)]
pub enum Error {
    #[error("shape mismatch: {0}")]
    ShapeMismatch(String),

    #[error("rank {rank} out of range for a {rows}x{cols} matrix")]
    RankOutOfRange { rank: usize, rows: usize, cols: usize },

    #[error("zero matrix or tensor has no dominant direction")]
    ZeroInput,

    #[error("index {index} out of range (len {len})")]
    IndexOutOfRange { index: usize, len: usize },

    #[error("steps {0} and {1} are not coprime")]
    NotCoprime(u32, u32),

    #[error("invalid geometry: {0}")]
    InvalidGeometry(String),

    #[error("eigenvalue iteration did not converge")]
    ConvergenceFailed,

    #[error("singular pencil")]
    SingularPencil,

    #[error("defective pencil: generalized eigenvalues {0} and {1} coincide")]
    DefectivePencil(usize, usize),

    #[error("numerical rank {found} is below the requested {requested}")]
    RankDeficient { requested: usize, found: usize },

    #[error("no target matrix could be built: every candidate slice is rank deficient")]
    NoTargetMatrix,

    #[error("singular factor matrix")]
    SingularFactor,

    #[error("objective increased from {before:e} to {after:e} at sweep {sweep}")]
    Divergence { sweep: usize, before: f64, after: f64 },

    #[error("coprime candidates disagree by {gap} (tolerance {tol})")]
    Ambiguous { gap: f64, tol: f64 },

    #[error("direction cosines ({0}, {1}) lie outside the unit disk")]
    OutsideUnitDisk(f64, f64),

    #[error("all localization lines are parallel")]
    ParallelLines,

    #[error("invalid configuration: {0}")]
    Config(String),

    #[error("i/o error: {0}")]
    Io(String),
}

pub type Result<T> = std::result::Result<T, Error>;

impl From<std::io::Error> for Error {
    fn from(e: std::io::Error) -> Self {
        Error::Io(e.to_string())
    }
}

impl From<csv::Error> for Error {
    fn from(e: csv::Error) -> Self {
        Error::Io(e.to_string())
    }
}

impl From<serde_json::Error> for Error {
    fn from(e: serde_json::Error) -> Self {
        Error::Io(e.to_string())
    }
}
