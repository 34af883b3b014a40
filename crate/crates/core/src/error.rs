use thiserror::Error;

/// Errors raised by the library. Each variant maps onto one of the CLI exit
/// classes through [`Error::exit_code`].
#[derive(Debug, Error)]
pub enum Error {
    #[error("empty box set")]
    EmptyBoxSet,

    #[error("empty prediction")]
    EmptyPrediction,

    #[error("empty segmentation")]
    EmptySegmentation,

    #[error("zero feature vector at patch {0}")]
    ZeroFeature(usize),

    #[error("no samples")]
    NoSamples,

    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    #[error("invalid data: {0}")]
    InvalidData(String),

    #[error("dimension mismatch: expected {expected}, got {actual}")]
    DimensionMismatch { expected: String, actual: String },

    #[error("eigensolver did not converge (residual {residual:.3e})")]
    EigenNoConvergence { residual: f64 },

    #[error("non-finite loss at iteration {iteration}")]
    Divergence { iteration: usize },

    #[error("gradient check failed: max relative error {0:.3e}")]
    GradientCheck(f64),

    #[error(transparent)]
    Tensor(#[from] crate::cli_io::TensorError),

    #[error("invalid json: {0}")]
    Json(#[from] serde_json::Error),

    #[error("invalid config at line {line}: {message}")]
    Config { line: usize, message: String },

    #[error("io error on {path}: {source}")]
    Io {
        path: String,
        #[source]
        source: std::io::Error,
    },
}

pub type Result<T> = std::result::Result<T, Error>;

impl Error {
    /// Exit code class: 2 for bad input data, 3 for numerical failures.
    /// Usage errors (1) are produced by the argument parser, never here.
    pub fn exit_code(&self) -> i32 {
        match self {
            Error::EigenNoConvergence { .. } | Error::Divergence { .. } | Error::GradientCheck(_) => 3,
            _ => 2,
        }
    }

    pub(crate) fn io(path: impl AsRef<std::path::Path>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.as_ref().display().to_string(),
            source,
        }
    }
}
