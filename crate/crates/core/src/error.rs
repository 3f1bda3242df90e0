use std::path::PathBuf;

/// Errors produced anywhere in the crate.
#[derive(Debug, thiserror::Error)]
pub enum Error {
    #[error("invalid grid: {0}")]
    Grid(String),

    #[error("non-finite sample at index {index} ({context})")]
    NonFinite { index: usize, context: &'static str },

    #[error("shape mismatch: expected n={expected}, got n={actual} ({context})")]
    Shape {
        expected: usize,
        actual: usize,
        context: &'static str,
    },

    #[error(
        "Nyquist constraint violated: pixel pitch dx={dx} m must be smaller than lambda/2={half} m"
    )]
    Nyquist { dx: f64, half: f64 },

    #[error("invalid configuration: {0}")]
    Config(String),

    #[error("invalid layout: {0}")]
    Layout(String),

    #[error("invalid argument: {0}")]
    Invalid(String),

    #[error("non-finite gradient in layer {layer} ({which})")]
    NonFiniteGradient { layer: usize, which: &'static str },

    #[error("training diverged at epoch {epoch}: loss is not finite")]
    Diverged { epoch: usize },

    #[error("bad file format in {path}: {reason}")]
    Format { path: PathBuf, reason: String },

    #[error("truncated file {path}: expected {expected} bytes, found {actual}")]
    Truncated {
        path: PathBuf,
        expected: usize,
        actual: usize,
    },

    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    #[error(transparent)]
    Image(#[from] image::ImageError),

    #[error(transparent)]
    Csv(#[from] csv::Error),
}

impl Error {
    /// Process exit status: 1 for rejected inputs and configuration, 2 for
    /// failures while running.
    pub fn exit_code(&self) -> i32 {
        match self {
            Error::Grid(_)
            | Error::Shape { .. }
            | Error::Nyquist { .. }
            | Error::Config(_)
            | Error::Layout(_)
            | Error::Invalid(_) => 1,
            _ => 2,
        }
    }
}

pub type Result<T, E = Error> = std::result::Result<T, E>;

pub(crate) fn io_err(path: impl Into<PathBuf>) -> impl FnOnce(std::io::Error) -> Error {
    let path = path.into();
    move |source| Error::Io { path, source }
}
