use std::path::PathBuf;

use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid topology: {0}")]
    Topology(String),

    #[error("invalid hyperparameters: {0}")]
    HyperParameters(String),

    #[error("dimension mismatch in {context}: expected {expected}, got {actual}")]
    Dimension {
        context: &'static str,
        expected: usize,
        actual: usize,
    },

    #[error("spectral radius scaling failed: {0}")]
    SpectralScaling(String),

    #[error("eigenvalue computation did not converge for a {0}x{0} matrix")]
    EigenSolver(usize),

    #[error("singular system at beta={beta}; use the SVD solver for rank-deficient designs")]
    SingularSystem { beta: f64 },

    #[error("metric undefined: {0}")]
    Metric(String),

    #[error("intrinsic plasticity: {0}")]
    Plasticity(String),

    #[error("diagnostics: {0}")]
    Diagnostics(String),

    #[error("search space: {0}")]
    SearchSpace(String),

    #[error("data: {0}")]
    Data(String),

    #[error("{path}:{line}: {message}")]
    Parse {
        path: PathBuf,
        line: usize,
        message: String,
    },

    #[error("config: {0}")]
    Config(String),

    #[error("{stage}: {inner}")]
    Stage {
        stage: &'static str,
        inner: Box<Error>,
    },

    #[error("io error on {path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

impl Error {
    pub(crate) fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }

    pub(crate) fn dim(context: &'static str, expected: usize, actual: usize) -> Self {
        Error::Dimension {
            context,
            expected,
            actual,
        }
    }
}

/// Tags an error with the pipeline stage it came from.
pub trait StageContext<T> {
    fn stage(self, stage: &'static str) -> Result<T>;
}

impl<T> StageContext<T> for Result<T> {
    fn stage(self, stage: &'static str) -> Result<T> {
        self.map_err(|e| match e {
            staged @ Error::Stage { .. } => staged,
            other => Error::Stage {
                stage,
                inner: Box::new(other),
            },
        })
    }
}
