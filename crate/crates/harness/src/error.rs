use std::io;
use std::path::PathBuf;

#[derive(Debug, thiserror::Error)]
pub enum HarnessError {
    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: io::Error,
    },

    #[error("{path}:{line}: {message}")]
    Parse {
        path: PathBuf,
        line: usize,
        message: String,
    },

    #[error("config: {0}")]
    Config(String),

    #[error("missing input: {0}")]
    MissingInput(String),

    #[error(transparent)]
    Core(#[from] puf_core::Error),

    #[error("{failures} of {attempts} reproduction attempts failed")]
    ReproductionFailures { failures: usize, attempts: usize },
}

impl HarnessError {
    pub(crate) fn io(path: impl Into<PathBuf>, source: io::Error) -> Self {
        Self::Io {
            path: path.into(),
            source,
        }
    }

    /// Process exit code: 1 input/validation, 2 infeasible extractor
    /// parameters, 3 reproduction failure under `--strict`.
    pub fn exit_code(&self) -> i32 {
        match self {
            HarnessError::Core(puf_core::Error::Infeasible(_)) => 2,
            HarnessError::ReproductionFailures { .. } => 3,
            _ => 1,
        }
    }
}

pub type Result<T> = std::result::Result<T, HarnessError>;
