use std::path::PathBuf;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, thiserror::Error)]
pub enum Error {
    /// Invalid input: bad scene parameters, malformed config, bad overrides.
    #[error("configuration error in `{key}`: {message}")]
    Config { key: String, message: String },

    /// Structured-text syntax problem.
    #[error("config syntax error at line {line}: {message}")]
    Syntax { line: usize, message: String },

    #[error("coordinate {x} outside knot span [{min}, {max}]")]
    OutsideKnotSpan { x: f64, min: f64, max: f64 },

    #[error("point {point:?} lies outside the background domain")]
    OutOfDomain { point: [f64; 3] },

    /// Unrecoverable state during time stepping.
    #[error("numeric failure at step {step}, particle {particle:?}: {message}")]
    Numeric {
        step: u64,
        particle: Option<usize>,
        message: String,
    },

    #[error("return mapping did not converge after {iterations} iterations (residual {residual:e})")]
    ReturnMapping { iterations: usize, residual: f64 },

    #[error("I/O error on {path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    #[error("malformed snapshot: {0}")]
    Snapshot(String),
}

impl Error {
    pub fn config(key: impl Into<String>, message: impl Into<String>) -> Self {
        Error::Config {
            key: key.into(),
            message: message.into(),
        }
    }

    pub(crate) fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }

    /// Process exit code used by the CLI: 1 for configuration problems, 2 for
    /// fatal numerics.
    pub fn exit_code(&self) -> i32 {
        match self {
            Error::Config { .. } | Error::Syntax { .. } | Error::Io { .. } | Error::Snapshot(_) => 1,
            Error::OutsideKnotSpan { .. }
            | Error::OutOfDomain { .. }
            | Error::Numeric { .. }
            | Error::ReturnMapping { .. } => 2,
        }
    }
}
