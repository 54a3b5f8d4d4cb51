use std::path::PathBuf;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, thiserror::Error)]
pub enum Error {
    #[error("malformed input at line {line}, column `{column}`: {message}")]
    Malformed { line: u64, column: String, message: String },

    #[error("trace length {len} is not a positive multiple of 96 quarters")]
    Length { len: usize },

    #[error("invalid argument: {0}")]
    Argument(String),

    #[error("invalid parameters: {0}")]
    Params(String),

    #[error("simulation diverged at {context}: state ({t_in}, {t_m})")]
    Divergence { context: String, t_in: f64, t_m: f64 },

    #[error("dimension mismatch: expected {expected}, got {got}")]
    Dimension { expected: usize, got: usize },

    #[error("fitted Q-iteration needs a non-empty batch; use the exploration-only policy until transitions exist")]
    EmptyBatch,

    #[error("temperature must be positive for Boltzmann exploration (got {0}); use the greedy action instead")]
    Temperature(f64),

    #[error("prescient rollout left the value grid at step {step}: {excursion}")]
    GridCoverage { step: usize, excursion: String },

    #[error("missing result files in {}: {}", dir.display(), missing.join(", "))]
    MissingInputs { dir: PathBuf, missing: Vec<String> },

    #[error("day {day}: {source}")]
    Day {
        day: usize,
        #[source]
        source: Box<Error>,
    },

    #[error("{}: {source}", path.display())]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    #[error("{}: {source}", path.display())]
    Csv {
        path: PathBuf,
        #[source]
        source: csv::Error,
    },

    #[error("config {}: {message}", path.display())]
    Config { path: PathBuf, message: String },
}

impl Error {
    pub(crate) fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }

    pub(crate) fn csv(path: impl Into<PathBuf>, source: csv::Error) -> Self {
        Error::Csv {
            path: path.into(),
            source,
        }
    }
}
