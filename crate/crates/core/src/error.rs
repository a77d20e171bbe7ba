use std::path::PathBuf;

use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("io error on {path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    #[error("csv error: {0}")]
    Csv(#[from] csv::Error),

    #[error("schema error: missing column `{0}`")]
    MissingColumn(String),

    #[error("parse error at row {row}, column `{column}`: cannot read {value:?} as a number")]
    Parse {
        row: usize,
        column: String,
        value: String,
    },

    #[error("integrity error: {0}")]
    Integrity(String),

    #[error("invalid data: {0}")]
    InvalidData(String),

    #[error("transform domain error: {kind} is undefined for value {value} (row {row}, column `{column}`)")]
    TransformDomain {
        kind: &'static str,
        value: f64,
        row: usize,
        column: String,
    },

    #[error("degenerate range: all {0} values are identical")]
    DegenerateRange(&'static str),

    #[error("singular design: {0}")]
    SingularDesign(String),

    #[error("IRLS diverged after {iterations} iterations (|linear predictor| > {limit})")]
    Divergence { iterations: usize, limit: f64 },

    #[error("random-intercept variance is unidentifiable: {0}")]
    Unidentifiable(String),

    #[error("invalid configuration: {0}")]
    Config(String),

    #[error("draw {draw}: {source}")]
    Draw {
        draw: usize,
        #[source]
        source: Box<Error>,
    },

    #[error("{failed} of {total} posterior draws failed (limit 5%); first failures: {causes}")]
    ExcessFailures {
        failed: usize,
        total: usize,
        causes: String,
    },

    #[error("replicate {replicate}: {source}")]
    Replicate {
        replicate: usize,
        #[source]
        source: Box<Error>,
    },
}

impl Error {
    pub(crate) fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }
}
