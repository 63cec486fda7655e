use thiserror::Error;

/// Errors produced by the statistics, samplers and file readers.
#[derive(Debug, Error)]
pub enum Error {
    #[error("series too short: {len} rows, need more than lag {lag}")]
    SeriesTooShort { len: usize, lag: usize },

    #[error("matrix is not positive definite: {0}")]
    NotPositiveDefinite(String),

    #[error("dimension mismatch: {0}")]
    DimensionMismatch(String),

    #[error("restriction matrix is rank deficient (rank {rank} < {rows} rows)")]
    RankDeficientR { rank: usize, rows: usize },

    #[error("design matrix is rank deficient: {0}")]
    RankDeficient(String),

    #[error("chain diverged at iteration {iteration}: {detail}")]
    ChainDiverged { iteration: usize, detail: String },

    #[error("invalid configuration: {0}")]
    ConfigInvalid(String),

    #[error("latent paths were not stored in the null-model chain")]
    MissingLatentPaths,

    #[error("invalid input: {0}")]
    InvalidInput(String),

    #[error("parse error at line {line}, column {column}: {message}")]
    Parse {
        line: usize,
        column: usize,
        message: String,
    },

    #[error("name mismatch: {0}")]
    NameMismatch(String),

    #[error("replication {index} failed: {source}")]
    Replication {
        index: usize,
        #[source]
        source: Box<Error>,
    },

    #[error("i/o error: {0}")]
    Io(#[from] std::io::Error),

    #[error("json error: {0}")]
    Json(#[from] serde_json::Error),
}

impl Error {
    /// Stable machine-readable category name, used by the CLI error line.
    pub fn category(&self) -> &'static str {
        match self {
            Error::SeriesTooShort { .. } => "SeriesTooShort",
            Error::NotPositiveDefinite(_) => "NotPositiveDefinite",
            Error::DimensionMismatch(_) => "DimensionMismatch",
            Error::RankDeficientR { .. } => "RankDeficientR",
            Error::RankDeficient(_) => "RankDeficient",
            Error::ChainDiverged { .. } => "ChainDiverged",
            Error::ConfigInvalid(_) => "ConfigInvalid",
            Error::MissingLatentPaths => "MissingLatentPaths",
            Error::InvalidInput(_) => "InvalidInput",
            Error::Parse { .. } => "ParseError",
            Error::NameMismatch(_) => "NameMismatch",
            Error::Replication { source, .. } => source.category(),
            Error::Io(_) => "IoError",
            Error::Json(_) => "ParseError",
        }
    }
}

pub type Result<T> = std::result::Result<T, Error>;
