use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    /// A row in a publications source could not be parsed or validated.
    #[error("line {line}: {message}")]
    Ingest { line: usize, message: String },

    #[error("line {line}: duplicate publication id {id:?}")]
    DuplicateId { id: String, line: usize },

    #[error("corpus is empty")]
    EmptyCorpus,

    #[error("percentile {0} is outside (0, 100]")]
    PercentileOutOfRange(f64),

    #[error("percentiles must be strictly increasing")]
    PercentilesNotIncreasing,

    #[error("invalid configuration: {0}")]
    Config(String),

    #[error("fit failed: {0}")]
    Fit(String),

    #[error("series has no point at percentile {0}")]
    MissingPercentile(f64),

    #[error("N({0}) is zero, ratio undefined")]
    UndefinedRatio(f64),

    #[error("no world corpus for year {0}")]
    MissingYear(i32),

    #[error("denominator must be positive, got {0}")]
    NonPositiveDenominator(f64),

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),

    #[error(transparent)]
    Csv(#[from] csv::Error),
}
