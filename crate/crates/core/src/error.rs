use std::path::PathBuf;

/// Errors produced anywhere in the aggregation pipeline.
#[derive(Debug, thiserror::Error)]
pub enum Error {
    #[error("domain error: {0}")]
    Domain(String),

    #[error("shape error: {0}")]
    Shape(String),

    #[error("alignment error: {0}")]
    Alignment(String),

    #[error("empty geometry: {0}")]
    EmptyGeometry(String),

    #[error("invalid geometry: {0}")]
    InvalidGeometry(String),

    #[error("duplicate unit id `{0}`")]
    KeyCollision(String),

    #[error("validation error: {0}")]
    Validation(String),

    #[error("unsupported period: {0}")]
    UnsupportedPeriod(String),

    #[error("frequency error: {0}")]
    Frequency(String),

    #[error("unsupported aggregation: {0}")]
    UnsupportedAggregation(String),

    #[error("coverage error: {0}")]
    Coverage(String),

    #[error("configuration error: {0}")]
    Configuration(String),

    #[error("ingestion error in {path} (variable `{variable}`): {message}")]
    Ingestion {
        path: PathBuf,
        variable: String,
        message: String,
    },

    #[error("boundary error in feature {feature}: {message}")]
    Boundary { feature: String, message: String },

    #[error("table format error: {0}")]
    Format(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),

    #[error(transparent)]
    Csv(#[from] csv::Error),

    #[error(transparent)]
    Parquet(#[from] parquet::errors::ParquetError),

    #[error(transparent)]
    Arrow(#[from] arrow_schema::ArrowError),
}

pub type Result<T, E = Error> = std::result::Result<T, E>;
