use thiserror::Error;

/// Crate-wide error type. Variants group into three exit-code categories:
/// validation (bad input data or configuration), infeasibility (a request
/// that cannot be satisfied, e.g. k larger than the candidate pool), and I/O.
#[derive(Debug, Error)]
pub enum Error {
    #[error("parse error at line {line}, field {field}: {msg}")]
    Parse { line: usize, field: usize, msg: String },

    #[error("duplicate {kind} id `{id}`")]
    DuplicateId { kind: &'static str, id: String },

    #[error("non-binary cell at model `{model}`, sample `{sample}`: `{value}`")]
    NonBinaryCell { model: String, sample: String, value: String },

    #[error("dimension mismatch: {0}")]
    DimensionMismatch(String),

    #[error("zero-variance column `{0}`: identical scores across all models")]
    ZeroVariance(String),

    #[error("index {index} out of range for {what} of length {len}")]
    IndexOutOfRange { what: &'static str, index: usize, len: usize },

    #[error("degenerate input: {0}")]
    Degenerate(String),

    #[error("empty result: {0}")]
    EmptyResult(String),

    #[error("invalid config: {0}")]
    InvalidConfig(String),

    #[error("usage: {0}")]
    Usage(String),

    #[error("infeasible split: {0}")]
    InfeasibleSplit(String),

    #[error("infeasible: {0}")]
    Infeasible(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error("csv: {0}")]
    Csv(#[from] csv::Error),

    #[error("json: {0}")]
    Json(#[from] serde_json::Error),

    #[error("config file: {0}")]
    Toml(#[from] toml::de::Error),
}

pub type Result<T> = std::result::Result<T, Error>;

impl Error {
    /// Process exit code for the CLI: 1 validation, 2 infeasibility, 3 I/O.
    pub fn exit_code(&self) -> i32 {
        match self {
            Error::InfeasibleSplit(_) | Error::Infeasible(_) => 2,
            Error::Io(_) | Error::Json(_) => 3,
            Error::Csv(e) if e.is_io_error() => 3,
            _ => 1,
        }
    }
}
