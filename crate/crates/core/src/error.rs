use chrono::NaiveDate;
use thiserror::Error;

use crate::model::SeriesKey;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("price must be strictly positive, got {0}")]
    NonPositivePrice(String),

    #[error("query date {query} is after departure date {departure}")]
    QueryAfterDeparture {
        query: NaiveDate,
        departure: NaiveDate,
    },

    #[error("parse error at line {line}: {message}")]
    Parse { line: u64, message: String },

    #[error("duplicate quote for {key} queried on {query_date}")]
    DuplicateQuote {
        key: SeriesKey,
        query_date: NaiveDate,
    },

    #[error("quotes for {0} and {1} cannot share a series")]
    MixedSeries(SeriesKey, SeriesKey),

    #[error("empty price series")]
    EmptySeries,

    #[error("dataset contains a single class")]
    SingleClassDataset,

    #[error("empty dataset")]
    EmptyDataset,

    #[error("incompatible learner spec: {0}")]
    IncompatibleSpec(String),

    #[error("feature mismatch: model expects {expected} columns, got {got}")]
    FeatureMismatch { expected: usize, got: usize },

    #[error("uniform blending needs exactly 8 members, got {0}")]
    WrongMemberCount(usize),

    #[error("cannot build {folds} folds from {series} series")]
    TooFewSeries { series: usize, folds: usize },

    #[error("every grid cell failed")]
    AllCellsFailed,

    #[error("invalid configuration: {0}")]
    InvalidConfig(String),

    #[error("prediction length {got} does not match series length {expected}")]
    Misaligned { expected: usize, got: usize },

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),

    #[error(transparent)]
    Csv(#[from] csv::Error),
}

impl Error {
    /// Stable machine-readable tag, used in CLI error records and FFI status mapping.
    pub fn kind(&self) -> &'static str {
        match self {
            Error::NonPositivePrice(_) => "NonPositivePrice",
            Error::QueryAfterDeparture { .. } => "QueryAfterDeparture",
            Error::Parse { .. } => "ParseError",
            Error::DuplicateQuote { .. } => "DuplicateQuote",
            Error::MixedSeries(..) => "MixedSeries",
            Error::EmptySeries => "EmptySeries",
            Error::SingleClassDataset => "SingleClassDataset",
            Error::EmptyDataset => "EmptyDataset",
            Error::IncompatibleSpec(_) => "IncompatibleSpec",
            Error::FeatureMismatch { .. } => "FeatureMismatch",
            Error::WrongMemberCount(_) => "WrongMemberCount",
            Error::TooFewSeries { .. } => "TooFewSeries",
            Error::AllCellsFailed => "AllCellsFailed",
            Error::InvalidConfig(_) => "InvalidConfig",
            Error::Misaligned { .. } => "Misaligned",
            Error::Io(_) => "Io",
            Error::Json(_) => "Json",
            Error::Csv(_) => "Csv",
        }
    }
}
