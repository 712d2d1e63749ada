use std::path::PathBuf;

use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("unit {unit} out of range for {n_units} units")]
    UnitOutOfRange { unit: usize, n_units: usize },

    #[error("lateral self-loop on unit {0} is not allowed")]
    LateralSelfLoop(usize),

    #[error("{{{0}, {1}}} is not a lateral edge")]
    NotLateralEdge(usize, usize),

    #[error("invalid basis: {0}")]
    InvalidBasis(String),

    #[error("symbol {symbol} out of range for alphabet size {alphabet}")]
    SymbolOutOfRange { symbol: usize, alphabet: usize },

    #[error("shape mismatch: {0}")]
    ShapeMismatch(String),

    #[error("lateral component of {size} units has {configurations} configurations, above the exact budget of {budget}")]
    ComponentTooLarge {
        size: usize,
        configurations: f64,
        budget: usize,
    },

    #[error("dataset is empty")]
    EmptyDataset,

    #[error("pixel value {value} at index {index} is outside [0, 1]")]
    PixelOutOfRange { index: usize, value: f64 },

    #[error("class {class} out of range for a group of {group_size}")]
    ClassOutOfRange { class: usize, group_size: usize },

    #[error("invalid configuration: {0}")]
    Config(String),

    #[error("{path}:{line}: {msg}")]
    Parse {
        path: PathBuf,
        line: usize,
        msg: String,
    },

    #[error("unsupported: {0}")]
    Unsupported(String),

    #[error("{}: {source}", path.display())]
    File {
        path: std::path::PathBuf,
        source: std::io::Error,
    },

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),

    #[error(transparent)]
    Csv(#[from] csv::Error),
}
