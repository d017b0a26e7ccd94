use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid configuration: {field}: {reason}")]
    Config { field: String, reason: String },

    #[error("ingestion error{}: {reason}", row_suffix(.row))]
    Ingest { row: Option<u64>, reason: String },

    #[error("calibration error: {0}")]
    Calibration(String),

    #[error("planning error: {0}")]
    Planning(String),

    #[error("invalid panel: {0}")]
    Panel(String),

    #[error("invalid input: {0}")]
    InvalidInput(String),

    #[error("surface error: {0}")]
    Surface(String),

    #[error("{0}")]
    Io(#[from] std::io::Error),

    #[error("csv: {0}")]
    Csv(#[from] csv::Error),

    #[error("json: {0}")]
    Json(#[from] serde_json::Error),

    #[error("config parse: {0}")]
    Toml(#[from] toml::de::Error),
}

fn row_suffix(row: &Option<u64>) -> String {
    match row {
        Some(r) => format!(" at row {r}"),
        None => String::new(),
    }
}

impl Error {
    pub fn config(field: impl Into<String>, reason: impl Into<String>) -> Self {
        Error::Config {
            field: field.into(),
            reason: reason.into(),
        }
    }

    pub(crate) fn ingest(row: Option<u64>, reason: impl Into<String>) -> Self {
        Error::Ingest {
            row,
            reason: reason.into(),
        }
    }
}
