use nimo::NimoError;
use thiserror::Error;

use crate::config::Method;

#[derive(Debug, Error)]
pub enum CliError {
    #[error("configuration error: {0}")]
    Config(String),

    #[error("I/O error: {0}")]
    Io(String),

    #[error("{method}, repetition {repetition}: {source}")]
    Method {
        method: Method,
        repetition: usize,
        #[source]
        source: NimoError,
    },

    #[error("dataset: {0}")]
    Data(#[source] NimoError),

    #[error("no reference row for `{row}` in table `{table}`")]
    UnknownTableRow { table: String, row: String },
}

pub type CliResult<T> = Result<T, CliError>;

fn code_for(e: &NimoError) -> i32 {
    match e {
        NimoError::Io(_) | NimoError::Csv(_) | NimoError::Parse { .. } | NimoError::MissingColumn(_) => 4,
        NimoError::UnknownSetting(_) | NimoError::InvalidArgument(_) | NimoError::InsufficientRows { .. } => 2,
        _ => 3,
    }
}

impl CliError {
    /// Process exit code: 2 configuration, 3 training failure, 4 I/O.
    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Config(_) | CliError::UnknownTableRow { .. } => 2,
            CliError::Io(_) => 4,
            CliError::Method { source, .. } => code_for(source),
            CliError::Data(source) => code_for(source),
        }
    }
}

impl From<std::io::Error> for CliError {
    fn from(e: std::io::Error) -> Self {
        CliError::Io(e.to_string())
    }
}

impl From<serde_json::Error> for CliError {
    fn from(e: serde_json::Error) -> Self {
        CliError::Io(e.to_string())
    }
}

impl From<csv::Error> for CliError {
    fn from(e: csv::Error) -> Self {
        CliError::Io(e.to_string())
    }
}
