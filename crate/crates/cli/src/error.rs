use std::path::Path;

use thiserror::Error;

pub type CliResult<T> = std::result::Result<T, CliError>;

/// Exit status of a run that succeeded.
pub const EXIT_OK: i32 = 0;
/// A stage failed while running (I/O, malformed data, training failure).
pub const EXIT_RUNTIME: i32 = 1;
/// The configuration, arguments or synthetic spec are invalid.
pub const EXIT_CONFIG: i32 = 2;

#[derive(Debug, Error)]
pub enum CliError {
    #[error("{0}")]
    Config(String),

    #[error("missing input {path}: {hint}")]
    MissingInput { path: String, hint: String },

    #[error(transparent)]
    Core(#[from] skyport_core::Error),

    #[error("{context}: {source}")]
    Io {
        context: String,
        source: std::io::Error,
    },

    #[error(transparent)]
    Json(#[from] serde_json::Error),

    #[error(transparent)]
    Csv(#[from] csv::Error),

    #[error("{0}")]
    Runtime(String),
}

impl CliError {
    pub fn io(context: impl AsRef<Path>, source: std::io::Error) -> Self {
        CliError::Io {
            context: context.as_ref().display().to_string(),
            source,
        }
    }

    pub fn missing(path: impl AsRef<Path>, hint: impl Into<String>) -> Self {
        CliError::MissingInput {
            path: path.as_ref().display().to_string(),
            hint: hint.into(),
        }
    }

    pub fn kind(&self) -> &'static str {
        match self {
            CliError::Config(_) => "config",
            CliError::MissingInput { .. } => "missing_input",
            CliError::Core(e) => match e {
                skyport_core::Error::Format(_) => "format",
                skyport_core::Error::Argument(_) => "argument",
                skyport_core::Error::Spec(_) => "spec",
                skyport_core::Error::Training { .. } => "training",
                skyport_core::Error::EmptyDataset(_) => "empty_dataset",
                skyport_core::Error::Io(_) => "io",
                skyport_core::Error::Csv(_) => "csv",
                skyport_core::Error::Json(_) => "json",
            },
            CliError::Io { .. } => "io",
            CliError::Json(_) => "json",
            CliError::Csv(_) => "csv",
            CliError::Runtime(_) => "runtime",
        }
    }

    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Config(_) | CliError::MissingInput { .. } => EXIT_CONFIG,
            CliError::Core(skyport_core::Error::Spec(_) | skyport_core::Error::Argument(_)) => {
                EXIT_CONFIG
            }
            _ => EXIT_RUNTIME,
        }
    }

    /// The single-line JSON object printed to stderr on failure.
    pub fn to_json_line(&self) -> String {
        serde_json::json!({
            "error": self.kind(),
            "message": self.to_string().replace('\n', " "),
            "exit_code": self.exit_code(),
        })
        .to_string()
    }
}
