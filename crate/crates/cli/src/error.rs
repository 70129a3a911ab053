use thiserror::Error;

/// Everything that can stop a run.
#[derive(Debug, Error)]
pub enum CliError {
    #[error("invalid config field `{field}`: {reason}")]
    Config { field: String, reason: String },
    #[error("could not parse config: {0}")]
    Parse(#[from] serde_json::Error),
    #[error("numerical failure{}: {source}", context.as_deref().map(|c| format!(" at {c}")).unwrap_or_default())]
    Numerical {
        source: chaos_probe_core::Error,
        context: Option<String>,
    },
    #[error(transparent)]
    Io(#[from] std::io::Error),
    #[error(transparent)]
    Csv(#[from] csv::Error),
    #[error("worker pool: {0}")]
    Pool(#[from] rayon::ThreadPoolBuildError),
}

impl CliError {
    pub fn config(field: impl Into<String>, reason: impl Into<String>) -> Self {
        CliError::Config {
            field: field.into(),
            reason: reason.into(),
        }
    }

    /// Process exit status: 2 for bad input, 3 for numerical failures.
    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Config { .. } | CliError::Parse(_) => 2,
            CliError::Numerical { .. } => 3,
            _ => 1,
        }
    }
}

impl From<chaos_probe_core::Error> for CliError {
    fn from(source: chaos_probe_core::Error) -> Self {
        CliError::Numerical {
            source,
            context: None,
        }
    }
}

/// Attaches the sweep value that triggered a numerical error.
pub(crate) trait Context<T> {
    fn at(self, what: impl FnOnce() -> String) -> Result<T, CliError>;
}

impl<T> Context<T> for Result<T, chaos_probe_core::Error> {
    fn at(self, what: impl FnOnce() -> String) -> Result<T, CliError> {
        self.map_err(|source| CliError::Numerical {
            source,
            context: Some(what()),
        })
    }
}

pub type Result<T, E = CliError> = std::result::Result<T, E>;
