use thiserror::Error;

#[derive(Debug, Error)]
pub enum CliError {
    #[error("configuration error: {0}")]
    Config(String),
    #[error("{stage} failed: {source}")]
    Numerical {
        stage: String,
        #[source]
        source: modeqc_core::Error,
    },
    #[error("output error: {0}")]
    Io(#[from] std::io::Error),
}

impl CliError {
    /// 2 for configuration problems, 3 for numerical or output failures.
    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Config(_) => 2,
            CliError::Numerical { .. } | CliError::Io(_) => 3,
        }
    }

    pub fn stage(&self) -> &str {
        match self {
            CliError::Config(_) => "configuration",
            CliError::Numerical { stage, .. } => stage,
            CliError::Io(_) => "output",
        }
    }
}

impl From<csv::Error> for CliError {
    fn from(e: csv::Error) -> Self {
        CliError::Io(e.into())
    }
}

impl From<serde_json::Error> for CliError {
    fn from(e: serde_json::Error) -> Self {
        CliError::Io(e.into())
    }
}

/// Names the pipeline stage of a core failure.
pub trait Stage<T> {
    fn stage(self, stage: &str) -> Result<T, CliError>;
}

impl<T> Stage<T> for modeqc_core::Result<T> {
    fn stage(self, stage: &str) -> Result<T, CliError> {
        self.map_err(|source| CliError::Numerical { stage: stage.to_string(), source })
    }
}

/// Core rejections of device parameters are configuration errors.
pub fn invalid_config<T>(result: modeqc_core::Result<T>, what: &str) -> Result<T, CliError> {
    result.map_err(|e| CliError::Config(format!("{what}: {e}")))
}
