use thiserror::Error;

#[derive(Debug, Error)]
pub enum CliError {
    #[error("config error: {0}")]
    Config(String),

    #[error(transparent)]
    Runtime(collective::Error),

    #[error("{path}: {source}")]
    Output {
        path: String,
        #[source]
        source: std::io::Error,
    },
}

impl CliError {
    pub fn config(msg: impl Into<String>) -> Self {
        CliError::Config(msg.into())
    }

    pub fn config_from(e: collective::Error) -> Self {
        CliError::Config(e.to_string())
    }

    pub fn is_config(&self) -> bool {
        matches!(self, CliError::Config(_))
    }

    /// 2 for configuration problems, 3 for failures while running.
    pub fn exit_code(&self) -> i32 {
        if self.is_config() {
            2
        } else {
            3
        }
    }
}

impl From<collective::Error> for CliError {
    fn from(e: collective::Error) -> Self {
        if e.is_config() {
            CliError::Config(e.to_string())
        } else {
            CliError::Runtime(e)
        }
    }
}
