use std::process::ExitCode;

#[derive(Debug, thiserror::Error)]
pub enum CliError {
    #[error("config error: {0}")]
    Config(String),

    #[error(transparent)]
    Core(#[from] csbp_core::Error),

    #[error("i/o error on {path}: {source}")]
    Io {
        path: String,
        #[source]
        source: std::io::Error,
    },
}

impl CliError {
    pub fn exit_code(&self) -> ExitCode {
        match self {
            CliError::Config(_) => ExitCode::from(2),
            // Model parameters that fail their family constraints are config errors.
            CliError::Core(csbp_core::Error::InvalidParameter { .. }) => ExitCode::from(2),
            CliError::Core(_) | CliError::Io { .. } => ExitCode::from(1),
        }
    }
}
