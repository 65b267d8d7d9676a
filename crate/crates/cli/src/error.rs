use thiserror::Error;

#[derive(Debug, Error)]
pub enum CliError {
    #[error("config: {0}")]
    Config(String),

    /// A library failure, tagged with the pipeline stage that raised it.
    #[error("{stage}: {source}")]
    Stage {
        stage: &'static str,
        #[source]
        source: subradiance::Error,
    },

    #[error("output: {0}")]
    Io(String),
}

impl CliError {
    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Config(_) => 2,
            CliError::Stage { source, .. } if !source.is_numerical() => 2,
            CliError::Stage { .. } => 3,
            CliError::Io(_) => 1,
        }
    }
}

impl From<subradiance::Error> for CliError {
    fn from(source: subradiance::Error) -> Self {
        CliError::Stage {
            stage: "config",
            source,
        }
    }
}

impl From<std::io::Error> for CliError {
    fn from(e: std::io::Error) -> Self {
        CliError::Io(e.to_string())
    }
}
