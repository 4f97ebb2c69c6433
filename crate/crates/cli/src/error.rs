use std::io;

/// Process exit codes.
pub mod exit {
    pub const OK: i32 = 0;
    pub const FAILURE: i32 = 1;
    pub const USAGE: i32 = 2;
    pub const DIVERGED: i32 = 3;
    pub const DOMAIN: i32 = 4;
}

#[derive(Debug, thiserror::Error)]
pub enum CliError {
    #[error("{0}")]
    Usage(String),
    #[error(transparent)]
    Model(#[from] gmrf_geodesic::Error),
    #[error("io: {0}")]
    Io(#[from] io::Error),
    #[error("json: {0}")]
    Json(#[from] serde_json::Error),
    /// An integration stopped early. The partial results were written.
    #[error("diverged: {0}")]
    Diverged(String),
    #[error("validation failed: {0}")]
    Validation(String),
}

impl CliError {
    pub fn exit_code(&self) -> i32 {
        use gmrf_geodesic::Error as E;
        match self {
            CliError::Usage(_) | CliError::Json(_) => exit::USAGE,
            CliError::Diverged(_) => exit::DIVERGED,
            CliError::Model(E::SamplerDivergence { .. } | E::Integration(_)) => exit::DIVERGED,
            CliError::Model(_) => exit::DOMAIN,
            CliError::Io(_) | CliError::Validation(_) => exit::FAILURE,
        }
    }
}
