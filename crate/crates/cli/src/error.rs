use thiserror::Error;
use vekua_core::VekuaError;

#[derive(Debug, Error)]
pub enum CliError {
    #[error("config error: {0}")]
    Config(String),
    #[error(transparent)]
    Core(#[from] VekuaError),
    #[error("i/o error: {0}")]
    Io(#[from] std::io::Error),
}

/// Process exit codes.
pub mod exit {
    pub const PASS: i32 = 0;
    pub const FAILURE: i32 = 1;
    pub const TOLERANCE: i32 = 2;
    pub const CONFIG: i32 = 3;
    pub const CONTRACTION: i32 = 4;
}

impl CliError {
    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Config(_) => exit::CONFIG,
            CliError::Core(VekuaError::ContractionViolated { .. }) => exit::CONTRACTION,
            CliError::Core(
                VekuaError::InvalidDomain(_)
                | VekuaError::InvalidParameter(_)
                | VekuaError::NotABall
                | VekuaError::Json(_)
                | VekuaError::Format(_),
            ) => exit::CONFIG,
            _ => exit::FAILURE,
        }
    }
}
