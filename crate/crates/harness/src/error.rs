use thiserror::Error;

#[derive(Debug, Error)]
pub enum HarnessError {
    /// Bad or inconsistent configuration. Exit code 1.
    #[error("configuration error: {0}")]
    Config(String),
    /// Anything that fails after the configuration was accepted. Exit code 2.
    #[error("runtime error: {0}")]
    Runtime(String),
}

impl HarnessError {
    pub fn from_config(e: sram_mcmc::Error) -> Self {
        HarnessError::Config(e.to_string())
    }

    pub fn from_runtime(e: impl std::fmt::Display) -> Self {
        HarnessError::Runtime(e.to_string())
    }

    pub fn exit_code(&self) -> i32 {
        match self {
            HarnessError::Config(_) => 1,
            HarnessError::Runtime(_) => 2,
        }
    }
}

impl From<std::io::Error> for HarnessError {
    fn from(e: std::io::Error) -> Self {
        HarnessError::Runtime(e.to_string())
    }
}

impl From<csv::Error> for HarnessError {
    fn from(e: csv::Error) -> Self {
        HarnessError::Runtime(e.to_string())
    }
}

pub type Result<T, E = HarnessError> = std::result::Result<T, E>;
