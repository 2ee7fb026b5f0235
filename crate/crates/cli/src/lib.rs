//! Command-line front end: coloring benchmarks, batch simulation runs,
//! observer benchmarks and the live state server.

pub mod app;
pub mod bench;
pub mod manifest;
pub mod observe_bench;
pub mod protocol;
pub mod server;
pub mod simrun;

use thiserror::Error;

#[derive(Debug, Error)]
pub enum CliError {
    #[error("config error: {0}")]
    Config(String),
    #[error("{0}")]
    Other(String),
    #[error(transparent)]
    Io(#[from] std::io::Error),
    #[error(transparent)]
    Csv(#[from] csv::Error),
    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

impl CliError {
    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Config(_) => 2,
            _ => 1,
        }
    }
}
