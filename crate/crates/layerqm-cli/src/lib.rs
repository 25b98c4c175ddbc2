//! Configuration, job dispatch and table output for the `layerqm` binary.

pub mod config;
pub mod run;
pub mod table;

pub use config::{parse_config, parse_config_for, Format, JobConfig, Mode};
pub use run::run_job;
pub use table::{emit, ResultTable};

#[derive(Debug, thiserror::Error)]
pub enum CliError {
    #[error("config error: {0}")]
    Config(String),
    #[error("{0}")]
    Domain(String),
    #[error("i/o error: {0}")]
    Io(String),
}

impl CliError {
    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Config(_) => 2,
            CliError::Domain(_) => 3,
            CliError::Io(_) => 1,
        }
    }
}
