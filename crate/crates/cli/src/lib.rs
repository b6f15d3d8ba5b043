//! Batch runner for receiver sweeps: configuration, parallel evaluation and
//! CSV output with a JSON metadata sidecar.

pub mod config;
pub mod selftest;
pub mod sweep;

pub use config::ExperimentConfig;
pub use sweep::{run_sweep, write_csv, Row, SweepOutput, CSV_HEADER};

#[derive(Debug, thiserror::Error)]
pub enum CliError {
    #[error("invalid config field `{field}`: {reason}")]
    Field { field: String, reason: String },
    #[error("cannot parse config: {0}")]
    Config(String),
    #[error("{0}: {1}")]
    Io(String, std::io::Error),
    #[error(transparent)]
    Model(#[from] cqpolar::Error),
    #[error("csv: {0}")]
    Csv(#[from] csv::Error),
    #[error("worker pool: {0}")]
    Pool(String),
}

impl CliError {
    pub fn field(field: &str, reason: impl ToString) -> Self {
        CliError::Field {
            field: field.to_string(),
            reason: reason.to_string(),
        }
    }
}
