//! Config-driven experiment runner for `riemopt`.
//!
//! Exit codes: 0 when every applicable certificate holds and every requested
//! audit passes, 1 on configuration or I/O errors, 2 when a certificate or
//! audit fails.

pub mod config;
pub mod experiment;
pub mod output;
pub mod summary;

use std::path::PathBuf;

pub use config::{load_config, parse_config, ConfigFile};
pub use experiment::{audit_config, run_config, run_experiment, ExperimentResult, Tolerances};
pub use summary::{collect_rows, summary_csv, SummaryRow};

pub const EXIT_OK: i32 = 0;
pub const EXIT_ERROR: i32 = 1;
pub const EXIT_FAILED: i32 = 2;

#[derive(Debug, thiserror::Error)]
pub enum CliError {
    #[error("{0}")]
    Config(String),
    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        source: std::io::Error,
    },
}
