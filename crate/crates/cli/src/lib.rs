//! Experiment files, subcommand orchestration and result tables for `mvh`.

pub mod config;
pub mod run;
pub mod table;

pub use config::{parse_config, ConfigError, ExperimentConfig};
pub use run::{execute, CliError, Command, Outcome};
pub use table::{Cell, Format, ResultTable};
