//! Configuration-driven experiment runner for the `pileup` solvers.

pub mod config;
pub mod output;
pub mod plot;
pub mod run;

pub use config::{ConfigError, Mode, RunConfig};
pub use run::{run, RunOptions, RunSummary};
