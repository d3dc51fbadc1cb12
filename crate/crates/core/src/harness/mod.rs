//! Facility design catalog, synthetic experiments, scenario configuration and the
//! command-line driver.

mod catalog;
mod cli;
mod config;
mod sensor;

pub use catalog::*;
pub use cli::run_cli;
pub use config::*;
pub use sensor::*;
