//! Experiment driver for `hdsched`: TOML experiment files, batch runs and CSV output.

pub mod config;
pub mod output;
pub mod runner;

pub use config::{Experiment, ExperimentFile};
pub use runner::{run_experiment, Overrides, Report, Row};

#[cfg(doctest)]
mod book {
    #[doc = include_str!("../../../book/src/cli.md")]
    mod cli {}
}
