//! Experiments on rotationally symmetric mean curvature flow in the round
//! sphere: configuration, output files, plot scripts and the acceptance
//! suite. The numerics live in `rotmcf-core`.

pub mod acceptance;
pub mod commands;
pub mod config;
pub mod error;
pub mod output;
pub mod plots;
pub mod scan;

pub use config::ExperimentConfig;
pub use error::CliError;
