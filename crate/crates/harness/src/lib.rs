//! Experiment configuration, Monte Carlo driver and result files for the
//! `shmf` command line tool.

#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod commands;
pub mod config;
pub mod control;
pub mod mc;
pub mod output;
pub mod verify;

pub use config::{ConfigError, Experiment, ExperimentConfig};
pub use mc::{run_monte_carlo, wilson_interval, McResult};
