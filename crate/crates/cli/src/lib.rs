//! Command-line orchestration of the triage pipeline: synthetic data,
//! exploration, baseline screening, tuning, training, evaluation,
//! explanation and a hashed report manifest.

pub mod commands;
pub mod config;
pub mod error;

pub use commands::{
    cmd_evaluate, cmd_explain, cmd_explore, cmd_report, cmd_run, cmd_screen, cmd_synth, cmd_train,
    cmd_tune, Layout,
};
pub use config::{RunConfig, Target, TaskSelection};
pub use error::CliError;
