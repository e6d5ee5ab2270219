//! Experiment driver around `cdt-core`.
//!
//! An experiment is one JSON config plus a directory. `gen` writes the
//! dataset under `data/`, `train` writes `run/`, `eval` writes `eval/`,
//! `sweep` writes `sweep/` and `diagnose` writes `diagnose/`. Every command is
//! a deterministic function of the config and the master seed.

pub mod commands;
pub mod config;
pub mod output;
pub mod protocol;

pub use config::ExperimentConfig;
