//! Files, external solvers and the command line around `uqforge-core`.
//!
//! A study is driven by a TOML configuration (see [`config`]) and runs in
//! stages that communicate through files in one output directory:
//!
//! | stage     | reads                         | writes                              |
//! |-----------|-------------------------------|-------------------------------------|
//! | `sample`  | configuration                 | `design.csv`                        |
//! | `run`     | `design.csv`                  | `responses.csv`                     |
//! | `fit`     | `design.csv`, `responses.csv` | `surrogate.json`, `fit_report.csv`  |
//! | `predict` | `surrogate.json`, points      | `predictions.csv`                   |
//! | `moments` | `surrogate.json`              | `moments.csv`                       |
//! | `sobol`   | `surrogate.json`              | `sobol/<output>.csv`, `sobol.txt`   |
//! | `study`   | configuration                 | all of the above                    |
//!
//! Every stage also writes `manifest_<stage>.json` with the effective
//! configuration, the seeds and SHA-256 digests of its inputs and outputs.

pub mod cli;
pub mod config;
pub mod csvio;
mod error;
pub mod manifest;
pub mod pipeline;
pub mod runner;
pub mod serial;
pub mod surrogate;

pub use error::{Error, Result};
