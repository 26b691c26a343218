//! Turbine-level wind power forecasting.
//!
//! The crate trains a GRU encoder-decoder on sliding windows of wind-speed
//! history. Each turbine's input is enriched with the histories of its k
//! nearest neighbours, a learned per-turbine embedding, and calendar features,
//! so one shared model serves every turbine on a farm.
//!
//! Start with the runnable programs under `examples/`; each one exercises a
//! single capability end to end. The `windcast` binary wraps the same library
//! calls behind subcommands for scripted use.

pub mod checkpoint;
mod cli;
pub mod config;
pub mod data;
pub mod eval;
pub mod graph;
pub mod manifest;
pub mod model;
pub mod tape;
pub mod tensor;
pub mod train;
mod util;

pub use cli::run;
pub use util::{atomic_write, sha256_file};
