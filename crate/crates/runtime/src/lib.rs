//! Host-side companion to `fedv-core`: configuration, CSV datasets, dlog
//! table caching, the experiment driver and microbenchmarks.

pub mod bench;
pub mod cache;
pub mod config;
pub mod dataset;
pub mod error;
pub mod experiment;
pub mod model_file;
pub mod synth;

pub use config::RunConfig;
pub use error::{Result, RuntimeError};
