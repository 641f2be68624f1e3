//! File formats, datasets, training driver, benchmarks and the command line
//! for the PMSN engine. The numerics live in `pmsn-core`.

pub mod bench;
pub mod checkpoint;
pub mod cli;
pub mod config;
pub mod container;
pub mod dataset;
pub mod error;
pub mod idx;
pub mod manifest;
pub mod report;
pub mod trainer;

pub use error::{Error, Result};
