//! File formats, checkpoints, the experiment harness and the `phonexl`
//! command line, on top of `phonexl-core`.

pub mod checkpoint;
pub mod cli;
pub mod config;
pub mod error;
pub mod harness;
pub mod io;
pub mod metrics_log;

pub use config::RunConfig;
pub use error::Error;
