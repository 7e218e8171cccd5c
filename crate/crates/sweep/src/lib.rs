//! Experiment orchestration for the dichromatic-drive simulator: run
//! configuration, parallel area sweeps, sweet-spot refinement, the pulse-width
//! scan and the `dichro` command line.

pub mod cli;
pub mod config;
pub mod error;
pub mod optimize;
pub mod output;
pub mod scan;
pub mod sweep;

pub use error::{Result, SweepError};
