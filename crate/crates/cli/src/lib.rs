//! Batch front end of the geometric DMP pipeline: resample a demonstration,
//! fit its path, roll it out under the demonstrated or an optimized timing
//! law, and analyse human-in-the-loop behaviour.

pub mod commands;
pub mod config;
pub mod error;

pub use config::PipelineConfig;
pub use error::CliError;
