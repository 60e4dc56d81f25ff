//! Staged pipeline around `lexlink-core`: configuration, synthetic
//! benchmark generation, stage orchestration with a hash-chained
//! manifest, and the error-to-exit-code mapping used by the binary.

pub mod config;
pub mod error;
pub mod manifest;
pub mod pipeline;
pub mod synthetic;

pub use config::PipelineConfig;
pub use error::PipelineError;
