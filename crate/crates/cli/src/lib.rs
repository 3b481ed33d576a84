//! Pipeline orchestration for knowledge-graph augmented translation.

pub mod config;
pub mod io;
pub mod pipeline;
pub mod synth;

pub use config::{ConfigError, PipelineConfig, Strategy, Tokenization};
pub use pipeline::{run_pipeline, Manifest, PipelineError, RunOutcome};
