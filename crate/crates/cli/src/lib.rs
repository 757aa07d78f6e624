//! Configuration-driven pipeline around `foldscan-core`: synthetic cohorts,
//! preprocessing, model training, benchmarks, detection, latent exploration
//! and a hashed report, each stage writing under `<workdir>/<stage>/`.

pub mod artifacts;
pub mod config;
pub mod error;
pub mod stages;
pub mod workdir;

pub use config::PipelineConfig;
pub use error::{CliError, Result};
pub use stages::{run_pipeline, run_stage};
pub use workdir::{Stage, Workdir};
