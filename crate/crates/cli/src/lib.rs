//! Batch driver: JSON configuration, presets, pipeline orchestration and
//! artifact emission.

pub mod config;
pub mod output;
pub mod presets;
pub mod run;

pub use config::{ConfigError, Mode, RunConfig};
pub use run::{run, Invocation, RunError, RunOutcome};
