//! Simulation harness: synthetic networks, ground truth, item pools and
//! repeated searches.

pub mod experiment;
pub mod generators;
pub mod morans;
pub mod pool;
pub mod run;
pub mod truth;

pub use experiment::{run_experiment, ExperimentConfig, ExperimentOutput};
pub use run::{run_search, RunMetrics};
