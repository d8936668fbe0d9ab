//! MNIST experiments on top of `rfelm-core`: IDX and cache files, core and
//! model persistence, experiment configuration and the sweep runner behind
//! the `rfelm` binary.

pub mod config;
pub mod core_file;
mod error;
pub mod experiment;
pub mod idx;
pub mod mnist;
pub mod model_file;
pub mod pipeline;

pub use config::{ConfigError, ExperimentConfig};
pub use error::{FileError, FileResult};
pub use experiment::{run_experiment, PointResult, RunError, RunOptions, Summary};
pub use mnist::{load_mnist, DataError, Mnist};
pub use model_file::{export_model, import_model};
