//! Experiment runner, file formats and command-line front end for
//! `cimnet-core`.

pub mod error;
pub mod eval;
pub mod experiment;
pub mod io;

pub use error::{ConfigError, Error};
pub use eval::{CachedCompiler, Evaluator};
pub use experiment::{run_experiment, run_search, ExperimentConfig, SearchSpec, Summary};
