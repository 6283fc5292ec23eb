//! Experiment harness for `ldrkit`: SGD training on toy regression targets,
//! error decay against the number of blocks, displacement-rank sweeps, column
//! construction, matrix-vector benchmarks, and the model/config/report files
//! they read and write.

// `!(x > 0.0)` is used on purpose so NaN fails validation.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod bench;
pub mod config;
pub mod construct;
pub mod data;
pub mod decay;
pub mod error;
pub mod model_file;
pub mod rank_sweep;
pub mod report;
pub mod train;

pub use config::{ExperimentConfig, OptimizerConfig, PairConfig, TargetConfig};
pub use error::{CliError, Result};
pub use model_file::{load_model, parse_model, save_model, ModelFile};
