//! Configurable experiments on the soliton laboratory, their on-disk
//! reports and the parallel speed sweep.

// NaN must fail the `!(x > 0)` style guards, and index loops mirror the
// nodal formulas.
#![allow(clippy::neg_cmp_op_on_partial_ord, clippy::needless_range_loop)]

pub mod config;
pub mod experiments;
pub mod output;
pub mod perturb;
pub mod sweep;

pub use config::{ConfigError, Experiment, ExperimentConfig};
pub use experiments::run;
pub use output::{RunReport, Status, Summary};
