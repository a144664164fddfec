//! Experiment harness behind the `hardstab` binary: the certainty-equivalent
//! LQR sample-size search, the co-stabilizability sweep, configuration files
//! and SVG charts.

#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod ce_lqr;
pub mod config;
pub mod error;
pub mod parse;
pub mod plot;
pub mod sweep;

pub use ce_lqr::{run_ce_lqr, CeLqrConfig, CeLqrResult, CeLqrRow, EstimationPath, GridSpec, RowStatus};
pub use config::ConfigFile;
pub use error::{HarnessError, Result};
pub use plot::render_plot;
pub use sweep::{run_lmi_sweep, write_sweep_csv, SweepRow};
