//! Configuration, file formats and mode runners behind the `evwg` binary.

// `!(x > 0.0)` is used on purpose: it also rejects NaN.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod config;
pub mod error;
pub mod grid;
pub mod output;
pub mod run;

pub use config::{load_config, parse_config, Mode, RunConfig};
pub use error::CliError;
pub use grid::{read_grid, write_grid, GridData, GridField};
pub use run::{resolve_out_dir, run};
