//! Benchmark harness for `irs-secrecy`: TOML run configuration, seeded
//! sweeps with CSV output, and the acceptance suite.

// `!(x > 0.0)` style guards are used on purpose so NaN is rejected too.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod acceptance;
pub mod config;
pub mod sweep;

pub use config::{load_config, RunConfig};
pub use sweep::{emit_csv, run_sweep};
