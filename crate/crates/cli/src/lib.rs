//! Sweep runner behind the `qkdfk` binary.

pub mod check;
pub mod config;
pub mod optimize;
pub mod output;
pub mod sweep;

pub use config::{ConfigError, SweepConfig};
pub use optimize::{brent_minimize, brent_multistart};
pub use sweep::{run_sweep, ResultRow, RunOptions};
