//! Experiment runner for the `aiqi` agents: TOML configuration, seeded
//! runs with CSV logs and snapshots, multi-seed sweeps, SVG plots and
//! oracle diagnostics on small environments.

pub mod config;
pub mod diag;
pub mod error;
pub mod plot;
pub mod runner;
pub mod sweep;

pub use config::{AgentName, EnvName, RunConfig};
pub use error::HarnessError;
pub use runner::{run_experiment, RunLog, Row, Session};
