//! The four-phase pipeline as library calls; the binary is a thin wrapper.

pub mod commands;
pub mod config;

pub use commands::{cmd_fidelity, cmd_fit_generate, cmd_prepare, cmd_report, cmd_utility, PrepareSummary};
pub use config::{GenerateConfig, InputSource, RunConfig, SplitConfig, UtilityConfig};
