//! Command implementations behind the `retrolink` binary: configuration
//! loading, the run / sweep / patterns / selftest commands and their CSV and
//! JSON outputs.

pub mod commands;
pub mod output;
pub mod selftest;

pub use commands::{
    cmd_patterns, cmd_run, cmd_sweep, load_config, parse_duration, ConfigOptions, PatternMode,
    RunOutcome,
};
