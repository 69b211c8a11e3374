//! Command implementations for the `synthpass` binary: generate, filter,
//! split, evaluate, inspect. The binary in `main.rs` is a thin clap
//! wrapper over these functions so integration tests can call them
//! directly.

pub mod commands;
pub mod options;

pub use commands::{cmd_evaluate, cmd_filter, cmd_generate, cmd_inspect, cmd_split};
pub use options::{
    resolve_config_path, scale_config, EvaluateOptions, FilterOptions, GenerateOptions,
    SplitMode, SplitOptions,
};

/// Environment variable naming the default directory that country config
/// directories live under (e.g. `fixtures/`).
pub const CONFIG_DIR_ENV: &str = "SYNTHPASS_CONFIG_DIR";
