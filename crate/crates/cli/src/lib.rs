//! Configuration ingestion, task dispatch and artifact persistence for the
//! `coopdipole` command-line tool.

pub mod config;
pub mod presets;
pub mod run;

pub use config::{parse_config, parse_config_str, ConfigError, RunConfig, Task};
pub use run::{run, CliError, Manifest, RunRequest};

/// Environment variable consulted for the worker count when neither the
/// command line nor the config sets one.
pub const THREADS_ENV: &str = "COOPDIPOLE_THREADS";

/// Worker count: flag, then config, then environment, then logical cores.
pub fn resolve_threads(flag: Option<usize>, config: Option<usize>, env: Option<&str>) -> usize {
    flag.or(config)
        .or_else(|| env.and_then(|v| v.trim().parse().ok()).filter(|&n: &usize| n > 0))
        .unwrap_or_else(|| std::thread::available_parallelism().map_or(1, |n| n.get()))
        .max(1)
}
