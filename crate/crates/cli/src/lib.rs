//! Experiment harness: configuration, commands, suites and reports.

pub mod commands;
pub mod config;
pub mod report;
pub mod suite;

pub use config::{ConfigError, ScenarioConfig};
pub use report::RunReport;

/// Failure of a command, mapped onto the process exit code.
#[derive(Debug)]
pub enum CliError {
    /// Invalid configuration or arguments; exit code 2.
    Config(String),
    /// Missing, corrupt or unwritable artifact; exit code 3.
    Artifact(String),
    /// Anything that went wrong while running an experiment; exit code 1.
    Run(String),
}

impl CliError {
    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Config(_) => 2,
            CliError::Artifact(_) => 3,
            CliError::Run(_) => 1,
        }
    }
}

impl std::fmt::Display for CliError {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            CliError::Config(m) => write!(f, "config error: {m}"),
            CliError::Artifact(m) => write!(f, "artifact error: {m}"),
            CliError::Run(m) => write!(f, "{m}"),
        }
    }
}

impl std::error::Error for CliError {}

impl From<ConfigError> for CliError {
    fn from(e: ConfigError) -> Self {
        CliError::Config(e.0)
    }
}

impl From<symdyn_core::Error> for CliError {
    fn from(e: symdyn_core::Error) -> Self {
        match e {
            symdyn_core::Error::Io(e) => CliError::Artifact(e.to_string()),
            e => CliError::Run(e.to_string()),
        }
    }
}

/// Caps rayon's worker count from `SYM2REAL_THREADS` when it is set.
pub fn init_threads() -> Result<(), CliError> {
    let Ok(v) = std::env::var("SYM2REAL_THREADS") else { return Ok(()) };
    let n: usize = v
        .trim()
        .parse()
        .ok()
        .filter(|n| *n > 0)
        .ok_or_else(|| CliError::Config(format!("SYM2REAL_THREADS must be a positive integer, got `{v}`")))?;
    // a second initialisation in the same process keeps the first pool
    let _ = rayon::ThreadPoolBuilder::new().num_threads(n).build_global();
    Ok(())
}
