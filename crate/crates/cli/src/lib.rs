//! The `neurograph` command line: cohort synthesis and validation, graph
//! construction, cross-validated training and attention explanations.

pub mod commands;
pub mod config;
pub mod logging;

use neurograph_core::Error;

pub use commands::{run_cli, Cli};
pub use config::PipelineConfig;

/// Process exit status for a successful command.
pub const EXIT_OK: i32 = 0;
/// Invalid input: cohort violations, bad configuration or arguments.
pub const EXIT_INVALID: i32 = 1;
/// Runtime failure: I/O, numeric breakdown, internal shape errors.
pub const EXIT_RUNTIME: i32 = 2;

/// Environment variable capping the worker thread count.
pub const THREADS_ENV: &str = "NEUROGRAPH_THREADS";

#[derive(Debug, thiserror::Error)]
pub enum CliError {
    #[error("[{stage}] {source}")]
    Stage {
        stage: &'static str,
        #[source]
        source: Error,
    },
    #[error("[validate] cohort has {0} violation(s)")]
    Invalid(usize),
}

impl CliError {
    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Invalid(_) => EXIT_INVALID,
            CliError::Stage { source, .. } => match source {
                Error::Argument(_) | Error::Data(_) | Error::Ingest { .. } | Error::Format { .. } | Error::Structure(_) => {
                    EXIT_INVALID
                }
                Error::Shape(_) | Error::Numeric { .. } | Error::Io { .. } => EXIT_RUNTIME,
            },
        }
    }
}

/// Tags core errors with the pipeline stage that raised them.
pub(crate) trait StageExt<T> {
    fn stage(self, stage: &'static str) -> Result<T, CliError>;
}

impl<T> StageExt<T> for Result<T, Error> {
    fn stage(self, stage: &'static str) -> Result<T, CliError> {
        self.map_err(|source| CliError::Stage { stage, source })
    }
}

/// Reads the thread cap from the environment, if set.
pub fn thread_cap() -> Result<Option<usize>, CliError> {
    match std::env::var(THREADS_ENV) {
        Err(_) => Ok(None),
        Ok(v) => match v.trim().parse::<usize>() {
            Ok(n) if n > 0 => Ok(Some(n)),
            _ => Err(CliError::Stage {
                stage: "setup",
                source: Error::Argument(format!("{THREADS_ENV} must be a positive integer, got `{v}`")),
            }),
        },
    }
}
