use std::path::PathBuf;

use thiserror::Error;

/// Process exit status for each failure class.
pub mod exit {
    pub const OK: u8 = 0;
    pub const EXPECTATION: u8 = 1;
    /// Reserved for command-line usage errors (clap's own code).
    pub const USAGE: u8 = 2;
    pub const PARSE: u8 = 3;
    pub const VALIDATION: u8 = 4;
    pub const RUNTIME: u8 = 5;
}

#[derive(Debug, Error)]
pub enum CliError {
    #[error("{}:{line}: {message}", path.display())]
    Parse {
        path: PathBuf,
        line: usize,
        message: String,
    },
    #[error("cannot read {}: {source}", path.display())]
    Input {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
    #[error("invalid scenario '{name}':\n  {}", problems.join("\n  "))]
    Validation { name: String, problems: Vec<String> },
    #[error("{context}: {source}")]
    Runtime {
        context: String,
        #[source]
        source: hetnoise_core::Error,
    },
    #[error("i/o: {0}")]
    Io(#[from] std::io::Error),
    #[error("{failed} of {total} expectations failed")]
    Expectation { failed: usize, total: usize },
}

impl CliError {
    pub fn exit_code(&self) -> u8 {
        match self {
            CliError::Parse { .. } | CliError::Input { .. } => exit::PARSE,
            CliError::Validation { .. } => exit::VALIDATION,
            CliError::Runtime { .. } | CliError::Io(_) => exit::RUNTIME,
            CliError::Expectation { .. } => exit::EXPECTATION,
        }
    }

    /// Wraps a core error, keeping file parse errors in the parse class.
    pub fn core(context: impl Into<String>, err: hetnoise_core::Error) -> Self {
        match err {
            hetnoise_core::Error::Parse { path, line, message } => CliError::Parse { path, line, message },
            source => CliError::Runtime {
                context: context.into(),
                source,
            },
        }
    }
}

pub type Result<T, E = CliError> = std::result::Result<T, E>;
