//! Error type shared by all commands, carrying the process exit code.
//!
//! Exit codes: 0 success, 1 validation failure (bad data, failed
//! checks), 2 usage error (bad flags, missing input files), 3 internal
//! error (write failures, serialization bugs). Clap's own parse errors
//! also exit with 2.

use std::fmt;

/// A command failure with its exit-code category.
#[derive(Debug)]
pub enum CliError {
    /// The invocation itself is wrong: unknown flags, missing inputs.
    Usage(String),
    /// Inputs were readable but failed a semantic check.
    Validation(String),
    /// The tool itself failed while emitting outputs.
    Internal(String),
}

impl CliError {
    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Usage(_) => 2,
            CliError::Validation(_) => 1,
            CliError::Internal(_) => 3,
        }
    }
}

impl fmt::Display for CliError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            CliError::Usage(m) => write!(f, "usage error: {m}"),
            CliError::Validation(m) => write!(f, "validation error: {m}"),
            CliError::Internal(m) => write!(f, "internal error: {m}"),
        }
    }
}

impl std::error::Error for CliError {}

impl From<gavel::corpus::CorpusError> for CliError {
    fn from(e: gavel::corpus::CorpusError) -> Self {
        CliError::Validation(e.to_string())
    }
}

impl From<gavel::corpus::SchemaError> for CliError {
    fn from(e: gavel::corpus::SchemaError) -> Self {
        CliError::Validation(e.to_string())
    }
}

impl From<gavel::experiments::ExperimentError> for CliError {
    fn from(e: gavel::experiments::ExperimentError) -> Self {
        CliError::Validation(e.to_string())
    }
}

impl From<gavel::synthgen::SynthError> for CliError {
    fn from(e: gavel::synthgen::SynthError) -> Self {
        CliError::Validation(e.to_string())
    }
}

impl From<gavel::pseudonym::PseudonymError> for CliError {
    fn from(e: gavel::pseudonym::PseudonymError) -> Self {
        CliError::Validation(e.to_string())
    }
}

impl From<gavel::extraction::ExtractionError> for CliError {
    fn from(e: gavel::extraction::ExtractionError) -> Self {
        CliError::Validation(e.to_string())
    }
}

impl From<std::io::Error> for CliError {
    fn from(e: std::io::Error) -> Self {
        CliError::Internal(format!("io: {e}"))
    }
}

impl From<serde_json::Error> for CliError {
    fn from(e: serde_json::Error) -> Self {
        CliError::Internal(format!("serialization: {e}"))
    }
}

/// Maps "the file the user pointed at is unreadable" to a usage error,
/// keeping [`From<std::io::Error>`] for genuine output failures.
pub fn read_input(path: &std::path::Path) -> Result<Vec<u8>, CliError> {
    std::fs::read(path).map_err(|e| CliError::Usage(format!("cannot read {}: {e}", path.display())))
}

/// UTF-8 variant of [`read_input`].
pub fn read_input_text(path: &std::path::Path) -> Result<String, CliError> {
    String::from_utf8(read_input(path)?)
        .map_err(|_| CliError::Validation(format!("{} is not valid UTF-8", path.display())))
}
