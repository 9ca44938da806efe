//! Library surface of the command-line front end; the binary in `main.rs`
//! is a thin wrapper so integration tests can drive the commands directly.

pub mod commands;
pub mod config;
pub mod report;

use std::fmt;

/// Exit-code classification: input errors exit 2, numerical failures exit 3;
/// a completed run (any verdict) exits 0.
#[derive(Debug)]
pub enum CliError {
    Input(String),
    Numerical(String),
}

impl CliError {
    pub fn exit_code(&self) -> u8 {
        match self {
            CliError::Input(_) => 2,
            CliError::Numerical(_) => 3,
        }
    }
}

impl fmt::Display for CliError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            CliError::Input(msg) => write!(f, "input error: {msg}"),
            CliError::Numerical(msg) => write!(f, "numerical failure: {msg}"),
        }
    }
}

impl std::error::Error for CliError {}
