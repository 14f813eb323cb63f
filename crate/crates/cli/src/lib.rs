//! Library side of the `veilcache` binary. The three commands are plain
//! functions so they can be driven in-process as well as from the shell.

pub mod commands;
pub mod config;

use thiserror::Error;

pub use commands::{
    cmd_audit, cmd_rates, cmd_simulate, AuditArgs, AuditSummary, RatesArgs, RatesFormat, SimulateArgs, SimulateSummary,
};
pub use config::{CommonArgs, Mode, ResolvedSystem, RunConfig};

/// Process exit status.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ExitStatus {
    Success = 0,
    DecodeFailure = 1,
    PrivacyFailure = 2,
    InputError = 3,
    CapExceeded = 4,
}

impl ExitStatus {
    pub fn code(self) -> i32 {
        self as i32
    }
}

#[derive(Debug, Error)]
pub enum CliError {
    #[error("input error: {0}")]
    Input(String),
    #[error("i/o error: {0}")]
    Io(String),
}

impl CliError {
    pub fn status(&self) -> ExitStatus {
        ExitStatus::InputError
    }
}

impl From<std::io::Error> for CliError {
    fn from(e: std::io::Error) -> Self {
        CliError::Io(e.to_string())
    }
}
