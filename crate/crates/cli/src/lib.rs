//! Command-line front end for `capcmk`: configuration, data ingestion,
//! solve orchestration, verification and export.

pub mod commands;
pub mod config;

use capcmk::Error;
use std::fmt;

/// Process exit codes.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Code {
    Ok = 0,
    VerifyFailed = 1,
    Warnings = 2,
    SolverFailed = 3,
    InvalidData = 4,
}

/// A failed command: exit code plus message.
#[derive(Debug, Clone)]
pub struct Failure {
    pub code: Code,
    pub message: String,
}

impl Failure {
    pub fn invalid(message: impl Into<String>) -> Self {
        Self { code: Code::InvalidData, message: message.into() }
    }

    pub fn solver(message: impl Into<String>) -> Self {
        Self { code: Code::SolverFailed, message: message.into() }
    }
}

impl fmt::Display for Failure {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.message)
    }
}

impl From<Error> for Failure {
    fn from(e: Error) -> Self {
        let code = match e {
            Error::EllipticityLost { .. }
            | Error::NoConvergence { .. }
            | Error::ContinuationStuck { .. }
            | Error::LinearSolve(_) => Code::SolverFailed,
            _ => Code::InvalidData,
        };
        Self { code, message: e.to_string() }
    }
}
