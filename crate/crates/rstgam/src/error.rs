use std::path::{Path, PathBuf};

use rstgam_core::error::{DesignError, MeshError};
use serde::Serialize;
use thiserror::Error;

/// Failures reading or writing files.
#[derive(Debug, Error)]
pub enum FormatError {
    #[error("{}: {source}", path.display())]
    Io { path: PathBuf, source: std::io::Error },
    #[error("{what} line {line}: {message}")]
    Parse { what: &'static str, line: usize, message: String },
    #[error("invalid mesh: {0}")]
    Mesh(#[from] MeshError),
    #[error("invalid panel: {0}")]
    Design(#[from] DesignError),
    #[error("csv: {0}")]
    Csv(#[from] csv::Error),
    #[error("json: {0}")]
    Json(#[from] serde_json::Error),
}

impl FormatError {
    pub fn io(path: &Path, source: std::io::Error) -> Self {
        Self::Io { path: path.to_path_buf(), source }
    }

    pub fn parse(what: &'static str, line: usize, message: impl Into<String>) -> Self {
        Self::Parse { what, line, message: message.into() }
    }
}

/// Process exit codes.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "kebab-case")]
pub enum ErrorKind {
    Config,
    Data,
    Solver,
}

impl ErrorKind {
    pub fn exit_code(self) -> i32 {
        match self {
            Self::Config => 2,
            Self::Data => 3,
            Self::Solver => 4,
        }
    }
}

/// A command failure with its exit-code class.
#[derive(Debug, Error)]
#[error("{message}")]
pub struct CliError {
    pub kind: ErrorKind,
    pub message: String,
}

impl CliError {
    pub fn config(message: impl Into<String>) -> Self {
        Self { kind: ErrorKind::Config, message: message.into() }
    }

    pub fn data(message: impl Into<String>) -> Self {
        Self { kind: ErrorKind::Data, message: message.into() }
    }

    pub fn solver(message: impl Into<String>) -> Self {
        Self { kind: ErrorKind::Solver, message: message.into() }
    }

    /// Machine-readable form written to stderr and `error.json`.
    pub fn to_json(&self) -> String {
        #[derive(Serialize)]
        struct Report<'a> {
            error: ErrorKind,
            exit_code: i32,
            message: &'a str,
        }
        serde_json::to_string(&Report { error: self.kind, exit_code: self.kind.exit_code(), message: &self.message })
            .expect("error report serializes")
    }
}

impl From<FormatError> for CliError {
    fn from(e: FormatError) -> Self {
        match e {
            FormatError::Io { .. } | FormatError::Json(_) => Self::config(e.to_string()),
            _ => Self::data(e.to_string()),
        }
    }
}

impl From<rstgam_core::Error> for CliError {
    fn from(e: rstgam_core::Error) -> Self {
        use rstgam_core::error::{BasisError, RobustError};
        use rstgam_core::Error as E;
        let kind = match &e {
            E::Mesh(_) | E::Design(_) => ErrorKind::Data,
            E::Basis(BasisError::OutsideDomain { .. }) => ErrorKind::Data,
            E::Basis(_) => ErrorKind::Config,
            E::Solver(_) | E::Select(_) => ErrorKind::Solver,
            E::Robust(RobustError::Design(_)) => ErrorKind::Data,
            E::Robust(RobustError::Fold { .. }) => ErrorKind::Solver,
            E::Robust(_) => ErrorKind::Config,
        };
        Self { kind, message: e.to_string() }
    }
}
