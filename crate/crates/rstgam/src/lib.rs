//! File formats, parallel simulation studies and the `rstgam` command line
//! on top of `rstgam-core`.

pub mod cli;
pub mod error;
pub mod formats;
pub mod study;

pub use error::{CliError, ErrorKind, FormatError};
