//! Command line and HTTP front end for a shotgraph archive.

pub mod commands;
pub mod error;
pub mod http;
pub mod output;

pub use commands::{run, Cli, Command};
pub use error::{ApiError, ErrorCode};
pub use http::{router, AppState};
pub use output::{Format, Table};
