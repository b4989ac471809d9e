//! Command-line front end for `gridfield`: argument definitions, the field
//! file format and the subcommand implementations.

pub mod args;
pub mod commands;
pub mod field_file;
pub mod output;

/// Version of the JSON report envelope.
pub const REPORT_VERSION: u32 = 1;
