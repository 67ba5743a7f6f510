//! The `yearsense` command-line tool: experiment collection, analyses,
//! synthetic data, SVG figures and a manifest for every run.

pub mod cli;
pub mod commands;
pub mod config;
pub mod manifest;
pub mod svg;

use yearsense::Error;

/// Process exit status for an error: 2 for bad invocations, 1 for data.
pub fn exit_code(err: &Error) -> i32 {
    match err {
        Error::Config(_) => 2,
        _ => 1,
    }
}
