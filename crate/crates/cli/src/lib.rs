//! Library side of the `editdiff` command-line tool.

pub mod artifacts;
pub mod cli;
pub mod commands;
pub mod config;
pub mod error;
pub mod session;
