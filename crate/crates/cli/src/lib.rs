//! Library surface of the command-line harness: configuration parsing, CSV
//! serialization, and the subcommand implementations. The `bmsm` binary is a
//! thin argument-and-exit-code wrapper around these.

pub mod commands;
pub mod config;
pub mod csv;
