//! Library half of the `dnad` binary: configuration, snapshot I/O and the
//! subcommand implementations, kept here so integration tests can call them.

pub mod commands;
pub mod config;
pub mod io;
