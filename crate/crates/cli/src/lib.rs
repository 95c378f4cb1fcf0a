//! Command-line front end: TOML scenario files, subcommands and exit codes.
//!
//! Exit codes: 0 success, 1 I/O failure, 2 validation failure (config,
//! atom, spectra, controls), 3 numerical failure (unstable step, reducible
//! system).

pub mod commands;
pub mod config;
