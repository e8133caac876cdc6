//! Command-line laboratory for heat kernels on metric graphs: graph files,
//! experiment commands, result files and the acceptance suite.

pub mod acceptance;
pub mod cli;
pub mod commands;
pub mod error;
pub mod io;
pub mod output;
pub mod parallel;

pub use cli::run;
