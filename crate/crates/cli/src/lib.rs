//! Command-line front end: configuration, experiment dispatch and output.

pub mod config;
pub mod output;
pub mod run;
