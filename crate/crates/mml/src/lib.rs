//! Std companion to `mml-core`: chain-spec files, parallel execution, CSV
//! reports, the verification suites and the `mml` command line.

pub mod chainfile;
pub mod cli;
pub mod config;
pub mod descriptor;
pub mod exec;
pub mod output;
pub mod verify;
