//! Experiments, CSV output and the command-line interface on top of
//! `ridgeshift-core`.

pub mod cli;
pub mod config;
pub mod sweep;
pub mod table;
