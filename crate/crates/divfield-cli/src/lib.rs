//! Command-line driver for the divfield experiments.
//!
//! [`pipeline::run`] executes a configured experiment and writes its
//! artifacts; [`report::write_report`] summarizes a finished output directory.

pub mod cli;
pub mod config;
pub mod error;
pub mod io;
pub mod pipeline;
pub mod report;

/// The experiment chapter of the accompanying book, run as a doc-test.
#[doc = include_str!("../../../book/src/cli.md")]
pub mod book {}
