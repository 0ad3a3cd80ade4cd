//! Report generation behind the `linflow` command-line tool.

pub mod canonical;
pub mod commands;
pub mod report;
