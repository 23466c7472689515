//! Library side of the `lrpm` command-line tool.

pub mod commands;
pub mod config;
pub mod plot;
pub mod selftest;
