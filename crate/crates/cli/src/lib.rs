//! Experiment runner for the offtrack learner: scenario configs, subcommands
//! and run artifacts.

pub mod commands;
pub mod config;
pub mod error;
pub mod report;
pub mod scenarios;
