//! Experiment runner for the gamlab toolkit: configuration, resumable cell
//! execution, tables and shape plots.

pub mod config;
pub mod error;
pub mod manifest;
pub mod plot;
pub mod runner;
pub mod summary;
mod tables;

pub use tables::summarize_run;
