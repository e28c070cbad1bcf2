//! Experiment driver: analytic tables, oracle validation, simulation sweeps
//! and SVG charts for heterogeneous PS clusters.

pub mod chart;
pub mod cli;
pub mod config;
pub mod experiment;
pub mod table;
