//! Scriptable workflow around the `mpsbench` engine: single runs, parameter
//! sweeps, phase classification, SVG plots and exact-oracle checks.

pub mod classify;
pub mod config;
pub mod manifest;
pub mod plot;
pub mod runner;
pub mod sweep;
