//! Front end of the `kinex` binary: Monte Carlo runs, kinetic steady
//! states, relaxation measurements and Gamma residual curves, each written
//! to a run directory with a digest manifest.

pub mod config;
pub mod error;
pub mod manifest;
pub mod run;
