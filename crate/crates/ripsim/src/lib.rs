//! Simulation and exact analytics for f-vectors of random Vietoris-Rips
//! complexes over Poisson point processes in `[-1/2, +1/2]^d` under the
//! uniform (L-infinity) norm.
//!
//! The `examples/` directory is the front door: each example is a runnable
//! walkthrough of one capability (sampling, clique counting, closed-form
//! bounds, moment decompositions, Monte Carlo experiments, phase sweeps,
//! difference operators). The `ripsim` binary wraps the same capabilities
//! behind subcommands for file-driven, reproducible runs.

pub mod analytic;
pub mod cli;
pub mod decomp;
pub mod error;
pub mod geometry;
pub mod montecarlo;
pub mod rips;

pub use error::{Error, Result};
