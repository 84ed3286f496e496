//! Simulation and spectral numerics for the random sliding puzzle on the
//! n x n torus: the blank performs a 1/5-lazy walk, swapping with whatever
//! piece it steps onto.

pub mod chains;
pub mod coupling_sim;
pub mod error;
pub mod experiment_cli;
pub mod parallel;
pub mod puzzle_group;
pub mod renewal_lab;
pub mod rng;
pub mod spectral_lab;
pub mod stat_appendix;
pub mod torus_core;

pub use error::{Error, Result};
