//! Distribution theory of Parisian stopping times for one-dimensional
//! diffusions.
//!
//! A Parisian time is the first moment a process has spent a prescribed
//! duration inside a single excursion above (or below) a level. This crate
//! evaluates the closed-form transforms, ruin probabilities and meander
//! laws of those times for three diffusion families (Brownian motion with
//! drift, the three-dimensional Bessel process with drift, and reflected
//! Brownian motion), inverts the transforms numerically, and validates
//! everything against an independent Monte Carlo excursion simulator.

pub mod cli;
pub mod engine;
pub mod error;
pub mod inversion;
pub mod model;
pub mod montecarlo;
pub mod numerics;

pub use error::{Error, Result};
