//! Dynamical activity of open quantum systems under Markovian feedback, and the
//! speed limits and uncertainty relations it controls.

pub mod activity;
pub mod bounds;
pub mod error;
pub mod evolve;
pub mod generators;
pub mod linops;
pub mod models;
pub mod trajectories;

pub use error::{Error, Result};
