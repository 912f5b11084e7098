//! Uncertainty-aware collision prediction for model-based RL in a planar simulator.
pub mod cost;
pub mod encoding;
pub mod ensemble;
pub mod error;
pub mod harness;
mod io;
pub mod nn;
pub mod planner;
pub mod profile;
pub mod rl;
pub mod sim;
pub use error::{Error, Result};
