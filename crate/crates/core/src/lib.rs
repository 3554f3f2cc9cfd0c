//! Symbolic dynamics models for model-based control.
//!
//! Compact per-dimension expressions are learned from a handful of
//! simulated episodes by genetic programming, driven by a sampling-based
//! MPC controller, and adapted to shifted dynamics with small residual
//! networks trained on a few target-domain episodes.

pub mod cost;
pub mod dataset;
pub mod dynamics;
pub mod error;
pub mod mppi;
pub mod neural;
pub mod pipeline;
pub mod seed;
pub mod sim;
pub mod symreg;
pub mod trajlog;
pub mod types;

pub use cost::{avg_position_error, quat_distance, step_cost, yaw_distance};
pub use dataset::Dataset;
pub use dynamics::Dynamics;
pub use error::{Error, Result};
pub use types::{ActionBounds, ActionVec, CostWeights, Platform, StateVec, Termination, Trajectory, Transition};
