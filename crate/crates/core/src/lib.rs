//! Bayesian dose-response estimation for longitudinal panels with a
//! continuous treatment.
//!
//! Generalized propensity scores and outcome means are fit by weighted
//! estimating equations; posterior uncertainty comes from Bayesian-bootstrap
//! or truncated Dirichlet-process reweighting of whole trajectories.

pub mod dose_response;
pub mod error;
pub mod fmt;
pub mod gee;
pub mod gps;
mod linalg;
pub mod panel;
pub mod resample;
pub mod sim;
pub mod spline;
pub mod stats;

pub use error::{Error, Result};
