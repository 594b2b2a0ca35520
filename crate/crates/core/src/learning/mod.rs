//! Exponential learning curves and their online refinement.
//!
//! Each (agent, task) pair carries a curve `c + k·exp(-β·i)` over the
//! agent's repetition count `i` (first performance is `i = 1`). A
//! population prior is fitted from pooled worker traces and then refined
//! per individual with an adaptive extended Kalman filter.

mod curve;
mod fit;
mod kalman;

pub use curve::{curve_mean, CurveParams, BETA_MAX, C_MIN};
pub use fit::{fit_curve, fit_population_prior, PriorFitConfig};
pub use kalman::{kalman_update, project_duration, DurationObservation, KalmanState};
