//! Finish-time distributions of a schedule and its deadline robustness.

pub mod bound;
pub mod monte_carlo;
pub mod propagate;
pub mod quadrature;
pub mod risk;

pub use bound::{max_cdf, max_gaussian_ub, max_gaussian_ub_with, BoundConfig};
pub use monte_carlo::{empirical_quantile, monte_carlo_oracle, DeadlineSuccess, MonteCarloReport};
pub use propagate::{propagate, propagate_with, PropagationResult};
pub use quadrature::{quadrature_oracle, Grid, GridDensity, QuadratureResult};
pub use risk::{allocate_risk, check_robustness, check_robustness_with, deadline_refs, RiskAllocation, RiskShare};
