//! Normal distributions as `(mean, stddev)` pairs.
//!
//! A zero standard deviation is a point mass; its CDF is the step function
//! that is 0 below the mean and 1 at or above it.

use serde::{Deserialize, Serialize};
use statrs::function::erf::{erfc, erfc_inv};
use std::f64::consts::SQRT_2;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct GaussianDist {
    pub mean: f64,
    pub stddev: f64,
}

impl GaussianDist {
    pub fn new(mean: f64, stddev: f64) -> Self {
        debug_assert!(stddev >= 0.0, "negative stddev {stddev}");
        Self { mean, stddev }
    }

    pub fn point(value: f64) -> Self {
        Self {
            mean: value,
            stddev: 0.0,
        }
    }

    pub fn is_point(&self) -> bool {
        self.stddev == 0.0
    }

    pub fn variance(&self) -> f64 {
        self.stddev * self.stddev
    }

    pub fn cdf(&self, y: f64) -> f64 {
        if self.stddev == 0.0 {
            if y >= self.mean {
                1.0
            } else {
                0.0
            }
        } else {
            std_normal_cdf((y - self.mean) / self.stddev)
        }
    }

    pub fn pdf(&self, y: f64) -> f64 {
        let z = (y - self.mean) / self.stddev;
        (-0.5 * z * z).exp() / (self.stddev * (2.0 * std::f64::consts::PI).sqrt())
    }

    /// Value `y` with `cdf(y) = p`.
    pub fn quantile(&self, p: f64) -> f64 {
        self.mean + std_normal_quantile(p) * self.stddev
    }

    pub fn shifted(&self, by: f64) -> Self {
        Self {
            mean: self.mean + by,
            stddev: self.stddev,
        }
    }
}

/// Distribution of the sum of two independent normals.
pub fn sum_gaussian(a: GaussianDist, b: GaussianDist) -> GaussianDist {
    GaussianDist {
        mean: a.mean + b.mean,
        stddev: a.stddev.hypot(b.stddev),
    }
}

/// Standard normal CDF, accurate far into both tails.
pub fn std_normal_cdf(z: f64) -> f64 {
    0.5 * erfc(-z / SQRT_2)
}

/// Inverse of the standard normal CDF. `p` must lie in (0, 1).
pub fn std_normal_quantile(p: f64) -> f64 {
    -SQRT_2 * erfc_inv(2.0 * p)
}
