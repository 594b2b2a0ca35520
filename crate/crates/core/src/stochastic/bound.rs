//! Gaussian upper bound on the maximum of independent normals.
//!
//! The maximum of normals has no closed form, so it is replaced by a single
//! normal `g` whose CDF lies below the product of the input CDFs. Starting
//! from the rightmost mean and the average spread, `g` is shifted right (and
//! widened when shifting alone cannot succeed) until dominance holds at a
//! set of check points.

use serde::{Deserialize, Serialize};

use crate::gaussian::GaussianDist;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct BoundConfig {
    /// Points spaced uniformly over `μ ± core_span·σ`.
    pub core_points: usize,
    pub core_span: f64,
    /// Points on each side between the core and `tail_span·σ` (the right
    /// tail also reaches past every input's own `tail_span·σ`).
    pub tail_points: usize,
    pub tail_span: f64,
    /// Allowed excess of `F_g` over the product CDF at a check point.
    pub tolerance: f64,
    /// Step sizes are `σ / step_divisor`.
    pub step_divisor: f64,
    pub max_mu_steps: usize,
    pub max_sigma_steps: usize,
}

impl Default for BoundConfig {
    fn default() -> Self {
        Self {
            core_points: 12,
            core_span: 3.0,
            tail_points: 12,
            tail_span: 6.0,
            tolerance: 5e-10,
            step_divisor: 10.0,
            max_mu_steps: 100,
            max_sigma_steps: 100,
        }
    }
}

impl BoundConfig {
    /// Only the 12 core points, no tail guard.
    pub fn core_only() -> Self {
        Self {
            tail_points: 0,
            ..Self::default()
        }
    }
}

/// Upper-bound distribution of `max(inputs)` with the default check.
pub fn max_gaussian_ub(inputs: &[GaussianDist]) -> GaussianDist {
    max_gaussian_ub_with(inputs, &BoundConfig::default())
}

pub fn max_gaussian_ub_with(inputs: &[GaussianDist], cfg: &BoundConfig) -> GaussianDist {
    assert!(!inputs.is_empty(), "max of an empty set");
    if inputs.len() == 1 {
        return inputs[0];
    }
    let mu0 = inputs.iter().map(|d| d.mean).fold(f64::NEG_INFINITY, f64::max);
    let sigma0 = inputs.iter().map(|d| d.stddev).sum::<f64>() / inputs.len() as f64;
    if sigma0 == 0.0 {
        return GaussianDist::point(mu0);
    }

    let sigma_step = sigma0 / cfg.step_divisor;
    for s in 0..=cfg.max_sigma_steps {
        let sigma = sigma0 + s as f64 * sigma_step;
        let mu_step = sigma / cfg.step_divisor;
        for m in 0..=cfg.max_mu_steps {
            let g = GaussianDist::new(mu0 + m as f64 * mu_step, sigma);
            if dominates(&g, inputs, cfg) {
                return g;
            }
        }
    }

    // Shifting far enough always succeeds on a finite check set.
    let mu_step = sigma0 / cfg.step_divisor;
    let mut mu = mu0 + (cfg.max_mu_steps + 1) as f64 * mu_step;
    loop {
        let g = GaussianDist::new(mu, sigma0);
        if dominates(&g, inputs, cfg) {
            return g;
        }
        mu += mu_step;
    }
}

/// Product of the input CDFs: the CDF of the maximum.
pub fn max_cdf(inputs: &[GaussianDist], y: f64) -> f64 {
    inputs.iter().map(|d| d.cdf(y)).product()
}

/// Whether `F_g ≤ Π F_i + tolerance` at every check point of `g`.
pub fn dominates(g: &GaussianDist, inputs: &[GaussianDist], cfg: &BoundConfig) -> bool {
    let ok = |y: f64| g.cdf(y) <= max_cdf(inputs, y) + cfg.tolerance;
    let (mu, sigma) = (g.mean, g.stddev);

    let core_lo = mu - cfg.core_span * sigma;
    let core_hi = mu + cfg.core_span * sigma;
    if !uniform_points(core_lo, core_hi, cfg.core_points).all(ok) {
        return false;
    }
    if cfg.tail_points == 0 {
        return true;
    }
    let left_lo = mu - cfg.tail_span * sigma;
    if !uniform_points(left_lo, core_lo, cfg.tail_points + 1).take(cfg.tail_points).all(ok) {
        return false;
    }
    let right_hi = inputs
        .iter()
        .map(|d| d.mean + cfg.tail_span * d.stddev)
        .fold(mu + cfg.tail_span * sigma, f64::max);
    uniform_points(core_hi, right_hi, cfg.tail_points + 1).skip(1).all(ok)
}

fn uniform_points(lo: f64, hi: f64, count: usize) -> impl Iterator<Item = f64> {
    let step = if count > 1 { (hi - lo) / (count - 1) as f64 } else { 0.0 };
    (0..count).map(move |j| lo + j as f64 * step)
}
