use serde::{Deserialize, Serialize};

/// Smallest admissible asymptote, in seconds.
pub const C_MIN: f64 = 0.1;
/// Largest admissible learning rate.
pub const BETA_MAX: f64 = 5.0;

/// Parameters of `y(i) = c + k·exp(-β·i)`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CurveParams {
    /// Asymptotic duration in seconds.
    pub c: f64,
    /// Initial surplus over the asymptote in seconds.
    pub k: f64,
    pub beta: f64,
}

impl CurveParams {
    pub fn new(c: f64, k: f64, beta: f64) -> Self {
        Self { c, k, beta }
    }

    /// A curve that never changes: robots and other fixed-capability agents.
    pub fn constant(c: f64) -> Self {
        Self { c, k: 0.0, beta: 0.0 }
    }

    pub fn mean_at(&self, i: f64) -> f64 {
        self.c + self.k * (-self.beta * i).exp()
    }

    /// Gradient of the mean with respect to `(c, k, β)`.
    pub fn gradient_at(&self, i: f64) -> [f64; 3] {
        let e = (-self.beta * i).exp();
        [1.0, e, -self.k * i * e]
    }

    pub fn as_array(&self) -> [f64; 3] {
        [self.c, self.k, self.beta]
    }

    pub fn from_array(v: [f64; 3]) -> Self {
        Self {
            c: v[0],
            k: v[1],
            beta: v[2],
        }
    }

    /// Projects onto the physical region `c ≥ C_MIN, k ≥ 0, β ∈ [0, BETA_MAX]`.
    pub fn clamped(&self) -> Self {
        Self {
            c: self.c.max(C_MIN),
            k: self.k.max(0.0),
            beta: self.beta.clamp(0.0, BETA_MAX),
        }
    }
}

/// Mean duration at repetition `i`.
pub fn curve_mean(params: &CurveParams, i: u32) -> f64 {
    params.mean_at(f64::from(i))
}
