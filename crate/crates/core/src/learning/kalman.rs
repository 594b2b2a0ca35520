use nalgebra::{Matrix3, RowVector3, Vector3};
use serde::{Deserialize, Serialize};

use super::curve::CurveParams;
use crate::gaussian::GaussianDist;
use crate::model::{AgentId, TaskId};

/// Default forgetting factor for the adaptive noise estimates.
pub const DEFAULT_ALPHA: f64 = 0.9;

/// Innovation variances below this are treated as "nothing to learn".
const MIN_INNOVATION_VARIANCE: f64 = 1e-12;

/// Filter state for one (agent, task) learning curve.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct KalmanState {
    /// Current curve estimate.
    pub x: CurveParams,
    /// Covariance of `x` in `(c, k, β)` order.
    pub p: [[f64; 3]; 3],
    /// Process-noise covariance.
    pub q: [[f64; 3]; 3],
    /// Observation-noise variance in s².
    pub r: f64,
    pub alpha: f64,
    /// Always `sqrt(r)`.
    pub residual_std: f64,
}

impl KalmanState {
    /// A curve known exactly with no observation noise (robots).
    pub fn fixed(x: CurveParams) -> Self {
        Self::known(x, 0.0)
    }

    /// A curve known exactly whose observations scatter with `noise_std`.
    pub fn known(x: CurveParams, noise_std: f64) -> Self {
        Self {
            x,
            p: [[0.0; 3]; 3],
            q: [[0.0; 3]; 3],
            r: noise_std * noise_std,
            alpha: DEFAULT_ALPHA,
            residual_std: noise_std,
        }
    }

    pub fn covariance(&self) -> Matrix3<f64> {
        to_matrix(&self.p)
    }

    /// Variance of the predicted mean at repetition `i` due to parameter
    /// uncertainty alone.
    pub fn parameter_variance_at(&self, i: u32) -> f64 {
        let h = RowVector3::from(self.x.gradient_at(f64::from(i)));
        (h * self.covariance() * h.transpose())[(0, 0)].max(0.0)
    }

    /// Measurement update with the duration observed at repetition `i`.
    pub fn updated(&self, i: u32, observed: f64) -> Self {
        let it = f64::from(i);
        let h = RowVector3::from(self.x.gradient_at(it));
        let p = self.covariance();
        let q = to_matrix(&self.q);

        let predicted_var = (h * p * h.transpose())[(0, 0)];
        let s = predicted_var + self.r;
        if !(s > MIN_INNOVATION_VARIANCE) || !s.is_finite() {
            return self.clone();
        }

        let innovation = observed - self.x.mean_at(it);
        let gain: Vector3<f64> = p * h.transpose() / s;
        let correction = gain * innovation;

        let x = CurveParams::from_array((Vector3::from(self.x.as_array()) + correction).into())
            .clamped();

        // Joseph form keeps P positive semidefinite under rounding.
        let ikh = Matrix3::identity() - gain * h;
        let mut p_next = ikh * p * ikh.transpose() + gain * self.r * gain.transpose() + q;
        p_next = symmetrize(&p_next);

        let post_residual = observed - x.mean_at(it);
        let a = self.alpha;
        let r = a * self.r + (1.0 - a) * (post_residual * post_residual + predicted_var);
        let q_next = symmetrize(&(q * a + correction * correction.transpose() * (1.0 - a)));

        Self {
            x,
            p: from_matrix(&p_next),
            q: from_matrix(&q_next),
            r,
            alpha: self.alpha,
            residual_std: r.sqrt(),
        }
    }
}

/// One executed repetition of a task by an agent.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DurationObservation {
    pub agent_id: AgentId,
    pub task_id: TaskId,
    /// The agent's cumulative repetition count for this task, from 1.
    pub iteration_index: u32,
    pub observed_duration: f64,
}

pub fn kalman_update(state: &KalmanState, obs: &DurationObservation) -> KalmanState {
    state.updated(obs.iteration_index, obs.observed_duration)
}

/// Predicted duration distribution at repetition `i`: parameter
/// uncertainty plus observation noise.
pub fn project_duration(state: &KalmanState, i: u32) -> GaussianDist {
    let mean = state.x.mean_at(f64::from(i));
    let var = state.parameter_variance_at(i) + state.r.max(0.0);
    GaussianDist::new(mean, var.sqrt())
}

fn to_matrix(a: &[[f64; 3]; 3]) -> Matrix3<f64> {
    Matrix3::from_fn(|r, c| a[r][c])
}

fn from_matrix(m: &Matrix3<f64>) -> [[f64; 3]; 3] {
    let mut out = [[0.0; 3]; 3];
    for (r, row) in out.iter_mut().enumerate() {
        for (c, v) in row.iter_mut().enumerate() {
            *v = m[(r, c)];
        }
    }
    out
}

fn symmetrize(m: &Matrix3<f64>) -> Matrix3<f64> {
    (m + m.transpose()) * 0.5
}
