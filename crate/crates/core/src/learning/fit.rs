use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::curve::{CurveParams, BETA_MAX, C_MIN};
use super::kalman::{KalmanState, DEFAULT_ALPHA};
use crate::error::{Error, Result};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct PriorFitConfig {
    pub bootstrap_resamples: usize,
    /// `Q = q_scale · P`.
    pub q_scale: f64,
    /// `R = r_scale ·` pooled residual variance.
    pub r_scale: f64,
    pub alpha: f64,
    pub seed: u64,
}

impl Default for PriorFitConfig {
    fn default() -> Self {
        Self {
            bootstrap_resamples: 200,
            q_scale: 1e-4,
            r_scale: 1.0,
            alpha: DEFAULT_ALPHA,
            seed: 0,
        }
    }
}

const BETA_GRID: usize = 400;
const GOLDEN_ITERS: usize = 100;

/// Least-squares fit of `c + k·exp(-β·i)` to `(i, duration)` points.
///
/// The model is linear in `(c, k)` for fixed `β`, so `β` is searched on a
/// grid over `[0, BETA_MAX]`, refined by golden section, and `(c, k)` are
/// solved exactly at each candidate.
pub fn fit_curve(points: &[(u32, f64)]) -> Result<CurveParams> {
    let mut distinct: Vec<u32> = points.iter().map(|p| p.0).collect();
    distinct.sort_unstable();
    distinct.dedup();
    if distinct.len() < 3 {
        return Err(Error::DegenerateData(format!(
            "need at least 3 distinct iteration indices, got {}",
            distinct.len()
        )));
    }
    if points.iter().any(|p| !p.1.is_finite()) {
        return Err(Error::DegenerateData("non-finite duration".into()));
    }

    let groups = group_by_index(points);
    let sse = |beta: f64| -> (f64, CurveParams) {
        let params = solve_linear(&groups, beta);
        let err = groups
            .iter()
            .map(|g| {
                let m = params.mean_at(f64::from(g.i));
                g.syy - 2.0 * m * g.sy + g.n * m * m
            })
            .sum::<f64>();
        (err, params)
    };

    let step = BETA_MAX / BETA_GRID as f64;
    let (best_idx, _) = (0..=BETA_GRID)
        .map(|j| (j, sse(j as f64 * step).0))
        .fold((0, f64::INFINITY), |acc, (j, e)| if e < acc.1 { (j, e) } else { acc });

    let mut lo = (best_idx as f64 - 1.0).max(0.0) * step;
    let mut hi = ((best_idx + 1) as f64 * step).min(BETA_MAX);
    let inv_phi = (5f64.sqrt() - 1.0) / 2.0;
    let mut a = hi - inv_phi * (hi - lo);
    let mut b = lo + inv_phi * (hi - lo);
    let (mut fa, mut fb) = (sse(a).0, sse(b).0);
    for _ in 0..GOLDEN_ITERS {
        if fa <= fb {
            hi = b;
            b = a;
            fb = fa;
            a = hi - inv_phi * (hi - lo);
            fa = sse(a).0;
        } else {
            lo = a;
            a = b;
            fa = fb;
            b = lo + inv_phi * (hi - lo);
            fb = sse(b).0;
        }
    }
    let (err, params) = sse(0.5 * (lo + hi));
    let (grid_err, grid_params) = sse(best_idx as f64 * step);
    Ok(if grid_err < err { grid_params } else { params })
}

/// Sufficient statistics of the samples at one iteration index.
struct Group {
    i: u32,
    n: f64,
    sy: f64,
    syy: f64,
}

fn group_by_index(points: &[(u32, f64)]) -> Vec<Group> {
    let mut sorted = points.to_vec();
    sorted.sort_by_key(|p| p.0);
    let mut out: Vec<Group> = Vec::new();
    for (i, y) in sorted {
        match out.last_mut() {
            Some(g) if g.i == i => {
                g.n += 1.0;
                g.sy += y;
                g.syy += y * y;
            }
            _ => out.push(Group { i, n: 1.0, sy: y, syy: y * y }),
        }
    }
    out
}

/// Solves for `(c, k)` at fixed `β` with `k ≥ 0, c ≥ C_MIN`.
fn solve_linear(groups: &[Group], beta: f64) -> CurveParams {
    let n: f64 = groups.iter().map(|g| g.n).sum();
    let sy: f64 = groups.iter().map(|g| g.sy).sum();
    let flat = CurveParams::new((sy / n).max(C_MIN), 0.0, beta);
    if beta <= 0.0 {
        return flat;
    }
    let (mut se, mut see, mut sey) = (0.0, 0.0, 0.0);
    for g in groups {
        let e = (-beta * f64::from(g.i)).exp();
        se += g.n * e;
        see += g.n * e * e;
        sey += e * g.sy;
    }
    let det = n * see - se * se;
    if det.abs() <= 1e-12 * n * see.max(1e-300) {
        return flat;
    }
    let k = (n * sey - se * sy) / det;
    let c = (sy - k * se) / n;
    if k < 0.0 {
        return flat;
    }
    if c < C_MIN {
        // Pin the asymptote and refit the surplus alone.
        let k = ((sey - C_MIN * se) / see).max(0.0);
        return CurveParams::new(C_MIN, k, beta);
    }
    CurveParams::new(c, k, beta)
}

/// Fits a population prior from per-worker `(i, duration)` traces.
///
/// The state is the fit of all pooled samples. Its covariance comes from a
/// worker-level bootstrap: the covariance of fits over resampled worker
/// sets, multiplied by the resample size so that it describes how far one
/// individual's curve may sit from the population curve rather than how
/// precisely the population mean is known. The observation noise is the
/// variance of the pooled residuals.
pub fn fit_population_prior(workers: &[Vec<(u32, f64)>], cfg: &PriorFitConfig) -> Result<KalmanState> {
    if workers.len() < 2 {
        return Err(Error::DegenerateData(format!(
            "need at least 2 workers, got {}",
            workers.len()
        )));
    }
    if cfg.bootstrap_resamples < 2 {
        return Err(Error::Config("bootstrap_resamples must be at least 2".into()));
    }
    let pooled: Vec<(u32, f64)> = workers.iter().flatten().copied().collect();
    let x = fit_curve(&pooled)?;

    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    let n = workers.len();
    let mut fits = Vec::with_capacity(cfg.bootstrap_resamples);
    let mut sample = Vec::with_capacity(pooled.len());
    for _ in 0..cfg.bootstrap_resamples {
        sample.clear();
        for _ in 0..n {
            sample.extend_from_slice(&workers[rng.random_range(0..n)]);
        }
        if let Ok(f) = fit_curve(&sample) {
            fits.push(f.as_array());
        }
    }
    // β is weakly identified: a few resamples run off along the (k, β)
    // ridge and would swamp the covariance. Keep the central 90% in β.
    fits.sort_by(|a, b| a[2].total_cmp(&b[2]));
    let cut = fits.len() / 20;
    fits.truncate(fits.len() - cut);
    fits.drain(..cut);
    if fits.len() < 2 {
        return Err(Error::DegenerateData("bootstrap fits failed".into()));
    }

    let m = fits.len() as f64;
    let mut mean = [0.0; 3];
    for f in &fits {
        for d in 0..3 {
            mean[d] += f[d] / m;
        }
    }
    let mut p = [[0.0; 3]; 3];
    for f in &fits {
        for r in 0..3 {
            for c in 0..3 {
                p[r][c] += (f[r] - mean[r]) * (f[c] - mean[c]) / (m - 1.0);
            }
        }
    }
    let scale = n as f64;
    let mut q = [[0.0; 3]; 3];
    for r in 0..3 {
        for c in 0..3 {
            p[r][c] *= scale;
            q[r][c] = cfg.q_scale * p[r][c];
        }
    }
    let dof = pooled.len().saturating_sub(3).max(1) as f64;
    let sse: f64 = pooled.iter().map(|&(i, y)| (y - x.mean_at(f64::from(i))).powi(2)).sum();
    let r = cfg.r_scale * sse / dof;

    Ok(KalmanState {
        x,
        p,
        q,
        r,
        alpha: cfg.alpha,
        residual_std: r.sqrt(),
    })
}
