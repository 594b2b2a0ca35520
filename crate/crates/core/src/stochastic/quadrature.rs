//! Grid-based finish-time densities: numerical max and convolution.
//!
//! Slow but exact up to grid resolution; used to validate the Gaussian
//! bound and as the baseline of the speedup benchmark.

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::gaussian::GaussianDist;
use crate::layout::Layout;
use crate::model::{IterRef, ProblemInstance, Schedule};

/// Tolerated deviation of an input density's total mass from 1.
pub const MASS_TOLERANCE: f64 = 1e-6;
pub const DEFAULT_GRID_POINTS: usize = 2048;

/// Uniform grid `lo + j·dx` for `j in 0..len`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Grid {
    pub lo: f64,
    pub dx: f64,
    pub len: usize,
}

impl Grid {
    /// `points` grid points spanning `[0, hi]`.
    pub fn spanning(hi: f64, points: usize) -> Self {
        assert!(points >= 2 && hi > 0.0, "grid needs two points and a positive range");
        Self {
            lo: 0.0,
            dx: hi / (points - 1) as f64,
            len: points,
        }
    }

    /// Grid over `[0, hi]` with spacing at most `dx`.
    pub fn with_spacing(hi: f64, dx: f64) -> Self {
        Self::spanning(hi, ((hi / dx).ceil() as usize + 1).max(2))
    }

    /// The default grid for a set of durations: `[0, Σ(μ + 6σ)]`.
    pub fn covering<'a>(durations: impl IntoIterator<Item = &'a GaussianDist>, points: usize) -> Self {
        let hi: f64 = durations.into_iter().map(|d| d.mean + 6.0 * d.stddev).sum();
        Self::spanning(hi.max(1.0), points)
    }

    pub fn x(&self, j: usize) -> f64 {
        self.lo + j as f64 * self.dx
    }

    pub fn hi(&self) -> f64 {
        self.x(self.len - 1)
    }
}

/// Probability mass at each grid point.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GridDensity {
    pub grid: Grid,
    pub mass: Vec<f64>,
}

impl GridDensity {
    /// Mass of `N(μ, σ)` per grid cell; mass below the grid goes to the
    /// first point, mass above it is dropped.
    pub fn from_gaussian(d: &GaussianDist, grid: Grid) -> Self {
        if d.is_point() {
            return Self::point(d.mean, grid);
        }
        let mut mass = Vec::with_capacity(grid.len);
        let mut below = 0.0;
        for j in 0..grid.len {
            let upper = d.cdf(grid.x(j) + 0.5 * grid.dx);
            mass.push(upper - below);
            below = upper;
        }
        Self { grid, mass }
    }

    /// Point mass at `v`, split linearly between the neighbouring points.
    pub fn point(v: f64, grid: Grid) -> Self {
        let mut mass = vec![0.0; grid.len];
        deposit(&mut mass, (v - grid.lo) / grid.dx, 1.0);
        Self { grid, mass }
    }

    pub fn total(&self) -> f64 {
        self.mass.iter().sum()
    }

    pub fn mean(&self) -> f64 {
        self.mass.iter().enumerate().map(|(j, m)| m * self.grid.x(j)).sum::<f64>() / self.total()
    }

    pub fn stddev(&self) -> f64 {
        let mu = self.mean();
        let var = self
            .mass
            .iter()
            .enumerate()
            .map(|(j, m)| m * (self.grid.x(j) - mu).powi(2))
            .sum::<f64>()
            / self.total();
        var.max(0.0).sqrt()
    }

    /// `P(X ≤ y)`, linear between grid points.
    pub fn cdf(&self, y: f64) -> f64 {
        let t = (y - self.grid.lo) / self.grid.dx;
        if t < 0.0 {
            return 0.0;
        }
        let j = t.floor() as usize;
        if j + 1 >= self.grid.len {
            return self.total();
        }
        let below: f64 = self.mass[..=j].iter().sum();
        below + (t - j as f64) * self.mass[j + 1]
    }

    /// Cumulative mass at each grid point.
    pub fn cumulative(&self) -> Vec<f64> {
        let mut acc = 0.0;
        self.mass
            .iter()
            .map(|m| {
                acc += m;
                acc
            })
            .collect()
    }

    /// Smallest grid value whose cumulative mass reaches `q`.
    pub fn quantile(&self, q: f64) -> f64 {
        let target = q * self.total();
        let mut acc = 0.0;
        for (j, m) in self.mass.iter().enumerate() {
            acc += m;
            if acc >= target {
                return self.grid.x(j);
            }
        }
        self.grid.hi()
    }
}

fn deposit(mass: &mut [f64], t: f64, m: f64) -> f64 {
    let t = t.max(0.0);
    let j = t.floor() as usize;
    let frac = t - j as f64;
    let mut lost = 0.0;
    for (idx, share) in [(j, m * (1.0 - frac)), (j + 1, m * frac)] {
        if share == 0.0 {
            continue;
        }
        match mass.get_mut(idx) {
            Some(slot) => *slot += share,
            None => lost += share,
        }
    }
    lost
}

/// Density of `a + b`; returns the result and the mass pushed off the grid.
pub fn convolve(a: &GridDensity, b: &GridDensity) -> (GridDensity, f64) {
    debug_assert_eq!(a.grid, b.grid);
    let g = a.grid;
    let n = g.len;
    // With lo = 0, x_i + x_j = x_{i+j}; otherwise the result is offset.
    let offset = g.lo / g.dx;
    let mut mass = vec![0.0; n];
    let mut lost = 0.0;
    if offset == 0.0 {
        for (i, &ma) in a.mass.iter().enumerate() {
            let room = n - i;
            for (j, &mb) in b.mass[..room].iter().enumerate() {
                mass[i + j] += ma * mb;
            }
            lost += ma * b.mass[room..].iter().sum::<f64>();
        }
    } else {
        for (i, &ma) in a.mass.iter().enumerate() {
            for (j, &mb) in b.mass.iter().enumerate() {
                lost += deposit(&mut mass, (i + j) as f64 + offset, ma * mb);
            }
        }
    }
    (GridDensity { grid: g, mass }, lost)
}

/// Density of `a + w` for a constant `w ≥ 0`.
pub fn shift(a: &GridDensity, w: f64) -> (GridDensity, f64) {
    if w == 0.0 {
        return (a.clone(), 0.0);
    }
    let mut mass = vec![0.0; a.grid.len];
    let steps = w / a.grid.dx;
    let lost = a
        .mass
        .iter()
        .enumerate()
        .map(|(j, &m)| if m == 0.0 { 0.0 } else { deposit(&mut mass, j as f64 + steps, m) })
        .sum();
    (GridDensity { grid: a.grid, mass }, lost)
}

/// Density of the maximum of independent variables (product of CDFs).
pub fn maximum(inputs: &[&GridDensity]) -> GridDensity {
    let grid = inputs[0].grid;
    let mut cdf = vec![1.0; grid.len];
    for d in inputs {
        for (c, f) in cdf.iter_mut().zip(d.cumulative()) {
            *c *= f;
        }
    }
    let mut prev = 0.0;
    let mass = cdf
        .iter()
        .map(|&c| {
            let m = c - prev;
            prev = c;
            m
        })
        .collect();
    GridDensity { grid, mass }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct QuadratureResult {
    #[serde(with = "crate::serde_util::iter_map")]
    pub finish: BTreeMap<IterRef, GridDensity>,
    pub makespan: GridDensity,
}

/// Finish-time densities of every iteration and of the makespan.
///
/// All densities must share one grid. Errors with `GridOverflow` if more
/// than `MASS_TOLERANCE` of probability leaves the grid.
pub fn quadrature_oracle(
    instance: &ProblemInstance,
    schedule: &Schedule,
    durations: &BTreeMap<IterRef, GridDensity>,
) -> Result<QuadratureResult> {
    let layout = Layout::new(instance)?;
    let plan = layout.plan_from_schedule(schedule)?;
    let order = layout.order(&plan)?;
    let dens: Vec<&GridDensity> = layout
        .iters
        .iter()
        .map(|r| durations.get(r).ok_or_else(|| Error::MissingDuration(r.clone())))
        .collect::<Result<_>>()?;
    let Some(grid) = dens.first().map(|d| d.grid) else {
        return Err(Error::InvalidSchedule("no iterations".into()));
    };
    for d in &dens {
        if d.grid != grid {
            return Err(Error::InvalidDensity(d.total()));
        }
        let total = d.total();
        if (total - 1.0).abs() > MASS_TOLERANCE || d.mass.iter().any(|&m| m < 0.0 || !m.is_finite()) {
            return Err(Error::InvalidDensity(total));
        }
    }

    let mut lost = 0.0;
    let mut finish: Vec<Option<GridDensity>> = vec![None; layout.len()];
    for &i in &order.topo {
        let mut ready: Vec<GridDensity> = Vec::new();
        for &(p, wait) in &layout.preds[i] {
            let (s, l) = shift(finish[p].as_ref().expect("topological order"), wait);
            lost += l;
            ready.push(s);
        }
        if let Some(p) = order.prev[i] {
            ready.push(finish[p].clone().expect("topological order"));
        }
        let f = if ready.is_empty() {
            dens[i].clone()
        } else {
            let refs: Vec<&GridDensity> = ready.iter().collect();
            let start = if refs.len() == 1 { ready[0].clone() } else { maximum(&refs) };
            let (f, l) = convolve(&start, dens[i]);
            lost += l;
            f
        };
        finish[i] = Some(f);
    }
    if lost > MASS_TOLERANCE {
        return Err(Error::GridOverflow {
            lost,
            upper: grid.hi(),
        });
    }

    let finish: Vec<GridDensity> = finish.into_iter().map(|f| f.expect("every iteration visited")).collect();
    let lasts: Vec<&GridDensity> = plan.orders.iter().filter_map(|o| o.last()).map(|&i| &finish[i]).collect();
    let makespan = maximum(&lasts);
    Ok(QuadratureResult {
        finish: layout.iters.iter().cloned().zip(finish).collect(),
        makespan,
    })
}

/// Discretizes Gaussian durations onto a shared grid.
pub fn discretize(durations: &BTreeMap<IterRef, GaussianDist>, grid: Grid) -> BTreeMap<IterRef, GridDensity> {
    durations
        .iter()
        .map(|(r, d)| (r.clone(), GridDensity::from_gaussian(d, grid)))
        .collect()
}
