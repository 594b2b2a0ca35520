//! Sampling oracle: replays schedule arithmetic on random durations.

use std::collections::BTreeMap;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::propagate::{dense_durations, floor_duration};
use crate::error::{Error, Result};
use crate::gaussian::GaussianDist;
use crate::layout::{DeadlineTarget, Layout};
use crate::model::{DeadlineRef, IterRef, ProblemInstance, Schedule};

const CHUNK: usize = 4096;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DeadlineSuccess {
    pub deadline: DeadlineRef,
    pub success_rate: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MonteCarloReport {
    pub n_samples: usize,
    pub seed: u64,
    pub makespan_mean: f64,
    /// `(q, value)` pairs for a fixed set of quantile levels.
    pub makespan_quantiles: Vec<(f64, f64)>,
    pub per_deadline: Vec<DeadlineSuccess>,
    /// Fraction of samples meeting every deadline at once.
    pub all_success_rate: f64,
    /// Sorted makespan samples.
    #[serde(skip)]
    pub makespans: Vec<f64>,
}

impl MonteCarloReport {
    /// Empirical quantile: the `⌈q·n⌉`-th smallest sample.
    pub fn makespan_quantile(&self, q: f64) -> f64 {
        empirical_quantile(&self.makespans, q)
    }

    /// Binomial standard error of the all-deadline success rate.
    pub fn success_stderr(&self) -> f64 {
        let p = self.all_success_rate;
        (p * (1.0 - p) / self.n_samples as f64).sqrt()
    }
}

pub fn empirical_quantile(sorted: &[f64], q: f64) -> f64 {
    assert!(!sorted.is_empty(), "quantile of no samples");
    let idx = ((q * sorted.len() as f64).ceil() as usize).clamp(1, sorted.len()) - 1;
    sorted[idx]
}

const REPORTED_QUANTILES: [f64; 5] = [0.05, 0.25, 0.5, 0.95, 0.99];

struct Tally {
    makespans: Vec<f64>,
    met: Vec<usize>,
    all_met: usize,
}

/// Samples every duration from its Gaussian (truncated at 0), replays the
/// start/finish recursion and tallies makespans and deadline outcomes.
/// Deterministic for a fixed seed regardless of thread count.
pub fn monte_carlo_oracle(
    instance: &ProblemInstance,
    schedule: &Schedule,
    durations: &BTreeMap<IterRef, GaussianDist>,
    n_samples: usize,
    seed: u64,
) -> Result<MonteCarloReport> {
    if n_samples == 0 {
        return Err(Error::Config("n_samples must be at least 1".into()));
    }
    let layout = Layout::new(instance)?;
    let plan = layout.plan_from_schedule(schedule)?;
    let order = layout.order(&plan)?;
    let dists: Vec<GaussianDist> = dense_durations(&layout, durations)?
        .into_iter()
        .zip(&layout.lb)
        .map(|(d, lb)| floor_duration(d, *lb))
        .collect();
    let lasts: Vec<usize> = plan.orders.iter().filter_map(|o| o.last().copied()).collect();
    let n = layout.len();
    let n_deadlines = layout.deadlines.len();

    let chunks = n_samples.div_ceil(CHUNK);
    let tallies: Vec<Tally> = (0..chunks)
        .into_par_iter()
        .map(|c| {
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            rng.set_stream(c as u64);
            let count = CHUNK.min(n_samples - c * CHUNK);
            let mut start = vec![0.0; n];
            let mut finish = vec![0.0; n];
            let mut t = Tally {
                makespans: Vec::with_capacity(count),
                met: vec![0; n_deadlines],
                all_met: 0,
            };
            for _ in 0..count {
                for &i in &order.topo {
                    let mut s: f64 = 0.0;
                    for &(p, wait) in &layout.preds[i] {
                        s = s.max(finish[p] + wait);
                    }
                    if let Some(p) = order.prev[i] {
                        s = s.max(finish[p]);
                    }
                    let d = dists[i];
                    let z: f64 = rng.sample(StandardNormal);
                    start[i] = s;
                    finish[i] = s + (d.mean + d.stddev * z).max(0.0);
                }
                t.makespans.push(lasts.iter().map(|&i| finish[i]).fold(0.0, f64::max));
                let mut all = true;
                for (k, dl) in layout.deadlines.iter().enumerate() {
                    let ok = match &dl.target {
                        DeadlineTarget::Finish(targets) => targets.iter().all(|&i| finish[i] <= dl.bound),
                        DeadlineTarget::Span { anchor, end } => finish[*end] - start[*anchor] <= dl.bound,
                    };
                    if ok {
                        t.met[k] += 1;
                    } else {
                        all = false;
                    }
                }
                if all {
                    t.all_met += 1;
                }
            }
            t
        })
        .collect();

    let mut makespans = Vec::with_capacity(n_samples);
    let mut met = vec![0usize; n_deadlines];
    let mut all_met = 0;
    for t in tallies {
        makespans.extend(t.makespans);
        for (m, x) in met.iter_mut().zip(t.met) {
            *m += x;
        }
        all_met += t.all_met;
    }
    makespans.sort_by(f64::total_cmp);
    let total = n_samples as f64;
    Ok(MonteCarloReport {
        n_samples,
        seed,
        makespan_mean: makespans.iter().sum::<f64>() / total,
        makespan_quantiles: REPORTED_QUANTILES
            .iter()
            .map(|&q| (q, empirical_quantile(&makespans, q)))
            .collect(),
        per_deadline: layout
            .deadlines
            .iter()
            .zip(met)
            .map(|(d, m)| DeadlineSuccess {
                deadline: d.reference.clone(),
                success_rate: m as f64 / total,
            })
            .collect(),
        all_success_rate: all_met as f64 / total,
        makespans,
    })
}
