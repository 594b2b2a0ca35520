use std::collections::BTreeMap;
use std::time::Instant;

use lcsched_core::gen::{generate, GenConfig};
use lcsched_core::scheduler::{edf_seed, schedule_durations, Projections};
use lcsched_core::stochastic::quadrature::{discretize, Grid};
use lcsched_core::stochastic::{propagate, quadrature_oracle};

use crate::config::SpeedupConfig;
use crate::record;
use crate::report::{median, ExperimentReport};
use crate::BenchError;

/// Mean wall time of `f` over as many calls as fit in `min_secs` (at least one).
fn time_per_call<T>(min_secs: f64, mut f: impl FnMut() -> T) -> (f64, T) {
    let start = Instant::now();
    let mut calls = 0u32;
    loop {
        let out = std::hint::black_box(f());
        calls += 1;
        let elapsed = start.elapsed().as_secs_f64();
        if elapsed >= min_secs {
            return (elapsed / f64::from(calls), out);
        }
    }
}

/// Times exact numerical evaluation of EDF schedules against the Gaussian
/// bound. Runs serially so the two paths see the same machine load.
pub fn cmd_speedup(cfg: &SpeedupConfig, trials: usize, seed: u64) -> Result<ExperimentReport, BenchError> {
    let mut records = Vec::new();
    let mut summary = BTreeMap::new();
    for &size in &cfg.sizes {
        let mut ratios = Vec::new();
        for trial in 0..trials {
            let gen = GenConfig {
                n_tasks: size,
                n_agents: cfg.n_agents,
                seed: seed.wrapping_add(trial as u64),
                ..GenConfig::default()
            };
            let (inst, _) = generate(&gen)?;
            let schedule = edf_seed(&inst, &Projections::from_instance(&inst))?;
            let durations = schedule_durations(&inst, &schedule)?;

            let (bound_secs, bound) = time_per_call(cfg.min_timing_secs, || propagate(&inst, &schedule, &durations));
            let bound = bound?;

            // The horizon must hold every duration tail and every wait.
            let waits: f64 = inst.tasks.iter().flat_map(|t| &t.preconditions).map(|p| p.wait).sum();
            let hi = durations.values().map(|d| d.mean + 6.0 * d.stddev).sum::<f64>() + waits;
            let grid = Grid::with_spacing(hi, cfg.grid_spacing);
            let (quad_secs, quad) = time_per_call(cfg.min_timing_secs, || {
                quadrature_oracle(&inst, &schedule, &discretize(&durations, grid))
            });
            let quad = quad?;

            let speedup = quad_secs / bound_secs;
            ratios.push(speedup);
            records.push(record!(
                "trial" => trial,
                "size" => size,
                "iterations" => durations.len(),
                "grid_points" => grid.len,
                "bound_secs" => bound_secs,
                "quadrature_secs" => quad_secs,
                "speedup" => speedup,
                "bound_makespan_mean" => bound.makespan_ub.mean,
                "quadrature_makespan_mean" => quad.makespan.mean(),
            ));
        }
        summary.insert(format!("median_speedup_{size}"), median(&ratios));
    }
    for &size in &cfg.sizes {
        for col in ["bound_secs", "quadrature_secs"] {
            let v: Vec<f64> = records
                .iter()
                .filter(|r| r["size"] == size)
                .filter_map(|r| r[col].as_f64())
                .collect();
            summary.insert(format!("median_{col}_{size}"), median(&v));
        }
    }
    Ok(ExperimentReport::new("speedup", seed, trials, records, summary))
}
