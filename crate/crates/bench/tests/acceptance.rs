//! Acceptance suite: one line per criterion, nonzero exit if any fails.
//! Runs as a plain binary so each check reports even when another fails.

use std::collections::{BTreeMap, BTreeSet};
use std::panic::{catch_unwind, AssertUnwindSafe};
use std::time::Instant;

use lcsched_bench::config::{ConservatismConfig, KalmanConfig, SessionConfig, SpeedupConfig};
use lcsched_bench::{cmd_conservatism, cmd_kalman, cmd_session, cmd_speedup};
use lcsched_core::gen::{generate, GenConfig, GroundTruth};
use lcsched_core::learning::DurationObservation;
use lcsched_core::scheduler::{
    evolve, objective, schedule_durations, strategy_lambda, Projections, SearchConfig, StrategyConfig, StrategyKind,
};
use lcsched_core::stochastic::quadrature::{convolve, Grid, GridDensity};
use lcsched_core::stochastic::{allocate_risk, check_robustness, max_gaussian_ub, monte_carlo_oracle, propagate};
use lcsched_core::{sum_gaussian, validate_schedule, AgentId, AgentKind, GaussianDist, IterRef, ProblemInstance, Schedule};
use lcsched_service::session::{AgentsDocument, ObservationResponse, ScheduleDocument};
use lcsched_service::{AppState, ServiceConfig};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde_json::{json, Value};
use statrs::distribution::{ContinuousCDF, Normal};

type Check = Result<String, String>;

fn ensure(ok: bool, detail: String) -> Check {
    if ok {
        Ok(detail)
    } else {
        Err(detail)
    }
}

fn main() {
    let criteria: [(u32, &str, fn() -> Check); 9] = [
        (1, "bound dominance", dominance),
        (2, "closed-form sum vs convolution", sum_vs_convolution),
        (3, "propagation speedup", speedup),
        (4, "conservatism", conservatism),
        (5, "robust schedules in simulation", robustness),
        (6, "adaptive vs frozen curve model", kalman),
        (7, "optimizer parity", parity),
        (8, "strategy behavior", strategies),
        (9, "service contract", service),
    ];
    let mut failed = 0;
    for (n, name, check) in criteria {
        let started = Instant::now();
        let result = catch_unwind(AssertUnwindSafe(check)).unwrap_or_else(|p| {
            let msg = p
                .downcast_ref::<String>()
                .cloned()
                .or_else(|| p.downcast_ref::<&str>().map(|s| s.to_string()))
                .unwrap_or_default();
            Err(format!("panicked: {msg}"))
        });
        let secs = started.elapsed().as_secs_f64();
        let (verdict, detail) = match result {
            Ok(d) => ("PASS", d),
            Err(d) => {
                failed += 1;
                ("FAIL", d)
            }
        };
        println!("criterion {n}: {verdict} {name}: {detail} [{secs:.1}s]");
    }
    if failed > 0 {
        eprintln!("{failed} criterion(s) failed");
        std::process::exit(1);
    }
}

fn dominance() -> Check {
    let started = Instant::now();
    let mut rng = ChaCha8Rng::seed_from_u64(1);
    let mut worst = f64::INFINITY;
    for _ in 0..1000 {
        let n = rng.random_range(1..=10);
        let inputs: Vec<GaussianDist> = (0..n)
            .map(|_| GaussianDist::new(rng.random_range(0.0..100.0), rng.random_range(0.1..20.0)))
            .collect();
        let g = max_gaussian_ub(&inputs);
        let norm = |d: &GaussianDist| Normal::new(d.mean, d.stddev).unwrap();
        let gn = norm(&g);
        let ins: Vec<Normal> = inputs.iter().map(norm).collect();
        let smax = inputs.iter().map(|d| d.stddev).fold(0.0, f64::max);
        let lo = inputs.iter().map(|d| d.mean).fold(f64::INFINITY, f64::min) - 6.0 * smax;
        let hi = inputs.iter().map(|d| d.mean).fold(f64::NEG_INFINITY, f64::max) + 6.0 * smax;
        for j in 0..1000 {
            let y = lo + (hi - lo) * j as f64 / 999.0;
            let product: f64 = ins.iter().map(|d| d.cdf(y)).product();
            worst = worst.min(product - gn.cdf(y));
        }
    }
    let secs = started.elapsed().as_secs_f64();
    ensure(
        worst >= -1e-9 && secs < 10.0,
        format!("worst slack {worst:.3e} over 1000 sets, {secs:.2}s"),
    )
}

fn sum_vs_convolution() -> Check {
    let mut rng = ChaCha8Rng::seed_from_u64(2);
    let mut worst: f64 = 0.0;
    for _ in 0..100 {
        let mut draw = || {
            let mean = rng.random_range(20.0..150.0);
            GaussianDist::new(mean, rng.random_range(1.0..mean / 4.0))
        };
        let (a, b) = (draw(), draw());
        let grid = Grid::covering([&a, &b], 2048);
        let (conv, _) = convolve(&GridDensity::from_gaussian(&a, grid), &GridDensity::from_gaussian(&b, grid));
        let s = sum_gaussian(a, b);
        worst = worst
            .max((conv.mean() - s.mean).abs() / s.mean)
            .max((conv.stddev() - s.stddev).abs() / s.stddev);
    }
    ensure(worst < 0.005, format!("worst relative error {:.4}%", 100.0 * worst))
}

fn speedup() -> Check {
    let cfg = SpeedupConfig::default();
    let r = cmd_speedup(&cfg, 3, 0).map_err(|e| e.to_string())?;
    let ratios: Vec<f64> = cfg.sizes.iter().map(|s| r.summary[&format!("median_speedup_{s}")]).collect();
    let grows = ratios.windows(2).all(|w| w[1] > w[0]);
    ensure(
        ratios[0] >= 50.0 && grows,
        format!("median speedup {:?} at sizes {:?}", ratios.iter().map(|x| x.round()).collect::<Vec<_>>(), cfg.sizes),
    )
}

fn conservatism() -> Check {
    let r = cmd_conservatism(&ConservatismConfig::default(), 20, 0).map_err(|e| e.to_string())?;
    let (med, min) = (r.summary["median_percent"], r.summary["min_percent"]);
    ensure(
        med <= 25.0 && min >= 0.0,
        format!("median {med:.2}%, min {min:.2}%, mean {:.2}% over 20 instances", r.summary["mean_percent"]),
    )
}

fn robustness() -> Check {
    let (mut checked, mut seed, mut worst_margin) = (0, 0u64, f64::INFINITY);
    while checked < 20 {
        seed += 1;
        if seed > 400 {
            return Err(format!("only {checked} robust schedules in 400 instances"));
        }
        let (inst, _) = generate(&GenConfig {
            n_tasks: 15,
            seed,
            ..GenConfig::default()
        })
        .map_err(|e| e.to_string())?;
        let search = SearchConfig {
            time_limit_secs: None,
            max_generations: Some(30),
            seed,
            ..SearchConfig::default()
        };
        let best = evolve(&inst, &Projections::from_instance(&inst), &search).map_err(|e| e.to_string())?;
        let durations = schedule_durations(&inst, &best.best).map_err(|e| e.to_string())?;
        let p = propagate(&inst, &best.best, &durations).map_err(|e| e.to_string())?;
        if !check_robustness(&p, &inst, &allocate_risk(&inst)).robust {
            continue;
        }
        checked += 1;
        let mc = monte_carlo_oracle(&inst, &best.best, &durations, 100_000, seed).map_err(|e| e.to_string())?;
        let floor = 1.0 - inst.epsilon - 3.0 * mc.success_stderr();
        worst_margin = worst_margin.min(mc.all_success_rate - floor);
    }
    ensure(
        worst_margin >= 0.0,
        format!("20 robust schedules, smallest success margin over the floor {worst_margin:.4}"),
    )
}

fn kalman() -> Check {
    let r = cmd_kalman(&KalmanConfig::default(), 50, 0).map_err(|e| e.to_string())?;
    let (f, a, frac) = (
        r.summary["median_frozen_error"],
        r.summary["median_adaptive_error"],
        r.summary["improved_fraction"],
    );
    ensure(
        a < f && frac >= 0.6,
        format!("median error adaptive {a:.1}s vs frozen {f:.1}s, improved in {:.0}%", 100.0 * frac),
    )
}

fn permutations(items: &[IterRef]) -> Vec<Vec<IterRef>> {
    if items.len() <= 1 {
        return vec![items.to_vec()];
    }
    let mut out = Vec::new();
    for i in 0..items.len() {
        let mut rest = items.to_vec();
        let head = rest.remove(i);
        for mut tail in permutations(&rest) {
            tail.insert(0, head.clone());
            out.push(tail);
        }
    }
    out
}

/// Best (failed deadlines, z1) over every valid schedule.
fn exhaustive_optimum(inst: &ProblemInstance, p: &Projections) -> (usize, f64) {
    let refs = inst.iteration_refs();
    let agents: Vec<AgentId> = inst.agents.iter().map(|a| a.agent_id.clone()).collect();
    let mut seen = BTreeSet::new();
    let mut best = (usize::MAX, f64::INFINITY);
    for perm in permutations(&refs) {
        for mask in 0..agents.len().pow(refs.len() as u32) {
            let mut orders: BTreeMap<AgentId, Vec<IterRef>> = agents.iter().map(|a| (a.clone(), Vec::new())).collect();
            let mut m = mask;
            for r in &perm {
                orders.get_mut(&agents[m % agents.len()]).unwrap().push(r.clone());
                m /= agents.len();
            }
            if !seen.insert(format!("{orders:?}")) {
                continue;
            }
            let s = Schedule::from_orders(orders);
            if validate_schedule(inst, &s).is_err() {
                continue;
            }
            let e = objective(&s, inst, p, 0.0).unwrap();
            let key = (e.report.failed(), e.objective.z1);
            if key.0 < best.0 || (key.0 == best.0 && key.1 < best.1) {
                best = key;
            }
        }
    }
    best
}

/// Incumbent objective per generation; a non-robust incumbent is
/// infeasible and counts as unbounded.
fn best_objective_trace(history: &[lcsched_core::scheduler::ObjectiveValue], robust: &[bool]) -> Vec<f64> {
    history
        .iter()
        .zip(robust)
        .map(|(v, &ok)| if ok { v.z } else { f64::INFINITY })
        .collect()
}

fn parity() -> Check {
    let mut worst_gap: f64 = 0.0;
    let mut problems = Vec::new();
    for seed in 0..20u64 {
        let (n_tasks, reps) = match seed % 4 {
            0 => (4, 1),
            1 => (5, 1),
            2 => (6, 1),
            _ => (3, 2),
        };
        let (inst, _) = generate(&GenConfig {
            n_tasks,
            iterations_per_task: reps,
            n_agents: 2,
            seed,
            ..GenConfig::default()
        })
        .map_err(|e| e.to_string())?;
        let p = Projections::from_instance(&inst);
        let opt = exhaustive_optimum(&inst, &p);
        let search = SearchConfig {
            time_limit_secs: None,
            max_generations: Some(60),
            seed,
            ..SearchConfig::default()
        };
        let r = evolve(&inst, &p, &search).map_err(|e| e.to_string())?;
        let gap = r.objective.z1 / opt.1 - 1.0;
        worst_gap = worst_gap.max(gap);
        if r.failed_deadlines != opt.0 || gap > 0.05 {
            problems.push(format!("seed {seed}: {} failed, z1 {:.1} vs {:.1}", r.failed_deadlines, r.objective.z1, opt.1));
        }
        if !best_objective_trace(&r.history, &r.history_robust).windows(2).all(|w| w[1] <= w[0]) {
            problems.push(format!("seed {seed}: objective trace increased"));
        }
    }
    ensure(
        problems.is_empty(),
        format!("worst gap {:.2}% over 20 instances {}", 100.0 * worst_gap, problems.join("; ")).trim_end().to_owned(),
    )
}

fn strategies() -> Check {
    let run = |kind| {
        let cfg = SessionConfig {
            strategy: StrategyConfig::new(kind, 5),
            ..SessionConfig::default()
        };
        cmd_session(&cfg, 20, 0).map(|r| r.summary["mean_z2"]).map_err(|e| e.to_string())
    };
    let explore = run(StrategyKind::ExploreExploit)?;
    let exploit = run(StrategyKind::Exploit)?;
    let annealed = StrategyConfig::new(StrategyKind::Annealed, 5);
    let trace: Vec<f64> = (1..=5).map(|r| strategy_lambda(&annealed, r)).collect();
    ensure(
        explore < exploit && trace == [50.0, 50.0, 50.0, 0.0, 0.0],
        format!("mean z2 explore-exploit {explore:.3} vs exploit {exploit:.3}; annealed trace {trace:?}"),
    )
}

fn service() -> Check {
    tokio::runtime::Builder::new_multi_thread()
        .enable_all()
        .build()
        .map_err(|e| e.to_string())?
        .block_on(service_script())
}

type Served = (String, AppState, tokio::task::JoinHandle<std::io::Result<()>>);

async fn serve(data: &std::path::Path) -> Result<Served, String> {
    let state = AppState::open(ServiceConfig {
        data_dir: data.into(),
        ..ServiceConfig::default()
    })
    .map_err(|e| e.to_string())?;
    let listener = tokio::net::TcpListener::bind("127.0.0.1:0").await.map_err(|e| e.to_string())?;
    let url = format!("http://{}", listener.local_addr().map_err(|e| e.to_string())?);
    let task = tokio::spawn(lcsched_service::serve(listener, state.clone()));
    Ok((url, state, task))
}

fn durations_for(doc: &ScheduleDocument, truth: &GroundTruth, rng: &mut ChaCha8Rng) -> Vec<DurationObservation> {
    doc.expected_observations
        .iter()
        .map(|e| DurationObservation {
            agent_id: e.agent_id.clone(),
            task_id: e.task_id.clone(),
            iteration_index: e.iteration_index,
            observed_duration: lcsched_core::gen::sample_execution(truth, &e.agent_id, &e.task_id, e.iteration_index, rng),
        })
        .collect()
}

/// Every iteration once; human ones exactly the expected observations.
fn coverage_holds(doc: &ScheduleDocument, inst: &ProblemInstance) -> bool {
    let refs = inst.iteration_refs();
    let all: BTreeSet<&IterRef> = refs.iter().collect();
    let scheduled: Vec<&IterRef> = doc.iterations.iter().map(|i| &i.iter).collect();
    let unique: BTreeSet<&IterRef> = scheduled.iter().copied().collect();
    let humans: BTreeSet<&IterRef> = doc
        .iterations
        .iter()
        .filter(|i| i.agent_kind == AgentKind::Human)
        .map(|i| &i.iter)
        .collect();
    let expected: BTreeSet<&IterRef> = doc.expected_observations.iter().map(|e| &e.iter).collect();
    scheduled.len() == all.len() && unique == all && humans == expected
}

async fn service_script() -> Check {
    let err = |e: reqwest::Error| e.to_string();
    let dir = tempfile::tempdir().map_err(|e| e.to_string())?;
    let (url, state, task) = serve(dir.path()).await?;
    let c = reqwest::Client::new();
    let (inst, truth) = generate(&GenConfig {
        n_tasks: 8,
        n_agents: 3,
        n_robots: 1,
        iterations_per_task: 2,
        seed: 11,
        ..GenConfig::default()
    })
    .map_err(|e| e.to_string())?;
    let body = json!({
        "instance": inst,
        "strategy": { "kind": "annealed", "total_rounds": 5 },
        "search": { "max_generations": 20, "time_limit_secs": null, "seed": 3 },
    });
    let r = c.post(format!("{url}/sessions")).json(&body).send().await.map_err(err)?;
    if r.status() != reqwest::StatusCode::CREATED {
        return Err(format!("create returned {}", r.status()));
    }
    let id = r.json::<Value>().await.map_err(err)?["session_id"].as_str().unwrap_or_default().to_owned();

    let mut rng = ChaCha8Rng::seed_from_u64(5);
    let mut replay_ok = true;
    let mut lambdas = Vec::new();
    let mut restart_ok = true;
    let (mut url, mut state, mut task) = (url, state, task);
    for round in 1..=5u32 {
        let doc: ScheduleDocument =
            c.get(format!("{url}/sessions/{id}/schedule")).send().await.map_err(err)?.json().await.map_err(err)?;
        if doc.round != round || !coverage_holds(&doc, &inst) {
            return Err(format!("round {round}: schedule does not cover the instance"));
        }
        lambdas.push(doc.lambda);
        let obs = durations_for(&doc, &truth, &mut rng);
        let submit = json!({ "idempotency_key": format!("round-{round}"), "observations": obs });
        let first: ObservationResponse = c
            .post(format!("{url}/sessions/{id}/observations"))
            .json(&submit)
            .send()
            .await
            .map_err(err)?
            .json()
            .await
            .map_err(err)?;
        // A retry of the same submission must not apply it twice.
        let again: ObservationResponse = c
            .post(format!("{url}/sessions/{id}/observations"))
            .json(&submit)
            .send()
            .await
            .map_err(err)?
            .json()
            .await
            .map_err(err)?;
        replay_ok &= first == again && first.observed_round == round;

        if round == 3 {
            let sched: Value = c.get(format!("{url}/sessions/{id}/schedule")).send().await.map_err(err)?.json().await.map_err(err)?;
            let agents: AgentsDocument =
                c.get(format!("{url}/sessions/{id}/agents")).send().await.map_err(err)?.json().await.map_err(err)?;
            let before = state.session(&id);
            task.abort();
            let _ = task.await;
            (url, state, task) = serve(dir.path()).await?;
            let sched2: Value = c.get(format!("{url}/sessions/{id}/schedule")).send().await.map_err(err)?.json().await.map_err(err)?;
            let agents2: AgentsDocument =
                c.get(format!("{url}/sessions/{id}/agents")).send().await.map_err(err)?.json().await.map_err(err)?;
            restart_ok &= sched == sched2 && agents == agents2;
            restart_ok &= before.is_some() && state.session(&id) == before;
        }
    }
    let done: ScheduleDocument =
        c.get(format!("{url}/sessions/{id}/schedule")).send().await.map_err(err)?.json().await.map_err(err)?;
    task.abort();
    ensure(
        replay_ok && restart_ok && done.completed && lambdas == [50.0, 50.0, 50.0, 0.0, 0.0],
        format!(
            "5 rounds covered; replay identical {replay_ok}; restart equal {restart_ok}; completed {}; lambdas {lambdas:?}",
            done.completed
        ),
    )
}
