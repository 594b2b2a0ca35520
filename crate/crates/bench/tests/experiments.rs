use std::process::Command;

use lcsched_bench::config::{ConservatismConfig, KalmanConfig, SessionConfig, SpeedupConfig};
use lcsched_bench::{cmd_kalman, cmd_session, cmd_speedup, conservatism_of, simulate_session};
use lcsched_core::gen::{generate, GenConfig, PriorMode};
use lcsched_core::scheduler::{edf_seed, schedule_durations, Projections, StrategyConfig, StrategyKind};

#[test]
fn speedup_rerun_gives_identical_untimed_report() {
    let cfg = SpeedupConfig {
        sizes: vec![10, 15],
        min_timing_secs: 0.0,
        ..SpeedupConfig::default()
    };
    let a = cmd_speedup(&cfg, 1, 9).unwrap();
    let b = cmd_speedup(&cfg, 1, 9).unwrap();
    assert_eq!(a.records.len(), 2);
    assert_eq!(a.untimed_records(), b.untimed_records());
    for r in &a.records {
        let bound = r["bound_makespan_mean"].as_f64().unwrap();
        let quad = r["quadrature_makespan_mean"].as_f64().unwrap();
        // The bound is an upper bound: its mean never falls below the exact one.
        assert!(bound >= quad - 2.0, "{bound} vs {quad}");
    }
}

#[test]
fn deterministic_durations_have_no_conservatism() {
    let (inst, _) = generate(&GenConfig {
        n_tasks: 12,
        n_robots: 3,
        seed: 1,
        ..GenConfig::default()
    })
    .unwrap();
    let s = edf_seed(&inst, &Projections::from_instance(&inst)).unwrap();
    let d = schedule_durations(&inst, &s).unwrap();
    let c = conservatism_of(&inst, &s, &d, 0.95, 1000, 0).unwrap();
    assert_eq!(c.percent, 0.0);
}

#[test]
fn conservatism_is_positive_on_small_runs() {
    let cfg = ConservatismConfig {
        n_tasks: 10,
        samples: 20_000,
        ..ConservatismConfig::default()
    };
    let r = lcsched_bench::cmd_conservatism(&cfg, 3, 4).unwrap();
    assert_eq!(r.records.len(), 3);
    assert!(r.column("conservatism_percent").iter().all(|&p| p >= 0.0));
}

#[test]
fn noiseless_agents_are_learned_at_least_as_well() {
    let cfg = KalmanConfig {
        noise_fraction: 0.0,
        ..KalmanConfig::default()
    };
    let r = cmd_kalman(&cfg, 10, 3).unwrap();
    assert!(r.summary["median_adaptive_error"] <= r.summary["median_frozen_error"]);
}

#[test]
fn single_round_session_has_one_record() {
    let cfg = SessionConfig {
        strategy: StrategyConfig::new(StrategyKind::Exploit, 1),
        ..SessionConfig::default()
    };
    let r = cmd_session(&cfg, 1, 0).unwrap();
    assert_eq!(r.records.len(), 1);
    assert_eq!(r.records[0]["round"], 1);
}

#[test]
fn exploiting_a_deterministic_team_never_slows_down() {
    let cfg = SessionConfig {
        gen: GenConfig {
            n_tasks: 6,
            noise_fraction: 0.0,
            deadline_fraction: 0.0,
            prior: PriorMode::Truth,
            ..GenConfig::default()
        },
        ..SessionConfig::default()
    };
    for seed in 0..3 {
        let (inst, truth) = generate(&GenConfig { seed, ..cfg.gen.clone() }).unwrap();
        let rounds = simulate_session(inst, &truth, &cfg, seed).unwrap();
        assert_eq!(rounds.len(), 5);
        for w in rounds.windows(2) {
            assert!(w[1].realized_makespan <= w[0].realized_makespan + 1e-9, "seed {seed}: {rounds:?}");
            assert_eq!(w[1].realized_makespan, w[1].predicted_makespan);
        }
    }
}

#[test]
fn cli_exits_with_two_on_config_errors() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = dir.path().join("bad.toml");
    std::fs::write(&cfg, "[kalman]\nn_agents = 1\n").unwrap();
    let status = Command::new(env!("CARGO_BIN_EXE_bench"))
        .args(["kalman", "--config"])
        .arg(&cfg)
        .status()
        .unwrap();
    assert_eq!(status.code(), Some(2));
}

#[test]
fn cli_writes_json_and_csv() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().join("k/report.json");
    let status = Command::new(env!("CARGO_BIN_EXE_bench"))
        .args(["kalman", "--trials", "3", "--seed", "5", "--out"])
        .arg(&out)
        .status()
        .unwrap();
    assert!(status.success());
    let report: lcsched_bench::ExperimentReport =
        serde_json::from_str(&std::fs::read_to_string(&out).unwrap()).unwrap();
    assert_eq!(report.records.len(), 3);
    assert_eq!(report.seed, 5);
    let csv = std::fs::read_to_string(out.with_extension("csv")).unwrap();
    assert_eq!(csv.lines().count(), 4);
}
