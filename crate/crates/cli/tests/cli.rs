use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rift_core::policy::Checkpoint;
use rift_core::sim::SimConfig;
use rift_core::trainer::{initial_params, TrainConfig};
use std::path::Path;
use std::process::{Command, Output};

fn rift_sim(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_rift-sim"))
        .args(args)
        .output()
        .expect("binary runs")
}

fn ok(args: &[&str]) {
    let out = rift_sim(args);
    assert!(
        out.status.success(),
        "{args:?} failed: {}",
        String::from_utf8_lossy(&out.stderr)
    );
}

fn s(p: &Path) -> String {
    p.display().to_string()
}

fn selected_column(csv: &str) -> Vec<String> {
    let mut lines = csv.lines().filter(|l| !l.starts_with('#'));
    let header: Vec<&str> = lines.next().unwrap().split(',').collect();
    let k = header.iter().position(|h| *h == "selected").unwrap();
    lines
        .map(|l| l.split(',').nth(k).unwrap().to_string())
        .collect()
}

const SMALL_TRAIN: &str =
    "[train]\nbuffer_capacity = 48\nbatch_size = 16\nepochs = 2\niterations = 1\n";

#[test]
fn missing_input_exits_with_usage_code() {
    let dir = tempfile::tempdir().unwrap();
    let out = rift_sim(&[
        "simulate",
        "--scenario",
        "/definitely/missing.json",
        "--out",
        &s(dir.path()),
    ]);
    assert_eq!(out.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&out.stderr).contains("missing.json"));
}

#[test]
fn unknown_config_key_is_rejected() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = dir.path().join("run.toml");
    std::fs::write(&cfg, "[train]\nlearning_rate = 0.1\n").unwrap();
    let out = rift_sim(&[
        "train",
        "--config",
        &s(&cfg),
        "--out",
        &s(&dir.path().join("o")),
    ]);
    assert_eq!(out.status.code(), Some(2));
}

#[test]
fn empty_log_directory_is_a_usage_error() {
    let dir = tempfile::tempdir().unwrap();
    let out = rift_sim(&[
        "metrics",
        "--logs",
        &s(dir.path()),
        "--out",
        &s(&dir.path().join("m")),
    ]);
    assert_eq!(out.status.code(), Some(2));
}

#[test]
fn simulate_repeats_per_seed() {
    let dir = tempfile::tempdir().unwrap();
    let run = |name: &str, seed: &str| {
        let out = dir.path().join(name);
        ok(&[
            "simulate",
            "--seed",
            seed,
            "--episodes",
            "1",
            "--out",
            &s(&out),
        ]);
        std::fs::read_to_string(out.join("episode_0.csv")).unwrap()
    };
    let (a, b, c) = (run("a", "3"), run("b", "3"), run("c", "4"));
    assert_eq!(a, b);
    assert_ne!(a, c);
}

#[test]
fn checkpoint_changes_the_selected_candidates() {
    let dir = tempfile::tempdir().unwrap();
    let mut sim = SimConfig::default();
    let train = TrainConfig::default();
    train.apply(&mut sim);
    let mut params = initial_params(&sim, &train, 0);
    let mut rng = ChaCha8Rng::seed_from_u64(11);
    for v in &mut params.values {
        *v = rng.gen_range(-3.0..3.0);
    }
    let ck = dir.path().join("ck.json");
    std::fs::write(
        &ck,
        serde_json::to_string(&Checkpoint::from_params(&params)).unwrap(),
    )
    .unwrap();
    let (plain, tuned) = (dir.path().join("plain"), dir.path().join("tuned"));
    ok(&["simulate", "--episodes", "1", "--out", &s(&plain)]);
    ok(&[
        "simulate",
        "--episodes",
        "1",
        "--checkpoint",
        &s(&ck),
        "--out",
        &s(&tuned),
    ]);
    let read = |d: &Path| std::fs::read_to_string(d.join("episode_0.csv")).unwrap();
    assert_ne!(
        selected_column(&read(&plain)),
        selected_column(&read(&tuned))
    );
    let summary = std::fs::read_to_string(tuned.join("summary.json")).unwrap();
    assert!(!summary.contains("\"uniform\""));
}

#[test]
fn zero_iterations_write_the_initial_checkpoint() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = dir.path().join("run.toml");
    std::fs::write(&cfg, "seed = 2\n[train]\niterations = 0\n").unwrap();
    let out = dir.path().join("o");
    ok(&["train", "--config", &s(&cfg), "--out", &s(&out)]);
    let written: Checkpoint =
        serde_json::from_str(&std::fs::read_to_string(out.join("checkpoint.json")).unwrap())
            .unwrap();
    let mut sim = SimConfig::default();
    let train = TrainConfig {
        iterations: 0,
        ..TrainConfig::default()
    };
    train.apply(&mut sim);
    assert_eq!(
        written,
        Checkpoint::from_params(&initial_params(&sim, &train, 2))
    );
    assert_eq!(
        std::fs::read_to_string(out.join("train_stats.jsonl")).unwrap(),
        ""
    );
}

#[test]
fn grpo_training_reports_kl() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = dir.path().join("run.toml");
    std::fs::write(&cfg, SMALL_TRAIN).unwrap();
    let out = dir.path().join("o");
    ok(&[
        "train",
        "--config",
        &s(&cfg),
        "--objective",
        "grpo",
        "--out",
        &s(&out),
    ]);
    let stats = std::fs::read_to_string(out.join("train_stats.jsonl")).unwrap();
    let last: serde_json::Value = serde_json::from_str(stats.lines().last().unwrap()).unwrap();
    assert!(last["kl"].as_f64().unwrap() > 0.0);
    assert_eq!(stats.lines().count(), 2);
}

#[test]
fn duplicated_logs_aggregate_to_the_episode_value() {
    let dir = tempfile::tempdir().unwrap();
    let sim = dir.path().join("sim");
    ok(&["simulate", "--episodes", "1", "--out", &s(&sim)]);
    let logs = dir.path().join("logs");
    std::fs::create_dir(&logs).unwrap();
    for id in [0, 1] {
        std::fs::copy(
            sim.join("episode_0.csv"),
            logs.join(format!("episode_{id}.csv")),
        )
        .unwrap();
    }
    let out = dir.path().join("m");
    ok(&["metrics", "--logs", &s(&logs), "--out", &s(&out)]);
    let report: serde_json::Value =
        serde_json::from_str(&std::fs::read_to_string(out.join("metrics.json")).unwrap()).unwrap();
    let episode = &report["episodes"][0]["metrics"];
    for (name, agg) in report["aggregate"].as_object().unwrap() {
        assert_eq!(agg["value"], episode[name]["value"], "{name}");
    }
    assert!(out.join("metrics.csv").exists());
}

#[test]
fn plots_from_training_stats_and_logs() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = dir.path().join("run.toml");
    std::fs::write(&cfg, SMALL_TRAIN).unwrap();
    let (train, sim, plots) = (
        dir.path().join("t"),
        dir.path().join("s"),
        dir.path().join("p"),
    );
    ok(&["train", "--config", &s(&cfg), "--out", &s(&train)]);
    ok(&["simulate", "--episodes", "1", "--out", &s(&sim)]);
    ok(&[
        "plot",
        "--stats",
        &s(&train.join("train_stats.jsonl")),
        "--logs",
        &s(&sim),
        "--out",
        &s(&plots),
    ]);
    for stem in ["speed_histogram", "accel_histogram", "training_return"] {
        let svg = std::fs::read_to_string(plots.join(format!("{stem}.svg"))).unwrap();
        assert!(svg.starts_with("<svg") && svg.trim_end().ends_with("</svg>"));
        assert!(plots.join(format!("{stem}.csv")).exists());
    }
    let out = rift_sim(&["plot", "--out", &s(&plots)]);
    assert_eq!(out.status.code(), Some(2));
}
