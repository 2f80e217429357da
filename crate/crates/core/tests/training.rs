use rift_core::reward::Style;
use rift_core::sim::{run_episode, SimConfig};
use rift_core::trainer::{initial_params, run_training, snapshot_hash, Objective, TrainConfig};
use rift_core::worldmap::{LoadedScenario, Scenario};

fn small(objective: Objective, iterations: usize) -> TrainConfig {
    TrainConfig {
        buffer_capacity: 64,
        batch_size: 32,
        epochs: 2,
        iterations,
        objective,
        ..TrainConfig::default()
    }
}

fn setup(cfg: &TrainConfig) -> (LoadedScenario, SimConfig) {
    let sc = Scenario::four_way_default(0, Style::Normal).load().unwrap();
    let mut sim = SimConfig::default();
    cfg.apply(&mut sim);
    (sc, sim)
}

#[test]
fn zero_iterations_return_the_initial_policy() {
    let cfg = small(Objective::Rift, 0);
    let (sc, sim) = setup(&cfg);
    let out = run_training(std::slice::from_ref(&sc), &sim, &cfg, 3, None).unwrap();
    assert_eq!(out.params, initial_params(&sim, &cfg, 3));
    assert!(out.epochs.is_empty());
}

#[test]
fn training_is_deterministic_and_moves_the_policy() {
    let cfg = small(Objective::Rift, 2);
    let (sc, sim) = setup(&cfg);
    let a = run_training(std::slice::from_ref(&sc), &sim, &cfg, 1, None).unwrap();
    let b = run_training(std::slice::from_ref(&sc), &sim, &cfg, 1, None).unwrap();
    assert_eq!(a.params, b.params);
    assert_eq!(a.epochs, b.epochs);
    assert_ne!(
        snapshot_hash(&a.params),
        snapshot_hash(&initial_params(&sim, &cfg, 1))
    );
    assert_eq!(a.iterations.len(), 2);
    assert!(a.iterations.iter().all(|s| s.records == 64));
}

#[test]
fn grpo_reports_positive_kl() {
    let cfg = small(Objective::Grpo, 2);
    let (sc, sim) = setup(&cfg);
    let out = run_training(std::slice::from_ref(&sc), &sim, &cfg, 0, None).unwrap();
    assert!(out.epochs.iter().all(|e| e.kl >= 0.0));
    assert!(out.epochs.last().unwrap().kl > out.epochs[0].kl);
}

#[test]
fn every_objective_runs() {
    for objective in Objective::ALL {
        let cfg = small(objective, 1);
        let (sc, sim) = setup(&cfg);
        let out = run_training(std::slice::from_ref(&sc), &sim, &cfg, 0, None).unwrap();
        assert!(
            out.params.values.iter().all(|v| v.is_finite()),
            "{objective}"
        );
    }
}

#[test]
fn episodes_repeat_under_the_same_seed() {
    let cfg = TrainConfig::default();
    let (sc, sim) = setup(&cfg);
    let params = initial_params(&sim, &cfg, 0);
    let reward = cfg.reward_for(Style::Normal);
    let a = run_episode(&sc, &sim, &reward, &params, 2, 9).unwrap();
    let b = run_episode(&sc, &sim, &reward, &params, 2, 9).unwrap();
    assert_eq!(
        a.log.to_csv_string().unwrap(),
        b.log.to_csv_string().unwrap()
    );
    let c = run_episode(&sc, &sim, &reward, &params, 3, 9).unwrap();
    assert_ne!(
        a.log.to_csv_string().unwrap(),
        c.log.to_csv_string().unwrap()
    );
}

#[test]
fn invalid_config_is_rejected() {
    let cfg = TrainConfig {
        lr_min: 1.0,
        ..TrainConfig::default()
    };
    let (sc, sim) = setup(&cfg);
    assert!(run_training(std::slice::from_ref(&sc), &sim, &cfg, 0, None).is_err());
}
