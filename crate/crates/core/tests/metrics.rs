use proptest::prelude::*;
use rift_core::log::{AgentRow, EpisodeLog, Role, StepRecord};
use rift_core::metrics::{
    blocked_events, collision_events, episode_metrics, shapiro_wilk, ttc_2d, wasserstein_1d,
    BlockedParams, MetricsConfig, MetricsReport,
};

fn sample() -> impl Strategy<Value = Vec<f64>> {
    prop::collection::vec(-50.0..50.0f64, 1..60)
}

proptest! {
    #[test]
    fn w1_is_a_metric(a in sample(), b in sample(), c in sample()) {
        let w = |x: &[f64], y: &[f64]| wasserstein_1d(x, y).unwrap();
        prop_assert_eq!(w(&a, &a), 0.0);
        prop_assert!((w(&a, &b) - w(&b, &a)).abs() < 1e-9);
        prop_assert!(w(&a, &c) <= w(&a, &b) + w(&b, &c) + 1e-9);
    }

    #[test]
    fn w1_of_a_shift_is_the_shift(a in sample(), shift in -20.0..20.0f64) {
        let b: Vec<f64> = a.iter().map(|x| x + shift).collect();
        prop_assert!((wasserstein_1d(&a, &b).unwrap() - shift.abs()).abs() < 1e-9);
    }

    #[test]
    fn w1_ignores_duplication(a in sample(), b in sample()) {
        let a2: Vec<f64> = a.iter().chain(&a).copied().collect();
        prop_assert!((wasserstein_1d(&a, &b).unwrap() - wasserstein_1d(&a2, &b).unwrap()).abs() < 1e-9);
    }

    #[test]
    fn shapiro_wilk_is_affine_invariant(
        x in prop::collection::vec(-10.0..10.0f64, 3..200),
        scale in 0.1..100.0f64,
        shift in -100.0..100.0f64,
    ) {
        let spread = x.iter().copied().fold(f64::NEG_INFINITY, f64::max) - x.iter().copied().fold(f64::INFINITY, f64::min);
        prop_assume!(spread > 1e-3);
        let y: Vec<f64> = x.iter().map(|v| v * scale + shift).collect();
        let (wx, wy) = (shapiro_wilk(&x, 0).unwrap(), shapiro_wilk(&y, 0).unwrap());
        prop_assert!((wx - wy).abs() < 1e-9);
        prop_assert!(wx > 0.0 && wx <= 1.0);
    }
}

#[test]
fn shapiro_wilk_reference_values() {
    let cases: [(Vec<f64>, f64); 4] = [
        (vec![1.0, 2.0, 4.0], 0.9642857142857142),
        (vec![2.1, 3.4, 1.9, 5.6], 0.8760318341481133),
        (
            (1..=10).map(|i| (i * i) as f64).collect(),
            0.9214279273262029,
        ),
        (
            (0..50).map(|i| (0.08 * i as f64).exp()).collect(),
            0.8152184255180964,
        ),
    ];
    for (x, want) in cases {
        let w = shapiro_wilk(&x, 0).unwrap();
        assert!((w - want).abs() < 1e-3, "{w} vs {want}");
    }
    assert!(shapiro_wilk(&[1.0, 2.0], 0).is_err());
    assert!(shapiro_wilk(&[3.0; 10], 0).is_err());
}

fn row(id: u32, role: Role, x: f64, y: f64, heading: f64, v: f64) -> AgentRow {
    AgentRow {
        id,
        role,
        x,
        y,
        heading,
        v,
        a: 0.0,
        yaw_rate: 0.0,
        a_lat: 0.0,
        length: 4.0,
        width: 2.0,
        offroad: false,
        collision_with: vec![],
        selected: None,
        probs: vec![],
        target_speed: 10.0,
    }
}

fn log_of(steps: Vec<Vec<AgentRow>>) -> EpisodeLog {
    EpisodeLog {
        scenario: "t".into(),
        episode: 0,
        seed: 0,
        dt: 0.1,
        steps: steps
            .into_iter()
            .enumerate()
            .map(|(k, agents)| StepRecord {
                step: k,
                time: k as f64 * 0.1,
                agents,
            })
            .collect(),
    }
}

#[test]
fn head_on_ttc() {
    // Boxes 4 m long, fronts 20 m apart, closing at 10 m/s.
    let ego = row(1, Role::Av, 0.0, 0.0, 0.0, 5.0);
    let other = row(2, Role::Cbv, 24.0, 0.0, std::f64::consts::PI, 5.0);
    assert!((ttc_2d(&ego, &other) - 2.0).abs() < 1e-12);
    let receding = row(2, Role::Cbv, 24.0, 0.0, 0.0, 8.0);
    assert_eq!(ttc_2d(&ego, &receding), f64::INFINITY);
}

#[test]
fn collision_onsets_count_cbv_pairs_only() {
    let hit = |a: &mut AgentRow, b: &mut AgentRow| {
        a.collision_with = vec![b.id];
        b.collision_with = vec![a.id];
    };
    let mut steps = Vec::new();
    for k in 0..6 {
        let mut av = row(1, Role::Av, 0.0, 0.0, 0.0, 0.0);
        let mut cbv = row(2, Role::Cbv, 10.0, 0.0, 0.0, 0.0);
        let mut bv = row(3, Role::Bv, 20.0, 0.0, 0.0, 0.0);
        let mut bv2 = row(4, Role::Bv, 30.0, 0.0, 0.0, 0.0);
        if k == 1 || k == 2 || k == 4 {
            hit(&mut av, &mut cbv);
        }
        if k == 3 {
            hit(&mut bv, &mut bv2);
        }
        steps.push(vec![av, cbv, bv, bv2]);
    }
    assert_eq!(collision_events(&log_of(steps)), 2);
}

#[test]
fn blocked_needs_full_duration() {
    let p = BlockedParams {
        duration: 0.5,
        ..BlockedParams::default()
    };
    let frames = |n: usize, x: f64| -> Vec<Vec<AgentRow>> {
        (0..n)
            .map(|_| {
                vec![
                    row(1, Role::Av, 0.0, 0.0, 0.0, 0.0),
                    row(2, Role::Cbv, x, 0.0, 0.0, 0.0),
                ]
            })
            .collect()
    };
    assert_eq!(blocked_events(&log_of(frames(5, 8.0)), &p), 1);
    assert_eq!(blocked_events(&log_of(frames(4, 8.0)), &p), 0);
    // Behind the AV, outside the cone.
    assert_eq!(blocked_events(&log_of(frames(10, -8.0)), &p), 0);
}

#[test]
fn constructed_episode_metrics() {
    let steps = (0..=4)
        .map(|k| {
            let mut cbv = row(2, Role::Cbv, 3.0 * k as f64, 0.0, 0.0, 30.0);
            cbv.offroad = k == 0;
            cbv.a = if k == 2 { 3.0 } else { 0.0 };
            vec![row(1, Role::Av, 0.0, -40.0, 0.0, 0.0), cbv]
        })
        .collect();
    let m = episode_metrics(&log_of(steps), &MetricsConfig::default()).unwrap();
    assert_eq!(m.value("rp"), Some(12.0));
    assert_eq!(m.value("orr"), Some(20.0));
    assert_eq!(m.value("cpk"), Some(0.0));
    assert_eq!(m.value("cbv_steps"), Some(5.0));
    // The acceleration spike breaks the longitudinal bound and the jerk bound around it.
    assert_eq!(m.value("ucr"), Some(60.0));
    assert_eq!(m.value("fvs"), Some(0.0));
}

#[test]
fn report_of_identical_logs_matches_each_episode() {
    let steps: Vec<Vec<AgentRow>> = (0..5)
        .map(|k| {
            vec![
                row(1, Role::Av, 0.0, -40.0, 0.0, 0.0),
                row(2, Role::Cbv, k as f64, 0.0, 0.0, k as f64),
            ]
        })
        .collect();
    let log = log_of(steps);
    let report =
        MetricsReport::from_logs(&[log.clone(), log.clone()], &MetricsConfig::default()).unwrap();
    let single = episode_metrics(&log, &MetricsConfig::default()).unwrap();
    for name in ["rp", "orr", "s_wd", "ucr"] {
        assert_eq!(report.aggregate_value(name), single.value(name), "{name}");
    }
}

#[test]
fn episode_csv_round_trip() {
    let mut a = row(2, Role::Cbv, 1.25, -3.5, 0.3, 7.0);
    a.collision_with = vec![1, 5];
    a.selected = Some(3);
    a.probs = vec![0.25, 0.75];
    let log = log_of(vec![vec![row(1, Role::Av, 0.0, 0.0, 0.0, 1.0), a]]);
    let text = log.to_csv_string().unwrap();
    let back = EpisodeLog::read_csv(text.as_bytes()).unwrap();
    assert_eq!(back, log);
}
