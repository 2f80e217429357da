use proptest::prelude::*;
use rift_core::dynamics::{
    bicycle_step, obb_distance, obb_overlap, ControlCommand, DynamicsLimits, Obb, VehicleShape,
    VehicleState,
};
use rift_core::geom::Vec2;
use rift_core::worldmap::{distance_to_goal, Lane, LaneGraph, LaneId, LanePosition};

proptest! {
    #[test]
    fn straight_line_constant_speed(h in -3.1..3.1f64, v in 0.0..20.0f64, n in 1usize..200) {
        let (shape, limits) = (VehicleShape::default(), DynamicsLimits::default());
        let mut s = VehicleState::at(1.0, 2.0, h, v);
        for _ in 0..n {
            s = bicycle_step(&s, &ControlCommand { accel: 0.0, steer: 0.0 }, &shape, &limits, 0.1);
        }
        let d = v * 0.1 * n as f64;
        prop_assert!((s.x - (1.0 + d * h.cos())).abs() < 1e-9);
        prop_assert!((s.y - (2.0 + d * h.sin())).abs() < 1e-9);
        prop_assert_eq!(s.speed, v);
    }

    #[test]
    fn constant_steer_points_share_a_circle(steer in 0.02..0.5f64, v in 1.0..15.0f64) {
        let (shape, limits) = (VehicleShape::default(), DynamicsLimits::default());
        let dt = 0.1;
        let b = v * steer.tan() / shape.wheelbase * dt;
        let radius = v * dt / (2.0 * (b / 2.0).sin());
        let mut s = VehicleState::at(0.0, 0.0, 0.0, v);
        // Centre of the circle through the semi-implicit iterates.
        let centre = Vec2::new(v * dt / 2.0, v * dt / (2.0 * (b / 2.0).tan()));
        for _ in 0..100 {
            s = bicycle_step(&s, &ControlCommand { accel: 0.0, steer }, &shape, &limits, dt);
            prop_assert!((s.position().distance(centre) - radius).abs() < 1e-9 * radius.max(1.0));
        }
    }

    #[test]
    fn speed_stays_within_cap(a in -10.0..10.0f64, v in 0.0..25.0f64) {
        let (shape, limits) = (VehicleShape::default(), DynamicsLimits::default());
        let cmd = ControlCommand::new(a, 0.0, &limits);
        let s = bicycle_step(&VehicleState::at(0.0, 0.0, 0.0, v), &cmd, &shape, &limits, 0.1);
        prop_assert!(s.speed >= 0.0 && s.speed <= limits.speed_cap);
    }

    #[test]
    fn obb_distance_is_symmetric(
        ax in -10.0..10.0f64, ay in -10.0..10.0f64, ah in -3.0..3.0f64,
        bx in -10.0..10.0f64, by in -10.0..10.0f64, bh in -3.0..3.0f64,
    ) {
        let a = Obb::new(Vec2::new(ax, ay), ah, 4.5, 2.0);
        let b = Obb::new(Vec2::new(bx, by), bh, 4.5, 2.0);
        prop_assert_eq!(obb_overlap(&a, &b), obb_overlap(&b, &a));
        prop_assert!((obb_distance(&a, &b) - obb_distance(&b, &a)).abs() < 1e-9);
        prop_assert_eq!(obb_overlap(&a, &b), obb_distance(&a, &b) == 0.0);
    }
}

fn lane(id: u32, from: Vec2, to: Vec2, successors: &[u32]) -> Lane {
    Lane {
        id: LaneId(id),
        centerline: vec![from, to],
        width: 3.0,
        successors: successors.iter().map(|s| LaneId(*s)).collect(),
        left: None,
        right: None,
        target_speed: 10.0,
    }
}

/// A diamond with a short and a long branch between the same junctions.
#[test]
fn astar_takes_the_shorter_branch() {
    let (a, b, c, d) = (
        Vec2::new(0.0, 0.0),
        Vec2::new(10.0, 0.0),
        Vec2::new(20.0, 30.0),
        Vec2::new(20.0, 1.0),
    );
    let e = Vec2::new(30.0, 0.0);
    let graph = LaneGraph::new(vec![
        lane(0, a, b, &[1, 2]),
        lane(1, b, c, &[3]),
        lane(2, b, d, &[4]),
        lane(3, c, e, &[5]),
        lane(4, d, e, &[5]),
        lane(5, e, Vec2::new(40.0, 0.0), &[]),
    ])
    .unwrap();
    let q = distance_to_goal(
        &graph,
        LanePosition {
            lane: LaneId(0),
            s: 2.0,
        },
        LanePosition {
            lane: LaneId(5),
            s: 4.0,
        },
    )
    .unwrap();
    let expected = 8.0 + b.distance(d) + d.distance(e) + 4.0;
    assert!((q.distance - expected).abs() < 1e-12);
    let lanes: Vec<u32> = q.path.iter().map(|p| p.lane.0).collect();
    assert_eq!(lanes, vec![0, 2, 4, 5]);
}

#[test]
fn unknown_lane_is_an_error() {
    let graph =
        LaneGraph::new(vec![lane(0, Vec2::new(0.0, 0.0), Vec2::new(5.0, 0.0), &[])]).unwrap();
    let p = LanePosition {
        lane: LaneId(0),
        s: 0.0,
    };
    assert!(distance_to_goal(
        &graph,
        p,
        LanePosition {
            lane: LaneId(9),
            s: 0.0
        }
    )
    .is_err());
}
