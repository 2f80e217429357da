//! A* distance-to-goal over the lane graph.
//!
//! Search states are lane entries `(lane, entry arclength)`. Following a successor costs
//! the remaining centerline length of the current lane; a lane change to a left/right
//! neighbour costs the straight-line distance to the projected point on the neighbour
//! and is allowed at most once per lane visit. The heuristic is the Euclidean distance
//! to the goal point, which never exceeds the remaining path length.

use super::{LaneGraph, LaneId};
use crate::error::Result;
use crate::geom::Vec2;
use serde::{Deserialize, Serialize};
use std::cmp::Ordering;
use std::collections::{BinaryHeap, HashMap};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct LanePosition {
    pub lane: LaneId,
    /// Arclength along the lane centerline in metres.
    pub s: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PathStep {
    pub lane: LaneId,
    pub entry_s: f64,
    pub via_lane_change: bool,
}

#[derive(Debug, Clone, PartialEq)]
pub struct RouteQuery {
    pub start: LanePosition,
    pub goal: LanePosition,
    /// Estimated travel distance; `f64::INFINITY` when the goal is unreachable.
    pub distance: f64,
    /// Planned lane path from start to goal; empty when unreachable.
    pub path: Vec<PathStep>,
}

impl RouteQuery {
    pub fn is_reachable(&self) -> bool {
        self.distance.is_finite()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
struct StateKey {
    lane: LaneId,
    entry_bits: u64,
    changed: bool,
}

#[derive(Debug, Clone, Copy)]
struct Node {
    f: f64,
    g: f64,
    seq: usize,
    /// `None` marks the virtual goal node.
    state: Option<usize>,
}

impl PartialEq for Node {
    fn eq(&self, other: &Self) -> bool {
        self.cmp(other) == Ordering::Equal
    }
}
impl Eq for Node {}
impl PartialOrd for Node {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}
impl Ord for Node {
    // Min-heap on f, then FIFO on insertion order.
    fn cmp(&self, other: &Self) -> Ordering {
        other
            .f
            .total_cmp(&self.f)
            .then_with(|| other.seq.cmp(&self.seq))
    }
}

struct StateInfo {
    key: StateKey,
    entry_s: f64,
    g: f64,
    parent: Option<usize>,
}

/// Shortest lane-path distance from `start` to `goal`.
pub fn distance_to_goal(
    graph: &LaneGraph,
    start: LanePosition,
    goal: LanePosition,
) -> Result<RouteQuery> {
    let (goal_point, _) = graph.point_at(goal.lane, goal.s)?;
    graph.point_at(start.lane, start.s)?;
    let heuristic = |lane: LaneId, s: f64| -> Result<f64> {
        let (p, _): (Vec2, Vec2) = graph.point_at(lane, s)?;
        Ok(p.distance(goal_point))
    };

    let mut states: Vec<StateInfo> = Vec::new();
    let mut best_g: HashMap<StateKey, (f64, usize)> = HashMap::new();
    let mut heap = BinaryHeap::new();
    let mut seq = 0usize;
    let mut goal_parent: Option<(f64, usize)> = None;

    let mut push_state = |states: &mut Vec<StateInfo>,
                          best_g: &mut HashMap<StateKey, (f64, usize)>,
                          heap: &mut BinaryHeap<Node>,
                          lane: LaneId,
                          entry_s: f64,
                          changed: bool,
                          g: f64,
                          parent: Option<usize>|
     -> Result<()> {
        let key = StateKey {
            lane,
            entry_bits: entry_s.to_bits(),
            changed,
        };
        if let Some(&(old, _)) = best_g.get(&key) {
            if old <= g {
                return Ok(());
            }
        }
        let idx = states.len();
        states.push(StateInfo {
            key,
            entry_s,
            g,
            parent,
        });
        best_g.insert(key, (g, idx));
        let h = heuristic(lane, entry_s)?;
        heap.push(Node {
            f: g + h,
            g,
            seq,
            state: Some(idx),
        });
        seq += 1;
        Ok(())
    };

    push_state(
        &mut states,
        &mut best_g,
        &mut heap,
        start.lane,
        start.s,
        false,
        0.0,
        None,
    )?;

    let mut goal_seq = usize::MAX / 2;
    while let Some(node) = heap.pop() {
        let Some(idx) = node.state else {
            let (distance, parent) = goal_parent.expect("goal node pushed with parent");
            debug_assert_eq!(distance, node.g);
            let mut path = Vec::new();
            let mut cur = Some(parent);
            while let Some(i) = cur {
                let st = &states[i];
                path.push(PathStep {
                    lane: st.key.lane,
                    entry_s: st.entry_s,
                    via_lane_change: st.key.changed,
                });
                cur = st.parent;
            }
            path.reverse();
            return Ok(RouteQuery {
                start,
                goal,
                distance,
                path,
            });
        };
        let (lane, entry_s, changed, g) = {
            let st = &states[idx];
            (st.key.lane, st.entry_s, st.key.changed, st.g)
        };
        if best_g.get(&states[idx].key).map(|&(_, i)| i) != Some(idx) {
            continue;
        }
        if lane == goal.lane && goal.s >= entry_s {
            let cost = g + (goal.s - entry_s);
            if goal_parent.is_none_or(|(d, _)| cost < d) {
                goal_parent = Some((cost, idx));
                heap.push(Node {
                    f: cost,
                    g: cost,
                    seq: goal_seq,
                    state: None,
                });
                goal_seq += 1;
            }
        }
        let lane_ref = graph.lane(lane).expect("state lanes exist");
        let remaining = graph.lane_length(lane)? - entry_s;
        for &succ in &lane_ref.successors {
            push_state(
                &mut states,
                &mut best_g,
                &mut heap,
                succ,
                0.0,
                false,
                g + remaining,
                Some(idx),
            )?;
        }
        if !changed {
            let (here, _) = graph.point_at(lane, entry_s)?;
            for neighbor in [lane_ref.left, lane_ref.right].into_iter().flatten() {
                let pr = graph.project_onto(neighbor, here)?;
                push_state(
                    &mut states,
                    &mut best_g,
                    &mut heap,
                    neighbor,
                    pr.arclength,
                    true,
                    g + pr.distance,
                    Some(idx),
                )?;
            }
        }
    }
    Ok(RouteQuery {
        start,
        goal,
        distance: f64::INFINITY,
        path: Vec::new(),
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::worldmap::Lane;

    fn chain() -> LaneGraph {
        LaneGraph::new(vec![
            Lane {
                id: LaneId(0),
                centerline: vec![Vec2::new(0.0, 0.0), Vec2::new(5.0, 0.0)],
                width: 3.0,
                successors: vec![LaneId(1)],
                left: None,
                right: None,
                target_speed: 10.0,
            },
            Lane {
                id: LaneId(1),
                centerline: vec![Vec2::new(5.0, 0.0), Vec2::new(10.0, 0.0)],
                width: 3.0,
                successors: vec![],
                left: None,
                right: None,
                target_speed: 10.0,
            },
        ])
        .unwrap()
    }

    #[test]
    fn two_segment_chain() {
        let g = chain();
        let q = distance_to_goal(
            &g,
            LanePosition {
                lane: LaneId(0),
                s: 0.0,
            },
            LanePosition {
                lane: LaneId(1),
                s: 5.0,
            },
        )
        .unwrap();
        assert_eq!(q.distance, 10.0);
        assert_eq!(q.path.len(), 2);
        assert_eq!(q.path[1].lane, LaneId(1));
    }

    #[test]
    fn goal_behind_start_is_unreachable() {
        let g = chain();
        let q = distance_to_goal(
            &g,
            LanePosition {
                lane: LaneId(1),
                s: 3.0,
            },
            LanePosition {
                lane: LaneId(0),
                s: 1.0,
            },
        )
        .unwrap();
        assert!(q.distance.is_infinite());
        assert!(q.path.is_empty());
        let q = distance_to_goal(
            &g,
            LanePosition {
                lane: LaneId(1),
                s: 3.0,
            },
            LanePosition {
                lane: LaneId(1),
                s: 1.0,
            },
        )
        .unwrap();
        assert!(!q.is_reachable());
    }

    #[test]
    fn same_lane_ahead() {
        let g = chain();
        let q = distance_to_goal(
            &g,
            LanePosition {
                lane: LaneId(0),
                s: 1.5,
            },
            LanePosition {
                lane: LaneId(0),
                s: 4.0,
            },
        )
        .unwrap();
        assert_eq!(q.distance, 2.5);
    }

    #[test]
    fn lane_change_costs_lateral_distance() {
        let map = crate::worldmap::synthesize_map(&crate::worldmap::MapParams::Straight {
            length: 100.0,
            lanes: 2,
            width: 3.5,
            speed_limit: 10.0,
        })
        .unwrap();
        let q = distance_to_goal(
            &map.graph,
            LanePosition {
                lane: LaneId(0),
                s: 10.0,
            },
            LanePosition {
                lane: LaneId(1),
                s: 50.0,
            },
        )
        .unwrap();
        assert!((q.distance - 43.5).abs() < 1e-12);
        assert!(q.path[1].via_lane_change);
    }
}
