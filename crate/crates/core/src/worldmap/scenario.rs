//! Scenario files: map, spawns, AV route and episode settings.

use super::{
    four_way_inbound, four_way_outbound, in_drivable, synthesize_map, DrivableArea, Lane,
    LaneGraph, LaneId, LanePosition, MapParams, RoadMap,
};
use crate::error::{Error, Result};
use crate::reward::Style;
use serde::{Deserialize, Serialize};
use std::path::Path;

pub const SCENARIO_FORMAT: u32 = 1;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum MapSpec {
    Synthetic(MapParams),
    Inline(InlineMap),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct InlineMap {
    pub lanes: Vec<Lane>,
    pub drivable_area: DrivableArea,
}

impl MapSpec {
    pub fn build(&self) -> Result<RoadMap> {
        match self {
            MapSpec::Synthetic(p) => synthesize_map(p),
            MapSpec::Inline(m) => {
                let map = RoadMap::new(LaneGraph::new(m.lanes.clone())?, m.drivable_area.clone());
                map.validate_corridors()?;
                Ok(map)
            }
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Spawn {
    pub lane: LaneId,
    /// Arclength along the spawn lane (m).
    pub s: f64,
    pub speed: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct BackgroundSpawn {
    pub lane: LaneId,
    pub s: f64,
    pub speed: f64,
    /// Lanes the vehicle follows, starting with the spawn lane.
    pub route: Vec<LaneId>,
}

impl BackgroundSpawn {
    pub fn spawn(&self) -> Spawn {
        Spawn {
            lane: self.lane,
            s: self.s,
            speed: self.speed,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct AvRoute {
    pub lanes: Vec<LaneId>,
    pub goal: LanePosition,
}

/// Per-episode spawn perturbation, drawn uniformly from `[-s, s]` and `[-speed, speed]`.
#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Jitter {
    pub s: f64,
    pub speed: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Scenario {
    pub format: u32,
    #[serde(default = "default_name")]
    pub name: String,
    pub map: MapSpec,
    pub av: Spawn,
    pub bvs: Vec<BackgroundSpawn>,
    pub route: AvRoute,
    pub seed: u64,
    pub style: Style,
    pub horizon_steps: usize,
    #[serde(default)]
    pub jitter: Jitter,
}

fn default_name() -> String {
    "scenario".into()
}

/// A parsed scenario together with its built map.
#[derive(Debug, Clone)]
pub struct LoadedScenario {
    pub scenario: Scenario,
    pub map: RoadMap,
}

fn check_route(graph: &LaneGraph, route: &[LaneId], what: &str) -> Result<()> {
    if route.is_empty() {
        return Err(Error::InvalidScenario(format!("{what} route is empty")));
    }
    for pair in route.windows(2) {
        let lane = graph.lane(pair[0]).ok_or_else(|| {
            Error::InvalidScenario(format!("{what} route has unknown lane {}", pair[0]))
        })?;
        let linked = lane.successors.contains(&pair[1])
            || lane.left == Some(pair[1])
            || lane.right == Some(pair[1]);
        if !linked {
            return Err(Error::InvalidScenario(format!(
                "{what} route jumps from lane {} to unconnected lane {}",
                pair[0], pair[1]
            )));
        }
    }
    let last = *route.last().unwrap();
    graph
        .lane(last)
        .ok_or_else(|| Error::InvalidScenario(format!("{what} route has unknown lane {last}")))?;
    Ok(())
}

fn check_spawn(map: &RoadMap, spawn: &Spawn, route: &[LaneId], what: &str) -> Result<()> {
    if route.first() != Some(&spawn.lane) {
        return Err(Error::InvalidScenario(format!(
            "{what} route must start at its spawn lane"
        )));
    }
    let len = map.graph.lane_length(spawn.lane).map_err(|_| {
        Error::InvalidScenario(format!("{what} spawns on unknown lane {}", spawn.lane))
    })?;
    if !(spawn.s >= 0.0 && spawn.s <= len) {
        return Err(Error::InvalidScenario(format!(
            "{what} spawn arclength {} outside lane {} of length {len:.2}",
            spawn.s, spawn.lane
        )));
    }
    if !(spawn.speed >= 0.0 && spawn.speed.is_finite()) {
        return Err(Error::InvalidScenario(format!(
            "{what} spawn speed must be non-negative"
        )));
    }
    let (p, _) = map.graph.point_at(spawn.lane, spawn.s)?;
    if !in_drivable(p, &map.area) {
        return Err(Error::InvalidScenario(format!(
            "{what} spawn point is not drivable"
        )));
    }
    Ok(())
}

impl Scenario {
    pub fn from_json(text: &str) -> Result<Self> {
        let value: serde_json::Value = serde_json::from_str(text)?;
        match value.get("format").and_then(|f| f.as_u64()) {
            Some(f) if f == SCENARIO_FORMAT as u64 => {}
            Some(f) => {
                return Err(Error::InvalidScenario(format!(
                    "unsupported scenario format {f}"
                )))
            }
            None => return Err(Error::InvalidScenario("missing `format` field".into())),
        }
        Ok(serde_json::from_value(value)?)
    }

    pub fn to_json(&self) -> Result<String> {
        Ok(serde_json::to_string_pretty(self)?)
    }

    /// Builds the map and checks spawns, routes and the goal against it.
    pub fn load(self) -> Result<LoadedScenario> {
        if self.horizon_steps == 0 {
            return Err(Error::InvalidScenario(
                "horizon_steps must be positive".into(),
            ));
        }
        if !(self.jitter.s >= 0.0 && self.jitter.speed >= 0.0) {
            return Err(Error::InvalidScenario(
                "jitter magnitudes must be non-negative".into(),
            ));
        }
        let map = self.map.build()?;
        check_route(&map.graph, &self.route.lanes, "AV")?;
        check_spawn(&map, &self.av, &self.route.lanes, "AV")?;
        let goal = self.route.goal;
        if !self.route.lanes.contains(&goal.lane) {
            return Err(Error::InvalidScenario(
                "goal lane is not on the AV route".into(),
            ));
        }
        let goal_len = map.graph.lane_length(goal.lane)?;
        if !(goal.s >= 0.0 && goal.s <= goal_len) {
            return Err(Error::InvalidScenario(format!(
                "goal arclength {} outside lane {}",
                goal.s, goal.lane
            )));
        }
        for (i, bv) in self.bvs.iter().enumerate() {
            let what = format!("BV {i}");
            check_route(&map.graph, &bv.route, &what)?;
            check_spawn(&map, &bv.spawn(), &bv.route, &what)?;
        }
        Ok(LoadedScenario {
            scenario: self,
            map,
        })
    }

    pub fn from_path(path: &Path) -> Result<LoadedScenario> {
        let text = std::fs::read_to_string(path)?;
        Self::from_json(&text)?.load()
    }

    /// The built-in crossroads: the AV drives straight through from the south, a vehicle
    /// from the east turns right into the AV's exit lane, and two further vehicles cross.
    pub fn four_way_default(seed: u64, style: Style) -> Self {
        let connector = |arm: u32, turn: u32| LaneId(8 + 3 * arm + turn);
        let (right, straight, left) = (0, 1, 2);
        Scenario {
            format: SCENARIO_FORMAT,
            name: "four_way".into(),
            map: MapSpec::Synthetic(MapParams::FourWayIntersection {
                arm_length: 80.0,
                width: 3.5,
                speed_limit: 10.0,
                corner_radius: super::DEFAULT_CORNER_RADIUS,
            }),
            av: Spawn {
                lane: four_way_inbound(0),
                s: 45.0,
                speed: 8.0,
            },
            bvs: vec![
                BackgroundSpawn {
                    lane: four_way_inbound(1),
                    s: 45.0,
                    speed: 8.0,
                    route: vec![
                        four_way_inbound(1),
                        connector(1, right),
                        four_way_outbound(2),
                    ],
                },
                BackgroundSpawn {
                    lane: four_way_inbound(2),
                    s: 40.0,
                    speed: 8.0,
                    route: vec![
                        four_way_inbound(2),
                        connector(2, left),
                        four_way_outbound(1),
                    ],
                },
                BackgroundSpawn {
                    lane: four_way_inbound(3),
                    s: 20.0,
                    speed: 8.0,
                    route: vec![
                        four_way_inbound(3),
                        connector(3, straight),
                        four_way_outbound(1),
                    ],
                },
            ],
            route: AvRoute {
                lanes: vec![
                    four_way_inbound(0),
                    connector(0, straight),
                    four_way_outbound(2),
                ],
                goal: LanePosition {
                    lane: four_way_outbound(2),
                    s: 30.0,
                },
            },
            seed,
            style,
            horizon_steps: 150,
            jitter: Jitter { s: 3.0, speed: 1.0 },
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn default_scenario_loads_and_round_trips() {
        let sc = Scenario::four_way_default(7, Style::Normal);
        let text = sc.to_json().unwrap();
        let back = Scenario::from_json(&text).unwrap();
        assert_eq!(back, sc);
        back.load().unwrap();
    }

    #[test]
    fn unknown_keys_rejected() {
        let mut v: serde_json::Value = serde_json::from_str(
            &Scenario::four_way_default(0, Style::Normal)
                .to_json()
                .unwrap(),
        )
        .unwrap();
        v["colour"] = serde_json::json!("red");
        assert!(Scenario::from_json(&v.to_string()).is_err());
    }

    #[test]
    fn bad_format_and_route() {
        let sc = Scenario::four_way_default(0, Style::Normal);
        let mut v: serde_json::Value = serde_json::from_str(&sc.to_json().unwrap()).unwrap();
        v["format"] = serde_json::json!(2);
        assert!(matches!(
            Scenario::from_json(&v.to_string()),
            Err(Error::InvalidScenario(_))
        ));

        let mut bad = sc.clone();
        bad.route.lanes = vec![four_way_inbound(0), four_way_outbound(2)];
        assert!(matches!(bad.load(), Err(Error::InvalidScenario(_))));

        let mut bad = sc;
        bad.horizon_steps = 0;
        assert!(bad.load().is_err());
    }

    #[test]
    fn inline_map() {
        let text = r#"{
            "format": 1,
            "map": {
                "lanes": [{"id": 0, "centerline": [{"x": 0, "y": 0}, {"x": 100, "y": 0}], "width": 4}],
                "drivable_area": {"polygons": [{"vertices": [
                    {"x": 0, "y": -2}, {"x": 100, "y": -2}, {"x": 100, "y": 2}, {"x": 0, "y": 2}]}]}
            },
            "av": {"lane": 0, "s": 10, "speed": 5},
            "bvs": [{"lane": 0, "s": 40, "speed": 5, "route": [0]}],
            "route": {"lanes": [0], "goal": {"lane": 0, "s": 90}},
            "seed": 1,
            "style": "aggressive",
            "horizon_steps": 20
        }"#;
        let loaded = Scenario::from_json(text).unwrap().load().unwrap();
        assert_eq!(loaded.map.graph.len(), 1);
        assert_eq!(loaded.scenario.style, Style::Aggressive);
    }
}
