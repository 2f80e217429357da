//! Closed-loop episodes: rule-driven AV and background traffic, policy-driven CBVs.
//!
//! Every tick each CBV re-plans: candidates are generated on its reference lines, scored
//! by the policy, and every candidate is forward-simulated against constant-action
//! forecasts of the other agents to obtain returns and group-relative advantages. The
//! CBV then executes the first closed-loop transition of the selected candidate.

use crate::candidates::{generate_candidates, GenerationConfig};
use crate::dynamics::{
    bicycle_step, forecast_background, forward_simulate, obb_overlap, ControlCommand,
    DynamicsLimits, Obb, PidGains, VehicleShape, VehicleState,
};
use crate::error::{Error, Result};
use crate::geom::{
    cumulative_length, point_at_arclength, project_onto_polyline_range, wrap_angle, Vec2,
};
use crate::log::{AgentRow, EpisodeLog, Role, StepRecord};
use crate::objectives::{group_advantages, DEFAULT_ADV_EPS};
use crate::policy::{
    candidate_features, score, select_trajectory, FeatureConfig, FeatureContext, ScoringParams,
    SelectMode,
};
use crate::reward::{discounted_return, extract_features, state_wise_reward, RewardConfig};
use crate::worldmap::{
    distance_to_goal, identify_cbv, in_drivable, reference_lines, LaneGraph, LaneId, LanePosition,
    LoadedScenario, RouteQuery, Spawn, DEFAULT_CBV_DELTA,
};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};
use std::f64::consts::FRAC_PI_2;

/// Car-following and yielding parameters of the rule-based drivers.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct DriverParams {
    pub max_accel: f64,
    pub comfort_decel: f64,
    pub min_gap: f64,
    pub headway: f64,
    pub leader_range: f64,
    pub lateral_tolerance: f64,
    /// Look-ahead of the conflict check (s).
    pub yield_horizon: f64,
    /// Speed assumed for the own forecast in the conflict check, so stopped vehicles
    /// still see the conflict they would enter.
    pub probe_speed: f64,
    /// Box inflation of the conflict check (m).
    pub conflict_margin: f64,
}

impl Default for DriverParams {
    fn default() -> Self {
        Self {
            max_accel: 1.5,
            comfort_decel: 3.0,
            min_gap: 2.0,
            headway: 1.5,
            leader_range: 50.0,
            lateral_tolerance: 2.0,
            yield_horizon: 3.0,
            probe_speed: 3.0,
            conflict_margin: 1.0,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct SimConfig {
    pub dt: f64,
    pub generation: GenerationConfig,
    pub features: FeatureConfig,
    /// Forward-simulation horizon H used for returns.
    pub rollout_horizon: usize,
    /// Length of each reference line (m).
    pub reference_length: f64,
    pub cbv_delta: f64,
    pub max_cbv: usize,
    pub gains: PidGains,
    pub limits: DynamicsLimits,
    pub shape: VehicleShape,
    pub driver: DriverParams,
    pub select: SelectMode,
    /// The AV is done once within this arclength of its goal.
    pub goal_tolerance: f64,
}

impl Default for SimConfig {
    fn default() -> Self {
        let generation = GenerationConfig::default();
        Self {
            dt: generation.dt,
            generation,
            features: FeatureConfig::default(),
            rollout_horizon: generation.horizon,
            reference_length: generation.v_max * generation.horizon as f64 * generation.dt + 10.0,
            cbv_delta: DEFAULT_CBV_DELTA,
            max_cbv: 1,
            gains: PidGains::default(),
            limits: DynamicsLimits::default(),
            shape: VehicleShape::default(),
            driver: DriverParams::default(),
            select: SelectMode::Argmax,
            goal_tolerance: 1.0,
        }
    }
}

impl SimConfig {
    pub fn validate(&self) -> Result<()> {
        self.generation.validate()?;
        if (self.dt - self.generation.dt).abs() > 1e-12 {
            return Err(Error::InvalidConfig(
                "simulation and candidate dt differ".into(),
            ));
        }
        if self.rollout_horizon == 0 || self.rollout_horizon > self.generation.horizon {
            return Err(Error::InvalidConfig(format!(
                "rollout horizon must lie in 1..={}, got {}",
                self.generation.horizon, self.rollout_horizon
            )));
        }
        if !(self.reference_length > 0.0) || !(self.cbv_delta > 0.0) || self.features.n_ref == 0 {
            return Err(Error::InvalidConfig(
                "reference length, CBV delta and n_ref must be positive".into(),
            ));
        }
        if !self.shape.is_valid() {
            return Err(Error::InvalidConfig("invalid vehicle shape".into()));
        }
        Ok(())
    }
}

/// One CBV decision: everything the trainer needs to evaluate the surrogate later.
#[derive(Debug, Clone, PartialEq)]
pub struct Decision {
    pub step: usize,
    pub agent: u32,
    pub features: Vec<Vec<f64>>,
    pub probs: Vec<f64>,
    pub returns: Vec<f64>,
    pub advantages: Vec<f64>,
    pub selected: usize,
}

#[derive(Debug, Clone)]
pub struct EpisodeOutcome {
    pub log: EpisodeLog,
    pub decisions: Vec<Decision>,
}

/// Seed for a sub-stream, derived by hashing the parts.
pub fn derive_seed(parts: &[u64]) -> u64 {
    let mut h = Sha256::new();
    for p in parts {
        h.update(p.to_le_bytes());
    }
    let d = h.finalize();
    u64::from_le_bytes(d[..8].try_into().expect("digest has 32 bytes"))
}

/// A route polyline built from consecutive lane centerlines.
#[derive(Debug, Clone)]
struct RoutePath {
    points: Vec<Vec2>,
    cumulative: Vec<f64>,
    /// `(start arclength, lane)` for each route lane.
    lanes: Vec<(f64, LaneId)>,
}

impl RoutePath {
    fn new(graph: &LaneGraph, route: &[LaneId]) -> Result<Self> {
        let mut points: Vec<Vec2> = Vec::new();
        let mut lanes = Vec::new();
        for &id in route {
            let lane = graph
                .lane(id)
                .ok_or_else(|| Error::InvalidScenario(format!("unknown lane {id}")))?;
            let start = *cumulative_length(&points).last().unwrap_or(&0.0);
            lanes.push((start, id));
            for &p in &lane.centerline {
                if points.last().is_none_or(|q| q.distance(p) > 1e-9) {
                    points.push(p);
                }
            }
        }
        let cumulative = cumulative_length(&points);
        Ok(Self {
            points,
            cumulative,
            lanes,
        })
    }

    fn length(&self) -> f64 {
        *self.cumulative.last().unwrap()
    }

    fn lane_at(&self, s: f64) -> LaneId {
        self.lanes
            .iter()
            .rev()
            .find(|(start, _)| *start <= s)
            .map_or(self.lanes[0].1, |(_, id)| *id)
    }

    /// Arclength of a lane position on this path.
    fn arclength_of(&self, graph: &LaneGraph, pos: LanePosition) -> Result<f64> {
        let (p, _) = graph.point_at(pos.lane, pos.s)?;
        let (start, _) = self
            .lanes
            .iter()
            .find(|(_, id)| *id == pos.lane)
            .ok_or_else(|| Error::InvalidScenario(format!("lane {} not on route", pos.lane)))?;
        let first = self
            .cumulative
            .partition_point(|c| *c <= *start)
            .saturating_sub(1);
        Ok(
            project_onto_polyline_range(
                p,
                &self.points,
                &self.cumulative,
                first,
                self.points.len(),
            )
            .arclength,
        )
    }

    /// Projection restricted to a window of segments after `hint`.
    fn project(&self, p: Vec2, hint: usize) -> crate::geom::PolylineProjection {
        let first = hint.saturating_sub(2);
        project_onto_polyline_range(p, &self.points, &self.cumulative, first, hint + 40)
    }

    fn pose_at(&self, s: f64) -> (Vec2, Vec2) {
        point_at_arclength(&self.points, &self.cumulative, s)
    }
}

#[derive(Debug, Clone)]
struct Agent {
    id: u32,
    role: Role,
    state: VehicleState,
    shape: VehicleShape,
    route: Vec<LaneId>,
    path: RoutePath,
    s: f64,
    segment: usize,
    active: bool,
}

impl Agent {
    fn obb(&self) -> Obb {
        Obb::from_state(&self.state, &self.shape)
    }

    fn relocate(&mut self) {
        let pr = self.path.project(self.state.position(), self.segment);
        self.s = pr.arclength;
        self.segment = pr.segment;
    }
}

fn spawn_state(graph: &LaneGraph, spawn: &Spawn, ds: f64, dv: f64) -> Result<VehicleState> {
    let len = graph.lane_length(spawn.lane)?;
    let s = (spawn.s + ds).clamp(0.0, len);
    let (p, t) = graph.point_at(spawn.lane, s)?;
    Ok(VehicleState::at(
        p.x,
        p.y,
        t.heading(),
        (spawn.speed + dv).max(0.0),
    ))
}

/// IDM acceleration towards `v0` behind a leader at `gap` closing at `dv`.
fn idm(p: &DriverParams, v: f64, v0: f64, leader: Option<(f64, f64)>) -> f64 {
    let free = 1.0 - (v / v0.max(0.1)).powi(4);
    let interaction = leader.map_or(0.0, |(gap, dv)| {
        let desired = p.min_gap
            + (v * p.headway + v * dv / (2.0 * (p.max_accel * p.comfort_decel).sqrt())).max(0.0);
        (desired / gap.max(0.1)).powi(2)
    });
    p.max_accel * (free - interaction)
}

struct Tick<'a> {
    graph: &'a LaneGraph,
    cfg: &'a SimConfig,
    agents: &'a [Agent],
    forecasts: &'a [Option<Vec<VehicleState>>],
}

impl Tick<'_> {
    /// Rule-based command: IDM behind the nearest leader or conflict, pure-pursuit steering.
    fn rule_command(&self, i: usize) -> ControlCommand {
        let me = &self.agents[i];
        let p = &self.cfg.driver;
        let dt = self.cfg.dt;
        let v = me.state.speed;
        let heading = Vec2::from_heading(me.state.heading);
        let v0 = self
            .graph
            .lane(me.path.lane_at(me.s))
            .map_or(crate::worldmap::DEFAULT_TARGET_SPEED, |l| l.target_speed);

        let mut leader: Option<(f64, f64)> = None;
        let mut consider = |gap: f64, dv: f64| {
            if leader.is_none_or(|(g, _)| gap < g) {
                leader = Some((gap, dv));
            }
        };
        for (j, other) in self.agents.iter().enumerate() {
            if j == i || !other.active {
                continue;
            }
            let pr = me.path.project(other.state.position(), me.segment);
            let ahead = pr.arclength - me.s;
            let aligned = (other.state.heading - me.state.heading).cos() > 0.0;
            if aligned && pr.distance < p.lateral_tolerance && ahead > 0.0 && ahead < p.leader_range
            {
                let gap = ahead - 0.5 * (me.shape.length + other.shape.length);
                consider(
                    gap,
                    v - other.state.speed * (other.state.heading - me.state.heading).cos(),
                );
            }
        }

        // Conflict check against the others' constant-action forecasts.
        let probe = v.max(p.probe_speed);
        let steps = (p.yield_horizon / dt).round() as usize;
        let m = p.conflict_margin;
        'outer: for k in 1..=steps {
            let ds = probe * k as f64 * dt;
            let (pos, tan) = me.path.pose_at(me.s + ds);
            let own = Obb::new(
                pos,
                tan.heading(),
                me.shape.length + 2.0 * m,
                me.shape.width + m,
            );
            for (j, other) in self.agents.iter().enumerate() {
                if j == i || !other.active {
                    continue;
                }
                let seq = self.forecasts[j]
                    .as_ref()
                    .expect("active agents have forecasts");
                let st = seq[k.min(seq.len() - 1)];
                if !obb_overlap(&own, &Obb::from_state(&st, &other.shape)) {
                    continue;
                }
                // Whoever is further along the other's heading has priority.
                let mine = (other.state.position() - me.state.position()).dot(heading);
                let theirs = (me.state.position() - other.state.position())
                    .dot(Vec2::from_heading(other.state.heading));
                let yields =
                    mine > theirs + 1e-9 || ((mine - theirs).abs() <= 1e-9 && other.id < me.id);
                if yields {
                    consider((ds - m - 0.5 * me.shape.length).max(0.0), v);
                    break 'outer;
                }
            }
        }

        let accel = idm(p, v, v0, leader);
        let lookahead = (2.0 + 0.6 * v).clamp(4.0, 15.0);
        let (target, _) = me.path.pose_at(me.s + lookahead);
        let to_target = target - me.state.position();
        let alpha = wrap_angle(to_target.heading() - me.state.heading);
        let dist = to_target.norm().max(1e-6);
        let steer = (2.0 * me.shape.wheelbase * alpha.sin() / dist).atan();
        ControlCommand::new(accel, steer, &self.cfg.limits)
    }
}

/// The lane a CBV is on: the nearest heading-aligned lane among its route and their
/// neighbours.
fn localize(graph: &LaneGraph, agent: &Agent) -> LanePosition {
    let mut lanes: Vec<LaneId> = Vec::new();
    for id in &agent.route {
        lanes.push(*id);
        if let Some(l) = graph.lane(*id) {
            lanes.extend(l.left.iter().chain(l.right.iter()).copied());
        }
    }
    lanes.sort_unstable();
    lanes.dedup();
    let p = agent.state.position();
    let mut best: Option<(f64, LanePosition)> = None;
    for id in lanes {
        let pr = graph.project_onto(id, p).expect("route lanes exist");
        if wrap_angle(agent.state.heading - pr.tangent.heading()).abs() > FRAC_PI_2 {
            continue;
        }
        if best.is_none_or(|(d, _)| pr.distance < d) {
            best = Some((
                pr.distance,
                LanePosition {
                    lane: id,
                    s: pr.arclength,
                },
            ));
        }
    }
    best.map(|(_, lp)| lp).unwrap_or_else(|| {
        let pr = crate::worldmap::project_to_lane_aligned(graph, p, agent.state.heading);
        LanePosition {
            lane: pr.lane,
            s: pr.arclength,
        }
    })
}

struct Planned {
    decision: Decision,
    next: VehicleState,
}

/// Plans one CBV step; `None` when no reference line is available.
#[allow(clippy::too_many_arguments)]
fn plan_cbv(
    sc: &LoadedScenario,
    cfg: &SimConfig,
    reward: &RewardConfig,
    params: &ScoringParams,
    agents: &[Agent],
    forecasts: &[Option<Vec<VehicleState>>],
    i: usize,
    step: usize,
    rng: &mut ChaCha8Rng,
) -> Result<Option<Planned>> {
    let graph = &sc.map.graph;
    let me = &agents[i];
    let start = localize(graph, me);
    let mut query: RouteQuery = distance_to_goal(graph, start, sc.scenario.route.goal)?;
    if !query.is_reachable() {
        let last = *me.route.last().unwrap();
        let end = LanePosition {
            lane: last,
            s: graph.lane_length(last)?,
        };
        query = distance_to_goal(graph, start, end)?;
    }
    let refs = reference_lines(&query, graph, cfg.features.n_ref, cfg.reference_length)?;
    if refs.is_empty() {
        return Ok(None);
    }
    let set = generate_candidates(&me.state, &refs, &cfg.generation)?;

    let mut others: Vec<(&Vec<VehicleState>, VehicleShape)> = Vec::new();
    for (j, a) in agents.iter().enumerate() {
        if j != i && a.active {
            others.push((
                forecasts[j].as_ref().expect("active agents have forecasts"),
                a.shape,
            ));
        }
    }
    let seqs: Vec<Vec<VehicleState>> = others.iter().map(|(s, _)| (*s).clone()).collect();
    let shapes: Vec<VehicleShape> = others.iter().map(|(_, sh)| *sh).collect();
    let ctx = FeatureContext {
        forecasts: &seqs,
        shapes: &shapes,
        own_shape: me.shape,
        route: &refs[0],
        graph,
    };
    let features = candidate_features(&set, &ctx, &cfg.features);
    let dist = score(params, &features)?;
    let selected = select_trajectory(&dist, cfg.select, rng);

    let h = cfg.rollout_horizon;
    let outcomes: Vec<(f64, Option<VehicleState>)> = set
        .candidates
        .par_iter()
        .enumerate()
        .map(|(c, cand)| {
            let path = cand.tracking_path(cfg.dt);
            let ro = forward_simulate(&me.state, &me.shape, &path, h, &cfg.gains, &cfg.limits, c);
            let rewards: Vec<f64> = (0..=h)
                .map(|t| {
                    let at_t: Vec<(VehicleState, VehicleShape)> = seqs
                        .iter()
                        .zip(&shapes)
                        .map(|(s, sh)| (s[t.min(s.len() - 1)], *sh))
                        .collect();
                    let phi = extract_features(&ro.states, t, &me.shape, &at_t, &sc.map, cfg.dt);
                    state_wise_reward(&phi, reward)
                })
                .collect();
            let next = (c == selected).then(|| ro.states[1]);
            (discounted_return(&rewards, reward.gamma), next)
        })
        .collect();
    let returns: Vec<f64> = outcomes.iter().map(|(r, _)| *r).collect();
    let next = outcomes[selected]
        .1
        .expect("selected rollout keeps its first transition");
    let adv = group_advantages(&returns, DEFAULT_ADV_EPS);
    Ok(Some(Planned {
        decision: Decision {
            step,
            agent: me.id,
            features,
            probs: dist.probs,
            returns,
            advantages: adv.advantages,
            selected,
        },
        next,
    }))
}

fn row(agent: &Agent, graph: &LaneGraph, area: &crate::worldmap::DrivableArea) -> AgentRow {
    let st = &agent.state;
    let lane = if agent.role == Role::Cbv {
        crate::worldmap::project_to_lane_aligned(graph, st.position(), st.heading).lane
    } else {
        agent.path.lane_at(agent.s)
    };
    AgentRow {
        id: agent.id,
        role: agent.role,
        x: st.x,
        y: st.y,
        heading: st.heading,
        v: st.speed,
        a: st.accel,
        yaw_rate: st.yaw_rate,
        a_lat: st.lateral_accel(),
        length: agent.shape.length,
        width: agent.shape.width,
        offroad: agent.obb().corners().iter().any(|c| !in_drivable(*c, area)),
        collision_with: Vec::new(),
        selected: None,
        probs: Vec::new(),
        target_speed: graph.lane(lane).map_or(0.0, |l| l.target_speed),
    }
}

/// Runs one episode. `episode` and `master_seed` select the spawn jitter and the
/// sampling stream.
pub fn run_episode(
    sc: &LoadedScenario,
    cfg: &SimConfig,
    reward: &RewardConfig,
    params: &ScoringParams,
    episode: u64,
    master_seed: u64,
) -> Result<EpisodeOutcome> {
    cfg.validate()?;
    reward.validate()?;
    params.validate()?;
    if params.input_dim != cfg.features.dim() {
        return Err(Error::ConfigMismatch(format!(
            "policy expects {} features, the simulator produces {}",
            params.input_dim,
            cfg.features.dim()
        )));
    }
    let scen = &sc.scenario;
    let graph = &sc.map.graph;
    let seed = derive_seed(&[scen.seed, master_seed, episode]);
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let jitter = |rng: &mut ChaCha8Rng| -> (f64, f64) {
        let ds = if scen.jitter.s > 0.0 {
            rng.gen_range(-scen.jitter.s..=scen.jitter.s)
        } else {
            0.0
        };
        let dv = if scen.jitter.speed > 0.0 {
            rng.gen_range(-scen.jitter.speed..=scen.jitter.speed)
        } else {
            0.0
        };
        (ds, dv)
    };

    let mut agents = Vec::with_capacity(1 + scen.bvs.len());
    let (ds, dv) = jitter(&mut rng);
    agents.push(Agent {
        id: 0,
        role: Role::Av,
        state: spawn_state(graph, &scen.av, ds, dv)?,
        shape: cfg.shape,
        route: scen.route.lanes.clone(),
        path: RoutePath::new(graph, &scen.route.lanes)?,
        s: 0.0,
        segment: 0,
        active: true,
    });
    for (k, bv) in scen.bvs.iter().enumerate() {
        let (ds, dv) = jitter(&mut rng);
        agents.push(Agent {
            id: k as u32 + 1,
            role: Role::Bv,
            state: spawn_state(graph, &bv.spawn(), ds, dv)?,
            shape: cfg.shape,
            route: bv.route.clone(),
            path: RoutePath::new(graph, &bv.route)?,
            s: 0.0,
            segment: 0,
            active: true,
        });
    }
    for a in agents.iter_mut() {
        a.relocate();
    }
    let goal_s = agents[0].path.arclength_of(graph, scen.route.goal)?;

    // Roles are fixed for the episode, so CBVs are chosen once from the spawn state.
    let goal = scen.route.goal;
    let av_query = distance_to_goal(graph, localize(graph, &agents[0]), goal)?;
    let mut bv_queries = Vec::new();
    for a in agents.iter().skip(1) {
        bv_queries.push((a.id, distance_to_goal(graph, localize(graph, a), goal)?));
    }
    for id in identify_cbv(&av_query, &bv_queries, cfg.cbv_delta, cfg.max_cbv) {
        agents[id as usize].role = Role::Cbv;
    }

    let mut steps = Vec::new();
    let mut decisions = Vec::new();
    let h = cfg.rollout_horizon;
    for step in 0..=scen.horizon_steps {
        let mut rows: Vec<AgentRow> = agents
            .iter()
            .filter(|a| a.active)
            .map(|a| row(a, graph, &sc.map.area))
            .collect();
        for x in 0..rows.len() {
            for y in (x + 1)..rows.len() {
                let (ax, ay) = (&agents[rows[x].id as usize], &agents[rows[y].id as usize]);
                if obb_overlap(&ax.obb(), &ay.obb()) {
                    let (idx, idy) = (rows[x].id, rows[y].id);
                    rows[x].collision_with.push(idy);
                    rows[y].collision_with.push(idx);
                }
            }
        }
        let av_done = agents[0].s >= goal_s - cfg.goal_tolerance || !agents[0].active;
        let cbv_left = agents.iter().any(|a| a.role == Role::Cbv)
            && !agents.iter().any(|a| a.role == Role::Cbv && a.active);
        let last = step == scen.horizon_steps || av_done || cbv_left;

        let mut next_states: Vec<Option<VehicleState>> = vec![None; agents.len()];
        if !last {
            let forecasts: Vec<Option<Vec<VehicleState>>> = agents
                .iter()
                .map(|a| {
                    a.active.then(|| {
                        let cmd = ControlCommand::new(a.state.accel, a.state.steering, &cfg.limits);
                        forecast_background(&[(a.state, a.shape)], &[cmd], h, &cfg.limits, cfg.dt)
                            .remove(0)
                    })
                })
                .collect();
            let tick = Tick {
                graph,
                cfg,
                agents: &agents,
                forecasts: &forecasts,
            };
            for i in 0..agents.len() {
                if !agents[i].active {
                    continue;
                }
                let planned = if agents[i].role == Role::Cbv {
                    plan_cbv(
                        sc, cfg, reward, params, &agents, &forecasts, i, step, &mut rng,
                    )?
                } else {
                    None
                };
                next_states[i] = Some(match planned {
                    Some(p) => {
                        let r = rows.iter_mut().find(|r| r.id == agents[i].id).unwrap();
                        r.selected = Some(p.decision.selected);
                        r.probs = p.decision.probs.clone();
                        decisions.push(p.decision);
                        p.next
                    }
                    None => {
                        let cmd = tick.rule_command(i);
                        bicycle_step(
                            &agents[i].state,
                            &cmd,
                            &agents[i].shape,
                            &cfg.limits,
                            cfg.dt,
                        )
                    }
                });
            }
        }
        steps.push(StepRecord {
            step,
            time: step as f64 * cfg.dt,
            agents: rows,
        });
        if last {
            break;
        }
        for (a, next) in agents.iter_mut().zip(next_states) {
            if let Some(n) = next {
                a.state = n;
                a.relocate();
                if a.role != Role::Cbv && a.s >= a.path.length() - 0.5 {
                    a.active = a.id == 0;
                }
                if a.role == Role::Cbv {
                    let (end, _) = a.path.pose_at(a.path.length());
                    let pr = a.path.project(a.state.position(), a.segment);
                    if pr.arclength >= a.path.length() - 0.5
                        || a.state.position().distance(end) < 0.5
                    {
                        a.active = false;
                    }
                }
            }
        }
    }
    Ok(EpisodeOutcome {
        log: EpisodeLog {
            scenario: scen.name.clone(),
            episode,
            seed: master_seed,
            dt: cfg.dt,
            steps,
        },
        decisions,
    })
}
