//! Kinematic, interaction, map and comfort metrics over episode logs.

use crate::dynamics::{self as collision, Obb};
use crate::error::{Error, Result};
use crate::geom::Vec2;
use crate::log::{AgentRow, EpisodeLog, Role};
use rand::seq::index::sample;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use statrs::distribution::{ContinuousCDF, Normal};
use std::collections::{BTreeMap, BTreeSet};
use std::io::Write;

pub const METRICS_SCHEMA: &str = "rift-metrics-v1";
pub const SW_MAX_SAMPLES: usize = 5000;

const SW_C1: [f64; 6] = [0.0, 0.221157, -0.147981, -2.071190, 4.434685, -2.706056];
const SW_C2: [f64; 6] = [0.0, 0.042981, -0.293762, -1.752461, 5.682633, -3.582633];

fn poly(c: &[f64], x: f64) -> f64 {
    c.iter().rev().fold(0.0, |acc, &k| acc * x + k)
}

/// Shapiro-Wilk W using Royston's coefficient approximation. Samples above
/// [`SW_MAX_SAMPLES`] are sub-sampled without replacement using `seed`.
pub fn shapiro_wilk(samples: &[f64], seed: u64) -> Result<f64> {
    if samples.len() < 3 {
        return Err(Error::InsufficientSamples {
            required: 3,
            got: samples.len(),
        });
    }
    if samples.iter().any(|x| !x.is_finite()) {
        return Err(Error::Parse("non-finite sample".into()));
    }
    let mut x: Vec<f64> = if samples.len() > SW_MAX_SAMPLES {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let mut idx = sample(&mut rng, samples.len(), SW_MAX_SAMPLES).into_vec();
        idx.sort_unstable();
        idx.into_iter().map(|i| samples[i]).collect()
    } else {
        samples.to_vec()
    };
    x.sort_by(f64::total_cmp);
    let n = x.len();
    let half = n / 2;
    let nf = n as f64;
    let mean = x.iter().sum::<f64>() / nf;
    let ssq: f64 = x.iter().map(|v| (v - mean) * (v - mean)).sum();
    if !(ssq > 0.0) || x[n - 1] - x[0] <= f64::EPSILON * x[0].abs().max(x[n - 1].abs()) {
        return Err(Error::Parse("samples have zero variance".into()));
    }

    let mut a = vec![0.0; half];
    if n == 3 {
        a[0] = 0.5f64.sqrt();
    } else {
        let normal = Normal::new(0.0, 1.0).expect("standard normal");
        let m: Vec<f64> = (1..=half)
            .map(|i| normal.inverse_cdf((i as f64 - 0.375) / (nf + 0.25)))
            .collect();
        let summ2 = 2.0 * m.iter().map(|v| v * v).sum::<f64>();
        let ssumm2 = summ2.sqrt();
        let rsn = 1.0 / nf.sqrt();
        let a1 = poly(&SW_C1, rsn) - m[0] / ssumm2;
        let (start, fac) = if n > 5 {
            let a2 = -m[1] / ssumm2 + poly(&SW_C2, rsn);
            a[1] = a2;
            let fac = ((summ2 - 2.0 * m[0] * m[0] - 2.0 * m[1] * m[1])
                / (1.0 - 2.0 * a1 * a1 - 2.0 * a2 * a2))
                .sqrt();
            (2, fac)
        } else {
            (
                1,
                ((summ2 - 2.0 * m[0] * m[0]) / (1.0 - 2.0 * a1 * a1)).sqrt(),
            )
        };
        a[0] = a1;
        for i in start..half {
            a[i] = -m[i] / fac;
        }
    }
    let num: f64 = (0..half).map(|i| a[i] * (x[n - 1 - i] - x[i])).sum();
    Ok((num * num / ssq).min(1.0))
}

/// First Wasserstein distance between two empirical distributions: the integral of
/// the absolute difference of their CDFs.
pub fn wasserstein_1d(a: &[f64], b: &[f64]) -> Result<f64> {
    if a.is_empty() || b.is_empty() {
        return Err(Error::EmptyInput("wasserstein sample"));
    }
    let mut xa = a.to_vec();
    let mut xb = b.to_vec();
    xa.sort_by(f64::total_cmp);
    xb.sort_by(f64::total_cmp);
    if xa.len() == xb.len() {
        return Ok(xa.iter().zip(&xb).map(|(p, q)| (p - q).abs()).sum::<f64>() / xa.len() as f64);
    }
    let (na, nb) = (xa.len() as f64, xb.len() as f64);
    let (mut i, mut j) = (0, 0);
    let mut prev = xa[0].min(xb[0]);
    let mut total = 0.0;
    while i < xa.len() || j < xb.len() {
        let next = match (xa.get(i), xb.get(j)) {
            (Some(&p), Some(&q)) => p.min(q),
            (Some(&p), None) => p,
            (None, Some(&q)) => q,
            (None, None) => unreachable!(),
        };
        total += (i as f64 / na - j as f64 / nb).abs() * (next - prev);
        while i < xa.len() && xa[i] == next {
            i += 1;
        }
        while j < xb.len() && xb[j] == next {
            j += 1;
        }
        prev = next;
    }
    Ok(total)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct ComfortBounds {
    pub long_accel_min: f64,
    pub long_accel_max: f64,
    pub lat_accel_abs: f64,
    pub jerk_abs: f64,
}

impl Default for ComfortBounds {
    fn default() -> Self {
        Self {
            long_accel_min: -4.05,
            long_accel_max: 2.40,
            lat_accel_abs: 4.89,
            jerk_abs: 8.37,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct BlockedParams {
    pub speed_threshold: f64,
    pub duration: f64,
    pub radius: f64,
    /// Half-angle of the cone ahead of the AV (degrees).
    pub cone_deg: f64,
}

impl Default for BlockedParams {
    fn default() -> Self {
        Self {
            speed_threshold: 0.1,
            duration: 30.0,
            radius: 15.0,
            cone_deg: 60.0,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct MetricsConfig {
    pub ttc_cap: f64,
    pub comfort: ComfortBounds,
    pub blocked: BlockedParams,
}

impl Default for MetricsConfig {
    fn default() -> Self {
        Self {
            ttc_cap: 10.0,
            comfort: ComfortBounds::default(),
            blocked: BlockedParams::default(),
        }
    }
}

impl MetricsConfig {
    pub fn validate(&self) -> Result<()> {
        let c = &self.comfort;
        let b = &self.blocked;
        let ok = self.ttc_cap > 0.0
            && c.long_accel_min < c.long_accel_max
            && c.lat_accel_abs > 0.0
            && c.jerk_abs > 0.0
            && b.speed_threshold >= 0.0
            && b.duration > 0.0
            && b.radius > 0.0
            && b.cone_deg > 0.0
            && b.cone_deg <= 180.0;
        if !ok {
            return Err(Error::InvalidConfig(format!(
                "invalid metrics configuration {self:?}"
            )));
        }
        Ok(())
    }
}

/// A scalar with the number of samples behind it; `value` is absent when nothing was recorded.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Metric {
    pub value: Option<f64>,
    pub count: usize,
}

impl Metric {
    pub fn new(value: f64, count: usize) -> Self {
        Self {
            value: Some(value),
            count,
        }
    }

    pub fn absent() -> Self {
        Self {
            value: None,
            count: 0,
        }
    }

    fn mean_of(samples: &[f64]) -> Self {
        if samples.is_empty() {
            Self::absent()
        } else {
            Self::new(
                samples.iter().sum::<f64>() / samples.len() as f64,
                samples.len(),
            )
        }
    }
}

fn obb_of(r: &AgentRow) -> Obb {
    Obb::new(Vec2::new(r.x, r.y), r.heading, r.length, r.width)
}

fn velocity(r: &AgentRow) -> Vec2 {
    Vec2::from_heading(r.heading) * r.v
}

/// Longitudinal and lateral time-to-collision of `other` in `ego`'s frame. An axis along
/// which the boxes already overlap contributes no time; overlap on both gives zero.
pub fn ttc_2d(ego: &AgentRow, other: &AgentRow) -> f64 {
    let (a, b) = (obb_of(ego), obb_of(other));
    let d = b.center - a.center;
    let rel = velocity(other) - velocity(ego);
    let mut best = f64::INFINITY;
    let mut overlapping = 0;
    for n in [a.axis, a.axis.perp()] {
        let sep = d.dot(n);
        let gap = sep.abs() - a.radius_along(n) - b.radius_along(n);
        if gap <= 0.0 {
            overlapping += 1;
            continue;
        }
        let closing = -sep.signum() * rel.dot(n);
        if closing > 0.0 {
            best = best.min(gap / closing);
        }
    }
    if overlapping == 2 {
        0.0
    } else {
        best
    }
}

/// Time until the two boxes first touch under constant relative velocity; zero if they
/// already overlap, infinite if they never meet.
pub fn time_to_contact(ego: &AgentRow, other: &AgentRow) -> f64 {
    collision::time_to_contact(
        &obb_of(ego),
        &obb_of(other),
        velocity(other) - velocity(ego),
    )
    .unwrap_or(f64::INFINITY)
}

/// Jerk by central differences of `accel`, one-sided at the ends.
pub fn jerk_series(accel: &[f64], dt: f64) -> Vec<f64> {
    let n = accel.len();
    if n < 2 {
        return vec![0.0; n];
    }
    (0..n)
        .map(|k| {
            if k == 0 {
                (accel[1] - accel[0]) / dt
            } else if k == n - 1 {
                (accel[n - 1] - accel[n - 2]) / dt
            } else {
                (accel[k + 1] - accel[k - 1]) / (2.0 * dt)
            }
        })
        .collect()
}

pub fn frame_comfortable(a_long: f64, a_lat: f64, jerk: f64, b: &ComfortBounds) -> bool {
    a_long >= b.long_accel_min
        && a_long <= b.long_accel_max
        && a_lat.abs() <= b.lat_accel_abs
        && jerk.abs() <= b.jerk_abs
}

/// Collision onsets: a pair involving a CBV that is in contact at a step but was not at
/// the previous one.
pub fn collision_events(log: &EpisodeLog) -> usize {
    let cbvs: BTreeSet<u32> = log.ids_with_role(Role::Cbv).into_iter().collect();
    let mut prev: BTreeSet<(u32, u32)> = BTreeSet::new();
    let mut events = 0;
    for step in &log.steps {
        let mut now = BTreeSet::new();
        for r in &step.agents {
            for &o in &r.collision_with {
                if cbvs.contains(&r.id) || cbvs.contains(&o) {
                    now.insert((r.id.min(o), r.id.max(o)));
                }
            }
        }
        events += now.difference(&prev).count();
        prev = now;
    }
    events
}

/// Counts maximal runs in which the AV stands still with a CBV close ahead.
pub fn blocked_events(log: &EpisodeLog, p: &BlockedParams) -> usize {
    let cos_cone = p.cone_deg.to_radians().cos();
    let mut run = 0usize;
    let mut events = 0;
    let needed = (p.duration / log.dt - 1e-9).ceil() as usize;
    let close_run = |run: usize| usize::from(run > 0 && run >= needed);
    for step in &log.steps {
        let av = step.agents.iter().find(|r| r.role == Role::Av);
        let blocked = av.is_some_and(|av| {
            av.v < p.speed_threshold
                && step.agents.iter().filter(|r| r.role == Role::Cbv).any(|c| {
                    let d = Vec2::new(c.x - av.x, c.y - av.y);
                    let dist = d.norm();
                    dist <= p.radius
                        && (dist == 0.0 || d.dot(Vec2::from_heading(av.heading)) >= cos_cone * dist)
                })
        });
        if blocked {
            run += 1;
        } else {
            events += close_run(run);
            run = 0;
        }
    }
    events + close_run(run)
}

pub const METRIC_NAMES: [&str; 15] = [
    "s_sw",
    "s_wd",
    "a_sw",
    "cpk",
    "rp",
    "ttc_2d",
    "act",
    "orr",
    "ucr",
    "jerk",
    "fvs",
    "blocked",
    "collisions",
    "cbv_steps",
    "offroad_steps",
];

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EpisodeMetrics {
    pub scenario: String,
    pub episode: u64,
    pub seed: u64,
    pub metrics: BTreeMap<String, Metric>,
}

impl EpisodeMetrics {
    pub fn value(&self, name: &str) -> Option<f64> {
        self.metrics.get(name).and_then(|m| m.value)
    }
}

pub fn episode_metrics(log: &EpisodeLog, cfg: &MetricsConfig) -> Result<EpisodeMetrics> {
    log.validate()?;
    let cbv_ids = log.ids_with_role(Role::Cbv);
    let mut speeds = Vec::new();
    let mut targets = Vec::new();
    let mut accels = Vec::new();
    let mut meters = 0.0;
    let (mut steps, mut offroad, mut uncomfortable) = (0usize, 0usize, 0usize);
    let mut jerks = Vec::new();
    let mut passing_tracks = 0usize;
    for &id in &cbv_ids {
        let track = log.track(id);
        let a: Vec<f64> = track.iter().map(|(_, r)| r.a).collect();
        let jerk = jerk_series(&a, log.dt);
        let mut all_ok = true;
        for (k, (_, r)) in track.iter().enumerate() {
            speeds.push(r.v);
            targets.push(r.target_speed);
            accels.push(r.a);
            steps += 1;
            offroad += usize::from(r.offroad);
            if k > 0 {
                let p = track[k - 1].1;
                meters += (r.x - p.x).hypot(r.y - p.y);
            }
            if !frame_comfortable(r.a, r.a_lat, jerk[k], &cfg.comfort) {
                uncomfortable += 1;
                all_ok = false;
            }
            jerks.push(jerk[k].abs());
        }
        passing_tracks += usize::from(all_ok && !track.is_empty());
    }

    let mut ttc = Vec::new();
    let mut act = Vec::new();
    for step in &log.steps {
        let Some(av) = step.agents.iter().find(|r| r.role == Role::Av) else {
            continue;
        };
        let cbvs = step.agents.iter().filter(|r| r.role == Role::Cbv);
        let (t, c) = cbvs.fold((f64::INFINITY, f64::INFINITY), |(t, c), r| {
            (t.min(ttc_2d(av, r)), c.min(time_to_contact(av, r)))
        });
        if t < cfg.ttc_cap {
            ttc.push(t);
        }
        if c < cfg.ttc_cap {
            act.push(c);
        }
    }

    let sw = |xs: &[f64]| match shapiro_wilk(xs, log.seed) {
        Ok(w) => Metric::new(w, xs.len().min(SW_MAX_SAMPLES)),
        Err(_) => Metric::absent(),
    };
    let collisions = collision_events(log);
    let mut m = BTreeMap::new();
    m.insert("s_sw".into(), sw(&speeds));
    m.insert("a_sw".into(), sw(&accels));
    m.insert(
        "s_wd".into(),
        wasserstein_1d(&speeds, &targets)
            .map_or(Metric::absent(), |w| Metric::new(w, speeds.len())),
    );
    m.insert(
        "cpk".into(),
        if meters > 0.0 {
            Metric::new(1000.0 * collisions as f64 / meters, collisions)
        } else {
            Metric::absent()
        },
    );
    m.insert("rp".into(), Metric::new(meters, cbv_ids.len()));
    m.insert("ttc_2d".into(), Metric::mean_of(&ttc));
    m.insert("act".into(), Metric::mean_of(&act));
    let frac = |k: usize| {
        if steps == 0 {
            Metric::absent()
        } else {
            Metric::new(100.0 * k as f64 / steps as f64, steps)
        }
    };
    m.insert("orr".into(), frac(offroad));
    m.insert("ucr".into(), frac(uncomfortable));
    m.insert("jerk".into(), Metric::mean_of(&jerks));
    m.insert(
        "fvs".into(),
        if cbv_ids.is_empty() {
            Metric::absent()
        } else {
            Metric::new(
                100.0 * passing_tracks as f64 / cbv_ids.len() as f64,
                cbv_ids.len(),
            )
        },
    );
    m.insert(
        "blocked".into(),
        Metric::new(blocked_events(log, &cfg.blocked) as f64, 1),
    );
    m.insert("collisions".into(), Metric::new(collisions as f64, 1));
    m.insert("cbv_steps".into(), Metric::new(steps as f64, 1));
    m.insert("offroad_steps".into(), Metric::new(offroad as f64, 1));
    Ok(EpisodeMetrics {
        scenario: log.scenario.clone(),
        episode: log.episode,
        seed: log.seed,
        metrics: m,
    })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MetricsReport {
    pub schema: String,
    pub episodes: Vec<EpisodeMetrics>,
    /// Means over episodes, except CPK and ORR which pool their numerators and denominators.
    pub aggregate: BTreeMap<String, Metric>,
}

impl MetricsReport {
    pub fn from_logs(logs: &[EpisodeLog], cfg: &MetricsConfig) -> Result<Self> {
        if logs.is_empty() {
            return Err(Error::EmptyInput("episode logs"));
        }
        let episodes = logs
            .par_iter()
            .map(|l| episode_metrics(l, cfg))
            .collect::<Result<Vec<_>>>()?;
        Ok(Self::from_episodes(episodes))
    }

    pub fn from_episodes(episodes: Vec<EpisodeMetrics>) -> Self {
        let sum = |name: &str| episodes.iter().filter_map(|e| e.value(name)).sum::<f64>();
        let mut aggregate = BTreeMap::new();
        for name in METRIC_NAMES {
            let vals: Vec<f64> = episodes.iter().filter_map(|e| e.value(name)).collect();
            aggregate.insert(name.to_string(), Metric::mean_of(&vals));
        }
        let (collisions, meters) = (sum("collisions"), sum("rp"));
        aggregate.insert(
            "cpk".into(),
            if meters > 0.0 {
                Metric::new(1000.0 * collisions / meters, collisions as usize)
            } else {
                Metric::absent()
            },
        );
        let (off, steps) = (sum("offroad_steps"), sum("cbv_steps"));
        aggregate.insert(
            "orr".into(),
            if steps > 0.0 {
                Metric::new(100.0 * off / steps, steps as usize)
            } else {
                Metric::absent()
            },
        );
        Self {
            schema: METRICS_SCHEMA.into(),
            episodes,
            aggregate,
        }
    }

    pub fn aggregate_value(&self, name: &str) -> Option<f64> {
        self.aggregate.get(name).and_then(|m| m.value)
    }

    pub fn to_json(&self) -> Result<String> {
        Ok(serde_json::to_string_pretty(self)?)
    }

    /// One row per episode followed by an `aggregate` row; absent values are empty cells.
    pub fn write_csv<W: Write>(&self, mut out: W) -> Result<()> {
        writeln!(out, "# schema={METRICS_SCHEMA}")?;
        let mut w = csv::Writer::from_writer(out);
        let mut header = vec!["scenario".to_string(), "episode".into(), "seed".into()];
        header.extend(METRIC_NAMES.iter().map(|s| s.to_string()));
        w.write_record(&header)?;
        let cell = |m: Option<&Metric>| {
            m.and_then(|m| m.value)
                .map_or(String::new(), |v| v.to_string())
        };
        for e in &self.episodes {
            let mut row = vec![
                e.scenario.clone(),
                e.episode.to_string(),
                e.seed.to_string(),
            ];
            row.extend(METRIC_NAMES.iter().map(|n| cell(e.metrics.get(*n))));
            w.write_record(&row)?;
        }
        let mut row = vec!["aggregate".to_string(), String::new(), String::new()];
        row.extend(METRIC_NAMES.iter().map(|n| cell(self.aggregate.get(*n))));
        w.write_record(&row)?;
        w.flush()?;
        Ok(())
    }
}
