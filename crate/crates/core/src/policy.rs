//! Trainable scoring head over candidate features.

use crate::candidates::CandidateSet;
use crate::dynamics::{obb_distance, Obb, VehicleShape, VehicleState};
use crate::error::{Error, Result};
use crate::geom::wrap_angle;
use crate::worldmap::{project_to_lane_aligned, LaneGraph, ReferenceLine};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

/// Number of continuous features before the reference-line one-hot.
pub const CONTINUOUS_FEATURES: usize = 5;

/// Fixed divisors applied to the raw continuous features.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct FeatureScales {
    pub progress: f64,
    pub clearance: f64,
    pub speed: f64,
    pub offset: f64,
    pub lateral_accel: f64,
}

impl Default for FeatureScales {
    fn default() -> Self {
        Self {
            progress: 20.0,
            clearance: 10.0,
            speed: 10.0,
            offset: 2.0,
            lateral_accel: 4.0,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct FeatureConfig {
    pub n_ref: usize,
    pub clearance_cap: f64,
    /// Last candidate index considered (H), clamped to the candidate length.
    pub horizon: usize,
    pub scales: FeatureScales,
}

impl Default for FeatureConfig {
    fn default() -> Self {
        Self {
            n_ref: 3,
            clearance_cap: 20.0,
            horizon: 80,
            scales: FeatureScales::default(),
        }
    }
}

impl FeatureConfig {
    pub fn dim(&self) -> usize {
        CONTINUOUS_FEATURES + self.n_ref
    }
}

/// World context needed to featurise a candidate set.
pub struct FeatureContext<'a> {
    /// Constant-action forecasts of the other agents, indexed like the candidate points.
    pub forecasts: &'a [Vec<VehicleState>],
    pub shapes: &'a [VehicleShape],
    pub own_shape: VehicleShape,
    /// Route reference line used to measure progress.
    pub route: &'a ReferenceLine,
    pub graph: &'a LaneGraph,
}

/// Raw (unscaled) continuous features of one candidate.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RawFeatures {
    pub progress: f64,
    pub min_clearance: f64,
    pub mean_speed: f64,
    pub terminal_offset: f64,
    pub max_lateral_accel: f64,
}

pub fn raw_features(
    set: &CandidateSet,
    index: usize,
    ctx: &FeatureContext<'_>,
    cfg: &FeatureConfig,
) -> RawFeatures {
    let cand = &set.candidates[index];
    let dt = set.config.dt;
    let last = cfg.horizon.min(cand.points.len() - 1);
    let pts = &cand.points[..=last];

    let (s0, _) = ctx.route.project(pts[0].position());
    let (s1, _) = ctx.route.project(pts[last].position());
    let progress = s1 - s0;

    let mut clearance = cfg.clearance_cap;
    for (t, p) in pts.iter().enumerate() {
        let own = Obb::new(
            p.position(),
            p.heading(),
            ctx.own_shape.length,
            ctx.own_shape.width,
        );
        for (seq, shape) in ctx.forecasts.iter().zip(ctx.shapes) {
            let other = Obb::from_state(&seq[t.min(seq.len() - 1)], shape);
            // Centre distance minus both circumradii is a lower bound on the box distance.
            if own.center.distance(other.center) - own.circumradius() - other.circumradius()
                >= clearance
            {
                continue;
            }
            clearance = clearance.min(obb_distance(&own, &other));
        }
    }

    let mean_speed = pts.iter().map(|p| p.speed()).sum::<f64>() / pts.len() as f64;
    let end = pts[last];
    let terminal_offset = project_to_lane_aligned(ctx.graph, end.position(), end.heading())
        .lateral_offset
        .abs();
    let max_lateral_accel = pts
        .windows(2)
        .map(|w| w[1].speed() * wrap_angle(w[1].heading() - w[0].heading()).abs() / dt)
        .fold(0.0, f64::max);

    RawFeatures {
        progress,
        min_clearance: clearance,
        mean_speed,
        terminal_offset,
        max_lateral_accel,
    }
}

/// Standardised feature vectors for every candidate.
pub fn candidate_features(
    set: &CandidateSet,
    ctx: &FeatureContext<'_>,
    cfg: &FeatureConfig,
) -> Vec<Vec<f64>> {
    (0..set.len())
        .map(|i| {
            let r = raw_features(set, i, ctx, cfg);
            let s = &cfg.scales;
            let mut f = vec![
                r.progress / s.progress,
                r.min_clearance / s.clearance,
                r.mean_speed / s.speed,
                r.terminal_offset / s.offset,
                r.max_lateral_accel / s.lateral_accel,
            ];
            f.extend((0..cfg.n_ref).map(|k| {
                if k == set.candidates[i].ref_index {
                    1.0
                } else {
                    0.0
                }
            }));
            f
        })
        .collect()
}

/// Scoring network parameters.
///
/// Linear layout: `[w (input_dim), b]`. With a hidden layer of width `h`:
/// `[W1 (h x input_dim, row-major), b1 (h), w2 (h), b2]` and a tanh activation.
#[derive(Debug, Clone, PartialEq)]
pub struct ScoringParams {
    pub input_dim: usize,
    pub hidden: Option<usize>,
    pub values: Vec<f64>,
    pub temperature: f64,
    pub eta: f64,
}

pub const DEFAULT_ETA: f64 = 0.01;

impl ScoringParams {
    pub fn param_count(input_dim: usize, hidden: Option<usize>) -> usize {
        match hidden {
            None => input_dim + 1,
            Some(h) => h * input_dim + 2 * h + 1,
        }
    }

    /// Uniform-policy initialisation. A hidden layer gets small seeded first-layer weights
    /// (the output layer stays zero) so its gradient is not identically zero.
    pub fn init(input_dim: usize, hidden: Option<usize>, seed: u64) -> Self {
        let mut values = vec![0.0; Self::param_count(input_dim, hidden)];
        if let Some(h) = hidden {
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            let bound = 1.0 / (input_dim as f64).sqrt();
            for v in &mut values[..h * input_dim] {
                *v = rng.gen_range(-bound..bound);
            }
        }
        Self {
            input_dim,
            hidden,
            values,
            temperature: 1.0,
            eta: DEFAULT_ETA,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.values.len() != Self::param_count(self.input_dim, self.hidden) {
            return Err(Error::InvalidConfig(format!(
                "expected {} parameters, got {}",
                Self::param_count(self.input_dim, self.hidden),
                self.values.len()
            )));
        }
        if !(self.temperature > 0.0) || !(0.0..1.0).contains(&self.eta) {
            return Err(Error::InvalidConfig(
                "temperature must be > 0 and eta in [0, 1)".into(),
            ));
        }
        if self.values.iter().any(|v| !v.is_finite()) {
            return Err(Error::InvalidConfig("non-finite scoring parameter".into()));
        }
        Ok(())
    }

    /// Network output before the temperature, and its gradient w.r.t. the parameters.
    pub fn output_and_grad(&self, f: &[f64]) -> (f64, Vec<f64>) {
        let d = self.input_dim;
        let v = &self.values;
        let mut grad = vec![0.0; v.len()];
        match self.hidden {
            None => {
                let z = v[..d].iter().zip(f).map(|(w, x)| w * x).sum::<f64>() + v[d];
                grad[..d].copy_from_slice(f);
                grad[d] = 1.0;
                (z, grad)
            }
            Some(h) => {
                let (b1, w2, b2) = (h * d, h * d + h, h * d + 2 * h);
                let mut z = v[b2];
                for j in 0..h {
                    let row = &v[j * d..(j + 1) * d];
                    let pre = row.iter().zip(f).map(|(w, x)| w * x).sum::<f64>() + v[b1 + j];
                    let act = pre.tanh();
                    z += v[w2 + j] * act;
                    let back = v[w2 + j] * (1.0 - act * act);
                    for (g, x) in grad[j * d..(j + 1) * d].iter_mut().zip(f) {
                        *g = back * x;
                    }
                    grad[b1 + j] = back;
                    grad[w2 + j] = act;
                }
                grad[b2] = 1.0;
                (z, grad)
            }
        }
    }

    pub fn output(&self, f: &[f64]) -> f64 {
        self.output_and_grad(f).0
    }
}

/// Smoothed softmax over a candidate group.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PolicyDistribution {
    /// Smoothed probabilities `(1 - eta) * softmax + eta / G`.
    pub probs: Vec<f64>,
    /// Logits after the temperature.
    pub logits: Vec<f64>,
    /// Unsmoothed softmax.
    pub softmax: Vec<f64>,
    pub eta: f64,
}

impl PolicyDistribution {
    pub fn from_logits(logits: Vec<f64>, eta: f64) -> Self {
        let m = logits.iter().copied().fold(f64::NEG_INFINITY, f64::max);
        let exps: Vec<f64> = logits.iter().map(|z| (z - m).exp()).collect();
        let total: f64 = exps.iter().sum();
        let softmax: Vec<f64> = exps.iter().map(|e| e / total).collect();
        let g = logits.len() as f64;
        let probs = softmax.iter().map(|p| (1.0 - eta) * p + eta / g).collect();
        Self {
            probs,
            logits,
            softmax,
            eta,
        }
    }

    /// Wraps externally supplied probabilities (logits are their logarithms).
    pub fn from_probs(probs: Vec<f64>, eta: f64) -> Self {
        let logits = probs.iter().map(|p| p.ln()).collect();
        Self {
            softmax: probs.clone(),
            probs,
            logits,
            eta,
        }
    }

    pub fn len(&self) -> usize {
        self.probs.len()
    }

    pub fn is_empty(&self) -> bool {
        self.probs.is_empty()
    }

    /// Support floor `eta / G`.
    pub fn floor(&self) -> f64 {
        self.eta / self.probs.len() as f64
    }
}

fn check_features(params: &ScoringParams, features: &[Vec<f64>]) -> Result<()> {
    if features.is_empty() {
        return Err(Error::EmptyInput("candidate features"));
    }
    for (i, f) in features.iter().enumerate() {
        if f.len() != params.input_dim {
            return Err(Error::InvalidConfig(format!(
                "candidate {i} has {} features, expected {}",
                f.len(),
                params.input_dim
            )));
        }
        if f.iter().any(|x| !x.is_finite()) {
            return Err(Error::NonFiniteFeature { index: i });
        }
    }
    Ok(())
}

pub fn score(params: &ScoringParams, features: &[Vec<f64>]) -> Result<PolicyDistribution> {
    check_features(params, features)?;
    let logits = features
        .iter()
        .map(|f| params.output(f) / params.temperature)
        .collect();
    Ok(PolicyDistribution::from_logits(logits, params.eta))
}

/// Distribution together with `∇θ log p̃_i` for every candidate.
///
/// With `p` the raw softmax and `p̃` the smoothed one,
/// `∇ log p̃_i = (1 - η) (p_i / p̃_i) (∇z_i - Σ_j p_j ∇z_j) / τ`.
pub fn log_prob_jacobian(
    params: &ScoringParams,
    features: &[Vec<f64>],
) -> Result<(PolicyDistribution, Vec<Vec<f64>>)> {
    check_features(params, features)?;
    let outs: Vec<(f64, Vec<f64>)> = features.iter().map(|f| params.output_and_grad(f)).collect();
    let dist = PolicyDistribution::from_logits(
        outs.iter().map(|(z, _)| z / params.temperature).collect(),
        params.eta,
    );
    let n = params.values.len();
    let mut mean = vec![0.0; n];
    for ((_, g), p) in outs.iter().zip(&dist.softmax) {
        for (m, gi) in mean.iter_mut().zip(g) {
            *m += p * gi;
        }
    }
    let jac = outs
        .iter()
        .enumerate()
        .map(|(i, (_, g))| {
            let k = (1.0 - params.eta) * dist.softmax[i] / dist.probs[i] / params.temperature;
            g.iter().zip(&mean).map(|(gi, m)| k * (gi - m)).collect()
        })
        .collect();
    Ok((dist, jac))
}

pub fn grad_log_prob(params: &ScoringParams, features: &[Vec<f64>], i: usize) -> Result<Vec<f64>> {
    let (_, mut jac) = log_prob_jacobian(params, features)?;
    if i >= jac.len() {
        return Err(Error::InvalidConfig(format!(
            "candidate index {i} out of range"
        )));
    }
    Ok(jac.swap_remove(i))
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SelectMode {
    Argmax,
    Sample,
}

/// Argmax (lowest index on ties) or a seeded draw from the distribution.
pub fn select_trajectory<R: Rng + ?Sized>(
    dist: &PolicyDistribution,
    mode: SelectMode,
    rng: &mut R,
) -> usize {
    match mode {
        SelectMode::Argmax => {
            let mut best = 0;
            for (i, p) in dist.probs.iter().enumerate() {
                if *p > dist.probs[best] {
                    best = i;
                }
            }
            best
        }
        SelectMode::Sample => {
            let u: f64 = rng.gen();
            let mut acc = 0.0;
            for (i, p) in dist.probs.iter().enumerate() {
                acc += p;
                if u < acc {
                    return i;
                }
            }
            dist.probs.len() - 1
        }
    }
}

pub const CHECKPOINT_VERSION: u32 = 1;

/// Serialised form of [`ScoringParams`]: tensors with shapes and row-major values.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Checkpoint {
    pub version: u32,
    pub shapes: Vec<Vec<usize>>,
    pub values: Vec<Vec<f64>>,
    pub temperature: f64,
    pub eta: f64,
}

impl Checkpoint {
    pub fn from_params(p: &ScoringParams) -> Self {
        let d = p.input_dim;
        let (shapes, splits) = match p.hidden {
            None => (vec![vec![1, d], vec![1]], vec![d, 1]),
            Some(h) => (
                vec![vec![h, d], vec![h], vec![1, h], vec![1]],
                vec![h * d, h, h, 1],
            ),
        };
        let mut values = Vec::new();
        let mut at = 0;
        for n in splits {
            values.push(p.values[at..at + n].to_vec());
            at += n;
        }
        Self {
            version: CHECKPOINT_VERSION,
            shapes,
            values,
            temperature: p.temperature,
            eta: p.eta,
        }
    }

    pub fn to_params(&self) -> Result<ScoringParams> {
        if self.version != CHECKPOINT_VERSION {
            return Err(Error::Parse(format!(
                "unsupported checkpoint version {}",
                self.version
            )));
        }
        if self.shapes.len() != self.values.len() {
            return Err(Error::Parse(
                "checkpoint shapes and values differ in length".into(),
            ));
        }
        for (shape, vals) in self.shapes.iter().zip(&self.values) {
            if shape.iter().product::<usize>() != vals.len() {
                return Err(Error::Parse(format!(
                    "tensor of shape {shape:?} has {} values",
                    vals.len()
                )));
            }
        }
        let (input_dim, hidden) = match self.shapes.as_slice() {
            [w, b] if w.len() == 2 && w[0] == 1 && b == &[1] => (w[1], None),
            [w1, b1, w2, b2]
                if w1.len() == 2 && b1 == &[w1[0]] && w2 == &[1, w1[0]] && b2 == &[1] =>
            {
                (w1[1], Some(w1[0]))
            }
            _ => {
                return Err(Error::Parse(format!(
                    "unrecognised checkpoint layout {:?}",
                    self.shapes
                )))
            }
        };
        let params = ScoringParams {
            input_dim,
            hidden,
            values: self.values.concat(),
            temperature: self.temperature,
            eta: self.eta,
        };
        params.validate().map_err(|e| Error::Parse(e.to_string()))?;
        Ok(params)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn equal_logits_are_uniform() {
        let d = PolicyDistribution::from_logits(vec![0.3; 4], 0.01);
        assert!(d.probs.iter().all(|p| (p - 0.25).abs() < 1e-15));
    }

    #[test]
    fn hand_computed_softmax() {
        let d = PolicyDistribution::from_logits(vec![2f64.ln(), 0.0, 0.0], 0.0);
        assert!((d.probs[0] - 0.5).abs() < 1e-15);
        assert!((d.probs[1] - 0.25).abs() < 1e-15);
        let d = PolicyDistribution::from_logits(vec![2f64.ln(), 0.0, 0.0], 0.01);
        assert!((d.probs[0] - 0.498333).abs() < 1e-6);
        assert!((d.probs[1] - 0.250833).abs() < 1e-6);
    }

    #[test]
    fn non_finite_feature_names_candidate() {
        let p = ScoringParams::init(2, None, 0);
        let err = score(&p, &[vec![0.0, 1.0], vec![f64::NAN, 0.0]]).unwrap_err();
        assert!(matches!(err, Error::NonFiniteFeature { index: 1 }));
    }

    #[test]
    fn symmetric_uniform_gradient_vanishes() {
        let p = ScoringParams::init(2, None, 0);
        let feats = vec![
            vec![1.0, 0.0],
            vec![-1.0, 0.0],
            vec![0.0, 1.0],
            vec![0.0, -1.0],
        ];
        let (_, jac) = log_prob_jacobian(&p, &feats).unwrap();
        let total: Vec<f64> = (0..3).map(|k| jac.iter().map(|g| g[k]).sum()).collect();
        assert!(total.iter().all(|t| t.abs() < 1e-15));
    }

    #[test]
    fn argmax_and_ties() {
        let mut rng = ChaCha8Rng::seed_from_u64(0);
        let d = PolicyDistribution::from_probs(vec![0.1, 0.7, 0.2], 0.0);
        assert_eq!(select_trajectory(&d, SelectMode::Argmax, &mut rng), 1);
        let d = PolicyDistribution::from_probs(vec![0.5, 0.5], 0.0);
        assert_eq!(select_trajectory(&d, SelectMode::Argmax, &mut rng), 0);
    }

    #[test]
    fn sampling_is_seeded() {
        let d = PolicyDistribution::from_probs(vec![0.2, 0.3, 0.5], 0.0);
        let draw = |seed| {
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            (0..20)
                .map(|_| select_trajectory(&d, SelectMode::Sample, &mut rng))
                .collect::<Vec<_>>()
        };
        assert_eq!(draw(7), draw(7));
    }

    #[test]
    fn checkpoint_layouts() {
        for hidden in [None, Some(4)] {
            let mut p = ScoringParams::init(3, hidden, 1);
            p.values
                .iter_mut()
                .enumerate()
                .for_each(|(i, v)| *v += i as f64 * 0.1);
            let back = Checkpoint::from_params(&p).to_params().unwrap();
            assert_eq!(back, p);
        }
        let mut c = Checkpoint::from_params(&ScoringParams::init(3, None, 0));
        c.values[0].pop();
        assert!(c.to_params().is_err());
    }
}
