//! Closed-loop collection into a rollout buffer and minibatch fine-tuning of the scoring head.

use crate::error::{Error, Result};
use crate::log::EpisodeLog;
use crate::objectives::{
    grpo_objective, old_weight_objective, ppo_objective, reinforce_objective, rift_objective,
    AdvantageGroup, ObjectiveReport, SurrogateConfig, DEFAULT_ADV_EPS, DEFAULT_KL_BETA,
};
use crate::policy::{log_prob_jacobian, score, PolicyDistribution, ScoringParams, DEFAULT_ETA};
use crate::reward::{RewardConfig, RewardWeights, Style, DEFAULT_GAMMA};
use crate::sim::{derive_seed, run_episode, SimConfig};
use crate::worldmap::LoadedScenario;
use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};
use std::f64::consts::PI;
use std::fmt;
use std::io::Write;
use std::str::FromStr;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Objective {
    Rift,
    Grpo,
    OldWeight,
    Ppo,
    Reinforce,
}

impl Objective {
    pub const ALL: [Objective; 5] = [
        Objective::Rift,
        Objective::Grpo,
        Objective::OldWeight,
        Objective::Ppo,
        Objective::Reinforce,
    ];

    pub fn name(&self) -> &'static str {
        match self {
            Objective::Rift => "rift",
            Objective::Grpo => "grpo",
            Objective::OldWeight => "old_weight",
            Objective::Ppo => "ppo",
            Objective::Reinforce => "reinforce",
        }
    }
}

impl fmt::Display for Objective {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for Objective {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        Objective::ALL
            .into_iter()
            .find(|o| o.name() == s)
            .ok_or_else(|| Error::InvalidConfig(format!("unknown objective '{s}'")))
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct TrainConfig {
    pub buffer_capacity: usize,
    pub batch_size: usize,
    pub epochs: usize,
    pub warmup_epochs: usize,
    pub lr_init: f64,
    pub lr_min: f64,
    pub lr_decay: f64,
    pub weight_decay: f64,
    pub adam_beta1: f64,
    pub adam_beta2: f64,
    pub adam_eps: f64,
    pub gamma: f64,
    pub clip_eps: f64,
    pub dual_clip: f64,
    /// KL weight of the GRPO and old-weight objectives.
    pub kl_beta: f64,
    pub n_lon: usize,
    /// Candidate length T; also the rollout horizon H.
    pub horizon: usize,
    pub dt: f64,
    pub iterations: usize,
    pub objective: Objective,
    /// Reward style; the scenario's own style when unset.
    pub style: Option<Style>,
    /// Custom reward weights, replacing the style preset.
    pub reward_weights: Option<RewardWeights>,
    pub hidden: Option<usize>,
    pub temperature: f64,
    pub eta: f64,
    /// Episodes simulated concurrently during collection.
    pub episodes_per_batch: usize,
    /// Episodes allowed per iteration before collection gives up.
    pub max_episodes: usize,
}

impl Default for TrainConfig {
    fn default() -> Self {
        Self {
            buffer_capacity: 4096,
            batch_size: 256,
            epochs: 16,
            warmup_epochs: 3,
            lr_init: 1e-4,
            lr_min: 1e-6,
            lr_decay: 0.9,
            weight_decay: 1e-5,
            adam_beta1: 0.9,
            adam_beta2: 0.999,
            adam_eps: 1e-8,
            gamma: DEFAULT_GAMMA,
            clip_eps: 0.2,
            dual_clip: 3.0,
            kl_beta: DEFAULT_KL_BETA,
            n_lon: 12,
            horizon: 80,
            dt: 0.1,
            iterations: 10,
            objective: Objective::Rift,
            style: None,
            reward_weights: None,
            hidden: None,
            temperature: 1.0,
            eta: DEFAULT_ETA,
            episodes_per_batch: 8,
            max_episodes: 256,
        }
    }
}

impl TrainConfig {
    pub fn validate(&self) -> Result<()> {
        let positive = [
            ("buffer_capacity", self.buffer_capacity as f64),
            ("batch_size", self.batch_size as f64),
            ("epochs", self.epochs as f64),
            ("lr_init", self.lr_init),
            ("lr_min", self.lr_min),
            ("lr_decay", self.lr_decay),
            ("gamma", self.gamma),
            ("clip_eps", self.clip_eps),
            ("dual_clip", self.dual_clip),
            ("n_lon", self.n_lon as f64),
            ("horizon", self.horizon as f64),
            ("dt", self.dt),
            ("temperature", self.temperature),
            ("episodes_per_batch", self.episodes_per_batch as f64),
            ("max_episodes", self.max_episodes as f64),
        ];
        for (name, v) in positive {
            if !(v > 0.0) || !v.is_finite() {
                return Err(Error::InvalidConfig(format!(
                    "{name} must be positive, got {v}"
                )));
            }
        }
        if self.lr_min > self.lr_init {
            return Err(Error::InvalidConfig(
                "lr_min must not exceed lr_init".into(),
            ));
        }
        if !(self.weight_decay >= 0.0) || !(self.kl_beta >= 0.0) {
            return Err(Error::InvalidConfig(
                "weight_decay and kl_beta must be non-negative".into(),
            ));
        }
        if !(self.eta >= 0.0 && self.eta < 1.0) {
            return Err(Error::InvalidConfig(format!(
                "eta must lie in [0, 1), got {}",
                self.eta
            )));
        }
        if !(0.0..1.0).contains(&self.adam_beta1)
            || !(0.0..1.0).contains(&self.adam_beta2)
            || !(self.adam_eps > 0.0)
        {
            return Err(Error::InvalidConfig("invalid Adam moments".into()));
        }
        if self.hidden == Some(0) {
            return Err(Error::InvalidConfig("hidden width must be positive".into()));
        }
        self.reward_for(Style::Normal).validate()
    }

    /// Copies the shared hyperparameters into the simulator configuration.
    pub fn apply(&self, sim: &mut SimConfig) {
        sim.generation.n_lon = self.n_lon;
        sim.generation.horizon = self.horizon;
        sim.generation.dt = self.dt;
        sim.dt = self.dt;
        sim.rollout_horizon = self.horizon;
        sim.features.horizon = self.horizon;
    }

    pub fn reward_for(&self, scenario_style: Style) -> RewardConfig {
        let mut r = RewardConfig::for_style(self.style.unwrap_or(scenario_style));
        if let Some(w) = self.reward_weights {
            r.weights = w;
        }
        r.gamma = self.gamma;
        r
    }

    fn surrogate(&self) -> SurrogateConfig {
        let base = SurrogateConfig {
            clip_eps: self.clip_eps,
            dual_clip: self.dual_clip,
            ..SurrogateConfig::rift()
        };
        match self.objective {
            Objective::Rift => base,
            Objective::Grpo => SurrogateConfig {
                kl_beta: self.kl_beta,
                ..SurrogateConfig {
                    kernel: crate::objectives::Kernel::PpoClip,
                    ..base
                }
            },
            Objective::OldWeight => SurrogateConfig {
                kl_beta: self.kl_beta,
                weighting: crate::objectives::Weighting::OldPolicy,
                kernel: crate::objectives::Kernel::PpoClip,
                ..base
            },
            Objective::Ppo | Objective::Reinforce => SurrogateConfig {
                kernel: crate::objectives::Kernel::PpoClip,
                ..base
            },
        }
    }
}

/// Learning rate for an epoch: linear warmup to the iteration's initial rate, then cosine
/// decay to the minimum at the last epoch. The initial rate decays geometrically per
/// iteration and is floored at the minimum.
pub fn lr_schedule(iteration: usize, epoch: usize, cfg: &TrainConfig) -> f64 {
    let base = (cfg.lr_init * cfg.lr_decay.powi(iteration as i32)).max(cfg.lr_min);
    let w = cfg.warmup_epochs;
    if w > 0 && epoch + 1 < w {
        return base * (epoch + 1) as f64 / w as f64;
    }
    let start = w.saturating_sub(1);
    let last = cfg.epochs.saturating_sub(1);
    if last <= start {
        return base;
    }
    let u = ((epoch.min(last) - start) as f64 / (last - start) as f64).clamp(0.0, 1.0);
    cfg.lr_min + (base - cfg.lr_min) * 0.5 * (1.0 + (PI * u).cos())
}

/// Content hash of a parameter snapshot.
pub fn snapshot_hash(params: &ScoringParams) -> String {
    let mut h = Sha256::new();
    h.update((params.input_dim as u64).to_le_bytes());
    h.update((params.hidden.unwrap_or(0) as u64).to_le_bytes());
    for v in params
        .values
        .iter()
        .chain([&params.temperature, &params.eta])
    {
        h.update(v.to_bits().to_le_bytes());
    }
    h.finalize().iter().map(|b| format!("{b:02x}")).collect()
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TransitionRecord {
    pub features: Vec<Vec<f64>>,
    pub old_probs: Vec<f64>,
    pub returns: Vec<f64>,
    pub advantages: Vec<f64>,
    pub executed: usize,
    pub scenario: usize,
    pub episode: u64,
    pub step: usize,
    pub agent: u32,
    pub snapshot: String,
}

impl TransitionRecord {
    pub fn group_size(&self) -> usize {
        self.features.len()
    }

    pub fn advantage_group(&self) -> AdvantageGroup {
        AdvantageGroup {
            returns: self.returns.clone(),
            advantages: self.advantages.clone(),
            eps: DEFAULT_ADV_EPS,
        }
    }

    pub fn validate(&self) -> Result<()> {
        let g = self.features.len();
        if g == 0
            || self.old_probs.len() != g
            || self.returns.len() != g
            || self.advantages.len() != g
            || self.executed >= g
        {
            return Err(Error::InvalidConfig(format!(
                "inconsistent transition record at episode {} step {}",
                self.episode, self.step
            )));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct RolloutBuffer {
    capacity: usize,
    records: Vec<TransitionRecord>,
}

impl RolloutBuffer {
    pub fn new(capacity: usize) -> Self {
        Self {
            capacity,
            records: Vec::with_capacity(capacity),
        }
    }

    pub fn capacity(&self) -> usize {
        self.capacity
    }

    pub fn len(&self) -> usize {
        self.records.len()
    }

    pub fn is_empty(&self) -> bool {
        self.records.is_empty()
    }

    pub fn is_full(&self) -> bool {
        self.records.len() >= self.capacity
    }

    pub fn records(&self) -> &[TransitionRecord] {
        &self.records
    }

    /// Appends a record; returns false (dropping it) once full.
    pub fn push(&mut self, record: TransitionRecord) -> bool {
        if self.is_full() {
            return false;
        }
        self.records.push(record);
        true
    }

    pub fn clear(&mut self) {
        self.records.clear();
    }

    /// Mean return of the executed candidates.
    pub fn mean_return(&self) -> f64 {
        if self.records.is_empty() {
            return 0.0;
        }
        self.records
            .iter()
            .map(|r| r.returns[r.executed])
            .sum::<f64>()
            / self.records.len() as f64
    }
}

/// Everything collection needs besides the buffer and the policy.
pub struct CollectContext<'a> {
    pub scenarios: &'a [LoadedScenario],
    pub sim: &'a SimConfig,
    pub train: &'a TrainConfig,
    pub seed: u64,
    pub iteration: usize,
}

/// Fills `buffer` by running episodes with the snapshot policy `old`. Episodes run in
/// parallel batches and are merged in episode order, so the result does not depend on
/// the thread count. Returns the logs of the episodes that contributed records.
pub fn collect(
    buffer: &mut RolloutBuffer,
    ctx: &CollectContext<'_>,
    old: &ScoringParams,
) -> Result<Vec<EpisodeLog>> {
    if !buffer.is_empty() {
        return Err(Error::InvalidConfig(
            "collection needs an empty buffer".into(),
        ));
    }
    if ctx.scenarios.is_empty() {
        return Err(Error::EmptyInput("scenario set"));
    }
    let snapshot = snapshot_hash(old);
    let max = ctx.train.max_episodes;
    let mut logs = Vec::new();
    let mut next = 0usize;
    while !buffer.is_full() && next < max {
        let end = (next + ctx.train.episodes_per_batch).min(max);
        let outcomes: Vec<Result<_>> = (next..end)
            .into_par_iter()
            .map(|k| {
                let si = k % ctx.scenarios.len();
                let sc = &ctx.scenarios[si];
                let reward = ctx.train.reward_for(sc.scenario.style);
                let episode = (ctx.iteration * max + k) as u64;
                run_episode(sc, ctx.sim, &reward, old, episode, ctx.seed).map(|o| (si, o))
            })
            .collect();
        for out in outcomes {
            let (si, out) = out?;
            if buffer.is_full() {
                break;
            }
            let mut contributed = false;
            for d in out.decisions {
                let rec = TransitionRecord {
                    features: d.features,
                    old_probs: d.probs,
                    returns: d.returns,
                    advantages: d.advantages,
                    executed: d.selected,
                    scenario: si,
                    episode: out.log.episode,
                    step: d.step,
                    agent: d.agent,
                    snapshot: snapshot.clone(),
                };
                if !buffer.push(rec) {
                    break;
                }
                contributed = true;
            }
            if contributed {
                logs.push(out.log);
            }
        }
        next = end;
    }
    if !buffer.is_full() {
        return Err(Error::PartialBuffer {
            filled: buffer.len(),
            capacity: buffer.capacity(),
        });
    }
    Ok(logs)
}

/// Decoupled-weight-decay Adam, applied as gradient ascent.
#[derive(Debug, Clone, PartialEq)]
pub struct AdamW {
    m: Vec<f64>,
    v: Vec<f64>,
    t: u32,
    beta1: f64,
    beta2: f64,
    eps: f64,
    weight_decay: f64,
}

impl AdamW {
    pub fn new(n: usize, cfg: &TrainConfig) -> Self {
        Self {
            m: vec![0.0; n],
            v: vec![0.0; n],
            t: 0,
            beta1: cfg.adam_beta1,
            beta2: cfg.adam_beta2,
            eps: cfg.adam_eps,
            weight_decay: cfg.weight_decay,
        }
    }

    pub fn step(&mut self, params: &mut [f64], grad: &[f64], lr: f64) {
        self.t += 1;
        let c1 = 1.0 - self.beta1.powi(self.t as i32);
        let c2 = 1.0 - self.beta2.powi(self.t as i32);
        for i in 0..params.len() {
            self.m[i] = self.beta1 * self.m[i] + (1.0 - self.beta1) * grad[i];
            self.v[i] = self.beta2 * self.v[i] + (1.0 - self.beta2) * grad[i] * grad[i];
            let step = (self.m[i] / c1) / ((self.v[i] / c2).sqrt() + self.eps);
            params[i] += lr * step - lr * self.weight_decay * params[i];
        }
    }
}

/// Surrogate value and gradient for one record under the configured objective.
pub fn record_objective(
    record: &TransitionRecord,
    params: &ScoringParams,
    reference: &ScoringParams,
    cfg: &TrainConfig,
) -> Result<ObjectiveReport> {
    record.validate()?;
    let (new, grads) = log_prob_jacobian(params, &record.features)?;
    let old = PolicyDistribution::from_probs(record.old_probs.clone(), params.eta);
    let sur = cfg.surrogate();
    let adv = record.advantage_group();
    match cfg.objective {
        Objective::Rift => rift_objective(&new, &old, &adv, &sur, &grads),
        Objective::Grpo | Objective::OldWeight => {
            let refd = score(reference, &record.features)?;
            if cfg.objective == Objective::Grpo {
                grpo_objective(&new, &old, &refd, &adv, &sur, &grads)
            } else {
                old_weight_objective(&new, &old, &refd, &adv, &sur, &grads)
            }
        }
        Objective::Ppo => ppo_objective(
            &new,
            &old,
            record.executed,
            record.advantages[record.executed],
            &sur,
            &grads,
        ),
        Objective::Reinforce => {
            let baseline = record.returns.iter().sum::<f64>() / record.returns.len() as f64;
            reinforce_objective(
                &new,
                record.executed,
                record.returns[record.executed],
                baseline,
                &grads,
            )
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EpochStats {
    pub iteration: usize,
    pub epoch: usize,
    pub objective: f64,
    pub kl: f64,
    pub clip_fraction: f64,
    pub dual_clip_fraction: f64,
    pub mean_ratio: f64,
    pub max_ratio: f64,
    pub mean_return: f64,
    pub lr: f64,
}

/// Runs the configured number of epochs over the buffer, updating `params` in place.
#[allow(clippy::too_many_arguments)]
pub fn update(
    params: &mut ScoringParams,
    optimizer: &mut AdamW,
    buffer: &RolloutBuffer,
    reference: &ScoringParams,
    snapshot: &str,
    cfg: &TrainConfig,
    iteration: usize,
    seed: u64,
) -> Result<Vec<EpochStats>> {
    if buffer.is_empty() {
        return Err(Error::EmptyInput("rollout buffer"));
    }
    if let Some(r) = buffer.records().iter().find(|r| r.snapshot != snapshot) {
        return Err(Error::ConfigMismatch(format!(
            "record from episode {} step {} was collected with a different policy snapshot",
            r.episode, r.step
        )));
    }
    let n = buffer.len();
    let mean_return = buffer.mean_return();
    let mut order: Vec<usize> = (0..n).collect();
    let mut stats = Vec::with_capacity(cfg.epochs);
    for epoch in 0..cfg.epochs {
        let lr = lr_schedule(iteration, epoch, cfg);
        let mut rng =
            ChaCha8Rng::seed_from_u64(derive_seed(&[seed, iteration as u64, epoch as u64, 0x5eed]));
        order.sort_unstable();
        order.shuffle(&mut rng);
        let mut acc = EpochStats {
            iteration,
            epoch,
            objective: 0.0,
            kl: 0.0,
            clip_fraction: 0.0,
            dual_clip_fraction: 0.0,
            mean_ratio: 0.0,
            max_ratio: 0.0,
            mean_return,
            lr,
        };
        for batch in order.chunks(cfg.batch_size) {
            let current = params.clone();
            let reports: Vec<Result<ObjectiveReport>> = batch
                .par_iter()
                .map(|&i| record_objective(&buffer.records()[i], &current, reference, cfg))
                .collect();
            let mut grad = vec![0.0; params.values.len()];
            for rep in reports {
                let rep = rep?;
                for (g, r) in grad.iter_mut().zip(&rep.gradient) {
                    *g += r / batch.len() as f64;
                }
                let d = rep.diagnostics;
                acc.objective += rep.value;
                acc.kl += d.kl;
                acc.clip_fraction += d.clip_fraction;
                acc.dual_clip_fraction += d.dual_clip_fraction;
                acc.mean_ratio += d.mean_ratio;
                acc.max_ratio = acc.max_ratio.max(d.max_ratio);
            }
            if let Some(i) = grad.iter().position(|g| !g.is_finite()) {
                return Err(Error::NonFiniteGradient(format!(
                    "component {i} at iteration {iteration}, epoch {epoch}"
                )));
            }
            optimizer.step(&mut params.values, &grad, lr);
        }
        let nf = n as f64;
        acc.objective /= nf;
        acc.kl /= nf;
        acc.clip_fraction /= nf;
        acc.dual_clip_fraction /= nf;
        acc.mean_ratio /= nf;
        stats.push(acc);
    }
    Ok(stats)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct IterationSummary {
    pub iteration: usize,
    pub mean_return: f64,
    pub records: usize,
    pub episodes: usize,
    pub snapshot: String,
}

#[derive(Debug, Clone)]
pub struct TrainingOutcome {
    pub params: ScoringParams,
    pub epochs: Vec<EpochStats>,
    pub iterations: Vec<IterationSummary>,
}

impl TrainingOutcome {
    pub fn write_stats_jsonl<W: Write>(&self, mut out: W) -> Result<()> {
        for s in &self.epochs {
            serde_json::to_writer(&mut out, s)?;
            out.write_all(b"\n")?;
        }
        Ok(())
    }
}

pub fn initial_params(sim: &SimConfig, cfg: &TrainConfig, seed: u64) -> ScoringParams {
    let mut p = ScoringParams::init(sim.features.dim(), cfg.hidden, seed);
    p.temperature = cfg.temperature;
    p.eta = cfg.eta;
    p
}

/// Snapshot, collect, update for the configured number of iterations.
pub fn run_training(
    scenarios: &[LoadedScenario],
    sim: &SimConfig,
    cfg: &TrainConfig,
    seed: u64,
    init: Option<ScoringParams>,
) -> Result<TrainingOutcome> {
    cfg.validate()?;
    let mut sim = *sim;
    cfg.apply(&mut sim);
    sim.validate()?;
    let mut params = init.unwrap_or_else(|| initial_params(&sim, cfg, seed));
    params.validate()?;
    let reference = params.clone();
    let mut optimizer = AdamW::new(params.values.len(), cfg);
    let mut buffer = RolloutBuffer::new(cfg.buffer_capacity);
    let mut epochs = Vec::new();
    let mut iterations = Vec::new();
    for iteration in 0..cfg.iterations {
        let wrap = |e: Error| Error::Iteration {
            iteration,
            source: Box::new(e),
        };
        buffer.clear();
        let old = params.clone();
        let snapshot = snapshot_hash(&old);
        let ctx = CollectContext {
            scenarios,
            sim: &sim,
            train: cfg,
            seed,
            iteration,
        };
        let logs = collect(&mut buffer, &ctx, &old).map_err(wrap)?;
        let stats = update(
            &mut params,
            &mut optimizer,
            &buffer,
            &reference,
            &snapshot,
            cfg,
            iteration,
            seed,
        )
        .map_err(wrap)?;
        iterations.push(IterationSummary {
            iteration,
            mean_return: buffer.mean_return(),
            records: buffer.len(),
            episodes: logs.len(),
            snapshot,
        });
        epochs.extend(stats);
    }
    Ok(TrainingOutcome {
        params,
        epochs,
        iterations,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn lr_schedule_examples() {
        let cfg = TrainConfig::default();
        assert!((lr_schedule(0, 2, &cfg) - 1e-4).abs() < 1e-18);
        assert!((lr_schedule(0, 15, &cfg) - 1e-6).abs() < 1e-18);
        assert!((lr_schedule(1, 2, &cfg) - 9e-5).abs() < 1e-18);
        assert!((lr_schedule(0, 0, &cfg) - 1e-4 / 3.0).abs() < 1e-18);
        assert_eq!(lr_schedule(200, 5, &cfg), 1e-6);
    }

    #[test]
    fn adamw_zero_gradient_only_decays() {
        let cfg = TrainConfig::default();
        let mut opt = AdamW::new(2, &cfg);
        let mut p = vec![1.0, -2.0];
        opt.step(&mut p, &[0.0, 0.0], 0.1);
        assert_eq!(p, vec![1.0 - 0.1 * 1e-5, -2.0 + 0.1 * 2e-5]);
    }

    #[test]
    fn buffer_caps_and_reports_executed_return() {
        let rec = |r: f64| TransitionRecord {
            features: vec![vec![0.0], vec![1.0]],
            old_probs: vec![0.5, 0.5],
            returns: vec![r, 0.0],
            advantages: vec![1.0, -1.0],
            executed: 0,
            scenario: 0,
            episode: 0,
            step: 0,
            agent: 1,
            snapshot: String::new(),
        };
        let mut b = RolloutBuffer::new(2);
        assert!(b.push(rec(1.0)));
        assert!(b.push(rec(3.0)));
        assert!(!b.push(rec(5.0)));
        assert_eq!(b.len(), 2);
        assert_eq!(b.mean_return(), 2.0);
    }

    #[test]
    fn objective_names_round_trip() {
        for o in Objective::ALL {
            assert_eq!(o.name().parse::<Objective>().unwrap(), o);
        }
        assert!("ppo2".parse::<Objective>().is_err());
    }
}
