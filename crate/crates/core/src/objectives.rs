//! Group-relative advantages, clipped surrogate kernels and the policy objectives.
//!
//! Every objective takes the per-candidate score-function gradients `∇θ log π_θ(τ_i)` and
//! returns the value together with its exact (sub)gradient, to be maximised.

use crate::error::{Error, Result};
use crate::policy::PolicyDistribution;
use serde::{Deserialize, Serialize};

pub const DEFAULT_ADV_EPS: f64 = 1e-8;
pub const DEFAULT_CLIP_EPS: f64 = 0.2;
pub const DEFAULT_DUAL_CLIP: f64 = 3.0;
/// KL weight for the equal-weight (GRPO) and old-weight baselines.
pub const DEFAULT_KL_BETA: f64 = 0.04;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AdvantageGroup {
    pub returns: Vec<f64>,
    pub advantages: Vec<f64>,
    pub eps: f64,
}

impl AdvantageGroup {
    pub fn len(&self) -> usize {
        self.returns.len()
    }

    pub fn is_empty(&self) -> bool {
        self.returns.is_empty()
    }

    pub fn mean_return(&self) -> f64 {
        self.returns.iter().sum::<f64>() / self.returns.len() as f64
    }
}

/// `Â_i = (R_i - mean) / sqrt(Var + eps)` with the population variance.
pub fn group_advantages(returns: &[f64], eps: f64) -> AdvantageGroup {
    let n = returns.len() as f64;
    let mean = returns.iter().sum::<f64>() / n;
    let var = returns.iter().map(|r| (r - mean) * (r - mean)).sum::<f64>() / n;
    let denom = (var + eps).sqrt();
    // A constant group can still round to a mean one ulp off its values.
    let constant = returns.iter().all(|r| *r == returns[0]);
    let advantages = returns
        .iter()
        .map(|r| if constant { 0.0 } else { (r - mean) / denom })
        .collect();
    AdvantageGroup {
        returns: returns.to_vec(),
        advantages,
        eps,
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Weighting {
    Equal,
    OldPolicy,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Kernel {
    PpoClip,
    DualClip,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SurrogateConfig {
    pub clip_eps: f64,
    pub dual_clip: f64,
    pub kl_beta: f64,
    pub weighting: Weighting,
    pub kernel: Kernel,
}

impl SurrogateConfig {
    pub fn rift() -> Self {
        Self {
            clip_eps: DEFAULT_CLIP_EPS,
            dual_clip: DEFAULT_DUAL_CLIP,
            kl_beta: 0.0,
            weighting: Weighting::Equal,
            kernel: Kernel::DualClip,
        }
    }

    pub fn grpo(beta: f64) -> Self {
        Self {
            kl_beta: beta,
            kernel: Kernel::PpoClip,
            ..Self::rift()
        }
    }

    pub fn old_weight(beta: f64) -> Self {
        Self {
            weighting: Weighting::OldPolicy,
            ..Self::grpo(beta)
        }
    }

    pub fn ppo() -> Self {
        Self::grpo(0.0)
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.clip_eps > 0.0) || !(self.dual_clip > 1.0) || !(self.kl_beta >= 0.0) {
            return Err(Error::InvalidConfig(format!(
                "need clip_eps > 0, dual_clip > 1, kl_beta >= 0; got {self:?}"
            )));
        }
        Ok(())
    }

    fn expect(&self, kernel: Kernel, weighting: Weighting, no_kl: bool, name: &str) -> Result<()> {
        self.validate()?;
        if self.kernel != kernel || self.weighting != weighting || (no_kl && self.kl_beta != 0.0) {
            return Err(Error::ConfigMismatch(format!(
                "{name} objective cannot use {self:?}"
            )));
        }
        Ok(())
    }
}

/// `min(ρÂ, clip(ρ, 1-ε, 1+ε)Â)` and its derivative in ρ (flat branch at kinks).
pub fn ppo_clip_kernel(rho: f64, adv: f64, eps: f64) -> (f64, f64) {
    let clipped = rho.clamp(1.0 - eps, 1.0 + eps);
    let value = (rho * adv).min(clipped * adv);
    let slope = if adv > 0.0 {
        if rho < 1.0 + eps {
            adv
        } else {
            0.0
        }
    } else if adv < 0.0 {
        if rho > 1.0 - eps {
            adv
        } else {
            0.0
        }
    } else {
        0.0
    };
    (value, slope)
}

/// The dual-clip kernel ψ: the clipped term, floored at `cÂ` for negative advantages.
pub fn dual_clip_kernel(rho: f64, adv: f64, eps: f64, c: f64) -> (f64, f64) {
    let (inner, slope) = ppo_clip_kernel(rho, adv, eps);
    if adv >= 0.0 {
        return (inner, slope);
    }
    let floor = c * adv;
    if inner <= floor {
        (floor, 0.0)
    } else {
        (inner, slope)
    }
}

/// `ρ_i = π_new / π_old`, rejecting old probabilities below the smoothing floor.
pub fn importance_ratios(new: &PolicyDistribution, old: &PolicyDistribution) -> Result<Vec<f64>> {
    if new.len() != old.len() {
        return Err(Error::InvalidConfig("distributions differ in size".into()));
    }
    let floor = old.floor();
    new.probs
        .iter()
        .zip(&old.probs)
        .enumerate()
        .map(|(i, (p, q))| {
            // Small tolerance for the rounding in `(1 - η) p + η / G`.
            if !(*q >= floor * (1.0 - 1e-12)) || *q <= 0.0 {
                Err(Error::BelowSupportFloor {
                    index: i,
                    prob: *q,
                    floor,
                })
            } else {
                Ok(p / q)
            }
        })
        .collect()
}

/// `Σ p_i ln(p_i / q_i)`.
pub fn categorical_kl(p: &[f64], q: &[f64]) -> f64 {
    p.iter()
        .zip(q)
        .filter(|(pi, _)| **pi > 0.0)
        .map(|(pi, qi)| pi * (pi / qi).ln())
        .sum()
}

#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct Diagnostics {
    pub mean_ratio: f64,
    pub max_ratio: f64,
    pub clip_fraction: f64,
    pub dual_clip_fraction: f64,
    pub kl: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ObjectiveReport {
    pub value: f64,
    pub terms: Vec<f64>,
    pub gradient: Vec<f64>,
    pub diagnostics: Diagnostics,
}

fn check_grads(grads: &[Vec<f64>], g: usize) -> Result<usize> {
    if grads.len() != g || g == 0 {
        return Err(Error::InvalidConfig(format!(
            "expected {g} log-prob gradients, got {}",
            grads.len()
        )));
    }
    Ok(grads[0].len())
}

fn axpy(acc: &mut [f64], k: f64, x: &[f64]) {
    if k != 0.0 {
        for (a, xi) in acc.iter_mut().zip(x) {
            *a += k * xi;
        }
    }
}

/// KL(π_θ ‖ π_ref) and its gradient `Σ p_i ∇log p_i · ln(p_i / q_i)`.
fn kl_with_grad(
    new: &PolicyDistribution,
    reference: &PolicyDistribution,
    grads: &[Vec<f64>],
    dim: usize,
) -> (f64, Vec<f64>) {
    let kl = categorical_kl(&new.probs, &reference.probs);
    let mut grad = vec![0.0; dim];
    for ((p, q), g) in new.probs.iter().zip(&reference.probs).zip(grads) {
        axpy(&mut grad, p * (p / q).ln(), g);
    }
    (kl, grad)
}

fn clipped_objective(
    new: &PolicyDistribution,
    old: &PolicyDistribution,
    reference: Option<&PolicyDistribution>,
    adv: &AdvantageGroup,
    cfg: &SurrogateConfig,
    grads: &[Vec<f64>],
) -> Result<ObjectiveReport> {
    let g = new.len();
    if adv.len() != g {
        return Err(Error::InvalidConfig(
            "advantage group size differs from the policy".into(),
        ));
    }
    let dim = check_grads(grads, g)?;
    let rhos = importance_ratios(new, old)?;
    let mut terms = Vec::with_capacity(g);
    let mut gradient = vec![0.0; dim];
    let (mut clipped, mut dual) = (0usize, 0usize);
    for i in 0..g {
        let (rho, a) = (rhos[i], adv.advantages[i]);
        let (value, slope) = match cfg.kernel {
            Kernel::PpoClip => ppo_clip_kernel(rho, a, cfg.clip_eps),
            Kernel::DualClip => dual_clip_kernel(rho, a, cfg.clip_eps, cfg.dual_clip),
        };
        if rho < 1.0 - cfg.clip_eps || rho > 1.0 + cfg.clip_eps {
            clipped += 1;
        }
        if cfg.kernel == Kernel::DualClip && a < 0.0 && rho * a <= cfg.dual_clip * a {
            dual += 1;
        }
        let weight = match cfg.weighting {
            Weighting::Equal => 1.0 / g as f64,
            Weighting::OldPolicy => old.probs[i],
        };
        terms.push(value);
        axpy(&mut gradient, weight * slope * rho, &grads[i]);
    }
    let weights: Vec<f64> = match cfg.weighting {
        Weighting::Equal => vec![1.0 / g as f64; g],
        Weighting::OldPolicy => old.probs.clone(),
    };
    let mut value: f64 = terms.iter().zip(&weights).map(|(t, w)| t * w).sum();
    let mut kl = 0.0;
    if let Some(reference) = reference {
        let (k, kgrad) = kl_with_grad(new, reference, grads, dim);
        kl = k;
        if cfg.kl_beta != 0.0 {
            value -= cfg.kl_beta * k;
            axpy(&mut gradient, -cfg.kl_beta, &kgrad);
        }
    }
    Ok(ObjectiveReport {
        value,
        terms,
        gradient,
        diagnostics: Diagnostics {
            mean_ratio: rhos.iter().sum::<f64>() / g as f64,
            max_ratio: rhos.iter().copied().fold(f64::NEG_INFINITY, f64::max),
            clip_fraction: clipped as f64 / g as f64,
            dual_clip_fraction: dual as f64 / g as f64,
            kl,
        },
    })
}

/// Equal-weight dual-clip objective `(1/G) Σ ψ(ρ_i, Â_i)`, without a KL term.
pub fn rift_objective(
    new: &PolicyDistribution,
    old: &PolicyDistribution,
    adv: &AdvantageGroup,
    cfg: &SurrogateConfig,
    grads: &[Vec<f64>],
) -> Result<ObjectiveReport> {
    cfg.expect(Kernel::DualClip, Weighting::Equal, true, "rift")?;
    clipped_objective(new, old, None, adv, cfg, grads)
}

/// Equal-weight clipped objective minus `β KL(π_θ ‖ π_ref)`.
pub fn grpo_objective(
    new: &PolicyDistribution,
    old: &PolicyDistribution,
    reference: &PolicyDistribution,
    adv: &AdvantageGroup,
    cfg: &SurrogateConfig,
    grads: &[Vec<f64>],
) -> Result<ObjectiveReport> {
    cfg.expect(Kernel::PpoClip, Weighting::Equal, false, "grpo")?;
    clipped_objective(new, old, Some(reference), adv, cfg, grads)
}

/// Clipped objective weighted by the old policy, minus `β KL(π_θ ‖ π_ref)`.
pub fn old_weight_objective(
    new: &PolicyDistribution,
    old: &PolicyDistribution,
    reference: &PolicyDistribution,
    adv: &AdvantageGroup,
    cfg: &SurrogateConfig,
    grads: &[Vec<f64>],
) -> Result<ObjectiveReport> {
    cfg.expect(Kernel::PpoClip, Weighting::OldPolicy, false, "old-weight")?;
    clipped_objective(new, old, Some(reference), adv, cfg, grads)
}

/// Single-sample clipped surrogate on the executed candidate.
pub fn ppo_objective(
    new: &PolicyDistribution,
    old: &PolicyDistribution,
    executed: usize,
    adv_exec: f64,
    cfg: &SurrogateConfig,
    grads: &[Vec<f64>],
) -> Result<ObjectiveReport> {
    cfg.expect(Kernel::PpoClip, Weighting::Equal, true, "ppo")?;
    let dim = check_grads(grads, new.len())?;
    if executed >= new.len() {
        return Err(Error::InvalidConfig(format!(
            "executed index {executed} out of range"
        )));
    }
    let rhos = importance_ratios(new, old)?;
    let rho = rhos[executed];
    let (value, slope) = ppo_clip_kernel(rho, adv_exec, cfg.clip_eps);
    let mut gradient = vec![0.0; dim];
    axpy(&mut gradient, slope * rho, &grads[executed]);
    let clipped = rho < 1.0 - cfg.clip_eps || rho > 1.0 + cfg.clip_eps;
    Ok(ObjectiveReport {
        value,
        terms: vec![value],
        gradient,
        diagnostics: Diagnostics {
            mean_ratio: rho,
            max_ratio: rho,
            clip_fraction: if clipped { 1.0 } else { 0.0 },
            dual_clip_fraction: 0.0,
            kl: 0.0,
        },
    })
}

/// `(R - b) log π(executed)`.
pub fn reinforce_objective(
    new: &PolicyDistribution,
    executed: usize,
    ret: f64,
    baseline: f64,
    grads: &[Vec<f64>],
) -> Result<ObjectiveReport> {
    let dim = check_grads(grads, new.len())?;
    if executed >= new.len() {
        return Err(Error::InvalidConfig(format!(
            "executed index {executed} out of range"
        )));
    }
    let coef = ret - baseline;
    let value = coef * new.probs[executed].ln();
    let mut gradient = vec![0.0; dim];
    axpy(&mut gradient, coef, &grads[executed]);
    Ok(ObjectiveReport {
        value,
        terms: vec![value],
        gradient,
        diagnostics: Diagnostics {
            mean_ratio: 1.0,
            max_ratio: 1.0,
            ..Diagnostics::default()
        },
    })
}
