use proptest::prelude::*;
use rift_core::objectives::{
    categorical_kl, dual_clip_kernel, group_advantages, grpo_objective, ppo_clip_kernel,
    rift_objective, SurrogateConfig, DEFAULT_ADV_EPS,
};
use rift_core::policy::{log_prob_jacobian, PolicyDistribution, ScoringParams};

fn group() -> impl Strategy<Value = Vec<f64>> {
    prop::collection::vec(-1e3..1e3f64, 1..40)
}

proptest! {
    #[test]
    fn advantages_are_centred_and_keep_order(returns in group()) {
        let adv = group_advantages(&returns, DEFAULT_ADV_EPS).advantages;
        prop_assert!(adv.iter().sum::<f64>().abs() < 1e-9);
        for i in 0..returns.len() {
            for j in 0..returns.len() {
                prop_assert_eq!(returns[i].partial_cmp(&returns[j]), adv[i].partial_cmp(&adv[j]));
            }
        }
    }

    #[test]
    fn constant_groups_have_zero_advantage(r in -1e6..1e6f64, n in 1usize..50) {
        let adv = group_advantages(&vec![r; n], DEFAULT_ADV_EPS).advantages;
        prop_assert!(adv.iter().all(|a| *a == 0.0));
    }

    #[test]
    fn advantages_ignore_shift(returns in prop::collection::vec(-10.0..10.0f64, 2..20), shift in -100.0..100.0f64) {
        let a = group_advantages(&returns, DEFAULT_ADV_EPS).advantages;
        let shifted: Vec<f64> = returns.iter().map(|r| r + shift).collect();
        let b = group_advantages(&shifted, DEFAULT_ADV_EPS).advantages;
        for (x, y) in a.iter().zip(&b) {
            prop_assert!((x - y).abs() < 1e-6);
        }
    }

    #[test]
    fn dual_clip_never_below_floor(rho in 0.0..50.0f64, adv in -10.0..10.0f64) {
        let (v, _) = dual_clip_kernel(rho, adv, 0.2, 3.0);
        let (inner, _) = ppo_clip_kernel(rho, adv, 0.2);
        if adv < 0.0 {
            prop_assert!(v >= 3.0 * adv);
            prop_assert!(v >= inner);
        } else {
            prop_assert_eq!(v, inner);
        }
        prop_assert!(inner <= rho * adv + 1e-12);
    }

    #[test]
    fn kernel_slope_matches_difference(rho in 0.05..6.0f64, adv in -4.0..4.0f64) {
        let kinks = [0.8, 1.2, 3.0];
        prop_assume!(kinks.iter().all(|k| (rho - k).abs() > 1e-4));
        let h = 1e-7;
        let (_, slope) = dual_clip_kernel(rho, adv, 0.2, 3.0);
        let fd = (dual_clip_kernel(rho + h, adv, 0.2, 3.0).0 - dual_clip_kernel(rho - h, adv, 0.2, 3.0).0) / (2.0 * h);
        prop_assert!((fd - slope).abs() < 1e-6);
    }

    #[test]
    fn kl_is_non_negative(a in prop::collection::vec(-3.0..3.0f64, 2..8), b_shift in prop::collection::vec(-3.0..3.0f64, 8)) {
        let p = PolicyDistribution::from_logits(a.clone(), 0.01);
        let q = PolicyDistribution::from_logits(a.iter().zip(&b_shift).map(|(x, y)| x + y).collect(), 0.01);
        prop_assert!(categorical_kl(&p.probs, &q.probs) >= -1e-15);
        prop_assert!(categorical_kl(&p.probs, &p.probs).abs() < 1e-15);
    }

    #[test]
    fn on_policy_objectives_vanish(
        w in prop::collection::vec(-2.0..2.0f64, 4),
        feats in prop::collection::vec(prop::collection::vec(-1.0..1.0f64, 3), 2..8),
        returns in prop::collection::vec(-5.0..5.0f64, 8),
    ) {
        let params = ScoringParams { values: w, ..ScoringParams::init(3, None, 0) };
        let (dist, grads) = log_prob_jacobian(&params, &feats).unwrap();
        let old = PolicyDistribution::from_probs(dist.probs.clone(), dist.eta);
        let adv = group_advantages(&returns[..feats.len()], DEFAULT_ADV_EPS);
        let rift = rift_objective(&dist, &old, &adv, &SurrogateConfig::rift(), &grads).unwrap();
        let grpo = grpo_objective(&dist, &old, &dist, &adv, &SurrogateConfig::grpo(0.04), &grads).unwrap();
        prop_assert!(rift.value.abs() < 1e-12);
        prop_assert!(grpo.value.abs() < 1e-12);
        prop_assert_eq!(grpo.diagnostics.kl, 0.0);
    }
}

#[test]
fn old_policy_below_floor_is_rejected() {
    let new = PolicyDistribution::from_probs(vec![0.5, 0.5], 0.01);
    let old = PolicyDistribution::from_probs(vec![0.999, 0.001], 0.01);
    let adv = group_advantages(&[1.0, 0.0], DEFAULT_ADV_EPS);
    let grads = vec![vec![1.0], vec![0.0]];
    assert!(rift_objective(&new, &old, &adv, &SurrogateConfig::rift(), &grads).is_err());
}

#[test]
fn dual_clip_gradient_is_zero_when_active() {
    let new = PolicyDistribution::from_probs(vec![1.0], 0.0);
    let old = PolicyDistribution::from_probs(vec![0.2], 0.0);
    let adv = rift_core::objectives::AdvantageGroup {
        returns: vec![0.0],
        advantages: vec![-1.0],
        eps: DEFAULT_ADV_EPS,
    };
    let r = rift_objective(&new, &old, &adv, &SurrogateConfig::rift(), &[vec![1.0]]).unwrap();
    assert_eq!(r.value, -3.0);
    assert_eq!(r.gradient, vec![0.0]);
    assert_eq!(r.diagnostics.dual_clip_fraction, 1.0);
}
