use ddorm_core::metrics::{mean_margin, pair_accuracy, roc_auc};
use ddorm_core::oracle::brute_force_auc;
use ddorm_core::simplex::{center_rewards, expected_reward, kl_divergence, softmax_distribution};
use ddorm_core::{ddorm_target, softmax, DdormStepParams, RewardVector, ScoredPair, ScoreVector};
use proptest::prelude::*;

fn instance() -> impl Strategy<Value = (Vec<f64>, Vec<f64>, f64, f64)> {
    (2usize..=10).prop_flat_map(|k| {
        (
            prop::collection::vec(-3.0f64..3.0, k),
            prop::collection::vec(-5.0f64..5.0, k),
            0.01f64..10.0,
            0.1f64..5.0,
        )
    })
}

proptest! {
    #[test]
    fn softmax_lies_on_the_simplex(s in prop::collection::vec(-50.0f64..50.0, 2..12), tau in 0.05f64..10.0) {
        let p = softmax(&s, tau).unwrap();
        let total: f64 = p.probs().iter().sum();
        prop_assert!((total - 1.0).abs() <= 1e-12);
        prop_assert!(p.probs().iter().all(|&x| x >= 0.0));
    }

    #[test]
    fn centered_rewards_have_zero_policy_mean((s, r, _eta, tau) in instance()) {
        let p = softmax_distribution(&ScoreVector::new(s, tau).unwrap());
        let c = center_rewards(&p, &RewardVector::new(r).unwrap()).unwrap();
        let mean: f64 = p.probs().iter().zip(&c.centered).map(|(a, b)| a * b).sum();
        prop_assert!(mean.abs() <= 1e-10);
    }

    #[test]
    fn target_never_lowers_expected_reward((s, r, eta, tau) in instance()) {
        let s = ScoreVector::new(s, tau).unwrap();
        let r = RewardVector::new(r).unwrap();
        let p = softmax_distribution(&s);
        let q = ddorm_target(&s, &r, &DdormStepParams::new(eta, tau).unwrap()).unwrap();
        prop_assert!(expected_reward(&q, &r).unwrap() >= expected_reward(&p, &r).unwrap() - 1e-12);
    }

    #[test]
    fn target_ignores_reward_shift((s, r, eta, tau) in instance(), c in -100.0f64..100.0) {
        let s = ScoreVector::new(s, tau).unwrap();
        let params = DdormStepParams::new(eta, tau).unwrap();
        let r = RewardVector::new(r).unwrap();
        let q0 = ddorm_target(&s, &r, &params).unwrap();
        let q1 = ddorm_target(&s, &r.shifted(c).unwrap(), &params).unwrap();
        for (a, b) in q0.probs().iter().zip(q1.probs()) {
            prop_assert!((a - b).abs() <= 1e-12);
        }
    }

    #[test]
    fn kl_is_nonnegative(a in prop::collection::vec(-4.0f64..4.0, 5), b in prop::collection::vec(-4.0f64..4.0, 5)) {
        let u = softmax(&a, 1.0).unwrap();
        let p = softmax(&b, 1.0).unwrap();
        prop_assert!(kl_divergence(&u, &p).unwrap() >= 0.0);
    }

    #[test]
    fn auc_matches_enumeration(scores in prop::collection::vec((-4i32..4, -4i32..4), 1..50)) {
        let pairs: Vec<ScoredPair> =
            scores.iter().map(|&(c, r)| ScoredPair::new(c as f64 / 2.0, r as f64 / 2.0)).collect();
        let auc = roc_auc(&pairs).unwrap();
        prop_assert_eq!(auc, brute_force_auc(&pairs));
        prop_assert!((0.0..=1.0).contains(&auc));
        let acc = pair_accuracy(&pairs).unwrap();
        prop_assert!((0.0..=1.0).contains(&acc));
    }

    #[test]
    fn swapping_roles_mirrors_metrics(scores in prop::collection::vec((-4i32..4, -4i32..4), 1..50)) {
        let pairs: Vec<ScoredPair> =
            scores.iter().map(|&(c, r)| ScoredPair::new(c as f64, r as f64)).collect();
        let swapped: Vec<ScoredPair> =
            pairs.iter().map(|p| ScoredPair::new(p.rejected_score, p.chosen_score)).collect();
        prop_assert_eq!(roc_auc(&pairs).unwrap() + roc_auc(&swapped).unwrap(), 1.0);
        prop_assert_eq!(mean_margin(&pairs).unwrap(), -mean_margin(&swapped).unwrap());
    }
}
