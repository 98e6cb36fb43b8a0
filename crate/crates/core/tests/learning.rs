mod common;

use common::rng;
use nvmdp::dp::value_iteration;
use nvmdp::envs::{build_tricky_gridworld, random_nvmdp, DiscountScheme, RewardScheme};
use nvmdp::qlearn::{
    selector_assumption_suite, train, train_single, trial_seed, EstimateTensor, LearningConfig, Selector, StepSize,
    TargetFunction, TensorSlice,
};
use nvmdp::verify::{standard_selectors, DoubledMax};
use nvmdp::{ModelParts, Nvmdp, RewardNoise, TimeTable};

fn chain() -> Nvmdp {
    // 0 -> 1 -> 2 (terminal), one action, rewards 1 then 2, discount 0.5.
    let p = vec![
        0.0, 1.0, 0.0, //
        0.0, 0.0, 1.0, //
        0.0, 0.0, 1.0,
    ];
    let r = vec![
        1.0, 1.0, 1.0, //
        2.0, 2.0, 2.0, //
        0.0, 0.0, 0.0,
    ];
    Nvmdp::new(ModelParts {
        num_states: 3,
        num_actions: 1,
        horizon: 3,
        transitions: TimeTable::constant(p, 3),
        rewards: TimeTable::constant(r, 3),
        discounts: TimeTable::constant(vec![0.5; 9], 3),
        start: vec![1.0, 0.0, 0.0],
        terminals: vec![2],
        reward_noise: RewardNoise::None,
    })
    .unwrap()
}

fn config(episodes: usize, step_size: StepSize, epsilon: f64, seed: u64) -> LearningConfig {
    LearningConfig {
        step_size,
        epsilon,
        episodes,
        eval_every: 100,
        seed,
        ..LearningConfig::default()
    }
}

#[test]
fn two_step_chain_averages_its_targets() {
    let model = chain();
    for k in [1usize, 10, 1000] {
        let (_, q) = train_single(&model, &config(k, StepSize::InverseVisits, 0.0, 1)).unwrap();
        assert_eq!(q.get(1, 1, 0), 2.0);
        // First target bootstraps from an unvisited zero, every later one from 2.
        let want = 2.0 - 1.0 / k as f64;
        assert!((q.get(0, 0, 0) - want).abs() < 1e-12, "k={k}: {}", q.get(0, 0, 0));
    }
}

#[test]
fn single_track_generalized_learner_equals_plain_learner() {
    let model = build_tricky_gridworld::<f64>(RewardScheme::LargeNoise, DiscountScheme::Dr1).unwrap();
    let cfg = LearningConfig {
        episodes: 3000,
        target_steps: Some(12),
        ..LearningConfig::default()
    };
    let (a, q) = train_single(&model, &cfg).unwrap();
    let (b, tensor) = train(&model, &Selector::MaxOfFirst, 1, 1, &cfg).unwrap();
    assert_eq!(a.evaluations, b.evaluations);
    assert_eq!(a.final_trajectory, b.final_trajectory);
    assert_eq!(a.steps, b.steps);
    for t in 0..=model.horizon() {
        for s in 0..model.num_states() {
            for act in 0..model.num_actions() {
                assert_eq!(q.get(t, s, act), tensor.get(t, s, act, 0, 0));
            }
        }
    }
}

#[test]
fn zero_step_size_leaves_estimates_untouched() {
    let model = build_tricky_gridworld::<f64>(RewardScheme::LargeNoise, DiscountScheme::Dr0).unwrap();
    let cfg = config(200, StepSize::Constant { alpha: 0.0 }, 0.05, 3);
    for sel in standard_selectors() {
        let (_, tensor) = train(&model, &sel, 2, 3, &cfg).unwrap();
        assert_eq!(tensor.max_abs(), 0.0, "{}", sel.name());
    }
}

#[test]
fn myopic_learner_recovers_mean_rewards() {
    let mut r = rng(12);
    let base = random_nvmdp::<f64, _>(&mut r, 2, 2, 2, 1.0).unwrap();
    let model = Nvmdp::new(ModelParts {
        num_states: 2,
        num_actions: 2,
        horizon: 2,
        transitions: base.transitions().clone(),
        rewards: base.rewards().clone(),
        discounts: TimeTable::constant(vec![0.0; 8], 2),
        start: vec![0.5, 0.5],
        terminals: vec![],
        reward_noise: RewardNoise::Gaussian { std: 1.0 },
    })
    .unwrap();
    let (_, q) = train_single(&model, &config(20_000, StepSize::InverseVisits, 1.0, 5)).unwrap();
    for t in 0..2 {
        for s in 0..2 {
            for a in 0..2 {
                let err = (q.get(t, s, a) - model.mean_reward(t, s, a)).abs();
                assert!(err < 0.06, "({t},{s},{a}) off by {err}");
            }
        }
    }
}

#[test]
fn learners_approach_dynamic_programming_truth() {
    let mut r = rng(21);
    let model = random_nvmdp::<f64, _>(&mut r, 3, 2, 3, 1.1).unwrap();
    let truth = value_iteration(&model);
    let cfg = config(200_000, StepSize::InverseVisits, 1.0, 8);
    let (_, q) = train_single(&model, &cfg).unwrap();
    let (_, tensor) = train(&model, &Selector::Averaged, 2, 1, &cfg).unwrap();
    for t in 0..model.horizon() {
        for s in 0..3 {
            for a in 0..2 {
                let want = truth.q.get(t, s, a);
                assert!((q.get(t, s, a) - want).abs() < 0.05, "plain ({t},{s},{a})");
                let avg = (tensor.get(t, s, a, 0, 0) + tensor.get(t, s, a, 1, 0)) / 2.0;
                assert!((avg - want).abs() < 0.05, "averaged ({t},{s},{a})");
            }
        }
    }
}

#[test]
fn standard_selectors_satisfy_both_conditions() {
    for sel in standard_selectors() {
        let report = selector_assumption_suite(&sel, None, 10_000, &mut rng(31));
        assert!(report.passed(), "{}: {report:?}", sel.name());
        assert_eq!(report.constant_violations, 0);
    }
}

#[test]
fn doubled_max_is_rejected() {
    let report = selector_assumption_suite(&DoubledMax, Some((1, 1)), 1000, &mut rng(32));
    assert!(!report.passed());
}

#[test]
fn aggregations_on_a_hand_built_slice() {
    // One action, two tracks with histories [3, 1] and [0, 2].
    let data = [3.0, 1.0, 0.0, 2.0];
    let slice = TensorSlice::new(&data, 1, 2, 2).unwrap();
    assert_eq!(Selector::MaxOfFirst.target(&slice, 1), 3.0);
    assert_eq!(Selector::Averaged.target(&slice, 0), 1.5);
    assert_eq!(Selector::Maxmin.target(&slice, 0), 0.0);
    assert_eq!(Selector::PtMxm.target(&slice, 0), 1.0);
    assert_eq!(Selector::PtMxm.target(&slice, 1), 0.0);
}

#[test]
fn update_shifts_history_then_moves_newest_slot() {
    let mut q = EstimateTensor::<f64>::zeros(1, 1, 1, 1, 3);
    q.update(0, 0, 0, 0, 10.0, 0.5);
    q.update(0, 0, 0, 0, 10.0, 0.5);
    assert_eq!(q.get(0, 0, 0, 0, 0), 7.5);
    assert_eq!(q.get(0, 0, 0, 0, 1), 5.0);
    assert_eq!(q.get(0, 0, 0, 0, 2), 0.0);
}

#[test]
fn same_seed_same_record() {
    let model = build_tricky_gridworld::<f64>(RewardScheme::SmallNoise, DiscountScheme::Dr3).unwrap();
    let cfg = config(1500, StepSize::Constant { alpha: 0.1 }, 0.05, 77);
    let sel = Selector::WtAvg { lambda: 0.5, eta: 0.7 };
    let (a, _) = train(&model, &sel, 2, 3, &cfg).unwrap();
    let (b, _) = train(&model, &sel, 2, 3, &cfg).unwrap();
    assert_eq!(serde_json::to_string(&a).unwrap(), serde_json::to_string(&b).unwrap());
    let (_, ta) = train(&model, &sel, 2, 3, &cfg).unwrap();
    let (_, tc) = train(&model, &sel, 2, 3, &LearningConfig { seed: 78, ..cfg }).unwrap();
    assert_ne!(ta.values(), tc.values());
}

#[test]
fn trial_seeds_are_distinct() {
    let seeds: std::collections::HashSet<u64> = (0..10_000).map(|k| trial_seed(0, k)).collect();
    assert_eq!(seeds.len(), 10_000);
    assert_ne!(trial_seed(0, 0), trial_seed(1, 0));
}

#[test]
fn bad_learning_parameters_are_rejected() {
    let model = chain();
    let bad = [
        config(1, StepSize::Constant { alpha: 1.5 }, 0.1, 0),
        config(1, StepSize::Constant { alpha: 0.1 }, -0.1, 0),
    ];
    for cfg in bad {
        assert!(train_single(&model, &cfg).is_err());
    }
    assert!(train(&model, &Selector::MaxOfFirst, 0, 1, &config(1, StepSize::InverseVisits, 0.1, 0)).is_err());
}
