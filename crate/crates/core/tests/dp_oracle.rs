mod common;

use common::*;
use nvmdp::dp::{bellman_residual, policy_evaluation, value_iteration};
use nvmdp::envs::random_nvmdp;
use nvmdp::{Policy, TabularNvmdp};

const TOL: f64 = 1e-9;

#[test]
fn policy_evaluation_matches_trajectory_enumeration() {
    for seed in 0..50 {
        let model = small_model(seed);
        let mut r = rng(1000 + seed);
        let pi = random_policy(&mut r, &model);
        let dp = policy_evaluation(&model, &pi).unwrap();
        for t in 0..model.horizon() {
            for s in 0..model.num_states() {
                let want = enumerate_value(&model, &pi, t, s);
                assert!((dp.v.get(t, s) - want).abs() < TOL, "seed {seed} V({t},{s}): {} vs {want}", dp.v.get(t, s));
                for a in 0..model.num_actions() {
                    let want = enumerate_q(&model, &pi, t, s, a);
                    assert!((dp.q.get(t, s, a) - want).abs() < TOL, "seed {seed} Q({t},{s},{a})");
                }
            }
        }
        for s in 0..model.num_states() {
            assert_eq!(dp.v.get(model.horizon(), s), 0.0);
        }
    }
}

#[test]
fn value_iteration_matches_best_enumerated_policy() {
    for seed in 0..50 {
        let model = small_model(seed);
        let opt = value_iteration(&model);
        let policies = all_deterministic_policies(&model);
        for s in 0..model.num_states() {
            let best = policies
                .iter()
                .map(|pi| enumerate_value(&model, pi, 0, s))
                .fold(f64::NEG_INFINITY, f64::max);
            assert!((opt.v.get(0, s) - best).abs() < TOL, "seed {seed} s={s}: {} vs {best}", opt.v.get(0, s));
        }
        // The greedy policy attains the optimum everywhere.
        let greedy: Policy = opt.greedy.as_ref().unwrap().to_time_policy(model.num_actions());
        let g = policy_evaluation(&model, &greedy).unwrap();
        for t in 0..model.horizon() {
            for s in 0..model.num_states() {
                assert!((g.v.get(t, s) - opt.v.get(t, s)).abs() < TOL);
            }
        }
    }
}

#[test]
fn optimal_values_dominate_random_policies() {
    let mut r = rng(7);
    let model = random_nvmdp::<f64, _>(&mut r, 4, 3, 6, 1.2).unwrap();
    let opt = value_iteration(&model);
    for _ in 0..100 {
        let pi = random_policy(&mut r, &model);
        let v = policy_evaluation(&model, &pi).unwrap().v;
        for t in 0..=model.horizon() {
            for s in 0..model.num_states() {
                assert!(v.get(t, s) <= opt.v.get(t, s) + TOL);
            }
        }
    }
}

#[test]
fn optimal_q_has_zero_bellman_residual_and_perturbations_show() {
    for seed in 0..50 {
        let mut r = rng(seed);
        let model = random_nvmdp::<f64, _>(&mut r, 4, 3, 5, 1.2).unwrap();
        let opt = value_iteration(&model);
        assert!(bellman_residual(&model, &opt.q).unwrap() < TOL);

        let mut q = opt.q.clone();
        let h = model.horizon();
        q.set(h - 1, 1, 2, q.get(h - 1, 1, 2) + 0.5);
        assert!(bellman_residual(&model, &q).unwrap() >= 0.5 - 1e-12);
    }
}

#[test]
fn single_precision_tracks_double_precision() {
    let mut r = rng(3);
    let model = random_nvmdp::<f64, _>(&mut r, 4, 3, 5, 1.2).unwrap();
    let json = nvmdp::envs::NvmdpJson::from_model(&model);
    let model32: TabularNvmdp<f32> = json.into_model().unwrap();
    let a = value_iteration(&model);
    let b = value_iteration(&model32);
    for t in 0..model.horizon() {
        for s in 0..model.num_states() {
            assert!((a.v.get(t, s) - b.v.get(t, s) as f64).abs() < 1e-4 * (1.0 + a.v.get(t, s).abs()));
        }
    }
}
