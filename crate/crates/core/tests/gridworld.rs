mod common;

use std::collections::{HashSet, VecDeque};

use common::rng;
use nvmdp::dp::value_iteration;
use nvmdp::envs::{
    build_tricky_gridworld, build_vanilla_gridworld, dump_nvmdp_json, load_nvmdp_json, random_nvmdp, DiscountScheme,
    GridworldSpec, NvmdpJson, RewardScheme, AVOID_CELLS,
};
use nvmdp::{model::most_likely_start, rollout, Nvmdp};

/// Leftward push written out per column and phase of `t mod 6`.
fn reference_push(t: usize, x: usize) -> usize {
    match (x, t % 6) {
        (5, 0) => 0,
        (5, _) => 2,
        (6, 1..=4) => 0,
        (6, _) => 3,
        (7, 5) => 0,
        (7, _) => 4,
        _ => 0,
    }
}

fn reference_step(t: usize, (x, y): (usize, usize), a: usize) -> (usize, usize) {
    let x = (x as i64 - reference_push(t, x) as i64).max(1);
    let (dx, dy) = [(0, 1), (0, -1), (-1, 0), (1, 0)][a];
    ((x + dx).clamp(1, 8) as usize, (y as i64 + dy).clamp(1, 3) as usize)
}

/// Fewest steps from start to target by breadth-first search over
/// `(t mod 6, cell)` using the reference dynamics.
fn fewest_steps(windy: bool) -> usize {
    let step = |t, c, a| if windy { reference_step(t, c, a) } else { reference_step_calm(c, a) };
    let mut seen = HashSet::new();
    let mut queue = VecDeque::from([((1usize, 1usize), 0usize)]);
    while let Some((cell, t)) = queue.pop_front() {
        if cell == (8, 3) {
            return t;
        }
        if !seen.insert((t % 6, cell)) {
            continue;
        }
        for a in 0..4 {
            queue.push_back((step(t, cell, a), t + 1));
        }
    }
    unreachable!()
}

fn reference_step_calm((x, y): (usize, usize), a: usize) -> (usize, usize) {
    let (dx, dy) = [(0i64, 1i64), (0, -1), (-1, 0), (1, 0)][a];
    ((x as i64 + dx).clamp(1, 8) as usize, (y as i64 + dy).clamp(1, 3) as usize)
}

fn greedy_path(model: &Nvmdp) -> nvmdp::Rollout<f64> {
    let opt = value_iteration(model);
    let g = opt.greedy.unwrap();
    rollout(model, most_likely_start(model), |t, s| g.action(t, s), &mut rng(0))
}

fn cells(states: &[usize]) -> Vec<(usize, usize)> {
    let g = GridworldSpec::vanilla();
    states.iter().map(|&s| g.cell_of(s)).collect()
}

#[test]
fn wind_rule_matches_reference_on_every_cell_phase_and_action() {
    let g = GridworldSpec::tricky(RewardScheme::Deterministic, DiscountScheme::Dr0);
    for t in 0..12 {
        for x in 1..=8 {
            assert_eq!(g.wind_push(t, x), reference_push(t, x), "t={t} x={x}");
            for y in 1..=3 {
                for a in 0..4 {
                    assert_eq!(g.next_cell(t, (x, y), a), reference_step(t, (x, y), a));
                }
            }
        }
    }
}

#[test]
fn tricky_optimum_is_twelve_steps_with_known_return() {
    let model = build_tricky_gridworld::<f64>(RewardScheme::Deterministic, DiscountScheme::Dr0).unwrap();
    let r = greedy_path(&model);
    assert!(r.reached_terminal);
    assert_eq!(r.steps(), fewest_steps(true));
    assert_eq!(r.steps(), 12);
    let c = cells(&r.states);
    assert_eq!(c.first(), Some(&(1, 1)));
    assert_eq!(c.last(), Some(&(8, 3)));
    let reference: f64 = (0..12).map(|k| -10.0 * 0.999f64.powi(k)).sum();
    assert!((r.discounted_return - reference).abs() < 1e-9);
    assert!((r.discounted_return - -119.342195).abs() < 1e-6);
}

#[test]
fn vanilla_optimum_is_the_shortest_path() {
    let model = build_vanilla_gridworld::<f64>().unwrap();
    let r = greedy_path(&model);
    assert_eq!(r.steps(), fewest_steps(false));
    assert_eq!(r.steps(), 9);
}

#[test]
fn discounts_above_one_steer_the_optimum_around_marked_cells() {
    let g = GridworldSpec::vanilla();
    let marked: Vec<usize> = AVOID_CELLS.iter().map(|&c| g.state_of(c)).collect();
    for scheme in [DiscountScheme::Dr1, DiscountScheme::Dr2, DiscountScheme::Dr3] {
        for reward in RewardScheme::ALL {
            let model = build_tricky_gridworld::<f64>(reward, scheme).unwrap();
            let r = greedy_path(&model);
            assert_eq!(r.steps(), 12, "{scheme}");
            assert!(!r.visits_any(&marked), "{scheme} {reward}: {:?}", cells(&r.states));
        }
    }
}

#[test]
fn reward_noise_matches_its_nominal_interval() {
    for (scheme, lo, hi, tol) in [
        (RewardScheme::LargeNoise, -15.0, -5.0, 0.05),
        (RewardScheme::SmallNoise, -11.0, -9.0, 0.02),
    ] {
        let model = build_tricky_gridworld::<f64>(scheme, DiscountScheme::Dr0).unwrap();
        let mut r = rng(99);
        let mut draws: Vec<f64> = (0..1_000_000).map(|_| model.sample_reward(0, 0, 3, 1, &mut r)).collect();
        draws.sort_by(f64::total_cmp);
        let q05 = draws[50_000];
        let q95 = draws[950_000];
        assert!((q05 - lo).abs() <= tol, "{scheme}: 5% quantile {q05}");
        assert!((q95 - hi).abs() <= tol, "{scheme}: 95% quantile {q95}");
    }
    let model = build_tricky_gridworld::<f64>(RewardScheme::Deterministic, DiscountScheme::Dr0).unwrap();
    assert_eq!(model.sample_reward(0, 0, 3, 1, &mut rng(1)), -10.0);
}

#[test]
fn model_json_round_trips_through_files() {
    let dir = tempfile::tempdir().unwrap();
    let mut r = rng(4);
    let models = [
        build_tricky_gridworld::<f64>(RewardScheme::LargeNoise, DiscountScheme::Dr2).unwrap(),
        random_nvmdp::<f64, _>(&mut r, 3, 2, 4, 1.2).unwrap(),
    ];
    for (k, model) in models.iter().enumerate() {
        let path = dir.path().join(format!("m{k}.json"));
        dump_nvmdp_json(model, &path).unwrap();
        let back: Nvmdp = load_nvmdp_json(&path).unwrap();
        assert_eq!(NvmdpJson::from_model(&back), NvmdpJson::from_model(model));
        for t in 0..model.horizon() {
            for s in 0..model.num_states() {
                for a in 0..model.num_actions() {
                    assert_eq!(back.transition_row(t, s, a), model.transition_row(t, s, a));
                    for s2 in 0..model.num_states() {
                        assert_eq!(back.reward(t, s, a, s2), model.reward(t, s, a, s2));
                        assert_eq!(back.discount(t, s, a, s2), model.discount(t, s, a, s2));
                    }
                }
            }
        }
    }
}

#[test]
fn malformed_model_json_is_rejected() {
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("bad.json");
    std::fs::write(&path, r#"{"num_states": 2, "bogus": 1}"#).unwrap();
    assert!(load_nvmdp_json::<f64>(&path).is_err());
    assert!(load_nvmdp_json::<f64>(&dir.path().join("missing.json")).is_err());
}
