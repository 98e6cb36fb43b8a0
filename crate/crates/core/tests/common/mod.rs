//! Independent reference computations used only by tests.
#![allow(dead_code)]

use nvmdp::envs::random_nvmdp;
use nvmdp::{Nvmdp, Policy};
use rand::Rng;
use rand_chacha::rand_core::SeedableRng;
use rand_chacha::ChaCha8Rng;

pub fn rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

/// Expected discounted return from `(t, s)` by walking every trajectory
/// to the horizon, multiplying probabilities and discounts along the way.
pub fn enumerate_value(model: &Nvmdp, policy: &Policy, t: usize, s: usize) -> f64 {
    fn walk(model: &Nvmdp, policy: &Policy, t: usize, s: usize, weight: f64, out: &mut f64) {
        if t >= model.horizon() || weight == 0.0 {
            return;
        }
        for a in 0..model.num_actions() {
            let pa = policy.prob(t, s, a);
            if pa == 0.0 {
                continue;
            }
            for s2 in 0..model.num_states() {
                let p = model.transition_row(t, s, a)[s2];
                if p == 0.0 {
                    continue;
                }
                let w = weight * pa * p;
                *out += w * model.reward(t, s, a, s2);
                walk(model, policy, t + 1, s2, w * model.discount(t, s, a, s2), out);
            }
        }
    }
    let mut out = 0.0;
    walk(model, policy, t, s, 1.0, &mut out);
    out
}

/// `Q_t(s, a)` from the enumerated values of the successors.
pub fn enumerate_q(model: &Nvmdp, policy: &Policy, t: usize, s: usize, a: usize) -> f64 {
    (0..model.num_states())
        .map(|s2| {
            let p = model.transition_row(t, s, a)[s2];
            if p == 0.0 {
                return 0.0;
            }
            let next = if t + 1 < model.horizon() {
                enumerate_value(model, policy, t + 1, s2)
            } else {
                0.0
            };
            p * (model.reward(t, s, a, s2) + model.discount(t, s, a, s2) * next)
        })
        .sum()
}

/// Every deterministic time-indexed policy of the model.
pub fn all_deterministic_policies(model: &Nvmdp) -> Vec<Policy> {
    let (h, ns, na) = (model.horizon(), model.num_states(), model.num_actions());
    let slots = h * ns;
    let total = na.pow(slots as u32);
    (0..total)
        .map(|mut code| {
            let actions: Vec<usize> = (0..slots)
                .map(|_| {
                    let a = code % na;
                    code /= na;
                    a
                })
                .collect();
            Policy::deterministic(h, ns, na, &actions).unwrap()
        })
        .collect()
}

/// Random policy with strictly positive rows.
pub fn random_policy<R: Rng>(rng: &mut R, model: &Nvmdp) -> Policy {
    let (h, ns, na) = (model.horizon(), model.num_states(), model.num_actions());
    let mut probs = Vec::with_capacity(h * ns * na);
    for _ in 0..h * ns {
        let row: Vec<f64> = (0..na).map(|_| rng.random_range(0.01..1.0)).collect();
        let sum: f64 = row.iter().sum();
        probs.extend(row.iter().map(|x| x / sum));
    }
    Policy::from_probs(h, ns, na, probs).unwrap()
}

/// Small model for enumeration: `|S| <= 3`, `|A| <= 2`, `H <= 4`.
pub fn small_model(seed: u64) -> Nvmdp {
    let mut r = rng(seed);
    let ns = r.random_range(1..=3);
    let na = r.random_range(1..=2);
    let h = r.random_range(1..=4);
    random_nvmdp(&mut r, ns, na, h, 1.2).unwrap()
}
