//! Exact model-based solvers: backward policy evaluation and value
//! iteration over the time index, plus checkers built on top of them.
//!
//! Both solvers sweep `t = H-1, ..., 0` once. Expectations over next states
//! are exact sums and only mean rewards are used.

use serde::{Deserialize, Serialize};

use crate::error::{invalid, NvmdpError, Result};
use crate::model::{QTable, TabularNvmdp, TimePolicy, TimeTable, ValueTable};
use crate::scalar::{argmax, max_of, Scalar};

/// Deterministic policy `t, s -> a`.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct GreedyPolicy {
    horizon: usize,
    num_states: usize,
    actions: Vec<usize>,
}

impl GreedyPolicy {
    /// Greedy actions of `q` at every `t < H`, ties to the lowest action index.
    pub fn from_q<T: Scalar>(q: &QTable<T>) -> Self {
        let mut actions = Vec::with_capacity(q.horizon() * q.num_states());
        for t in 0..q.horizon() {
            for s in 0..q.num_states() {
                actions.push(argmax(q.row(t, s)));
            }
        }
        Self {
            horizon: q.horizon(),
            num_states: q.num_states(),
            actions,
        }
    }

    #[inline]
    pub fn action(&self, t: usize, s: usize) -> usize {
        self.actions[t * self.num_states + s]
    }

    pub fn horizon(&self) -> usize {
        self.horizon
    }

    pub fn to_time_policy<T: Scalar>(&self, num_actions: usize) -> TimePolicy<T> {
        TimePolicy::deterministic(self.horizon, self.num_states, num_actions, &self.actions)
            .expect("greedy actions are in range by construction")
    }
}

/// Output of the DP solvers.
#[derive(Clone, Debug)]
pub struct DpResult<T> {
    pub v: ValueTable<T>,
    pub q: QTable<T>,
    /// Present for value iteration only.
    pub greedy: Option<GreedyPolicy>,
    pub horizon_used: usize,
}

/// JSON export schema of DP tables.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct DpTables<T> {
    pub horizon: usize,
    pub num_states: usize,
    pub num_actions: usize,
    pub v: Vec<Vec<T>>,
    pub q: Vec<Vec<Vec<T>>>,
}

impl<T: Scalar> DpResult<T> {
    pub fn tables(&self) -> DpTables<T> {
        DpTables {
            horizon: self.horizon_used,
            num_states: self.q.num_states(),
            num_actions: self.q.num_actions(),
            v: self.v.as_nested(),
            q: self.q.as_nested(),
        }
    }
}

fn check_policy_dims<T: Scalar>(model: &TabularNvmdp<T>, policy: &TimePolicy<T>) -> Result<()> {
    if policy.horizon() < model.horizon()
        || policy.num_states() != model.num_states()
        || policy.num_actions() != model.num_actions()
    {
        return Err(NvmdpError::Dimension(format!(
            "policy is {} x {} x {}, model needs at least {} x {} x {}",
            policy.horizon(),
            policy.num_states(),
            policy.num_actions(),
            model.horizon(),
            model.num_states(),
            model.num_actions()
        )));
    }
    Ok(())
}

/// Backward policy evaluation.
///
/// `Q_t(s, a)` is completed over all next states before `π_t(a|s) Q_t(s, a)`
/// is added to `V_t(s)`.
pub fn policy_evaluation<T: Scalar>(model: &TabularNvmdp<T>, policy: &TimePolicy<T>) -> Result<DpResult<T>> {
    check_policy_dims(model, policy)?;
    let (h, ns, na) = (model.horizon(), model.num_states(), model.num_actions());
    let mut v = ValueTable::zeros(h, ns);
    let mut q = QTable::zeros(h, ns, na);
    for t in (0..h).rev() {
        for s in 0..ns {
            let mut vs = T::zero();
            for a in 0..na {
                let qsa = model.mean_reward(t, s, a) + model.expected_discounted(t, s, a, |s2| v.get(t + 1, s2));
                q.set(t, s, a, qsa);
                vs += policy.prob(t, s, a) * qsa;
            }
            v.set(t, s, vs);
        }
    }
    Ok(DpResult {
        v,
        q,
        greedy: None,
        horizon_used: h,
    })
}

/// Backward value iteration with `V_t(s) = max_a Q_t(s, a)`.
pub fn value_iteration<T: Scalar>(model: &TabularNvmdp<T>) -> DpResult<T> {
    let (h, ns, na) = (model.horizon(), model.num_states(), model.num_actions());
    let mut v = ValueTable::zeros(h, ns);
    let mut q = QTable::zeros(h, ns, na);
    for t in (0..h).rev() {
        for s in 0..ns {
            for a in 0..na {
                let qsa = model.mean_reward(t, s, a) + model.expected_discounted(t, s, a, |s2| v.get(t + 1, s2));
                q.set(t, s, a, qsa);
            }
            v.set(t, s, max_of(q.row(t, s)));
        }
    }
    let greedy = GreedyPolicy::from_q(&q);
    DpResult {
        v,
        q,
        greedy: Some(greedy),
        horizon_used: h,
    }
}

/// Largest violation of the optimality equation
/// `Q_t(s,a) = r̄_t(s,a) + E_{s'}[γ_{t+1}(s,a,s') max_{a'} Q_{t+1}(s',a')]` over `t < H`.
pub fn bellman_residual<T: Scalar>(model: &TabularNvmdp<T>, q: &QTable<T>) -> Result<T> {
    if q.horizon() != model.horizon() || q.num_states() != model.num_states() || q.num_actions() != model.num_actions() {
        return Err(NvmdpError::Dimension("Q table does not match the model".into()));
    }
    let mut worst = T::zero();
    for t in 0..model.horizon() {
        for s in 0..model.num_states() {
            for a in 0..model.num_actions() {
                let mut target = model.mean_reward(t, s, a);
                let p = model.transition_row(t, s, a);
                for (s2, &prob) in p.iter().enumerate() {
                    let g = model.discount(t, s, a, s2);
                    if prob != T::zero() && g != T::zero() {
                        let best = q.row(t + 1, s2).iter().copied().fold(T::neg_infinity(), T::max);
                        target += prob * g * best;
                    }
                }
                worst = worst.max((q.get(t, s, a) - target).abs());
            }
        }
    }
    Ok(worst)
}

/// Potential-based shaping:
/// `r̃_t(s,a,s') = r_t(s,a,s') + γ_{t+1}(s,a,s') Φ_{t+1}(s') - Φ_t(s)`.
///
/// `potential[t][s]` must cover `t in 0..H` and may include `t = H`
/// (irrelevant, as the last discount is zero).
pub fn reward_shaping_transform<T: Scalar>(model: &TabularNvmdp<T>, potential: &[Vec<T>]) -> Result<TabularNvmdp<T>> {
    let (h, ns, na) = (model.horizon(), model.num_states(), model.num_actions());
    if potential.len() < h || potential.len() > h + 1 {
        return Err(NvmdpError::Dimension(format!(
            "potential covers {} time steps, expected {h} or {}",
            potential.len(),
            h + 1
        )));
    }
    for (t, row) in potential.iter().enumerate() {
        if row.len() != ns {
            return Err(NvmdpError::Dimension(format!("potential row {t} has {} entries", row.len())));
        }
        if let Some(s) = row.iter().position(|x| !x.is_finite()) {
            return Err(invalid(format!("potential at (t={t}, s={s}) is unbounded")));
        }
    }
    let phi = |t: usize, s: usize| potential.get(t).map_or(T::zero(), |row| row[s]);
    let rewards = TimeTable::from_fn(h, |t| {
        let mut layer = Vec::with_capacity(ns * na * ns);
        for s in 0..ns {
            for a in 0..na {
                for s2 in 0..ns {
                    let shaped = model.reward(t, s, a, s2) + model.discount(t, s, a, s2) * phi(t + 1, s2) - phi(t, s);
                    layer.push(shaped);
                }
            }
        }
        layer
    });
    model.with_rewards(rewards)
}

/// Result of checking a policy improvement step.
#[derive(Clone, Debug, PartialEq)]
pub enum ImprovementOutcome {
    /// Every conclusion holds.
    Holds,
    /// The premises (agreement from `n` on, one-step improvement before `n`) fail.
    HypothesisNotMet(String),
    /// Premises hold but a conclusion fails.
    TheoremViolated(String),
}

#[derive(Clone, Debug)]
pub struct ImprovementReport<T> {
    pub outcome: ImprovementOutcome,
    /// Smallest `V'_t(s) - V_t(s)` over `t < n`; zero when `n = 0`.
    pub min_gain_before_n: T,
    /// Largest `|V'_t(s) - V_t(s)|` over `t >= n`.
    pub max_gap_from_n: T,
}

/// Checks the time-indexed policy improvement statement for `π -> π'`
/// where the two policies agree from time `n` on.
pub fn policy_improvement_check<T: Scalar>(
    model: &TabularNvmdp<T>,
    pi: &TimePolicy<T>,
    pi_prime: &TimePolicy<T>,
    n: usize,
) -> Result<ImprovementReport<T>> {
    let (h, ns, na) = (model.horizon(), model.num_states(), model.num_actions());
    let tol = T::check_tolerance();
    let base = policy_evaluation(model, pi)?;
    check_policy_dims(model, pi_prime)?;

    let hypothesis = (|| {
        for t in n..h {
            for s in 0..ns {
                let same = pi.row(t, s).iter().zip(pi_prime.row(t, s)).all(|(x, y)| (*x - *y).abs() <= tol);
                if !same {
                    return Some(format!("policies differ at (t={t}, s={s}) although t >= n={n}"));
                }
            }
        }
        for t in 0..n.min(h) {
            for s in 0..ns {
                let lookahead: T = (0..na).map(|a| pi_prime.prob(t, s, a) * base.q.get(t, s, a)).sum();
                if lookahead < base.v.get(t, s) - tol {
                    return Some(format!(
                        "at (t={t}, s={s}) the new policy's one-step value {lookahead} is below V = {}",
                        base.v.get(t, s)
                    ));
                }
            }
        }
        None
    })();

    let improved = policy_evaluation(model, pi_prime)?;
    let mut min_gain = if n == 0 { T::zero() } else { T::infinity() };
    let mut max_gap = T::zero();
    let mut violation: Option<String> = None;
    for t in 0..h {
        for s in 0..ns {
            let gain = improved.v.get(t, s) - base.v.get(t, s);
            if t < n {
                min_gain = min_gain.min(gain);
                if gain < -tol && violation.is_none() {
                    violation = Some(format!("V decreased by {} at (t={t}, s={s})", -gain));
                }
            } else {
                max_gap = max_gap.max(gain.abs());
                if gain.abs() > tol && violation.is_none() {
                    violation = Some(format!("V changed by {gain} at (t={t}, s={s}) with t >= n"));
                }
            }
            for a in 0..na {
                let dq = improved.q.get(t, s, a) - base.q.get(t, s, a);
                if t + 1 >= n {
                    if dq.abs() > tol && violation.is_none() {
                        violation = Some(format!("Q changed by {dq} at (t={t}, s={s}, a={a}) with t >= n-1"));
                    }
                } else if dq < -tol && violation.is_none() {
                    violation = Some(format!("Q decreased by {} at (t={t}, s={s}, a={a})", -dq));
                }
            }
        }
    }
    let outcome = match (hypothesis, violation) {
        (Some(why), _) => ImprovementOutcome::HypothesisNotMet(why),
        (None, Some(why)) => ImprovementOutcome::TheoremViolated(why),
        (None, None) => ImprovementOutcome::Holds,
    };
    Ok(ImprovementReport {
        outcome,
        min_gain_before_n: min_gain,
        max_gap_from_n: max_gap,
    })
}

/// Greedy one-step improvement of `pi` with respect to its own Q at the
/// time steps in `0..n`; identical to `pi` from `n` on.
pub fn greedy_improvement<T: Scalar>(model: &TabularNvmdp<T>, pi: &TimePolicy<T>, n: usize) -> Result<TimePolicy<T>> {
    let eval = policy_evaluation(model, pi)?;
    let mut out = pi.clone();
    let na = model.num_actions();
    for t in 0..n.min(model.horizon()) {
        for s in 0..model.num_states() {
            let mut row = vec![T::zero(); na];
            row[argmax(eval.q.row(t, s))] = T::one();
            out.set_row(t, s, &row)?;
        }
    }
    Ok(out)
}

/// Outcome of the stationary-reduction check.
#[derive(Clone, Debug)]
pub struct StationaryReport<T> {
    /// `max_{t,k < H/2} |Q*_t - Q*_k|`.
    pub max_q_gap: T,
    /// `max_{t < H/2, s} |V^{rep}_t(s) - V*_t(s)|` for the replicated sub-policy.
    pub replicated_gap: T,
    /// Truncation tolerance `2 γ_max^{H/2} V_B` plus numerical slack.
    pub tolerance: T,
    pub holds: bool,
}

/// For a stationary model with all discounts in `[0, 1)`, checks that optimal
/// values are time-invariant away from the horizon and that replicating the
/// first optimal sub-policy across time is optimal there.
pub fn stationary_reduction_check<T: Scalar>(model: &TabularNvmdp<T>) -> Result<StationaryReport<T>> {
    let h = model.horizon();
    for (name, table) in [
        ("transitions", model.transitions()),
        ("rewards", model.rewards()),
        ("discounts", model.discounts()),
    ] {
        let first = table.layer(0);
        if (1..h).any(|t| table.layer(t) != first) {
            return Err(invalid(format!("{name} vary with time; the model is not stationary")));
        }
    }
    let gamma_max = model.discounts().layer(0).iter().copied().fold(T::zero(), T::max);
    if gamma_max >= T::one() {
        return Err(invalid(format!("stationary reduction needs discounts below 1, found {gamma_max}")));
    }
    let window = (h / 2).max(1);
    let opt = value_iteration(model);
    let (ns, na) = (model.num_states(), model.num_actions());
    let mut max_q_gap = T::zero();
    for s in 0..ns {
        for a in 0..na {
            let mut lo = T::infinity();
            let mut hi = T::neg_infinity();
            for t in 0..window {
                let x = opt.q.get(t, s, a);
                lo = lo.min(x);
                hi = hi.max(x);
            }
            max_q_gap = max_q_gap.max(hi - lo);
        }
    }
    let greedy = opt.greedy.as_ref().expect("value iteration yields a greedy policy");
    let replicated = greedy.to_time_policy::<T>(na).replicate(0);
    let rep = policy_evaluation(model, &replicated)?;
    let mut replicated_gap = T::zero();
    for t in 0..window {
        for s in 0..ns {
            replicated_gap = replicated_gap.max((rep.v.get(t, s) - opt.v.get(t, s)).abs());
        }
    }
    let tolerance = T::lit(2.0) * gamma_max.powi(window as i32) * model.value_bound() + T::check_tolerance();
    Ok(StationaryReport {
        max_q_gap,
        replicated_gap,
        tolerance,
        holds: max_q_gap <= tolerance && replicated_gap <= tolerance,
    })
}

/// `max_{t < window, s, a} |a_t(s,a) - b_t(s,a)|` for two tables of the same shape.
pub fn max_q_difference<T: Scalar>(a: &QTable<T>, b: &QTable<T>, window: usize) -> T {
    let mut worst = T::zero();
    for t in 0..window.min(a.horizon()).min(b.horizon()) {
        for (x, y) in a.at_time(t).iter().zip(b.at_time(t)) {
            worst = worst.max((*x - *y).abs());
        }
    }
    worst
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::{return_of_trajectory, ModelParts, RewardNoise, Transition};

    /// Deterministic chain 0 -> 1 -> 2 -> 2 with reward 1 and discount 0.5.
    fn chain() -> TabularNvmdp<f64> {
        let layer = vec![
            0.0, 1.0, 0.0, //
            0.0, 0.0, 1.0, //
            0.0, 0.0, 1.0,
        ];
        TabularNvmdp::new(ModelParts {
            num_states: 3,
            num_actions: 1,
            horizon: 3,
            transitions: TimeTable::constant(layer, 3),
            rewards: TimeTable::constant(vec![1.0; 9], 3),
            discounts: TimeTable::constant(vec![0.5; 9], 3),
            start: vec![1.0, 0.0, 0.0],
            terminals: vec![],
            reward_noise: RewardNoise::None,
        })
        .unwrap()
    }

    #[test]
    fn chain_value_matches_single_trajectory_return() {
        let m = chain();
        let pi = TimePolicy::uniform(3, 3, 1);
        let res = policy_evaluation(&m, &pi).unwrap();
        let traj = [
            (Transition::new(0, 0, 1), 1.0),
            (Transition::new(1, 0, 2), 1.0),
            (Transition::new(2, 0, 2), 1.0),
        ];
        let oracle = return_of_trajectory(&m, &traj, 0).unwrap();
        assert_eq!(oracle, 1.75);
        assert!((res.v.get(0, 0) - 1.75).abs() < 1e-15);
    }

    #[test]
    fn myopic_single_state_model_has_unit_values() {
        let m = TabularNvmdp::new(ModelParts {
            num_states: 1,
            num_actions: 1,
            horizon: 5,
            transitions: TimeTable::constant(vec![1.0], 5),
            rewards: TimeTable::constant(vec![1.0], 5),
            discounts: TimeTable::constant(vec![0.0], 5),
            start: vec![1.0],
            terminals: vec![],
            reward_noise: RewardNoise::None,
        })
        .unwrap();
        let res = value_iteration(&m);
        for t in 0..5 {
            assert_eq!(res.v.get(t, 0), 1.0);
        }
        assert_eq!(res.v.get(5, 0), 0.0);
        assert_eq!(bellman_residual(&m, &res.q).unwrap(), 0.0);
    }

    #[test]
    fn greedy_tie_break_prefers_lowest_action() {
        let mut q = QTable::<f64>::zeros(1, 1, 3);
        q.set(0, 0, 1, 2.0);
        q.set(0, 0, 2, 2.0);
        assert_eq!(GreedyPolicy::from_q(&q).action(0, 0), 1);
    }

    #[test]
    fn short_policy_is_rejected() {
        let m = chain();
        let pi = TimePolicy::uniform(2, 3, 1);
        assert!(matches!(policy_evaluation(&m, &pi), Err(NvmdpError::Dimension(_))));
    }

    #[test]
    fn zero_potential_leaves_rewards_unchanged() {
        let m = chain();
        let shaped = reward_shaping_transform(&m, &vec![vec![0.0; 3]; 4]).unwrap();
        for t in 0..3 {
            assert_eq!(shaped.rewards().layer(t), m.rewards().layer(t));
        }
    }

    #[test]
    fn unbounded_potential_is_rejected() {
        let m = chain();
        let mut phi = vec![vec![0.0; 3]; 4];
        phi[1][2] = f64::INFINITY;
        assert!(reward_shaping_transform(&m, &phi).is_err());
    }

    #[test]
    fn identical_policies_give_equality() {
        let m = chain();
        let pi = TimePolicy::uniform(3, 3, 1);
        let rep = policy_improvement_check(&m, &pi, &pi, 2).unwrap();
        assert_eq!(rep.outcome, ImprovementOutcome::Holds);
        assert_eq!(rep.max_gap_from_n, 0.0);
    }

    #[test]
    fn tables_export_schema() {
        let res = value_iteration(&chain());
        let json = serde_json::to_value(res.tables()).unwrap();
        assert_eq!(json["horizon"], 3);
        assert_eq!(json["v"].as_array().unwrap().len(), 4);
        assert_eq!(json["q"][0][0].as_array().unwrap().len(), 1);
    }
}
