//! Exact checks of the policy-gradient and policy-improvement identities on
//! small models. Every expectation is a finite sum over the horizon.

use std::collections::BTreeMap;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::Serialize;

use crate::dp::{policy_evaluation, reward_shaping_transform, value_iteration};
use crate::envs::random_nvmdp;
use crate::error::{invalid, NvmdpError, Result};
use crate::matrixrep::value_recursion_check;
use crate::model::{QTable, TabularNvmdp, TimePolicy, ValueTable};
use crate::qlearn::{selector_assumption_suite, Selector, TargetFunction, TensorSlice};
use crate::scalar::Scalar;

/// Per-`(t, s)` softmax over action logits.
#[derive(Clone, Debug, PartialEq)]
pub struct SoftmaxPolicyParams<T> {
    horizon: usize,
    num_states: usize,
    num_actions: usize,
    logits: Vec<T>,
}

impl<T: Scalar> SoftmaxPolicyParams<T> {
    pub fn new(horizon: usize, num_states: usize, num_actions: usize, logits: Vec<T>) -> Result<Self> {
        if logits.len() != horizon * num_states * num_actions {
            return Err(NvmdpError::Dimension(format!(
                "{} logits for a {horizon} x {num_states} x {num_actions} policy",
                logits.len()
            )));
        }
        if logits.iter().any(|x| !x.is_finite()) {
            return Err(invalid("logits must be finite"));
        }
        Ok(Self {
            horizon,
            num_states,
            num_actions,
            logits,
        })
    }

    pub fn zeros(horizon: usize, num_states: usize, num_actions: usize) -> Self {
        Self {
            horizon,
            num_states,
            num_actions,
            logits: vec![T::zero(); horizon * num_states * num_actions],
        }
    }

    /// Logits uniform in `[-scale, scale]`.
    pub fn random<R: Rng + ?Sized>(rng: &mut R, horizon: usize, num_states: usize, num_actions: usize, scale: f64) -> Self {
        let logits = (0..horizon * num_states * num_actions)
            .map(|_| T::lit(rng.random_range(-scale..=scale)))
            .collect();
        Self {
            horizon,
            num_states,
            num_actions,
            logits,
        }
    }

    pub fn for_model(model: &TabularNvmdp<T>) -> Self {
        Self::zeros(model.horizon(), model.num_states(), model.num_actions())
    }

    pub fn len(&self) -> usize {
        self.logits.len()
    }

    pub fn is_empty(&self) -> bool {
        self.logits.is_empty()
    }

    pub fn logits(&self) -> &[T] {
        &self.logits
    }

    /// Flat index of logit `(t, s, a)`.
    pub fn index(&self, t: usize, s: usize, a: usize) -> usize {
        (t * self.num_states + s) * self.num_actions + a
    }

    /// Copy with logit `k` shifted by `delta`.
    pub fn shifted(&self, k: usize, delta: T) -> Self {
        let mut out = self.clone();
        out.logits[k] += delta;
        out
    }

    /// Copy with every logit moved by `scale * direction`.
    pub fn perturbed(&self, direction: &[T], scale: T) -> Self {
        let mut out = self.clone();
        for (x, d) in out.logits.iter_mut().zip(direction) {
            *x += scale * *d;
        }
        out
    }

    pub fn policy(&self) -> TimePolicy<T> {
        let mut probs = Vec::with_capacity(self.logits.len());
        for row in self.logits.chunks(self.num_actions) {
            let top = row.iter().copied().fold(T::neg_infinity(), T::max);
            let exps: Vec<T> = row.iter().map(|&x| (x - top).exp()).collect();
            let z: T = exps.iter().copied().sum();
            probs.extend(exps.into_iter().map(|e| e / z));
        }
        TimePolicy::from_probs(self.horizon, self.num_states, self.num_actions, probs)
            .expect("softmax rows are normalized")
    }
}

/// Discounted occupancy `d_i(x) = E[Γ_{t,i} 1{s_i = x} | s_t = s]` for
/// `i in t..H`; row `k` holds time `t + k`.
pub fn discounted_occupancy<T: Scalar>(model: &TabularNvmdp<T>, policy: &TimePolicy<T>, t: usize, s: usize) -> Vec<Vec<T>> {
    let (h, ns, na) = (model.horizon(), model.num_states(), model.num_actions());
    let mut rows = Vec::with_capacity(h.saturating_sub(t));
    let mut d = vec![T::zero(); ns];
    d[s] = T::one();
    for i in t..h {
        let mut next = vec![T::zero(); ns];
        for x in 0..ns {
            if d[x] == T::zero() {
                continue;
            }
            for a in 0..na {
                let w = d[x] * policy.prob(i, x, a);
                if w == T::zero() {
                    continue;
                }
                for (x2, &p) in model.transition_row(i, x, a).iter().enumerate() {
                    if p != T::zero() {
                        next[x2] += w * p * model.discount(i, x, a, x2);
                    }
                }
            }
        }
        rows.push(std::mem::replace(&mut d, next));
    }
    rows
}

/// Weight applied to each action's value in the gradient sum.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum GradientBaseline {
    /// Use `A_i(x, a)`.
    Advantage,
    /// Use `Q_i(x, a)` directly.
    ActionValue,
}

fn check_time_state<T: Scalar>(model: &TabularNvmdp<T>, t: usize, s: usize) -> Result<()> {
    if t >= model.horizon() || s >= model.num_states() {
        return Err(NvmdpError::OutOfRange(format!(
            "(t={t}, s={s}) outside horizon {} and {} states",
            model.horizon(),
            model.num_states()
        )));
    }
    Ok(())
}

fn advantage_table<T: Scalar>(q: &QTable<T>, v: &ValueTable<T>) -> Vec<T> {
    let (h, ns, na) = (q.horizon(), q.num_states(), q.num_actions());
    let mut out = Vec::with_capacity(h * ns * na);
    for t in 0..h {
        for s in 0..ns {
            for a in 0..na {
                out.push(q.get(t, s, a) - v.get(t, s));
            }
        }
    }
    out
}

/// Gradient of `V_t(s)` with respect to every logit, as the occupancy-weighted
/// sum of `∇π_i(a|x) · X_i(x, a)` with `X` the advantage or the action value.
/// Logits before time `t` get zero.
pub fn exact_policy_gradient<T: Scalar>(
    model: &TabularNvmdp<T>,
    params: &SoftmaxPolicyParams<T>,
    t: usize,
    s: usize,
    baseline: GradientBaseline,
) -> Result<Vec<T>> {
    check_time_state(model, t, s)?;
    let policy = params.policy();
    if policy.probs().iter().any(|&p| p <= T::zero()) {
        return Err(invalid("softmax probability underflowed to zero"));
    }
    let eval = policy_evaluation(model, &policy)?;
    let occ = discounted_occupancy(model, &policy, t, s);
    let (ns, na) = (model.num_states(), model.num_actions());
    let mut grad = vec![T::zero(); params.len()];
    for (k, d) in occ.iter().enumerate() {
        let i = t + k;
        for x in 0..ns {
            if d[x] == T::zero() {
                continue;
            }
            let pi = policy.row(i, x);
            let value = |a: usize| match baseline {
                GradientBaseline::Advantage => eval.q.get(i, x, a) - eval.v.get(i, x),
                GradientBaseline::ActionValue => eval.q.get(i, x, a),
            };
            for b in 0..na {
                // ∂π(a)/∂θ_b = π(a) (1{a = b} - π(b)).
                let mut acc = T::zero();
                for a in 0..na {
                    let indicator = if a == b { T::one() } else { T::zero() };
                    acc += pi[a] * (indicator - pi[b]) * value(a);
                }
                grad[params.index(i, x, b)] = d[x] * acc;
            }
        }
    }
    Ok(grad)
}

/// Both sides of the performance-difference identity at `(t, s)`.
#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct PerformanceDifference<T> {
    /// `V'_t(s) - V_t(s)` from two evaluations.
    pub lhs: T,
    /// Occupancy under `π'` weighted sum of `π'`-expected advantages of `π`.
    pub rhs: T,
    pub residual: T,
}

pub fn performance_difference<T: Scalar>(
    model: &TabularNvmdp<T>,
    pi: &TimePolicy<T>,
    pi_prime: &TimePolicy<T>,
    t: usize,
    s: usize,
) -> Result<PerformanceDifference<T>> {
    check_time_state(model, t, s)?;
    let old = policy_evaluation(model, pi)?;
    let new = policy_evaluation(model, pi_prime)?;
    let adv = advantage_table(&old.q, &old.v);
    let occ = discounted_occupancy(model, pi_prime, t, s);
    let (ns, na) = (model.num_states(), model.num_actions());
    let mut rhs = T::zero();
    for (k, d) in occ.iter().enumerate() {
        let i = t + k;
        for x in 0..ns {
            for a in 0..na {
                rhs += d[x] * pi_prime.prob(i, x, a) * adv[(i * ns + x) * na + a];
            }
        }
    }
    let lhs = new.v.get(t, s) - old.v.get(t, s);
    Ok(PerformanceDifference {
        lhs,
        rhs,
        residual: (lhs - rhs).abs(),
    })
}

/// How the policy advantage is summed.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum AdvantageForm {
    /// Trajectory under `π`, last action drawn from `π'`.
    Direct,
    /// Trajectory and action under `π`, reweighted by `π'(a|x) / π(a|x)`.
    Ratio,
}

/// Policy advantage `D^{π,π'}_t(s)`.
pub fn policy_advantage_d<T: Scalar>(
    model: &TabularNvmdp<T>,
    pi: &TimePolicy<T>,
    pi_prime: &TimePolicy<T>,
    t: usize,
    s: usize,
    form: AdvantageForm,
) -> Result<T> {
    check_time_state(model, t, s)?;
    let old = policy_evaluation(model, pi)?;
    policy_advantage_from(model, pi, pi_prime, t, s, form, &old.q, &old.v)
}

#[allow(clippy::too_many_arguments)]
fn policy_advantage_from<T: Scalar>(
    model: &TabularNvmdp<T>,
    pi: &TimePolicy<T>,
    pi_prime: &TimePolicy<T>,
    t: usize,
    s: usize,
    form: AdvantageForm,
    q: &QTable<T>,
    v: &ValueTable<T>,
) -> Result<T> {
    let occ = discounted_occupancy(model, pi, t, s);
    let (ns, na) = (model.num_states(), model.num_actions());
    let mut total = T::zero();
    for (k, d) in occ.iter().enumerate() {
        let i = t + k;
        for x in 0..ns {
            if d[x] == T::zero() {
                continue;
            }
            for a in 0..na {
                let adv = q.get(i, x, a) - v.get(i, x);
                let weight = match form {
                    AdvantageForm::Direct => pi_prime.prob(i, x, a),
                    AdvantageForm::Ratio => {
                        let p = pi.prob(i, x, a);
                        if p == T::zero() {
                            if pi_prime.prob(i, x, a) != T::zero() {
                                return Err(invalid(format!(
                                    "ratio form needs π(a|x) > 0 at (t={i}, x={x}, a={a})"
                                )));
                            }
                            continue;
                        }
                        p * (pi_prime.prob(i, x, a) / p)
                    }
                };
                total += d[x] * weight * adv;
            }
        }
    }
    Ok(total)
}

/// Largest total-variation distance between the two policies' action rows
/// over `j in t..H` and every state.
pub fn max_tv_distance<T: Scalar>(pi: &TimePolicy<T>, pi_prime: &TimePolicy<T>, t: usize, horizon: usize) -> T {
    let mut worst = T::zero();
    for j in t..horizon {
        for x in 0..pi.num_states() {
            let l1: T = pi
                .row(j, x)
                .iter()
                .zip(pi_prime.row(j, x))
                .map(|(a, b)| (*a - *b).abs())
                .sum();
            worst = worst.max(l1 / T::lit(2.0));
        }
    }
    worst
}

/// Outcome of the quadratic improvement bound at time `t`.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct TrpoReport<T> {
    /// `|V'_t(x) - V_t(x) - D_t(x)|` per state.
    pub lhs: Vec<T>,
    pub alpha: T,
    /// `4 A_B Σ_{i>t} (i - t) Γ^M_{t,i}`.
    pub c: T,
    pub bound: T,
    pub violations: usize,
}

/// Checks `|V'_t - V_t - D_t| <= C α_t²` at every state with the explicit
/// constant built from the largest advantage magnitude and the products of
/// per-step maximum discounts.
pub fn trpo_bound_check<T: Scalar>(
    model: &TabularNvmdp<T>,
    pi: &TimePolicy<T>,
    pi_prime: &TimePolicy<T>,
    t: usize,
) -> Result<TrpoReport<T>> {
    check_time_state(model, t, 0)?;
    let old = policy_evaluation(model, pi)?;
    let new = policy_evaluation(model, pi_prime)?;
    let a_bound = advantage_table(&old.q, &old.v)
        .into_iter()
        .fold(T::zero(), |m, x| m.max(x.abs()));
    let mut gamma_prod = T::one();
    let mut weighted = T::zero();
    for i in t + 1..=model.horizon() {
        gamma_prod *= model.max_discount(i - 1);
        weighted += T::lit((i - t) as f64) * gamma_prod;
    }
    let c = T::lit(4.0) * a_bound * weighted;
    let alpha = max_tv_distance(pi, pi_prime, t, model.horizon());
    let bound = c * alpha * alpha;
    let mut lhs = Vec::with_capacity(model.num_states());
    let mut violations = 0;
    for x in 0..model.num_states() {
        let d = policy_advantage_from(model, pi, pi_prime, t, x, AdvantageForm::Direct, &old.q, &old.v)?;
        let gap = (new.v.get(t, x) - old.v.get(t, x) - d).abs();
        if gap > bound + T::check_tolerance() {
            violations += 1;
        }
        lhs.push(gap);
    }
    Ok(TrpoReport {
        lhs,
        alpha,
        c,
        bound,
        violations,
    })
}

/// Named groups of checks runnable from the command line.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum Suite {
    Gradient,
    Perfdiff,
    Trpo,
    Shaping,
    Matrix,
    Selectors,
}

impl Suite {
    pub const ALL: [Suite; 6] = [
        Suite::Gradient,
        Suite::Perfdiff,
        Suite::Trpo,
        Suite::Shaping,
        Suite::Matrix,
        Suite::Selectors,
    ];

    pub fn name(self) -> &'static str {
        match self {
            Suite::Gradient => "gradient",
            Suite::Perfdiff => "perfdiff",
            Suite::Trpo => "trpo",
            Suite::Shaping => "shaping",
            Suite::Matrix => "matrix",
            Suite::Selectors => "selectors",
        }
    }

    /// `"all"` expands to every suite.
    pub fn parse_list(name: &str) -> Result<Vec<Suite>> {
        if name == "all" {
            return Ok(Self::ALL.to_vec());
        }
        Self::ALL
            .into_iter()
            .find(|s| s.name() == name)
            .map(|s| vec![s])
            .ok_or_else(|| NvmdpError::UnknownName {
                kind: "verification suite",
                name: name.to_string(),
            })
    }
}

/// Worst observed quantities of one suite.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct SuiteReport {
    pub suite: Suite,
    pub instances: usize,
    /// Worst value of each measured residual.
    pub worst: BTreeMap<String, f64>,
    /// Acceptance threshold of each residual.
    pub thresholds: BTreeMap<String, f64>,
    pub violations: usize,
    pub passed: bool,
}

impl SuiteReport {
    fn new(suite: Suite) -> Self {
        Self {
            suite,
            instances: 0,
            worst: BTreeMap::new(),
            thresholds: BTreeMap::new(),
            violations: 0,
            passed: true,
        }
    }

    fn record(&mut self, key: &str, value: f64, threshold: f64) {
        let slot = self.worst.entry(key.to_string()).or_insert(0.0);
        *slot = slot.max(value);
        self.thresholds.insert(key.to_string(), threshold);
        if value.is_nan() || value >= threshold {
            self.violations += 1;
        }
    }

    fn finish(mut self) -> Self {
        self.passed = self.violations == 0;
        self
    }
}

/// Random model in the verification size range: `|S| in 2..=4`,
/// `|A| in 2..=3`, `H in 2..=5`, discounts up to 1.2.
pub fn random_instance<R: Rng + ?Sized>(rng: &mut R) -> TabularNvmdp<f64> {
    let ns = rng.random_range(2..=4);
    let na = rng.random_range(2..=3);
    let h = rng.random_range(2..=5);
    random_nvmdp(rng, ns, na, h, 1.2).expect("generated parts are valid")
}

/// Central-difference gradient of `V_t(s)` with step `h`.
pub fn finite_difference_gradient(
    model: &TabularNvmdp<f64>,
    params: &SoftmaxPolicyParams<f64>,
    t: usize,
    s: usize,
    h: f64,
) -> Result<Vec<f64>> {
    let value = |p: &SoftmaxPolicyParams<f64>| -> Result<f64> { Ok(policy_evaluation(model, &p.policy())?.v.get(t, s)) };
    (0..params.len())
        .map(|k| Ok((value(&params.shifted(k, h))? - value(&params.shifted(k, -h))?) / (2.0 * h)))
        .collect()
}

/// `max |a - b| / max(max |b|, floor)`.
pub fn relative_error(a: &[f64], b: &[f64], floor: f64) -> f64 {
    let diff = a.iter().zip(b).fold(0.0_f64, |m, (x, y)| m.max((x - y).abs()));
    let scale = b.iter().fold(0.0_f64, |m, y| m.max(y.abs())).max(floor);
    diff / scale
}

/// Greedy argmax sets per `(t, s)` after collapsing values within `tol` of the max.
pub fn argmax_sets(q: &QTable<f64>, tol: f64) -> Vec<Vec<usize>> {
    let mut out = Vec::new();
    for t in 0..q.horizon() {
        for s in 0..q.num_states() {
            let row = q.row(t, s);
            let best = row.iter().copied().fold(f64::NEG_INFINITY, f64::max);
            out.push((0..row.len()).filter(|&a| row[a] >= best - tol).collect());
        }
    }
    out
}

/// Aggregation that doubles the plain maximum; fails non-expansion.
#[derive(Clone, Copy, Debug, Default)]
pub struct DoubledMax;

impl TargetFunction<f64> for DoubledMax {
    fn action_score(&self, slice: &TensorSlice<'_, f64>, a: usize, _track: usize) -> f64 {
        2.0 * slice.get(a, 0, 0)
    }

    fn name(&self) -> String {
        "doubled-max".into()
    }
}

/// The five aggregation functions with the default weighted-average parameters.
pub fn standard_selectors() -> [Selector; 5] {
    [
        Selector::MaxOfFirst,
        Selector::Averaged,
        Selector::Maxmin,
        Selector::WtAvg { lambda: 0.5, eta: 0.7 },
        Selector::PtMxm,
    ]
}

fn suite_rng(seed: u64, suite: Suite) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed.wrapping_mul(0x2545_f491_4f6c_dd1d) ^ suite as u64)
}

/// Runs one suite over `instances` random models (the selector suite uses
/// `10^4` slice pairs per function regardless).
pub fn run_suite(suite: Suite, instances: usize, seed: u64) -> Result<SuiteReport> {
    let mut rng = suite_rng(seed, suite);
    let mut rep = SuiteReport::new(suite);
    match suite {
        Suite::Gradient => {
            for _ in 0..instances {
                let m = random_instance(&mut rng);
                let params = SoftmaxPolicyParams::random(&mut rng, m.horizon(), m.num_states(), m.num_actions(), 1.0);
                let s = rng.random_range(0..m.num_states());
                let g = exact_policy_gradient(&m, &params, 0, s, GradientBaseline::Advantage)?;
                let gq = exact_policy_gradient(&m, &params, 0, s, GradientBaseline::ActionValue)?;
                let fd = finite_difference_gradient(&m, &params, 0, s, 1e-5)?;
                rep.record("relative_error_vs_finite_difference", relative_error(&g, &fd, 1e-6), 1e-5);
                rep.record("advantage_vs_action_value", relative_error(&gq, &g, 1e-6), 1e-9);
                rep.instances += 1;
            }
        }
        Suite::Perfdiff => {
            for _ in 0..instances {
                let m = random_instance(&mut rng);
                let (h, ns, na) = (m.horizon(), m.num_states(), m.num_actions());
                let pi = SoftmaxPolicyParams::random(&mut rng, h, ns, na, 2.0).policy();
                let pi2 = SoftmaxPolicyParams::random(&mut rng, h, ns, na, 2.0).policy();
                for s in 0..ns {
                    let pd = performance_difference(&m, &pi, &pi2, 0, s)?;
                    rep.record("identity_residual", pd.residual, 1e-9);
                    let direct = policy_advantage_d(&m, &pi, &pi2, 0, s, AdvantageForm::Direct)?;
                    let ratio = policy_advantage_d(&m, &pi, &pi2, 0, s, AdvantageForm::Ratio)?;
                    rep.record("advantage_forms_gap", (direct - ratio).abs(), 1e-10);
                    let same = policy_advantage_d(&m, &pi, &pi, 0, s, AdvantageForm::Direct)?;
                    rep.record("self_advantage", same.abs(), 1e-10);
                }
                rep.instances += 1;
            }
        }
        Suite::Trpo => {
            const PAIRS: usize = 10;
            let mut max_ratio: f64 = 0.0;
            for _ in 0..instances {
                let na = rng.random_range(2..=3);
                let m = random_nvmdp::<f64, _>(&mut rng, 4, na, 5, 1.2)?;
                let (h, ns, na) = (m.horizon(), m.num_states(), m.num_actions());
                for _ in 0..PAIRS {
                    let base = SoftmaxPolicyParams::random(&mut rng, h, ns, na, 2.0);
                    let dir: Vec<f64> = (0..base.len()).map(|_| rng.random_range(-1.0..=1.0)).collect();
                    let scale = 10f64.powf(rng.random_range(-3.0..=0.5));
                    let pi = base.policy();
                    let pi2 = base.perturbed(&dir, scale).policy();
                    let t = rng.random_range(0..h);
                    let r = trpo_bound_check(&m, &pi, &pi2, t)?;
                    rep.violations += r.violations;
                    let worst_lhs = r.lhs.iter().copied().fold(0.0, f64::max);
                    if r.bound > 0.0 {
                        max_ratio = max_ratio.max(worst_lhs / r.bound);
                    }
                    rep.instances += 1;
                }
            }
            rep.worst.insert("max_lhs_over_bound".into(), max_ratio);
            rep.worst.insert("violations".into(), rep.violations as f64);
        }
        Suite::Shaping => {
            for _ in 0..instances {
                let m = random_instance(&mut rng);
                let phi: Vec<Vec<f64>> = (0..=m.horizon())
                    .map(|_| (0..m.num_states()).map(|_| rng.random_range(-5.0..=5.0)).collect())
                    .collect();
                let shaped = reward_shaping_transform(&m, &phi)?;
                let a = value_iteration(&m);
                let b = value_iteration(&shaped);
                let mut gap: f64 = 0.0;
                for t in 0..m.horizon() {
                    for s in 0..m.num_states() {
                        for act in 0..m.num_actions() {
                            gap = gap.max((b.q.get(t, s, act) - (a.q.get(t, s, act) - phi[t][s])).abs());
                        }
                    }
                }
                rep.record("shifted_q_gap", gap, 1e-9);
                let same = argmax_sets(&a.q, 1e-9) == argmax_sets(&b.q, 1e-9);
                rep.record("argmax_set_mismatch", if same { 0.0 } else { 1.0 }, 0.5);
                rep.instances += 1;
            }
        }
        Suite::Matrix => {
            for _ in 0..instances {
                let m = random_instance(&mut rng);
                let pi =
                    SoftmaxPolicyParams::random(&mut rng, m.horizon(), m.num_states(), m.num_actions(), 2.0).policy();
                let r = value_recursion_check(&m, &pi)?;
                rep.record("recursion_residual", r.worst(), 1e-9);
                rep.instances += 1;
            }
        }
        Suite::Selectors => {
            for sel in standard_selectors() {
                let r = selector_assumption_suite(&sel, None, 10_000, &mut rng);
                rep.record(&format!("{}_violations", r.name), (r.constant_violations + r.pair_violations) as f64, 0.5);
                rep.instances += 1;
            }
            let broken = selector_assumption_suite(&DoubledMax, None, 10_000, &mut rng);
            rep.record(
                "broken_selector_accepted",
                if broken.pair_violations > 0 { 0.0 } else { 1.0 },
                0.5,
            );
        }
    }
    Ok(rep.finish())
}
