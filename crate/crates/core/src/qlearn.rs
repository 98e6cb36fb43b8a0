//! Model-free learners on time-indexed estimate tables.
//!
//! Generalized Q-learning keeps `n` estimate tracks per `(t, s, a)`, each
//! holding its `l` most recent values. Every step one track is drawn
//! uniformly, its history shifts by one slot and the newest slot moves
//! towards `r + γ_{t+1}(s,a,s') f_i(Q_{t+1}(s', ·))`.
//!
//! Random draws per environment step always happen in this order: action
//! (exploration coin, then the random action if exploring), next state,
//! reward noise, track. Draws that cannot matter are skipped (no track draw
//! when `n = 1`, no reward draw for noiseless models), which keeps the
//! single-track learner and the plain time-indexed learner on identical
//! random streams.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::dp::GreedyPolicy;
use crate::error::{invalid, NvmdpError, Result};
use crate::model::{rollout, QTable, Rollout, TabularNvmdp};
use crate::scalar::{argmax, Scalar};

/// Seed of trial `index` under a master seed (splitmix64 finalizer over
/// the pair), so trials stay independent and reproducible in any order.
pub fn trial_seed(master: u64, index: u64) -> u64 {
    let mut z = master
        .wrapping_add(index.wrapping_add(1).wrapping_mul(0x9e37_79b9_7f4a_7c15));
    z = (z ^ (z >> 30)).wrapping_mul(0xbf58_476d_1ce4_e5b9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94d0_49bb_1331_11eb);
    z ^ (z >> 31)
}

/// Read-only view of the estimates at one `(t, s)`, indexed `[a][i][j]`.
#[derive(Clone, Copy, Debug)]
pub struct TensorSlice<'a, T> {
    data: &'a [T],
    num_actions: usize,
    n: usize,
    l: usize,
}

impl<'a, T: Scalar> TensorSlice<'a, T> {
    pub fn new(data: &'a [T], num_actions: usize, n: usize, l: usize) -> Result<Self> {
        if n == 0 || l == 0 || num_actions == 0 || data.len() != num_actions * n * l {
            return Err(NvmdpError::Dimension(format!(
                "slice of {} values cannot be {num_actions} x {n} x {l}",
                data.len()
            )));
        }
        Ok(Self {
            data,
            num_actions,
            n,
            l,
        })
    }

    #[inline]
    pub fn get(&self, a: usize, i: usize, j: usize) -> T {
        self.data[(a * self.n + i) * self.l + j]
    }

    /// All `n * l` estimates of action `a`, track-major.
    #[inline]
    pub fn action(&self, a: usize) -> &'a [T] {
        let w = self.n * self.l;
        &self.data[a * w..(a + 1) * w]
    }

    /// The `l` estimates of track `i` for action `a`.
    #[inline]
    pub fn track(&self, a: usize, i: usize) -> &'a [T] {
        let base = (a * self.n + i) * self.l;
        &self.data[base..base + self.l]
    }

    pub fn num_actions(&self) -> usize {
        self.num_actions
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn l(&self) -> usize {
        self.l
    }

    pub fn values(&self) -> &'a [T] {
        self.data
    }
}

/// An aggregation `f_i` of an estimate slice into a bootstrap target.
///
/// Implementors give a per-action score; the target is its maximum over
/// actions. The behavior policy is greedy on [`TargetFunction::behavior_score`].
pub trait TargetFunction<T: Scalar> {
    /// Score of action `a` as seen from track `track`.
    fn action_score(&self, slice: &TensorSlice<'_, T>, a: usize, track: usize) -> T;

    /// Whether the score is the same for every track.
    fn track_independent(&self) -> bool {
        true
    }

    fn name(&self) -> String;

    /// `f_i`.
    fn target(&self, slice: &TensorSlice<'_, T>, track: usize) -> T {
        (0..slice.num_actions())
            .map(|a| self.action_score(slice, a, track))
            .fold(T::neg_infinity(), T::max)
    }

    /// Score used to pick greedy actions: the track score itself, or the
    /// mean over tracks for track-dependent functions.
    fn behavior_score(&self, slice: &TensorSlice<'_, T>, a: usize) -> T {
        if self.track_independent() || slice.n() == 1 {
            self.action_score(slice, a, 0)
        } else {
            let sum: T = (0..slice.n()).map(|i| self.action_score(slice, a, i)).sum();
            sum / T::lit(slice.n() as f64)
        }
    }

    fn greedy_action(&self, slice: &TensorSlice<'_, T>) -> usize {
        let mut best = 0;
        let mut best_score = self.behavior_score(slice, 0);
        for a in 1..slice.num_actions() {
            let x = self.behavior_score(slice, a);
            if x > best_score {
                best = a;
                best_score = x;
            }
        }
        best
    }
}

/// The built-in aggregation functions.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum Selector {
    /// `max_a Q^{(1,1)}`: plain time-indexed Q-learning.
    MaxOfFirst,
    /// `max_a` of the mean over all `(i, j)`.
    Averaged,
    /// `max_a` of the minimum over all `(i, j)`.
    Maxmin,
    /// `max_a` of a geometrically weighted history average, weight `eta` on
    /// the own track and `(1 - eta) / (n - 1)` on each other track.
    WtAvg { lambda: f64, eta: f64 },
    /// `max_a` of the minimum over the own track's history.
    PtMxm,
}

impl Selector {
    pub fn name(&self) -> &'static str {
        match self {
            Selector::MaxOfFirst => "max-of-first",
            Selector::Averaged => "averaged",
            Selector::Maxmin => "maxmin",
            Selector::WtAvg { .. } => "wtavg",
            Selector::PtMxm => "ptmxm",
        }
    }

    /// Checks the parameters against the track shape.
    pub fn validate(&self, n: usize, l: usize) -> Result<()> {
        if n == 0 || l == 0 {
            return Err(invalid(format!("track shape ({n}, {l}) must be positive")));
        }
        match *self {
            Selector::MaxOfFirst if (n, l) != (1, 1) => Err(invalid(format!(
                "max-of-first needs n = l = 1, got ({n}, {l})"
            ))),
            Selector::WtAvg { lambda, eta } if !(lambda > 0.0 && lambda < 1.0 && eta > 0.0 && eta < 1.0) => Err(
                invalid(format!("wtavg needs lambda and eta in (0, 1), got {lambda} and {eta}")),
            ),
            _ => Ok(()),
        }
    }

    /// History weights `λ^{j-1} (1 - λ) / (1 - λ^l)` for `j = 1..=l`.
    pub fn history_weights(lambda: f64, l: usize) -> Vec<f64> {
        let norm = (1.0 - lambda) / (1.0 - lambda.powi(l as i32));
        (0..l).map(|j| lambda.powi(j as i32) * norm).collect()
    }
}

/// `reference + Σ w_k (x_k - reference)`; returns `reference` exactly when
/// every `x_k` equals it.
#[inline]
fn shifted_weighted_sum<T: Scalar>(reference: T, terms: impl Iterator<Item = (T, T)>) -> T {
    let mut acc = T::zero();
    for (w, x) in terms {
        acc += w * (x - reference);
    }
    reference + acc
}

impl<T: Scalar> TargetFunction<T> for Selector {
    fn action_score(&self, slice: &TensorSlice<'_, T>, a: usize, track: usize) -> T {
        match *self {
            Selector::MaxOfFirst => slice.get(a, 0, 0),
            Selector::Averaged => {
                let xs = slice.action(a);
                let w = T::one() / T::lit(xs.len() as f64);
                shifted_weighted_sum(xs[0], xs.iter().map(|&x| (w, x)))
            }
            Selector::Maxmin => slice.action(a).iter().copied().fold(T::infinity(), T::min),
            Selector::PtMxm => slice.track(a, track).iter().copied().fold(T::infinity(), T::min),
            Selector::WtAvg { lambda, eta } => {
                let (n, l) = (slice.n(), slice.l());
                let (own, other) = if n == 1 {
                    (1.0, 0.0)
                } else {
                    (eta, (1.0 - eta) / (n - 1) as f64)
                };
                let hist = Selector::history_weights(lambda, l);
                let reference = slice.get(a, track, 0);
                let terms = (0..n).flat_map(|i| {
                    let scale = if i == track { own } else { other };
                    hist.iter()
                        .enumerate()
                        .map(move |(j, &w)| (T::lit(scale * w), slice.get(a, i, j)))
                });
                shifted_weighted_sum(reference, terms)
            }
        }
    }

    fn track_independent(&self) -> bool {
        !matches!(self, Selector::WtAvg { .. } | Selector::PtMxm)
    }

    fn name(&self) -> String {
        Selector::name(self).to_string()
    }
}

/// Estimates `Q_t^{(i,j)}(s, a)` for `t in 0..=H`; the `t = H` block stays zero.
#[derive(Clone, Debug, PartialEq)]
pub struct EstimateTensor<T> {
    horizon: usize,
    num_states: usize,
    num_actions: usize,
    n: usize,
    l: usize,
    values: Vec<T>,
}

impl<T: Scalar> EstimateTensor<T> {
    pub fn zeros(horizon: usize, num_states: usize, num_actions: usize, n: usize, l: usize) -> Self {
        Self {
            horizon,
            num_states,
            num_actions,
            n,
            l,
            values: vec![T::zero(); (horizon + 1) * num_states * num_actions * n * l],
        }
    }

    pub fn for_model(model: &TabularNvmdp<T>, n: usize, l: usize) -> Self {
        Self::zeros(model.horizon(), model.num_states(), model.num_actions(), n, l)
    }

    pub fn horizon(&self) -> usize {
        self.horizon
    }

    pub fn num_states(&self) -> usize {
        self.num_states
    }

    pub fn num_actions(&self) -> usize {
        self.num_actions
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn l(&self) -> usize {
        self.l
    }

    #[inline]
    fn base(&self, t: usize, s: usize) -> usize {
        (t * self.num_states + s) * self.num_actions * self.n * self.l
    }

    #[inline]
    pub fn get(&self, t: usize, s: usize, a: usize, i: usize, j: usize) -> T {
        self.values[self.base(t, s) + (a * self.n + i) * self.l + j]
    }

    #[inline]
    pub fn slice(&self, t: usize, s: usize) -> TensorSlice<'_, T> {
        let base = self.base(t, s);
        TensorSlice {
            data: &self.values[base..base + self.num_actions * self.n * self.l],
            num_actions: self.num_actions,
            n: self.n,
            l: self.l,
        }
    }

    /// Shifts the history of track `i` at `(t, s, a)` one slot back (the
    /// oldest value drops out), then moves the newest slot towards `target`.
    #[inline]
    pub fn update(&mut self, t: usize, s: usize, a: usize, i: usize, target: T, alpha: T) {
        debug_assert!(t < self.horizon, "estimates at the horizon are never written");
        let start = self.base(t, s) + (a * self.n + i) * self.l;
        let track = &mut self.values[start..start + self.l];
        track.copy_within(0..self.l - 1, 1);
        track[0] += alpha * (target - track[0]);
    }

    /// Largest absolute estimate.
    pub fn max_abs(&self) -> T {
        self.values.iter().fold(T::zero(), |m, x| m.max(x.abs()))
    }

    pub fn values(&self) -> &[T] {
        &self.values
    }
}

/// Step-size rule.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum StepSize {
    Constant { alpha: f64 },
    /// `1 / m` on the `m`-th update of an estimate slot.
    InverseVisits,
}

/// Per-slot visit counters for [`StepSize::InverseVisits`].
#[derive(Clone, Debug)]
pub struct StepSizes {
    rule: StepSize,
    counts: Vec<u32>,
}

impl StepSizes {
    /// `slots` is the number of independently updated estimates.
    pub fn new(rule: StepSize, slots: usize) -> Self {
        let counts = match rule {
            StepSize::Constant { .. } => Vec::new(),
            StepSize::InverseVisits => vec![0; slots],
        };
        Self { rule, counts }
    }

    #[inline]
    fn next<T: Scalar>(&mut self, slot: usize) -> T {
        match self.rule {
            StepSize::Constant { alpha } => T::lit(alpha),
            StepSize::InverseVisits => {
                self.counts[slot] += 1;
                T::one() / T::lit(self.counts[slot] as f64)
            }
        }
    }
}

/// Episodes-and-evaluation settings shared by every learner.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct LearningConfig {
    pub step_size: StepSize,
    pub epsilon: f64,
    pub episodes: usize,
    /// Episodes between greedy evaluations; 0 disables evaluation.
    pub eval_every: usize,
    pub seed: u64,
    /// An evaluation counts as optimal when it reaches a terminal state in
    /// exactly this many steps (and, if set, with a return inside the window).
    pub target_steps: Option<usize>,
    pub return_window: Option<(f64, f64)>,
    /// States whose presence in the final greedy trajectory is reported.
    pub watch_states: Vec<usize>,
    /// Discount used by the time-unaware baseline.
    pub classic_gamma: f64,
}

impl Default for LearningConfig {
    fn default() -> Self {
        Self {
            step_size: StepSize::Constant { alpha: 0.1 },
            epsilon: 0.05,
            episodes: 50_000,
            eval_every: 500,
            seed: 0,
            target_steps: None,
            return_window: None,
            watch_states: Vec::new(),
            classic_gamma: 0.999,
        }
    }
}

impl LearningConfig {
    pub fn validate(&self) -> Result<()> {
        if !(0.0..=1.0).contains(&self.epsilon) {
            return Err(invalid(format!("epsilon {} must lie in [0, 1]", self.epsilon)));
        }
        if let StepSize::Constant { alpha } = self.step_size {
            if !(0.0..=1.0).contains(&alpha) {
                return Err(invalid(format!("step size {alpha} must lie in [0, 1]")));
            }
        }
        if !(self.classic_gamma >= 0.0 && self.classic_gamma.is_finite()) {
            return Err(invalid(format!("discount {} must be non-negative", self.classic_gamma)));
        }
        Ok(())
    }

    fn meets_target<T: Scalar>(&self, r: &Rollout<T>) -> bool {
        let steps_ok = match self.target_steps {
            Some(k) => r.reached_terminal && r.steps() == k,
            None => r.reached_terminal,
        };
        let ret = r.discounted_return.as_f64();
        steps_ok && self.return_window.is_none_or(|(lo, hi)| (lo..=hi).contains(&ret))
    }
}

/// Running totals across episodes.
#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct EpisodeStats {
    pub episodes: usize,
    pub steps: u64,
    pub last_episode_steps: usize,
    /// Undiscounted sum of sampled rewards in the last episode.
    pub last_episode_reward: f64,
}

/// One greedy evaluation during training.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct EvalPoint {
    pub episode: usize,
    #[serde(rename = "return")]
    pub discounted_return: f64,
    pub steps: usize,
    pub reached_terminal: bool,
    pub optimal: bool,
}

/// Summary of one training trial.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct RunRecord {
    pub algorithm: String,
    pub n: usize,
    pub l: usize,
    pub reward_scheme: String,
    pub discount_scheme: String,
    pub seed: u64,
    pub converged: bool,
    /// First evaluation episode from which every evaluation is optimal.
    pub convergence_episode: Option<usize>,
    /// Environment steps over the whole run.
    pub steps: u64,
    /// Environment steps up to the convergence episode; the full count otherwise.
    pub steps_before_convergence: u64,
    /// Sample standard deviation of evaluation returns before convergence.
    pub pre_convergence_return_std: Option<f64>,
    /// States of the final greedy rollout, start first.
    pub final_trajectory: Vec<usize>,
    pub final_return: f64,
    pub avoidance_hit: bool,
    pub reward_noise: String,
    pub evaluations: Vec<EvalPoint>,
}

#[inline]
fn sample_start<T: Scalar, R: Rng + ?Sized>(model: &TabularNvmdp<T>, rng: &mut R) -> usize {
    let u: f64 = rng.random();
    let mut acc = 0.0;
    let mut last = 0;
    for (s, p) in model.start().iter().enumerate() {
        let p = p.as_f64();
        if p > 0.0 {
            acc += p;
            last = s;
            if u < acc {
                return s;
            }
        }
    }
    last
}

#[inline]
fn epsilon_greedy<R: Rng + ?Sized>(epsilon: f64, num_actions: usize, rng: &mut R, greedy: impl FnOnce() -> usize) -> usize {
    let coin: f64 = rng.random();
    if coin < epsilon {
        rng.random_range(0..num_actions)
    } else {
        greedy()
    }
}

/// One episode of generalized Q-learning.
///
/// Starts from a state drawn from the start distribution (one uniform draw)
/// and stops at a terminal state or the horizon.
pub fn run_episode<T: Scalar, F: TargetFunction<T> + ?Sized, R: Rng + ?Sized>(
    model: &TabularNvmdp<T>,
    tensor: &mut EstimateTensor<T>,
    f: &F,
    config: &LearningConfig,
    step_sizes: &mut StepSizes,
    rng: &mut R,
    stats: &mut EpisodeStats,
) {
    let na = model.num_actions();
    let n = tensor.n();
    let mut s = sample_start(model, rng);
    let mut steps = 0;
    let mut total = 0.0;
    for t in 0..model.horizon() {
        if model.is_terminal(s) {
            break;
        }
        let a = epsilon_greedy(config.epsilon, na, rng, || f.greedy_action(&tensor.slice(t, s)));
        let next = model.sample_next_state(t, s, a, rng);
        let r = model.sample_reward(t, s, a, next, rng);
        let i = if n > 1 { rng.random_range(0..n) } else { 0 };
        let gamma = model.discount(t, s, a, next);
        let bootstrap = if gamma == T::zero() {
            T::zero()
        } else {
            gamma * f.target(&tensor.slice(t + 1, next), i)
        };
        let slot = ((t * model.num_states() + s) * na + a) * n + i;
        let alpha = step_sizes.next::<T>(slot);
        tensor.update(t, s, a, i, r + bootstrap, alpha);
        total += r.as_f64();
        steps += 1;
        s = next;
    }
    stats.episodes += 1;
    stats.steps += steps as u64;
    stats.last_episode_steps = steps;
    stats.last_episode_reward = total;
}

/// One episode of plain time-indexed Q-learning on a single table.
pub fn run_episode_single<T: Scalar, R: Rng + ?Sized>(
    model: &TabularNvmdp<T>,
    q: &mut QTable<T>,
    config: &LearningConfig,
    step_sizes: &mut StepSizes,
    rng: &mut R,
    stats: &mut EpisodeStats,
) {
    let na = model.num_actions();
    let mut s = sample_start(model, rng);
    let mut steps = 0;
    let mut total = 0.0;
    for t in 0..model.horizon() {
        if model.is_terminal(s) {
            break;
        }
        let a = epsilon_greedy(config.epsilon, na, rng, || argmax(q.row(t, s)));
        let next = model.sample_next_state(t, s, a, rng);
        let r = model.sample_reward(t, s, a, next, rng);
        let gamma = model.discount(t, s, a, next);
        let best_next = q.row(t + 1, next).iter().copied().fold(T::neg_infinity(), T::max);
        let target = r + if gamma == T::zero() { T::zero() } else { gamma * best_next };
        let alpha = step_sizes.next::<T>((t * model.num_states() + s) * na + a);
        let old = q.get(t, s, a);
        q.set(t, s, a, old + alpha * (target - old));
        total += r.as_f64();
        steps += 1;
        s = next;
    }
    stats.episodes += 1;
    stats.steps += steps as u64;
    stats.last_episode_steps = steps;
    stats.last_episode_reward = total;
}

/// Greedy policy of the behavior scores, ties to the lowest action.
pub fn greedy_of_tensor<T: Scalar, F: TargetFunction<T> + ?Sized>(tensor: &EstimateTensor<T>, f: &F) -> GreedyPolicy {
    let mut q = QTable::zeros(tensor.horizon(), tensor.num_states(), tensor.num_actions());
    for t in 0..tensor.horizon() {
        for s in 0..tensor.num_states() {
            let slice = tensor.slice(t, s);
            for a in 0..tensor.num_actions() {
                q.set(t, s, a, f.behavior_score(&slice, a));
            }
        }
    }
    GreedyPolicy::from_q(&q)
}

/// Derives the evaluation stream from a trial seed.
fn eval_rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed ^ 0x9e37_79b9_7f4a_7c15)
}

fn sample_std(xs: &[f64]) -> Option<f64> {
    if xs.len() < 2 {
        return None;
    }
    let mean = xs.iter().sum::<f64>() / xs.len() as f64;
    let var = xs.iter().map(|x| (x - mean) * (x - mean)).sum::<f64>() / (xs.len() - 1) as f64;
    Some(var.sqrt())
}

type GreedyFn = Box<dyn Fn(usize, usize) -> usize>;

/// Shared training loop. `episode` runs one episode, `policy` returns the
/// current greedy action at `(t, s)`.
fn training_loop<T: Scalar>(
    model: &TabularNvmdp<T>,
    config: &LearningConfig,
    algorithm: String,
    (n, l): (usize, usize),
    mut episode: impl FnMut(&mut ChaCha8Rng, &mut EpisodeStats),
    mut greedy: impl FnMut() -> GreedyFn,
) -> RunRecord {
    let mut rng = ChaCha8Rng::seed_from_u64(config.seed);
    let mut evaluator = eval_rng(config.seed);
    let mut stats = EpisodeStats::default();
    let start = crate::model::most_likely_start(model);
    let mut evaluations = Vec::new();
    let mut steps_at_eval = Vec::new();
    for e in 1..=config.episodes {
        episode(&mut rng, &mut stats);
        if config.eval_every > 0 && e % config.eval_every == 0 {
            let policy = greedy();
            let r = rollout(model, start, &policy, &mut evaluator);
            evaluations.push(EvalPoint {
                episode: e,
                discounted_return: r.discounted_return.as_f64(),
                steps: r.steps(),
                reached_terminal: r.reached_terminal,
                optimal: config.meets_target(&r),
            });
            steps_at_eval.push(stats.steps);
        }
    }
    let policy = greedy();
    let last = rollout(model, start, &policy, &mut evaluator);
    drop(policy);

    let first_of_tail = evaluations.iter().rposition(|p| !p.optimal).map_or(0, |k| k + 1);
    let converged_at = (first_of_tail < evaluations.len()).then_some(first_of_tail);
    let before: Vec<f64> = evaluations[..converged_at.unwrap_or(evaluations.len())]
        .iter()
        .map(|p| p.discounted_return)
        .collect();
    RunRecord {
        algorithm,
        n,
        l,
        reward_scheme: "custom".into(),
        discount_scheme: "custom".into(),
        seed: config.seed,
        converged: converged_at.is_some(),
        convergence_episode: converged_at.map(|k| evaluations[k].episode),
        steps: stats.steps,
        steps_before_convergence: converged_at.map_or(stats.steps, |k| steps_at_eval[k]),
        pre_convergence_return_std: sample_std(&before),
        avoidance_hit: last.visits_any(&config.watch_states),
        final_return: last.discounted_return.as_f64(),
        final_trajectory: last.states,
        reward_noise: model.reward_noise().describe(),
        evaluations,
    }
}

/// Trains generalized Q-learning with `f` on `n x l` tracks.
pub fn train<T: Scalar, F: TargetFunction<T>>(
    model: &TabularNvmdp<T>,
    f: &F,
    n: usize,
    l: usize,
    config: &LearningConfig,
) -> Result<(RunRecord, EstimateTensor<T>)> {
    config.validate()?;
    if n == 0 || l == 0 {
        return Err(invalid(format!("track shape ({n}, {l}) must be positive")));
    }
    let tensor = std::cell::RefCell::new(EstimateTensor::for_model(model, n, l));
    let mut step_sizes = StepSizes::new(
        config.step_size,
        model.horizon() * model.num_states() * model.num_actions() * n,
    );
    let record = training_loop(
        model,
        config,
        f.name(),
        (n, l),
        |rng, stats| run_episode(model, &mut tensor.borrow_mut(), f, config, &mut step_sizes, rng, stats),
        || {
            let policy = greedy_of_tensor(&tensor.borrow(), f);
            Box::new(move |t, s| policy.action(t, s))
        },
    );
    Ok((record, tensor.into_inner()))
}

/// Trains [`train`]'s single-track special case through the dedicated
/// single-table code path.
pub fn train_single<T: Scalar>(model: &TabularNvmdp<T>, config: &LearningConfig) -> Result<(RunRecord, QTable<T>)> {
    config.validate()?;
    let q = std::cell::RefCell::new(QTable::zeros(model.horizon(), model.num_states(), model.num_actions()));
    let mut step_sizes = StepSizes::new(
        config.step_size,
        model.horizon() * model.num_states() * model.num_actions(),
    );
    let record = training_loop(
        model,
        config,
        "nvmdp-q".into(),
        (1, 1),
        |rng, stats| run_episode_single(model, &mut q.borrow_mut(), config, &mut step_sizes, rng, stats),
        || {
            let policy = GreedyPolicy::from_q(&q.borrow());
            Box::new(move |t, s| policy.action(t, s))
        },
    );
    Ok((record, q.into_inner()))
}

/// Time-unaware Q-learning on one `|S| x |A|` table with the constant
/// discount `config.classic_gamma`. Terminal states are not bootstrapped
/// from; the time limit is not treated as terminal.
pub fn classic_q_baseline<T: Scalar>(model: &TabularNvmdp<T>, config: &LearningConfig) -> Result<(RunRecord, Vec<T>)> {
    config.validate()?;
    let (ns, na) = (model.num_states(), model.num_actions());
    let gamma = T::lit(config.classic_gamma);
    let table = std::cell::RefCell::new(vec![T::zero(); ns * na]);
    let mut step_sizes = StepSizes::new(config.step_size, ns * na);
    let record = training_loop(
        model,
        config,
        "classic-q".into(),
        (1, 1),
        |rng, stats| {
            let mut q = table.borrow_mut();
            let mut s = sample_start(model, rng);
            let mut steps = 0;
            let mut total = 0.0;
            for t in 0..model.horizon() {
                if model.is_terminal(s) {
                    break;
                }
                let a = epsilon_greedy(config.epsilon, na, rng, || argmax(&q[s * na..(s + 1) * na]));
                let next = model.sample_next_state(t, s, a, rng);
                let r = model.sample_reward(t, s, a, next, rng);
                let bootstrap = if model.is_terminal(next) {
                    T::zero()
                } else {
                    gamma * q[next * na..(next + 1) * na].iter().copied().fold(T::neg_infinity(), T::max)
                };
                let alpha = step_sizes.next::<T>(s * na + a);
                let old = q[s * na + a];
                q[s * na + a] = old + alpha * (r + bootstrap - old);
                total += r.as_f64();
                steps += 1;
                s = next;
            }
            stats.episodes += 1;
            stats.steps += steps as u64;
            stats.last_episode_steps = steps;
            stats.last_episode_reward = total;
        },
        || {
            let q = table.borrow().clone();
            Box::new(move |_t, s| argmax(&q[s * na..(s + 1) * na]))
        },
    );
    Ok((record, table.into_inner()))
}

/// `(shape (|A|, n, l), Q, Q', track)` of a violating pair.
pub type Witness = ((usize, usize, usize), Vec<f64>, Vec<f64>, usize);

/// Result of probing a target function against the max-on-constant and
/// non-expansion conditions.
#[derive(Clone, Debug, Default, PartialEq, Serialize)]
pub struct AssumptionReport {
    pub name: String,
    pub constant_trials: usize,
    pub constant_violations: usize,
    pub pair_trials: usize,
    pub pair_violations: usize,
    /// Largest `|f(Q) - f(Q')| / max |Q - Q'|` seen.
    pub worst_ratio: f64,
    /// `(shape (|A|, n, l), Q, Q', track)` of the worst violating pair.
    pub witness: Option<Witness>,
}

impl AssumptionReport {
    pub fn passed(&self) -> bool {
        self.constant_violations == 0 && self.pair_violations == 0
    }
}

/// Checks `f` on constant slices (exact equality) and on random slice pairs
/// with entries in `[-100, 100]`. Shapes are drawn with `|A| <= 4`, and
/// `n, l <= 6` unless `shape` pins `(n, l)`. A pair violates non-expansion
/// when the gap exceeds the entry distance by more than a few ulps of the
/// largest magnitude involved.
pub fn selector_assumption_suite<F: TargetFunction<f64> + ?Sized, R: Rng + ?Sized>(
    f: &F,
    shape: Option<(usize, usize)>,
    trials: usize,
    rng: &mut R,
) -> AssumptionReport {
    let mut rep = AssumptionReport {
        name: f.name(),
        ..Default::default()
    };
    let draw_shape = |rng: &mut R| {
        let na = rng.random_range(1..=4);
        let (n, l) = shape.unwrap_or_else(|| (rng.random_range(1..=6), rng.random_range(1..=6)));
        (na, n, l)
    };
    for _ in 0..trials {
        let (na, n, l) = draw_shape(rng);
        let c: f64 = rng.random_range(-100.0..=100.0);
        let data = vec![c; na * n * l];
        let slice = TensorSlice::new(&data, na, n, l).expect("shape matches");
        rep.constant_trials += 1;
        if (0..n).any(|i| f.target(&slice, i) != c) {
            rep.constant_violations += 1;
        }
    }
    let mut worst_violation = 0.0;
    for _ in 0..trials {
        let (na, n, l) = draw_shape(rng);
        let len = na * n * l;
        let q: Vec<f64> = (0..len).map(|_| rng.random_range(-100.0..=100.0)).collect();
        // Half of the pairs are small perturbations, where rounding matters most.
        let q2: Vec<f64> = if rng.random::<bool>() {
            q.iter().map(|x| x + rng.random_range(-1e-3..=1e-3)).collect()
        } else {
            (0..len).map(|_| rng.random_range(-100.0..=100.0)).collect()
        };
        let dist = q.iter().zip(&q2).fold(0.0_f64, |m, (a, b)| m.max((a - b).abs()));
        let scale = q.iter().chain(&q2).fold(0.0_f64, |m, x| m.max(x.abs()));
        let s1 = TensorSlice::new(&q, na, n, l).expect("shape matches");
        let s2 = TensorSlice::new(&q2, na, n, l).expect("shape matches");
        for i in 0..n {
            rep.pair_trials += 1;
            let gap = (f.target(&s1, i) - f.target(&s2, i)).abs();
            if dist > 0.0 {
                rep.worst_ratio = rep.worst_ratio.max(gap / dist);
            }
            let excess = gap - dist;
            if excess > 16.0 * f64::EPSILON * scale.max(1.0) {
                rep.pair_violations += 1;
                if excess > worst_violation {
                    worst_violation = excess;
                    rep.witness = Some(((na, n, l), q.clone(), q2.clone(), i));
                }
            }
        }
    }
    rep
}
