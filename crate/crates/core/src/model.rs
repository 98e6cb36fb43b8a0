//! Domain types for tabular non-stationary, varying-discount MDPs.
//!
//! A model stores three time-indexed tables over `(s, a, s')`:
//! transition probabilities `p_t(s'|s,a)`, rewards `r_t(s,a,s')` and the
//! discount rates `γ_{t+1}(s,a,s')` applied to everything after the
//! transition at time `t`. The horizon embedding is built into the accessors:
//! every discount at `t >= H - 1` reads as zero and every reward at `t >= H`
//! reads as zero, so returns are always finite sums.

use rand::Rng;
use rand_distr::{Distribution, StandardNormal};
use serde::{Deserialize, Serialize};

use crate::error::{invalid, NvmdpError, Result};
use crate::scalar::Scalar;

/// A quantity defined for every time step `0..H`, stored as a small set of
/// distinct layers plus a schedule mapping each time step to its layer.
///
/// Each layer is a flat `|S| x |A| x |S|` array laid out as
/// `[(s * |A| + a) * |S| + s']`.
#[derive(Clone, Debug, PartialEq)]
pub struct TimeTable<T> {
    layers: Vec<Vec<T>>,
    schedule: Vec<usize>,
    period: Option<usize>,
}

impl<T: Scalar> TimeTable<T> {
    /// The same layer at every time step.
    pub fn constant(layer: Vec<T>, horizon: usize) -> Self {
        Self {
            layers: vec![layer],
            schedule: vec![0; horizon],
            period: Some(1),
        }
    }

    /// Layer `t mod layers.len()` at time `t`.
    pub fn periodic(layers: Vec<Vec<T>>, horizon: usize) -> Self {
        assert!(!layers.is_empty(), "periodic table needs at least one layer");
        let period = layers.len();
        Self {
            layers,
            schedule: (0..horizon).map(|t| t % period).collect(),
            period: Some(period),
        }
    }

    /// Explicit schedule; `schedule[t]` indexes into `layers`.
    pub fn scheduled(layers: Vec<Vec<T>>, schedule: Vec<usize>) -> Result<Self> {
        if let Some(&bad) = schedule.iter().find(|&&k| k >= layers.len()) {
            return Err(invalid(format!(
                "schedule references layer {bad} but only {} layers exist",
                layers.len()
            )));
        }
        Ok(Self {
            layers,
            schedule,
            period: None,
        })
    }

    /// One layer per time step.
    pub fn from_fn(horizon: usize, mut layer_at: impl FnMut(usize) -> Vec<T>) -> Self {
        Self {
            layers: (0..horizon).map(&mut layer_at).collect(),
            schedule: (0..horizon).collect(),
            period: None,
        }
    }

    pub fn horizon(&self) -> usize {
        self.schedule.len()
    }

    /// `Some(p)` when the table was built as periodic with period `p`.
    pub fn period(&self) -> Option<usize> {
        self.period
    }

    pub fn layers(&self) -> &[Vec<T>] {
        &self.layers
    }

    pub fn schedule(&self) -> &[usize] {
        &self.schedule
    }

    #[inline]
    pub fn layer(&self, t: usize) -> &[T] {
        &self.layers[self.schedule[t]]
    }

    /// First time step that reads layer `k`, used in diagnostics.
    fn first_time_of(&self, k: usize) -> usize {
        self.schedule.iter().position(|&x| x == k).unwrap_or(0)
    }
}

/// Stochastic reward law layered on top of the mean reward table.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub enum RewardNoise<T> {
    /// Rewards equal their mean.
    None,
    /// `r = mean + std * z` with `z ~ N(0, 1)`, drawn with `rand_distr::StandardNormal`
    /// (ziggurat method).
    Gaussian { std: T },
}

impl<T: Scalar> RewardNoise<T> {
    /// Label recorded alongside experiment output; the sampling method affects
    /// bit-level reproducibility.
    pub fn describe(&self) -> String {
        match self {
            RewardNoise::None => "none".to_string(),
            RewardNoise::Gaussian { std } => {
                format!("gaussian(std={std}, sampler=rand_distr::StandardNormal ziggurat)")
            }
        }
    }
}

/// Raw ingredients of a model before validation.
#[derive(Clone, Debug)]
pub struct ModelParts<T> {
    pub num_states: usize,
    pub num_actions: usize,
    pub horizon: usize,
    pub transitions: TimeTable<T>,
    pub rewards: TimeTable<T>,
    pub discounts: TimeTable<T>,
    pub start: Vec<T>,
    pub terminals: Vec<usize>,
    pub reward_noise: RewardNoise<T>,
}

/// A validated tabular NVMDP. Immutable after construction.
#[derive(Clone, Debug)]
pub struct TabularNvmdp<T> {
    num_states: usize,
    num_actions: usize,
    horizon: usize,
    transitions: TimeTable<T>,
    rewards: TimeTable<T>,
    discounts: TimeTable<T>,
    start: Vec<T>,
    terminal: Vec<bool>,
    reward_noise: RewardNoise<T>,
}

fn normalize_row<T: Scalar>(row: &mut [T], what: impl Fn() -> String) -> Result<()> {
    let mut sum = T::zero();
    for p in row.iter() {
        if !p.is_finite() || *p < T::zero() {
            return Err(invalid(format!("{} has invalid probability {p}", what())));
        }
        sum += *p;
    }
    if (sum - T::one()).abs() > T::row_tolerance() {
        return Err(invalid(format!("{} sums to {sum}, expected 1", what())));
    }
    // Rows already normalized to rounding stay bit-identical.
    if (sum - T::one()).abs() > T::lit(4.0) * T::epsilon() {
        for p in row.iter_mut() {
            *p /= sum;
        }
    }
    Ok(())
}

impl<T: Scalar> TabularNvmdp<T> {
    /// Validates the parts and builds the model.
    ///
    /// Probability rows must sum to one within [`Scalar::row_tolerance`] and
    /// are then renormalized. Terminal states are rewritten as absorbing
    /// self-loops and every discount into a terminal state is set to zero.
    pub fn new(parts: ModelParts<T>) -> Result<Self> {
        let ModelParts {
            num_states: ns,
            num_actions: na,
            horizon,
            mut transitions,
            rewards,
            mut discounts,
            mut start,
            terminals,
            reward_noise,
        } = parts;
        if ns == 0 || na == 0 || horizon == 0 {
            return Err(invalid(format!(
                "state count, action count and horizon must be positive (got {ns}, {na}, {horizon})"
            )));
        }
        let layer_len = ns * na * ns;
        for (name, table) in [
            ("transitions", &transitions),
            ("rewards", &rewards),
            ("discounts", &discounts),
        ] {
            if table.horizon() != horizon {
                return Err(NvmdpError::Dimension(format!(
                    "{name} cover {} time steps, horizon is {horizon}",
                    table.horizon()
                )));
            }
            if let Some(k) = table.layers.iter().position(|l| l.len() != layer_len) {
                return Err(NvmdpError::Dimension(format!(
                    "{name} layer {k} has {} entries, expected {layer_len}",
                    table.layers[k].len()
                )));
            }
        }
        if start.len() != ns {
            return Err(NvmdpError::Dimension(format!(
                "start distribution has {} entries, expected {ns}",
                start.len()
            )));
        }
        if let Some(&s) = terminals.iter().find(|&&s| s >= ns) {
            return Err(NvmdpError::OutOfRange(format!("terminal state {s} >= {ns}")));
        }
        let mut terminal = vec![false; ns];
        for &s in &terminals {
            terminal[s] = true;
        }

        for k in 0..transitions.layers.len() {
            let t = transitions.first_time_of(k);
            let layer = &mut transitions.layers[k];
            for s in 0..ns {
                for a in 0..na {
                    let row = &mut layer[(s * na + a) * ns..(s * na + a + 1) * ns];
                    if terminal[s] {
                        row.iter_mut().for_each(|p| *p = T::zero());
                        row[s] = T::one();
                    } else {
                        normalize_row(row, || format!("transition row (t={t}, s={s}, a={a})"))?;
                    }
                }
            }
        }
        for (k, layer) in rewards.layers.iter().enumerate() {
            if let Some(i) = layer.iter().position(|r| !r.is_finite()) {
                let (s, a, s2) = (i / (na * ns), (i / ns) % na, i % ns);
                return Err(invalid(format!(
                    "reward (t={}, s={s}, a={a}, s'={s2}) is not finite",
                    rewards.first_time_of(k)
                )));
            }
        }
        for k in 0..discounts.layers.len() {
            let t = discounts.first_time_of(k);
            let layer = &mut discounts.layers[k];
            for (i, g) in layer.iter_mut().enumerate() {
                let (s, a, s2) = (i / (na * ns), (i / ns) % na, i % ns);
                if !g.is_finite() || *g < T::zero() {
                    return Err(invalid(format!(
                        "discount (t={t}, s={s}, a={a}, s'={s2}) = {g} must be finite and non-negative"
                    )));
                }
                if terminal[s2] {
                    *g = T::zero();
                }
            }
        }
        normalize_row(&mut start, || "start distribution".to_string())?;
        if let RewardNoise::Gaussian { std } = reward_noise {
            if !std.is_finite() || std < T::zero() {
                return Err(invalid(format!("reward noise std {std} must be non-negative")));
            }
        }

        Ok(Self {
            num_states: ns,
            num_actions: na,
            horizon,
            transitions,
            rewards,
            discounts,
            start,
            terminal,
            reward_noise,
        })
    }

    pub fn num_states(&self) -> usize {
        self.num_states
    }

    pub fn num_actions(&self) -> usize {
        self.num_actions
    }

    pub fn horizon(&self) -> usize {
        self.horizon
    }

    pub fn start(&self) -> &[T] {
        &self.start
    }

    pub fn is_terminal(&self, s: usize) -> bool {
        self.terminal[s]
    }

    pub fn terminals(&self) -> Vec<usize> {
        (0..self.num_states).filter(|&s| self.terminal[s]).collect()
    }

    pub fn reward_noise(&self) -> RewardNoise<T> {
        self.reward_noise
    }

    pub fn transitions(&self) -> &TimeTable<T> {
        &self.transitions
    }

    pub fn rewards(&self) -> &TimeTable<T> {
        &self.rewards
    }

    pub fn discounts(&self) -> &TimeTable<T> {
        &self.discounts
    }

    #[inline]
    fn row_range(&self, s: usize, a: usize) -> std::ops::Range<usize> {
        let base = (s * self.num_actions + a) * self.num_states;
        base..base + self.num_states
    }

    /// `p_t(· | s, a)` for `t < H`.
    #[inline]
    pub fn transition_row(&self, t: usize, s: usize, a: usize) -> &[T] {
        &self.transitions.layer(t)[self.row_range(s, a)]
    }

    /// `r_t(s, a, ·)` for `t < H`.
    #[inline]
    pub fn reward_row(&self, t: usize, s: usize, a: usize) -> &[T] {
        &self.rewards.layer(t)[self.row_range(s, a)]
    }

    /// Stored discount row `γ_{t+1}(s, a, ·)` without the horizon embedding.
    #[inline]
    fn raw_discount_row(&self, t: usize, s: usize, a: usize) -> &[T] {
        &self.discounts.layer(t)[self.row_range(s, a)]
    }

    /// Mean reward `r_t(s, a, s')`; zero for `t >= H`.
    #[inline]
    pub fn reward(&self, t: usize, s: usize, a: usize, next: usize) -> T {
        if t >= self.horizon {
            T::zero()
        } else {
            self.reward_row(t, s, a)[next]
        }
    }

    /// Effective discount `γ_{t+1}(s, a, s')`; zero for `t >= H - 1`.
    #[inline]
    pub fn discount(&self, t: usize, s: usize, a: usize, next: usize) -> T {
        if t + 1 >= self.horizon {
            T::zero()
        } else {
            self.raw_discount_row(t, s, a)[next]
        }
    }

    /// `r̄_t(s, a) = E_{s'}[r_t(s, a, s')]`.
    pub fn mean_reward(&self, t: usize, s: usize, a: usize) -> T {
        if t >= self.horizon {
            return T::zero();
        }
        self.transition_row(t, s, a)
            .iter()
            .zip(self.reward_row(t, s, a))
            .map(|(&p, &r)| p * r)
            .sum()
    }

    /// `E_{s'}[γ_{t+1}(s, a, s') · f(s')]` by exact summation.
    pub fn expected_discounted(&self, t: usize, s: usize, a: usize, f: impl Fn(usize) -> T) -> T {
        if t + 1 >= self.horizon {
            return T::zero();
        }
        let p = self.transition_row(t, s, a);
        let g = self.raw_discount_row(t, s, a);
        let mut acc = T::zero();
        for s2 in 0..self.num_states {
            if p[s2] != T::zero() && g[s2] != T::zero() {
                acc += p[s2] * g[s2] * f(s2);
            }
        }
        acc
    }

    /// Largest effective discount over all `(s, a, s')` at transition time `t`.
    pub fn max_discount(&self, t: usize) -> T {
        if t + 1 >= self.horizon {
            return T::zero();
        }
        self.discounts
            .layer(t)
            .iter()
            .fold(T::zero(), |m, &g| if g > m { g } else { m })
    }

    /// `R_B`: the largest absolute mean reward over `t < H`.
    pub fn reward_bound(&self) -> T {
        let mut bound = T::zero();
        for k in 0..self.rewards.layers.len() {
            for &r in &self.rewards.layers[k] {
                bound = bound.max(r.abs());
            }
        }
        bound
    }

    /// Samples the next state from `p_t(· | s, a)` using a uniform draw in `[0, 1)`.
    pub fn next_state_from_uniform(&self, t: usize, s: usize, a: usize, u: f64) -> usize {
        let row = self.transition_row(t, s, a);
        let mut acc = 0.0;
        let mut last_positive = s;
        for (s2, &p) in row.iter().enumerate() {
            let p = p.as_f64();
            if p > 0.0 {
                acc += p;
                last_positive = s2;
                if u < acc {
                    return s2;
                }
            }
        }
        last_positive
    }

    pub fn sample_next_state<R: Rng + ?Sized>(&self, t: usize, s: usize, a: usize, rng: &mut R) -> usize {
        let u: f64 = rng.random();
        self.next_state_from_uniform(t, s, a, u)
    }

    /// Draws a reward for the transition `(s, a) -> next` at time `t`.
    ///
    /// Consumes exactly one standard normal draw when the model has Gaussian
    /// reward noise and nothing otherwise.
    pub fn sample_reward<R: Rng + ?Sized>(&self, t: usize, s: usize, a: usize, next: usize, rng: &mut R) -> T {
        let mean = self.reward(t, s, a, next);
        match self.reward_noise {
            RewardNoise::None => mean,
            RewardNoise::Gaussian { std } => {
                let z: f64 = StandardNormal.sample(rng);
                mean + std * T::lit(z)
            }
        }
    }

    /// Same model with the reward table replaced.
    pub fn with_rewards(&self, rewards: TimeTable<T>) -> Result<Self> {
        Self::new(ModelParts {
            num_states: self.num_states,
            num_actions: self.num_actions,
            horizon: self.horizon,
            transitions: self.transitions.clone(),
            rewards,
            discounts: self.discounts.clone(),
            start: self.start.clone(),
            terminals: self.terminals(),
            reward_noise: self.reward_noise,
        })
    }

    /// Upper bound `V_B = R_B · Γ_B` on every `|V_t(s)|` and `|Q_t(s, a)|`,
    /// with `Γ_B` built from per-step maximum discounts.
    pub fn value_bound(&self) -> T {
        // B_t = 1 + m_t · B_{t+1}, B_H = 0, where m_t is the max discount at t.
        let mut running = T::zero();
        let mut worst = T::zero();
        for t in (0..self.horizon).rev() {
            running = T::one() + self.max_discount(t) * running;
            worst = worst.max(running);
        }
        self.reward_bound() * worst
    }
}

/// One transition `(s, a) -> s'` of a trajectory.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct Transition {
    pub state: usize,
    pub action: usize,
    pub next_state: usize,
}

impl Transition {
    pub fn new(state: usize, action: usize, next_state: usize) -> Self {
        Self {
            state,
            action,
            next_state,
        }
    }
}

fn check_chain<T: Scalar>(model: &TabularNvmdp<T>, steps: impl Iterator<Item = Transition>) -> Result<()> {
    let mut prev: Option<usize> = None;
    for (k, step) in steps.enumerate() {
        if step.state >= model.num_states
            || step.next_state >= model.num_states
            || step.action >= model.num_actions
        {
            return Err(NvmdpError::OutOfRange(format!("trajectory step {k}: {step:?}")));
        }
        if let Some(p) = prev {
            if p != step.state {
                return Err(invalid(format!(
                    "trajectory step {k} starts in state {} but the previous step ended in {p}",
                    step.state
                )));
            }
        }
        prev = Some(step.next_state);
    }
    Ok(())
}

/// `Γ_{t,t+k}`: product of the discounts along `k` transitions starting at time `t`.
/// The empty product is one.
pub fn discount_product<T: Scalar>(model: &TabularNvmdp<T>, steps: &[Transition], t: usize) -> Result<T> {
    check_chain(model, steps.iter().copied())?;
    Ok(steps
        .iter()
        .enumerate()
        .fold(T::one(), |acc, (k, st)| {
            acc * model.discount(t + k, st.state, st.action, st.next_state)
        }))
}

/// Discounted return `Σ_i Γ_{t,i} r_i` of a trajectory that starts at time `t`.
pub fn return_of_trajectory<T: Scalar>(
    model: &TabularNvmdp<T>,
    steps: &[(Transition, T)],
    t: usize,
) -> Result<T> {
    check_chain(model, steps.iter().map(|(s, _)| *s))?;
    if t + steps.len() > model.horizon {
        return Err(invalid(format!(
            "trajectory of length {} starting at t={t} exceeds horizon {}",
            steps.len(),
            model.horizon
        )));
    }
    let mut gamma = T::one();
    let mut total = T::zero();
    for (k, (st, r)) in steps.iter().enumerate() {
        total += gamma * *r;
        gamma *= model.discount(t + k, st.state, st.action, st.next_state);
    }
    Ok(total)
}

/// A policy made of one sub-policy `π_t(a|s)` per time step `0..H`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct TimePolicy<T> {
    horizon: usize,
    num_states: usize,
    num_actions: usize,
    probs: Vec<T>,
}

impl<T: Scalar> TimePolicy<T> {
    pub fn uniform(horizon: usize, num_states: usize, num_actions: usize) -> Self {
        let p = T::one() / T::lit(num_actions as f64);
        Self {
            horizon,
            num_states,
            num_actions,
            probs: vec![p; horizon * num_states * num_actions],
        }
    }

    /// `actions[t * |S| + s]` is chosen with probability one.
    pub fn deterministic(horizon: usize, num_states: usize, num_actions: usize, actions: &[usize]) -> Result<Self> {
        if actions.len() != horizon * num_states {
            return Err(NvmdpError::Dimension(format!(
                "{} actions given for {horizon} x {num_states} time-state pairs",
                actions.len()
            )));
        }
        let mut probs = vec![T::zero(); horizon * num_states * num_actions];
        for (i, &a) in actions.iter().enumerate() {
            if a >= num_actions {
                return Err(NvmdpError::OutOfRange(format!("action {a} >= {num_actions}")));
            }
            probs[i * num_actions + a] = T::one();
        }
        Ok(Self {
            horizon,
            num_states,
            num_actions,
            probs,
        })
    }

    /// Validates and renormalizes a flat `[t][s][a]` probability array.
    pub fn from_probs(horizon: usize, num_states: usize, num_actions: usize, mut probs: Vec<T>) -> Result<Self> {
        if probs.len() != horizon * num_states * num_actions {
            return Err(NvmdpError::Dimension(format!(
                "policy has {} entries, expected {}",
                probs.len(),
                horizon * num_states * num_actions
            )));
        }
        for t in 0..horizon {
            for s in 0..num_states {
                let base = (t * num_states + s) * num_actions;
                normalize_row(&mut probs[base..base + num_actions], || {
                    format!("policy row (t={t}, s={s})")
                })?;
            }
        }
        Ok(Self {
            horizon,
            num_states,
            num_actions,
            probs,
        })
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

    #[inline]
    pub fn row(&self, t: usize, s: usize) -> &[T] {
        let base = (t * self.num_states + s) * self.num_actions;
        &self.probs[base..base + self.num_actions]
    }

    #[inline]
    pub fn prob(&self, t: usize, s: usize, a: usize) -> T {
        self.row(t, s)[a]
    }

    /// Replaces `π_t(·|s)`.
    pub fn set_row(&mut self, t: usize, s: usize, row: &[T]) -> Result<()> {
        if row.len() != self.num_actions {
            return Err(NvmdpError::Dimension(format!(
                "row has {} entries, expected {}",
                row.len(),
                self.num_actions
            )));
        }
        let mut row = row.to_vec();
        normalize_row(&mut row, || format!("policy row (t={t}, s={s})"))?;
        let base = (t * self.num_states + s) * self.num_actions;
        self.probs[base..base + self.num_actions].copy_from_slice(&row);
        Ok(())
    }

    /// Applies sub-policy `π_k` at every time step.
    pub fn replicate(&self, k: usize) -> Self {
        let block = self.num_states * self.num_actions;
        let sub = &self.probs[k * block..(k + 1) * block];
        Self {
            horizon: self.horizon,
            num_states: self.num_states,
            num_actions: self.num_actions,
            probs: sub.repeat(self.horizon),
        }
    }

    pub fn probs(&self) -> &[T] {
        &self.probs
    }
}

/// `V_t(s)` for `t in 0..=H`; the row at `t = H` is always zero.
#[derive(Clone, Debug, PartialEq)]
pub struct ValueTable<T> {
    horizon: usize,
    num_states: usize,
    values: Vec<T>,
}

impl<T: Scalar> ValueTable<T> {
    pub fn zeros(horizon: usize, num_states: usize) -> Self {
        Self {
            horizon,
            num_states,
            values: vec![T::zero(); (horizon + 1) * num_states],
        }
    }

    pub fn horizon(&self) -> usize {
        self.horizon
    }

    pub fn num_states(&self) -> usize {
        self.num_states
    }

    #[inline]
    pub fn get(&self, t: usize, s: usize) -> T {
        self.values[t * self.num_states + s]
    }

    #[inline]
    pub fn set(&mut self, t: usize, s: usize, v: T) {
        debug_assert!(t < self.horizon, "the boundary row t = H stays zero");
        self.values[t * self.num_states + s] = v;
    }

    pub fn at_time(&self, t: usize) -> &[T] {
        &self.values[t * self.num_states..(t + 1) * self.num_states]
    }

    pub fn as_nested(&self) -> Vec<Vec<T>> {
        (0..=self.horizon).map(|t| self.at_time(t).to_vec()).collect()
    }
}

/// `Q_t(s, a)` for `t in 0..=H`; the block at `t = H` is always zero.
#[derive(Clone, Debug, PartialEq)]
pub struct QTable<T> {
    horizon: usize,
    num_states: usize,
    num_actions: usize,
    values: Vec<T>,
}

impl<T: Scalar> QTable<T> {
    pub fn zeros(horizon: usize, num_states: usize, num_actions: usize) -> Self {
        Self {
            horizon,
            num_states,
            num_actions,
            values: vec![T::zero(); (horizon + 1) * num_states * num_actions],
        }
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

    #[inline]
    fn index(&self, t: usize, s: usize, a: usize) -> usize {
        (t * self.num_states + s) * self.num_actions + a
    }

    #[inline]
    pub fn get(&self, t: usize, s: usize, a: usize) -> T {
        self.values[self.index(t, s, a)]
    }

    #[inline]
    pub fn set(&mut self, t: usize, s: usize, a: usize, v: T) {
        debug_assert!(t < self.horizon, "the boundary block t = H stays zero");
        let i = self.index(t, s, a);
        self.values[i] = v;
    }

    #[inline]
    pub fn row(&self, t: usize, s: usize) -> &[T] {
        let i = self.index(t, s, 0);
        &self.values[i..i + self.num_actions]
    }

    /// `Q_t` flattened in `(s, a)` order.
    pub fn at_time(&self, t: usize) -> &[T] {
        let block = self.num_states * self.num_actions;
        &self.values[t * block..(t + 1) * block]
    }

    pub fn as_nested(&self) -> Vec<Vec<Vec<T>>> {
        (0..=self.horizon)
            .map(|t| (0..self.num_states).map(|s| self.row(t, s).to_vec()).collect())
            .collect()
    }
}

/// `A_t(s, a) = Q_t(s, a) - V_t(s)`.
pub fn advantage<T: Scalar>(q: &QTable<T>, v: &ValueTable<T>, t: usize, s: usize, a: usize) -> Result<T> {
    if q.horizon != v.horizon || q.num_states != v.num_states {
        return Err(NvmdpError::Dimension(format!(
            "Q table ({} x {}) and value table ({} x {}) disagree",
            q.horizon, q.num_states, v.horizon, v.num_states
        )));
    }
    if t > q.horizon || s >= q.num_states || a >= q.num_actions {
        return Err(NvmdpError::OutOfRange(format!("(t={t}, s={s}, a={a})")));
    }
    Ok(q.get(t, s, a) - v.get(t, s))
}

/// A realized trajectory, scored with mean rewards.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct Rollout<T> {
    /// Visited states, starting state first.
    pub states: Vec<usize>,
    pub actions: Vec<usize>,
    /// Mean rewards `r_t(s, a, s')` of each transition.
    pub rewards: Vec<T>,
    pub discounted_return: T,
    pub reached_terminal: bool,
}

impl<T: Scalar> Rollout<T> {
    pub fn steps(&self) -> usize {
        self.actions.len()
    }

    pub fn visits_any(&self, states: &[usize]) -> bool {
        self.states.iter().any(|s| states.contains(s))
    }
}

/// Follows `policy(t, s)` from `start` until a terminal state or the horizon.
///
/// Transitions are sampled with `rng`; rewards are the noiseless means.
pub fn rollout<T: Scalar, R: Rng + ?Sized>(
    model: &TabularNvmdp<T>,
    start: usize,
    mut policy: impl FnMut(usize, usize) -> usize,
    rng: &mut R,
) -> Rollout<T> {
    let mut out = Rollout {
        states: vec![start],
        actions: Vec::new(),
        rewards: Vec::new(),
        discounted_return: T::zero(),
        reached_terminal: model.is_terminal(start),
    };
    let mut s = start;
    let mut gamma = T::one();
    let mut t = 0;
    while t < model.horizon() && !model.is_terminal(s) {
        let a = policy(t, s);
        let next = model.sample_next_state(t, s, a, rng);
        let r = model.reward(t, s, a, next);
        out.discounted_return += gamma * r;
        gamma *= model.discount(t, s, a, next);
        out.actions.push(a);
        out.rewards.push(r);
        out.states.push(next);
        s = next;
        t += 1;
    }
    out.reached_terminal = model.is_terminal(s);
    out
}

/// Index of the most likely start state (lowest index on ties).
pub fn most_likely_start<T: Scalar>(model: &TabularNvmdp<T>) -> usize {
    crate::scalar::argmax(model.start())
}

#[cfg(test)]
mod tests {
    use super::*;

    /// Single-state, single-action model with constant reward and discount.
    fn scalar_model(horizon: usize, reward: f64, gamma: f64) -> TabularNvmdp<f64> {
        TabularNvmdp::new(ModelParts {
            num_states: 1,
            num_actions: 1,
            horizon,
            transitions: TimeTable::constant(vec![1.0], horizon),
            rewards: TimeTable::constant(vec![reward], horizon),
            discounts: TimeTable::constant(vec![gamma], horizon),
            start: vec![1.0],
            terminals: vec![],
            reward_noise: RewardNoise::None,
        })
        .unwrap()
    }

    #[test]
    fn empty_trajectory_has_unit_discount_product() {
        let m = scalar_model(5, 1.0, 0.5);
        assert_eq!(discount_product(&m, &[], 0).unwrap(), 1.0);
    }

    #[test]
    fn constant_discount_product_matches_power() {
        let m = scalar_model(200, -10.0, 0.999);
        let steps = vec![Transition::new(0, 0, 0); 12];
        let got = discount_product(&m, &steps, 0).unwrap();
        let mut oracle = 1.0;
        for _ in 0..12 {
            oracle *= 0.999;
        }
        assert!((got - oracle).abs() < 1e-15);
        assert!((got - 0.999f64.powi(12)).abs() < 1e-14);
        assert!((got - 0.988066).abs() < 1e-6);
    }

    #[test]
    fn zero_discount_absorbs_the_product() {
        let m = scalar_model(10, 1.0, 0.0);
        let steps = vec![Transition::new(0, 0, 0); 3];
        assert_eq!(discount_product(&m, &steps, 0).unwrap(), 0.0);
    }

    #[test]
    fn inconsistent_chain_is_rejected() {
        let m = TabularNvmdp::new(ModelParts {
            num_states: 2,
            num_actions: 1,
            horizon: 4,
            transitions: TimeTable::constant(vec![0.5, 0.5, 0.5, 0.5], 4),
            rewards: TimeTable::constant(vec![0.0; 4], 4),
            discounts: TimeTable::constant(vec![1.0; 4], 4),
            start: vec![1.0, 0.0],
            terminals: vec![],
            reward_noise: RewardNoise::None,
        })
        .unwrap();
        let steps = [Transition::new(0, 0, 1), Transition::new(0, 0, 1)];
        assert!(matches!(
            discount_product(&m, &steps, 0),
            Err(NvmdpError::Validation(_))
        ));
    }

    #[test]
    fn returns_of_simple_trajectories() {
        let m = scalar_model(200, -10.0, 0.999);
        let step = (Transition::new(0, 0, 0), 0.0);
        assert_eq!(return_of_trajectory(&m, &vec![step; 7], 0).unwrap(), 0.0);

        let steps = vec![(Transition::new(0, 0, 0), -10.0); 12];
        let g = return_of_trajectory(&m, &steps, 0).unwrap();
        let oracle = -10.0 * (1.0 - 0.999f64.powi(12)) / 0.001;
        assert!((g - oracle).abs() < 1e-9);
        assert!((g + 119.342195).abs() < 1e-6);

        let m = scalar_model(10, 5.0, 0.3);
        let single = [(Transition::new(0, 0, 0), 5.0)];
        assert_eq!(return_of_trajectory(&m, &single, 4).unwrap(), 5.0);
    }

    #[test]
    fn trajectory_longer_than_horizon_is_rejected() {
        let m = scalar_model(3, 1.0, 0.5);
        let steps = vec![(Transition::new(0, 0, 0), 1.0); 3];
        assert!(return_of_trajectory(&m, &steps, 1).is_err());
    }

    #[test]
    fn horizon_embedding_zeroes_late_discounts() {
        let m = scalar_model(4, 1.0, 0.9);
        assert_eq!(m.discount(2, 0, 0, 0), 0.9);
        assert_eq!(m.discount(3, 0, 0, 0), 0.0);
        assert_eq!(m.reward(4, 0, 0, 0), 0.0);
        assert_eq!(m.max_discount(3), 0.0);
    }

    #[test]
    fn value_bound_examples() {
        assert_eq!(scalar_model(50, 0.0, 0.999).value_bound(), 0.0);
        assert_eq!(scalar_model(1, 7.0, 0.9).value_bound(), 7.0);
        // oracle: geometric sum 10 * sum_{i=0}^{199} 0.999^i
        let oracle: f64 = (0..200).map(|i| 10.0 * 0.999f64.powi(i)).sum();
        let got = scalar_model(200, -10.0, 0.999).value_bound();
        assert!((got - oracle).abs() < 1e-9);
        assert!((got - 1813.5117052136).abs() < 1e-6);
    }

    #[test]
    fn advantage_arithmetic_and_errors() {
        let mut q = QTable::<f64>::zeros(2, 1, 2);
        let mut v = ValueTable::<f64>::zeros(2, 1);
        q.set(0, 0, 1, 3.0);
        v.set(0, 0, 1.0);
        assert_eq!(advantage(&q, &v, 0, 0, 1).unwrap(), 2.0);
        assert!(advantage(&q, &v, 0, 0, 2).is_err());
        let v3 = ValueTable::<f64>::zeros(3, 1);
        assert!(advantage(&q, &v3, 0, 0, 0).is_err());
    }

    #[test]
    fn row_validation_names_the_row() {
        let err = TabularNvmdp::new(ModelParts {
            num_states: 2,
            num_actions: 1,
            horizon: 2,
            transitions: TimeTable::from_fn(2, |t| {
                if t == 1 {
                    vec![0.5, 0.4, 1.0, 0.0]
                } else {
                    vec![0.5, 0.5, 1.0, 0.0]
                }
            }),
            rewards: TimeTable::constant(vec![0.0; 4], 2),
            discounts: TimeTable::constant(vec![1.0; 4], 2),
            start: vec![1.0, 0.0],
            terminals: vec![],
            reward_noise: RewardNoise::None,
        })
        .unwrap_err();
        let msg = err.to_string();
        assert!(msg.contains("t=1, s=0, a=0"), "{msg}");
    }

    #[test]
    fn negative_discount_is_rejected() {
        let err = TabularNvmdp::new(ModelParts {
            num_states: 1,
            num_actions: 1,
            horizon: 2,
            transitions: TimeTable::constant(vec![1.0], 2),
            rewards: TimeTable::constant(vec![0.0], 2),
            discounts: TimeTable::constant(vec![-0.1], 2),
            start: vec![1.0],
            terminals: vec![],
            reward_noise: RewardNoise::None,
        });
        assert!(err.is_err());
    }

    #[test]
    fn terminals_become_absorbing_with_zero_inbound_discount() {
        let m = TabularNvmdp::new(ModelParts {
            num_states: 2,
            num_actions: 1,
            horizon: 5,
            transitions: TimeTable::constant(vec![0.0, 1.0, 0.5, 0.5], 5),
            rewards: TimeTable::constant(vec![1.0; 4], 5),
            discounts: TimeTable::constant(vec![0.9; 4], 5),
            start: vec![1.0, 0.0],
            terminals: vec![1],
            reward_noise: RewardNoise::None,
        })
        .unwrap();
        assert_eq!(m.transition_row(0, 1, 0), &[0.0, 1.0]);
        assert_eq!(m.discount(0, 0, 0, 1), 0.0);
        assert_eq!(m.discount(0, 0, 0, 0), 0.9);
    }

    #[test]
    fn f32_models_work() {
        let m = TabularNvmdp::<f32>::new(ModelParts {
            num_states: 1,
            num_actions: 1,
            horizon: 3,
            transitions: TimeTable::constant(vec![1.0], 3),
            rewards: TimeTable::constant(vec![2.0], 3),
            discounts: TimeTable::constant(vec![0.5], 3),
            start: vec![1.0],
            terminals: vec![],
            reward_noise: RewardNoise::None,
        })
        .unwrap();
        assert_eq!(m.value_bound(), 2.0 * 1.75);
    }
}
