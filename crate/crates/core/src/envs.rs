//! Environment builders: the windy 8x3 gridworld, its stationary vanilla
//! version, a JSON loader/dumper for arbitrary tabular models and a random
//! instance generator.
//!
//! Grid cells are labelled `(x, y)` with `1 <= x <= 8` and `1 <= y <= 3`.
//! Cell `(x, y)` is state `(y - 1) * 8 + (x - 1)`; one extra absorbing
//! terminal state follows the cells. Actions are `0 = up (y + 1)`,
//! `1 = down`, `2 = left`, `3 = right`.

use std::path::Path;
use std::str::FromStr;

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::error::{invalid, NvmdpError, Result};
use crate::model::{ModelParts, RewardNoise, TabularNvmdp, TimeTable};
use crate::scalar::Scalar;

pub const ACTION_NAMES: [&str; 4] = ["up", "down", "left", "right"];

/// Cells whose inbound discount is raised under the avoidance schemes.
pub const AVOID_CELLS: [(usize, usize); 2] = [(3, 1), (4, 2)];

/// Step reward law of the gridworld.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum RewardScheme {
    /// Always the mean, -10.
    #[serde(rename = "deterministic")]
    Deterministic,
    /// `-10 + 3.0398 z`, 90% of draws in about `[-15, -5]`.
    #[serde(rename = "r-lvn")]
    LargeNoise,
    /// `-10 + 0.6080 z`, 90% of draws in about `[-11, -9]`.
    #[serde(rename = "r-svn")]
    SmallNoise,
}

impl RewardScheme {
    pub const ALL: [RewardScheme; 3] = [Self::Deterministic, Self::LargeNoise, Self::SmallNoise];

    pub fn name(self) -> &'static str {
        match self {
            Self::Deterministic => "deterministic",
            Self::LargeNoise => "r-lvn",
            Self::SmallNoise => "r-svn",
        }
    }

    pub fn noise_std(self) -> Option<f64> {
        match self {
            Self::Deterministic => None,
            Self::LargeNoise => Some(3.0398),
            Self::SmallNoise => Some(0.6080),
        }
    }
}

impl FromStr for RewardScheme {
    type Err = NvmdpError;

    fn from_str(s: &str) -> Result<Self> {
        Self::ALL
            .into_iter()
            .find(|x| x.name() == s)
            .ok_or_else(|| NvmdpError::UnknownName {
                kind: "reward scheme",
                name: s.to_string(),
            })
    }
}

impl std::fmt::Display for RewardScheme {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(self.name())
    }
}

/// Discount configuration of the gridworld.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum DiscountScheme {
    /// 0.999 everywhere.
    #[serde(rename = "dr-0")]
    Dr0,
    /// 1.02 into the avoidance cells, else 0.999.
    #[serde(rename = "dr-1")]
    Dr1,
    /// As `Dr1` for transitions at `t < 50`, 0.999 afterwards.
    #[serde(rename = "dr-2")]
    Dr2,
    /// 1.05 into the avoidance cells for `t < 50`, else 0.999.
    #[serde(rename = "dr-3")]
    Dr3,
}

impl DiscountScheme {
    pub const ALL: [DiscountScheme; 4] = [Self::Dr0, Self::Dr1, Self::Dr2, Self::Dr3];

    pub fn name(self) -> &'static str {
        match self {
            Self::Dr0 => "dr-0",
            Self::Dr1 => "dr-1",
            Self::Dr2 => "dr-2",
            Self::Dr3 => "dr-3",
        }
    }

    /// Discount applied to the transition at time `t` landing on `cell`.
    pub fn rate(self, t: usize, cell: (usize, usize)) -> f64 {
        const BASE: f64 = 0.999;
        let special = AVOID_CELLS.contains(&cell);
        match self {
            Self::Dr0 => BASE,
            Self::Dr1 if special => 1.02,
            Self::Dr2 if special && t < 50 => 1.02,
            Self::Dr3 if special && t < 50 => 1.05,
            _ => BASE,
        }
    }

    /// First time step from which the scheme no longer changes, if any.
    fn switch_time(self) -> Option<usize> {
        match self {
            Self::Dr2 | Self::Dr3 => Some(50),
            _ => None,
        }
    }
}

impl FromStr for DiscountScheme {
    type Err = NvmdpError;

    fn from_str(s: &str) -> Result<Self> {
        Self::ALL
            .into_iter()
            .find(|x| x.name() == s)
            .ok_or_else(|| NvmdpError::UnknownName {
                kind: "discount scheme",
                name: s.to_string(),
            })
    }
}

impl std::fmt::Display for DiscountScheme {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(self.name())
    }
}

/// Leftward wind on one column, calm at the listed phases of `t mod period`.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct WindRule {
    pub column: usize,
    pub push: usize,
    pub calm_phases: Vec<usize>,
}

/// Full description of a gridworld instance.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct GridworldSpec {
    pub width: usize,
    pub height: usize,
    pub start: (usize, usize),
    pub target: (usize, usize),
    pub horizon: usize,
    pub wind_period: usize,
    pub wind: Vec<WindRule>,
    pub step_reward: f64,
    pub reward_scheme: RewardScheme,
    pub discount_scheme: DiscountScheme,
}

impl GridworldSpec {
    pub fn tricky(reward_scheme: RewardScheme, discount_scheme: DiscountScheme) -> Self {
        Self {
            wind: vec![
                WindRule {
                    column: 5,
                    push: 2,
                    calm_phases: vec![0],
                },
                WindRule {
                    column: 6,
                    push: 3,
                    calm_phases: vec![1, 2, 3, 4],
                },
                WindRule {
                    column: 7,
                    push: 4,
                    calm_phases: vec![5],
                },
            ],
            reward_scheme,
            discount_scheme,
            ..Self::vanilla()
        }
    }

    pub fn vanilla() -> Self {
        Self {
            width: 8,
            height: 3,
            start: (1, 1),
            target: (8, 3),
            horizon: 200,
            wind_period: 6,
            wind: Vec::new(),
            step_reward: -10.0,
            reward_scheme: RewardScheme::Deterministic,
            discount_scheme: DiscountScheme::Dr0,
        }
    }

    pub fn num_cells(&self) -> usize {
        self.width * self.height
    }

    /// Index of the absorbing terminal state.
    pub fn terminal_state(&self) -> usize {
        self.num_cells()
    }

    pub fn num_states(&self) -> usize {
        self.num_cells() + 1
    }

    pub fn state_of(&self, (x, y): (usize, usize)) -> usize {
        debug_assert!((1..=self.width).contains(&x) && (1..=self.height).contains(&y));
        (y - 1) * self.width + (x - 1)
    }

    /// Cell label of a state; the terminal state maps to the target cell.
    pub fn cell_of(&self, state: usize) -> (usize, usize) {
        if state >= self.num_cells() {
            return self.target;
        }
        (state % self.width + 1, state / self.width + 1)
    }

    /// Leftward displacement acting on column `x` at time `t`.
    pub fn wind_push(&self, t: usize, x: usize) -> usize {
        let phase = t % self.wind_period;
        self.wind
            .iter()
            .filter(|w| w.column == x && !w.calm_phases.contains(&phase))
            .map(|w| w.push)
            .sum()
    }

    /// Cell reached from `cell` at time `t` with `action`: wind first (once,
    /// clamped at column 1), then the move (clamped at the border).
    pub fn next_cell(&self, t: usize, (x, y): (usize, usize), action: usize) -> (usize, usize) {
        let x = x.saturating_sub(self.wind_push(t, x)).max(1);
        match action {
            0 => (x, (y + 1).min(self.height)),
            1 => (x, y.saturating_sub(1).max(1)),
            2 => (x.saturating_sub(1).max(1), y),
            3 => ((x + 1).min(self.width), y),
            _ => panic!("action {action} out of range"),
        }
    }

    /// Successor state including the jump into the terminal on reaching the target.
    pub fn next_state(&self, t: usize, state: usize, action: usize) -> usize {
        if state >= self.num_cells() {
            return state;
        }
        let cell = self.next_cell(t, self.cell_of(state), action);
        if cell == self.target {
            self.terminal_state()
        } else {
            self.state_of(cell)
        }
    }

    fn check(&self) -> Result<()> {
        let inside = |(x, y): (usize, usize)| (1..=self.width).contains(&x) && (1..=self.height).contains(&y);
        if self.width == 0 || self.height == 0 || self.horizon == 0 || self.wind_period == 0 {
            return Err(invalid("grid dimensions, horizon and wind period must be positive"));
        }
        if !inside(self.start) || !inside(self.target) || self.start == self.target {
            return Err(invalid(format!(
                "start {:?} and target {:?} must be distinct cells of the {}x{} grid",
                self.start, self.target, self.width, self.height
            )));
        }
        if let Some(w) = self.wind.iter().find(|w| !(1..=self.width).contains(&w.column)) {
            return Err(invalid(format!("wind column {} is outside the grid", w.column)));
        }
        Ok(())
    }

    fn transition_layer<T: Scalar>(&self, t: usize) -> Vec<T> {
        let (ns, na) = (self.num_states(), ACTION_NAMES.len());
        let mut layer = vec![T::zero(); ns * na * ns];
        for s in 0..ns {
            for a in 0..na {
                layer[(s * na + a) * ns + self.next_state(t, s, a)] = T::one();
            }
        }
        layer
    }

    fn discount_layer<T: Scalar>(&self, t: usize) -> Vec<T> {
        let (ns, na) = (self.num_states(), ACTION_NAMES.len());
        let mut layer = Vec::with_capacity(ns * na * ns);
        for _ in 0..ns * na {
            for s2 in 0..ns {
                let g = if s2 == self.terminal_state() {
                    0.0
                } else {
                    self.discount_scheme.rate(t, self.cell_of(s2))
                };
                layer.push(T::lit(g));
            }
        }
        layer
    }

    /// Builds the tabular model.
    pub fn build<T: Scalar>(&self) -> Result<TabularNvmdp<T>> {
        self.check()?;
        let (ns, na, h) = (self.num_states(), ACTION_NAMES.len(), self.horizon);
        let transitions = if self.wind.is_empty() {
            TimeTable::constant(self.transition_layer(0), h)
        } else {
            TimeTable::periodic((0..self.wind_period).map(|t| self.transition_layer(t)).collect(), h)
        };
        let mut reward_layer = vec![T::lit(self.step_reward); ns * na * ns];
        let term = self.terminal_state();
        reward_layer[term * na * ns..].iter_mut().for_each(|r| *r = T::zero());
        let rewards = TimeTable::constant(reward_layer, h);
        let discounts = match self.discount_scheme.switch_time() {
            None => TimeTable::constant(self.discount_layer(0), h),
            Some(switch) => TimeTable::scheduled(
                vec![self.discount_layer(0), self.discount_layer(switch)],
                (0..h).map(|t| usize::from(t >= switch)).collect(),
            )?,
        };
        let mut start = vec![T::zero(); ns];
        start[self.state_of(self.start)] = T::one();
        let reward_noise = match self.reward_scheme.noise_std() {
            None => RewardNoise::None,
            Some(std) => RewardNoise::Gaussian { std: T::lit(std) },
        };
        TabularNvmdp::new(ModelParts {
            num_states: ns,
            num_actions: na,
            horizon: h,
            transitions,
            rewards,
            discounts,
            start,
            terminals: vec![term],
            reward_noise,
        })
    }
}

/// The windy gridworld under the given reward and discount schemes.
pub fn build_tricky_gridworld<T: Scalar>(
    reward_scheme: RewardScheme,
    discount_scheme: DiscountScheme,
) -> Result<TabularNvmdp<T>> {
    GridworldSpec::tricky(reward_scheme, discount_scheme).build()
}

/// The stationary gridworld: no wind, deterministic reward, discount 0.999.
pub fn build_vanilla_gridworld<T: Scalar>() -> Result<TabularNvmdp<T>> {
    GridworldSpec::vanilla().build()
}

/// One `(t, s, a)` row of a dense table in the JSON format.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RowEntry {
    pub t: usize,
    pub s: usize,
    pub a: usize,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub probs: Option<Vec<f64>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub values: Option<Vec<f64>>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PeriodicTables {
    pub period: usize,
    /// `[k][s][a][s']`, used at every `t` with `t mod period == k`.
    pub tables: Vec<Vec<Vec<Vec<f64>>>>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum TableJson {
    Periodic { periodic: PeriodicTables },
    Dense(Vec<RowEntry>),
}

/// On-disk model description. Indices are 0-based.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct NvmdpJson {
    pub num_states: usize,
    pub num_actions: usize,
    pub horizon: usize,
    pub start: Vec<f64>,
    #[serde(default)]
    pub terminals: Vec<usize>,
    pub transitions: TableJson,
    pub rewards: TableJson,
    pub discounts: TableJson,
    /// Standard deviation of additive Gaussian reward noise.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub reward_noise_std: Option<f64>,
}

fn table_from_json<T: Scalar>(json: &TableJson, name: &str, ns: usize, na: usize, h: usize) -> Result<TimeTable<T>> {
    let layer_len = ns * na * ns;
    let check_row = |row: &[f64], t: usize, s: usize, a: usize| -> Result<()> {
        if row.len() != ns {
            return Err(NvmdpError::Dimension(format!(
                "{name}: row (t={t}, s={s}, a={a}) has {} entries, expected {ns}",
                row.len()
            )));
        }
        Ok(())
    };
    match json {
        TableJson::Periodic { periodic } => {
            if periodic.period == 0 || periodic.tables.len() != periodic.period {
                return Err(invalid(format!(
                    "{name}: period {} does not match {} tables",
                    periodic.period,
                    periodic.tables.len()
                )));
            }
            let mut layers = Vec::with_capacity(periodic.period);
            for (k, table) in periodic.tables.iter().enumerate() {
                if table.len() != ns || table.iter().any(|r| r.len() != na) {
                    return Err(NvmdpError::Dimension(format!(
                        "{name}: periodic table {k} must be {ns} x {na} x {ns}"
                    )));
                }
                let mut layer = Vec::with_capacity(layer_len);
                for (s, per_action) in table.iter().enumerate() {
                    for (a, row) in per_action.iter().enumerate() {
                        check_row(row, k, s, a)?;
                        layer.extend(row.iter().map(|&x| T::lit(x)));
                    }
                }
                layers.push(layer);
            }
            Ok(TimeTable::periodic(layers, h))
        }
        TableJson::Dense(rows) => {
            let mut layers = vec![vec![T::nan(); layer_len]; h];
            let mut seen = vec![false; h * ns * na];
            for e in rows {
                if e.t >= h || e.s >= ns || e.a >= na {
                    return Err(NvmdpError::OutOfRange(format!(
                        "{name}: entry (t={}, s={}, a={}) outside {h} x {ns} x {na}",
                        e.t, e.s, e.a
                    )));
                }
                let row = match (&e.probs, &e.values) {
                    (Some(r), None) | (None, Some(r)) => r,
                    _ => {
                        return Err(invalid(format!(
                            "{name}: entry (t={}, s={}, a={}) needs exactly one of \"probs\" or \"values\"",
                            e.t, e.s, e.a
                        )))
                    }
                };
                check_row(row, e.t, e.s, e.a)?;
                let idx = (e.t * ns + e.s) * na + e.a;
                if std::mem::replace(&mut seen[idx], true) {
                    return Err(invalid(format!(
                        "{name}: duplicate entry (t={}, s={}, a={})",
                        e.t, e.s, e.a
                    )));
                }
                let base = (e.s * na + e.a) * ns;
                for (dst, &x) in layers[e.t][base..base + ns].iter_mut().zip(row) {
                    *dst = T::lit(x);
                }
            }
            if let Some(idx) = seen.iter().position(|x| !x) {
                let (t, s, a) = (idx / (ns * na), (idx / na) % ns, idx % na);
                return Err(invalid(format!("{name}: missing entry (t={t}, s={s}, a={a})")));
            }
            Ok(TimeTable::from_fn(h, |t| std::mem::take(&mut layers[t])))
        }
    }
}

fn table_to_json<T: Scalar>(table: &TimeTable<T>, probs: bool, ns: usize, na: usize) -> TableJson {
    let row_of = |layer: &[T], s: usize, a: usize| -> Vec<f64> {
        layer[(s * na + a) * ns..(s * na + a + 1) * ns].iter().map(|x| x.as_f64()).collect()
    };
    match table.period() {
        Some(p) => TableJson::Periodic {
            periodic: PeriodicTables {
                period: p,
                tables: (0..p)
                    .map(|k| {
                        let layer = &table.layers()[k];
                        (0..ns).map(|s| (0..na).map(|a| row_of(layer, s, a)).collect()).collect()
                    })
                    .collect(),
            },
        },
        None => {
            let mut rows = Vec::with_capacity(table.horizon() * ns * na);
            for t in 0..table.horizon() {
                let layer = table.layer(t);
                for s in 0..ns {
                    for a in 0..na {
                        let row = Some(row_of(layer, s, a));
                        let (p, v) = if probs { (row, None) } else { (None, row) };
                        rows.push(RowEntry {
                            t,
                            s,
                            a,
                            probs: p,
                            values: v,
                        });
                    }
                }
            }
            TableJson::Dense(rows)
        }
    }
}

impl NvmdpJson {
    pub fn from_model<T: Scalar>(model: &TabularNvmdp<T>) -> Self {
        let (ns, na) = (model.num_states(), model.num_actions());
        Self {
            num_states: ns,
            num_actions: na,
            horizon: model.horizon(),
            start: model.start().iter().map(|x| x.as_f64()).collect(),
            terminals: model.terminals(),
            transitions: table_to_json(model.transitions(), true, ns, na),
            rewards: table_to_json(model.rewards(), false, ns, na),
            discounts: table_to_json(model.discounts(), false, ns, na),
            reward_noise_std: match model.reward_noise() {
                RewardNoise::None => None,
                RewardNoise::Gaussian { std } => Some(std.as_f64()),
            },
        }
    }

    pub fn into_model<T: Scalar>(&self) -> Result<TabularNvmdp<T>> {
        let (ns, na, h) = (self.num_states, self.num_actions, self.horizon);
        if ns == 0 || na == 0 || h == 0 {
            return Err(invalid("num_states, num_actions and horizon must be positive"));
        }
        TabularNvmdp::new(ModelParts {
            num_states: ns,
            num_actions: na,
            horizon: h,
            transitions: table_from_json(&self.transitions, "transitions", ns, na, h)?,
            rewards: table_from_json(&self.rewards, "rewards", ns, na, h)?,
            discounts: table_from_json(&self.discounts, "discounts", ns, na, h)?,
            start: self.start.iter().map(|&x| T::lit(x)).collect(),
            terminals: self.terminals.clone(),
            reward_noise: match self.reward_noise_std {
                None => RewardNoise::None,
                Some(std) => RewardNoise::Gaussian { std: T::lit(std) },
            },
        })
    }
}

/// Reads and validates a model file.
pub fn load_nvmdp_json<T: Scalar>(path: &Path) -> Result<TabularNvmdp<T>> {
    let text = std::fs::read_to_string(path).map_err(|source| NvmdpError::Io {
        path: path.to_path_buf(),
        source,
    })?;
    let json: NvmdpJson = serde_json::from_str(&text).map_err(|source| NvmdpError::Json {
        path: path.to_path_buf(),
        source,
    })?;
    json.into_model()
}

/// Writes `model` in the JSON format read by [`load_nvmdp_json`].
pub fn dump_nvmdp_json<T: Scalar>(model: &TabularNvmdp<T>, path: &Path) -> Result<()> {
    let text = serde_json::to_string(&NvmdpJson::from_model(model)).map_err(|source| NvmdpError::Json {
        path: path.to_path_buf(),
        source,
    })?;
    std::fs::write(path, text).map_err(|source| NvmdpError::Io {
        path: path.to_path_buf(),
        source,
    })
}

/// Random model with a fresh layer per time step: transition rows are
/// normalized exponential draws (a flat Dirichlet), rewards are uniform in
/// `[-1, 1]`, discounts uniform in `[0, gamma_max]`. The start distribution
/// is uniform and there are no terminal states.
pub fn random_nvmdp<T: Scalar, R: Rng + ?Sized>(
    rng: &mut R,
    num_states: usize,
    num_actions: usize,
    horizon: usize,
    gamma_max: f64,
) -> Result<TabularNvmdp<T>> {
    if !(gamma_max >= 0.0 && gamma_max.is_finite()) {
        return Err(invalid(format!("gamma_max {gamma_max} must be finite and non-negative")));
    }
    let (ns, na) = (num_states, num_actions);
    let mut transitions = Vec::with_capacity(horizon);
    let mut rewards = Vec::with_capacity(horizon);
    let mut discounts = Vec::with_capacity(horizon);
    for _ in 0..horizon {
        let mut p = Vec::with_capacity(ns * na * ns);
        for _ in 0..ns * na {
            let draws: Vec<f64> = (0..ns).map(|_| -(1.0 - rng.random::<f64>()).ln()).collect();
            let sum: f64 = draws.iter().sum();
            p.extend(draws.iter().map(|d| T::lit(d / sum)));
        }
        transitions.push(p);
        rewards.push((0..ns * na * ns).map(|_| T::lit(rng.random_range(-1.0..=1.0))).collect());
        discounts.push((0..ns * na * ns).map(|_| T::lit(rng.random::<f64>() * gamma_max)).collect());
    }
    let mut ti = transitions.into_iter();
    let mut ri = rewards.into_iter();
    let mut di = discounts.into_iter();
    TabularNvmdp::new(ModelParts {
        num_states: ns,
        num_actions: na,
        horizon,
        transitions: TimeTable::from_fn(horizon, |_| ti.next().expect("one layer per step")),
        rewards: TimeTable::from_fn(horizon, |_| ri.next().expect("one layer per step")),
        discounts: TimeTable::from_fn(horizon, |_| di.next().expect("one layer per step")),
        start: vec![T::one() / T::lit(ns as f64); ns],
        terminals: Vec::new(),
        reward_noise: RewardNoise::None,
    })
}

/// Same as [`random_nvmdp`] but time-invariant.
pub fn random_stationary_nvmdp<T: Scalar, R: Rng + ?Sized>(
    rng: &mut R,
    num_states: usize,
    num_actions: usize,
    horizon: usize,
    gamma: f64,
) -> Result<TabularNvmdp<T>> {
    let one_step = random_nvmdp::<T, R>(rng, num_states, num_actions, 1, 0.0)?;
    let len = num_states * num_actions * num_states;
    TabularNvmdp::new(ModelParts {
        num_states,
        num_actions,
        horizon,
        transitions: TimeTable::constant(one_step.transitions().layer(0).to_vec(), horizon),
        rewards: TimeTable::constant(one_step.rewards().layer(0).to_vec(), horizon),
        discounts: TimeTable::constant(vec![T::lit(gamma); len], horizon),
        start: one_step.start().to_vec(),
        terminals: Vec::new(),
        reward_noise: RewardNoise::None,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn cell_state_round_trip() {
        let g = GridworldSpec::vanilla();
        for s in 0..g.num_cells() {
            assert_eq!(g.state_of(g.cell_of(s)), s);
        }
        assert_eq!(g.state_of((1, 1)), 0);
        assert_eq!(g.state_of((8, 3)), 23);
        assert_eq!(g.terminal_state(), 24);
    }

    #[test]
    fn calm_phase_lets_the_agent_pass_column_seven() {
        let g = GridworldSpec::tricky(RewardScheme::Deterministic, DiscountScheme::Dr0);
        assert_eq!(g.next_cell(5, (7, 2), 3), (8, 2));
        assert_eq!(g.next_cell(11, (7, 2), 3), (8, 2));
        // Active wind on the same column pushes 4 first.
        assert_eq!(g.next_cell(4, (7, 2), 3), (4, 2));
    }

    #[test]
    fn column_six_is_blown_three_cells() {
        let g = GridworldSpec::tricky(RewardScheme::Deterministic, DiscountScheme::Dr0);
        // Wind moves (6, y) to (3, y); "up" then applies from there.
        assert_eq!(g.next_cell(0, (6, 1), 0), (3, 2));
        assert_eq!(g.next_cell(6, (6, 3), 2), (2, 3));
    }

    #[test]
    fn entering_target_terminates() {
        let g = GridworldSpec::vanilla();
        assert_eq!(g.next_state(0, g.state_of((7, 3)), 3), g.terminal_state());
        assert_eq!(g.next_state(0, g.terminal_state(), 2), g.terminal_state());
    }

    #[test]
    fn scheme_names_parse() {
        for r in RewardScheme::ALL {
            assert_eq!(r.name().parse::<RewardScheme>().unwrap(), r);
        }
        for d in DiscountScheme::ALL {
            assert_eq!(d.name().parse::<DiscountScheme>().unwrap(), d);
        }
        assert!(matches!(
            "dr-9".parse::<DiscountScheme>(),
            Err(NvmdpError::UnknownName { .. })
        ));
    }

    #[test]
    fn discount_schemes_by_time() {
        assert_eq!(DiscountScheme::Dr1.rate(150, (3, 1)), 1.02);
        assert_eq!(DiscountScheme::Dr2.rate(49, (4, 2)), 1.02);
        assert_eq!(DiscountScheme::Dr2.rate(50, (4, 2)), 0.999);
        assert_eq!(DiscountScheme::Dr3.rate(0, (3, 1)), 1.05);
        assert_eq!(DiscountScheme::Dr3.rate(0, (3, 2)), 0.999);
    }

    #[test]
    fn discounts_into_terminal_are_zero() {
        let m: TabularNvmdp<f64> = build_tricky_gridworld(RewardScheme::Deterministic, DiscountScheme::Dr1).unwrap();
        let g = GridworldSpec::vanilla();
        let s = g.state_of((7, 3));
        assert_eq!(m.discount(0, s, 3, g.terminal_state()), 0.0);
        assert_eq!(m.discount(0, s, 3, g.state_of((3, 1))), 1.02);
    }
}
