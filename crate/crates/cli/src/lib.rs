//! Experiment harness behind the `nvmdp` binary: configuration, trial
//! orchestration, benchmark tables and result files.

use std::fs::File;
use std::io::{BufWriter, Write};
use std::path::{Path, PathBuf};
use std::str::FromStr;

use nvmdp::dp::value_iteration;
use nvmdp::envs::{build_tricky_gridworld, DiscountScheme, GridworldSpec, RewardScheme, AVOID_CELLS};
use nvmdp::qlearn::{classic_q_baseline, train, trial_seed, LearningConfig, RunRecord, Selector, StepSize};
use nvmdp::{rollout, Nvmdp, NvmdpError};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use thiserror::Error;

#[derive(Debug, Error)]
pub enum CliError {
    #[error("usage: {0}")]
    Usage(String),
    #[error(transparent)]
    Core(#[from] NvmdpError),
    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
    #[error("{path}: {source}")]
    Csv {
        path: PathBuf,
        #[source]
        source: csv::Error,
    },
}

impl CliError {
    /// 1 usage, 2 validation, 3 I/O.
    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Usage(_) => 1,
            CliError::Core(NvmdpError::Io { .. }) => 3,
            CliError::Core(NvmdpError::Json { source, .. }) if source.is_io() => 3,
            CliError::Core(_) => 2,
            CliError::Io { .. } | CliError::Csv { .. } => 3,
        }
    }
}

pub type CliResult<T> = std::result::Result<T, CliError>;

pub(crate) fn io_err(path: &Path) -> impl FnOnce(std::io::Error) -> CliError + '_ {
    move |source| CliError::Io {
        path: path.to_path_buf(),
        source,
    }
}

/// Learning algorithm names accepted on the command line.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Algorithm {
    ClassicQ,
    NvmdpQ,
    MaxminQ,
    PtmxmQ,
    AveragedQ,
    WtavgQ,
}

impl Algorithm {
    pub const ALL: [Algorithm; 6] = [
        Algorithm::ClassicQ,
        Algorithm::NvmdpQ,
        Algorithm::MaxminQ,
        Algorithm::PtmxmQ,
        Algorithm::AveragedQ,
        Algorithm::WtavgQ,
    ];

    pub fn name(self) -> &'static str {
        match self {
            Algorithm::ClassicQ => "classic-q",
            Algorithm::NvmdpQ => "nvmdp-q",
            Algorithm::MaxminQ => "maxmin-q",
            Algorithm::PtmxmQ => "ptmxm-q",
            Algorithm::AveragedQ => "averaged-q",
            Algorithm::WtavgQ => "wtavg-q",
        }
    }

    /// Whether the algorithm takes an `(n, l)` track shape.
    pub fn uses_tracks(self) -> bool {
        !matches!(self, Algorithm::ClassicQ | Algorithm::NvmdpQ)
    }
}

impl FromStr for Algorithm {
    type Err = CliError;

    fn from_str(s: &str) -> CliResult<Self> {
        Self::ALL
            .into_iter()
            .find(|a| a.name() == s)
            .ok_or_else(|| CliError::Usage(format!("unknown algorithm '{s}'")))
    }
}

/// Track shapes used in the benchmark grid.
pub const SHAPES: [(usize, usize); 4] = [(6, 1), (3, 2), (2, 3), (1, 6)];

/// One experiment: an algorithm on one gridworld configuration, repeated
/// over `trials` seeds. Also the schema of the `--config` file; absent keys
/// take the defaults below.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ExperimentConfig {
    pub algorithm: Algorithm,
    pub n: usize,
    pub l: usize,
    pub reward_scheme: RewardScheme,
    pub discount_scheme: DiscountScheme,
    pub trials: usize,
    pub episodes: usize,
    pub eval_every: usize,
    pub epsilon: f64,
    /// Constant step size; `None` selects `1 / visits`.
    pub step_size: Option<f64>,
    pub lambda: f64,
    pub eta: f64,
    pub seed: u64,
    pub output: Option<PathBuf>,
}

impl Default for ExperimentConfig {
    fn default() -> Self {
        Self {
            algorithm: Algorithm::NvmdpQ,
            n: 1,
            l: 1,
            reward_scheme: RewardScheme::LargeNoise,
            discount_scheme: DiscountScheme::Dr0,
            trials: 10,
            episodes: 50_000,
            eval_every: 500,
            epsilon: 0.05,
            step_size: Some(0.1),
            lambda: 0.5,
            eta: 0.7,
            seed: 0,
            output: None,
        }
    }
}

impl ExperimentConfig {
    pub fn from_file(path: &Path) -> CliResult<Self> {
        let text = std::fs::read_to_string(path).map_err(io_err(path))?;
        serde_json::from_str(&text).map_err(|source| {
            CliError::Core(NvmdpError::Json {
                path: path.to_path_buf(),
                source,
            })
        })
    }

    /// The aggregation function, or `None` for the time-unaware baseline.
    pub fn selector(&self) -> Option<Selector> {
        match self.algorithm {
            Algorithm::ClassicQ => None,
            Algorithm::NvmdpQ => Some(Selector::MaxOfFirst),
            Algorithm::MaxminQ => Some(Selector::Maxmin),
            Algorithm::PtmxmQ => Some(Selector::PtMxm),
            Algorithm::AveragedQ => Some(Selector::Averaged),
            Algorithm::WtavgQ => Some(Selector::WtAvg {
                lambda: self.lambda,
                eta: self.eta,
            }),
        }
    }

    /// Track shape actually used.
    pub fn shape(&self) -> (usize, usize) {
        if self.algorithm.uses_tracks() {
            (self.n, self.l)
        } else {
            (1, 1)
        }
    }

    pub fn validate(&self) -> CliResult<()> {
        if let Some(sel) = self.selector() {
            let (n, l) = self.shape();
            sel.validate(n, l)?;
        }
        self.learning_config(0, None).validate()?;
        Ok(())
    }

    fn learning_config(&self, seed: u64, target_steps: Option<usize>) -> LearningConfig {
        let grid = GridworldSpec::vanilla();
        LearningConfig {
            step_size: match self.step_size {
                Some(alpha) => StepSize::Constant { alpha },
                None => StepSize::InverseVisits,
            },
            epsilon: self.epsilon,
            episodes: self.episodes,
            eval_every: self.eval_every,
            seed,
            target_steps,
            return_window: None,
            watch_states: AVOID_CELLS.iter().map(|&c| grid.state_of(c)).collect(),
            classic_gamma: 0.999,
        }
    }

    pub fn environment(&self) -> CliResult<Nvmdp> {
        Ok(build_tricky_gridworld(self.reward_scheme, self.discount_scheme)?)
    }

    /// Human-readable track shape as in the benchmark table.
    pub fn parameters_label(&self) -> String {
        if self.algorithm.uses_tracks() {
            format!("n = {}, l = {}", self.n, self.l)
        } else {
            "--".to_string()
        }
    }
}

/// Length of the optimal greedy rollout under mean rewards; the learner's
/// evaluations must reproduce it to count as optimal.
pub fn optimal_steps(model: &Nvmdp) -> Option<usize> {
    let opt = value_iteration(model);
    let greedy = opt.greedy?;
    let mut rng = ChaCha8Rng::seed_from_u64(0);
    let r = rollout(model, nvmdp::model::most_likely_start(model), |t, s| greedy.action(t, s), &mut rng);
    r.reached_terminal.then_some(r.steps())
}

/// Runs every trial of `config`, at most `jobs` at a time. Records come back
/// in trial order whatever the scheduling.
pub fn run_trials(config: &ExperimentConfig, jobs: usize) -> CliResult<Vec<RunRecord>> {
    config.validate()?;
    let model = config.environment()?;
    let target = optimal_steps(&model);
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(jobs.max(1))
        .build()
        .map_err(|e| CliError::Usage(format!("cannot start worker pool: {e}")))?;
    let results: Vec<CliResult<RunRecord>> = pool.install(|| {
        (0..config.trials)
            .into_par_iter()
            .map(|k| {
                let lc = config.learning_config(trial_seed(config.seed, k as u64), target);
                let mut record = match config.selector() {
                    None => classic_q_baseline(&model, &lc)?.0,
                    Some(sel) => {
                        let (n, l) = config.shape();
                        train(&model, &sel, n, l, &lc)?.0
                    }
                };
                record.algorithm = config.algorithm.name().to_string();
                record.reward_scheme = config.reward_scheme.name().to_string();
                record.discount_scheme = config.discount_scheme.name().to_string();
                Ok(record)
            })
            .collect()
    });
    results.into_iter().collect()
}

/// Aggregate of one experiment in the layout of the benchmark table.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct BenchmarkRow {
    pub algorithm: String,
    pub parameters: String,
    pub reward_scheme: String,
    pub discount_scheme: String,
    pub trials: usize,
    pub converged: usize,
    /// Mean convergence episode over converged trials.
    pub mean_episodes: Option<f64>,
    /// Mean environment steps before convergence over converged trials, in thousands.
    pub mean_steps_thousands: Option<f64>,
    /// Mean over trials of the pre-convergence evaluation return std.
    pub mean_return_std: Option<f64>,
    /// Trials whose final greedy trajectory visits a watched cell.
    pub avoidance_count: usize,
}

fn mean(xs: impl Iterator<Item = f64>) -> Option<f64> {
    let (sum, count) = xs.fold((0.0, 0usize), |(s, c), x| (s + x, c + 1));
    (count > 0).then(|| sum / count as f64)
}

pub fn aggregate(config: &ExperimentConfig, records: &[RunRecord]) -> BenchmarkRow {
    let converged: Vec<&RunRecord> = records.iter().filter(|r| r.converged).collect();
    BenchmarkRow {
        algorithm: config.algorithm.name().to_string(),
        parameters: config.parameters_label(),
        reward_scheme: config.reward_scheme.name().to_string(),
        discount_scheme: config.discount_scheme.name().to_string(),
        trials: records.len(),
        converged: converged.len(),
        mean_episodes: mean(converged.iter().filter_map(|r| r.convergence_episode.map(|e| e as f64))),
        mean_steps_thousands: mean(converged.iter().map(|r| r.steps_before_convergence as f64 / 1000.0)),
        mean_return_std: mean(records.iter().filter_map(|r| r.pre_convergence_return_std)),
        avoidance_count: records.iter().filter(|r| r.avoidance_hit).count(),
    }
}

/// Runs each experiment in turn and aggregates it.
pub fn run_benchmark(configs: &[ExperimentConfig], jobs: usize) -> CliResult<Vec<(BenchmarkRow, Vec<RunRecord>)>> {
    configs
        .iter()
        .filter(|c| c.trials > 0)
        .map(|c| {
            let records = run_trials(c, jobs)?;
            Ok((aggregate(c, &records), records))
        })
        .collect()
}

/// Appends records as JSON lines.
pub fn append_records(records: &[RunRecord], path: &Path) -> CliResult<()> {
    let file = File::options().create(true).append(true).open(path).map_err(io_err(path))?;
    let mut out = BufWriter::new(file);
    write_records(records, &mut out).map_err(io_err(path))?;
    out.flush().map_err(io_err(path))
}

pub fn write_records(records: &[RunRecord], out: &mut impl Write) -> std::io::Result<()> {
    for r in records {
        serde_json::to_writer(&mut *out, r)?;
        out.write_all(b"\n")?;
    }
    Ok(())
}

fn csv_err(path: &Path) -> impl FnOnce(csv::Error) -> CliError + '_ {
    move |source| CliError::Csv {
        path: path.to_path_buf(),
        source,
    }
}

/// Writes the benchmark table as CSV.
pub fn write_table_csv(rows: &[BenchmarkRow], path: &Path) -> CliResult<()> {
    let mut w = csv::Writer::from_path(path).map_err(csv_err(path))?;
    w.write_record([
        "algorithm",
        "parameters",
        "reward",
        "discount",
        "trials",
        "converged",
        "episodes",
        "steps_thousands",
        "std",
        "count",
    ])
    .map_err(csv_err(path))?;
    let opt = |x: Option<f64>, digits: usize| x.map_or_else(|| "--".to_string(), |v| format!("{v:.digits$}"));
    for r in rows {
        w.write_record([
            r.algorithm.clone(),
            r.parameters.clone(),
            r.reward_scheme.clone(),
            r.discount_scheme.clone(),
            r.trials.to_string(),
            r.converged.to_string(),
            opt(r.mean_episodes, 1),
            opt(r.mean_steps_thousands, 2),
            opt(r.mean_return_std, 2),
            r.avoidance_count.to_string(),
        ])
        .map_err(csv_err(path))?;
    }
    w.flush().map_err(io_err(path))
}

/// Writes `(trial, seed, episode, return, steps)` rows of every evaluation.
pub fn emit_plot_data(records: &[RunRecord], path: &Path) -> CliResult<()> {
    let mut w = csv::Writer::from_path(path).map_err(csv_err(path))?;
    w.write_record(["trial", "seed", "episode", "return", "steps"]).map_err(csv_err(path))?;
    for (k, r) in records.iter().enumerate() {
        for p in &r.evaluations {
            w.write_record([
                k.to_string(),
                r.seed.to_string(),
                p.episode.to_string(),
                p.discounted_return.to_string(),
                p.steps.to_string(),
            ])
            .map_err(csv_err(path))?;
        }
    }
    w.flush().map_err(io_err(path))
}

/// Cells of a gridworld state sequence.
pub fn cells_of(states: &[usize]) -> Vec<(usize, usize)> {
    let g = GridworldSpec::vanilla();
    states.iter().map(|&s| g.cell_of(s)).collect()
}

pub fn format_cells(cells: &[(usize, usize)]) -> String {
    cells
        .iter()
        .map(|(x, y)| format!("({x},{y})"))
        .collect::<Vec<_>>()
        .join(" ")
}
