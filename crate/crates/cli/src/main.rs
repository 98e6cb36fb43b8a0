use std::io::Write;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand, ValueEnum};
use nvmdp::dp::{policy_evaluation, value_iteration};
use nvmdp::envs::{dump_nvmdp_json, load_nvmdp_json, DiscountScheme, GridworldSpec, RewardScheme};
use nvmdp::model::most_likely_start;
use nvmdp::verify::{run_suite, Suite};
use nvmdp::{rollout, Nvmdp, Policy};
use nvmdp_cli::*;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::Serialize;

#[derive(Parser)]
#[command(name = "nvmdp", version, about = "Time-indexed MDPs with varying discounts")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Evaluate a policy by backward induction and write V and Q.
    DpEval {
        #[command(flatten)]
        env: EnvArgs,
        /// JSON policy file; the uniform policy when absent.
        #[arg(long)]
        policy: Option<PathBuf>,
        #[arg(long)]
        output: Option<PathBuf>,
    },
    /// Solve for optimal values and print the greedy rollout.
    DpVi {
        #[command(flatten)]
        env: EnvArgs,
        #[arg(long)]
        output: Option<PathBuf>,
    },
    /// Run learning trials of one algorithm.
    Qlearn {
        #[command(flatten)]
        exp: ExperimentArgs,
        #[arg(long)]
        algorithm: Option<String>,
        #[arg(long)]
        n: Option<usize>,
        #[arg(long)]
        l: Option<usize>,
        #[arg(long)]
        reward: Option<RewardScheme>,
        #[arg(long)]
        discount: Option<DiscountScheme>,
        /// Per-evaluation CSV for plotting.
        #[arg(long)]
        plot: Option<PathBuf>,
    },
    /// Run a grid of experiments and write the aggregated table.
    Bench {
        #[command(flatten)]
        exp: ExperimentArgs,
        /// Comma-separated algorithms; all when absent.
        #[arg(long, value_delimiter = ',')]
        algorithms: Vec<String>,
        /// Comma-separated `NxL` shapes for track-based algorithms.
        #[arg(long, value_delimiter = ',')]
        shapes: Vec<String>,
        #[arg(long, value_delimiter = ',')]
        rewards: Vec<RewardScheme>,
        #[arg(long, value_delimiter = ',')]
        discounts: Vec<DiscountScheme>,
        /// 100 trials per configuration.
        #[arg(long)]
        full: bool,
        /// Directory for `table.csv` and `records.jsonl`.
        #[arg(long, default_value = "bench-out")]
        out_dir: PathBuf,
    },
    /// Run numerical identity checks on random instances.
    Verify {
        #[arg(long, default_value = "all")]
        suite: String,
        #[arg(long, default_value_t = 50)]
        seeds: usize,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        #[arg(long)]
        output: Option<PathBuf>,
    },
    /// Write an environment in the model JSON format.
    DumpEnv {
        #[command(flatten)]
        env: EnvArgs,
        #[arg(long)]
        output: PathBuf,
    },
}

#[derive(Clone, Copy, ValueEnum)]
enum EnvKind {
    Tricky,
    Vanilla,
}

#[derive(Args)]
struct EnvArgs {
    #[arg(long, value_enum, default_value = "tricky")]
    env: EnvKind,
    /// Model JSON file; overrides `--env`.
    #[arg(long)]
    model: Option<PathBuf>,
    #[arg(long, default_value = "r-lvn")]
    reward: RewardScheme,
    #[arg(long, default_value = "dr-0")]
    discount: DiscountScheme,
}

impl EnvArgs {
    fn is_grid(&self) -> bool {
        self.model.is_none()
    }

    fn load(&self) -> CliResult<Nvmdp> {
        Ok(match (&self.model, self.env) {
            (Some(path), _) => load_nvmdp_json(path)?,
            (None, EnvKind::Tricky) => GridworldSpec::tricky(self.reward, self.discount).build()?,
            (None, EnvKind::Vanilla) => GridworldSpec::vanilla().build()?,
        })
    }
}

#[derive(Args)]
struct ExperimentArgs {
    /// JSON experiment config; flags override its entries.
    #[arg(long)]
    config: Option<PathBuf>,
    #[arg(long)]
    trials: Option<usize>,
    #[arg(long)]
    episodes: Option<usize>,
    #[arg(long)]
    eval_every: Option<usize>,
    #[arg(long)]
    epsilon: Option<f64>,
    /// Constant step size, or `visits` for 1/visits.
    #[arg(long)]
    alpha: Option<String>,
    #[arg(long)]
    lambda: Option<f64>,
    #[arg(long)]
    eta: Option<f64>,
    /// Master seed; beats `NVMDP_SEED`, which beats the config file.
    #[arg(long)]
    seed: Option<u64>,
    /// Maximum concurrent trials.
    #[arg(long)]
    jobs: Option<usize>,
    /// JSON-lines output of run records; stdout when absent.
    #[arg(long)]
    output: Option<PathBuf>,
}

impl ExperimentArgs {
    fn base(&self) -> CliResult<ExperimentConfig> {
        let mut c = match &self.config {
            Some(p) => ExperimentConfig::from_file(p)?,
            None => ExperimentConfig::default(),
        };
        if let Ok(raw) = std::env::var("NVMDP_SEED") {
            c.seed = raw
                .trim()
                .parse()
                .map_err(|_| CliError::Usage(format!("NVMDP_SEED is not an unsigned integer: '{raw}'")))?;
        }
        macro_rules! take {
            ($($f:ident),*) => { $(if let Some(v) = self.$f { c.$f = v; })* };
        }
        take!(trials, episodes, eval_every, epsilon, lambda, eta, seed);
        if let Some(a) = &self.alpha {
            c.step_size = match a.as_str() {
                "visits" => None,
                v => Some(v.parse().map_err(|_| CliError::Usage(format!("bad --alpha '{v}'")))?),
            };
        }
        if self.output.is_some() {
            c.output = self.output.clone();
        }
        Ok(c)
    }

    fn jobs(&self) -> usize {
        self.jobs
            .unwrap_or_else(|| std::thread::available_parallelism().map_or(1, |n| n.get()))
    }
}

fn write_json<T: Serialize>(value: &T, output: Option<&Path>) -> CliResult<()> {
    let text = serde_json::to_string_pretty(value).expect("serializable report");
    match output {
        Some(path) => std::fs::write(path, text + "\n").map_err(|source| CliError::Io {
            path: path.to_path_buf(),
            source,
        }),
        None => {
            println!("{text}");
            Ok(())
        }
    }
}

fn load_policy(path: &Path) -> CliResult<Policy> {
    let text = std::fs::read_to_string(path).map_err(|source| CliError::Io {
        path: path.to_path_buf(),
        source,
    })?;
    let raw: Policy = serde_json::from_str(&text).map_err(|source| nvmdp::NvmdpError::Json {
        path: path.to_path_buf(),
        source,
    })?;
    // Re-validate through the checked constructor.
    Ok(Policy::from_probs(raw.horizon(), raw.num_states(), raw.num_actions(), raw.probs().to_vec())?)
}

#[derive(Serialize)]
struct ViReport {
    #[serde(flatten)]
    tables: nvmdp::dp::DpTables<f64>,
    rollout_states: Vec<usize>,
    #[serde(skip_serializing_if = "Option::is_none")]
    rollout_cells: Option<Vec<(usize, usize)>>,
    rollout_steps: usize,
    rollout_return: f64,
    reached_terminal: bool,
}

fn parse_shape(s: &str) -> CliResult<(usize, usize)> {
    let bad = || CliError::Usage(format!("bad shape '{s}', expected NxL"));
    let (n, l) = s.split_once('x').ok_or_else(bad)?;
    Ok((n.parse().map_err(|_| bad())?, l.parse().map_err(|_| bad())?))
}

fn emit_records(records: &[nvmdp::qlearn::RunRecord], output: Option<&Path>) -> CliResult<()> {
    match output {
        Some(p) => {
            if p.exists() {
                std::fs::remove_file(p).map_err(|source| CliError::Io {
                    path: p.to_path_buf(),
                    source,
                })?;
            }
            append_records(records, p)
        }
        None => {
            let stdout = std::io::stdout();
            let mut lock = stdout.lock();
            write_records(records, &mut lock)
                .and_then(|_| lock.flush())
                .map_err(|source| CliError::Io {
                    path: PathBuf::from("<stdout>"),
                    source,
                })
        }
    }
}

fn run(cli: Cli) -> CliResult<()> {
    match cli.command {
        Command::DpEval { env, policy, output } => {
            let model = env.load()?;
            let pi = match policy {
                Some(p) => load_policy(&p)?,
                None => Policy::uniform(model.horizon(), model.num_states(), model.num_actions()),
            };
            let result = policy_evaluation(&model, &pi)?;
            write_json(&result.tables(), output.as_deref())
        }
        Command::DpVi { env, output } => {
            let model = env.load()?;
            let result = value_iteration(&model);
            let greedy = result.greedy.clone().expect("value iteration yields a greedy policy");
            let mut rng = ChaCha8Rng::seed_from_u64(0);
            let r = rollout(&model, most_likely_start(&model), |t, s| greedy.action(t, s), &mut rng);
            let cells = env.is_grid().then(|| cells_of(&r.states));
            if let Some(c) = &cells {
                eprintln!("steps={} return={:.6} path={}", r.steps(), r.discounted_return, format_cells(c));
            }
            let report = ViReport {
                tables: result.tables(),
                rollout_steps: r.steps(),
                rollout_return: r.discounted_return,
                reached_terminal: r.reached_terminal,
                rollout_states: r.states,
                rollout_cells: cells,
            };
            write_json(&report, output.as_deref())
        }
        Command::Qlearn {
            exp,
            algorithm,
            n,
            l,
            reward,
            discount,
            plot,
        } => {
            let mut c = exp.base()?;
            if let Some(a) = algorithm {
                c.algorithm = a.parse()?;
            }
            if let Some(v) = n {
                c.n = v;
            }
            if let Some(v) = l {
                c.l = v;
            }
            if let Some(v) = reward {
                c.reward_scheme = v;
            }
            if let Some(v) = discount {
                c.discount_scheme = v;
            }
            let records = run_trials(&c, exp.jobs())?;
            emit_records(&records, c.output.as_deref())?;
            if let Some(p) = plot {
                emit_plot_data(&records, &p)?;
            }
            let row = aggregate(&c, &records);
            eprintln!(
                "{} [{}] {} {}: converged {}/{}",
                row.algorithm, row.parameters, row.reward_scheme, row.discount_scheme, row.converged, row.trials
            );
            Ok(())
        }
        Command::Bench {
            exp,
            algorithms,
            shapes,
            rewards,
            discounts,
            full,
            out_dir,
        } => {
            let mut base = exp.base()?;
            if full {
                base.trials = 100;
            }
            let algorithms: Vec<Algorithm> = if algorithms.is_empty() {
                Algorithm::ALL.to_vec()
            } else {
                algorithms.iter().map(|a| a.parse()).collect::<CliResult<_>>()?
            };
            let shapes: Vec<(usize, usize)> = if shapes.is_empty() {
                SHAPES.to_vec()
            } else {
                shapes.iter().map(|s| parse_shape(s)).collect::<CliResult<_>>()?
            };
            let rewards = if rewards.is_empty() { vec![base.reward_scheme] } else { rewards };
            let discounts = if discounts.is_empty() { vec![base.discount_scheme] } else { discounts };
            let mut configs = Vec::new();
            for &r in &rewards {
                for &d in &discounts {
                    for &a in &algorithms {
                        let list: &[(usize, usize)] = if a.uses_tracks() { &shapes } else { &[(1, 1)] };
                        for &(n, l) in list {
                            configs.push(ExperimentConfig {
                                algorithm: a,
                                n,
                                l,
                                reward_scheme: r,
                                discount_scheme: d,
                                ..base.clone()
                            });
                        }
                    }
                }
            }
            std::fs::create_dir_all(&out_dir).map_err(|source| CliError::Io {
                path: out_dir.clone(),
                source,
            })?;
            let records_path = out_dir.join("records.jsonl");
            if records_path.exists() {
                std::fs::remove_file(&records_path).map_err(|source| CliError::Io {
                    path: records_path.clone(),
                    source,
                })?;
            }
            let mut rows = Vec::new();
            for c in &configs {
                let records = run_trials(c, exp.jobs())?;
                append_records(&records, &records_path)?;
                let row = aggregate(c, &records);
                eprintln!(
                    "{:<11} {:<14} {} {}: {}/{} converged",
                    row.algorithm, row.parameters, row.reward_scheme, row.discount_scheme, row.converged, row.trials
                );
                rows.push(row);
            }
            write_table_csv(&rows, &out_dir.join("table.csv"))
        }
        Command::Verify {
            suite,
            seeds,
            seed,
            output,
        } => {
            let suites = Suite::parse_list(&suite).map_err(|e| CliError::Usage(e.to_string()))?;
            let reports = suites
                .into_iter()
                .map(|s| run_suite(s, seeds, seed))
                .collect::<Result<Vec<_>, _>>()?;
            for r in &reports {
                eprintln!("{:<10} {}", r.suite.name(), if r.passed { "pass" } else { "FAIL" });
            }
            write_json(&reports, output.as_deref())?;
            if reports.iter().all(|r| r.passed) {
                Ok(())
            } else {
                Err(CliError::Core(nvmdp::NvmdpError::Validation(
                    "verification suite reported violations".into(),
                )))
            }
        }
        Command::DumpEnv { env, output } => {
            let model = env.load()?;
            Ok(dump_nvmdp_json(&model, &output)?)
        }
    }
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(c) => c,
        Err(e) => {
            let code = if e.use_stderr() { 1 } else { 0 };
            let _ = e.print();
            return ExitCode::from(code);
        }
    };
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
