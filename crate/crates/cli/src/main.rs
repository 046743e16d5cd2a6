//! `explore`: batch front end for the exploration toolkit.
//!
//! Exit codes: 0 success, 1 configuration error, 2 solver or runtime failure.

mod artifact;
mod commands;
mod config;

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};

use config::{load_config_file, PartialConfig};
use explore_core::objective::ObjectiveKind;

#[derive(Parser)]
#[command(
    name = "explore",
    about = "Exact entropy-objective solves, exploration learning runs, sweeps and benchmarks",
    long_about = "Batch front end for the exploration toolkit.\n\n\
        Configuration comes from --config (a `key = value` file) plus flags; flags win.\n\
        The output root is --out, else $EXPLORE_OUT, else ./out.\n\n\
        CSV schemas (fixed column order):\n\
        \x20 solve:      kind,xi,zeta,objective,h_state,h_state_action,min_d,gap,bound\n\
        \x20 explore:    per-seed iter,samples,h_state,h_state_action,min_d,spectral_gap,model_error,solve_seconds; aggregate iter,n_seeds,h_state_mean,h_state_ci95,min_d_mean,min_d_ci95\n\
        \x20 sweep-xi:   kind,xi,objective,h_state,h_state_action\n\
        \x20 sweep-zeta: kind,zeta,h_state,spectral_gap (plus per-kind state distribution grids)\n\
        \x20 goal:       policy,horizon,success_rate,mean_return\n\
        \x20 bench:      n_states,n_actions,variables,kind,seconds,ok"
)]
struct Cli {
    /// `key = value` configuration file; flags override its entries.
    #[arg(long, global = true)]
    config: Option<PathBuf>,

    #[command(flatten)]
    overrides: Overrides,

    #[command(subcommand)]
    command: Command,
}

#[derive(Args)]
struct Overrides {
    /// Environment: single-chain | double-chain | river-swim | four-rooms | random
    #[arg(long, global = true)]
    env: Option<String>,
    /// Chain length / grid side / state count, depending on the environment.
    #[arg(long, global = true)]
    size: Option<usize>,
    /// Action-slip probability for the chain and gridworld environments.
    #[arg(long = "p-slip", global = true)]
    p_slip: Option<f64>,
    /// Action count for the random environment.
    #[arg(long = "n-actions", global = true)]
    n_actions: Option<usize>,
    /// ideal | maxent | countbased | exact-solve
    #[arg(long, global = true)]
    algorithm: Option<String>,
    /// Objective kind(s): infinity | frobenius | column-sum | dual (repeatable).
    #[arg(long = "kind", global = true)]
    kinds: Option<Vec<String>>,
    /// Per-action probability floor.
    #[arg(long, global = true)]
    xi: Option<f64>,
    /// Entrywise cap on the doubly stochastic target.
    #[arg(long, global = true)]
    zeta: Option<f64>,
    /// Epsilon for the epsilon-greedy baselines.
    #[arg(long, global = true)]
    epsilon: Option<f64>,
    /// Mixture learning rate of the maxent baseline.
    #[arg(long, global = true)]
    eta: Option<f64>,
    /// Samples collected per learning iteration.
    #[arg(long = "batch-n", global = true)]
    batch_n: Option<usize>,
    /// Learning iterations per run.
    #[arg(long = "max-iters", global = true)]
    max_iters: Option<usize>,
    /// Number of seeded runs.
    #[arg(long = "n-seeds", global = true)]
    n_seeds: Option<usize>,
    /// Seed of the first run; run i uses base-seed + i.
    #[arg(long = "base-seed", global = true)]
    base_seed: Option<u64>,
    /// Evaluation rollouts for the goal protocol.
    #[arg(long = "n-runs", global = true)]
    n_runs: Option<usize>,
    /// Discount factor for planning baselines and the goal protocol.
    #[arg(long, global = true)]
    gamma: Option<f64>,
    /// Worker threads for seeded runs (default: available parallelism).
    #[arg(long, global = true)]
    jobs: Option<usize>,
    /// Output root (overrides $EXPLORE_OUT).
    #[arg(long, global = true)]
    out: Option<PathBuf>,
}

#[derive(Subcommand)]
enum Command {
    /// Exact objective solves with policy metrics.
    Solve,
    /// Seeded learning runs with per-seed and aggregate curves.
    Explore,
    /// Exact solves over an action-floor grid.
    SweepXi {
        /// Grid points between 0 and 1/|A|.
        #[arg(long, default_value_t = 11)]
        grid: usize,
    },
    /// Exact solves over a target-cap grid.
    SweepZeta {
        /// Grid points between 1/|S| and 1.
        #[arg(long, default_value_t = 11)]
        grid: usize,
    },
    /// Downstream goal-reaching evaluation against the uniform baseline.
    Goal {
        /// Horizons to evaluate (repeatable).
        #[arg(long, default_values_t = [10usize, 25, 50, 100])]
        horizon: Vec<usize>,
    },
    /// Wall-clock solve-time ladder over random instances.
    Bench {
        /// Ladder sizes as S,A pairs (repeatable).
        #[arg(long = "size-ladder", value_parser = parse_size, default_values_t = [SizeSpec(45, 8), SizeSpec(90, 8), SizeSpec(180, 8)])]
        sizes: Vec<SizeSpec>,
    },
}

#[derive(Clone, Copy, Debug)]
struct SizeSpec(usize, usize);

impl std::fmt::Display for SizeSpec {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        write!(f, "{},{}", self.0, self.1)
    }
}

fn parse_size(s: &str) -> Result<SizeSpec, String> {
    let (a, b) = s.split_once(',').ok_or_else(|| format!("expected S,A but got '{s}'"))?;
    Ok(SizeSpec(
        a.trim().parse().map_err(|e| format!("bad state count: {e}"))?,
        b.trim().parse().map_err(|e| format!("bad action count: {e}"))?,
    ))
}

impl Overrides {
    fn into_partial(self) -> anyhow::Result<PartialConfig> {
        let kinds = match self.kinds {
            None => None,
            Some(raw) => Some(
                raw.iter()
                    .map(|s| s.parse::<ObjectiveKind>())
                    .collect::<explore_core::Result<Vec<_>>>()?,
            ),
        };
        Ok(PartialConfig {
            env: self.env,
            size: self.size,
            p_slip: self.p_slip,
            n_actions: self.n_actions,
            algorithm: self.algorithm,
            kinds,
            xi: self.xi,
            zeta: self.zeta,
            epsilon: self.epsilon,
            eta: self.eta,
            batch_n: self.batch_n,
            max_iters: self.max_iters,
            n_seeds: self.n_seeds,
            base_seed: self.base_seed,
            n_runs: self.n_runs,
            gamma: self.gamma,
            jobs: self.jobs,
            out_dir: self.out,
        })
    }
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            // help/version are successful exits; anything else is a config error
            if e.use_stderr() {
                eprint!("{e}");
                return ExitCode::from(1);
            }
            print!("{e}");
            return ExitCode::SUCCESS;
        }
    };

    let cfg = (|| -> anyhow::Result<_> {
        let from_flags = cli.overrides.into_partial()?;
        let from_file = match &cli.config {
            Some(path) => load_config_file(path)?,
            None => PartialConfig::default(),
        };
        from_flags.or(from_file).resolve()
    })();
    let cfg = match cfg {
        Ok(cfg) => cfg,
        Err(e) => {
            eprintln!("configuration error: {e:#}");
            return ExitCode::from(1);
        }
    };

    let result = match cli.command {
        Command::Solve => commands::cmd_solve(&cfg),
        Command::Explore => commands::cmd_explore(&cfg),
        Command::SweepXi { grid } => commands::cmd_sweep_xi(&cfg, grid),
        Command::SweepZeta { grid } => commands::cmd_sweep_zeta(&cfg, grid),
        Command::Goal { horizon } => commands::cmd_goal(&cfg, &horizon),
        Command::Bench { sizes } => {
            let pairs: Vec<(usize, usize)> = sizes.iter().map(|s| (s.0, s.1)).collect();
            commands::cmd_bench(&cfg, &pairs)
        }
    };
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::from(2)
        }
    }
}
