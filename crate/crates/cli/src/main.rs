//! `tree-motion` command-line tool.
//!
//! Exit codes: 0 pass, 1 usage, 2 validation, 3 numeric failure.

mod commands;
mod io;

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand, ValueEnum};

use io::{CliError, Outcome};

#[derive(Parser, Debug)]
#[command(name = "tree-motion", version, about = "Transform-tree motion policies: check, train, roll out, verify")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Validate a tree spec, compare the staged solve with the flat solve and
    /// check edge Jacobians by finite differences.
    Check(CheckArgs),
    /// Fit parameters to demonstrations by gradient descent.
    Train(TrainArgs),
    /// Integrate qdot = pi(q) from a start configuration with RK4.
    Rollout(RolloutArgs),
    /// Compare the analytic loss gradient with central differences.
    Gradcheck(GradcheckArgs),
    /// Print pi(q) at a configuration, and losses when demonstrations are given.
    Eval(EvalArgs),
}

#[derive(Args, Debug)]
struct TreeArgs {
    /// Tree spec (JSON).
    tree: PathBuf,
    /// Parameter file written by `train`; defaults to the spec's initial values.
    #[arg(long)]
    params: Option<PathBuf>,
}

#[derive(Args, Debug)]
struct CheckArgs {
    #[command(flatten)]
    tree: TreeArgs,
    /// Number of random configurations tested in addition to the origin.
    #[arg(long, default_value_t = 10)]
    points: usize,
    /// Random configurations are drawn uniformly from [-scale, scale]^d.
    #[arg(long, default_value_t = 1.0)]
    scale: f64,
    #[arg(long, default_value_t = 0)]
    seed: u64,
}

#[derive(Copy, Clone, Debug, PartialEq, Eq, ValueEnum)]
pub enum LossArg {
    /// Weighted error in each leaf's subtask space.
    Subtask,
    /// Error of the composed velocity in configuration space.
    Joint,
    /// Each learnable leaf fitted alone in its own space.
    Independent,
}

#[derive(Args, Debug)]
struct LossArgs {
    /// Loss kind; overrides the config file.
    #[arg(long, value_enum)]
    loss: Option<LossArg>,
    /// Per-leaf weights for the subtask loss, in leaf order. Defaults to 1
    /// for learnable kinds and 0 for handcrafted ones.
    #[arg(long, value_delimiter = ',', allow_hyphen_values = true)]
    lambda: Option<Vec<f64>>,
}

#[derive(Args, Debug)]
struct TrainArgs {
    #[command(flatten)]
    tree: TreeArgs,
    /// Demonstration CSV files (`t,q0..,qd0..`; qd columns optional).
    #[arg(long, num_args = 1.., required = true)]
    demos: Vec<PathBuf>,
    /// Output parameter file.
    #[arg(long)]
    out: PathBuf,
    /// Loss history CSV; defaults to `history.csv` next to `--out`.
    #[arg(long)]
    history: Option<PathBuf>,
    /// Training config JSON: `{"loss": {"kind", "lambda"}, "alpha", "iterations", "seed"}`.
    #[arg(long)]
    config: Option<PathBuf>,
    #[command(flatten)]
    loss: LossArgs,
    /// Fixed step size; found by line search on the first iteration when unset.
    #[arg(long)]
    alpha: Option<f64>,
    #[arg(long)]
    iterations: Option<usize>,
    #[arg(long)]
    seed: Option<u64>,
    /// Samples per step; full batch when unset.
    #[arg(long)]
    minibatch: Option<usize>,
    /// Heavy-ball momentum in [0, 1).
    #[arg(long)]
    momentum: Option<f64>,
}

#[derive(Args, Debug)]
struct RolloutArgs {
    #[command(flatten)]
    tree: TreeArgs,
    /// Start configuration, comma separated.
    #[arg(long, value_delimiter = ',', allow_hyphen_values = true, required = true)]
    q0: Vec<f64>,
    /// Trajectory CSV (demo format plus `phi` when every leaf has a potential).
    #[arg(long)]
    out: PathBuf,
    /// Summary JSON; defaults to `--out` with a `.summary.json` extension.
    #[arg(long)]
    summary: Option<PathBuf>,
    #[arg(long, default_value_t = 1e-3)]
    dt: f64,
    #[arg(long, default_value_t = 1_000_000)]
    max_steps: usize,
    #[arg(long, default_value_t = 1e-6)]
    grad_tol: f64,
}

#[derive(Args, Debug)]
struct GradcheckArgs {
    #[command(flatten)]
    tree: TreeArgs,
    #[arg(long, num_args = 1.., required = true)]
    demos: Vec<PathBuf>,
    #[command(flatten)]
    loss: LossArgs,
    /// Largest number of parameters differenced; a seeded subset is used above it.
    #[arg(long, default_value_t = 500)]
    max_coords: usize,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    /// Perturbs the analytic gradient before comparing.
    #[arg(long, hide = true)]
    corrupt_gradient: bool,
}

#[derive(Args, Debug)]
struct EvalArgs {
    #[command(flatten)]
    tree: TreeArgs,
    /// Configuration, comma separated.
    #[arg(long, value_delimiter = ',', allow_hyphen_values = true)]
    q: Option<Vec<f64>>,
    /// Demonstrations to report losses on.
    #[arg(long, num_args = 1..)]
    demos: Vec<PathBuf>,
    #[arg(long, value_delimiter = ',', allow_hyphen_values = true)]
    lambda: Option<Vec<f64>>,
}

fn configure_threads() -> Result<(), CliError> {
    let Ok(raw) = std::env::var("TREE_MOTION_THREADS") else {
        return Ok(());
    };
    let n: usize = raw
        .trim()
        .parse()
        .ok()
        .filter(|&n| n > 0)
        .ok_or_else(|| CliError::Usage(format!("TREE_MOTION_THREADS must be a positive integer, got `{raw}`")))?;
    rayon::ThreadPoolBuilder::new()
        .num_threads(n)
        .build_global()
        .map_err(|e| CliError::Usage(format!("cannot configure {n} threads: {e}")))
}

fn run(cli: Cli) -> Result<Outcome, CliError> {
    configure_threads()?;
    match cli.command {
        Command::Check(a) => commands::check(&a.tree.tree, a.tree.params.as_deref(), a.points, a.scale, a.seed),
        Command::Train(a) => commands::train(commands::TrainRequest {
            tree: &a.tree.tree,
            params: a.tree.params.as_deref(),
            demos: &a.demos,
            out: &a.out,
            history: a.history.as_deref(),
            config: a.config.as_deref(),
            loss: a.loss.loss,
            lambda: a.loss.lambda,
            alpha: a.alpha,
            iterations: a.iterations,
            seed: a.seed,
            minibatch: a.minibatch,
            momentum: a.momentum,
        }),
        Command::Rollout(a) => commands::rollout(
            &a.tree.tree,
            a.tree.params.as_deref(),
            &a.q0,
            &a.out,
            a.summary.as_deref(),
            tree_motion::rollout::RolloutOptions {
                dt: a.dt,
                max_steps: a.max_steps,
                grad_tol: a.grad_tol,
            },
        ),
        Command::Gradcheck(a) => commands::gradcheck(
            &a.tree.tree,
            a.tree.params.as_deref(),
            &a.demos,
            a.loss.loss,
            a.loss.lambda,
            a.max_coords,
            a.seed,
            a.corrupt_gradient,
        ),
        Command::Eval(a) => commands::eval(&a.tree.tree, a.tree.params.as_deref(), a.q.as_deref(), &a.demos, a.lambda),
    }
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let code = if e.use_stderr() { 1 } else { 0 };
            let _ = e.print();
            return ExitCode::from(code);
        }
    };
    match run(cli) {
        Ok(outcome) => ExitCode::from(outcome.code),
        Err(e) => {
            eprintln!("error: {e}");
            io::emit(&e.report());
            ExitCode::from(e.code())
        }
    }
}
