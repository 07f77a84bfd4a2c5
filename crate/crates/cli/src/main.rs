//! `liectl`: command-line front end for the liectl-core toolkit.

mod artifacts;
mod commands;
mod config;
mod failure;

use std::io::Write;
use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};

use crate::artifacts::write_all;
use crate::config::Overrides;
use crate::failure::{Failure, EXIT_CONFIG};

#[derive(Parser)]
#[command(
    name = "liectl",
    version,
    about = "Lie-derivative control, linear systems, limit cycles, sliding and kick dynamics"
)]
struct Cli {
    /// JSON run document; flags override its fields.
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    /// Directory receiving the CSV/JSON artifacts.
    #[arg(long, short = 'o', global = true, default_value = ".")]
    output_dir: PathBuf,
    /// Seed for stochastic runs.
    #[arg(long, global = true)]
    seed: Option<u64>,
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Linear state-space tasks: simulate, gramian, rank, minenergy, freq, feedback, steady.
    Linear(LinearArgs),
    /// Van der Pol describing-function prediction and simulation.
    Vdp(VdpArgs),
    /// Crossover-model tracking, Bode data, margin and cost.
    Operator(OperatorArgs),
    /// Exact feedback linearization of a catalog plant.
    Feedbacklin(FeedbackArgs),
    /// Adaptive tracking benchmark.
    Adaptive(AdaptiveArgs),
    /// Lie-bracket tree, rank test and maneuvers.
    #[command(alias = "controllability")]
    Bracket(BracketArgs),
    /// Langevin ensemble driven by random kicks.
    Langevin(LangevinArgs),
    /// Filippov sliding across a switching surface.
    Sliding(SlidingArgs),
}

#[derive(Args)]
struct LinearArgs {
    /// Model document `{A, B, C, D}`.
    #[arg(long)]
    model: Option<PathBuf>,
    #[arg(long)]
    task: Option<String>,
    #[arg(long = "T")]
    t: Option<f64>,
    #[arg(long)]
    dt: Option<f64>,
    #[arg(long, value_delimiter = ',', allow_hyphen_values = true)]
    x0: Option<Vec<f64>>,
    #[arg(long, value_delimiter = ',', allow_hyphen_values = true)]
    target: Option<Vec<f64>>,
    /// Constant input vector.
    #[arg(long, value_delimiter = ',', allow_hyphen_values = true)]
    u: Option<Vec<f64>>,
}

#[derive(Args)]
struct VdpArgs {
    #[arg(long)]
    alpha: Option<f64>,
    #[arg(long = "T")]
    t: Option<f64>,
    #[arg(long)]
    dt: Option<f64>,
}

#[derive(Args)]
struct OperatorArgs {
    #[arg(long = "K")]
    k: Option<f64>,
    #[arg(long)]
    tau: Option<f64>,
    #[arg(long)]
    mode: Option<String>,
    #[arg(long = "T")]
    t: Option<f64>,
    #[arg(long)]
    dt: Option<f64>,
}

#[derive(Args)]
struct FeedbackArgs {
    #[arg(long)]
    system: Option<String>,
    #[arg(long, value_delimiter = ',', allow_hyphen_values = true)]
    beta: Option<Vec<f64>>,
    /// Butterworth cutoff used when `beta` is absent.
    #[arg(long)]
    cutoff: Option<f64>,
    #[arg(long, value_delimiter = ',', allow_hyphen_values = true)]
    x0: Option<Vec<f64>>,
    #[arg(long = "T")]
    t: Option<f64>,
    #[arg(long)]
    dt: Option<f64>,
}

#[derive(Args)]
struct AdaptiveArgs {
    #[arg(long)]
    benchmark: Option<String>,
    #[arg(long)]
    alpha: Option<f64>,
    #[arg(long)]
    update_gain: Option<f64>,
    #[arg(long = "T")]
    t: Option<f64>,
    #[arg(long)]
    dt: Option<f64>,
}

#[derive(Args)]
struct BracketArgs {
    #[arg(long)]
    system: Option<String>,
    #[arg(long)]
    depth: Option<usize>,
    #[arg(long, value_delimiter = ',', allow_hyphen_values = true)]
    at: Option<Vec<f64>>,
    /// Car wheelbase.
    #[arg(long = "L")]
    wheelbase: Option<f64>,
    /// `commutator` or `parking`.
    #[arg(long)]
    maneuver: Option<String>,
    #[arg(long)]
    eps: Option<f64>,
}

#[derive(Args)]
struct LangevinArgs {
    #[arg(long)]
    runs: Option<usize>,
    #[arg(long)]
    gamma: Option<f64>,
    #[arg(long)]
    m: Option<f64>,
    #[arg(long = "Q")]
    q: Option<f64>,
    /// Mean free time between kicks.
    #[arg(long)]
    t0: Option<f64>,
    #[arg(long = "T")]
    t: Option<f64>,
    #[arg(long)]
    dt: Option<f64>,
}

#[derive(Args)]
struct SlidingArgs {
    #[arg(long)]
    system: Option<String>,
    #[arg(long, value_delimiter = ',', allow_hyphen_values = true)]
    x0: Option<Vec<f64>>,
    #[arg(long = "T")]
    t: Option<f64>,
    #[arg(long)]
    dt: Option<f64>,
    #[arg(long)]
    band: Option<f64>,
}

fn overrides(cmd: &Command, seed: Option<u64>) -> Overrides {
    let mut o = Overrides::default();
    o.set("seed", seed);
    match cmd {
        Command::Linear(a) => {
            o.set(
                "model_file",
                a.model.as_ref().map(|p| p.display().to_string()),
            )
            .set("task", a.task.clone())
            .set("T", a.t)
            .set("dt", a.dt)
            .set_list("x0", a.x0.clone())
            .set_list("target", a.target.clone())
            .set_list("u", a.u.clone());
        }
        Command::Vdp(a) => {
            o.set("alpha", a.alpha).set("T", a.t).set("dt", a.dt);
        }
        Command::Operator(a) => {
            o.set("K", a.k)
                .set("tau", a.tau)
                .set("mode", a.mode.clone())
                .set("T", a.t)
                .set("dt", a.dt);
        }
        Command::Feedbacklin(a) => {
            o.set("system", a.system.clone())
                .set_list("beta", a.beta.clone())
                .set("cutoff", a.cutoff)
                .set_list("x0", a.x0.clone())
                .set("T", a.t)
                .set("dt", a.dt);
        }
        Command::Adaptive(a) => {
            o.set("benchmark", a.benchmark.clone())
                .set("alpha", a.alpha)
                .set("update_gain", a.update_gain)
                .set("T", a.t)
                .set("dt", a.dt);
        }
        Command::Bracket(a) => {
            o.set("system", a.system.clone())
                .set("depth", a.depth)
                .set_list("at", a.at.clone())
                .set("L", a.wheelbase)
                .set("maneuver", a.maneuver.clone())
                .set("eps", a.eps);
        }
        Command::Langevin(a) => {
            o.set("runs", a.runs)
                .set("gamma", a.gamma)
                .set("m", a.m)
                .set("Q", a.q)
                .set("t0", a.t0)
                .set("T", a.t)
                .set("dt", a.dt);
        }
        Command::Sliding(a) => {
            o.set("system", a.system.clone())
                .set_list("x0", a.x0.clone())
                .set("T", a.t)
                .set("dt", a.dt)
                .set("band", a.band);
        }
    }
    o
}

fn configure_threads() -> Result<(), Failure> {
    let Ok(raw) = std::env::var("LIECTL_THREADS") else {
        return Ok(());
    };
    let n: usize = raw.trim().parse().ok().filter(|&n| n > 0).ok_or_else(|| {
        Failure::config(format!(
            "LIECTL_THREADS must be a positive integer, got {raw:?}"
        ))
    })?;
    rayon::ThreadPoolBuilder::new()
        .num_threads(n)
        .build_global()
        .map_err(|e| Failure::config(format!("thread pool: {e}")))
}

fn run(cli: &Cli) -> Result<commands::Outcome, Failure> {
    configure_threads()?;
    let cfg = cli.config.as_deref();
    let o = overrides(&cli.command, cli.seed);
    match &cli.command {
        Command::Linear(_) => commands::linear::run(config::load(cfg, o)?),
        Command::Vdp(_) => commands::vdp::run(config::load(cfg, o)?),
        Command::Operator(_) => commands::operator::run(config::load(cfg, o)?),
        Command::Feedbacklin(_) => commands::feedbacklin::run(config::load(cfg, o)?),
        Command::Adaptive(_) => commands::adaptive::run(config::load(cfg, o)?),
        Command::Bracket(_) => commands::bracket::run(config::load(cfg, o)?),
        Command::Langevin(_) => commands::langevin::run(config::load(cfg, o)?),
        Command::Sliding(_) => commands::sliding::run(config::load(cfg, o)?),
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(&cli) {
        Ok(outcome) => {
            if let Err(f) = write_all(&cli.output_dir, &outcome.artifacts) {
                eprintln!("liectl: {f}");
                return ExitCode::from(f.code as u8);
            }
            for w in &outcome.warnings {
                eprintln!("liectl: warning: {w}");
            }
            let summary =
                serde_json::to_string_pretty(&outcome.summary).expect("summary serializes");
            // A closed stdout (e.g. piped into `head`) is not a failure.
            let _ = writeln!(std::io::stdout(), "{summary}");
            ExitCode::SUCCESS
        }
        Err(f) => {
            // Configuration errors never leave files behind.
            if f.code != EXIT_CONFIG && !f.artifacts.is_empty() {
                if let Err(w) = write_all(&cli.output_dir, &f.artifacts) {
                    eprintln!("liectl: {w}");
                }
            }
            eprintln!("liectl: error: {f}");
            ExitCode::from(f.code as u8)
        }
    }
}
