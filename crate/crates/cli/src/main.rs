use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand, ValueEnum};

mod commands;
mod manifest;

/// Robust action governor toolkit: safe sets, governed simulation, shielded
/// Q-learning, distillation and the mass-spring-damper experiments.
#[derive(Debug, Parser)]
#[command(name = "ragkit", version)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Safe-set computation.
    #[command(subcommand)]
    Safeset(SafesetCmd),
    /// Governed closed-loop simulation.
    #[command(subcommand)]
    Govern(GovernCmd),
    /// Reinforcement learning.
    #[command(subcommand)]
    Rl(RlCmd),
    /// Fit an explicit policy to a governed expert.
    Distill(DistillArgs),
    /// Monte-Carlo evaluation of a policy.
    Evaluate(EvaluateArgs),
    /// Mass-spring-damper benchmark: export its model or run an experiment.
    #[command(subcommand)]
    Msd(MsdCmd),
}

#[derive(Debug, Subcommand)]
enum SafesetCmd {
    /// Iterate the safe-set recursion k times from the constraint set.
    Compute(SafesetArgs),
}

#[derive(Debug, Args)]
struct SafesetArgs {
    /// PWA model JSON.
    #[arg(long)]
    model: PathBuf,
    /// Constraint union JSON.
    #[arg(long)]
    constraints: PathBuf,
    #[arg(long, default_value_t = 60)]
    k: usize,
    /// Samples per monotonicity check.
    #[arg(long, default_value_t = 10_000)]
    samples: usize,
    /// Stop once two consecutive iterates agree on the samples.
    #[arg(long)]
    early_stop: bool,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    #[arg(long)]
    out: PathBuf,
}

#[derive(Debug, Subcommand)]
enum GovernCmd {
    /// Simulate one governed rollout of the MSD plant and write its trajectory.
    Simulate(SimulateArgs),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
enum DisturbanceArg {
    Random,
    Adversarial,
    None,
}

/// MSD plant selection shared by the simulation commands.
#[derive(Debug, Args)]
struct PlantArgs {
    /// MSD parameter overrides (JSON object).
    #[arg(long)]
    params: Option<PathBuf>,
    /// Use the adaptation variant: d replaced and the plant mass fixed.
    #[arg(long)]
    variant: bool,
    /// Reference period in steps.
    #[arg(long, default_value_t = 60)]
    period: usize,
}

#[derive(Debug, Args)]
struct SimulateArgs {
    /// Model used by the governor; defaults to the MSD model of the plant.
    #[arg(long)]
    model: Option<PathBuf>,
    #[arg(long)]
    safe: PathBuf,
    /// `constant:<u>` or a policy JSON file.
    #[arg(long)]
    policy: String,
    #[arg(long, default_value_t = 240)]
    steps: usize,
    #[arg(long, value_enum, default_value_t = DisturbanceArg::Random)]
    disturbance: DisturbanceArg,
    /// Initial state, comma separated.
    #[arg(long, default_value = "0,0", value_delimiter = ',')]
    x0: Vec<f64>,
    /// Apply the policy without the governor.
    #[arg(long)]
    unshielded: bool,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    #[command(flatten)]
    plant: PlantArgs,
    #[arg(long)]
    out: PathBuf,
}

#[derive(Debug, Subcommand)]
enum RlCmd {
    /// Neural-fitted Q-learning, optionally shielded by the governor.
    Train(TrainArgs),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
enum EnvArg {
    Msd,
}

#[derive(Debug, Args)]
struct TrainArgs {
    #[arg(long, value_enum, default_value_t = EnvArg::Msd)]
    env: EnvArg,
    /// Learner configuration JSON; omitted fields take their defaults.
    #[arg(long)]
    config: Option<PathBuf>,
    /// Safe set used to shield training.
    #[arg(long)]
    shield: Option<PathBuf>,
    /// Q-network JSON to start from.
    #[arg(long)]
    init: Option<PathBuf>,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    #[command(flatten)]
    plant: PlantArgs,
    /// Run directory.
    #[arg(long)]
    out: PathBuf,
}

#[derive(Debug, Args)]
struct DistillArgs {
    /// Run directory produced by `rl train`.
    #[arg(long)]
    expert: PathBuf,
    /// Safe set of the governor; defaults to the run's shield.
    #[arg(long)]
    shield: Option<PathBuf>,
    #[arg(long)]
    config: Option<PathBuf>,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    #[arg(long)]
    out: PathBuf,
}

#[derive(Debug, Args)]
struct EvaluateArgs {
    /// `constant:<u>` or a policy JSON file.
    #[arg(long)]
    policy: String,
    /// Govern the policy with this safe set.
    #[arg(long)]
    shield: Option<PathBuf>,
    #[arg(long, default_value_t = 500)]
    rollouts: usize,
    #[arg(long, default_value_t = 240)]
    steps: usize,
    #[arg(long, value_enum, default_value_t = DisturbanceArg::Random)]
    disturbance: DisturbanceArg,
    #[arg(long, default_value = "0,0", value_delimiter = ',')]
    x0: Vec<f64>,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    #[command(flatten)]
    plant: PlantArgs,
    /// Metrics JSON; printed to stdout either way.
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Debug, Subcommand)]
enum MsdCmd {
    /// Write the MSD model, constraint polygon and parameters.
    Export(ExportArgs),
    /// Nominal vs governed rollout under the adversarial disturbance.
    #[command(name = "governed_vs_nominal")]
    GovernedVsNominal(ExperimentArgs),
    /// Governed rollouts under random disturbances.
    #[command(name = "monte_carlo_500")]
    MonteCarlo500(ExperimentArgs),
    /// Shielded and unshielded training on the plant variant.
    #[command(name = "safe_rl_train")]
    SafeRlTrain(ExperimentArgs),
    /// Distilled explicit policy vs the governed pipeline.
    #[command(name = "distill_compare")]
    DistillCompare(ExperimentArgs),
}

#[derive(Debug, Args)]
struct ExportArgs {
    #[command(flatten)]
    plant: PlantArgs,
    /// Output directory.
    #[arg(long)]
    out: PathBuf,
}

#[derive(Debug, Args)]
struct ExperimentArgs {
    #[arg(long, default_value_t = 0)]
    seed: u64,
    /// Experiment configuration JSON; omitted fields take their defaults.
    #[arg(long)]
    config: Option<PathBuf>,
    /// Directory of reusable safe sets and nominal networks.
    #[arg(long)]
    cache: Option<PathBuf>,
    #[arg(long)]
    out: PathBuf,
}

fn init_threads() -> anyhow::Result<()> {
    if let Ok(v) = std::env::var("RAGKIT_THREADS") {
        let n: usize = v
            .parse()
            .map_err(|_| commands::InputError(format!("RAGKIT_THREADS must be a count, got {v:?}")))?;
        rayon::ThreadPoolBuilder::new().num_threads(n).build_global()?;
    }
    Ok(())
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(c) => c,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() {
                ExitCode::from(2)
            } else {
                ExitCode::SUCCESS
            };
        }
    };
    let result = init_threads().and_then(|_| match cli.command {
        Command::Safeset(SafesetCmd::Compute(a)) => commands::safeset_compute(a),
        Command::Govern(GovernCmd::Simulate(a)) => commands::govern_simulate(a),
        Command::Rl(RlCmd::Train(a)) => commands::rl_train(a),
        Command::Distill(a) => commands::distill(a),
        Command::Evaluate(a) => commands::evaluate(a),
        Command::Msd(MsdCmd::Export(a)) => commands::msd_export(a),
        Command::Msd(MsdCmd::GovernedVsNominal(a)) => {
            commands::msd_experiment(ragkit::msd::Experiment::GovernedVsNominal, a)
        }
        Command::Msd(MsdCmd::MonteCarlo500(a)) => {
            commands::msd_experiment(ragkit::msd::Experiment::MonteCarlo500, a)
        }
        Command::Msd(MsdCmd::SafeRlTrain(a)) => {
            commands::msd_experiment(ragkit::msd::Experiment::SafeRlTrain, a)
        }
        Command::Msd(MsdCmd::DistillCompare(a)) => {
            commands::msd_experiment(ragkit::msd::Experiment::DistillCompare, a)
        }
    });
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e:#}");
            if e.downcast_ref::<commands::InputError>().is_some() {
                ExitCode::from(2)
            } else {
                ExitCode::from(1)
            }
        }
    }
}
