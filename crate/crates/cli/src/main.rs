//! `shotwright`: synthetic data, pretraining, actor-critic fine-tuning,
//! evaluation and the broadcast style simulator.
//!
//! Every command writes its outputs plus a `manifest.json` into `--out`.
//! Re-running a command with the same inputs and seed reproduces every
//! output byte for byte, except the manifest's duration.

mod commands;
mod manifest;

use std::path::PathBuf;

use anyhow::{bail, Context, Result};
use clap::{Args, Parser, Subcommand};

use shotwright::broadcast::StylePreset;

pub const THREADS_ENV: &str = "SHOTWRIGHT_THREADS";

#[derive(Parser, Debug)]
#[command(name = "shotwright", version, about = "Shot-attribute prediction and broadcast style imitation")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Write a Markov-chain synthetic dataset.
    SynthData(SynthArgs),
    /// Supervised pretraining of the actor.
    Pretrain(TrainArgs),
    /// Actor-critic fine-tuning from a checkpoint.
    TrainRl(TrainArgs),
    /// Score a checkpoint on a dataset.
    Eval(EvalArgs),
    /// Edit synthetic lecture scenes in a preset style and learn to imitate it.
    BroadcastSim(BroadcastArgs),
}

#[derive(Args, Debug)]
struct SynthArgs {
    #[arg(long)]
    out: PathBuf,
    #[arg(long, default_value_t = 100)]
    scenes: usize,
    /// Extra scenes from the same chain, written to `test.tsv`.
    #[arg(long, default_value_t = 0)]
    test_scenes: usize,
    #[arg(long, default_value_t = 12)]
    shots: usize,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    /// Probability that an attribute follows its successor map.
    #[arg(long, default_value_t = 1.0)]
    determinism: f64,
    /// Store synthetic distributions at this concentration.
    #[arg(long)]
    concentration: Option<f64>,
    /// Permit scenes too short to hold one episode.
    #[arg(long)]
    allow_short: bool,
}

/// Settings shared by the commands that resolve a training config.
#[derive(Args, Debug, Clone, Default)]
struct ConfigArgs {
    /// `key = value` config file; flags override it.
    #[arg(long)]
    config: Option<PathBuf>,
    #[arg(long)]
    seed: Option<u64>,
    /// stored, onehot or synthetic.
    #[arg(long)]
    repr: Option<String>,
    #[arg(long)]
    concentration: Option<f64>,
    #[arg(long)]
    gamma: Option<f64>,
    #[arg(long)]
    epochs: Option<usize>,
    #[arg(long)]
    rl_iterations: Option<usize>,
    #[arg(long)]
    actor_lr: Option<f64>,
    #[arg(long)]
    critic_lr: Option<f64>,
    #[arg(long)]
    batch_size: Option<usize>,
    /// Any other config key, as `key=value`. Repeatable.
    #[arg(long = "set", value_name = "KEY=VALUE")]
    overrides: Vec<String>,
    /// Taxonomy file for the dataset; the built-in taxonomy otherwise.
    #[arg(long)]
    taxonomy: Option<PathBuf>,
}

#[derive(Args, Debug)]
struct TrainArgs {
    #[arg(long)]
    dataset: PathBuf,
    /// Starting checkpoint. Required for train-rl.
    #[arg(long)]
    ckpt: Option<PathBuf>,
    #[arg(long)]
    out: PathBuf,
    /// Also write the training log as CSV.
    #[arg(long)]
    emit_csv: bool,
    #[command(flatten)]
    config: ConfigArgs,
}

#[derive(Args, Debug)]
struct EvalArgs {
    #[arg(long)]
    dataset: PathBuf,
    #[arg(long, required_unless_present = "random_init")]
    ckpt: Option<PathBuf>,
    /// Evaluate freshly initialized networks instead of a checkpoint.
    #[arg(long, conflicts_with = "ckpt")]
    random_init: bool,
    #[arg(long)]
    out: PathBuf,
    /// Row label in the printed table.
    #[arg(long, default_value = "shotwright")]
    label: String,
    #[arg(long)]
    emit_csv: bool,
    #[command(flatten)]
    config: ConfigArgs,
}

#[derive(Args, Debug)]
struct BroadcastArgs {
    #[arg(long, default_value = "slides")]
    preset: StylePreset,
    /// Steps per scene.
    #[arg(long = "length", short = 'T', default_value_t = 3000)]
    length: usize,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    /// Held-out scenes to edit with the learned policy.
    #[arg(long, default_value_t = 2)]
    test_scenes: usize,
    /// Expected new events per step.
    #[arg(long, default_value_t = 0.1)]
    event_rate: f64,
    #[arg(long)]
    epochs: Option<usize>,
    #[arg(long)]
    rl_iterations: Option<usize>,
    #[arg(long)]
    out: PathBuf,
    #[arg(long)]
    emit_csv: bool,
}

fn configure_threads() -> Result<()> {
    let Ok(value) = std::env::var(THREADS_ENV) else {
        return Ok(());
    };
    let n: usize = value
        .trim()
        .parse()
        .with_context(|| format!("{THREADS_ENV} must be a positive integer, got `{value}`"))?;
    if n == 0 {
        bail!("{THREADS_ENV} must be a positive integer, got 0");
    }
    rayon::ThreadPoolBuilder::new()
        .num_threads(n)
        .build_global()
        .context("configuring the thread pool")
}

fn main() -> Result<()> {
    let cli = Cli::parse();
    configure_threads()?;
    match cli.command {
        Command::SynthData(a) => commands::synth_data(&a),
        Command::Pretrain(a) => commands::pretrain(&a),
        Command::TrainRl(a) => commands::train_rl(&a),
        Command::Eval(a) => commands::eval(&a),
        Command::BroadcastSim(a) => commands::broadcast_sim(&a),
    }
}
