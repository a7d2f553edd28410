//! `pfvar`: runs particle filter variance experiments described by a TOML config.

mod config;
mod experiment;
mod models;
mod output;
mod selftest;

use anyhow::{bail, Context, Result};
use clap::{Parser, Subcommand};
use config::{ExperimentConfig, Format, Mode};
use experiment::Ctx;
use output::Sink;
use std::path::{Path, PathBuf};

#[derive(Parser)]
#[command(name = "pfvar", version, about = "Particle filter variance estimation experiments")]
struct Cli {
    #[command(subcommand)]
    command: Command,
    /// Experiment configuration (TOML).
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    /// Overrides the config seed.
    #[arg(long, global = true)]
    seed: Option<u64>,
    /// Overrides the config output directory.
    #[arg(long, global = true)]
    out_dir: Option<PathBuf>,
    /// Worker threads for replicates; defaults to all cores.
    #[arg(long, global = true)]
    threads: Option<usize>,
    /// Format of per-replicate reports; summaries are always CSV.
    #[arg(long, global = true, value_enum)]
    format: Option<Format>,
}

#[derive(Subcommand, Clone, Copy, PartialEq, Eq)]
enum Command {
    /// Run the experiment in the config's mode.
    Run,
    /// Check the fast estimators against exhaustive enumeration (N = 3, n = 2).
    SelfTest,
    /// First stage of a two-stage config only: write the allocation and plan configs.
    Allocate,
    /// Run an adaptive config.
    Adapt,
    /// Standard and V-based variance estimates across replicates, for a fixed config.
    ReplicateStudy,
}

fn main() {
    if let Err(e) = run(Cli::parse()) {
        eprintln!("error: {e:#}");
        std::process::exit(1);
    }
}

fn run(cli: Cli) -> Result<()> {
    if let Some(threads) = cli.threads {
        rayon::ThreadPoolBuilder::new().num_threads(threads).build_global().context("cannot start the thread pool")?;
    }
    if cli.command == Command::SelfTest {
        let dir = cli.out_dir.clone().unwrap_or_else(|| PathBuf::from("out"));
        let mut sink = Sink::new(&dir, cli.format.unwrap_or_default())?;
        return selftest::self_test(cli.seed.unwrap_or(0), &mut sink);
    }
    let Some(path) = &cli.config else { bail!("--config is required for this command") };
    let mut config = ExperimentConfig::load(path)?;
    if let Some(seed) = cli.seed {
        config.seed = seed;
    }
    let base_dir = path.parent().unwrap_or(Path::new("."));
    let model = config.model.build(base_dir).context("model")?;
    let dir = cli.out_dir.clone().unwrap_or_else(|| base_dir.join(config.output_dir()));
    let mut sink = Sink::new(&dir, cli.format.unwrap_or(config.output.format))?;
    let ctx = Ctx { config: &config, model: &model, base_dir, sink: &mut sink };
    match (cli.command, config.mode()) {
        (Command::Run, Mode::Fixed(m)) => experiment::run_fixed(ctx, &m)?,
        (Command::Run | Command::Adapt, Mode::Adaptive(m)) => experiment::run_adaptive(ctx, &m)?,
        (Command::Run, Mode::TwoStage(m)) => experiment::run_two_stage(ctx, &m)?,
        (Command::Allocate, Mode::TwoStage(m)) => experiment::run_allocate(ctx, &m)?,
        (Command::ReplicateStudy, Mode::Fixed(m)) => experiment::run_replicate_study(ctx, &m)?,
        (Command::Adapt, _) => bail!("adapt needs an [adaptive] table in the config"),
        (Command::Allocate, _) => bail!("allocate needs a [two_stage] table in the config"),
        (Command::ReplicateStudy, _) => bail!("replicate-study needs a [fixed] table in the config"),
        (Command::SelfTest, _) => unreachable!(),
    }
    for p in &sink.written {
        println!("{}", p.display());
    }
    Ok(())
}
