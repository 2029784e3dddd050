use std::path::PathBuf;
use std::process::ExitCode;
use std::time::Instant;

use clap::{Parser, Subcommand};

use photonlink_cli::commands::{run_command, Command};
use photonlink_cli::config::ExperimentConfig;
use photonlink_cli::manifest::{write_outputs, RunManifest};
use photonlink_cli::CliError;

#[derive(Debug, Parser)]
#[command(
    name = "photonlink",
    version,
    about = "Three-level photon detector and OOK link experiments"
)]
struct Cli {
    #[command(subcommand)]
    command: Cmd,
}

#[derive(Debug, clap::Args)]
struct Common {
    /// TOML experiment configuration.
    #[arg(long)]
    config: PathBuf,
    /// Override a configuration key, e.g. `--set device.kappa_rad_per_s=2pi*1e9`.
    #[arg(long = "set", value_name = "KEY=VALUE")]
    set: Vec<String>,
    /// Replaces the configured seed.
    #[arg(long)]
    seed: Option<u64>,
    /// Worker threads; results do not depend on this.
    #[arg(long)]
    workers: Option<usize>,
    /// Output directory (defaults to `out_dir` from the configuration).
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Debug, Subcommand)]
enum Cmd {
    /// Stage probabilities at one operating point.
    Detect(Common),
    /// Miss-detection probability over arrival rate, kappa and gamma.
    MissSweep(Common),
    /// Bit error rate of Viterbi decoding over received power.
    BerSweep(Common),
    /// Achievable rate over received power.
    RateSweep(Common),
    /// Survivor statistics and saturated excitation sweeps.
    SaturationSweep(Common),
    /// Cutoff photon numbers against kappa*T_c and their power-law fit.
    CutoffFit(Common),
    /// Closed-form versus oracle checks.
    Validate(Common),
}

fn split(cmd: Cmd) -> (Command, Common) {
    match cmd {
        Cmd::Detect(c) => (Command::Detect, c),
        Cmd::MissSweep(c) => (Command::MissSweep, c),
        Cmd::BerSweep(c) => (Command::BerSweep, c),
        Cmd::RateSweep(c) => (Command::RateSweep, c),
        Cmd::SaturationSweep(c) => (Command::SaturationSweep, c),
        Cmd::CutoffFit(c) => (Command::CutoffFit, c),
        Cmd::Validate(c) => (Command::Validate, c),
    }
}

fn run(cmd: Command, args: Common) -> Result<(), CliError> {
    let start = Instant::now();
    let mut overrides = args.set;
    if let Some(seed) = args.seed {
        overrides.push(format!("seed={seed}"));
    }
    if let Some(w) = args.workers {
        overrides.push(format!("workers={w}"));
    }
    let cfg = ExperimentConfig::load(&args.config, &overrides)?;
    let workers = cfg
        .workers
        .unwrap_or_else(|| std::thread::available_parallelism().map_or(1, |n| n.get()));
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(workers)
        .build()
        .map_err(|e| CliError::Config(format!("cannot start {workers} workers: {e}")))?;
    let outcome = pool.install(|| run_command(cmd, &cfg))?;

    let dir = args.out.unwrap_or_else(|| PathBuf::from(&cfg.out_dir));
    let mut outputs = outcome.outputs;
    outputs.push(photonlink_cli::commands::Output {
        file: "config.resolved.toml".into(),
        csv: cfg.to_toml_string(),
        rows: 0,
    });
    let records = write_outputs(&dir, &outputs)?;
    RunManifest {
        command: cmd.name().into(),
        version: env!("CARGO_PKG_VERSION").into(),
        config_hash: cfg.hash(),
        seed: cfg.seed,
        workers,
        outputs: records,
        wall_time_s: start.elapsed().as_secs_f64(),
    }
    .write(&dir)?;
    for line in &outcome.summary {
        println!("{line}");
    }
    println!("wrote {} files to {}", outputs.len() + 1, dir.display());
    if !outcome.failed.is_empty() {
        return Err(CliError::Validation(outcome.failed.join(", ")));
    }
    Ok(())
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let (cmd, args) = split(cli.command);
    match run(cmd, args) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("{}", e.to_json());
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
