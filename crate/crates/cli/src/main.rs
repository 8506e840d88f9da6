//! `chain-defect`: run defect-imaging experiments from the command line.
//!
//! ```text
//! chain-defect simulate --out data
//! chain-defect invert --config baseline.toml --level 1e-6 --seed 3
//! chain-defect mc-invert --preset smooth-comparison --workers 4
//! chain-defect validate
//! ```
//!
//! Exit status: 0 success, 1 failed validation or runtime error, 2 invalid
//! configuration or arguments.

use std::path::PathBuf;
use std::process::ExitCode;

use chain_defect::harness::{self, ExperimentConfig, ExperimentKind, PRESETS};
use clap::{Args, Parser, Subcommand};

#[derive(Parser, Debug)]
#[command(name = "chain-defect", version, about = "Single-defect imaging for damped spring-mass chains")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Synthesize a (noisy) measurement file and its trace
    Simulate(Common),
    /// Invert one measurement (synthesized, or loaded with --measurement)
    Invert(Common),
    /// Monte Carlo inversion with the perturbation-averaged objective
    McInvert(Common),
    /// Inversion error as a function of noise level
    SweepNoise(Common),
    /// Inversion error as a function of defect index
    SweepLocation(Common),
    /// Inversion error as a function of defect stiffness
    SweepSize(Common),
    /// Dense residual over a (j, k) grid
    Landscape(Common),
    /// Oracle-equivalence and time-domain self-checks
    Validate(Common),
}

#[derive(Args, Debug)]
struct Common {
    /// TOML experiment configuration
    #[arg(long, conflicts_with = "preset")]
    config: Option<PathBuf>,
    /// Built-in configuration of a reference study
    #[arg(long, value_parser = clap::builder::PossibleValuesParser::new(PRESETS))]
    preset: Option<String>,
    /// Experiment seed
    #[arg(long)]
    seed: Option<u64>,
    /// Output directory
    #[arg(long)]
    out: Option<PathBuf>,
    /// Worker threads
    #[arg(long, env = "CHAIN_DEFECT_WORKERS")]
    workers: Option<usize>,
    /// Relative noise level η
    #[arg(long)]
    level: Option<f64>,
    /// Defect index
    #[arg(long)]
    j: Option<usize>,
    /// Defect stiffness
    #[arg(long)]
    k: Option<f64>,
    /// Measurement file to invert
    #[arg(long)]
    measurement: Option<PathBuf>,
}

impl Command {
    fn split(self) -> (ExperimentKind, Common) {
        match self {
            Command::Simulate(c) => (ExperimentKind::Simulate, c),
            Command::Invert(c) => (ExperimentKind::Invert, c),
            Command::McInvert(c) => (ExperimentKind::McInvert, c),
            Command::SweepNoise(c) => (ExperimentKind::SweepNoise, c),
            Command::SweepLocation(c) => (ExperimentKind::SweepLocation, c),
            Command::SweepSize(c) => (ExperimentKind::SweepSize, c),
            Command::Landscape(c) => (ExperimentKind::Landscape, c),
            Command::Validate(c) => (ExperimentKind::Validate, c),
        }
    }
}

fn build_config(kind: ExperimentKind, args: Common) -> chain_defect::Result<ExperimentConfig> {
    let mut cfg = match (&args.config, &args.preset) {
        (Some(path), _) => ExperimentConfig::load(path)?,
        (None, Some(name)) => ExperimentConfig::preset(name)?,
        (None, None) => ExperimentConfig::default(),
    };
    if cfg.kind.is_some_and(|k| k != kind) {
        log::warn!(
            "configuration kind `{}` overridden by subcommand `{}`",
            cfg.kind.map(|k| k.name()).unwrap_or_default(),
            kind.name()
        );
    }
    cfg.kind = Some(kind);
    if let Some(seed) = args.seed {
        cfg.seed = seed;
    }
    if let Some(out) = args.out {
        cfg.output_dir = out;
    }
    if args.workers.is_some() {
        cfg.workers = args.workers;
    }
    if let Some(level) = args.level {
        cfg.noise.level = level;
    }
    if let Some(j) = args.j {
        cfg.defect.index = j;
    }
    if let Some(k) = args.k {
        cfg.defect.stiffness = k;
    }
    if args.measurement.is_some() {
        cfg.measurement = args.measurement;
    }
    Ok(cfg)
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("info")).init();
    let cli = Cli::parse();
    let (kind, args) = cli.command.split();
    let result = build_config(kind, args).and_then(|cfg| harness::run(&cfg));
    match &result {
        Ok(outcome) => {
            for path in &outcome.artifacts {
                println!("{}", path.display());
            }
            if !outcome.passed {
                eprintln!("error: validation failed");
            }
        }
        Err(e) => eprintln!("error: {e}"),
    }
    ExitCode::from(harness::exit_code(&result) as u8)
}
