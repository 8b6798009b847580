use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use tdse_cli::{run_experiment, CliError, ExperimentConfig, Suite};

#[derive(Parser)]
#[command(name = "tdse", version, about = "Run well-posedness and sensitivity experiments")]
struct Cli {
    #[command(subcommand)]
    command: Command,

    #[command(flatten)]
    opts: Options,
}

#[derive(Args)]
struct Options {
    /// TOML experiment configuration; built-in defaults when absent.
    #[arg(long, global = true)]
    config: Option<PathBuf>,

    /// Output directory for CSVs and report.json.
    #[arg(long, global = true, default_value = "tdse-out")]
    out: PathBuf,

    /// Seed for random probes; overrides the configuration.
    #[arg(long, global = true)]
    seed: Option<u64>,

    /// Number of suites run concurrently.
    #[arg(long, global = true, default_value_t = 1)]
    workers: usize,
}

#[derive(Subcommand, Clone, Copy)]
enum Command {
    /// Check the growth hypotheses on the potentials.
    Validate,
    /// Propagate and track norm conservation and weighted norms.
    Propagate,
    /// Convergence of the regularized flow as the cutoff is removed.
    EpsSweep,
    /// Decay of the parametrix residual in the shift.
    Parametrix,
    /// Uniform bound on the cutoff commutator.
    Commutator,
    /// Difference quotients against the variational equation.
    Sensitivity,
    /// Continuity modulus of the solution in the parameter.
    Continuity,
    /// Two interacting particles on a line.
    TwoParticle,
    /// Every suite listed in the configuration.
    All,
}

impl Command {
    fn suites(self) -> Vec<Suite> {
        match self {
            Command::Validate => vec![Suite::Validate],
            Command::Propagate => vec![Suite::Propagate],
            Command::EpsSweep => vec![Suite::EpsSweep],
            Command::Parametrix => vec![Suite::Parametrix],
            Command::Commutator => vec![Suite::Commutator],
            Command::Sensitivity => vec![Suite::Sensitivity],
            Command::Continuity => vec![Suite::Continuity],
            Command::TwoParticle => vec![Suite::TwoParticle],
            Command::All => vec![],
        }
    }
}

fn run(cli: &Cli) -> Result<u8, CliError> {
    let mut cfg = match &cli.opts.config {
        Some(path) => ExperimentConfig::load(path)?,
        None => ExperimentConfig::default(),
    };
    if let Some(seed) = cli.opts.seed {
        cfg.seed = seed;
    }
    let outcome = run_experiment(&cfg, &cli.command.suites(), &cli.opts.out, cli.opts.workers)?;
    for r in &outcome.runs {
        println!("[{}] {}: {}", r.verdict.label(), r.suite.name(), r.message);
    }
    println!("report {} sha256 {}", cli.opts.out.join("report.json").display(), outcome.report_sha256);
    Ok(outcome.exit_code())
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(&cli) {
        Ok(code) => ExitCode::from(code),
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code())
        }
    }
}
