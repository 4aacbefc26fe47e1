use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand};
use qanneal_cli::{commands, CliError, RunConfig};

#[derive(Parser)]
#[command(name = "qanneal", version, about = "Annealing, quantum-walk and bandit experiments")]
struct Cli {
    #[command(subcommand)]
    command: Command,

    /// TOML run config; every table is optional.
    #[arg(long, global = true)]
    config: Option<PathBuf>,

    /// Seed for randomized runs; overrides the config's seed.
    #[arg(long, global = true)]
    seed: Option<u64>,

    /// Directory for report files, created if missing.
    #[arg(long, global = true, default_value = ".")]
    out: PathBuf,

    /// Worker threads for parallel strands and studies.
    #[arg(long, global = true)]
    threads: Option<usize>,
}

#[derive(Subcommand, Clone, Copy)]
enum Command {
    /// Anneal on the configured instance.
    Optimize,
    /// Hit-and-run diagnostics at a fixed temperature.
    Sample,
    /// Walk-operator eigenphases as CSV.
    Spectrum,
    /// π/3 amplification and approximate-reflector demos.
    Amplify,
    /// Warmness, overlap, spectral and effective-gap suites.
    ValidateLemmas,
    /// Regret traces for the doubling-interval learners.
    Bandit,
}

fn run(cli: &Cli) -> Result<Vec<PathBuf>, CliError> {
    if let Some(n) = cli.threads {
        rayon::ThreadPoolBuilder::new()
            .num_threads(n)
            .build_global()
            .map_err(|e| CliError::Config(format!("thread pool: {e}")))?;
    }
    let mut config = match &cli.config {
        Some(path) => RunConfig::load(path)?,
        None => RunConfig::default(),
    };
    config.resolve_seed(cli.seed);
    std::fs::create_dir_all(&cli.out).map_err(|source| CliError::Io {
        path: cli.out.clone(),
        source,
    })?;
    match cli.command {
        Command::Optimize => commands::optimize(&config, &cli.out),
        Command::Sample => commands::sample(&config, &cli.out),
        Command::Spectrum => commands::spectrum(&config, &cli.out),
        Command::Amplify => commands::amplify(&config, &cli.out),
        Command::ValidateLemmas => commands::validate_lemmas(&config, &cli.out),
        Command::Bandit => commands::bandit(&config, &cli.out),
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(&cli) {
        Ok(paths) => {
            for p in paths {
                println!("{}", p.display());
            }
            ExitCode::SUCCESS
        }
        Err(e) => {
            eprintln!("qanneal: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
