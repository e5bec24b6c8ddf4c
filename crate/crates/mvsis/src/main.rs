use std::path::PathBuf;
use std::process::ExitCode;

use clap::Parser;
use mvsis::harness::{exit_code, run_experiment, ExperimentConfig, ExperimentId};
use mvsis::Error;

/// Runs McKean-Vlasov SIS experiments and writes CSV and report files.
#[derive(Parser, Debug)]
#[command(name = "mvsis", version)]
struct Cli {
    /// One of extinction, persistence, transition, converge, lyapunov,
    /// bounds, analyze.
    experiment: String,
    /// Configuration file.
    #[arg(long)]
    config: PathBuf,
    /// Seed of the Brownian driver (overrides the config).
    #[arg(long)]
    seed: Option<u64>,
    /// Output directory (overrides the config).
    #[arg(long)]
    out: Option<PathBuf>,
}

fn threads_from_env() -> Result<Option<usize>, Error> {
    match std::env::var("MVSIS_THREADS") {
        Ok(v) => match v.trim().parse::<usize>() {
            Ok(n) if n >= 1 => Ok(Some(n)),
            _ => Err(Error::Config(format!("MVSIS_THREADS must be a positive integer, got '{v}'"))),
        },
        Err(_) => Ok(None),
    }
}

fn run(cli: Cli) -> Result<(), Error> {
    let id: ExperimentId = cli.experiment.parse()?;
    let mut cfg = ExperimentConfig::from_file(id, &cli.config)?;
    if let Some(seed) = cli.seed {
        cfg.seed = seed;
    }
    if let Some(out) = cli.out {
        cfg.out_dir = out;
    }
    if let Some(n) = threads_from_env()? {
        rayon::ThreadPoolBuilder::new()
            .num_threads(n)
            .build_global()
            .map_err(|e| Error::Config(format!("cannot start {n} worker threads: {e}")))?;
    }
    let out = run_experiment(&cfg)?;
    for f in &out.files {
        println!("{}", f.display());
    }
    Ok(())
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let code = if e.use_stderr() { 2 } else { 0 };
            let _ = e.print();
            return ExitCode::from(code);
        }
    };
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("mvsis: {e}");
            ExitCode::from(exit_code(&e) as u8)
        }
    }
}
