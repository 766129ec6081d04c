use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, ValueEnum};
use stabilitylab_core::experiment::{self, ExperimentKind, OutputFormat};
use stabilitylab_core::Error;

const SEED_ENV: &str = "STABILITYLAB_SEED";

#[derive(Debug, Clone, Copy, ValueEnum)]
enum Kind {
    Calibrate,
    Stability,
    Tightness,
    OracleCheck,
}

impl From<Kind> for ExperimentKind {
    fn from(k: Kind) -> Self {
        match k {
            Kind::Calibrate => ExperimentKind::Calibrate,
            Kind::Stability => ExperimentKind::Stability,
            Kind::Tightness => ExperimentKind::Tightness,
            Kind::OracleCheck => ExperimentKind::OracleCheck,
        }
    }
}

#[derive(Debug, Clone, Copy, ValueEnum)]
enum Format {
    Csv,
    Json,
}

/// Stability experiments for random optimization problems.
#[derive(Debug, Parser)]
#[command(name = "stabilitylab", version)]
struct Cli {
    /// Experiment to run; its `[kind]` section is read from the config.
    kind: Kind,
    #[arg(long)]
    config: PathBuf,
    /// Master seed; overrides STABILITYLAB_SEED and the config.
    #[arg(long)]
    seed: Option<u64>,
    /// Worker threads (default: all cores).
    #[arg(long)]
    jobs: Option<usize>,
    #[arg(long)]
    out: Option<PathBuf>,
    #[arg(long, value_enum)]
    format: Option<Format>,
}

enum Failure {
    Validation(Error),
    Runtime(Error),
}

fn run(cli: Cli) -> Result<(), Failure> {
    let mut spec =
        experiment::load_config(&cli.config, cli.kind.into()).map_err(Failure::Validation)?;
    if let Ok(v) = std::env::var(SEED_ENV) {
        spec.seed = v.trim().parse().map_err(|_| {
            Failure::Validation(Error::Validation(format!("{SEED_ENV}='{v}' is not a u64")))
        })?;
    }
    if let Some(s) = cli.seed {
        spec.seed = s;
    }
    if let Some(out) = cli.out {
        spec.out = out;
    }
    if let Some(f) = cli.format {
        spec.format = match f {
            Format::Csv => OutputFormat::Csv,
            Format::Json => OutputFormat::Json,
        };
    }
    if cli.jobs == Some(0) {
        return Err(Failure::Validation(Error::Validation("--jobs must be >= 1".into())));
    }
    spec.validate().map_err(Failure::Validation)?;

    let jobs = cli
        .jobs
        .unwrap_or_else(|| std::thread::available_parallelism().map_or(1, |n| n.get()));
    let record = experiment::run_experiment_with_jobs(&spec, jobs).map_err(Failure::Runtime)?;
    let path = experiment::emit_results(&record, spec.format, &spec.out).map_err(Failure::Runtime)?;

    eprintln!("wrote {} rows to {}", record.rows.len(), path.display());
    for c in &record.checks {
        let verdict = match c.pass {
            Some(true) => "PASS",
            Some(false) => "FAIL",
            None => "INFO",
        };
        eprintln!("{verdict} {}: {} (target {})", c.name, c.value, c.target);
    }
    // Partial output is already on disk; the run still counts as failed.
    if record.failures() > 0 {
        let first = record.rows.iter().find(|r| r.is_failure()).map(|r| r.statistic.clone());
        return Err(Failure::Runtime(Error::InvalidArgument(format!(
            "{} replications failed, first marker {}",
            record.failures(),
            first.unwrap_or_default()
        ))));
    }
    Ok(())
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(Failure::Validation(e)) => {
            eprintln!("error: {e}");
            ExitCode::from(2)
        }
        Err(Failure::Runtime(e)) => {
            eprintln!("error: {e}");
            ExitCode::from(3)
        }
    }
}
