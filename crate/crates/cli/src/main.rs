//! `corrlsd`: runs configured experiments and writes CSV/JSON tables.
//!
//! Exit codes: 0 success, 2 configuration error, 3 numerical failure.

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand};
use corrlsd::harness::{self, ExperimentConfig, ExperimentKind};

#[derive(Debug, Parser)]
#[command(name = "corrlsd", version, about = "Sample correlation spectra and Marchenko-Pastur limits")]
struct Cli {
    #[command(subcommand)]
    command: Command,

    /// TOML experiment config; defaults are used when omitted.
    #[arg(long, global = true)]
    config: Option<PathBuf>,

    /// Top-level seed (overrides the config).
    #[arg(long, global = true)]
    seed: Option<u64>,

    /// Output directory (overrides the config).
    #[arg(long, global = true)]
    out: Option<PathBuf>,

    /// Replicate count (overrides the config).
    #[arg(long, global = true)]
    reps: Option<usize>,

    /// Worker threads; defaults to all cores.
    #[arg(long, global = true)]
    threads: Option<usize>,

    /// Print the effective config as TOML and exit.
    #[arg(long, global = true)]
    print_config: bool,
}

#[derive(Debug, Clone, Copy, Subcommand)]
enum Command {
    /// Simulate ESDs of R and compare them with the limit law.
    Simulate,
    /// Tabulate the Marchenko-Pastur density, CDF and quantiles.
    Mp,
    /// Tabulate the generalized limit law for the configured model.
    Lsd,
    /// Resolvent diagnostics W_n(z) and master-equation residuals.
    Diagnose,
    /// Quantile comparison of two entry distributions.
    Qq,
    /// Assumption report for the population model.
    Validate,
    /// Self-normalized moment estimates and Laplace integrals.
    Moments,
}

impl Command {
    fn kind(self) -> ExperimentKind {
        match self {
            Command::Simulate => ExperimentKind::Simulate,
            Command::Mp => ExperimentKind::Mp,
            Command::Lsd => ExperimentKind::Lsd,
            Command::Diagnose => ExperimentKind::Diagnose,
            Command::Qq => ExperimentKind::Qq,
            Command::Validate => ExperimentKind::Validate,
            Command::Moments => ExperimentKind::Moments,
        }
    }
}

const EXIT_CONFIG: u8 = 2;
const EXIT_NUMERIC: u8 = 3;

fn effective_config(cli: &Cli) -> corrlsd::Result<ExperimentConfig> {
    let kind = cli.command.kind();
    let mut config = match &cli.config {
        Some(path) => ExperimentConfig::load(path)?,
        None => ExperimentConfig::default_for(kind),
    };
    if config.experiment != kind {
        return Err(corrlsd::Error::Config {
            line: None,
            message: format!("config is for `{}` but the `{kind}` subcommand was given", config.experiment),
        });
    }
    if let Some(seed) = cli.seed {
        config.seed = seed;
    }
    if let Some(out) = &cli.out {
        config.output_dir = out.clone();
    }
    if let Some(reps) = cli.reps {
        config.replicates = reps;
    }
    config.manifest = None;
    Ok(config)
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    let cli = Cli::parse();
    if cli.threads == Some(0) {
        eprintln!("error: --threads must be at least 1");
        return ExitCode::from(EXIT_CONFIG);
    }
    let result = effective_config(&cli).and_then(|config| {
        if cli.print_config {
            config.validate()?;
            print!("{}", config.to_toml_string());
            return Ok(None);
        }
        harness::run_with_threads(&config, cli.threads).map(Some)
    });
    match result {
        Ok(Some(summary)) => {
            for f in &summary.files {
                println!("{}", f.display());
            }
            ExitCode::SUCCESS
        }
        Ok(None) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            let code = if e.is_config_error() { EXIT_CONFIG } else { EXIT_NUMERIC };
            log::debug!("exiting with code {code}");
            ExitCode::from(code)
        }
    }
}
