//! Config-driven experiments.
//!
//! A run validates the whole configuration, computes every artifact in
//! memory, and only then writes the files followed by `manifest.toml`. The
//! manifest is itself a loadable config that reproduces the run.

pub mod config;
pub mod experiments;
pub mod output;

use std::path::PathBuf;

pub use config::{ExperimentConfig, ExperimentKind, ManifestInfo, Size, Tolerances, ZPoint};
pub use experiments::{qq_experiment, QQReport, QQRow, QQSizeReport};
pub use output::Artifact;

use crate::error::{Error, Result};

/// Name of the manifest written next to the outputs.
pub const MANIFEST: &str = "manifest.toml";

#[derive(Debug, Clone)]
pub struct RunSummary {
    pub output_dir: PathBuf,
    /// Written files, manifest last.
    pub files: Vec<PathBuf>,
    pub qq: Option<QQReport>,
}

/// Computes the artifacts of a run without touching the filesystem.
pub fn compute(config: &ExperimentConfig) -> Result<(Vec<Artifact>, Option<QQReport>)> {
    config.validate()?;
    let models = config.models()?;
    let mut qq = None;
    let mut artifacts = match config.experiment {
        ExperimentKind::Simulate => experiments::simulate(config, &models)?,
        ExperimentKind::Mp => experiments::mp(config)?,
        ExperimentKind::Lsd => experiments::lsd(config, &models)?,
        ExperimentKind::Diagnose => experiments::diagnose(config, &models)?,
        ExperimentKind::Validate => experiments::validate(config, &models)?,
        ExperimentKind::Moments => experiments::moments(config, &models)?,
        ExperimentKind::Qq => {
            let (a, report) = experiments::qq_artifacts(config, &models)?;
            qq = Some(report);
            a
        }
    };
    let mut manifest_config = config.clone();
    manifest_config.manifest = Some(ManifestInfo {
        version: crate::VERSION.to_string(),
        seed: config.seed,
        stream_derivation: experiments::STREAM_DERIVATION.to_string(),
        files: artifacts.iter().map(|a| a.name.clone()).collect(),
    });
    artifacts.push(Artifact {
        name: MANIFEST.to_string(),
        contents: manifest_config.to_toml_string().into_bytes(),
    });
    Ok((artifacts, qq))
}

/// Validates, runs, and writes all outputs under `config.output_dir`.
pub fn run(config: &ExperimentConfig) -> Result<RunSummary> {
    let (artifacts, qq) = compute(config)?;
    log::info!("{}: writing {} files to {}", config.experiment, artifacts.len(), config.output_dir.display());
    let files = output::write_all(&config.output_dir, &artifacts)?;
    Ok(RunSummary {
        output_dir: config.output_dir.clone(),
        files,
        qq,
    })
}

/// [`run`] inside a dedicated thread pool of the given size.
pub fn run_with_threads(config: &ExperimentConfig, threads: Option<usize>) -> Result<RunSummary> {
    match threads {
        None => run(config),
        Some(t) => rayon::ThreadPoolBuilder::new()
            .num_threads(t)
            .build()
            .map_err(|e| Error::Config {
                line: None,
                message: format!("threads: {e}"),
            })?
            .install(|| run(config)),
    }
}
