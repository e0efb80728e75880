//! Configuration-driven runner for the heteroscedastic GP tracking experiment.
//!
//! A run simulates the replicated training data on a square grid, fits the
//! heteroscedastic model, draws one importance ensemble and closes the loop
//! with the sparse controller and every configured proportional baseline.
//! Artifacts land in the configured directory:
//!
//! - `dataset.csv`: training inputs and replicate outputs
//! - `weights.csv`: per-sample log-weights, weights and the ESS
//! - `episode_<name>.csv`: per-step trajectories
//! - `summary.csv`: cost, violations and infeasible steps per controller

pub mod config;

use std::fs::File;
use std::io::BufWriter;
use std::path::{Path, PathBuf};

use rayon::prelude::*;

use hetgp::controller::{
    benchmark_velocity, run_episode, write_summary_csv, EpisodeRecord, PosteriorSource, Strategy,
};
use hetgp::dataset::{benchmark_log_variance, benchmark_mean};
use hetgp::{HgpModel, ImportanceEnsemble, Points, ReplicatedDataset, SeKernel};

pub use config::ExperimentConfig;
use config::{Truth, STATE_DIM};

#[derive(Debug, thiserror::Error)]
pub enum CliError {
    #[error("cannot parse configuration: {0}")]
    Parse(String),
    #[error("invalid configuration:\n  {}", .0.join("\n  "))]
    Invalid(Vec<String>),
    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        source: std::io::Error,
    },
    #[error("{context}: {source}")]
    Model {
        context: String,
        source: hetgp::Error,
    },
}

impl CliError {
    /// Process exit code for this error class.
    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Parse(_) => 2,
            CliError::Invalid(_) => 3,
            CliError::Io { .. } => 4,
            CliError::Model { source, .. } => match source {
                hetgp::Error::Io(_) | hetgp::Error::Csv(_) => 4,
                _ => 5,
            },
        }
    }
}

trait Context<T> {
    fn context(self, what: &str) -> Result<T, CliError>;
}

impl<T> Context<T> for hetgp::Result<T> {
    fn context(self, what: &str) -> Result<T, CliError> {
        self.map_err(|source| CliError::Model {
            context: what.to_string(),
            source,
        })
    }
}

/// What a run produced.
#[derive(Debug)]
pub struct RunReport {
    pub output_dir: PathBuf,
    pub effective_sample_size: Option<f64>,
    pub episodes: Vec<EpisodeRecord>,
}

pub const DATASET_FILE: &str = "dataset.csv";
pub const WEIGHTS_FILE: &str = "weights.csv";
pub const SUMMARY_FILE: &str = "summary.csv";

pub fn episode_file(name: &str) -> String {
    format!("episode_{name}.csv")
}

pub fn build_dataset(config: &ExperimentConfig) -> Result<ReplicatedDataset, CliError> {
    let d = &config.dataset;
    let grid = Points::grid(STATE_DIM, d.grid_per_axis, d.lower, d.upper).context("grid")?;
    match d.truth {
        Truth::Benchmark => ReplicatedDataset::simulate(
            benchmark_mean,
            benchmark_log_variance,
            grid,
            d.replicates,
            d.seed,
        )
        .context("simulating training data"),
    }
}

fn disturbance(truth: Truth) -> fn(&[f64]) -> f64 {
    match truth {
        Truth::Benchmark => benchmark_mean,
    }
}

pub fn fit_model(
    config: &ExperimentConfig,
    dataset: ReplicatedDataset,
) -> Result<HgpModel, CliError> {
    let kf = SeKernel::new(config.kernel_f.amplitude, config.kernel_f.precision.clone())
        .context("kernel_f")?;
    let kh = SeKernel::new(config.kernel_h.amplitude, config.kernel_h.precision.clone())
        .context("kernel_h")?;
    HgpModel::fit(dataset, kf, kh, config.inference.jitter).context("fitting the model")
}

fn create(path: &Path) -> Result<BufWriter<File>, CliError> {
    File::create(path)
        .map(BufWriter::new)
        .map_err(|source| CliError::Io {
            path: path.to_path_buf(),
            source,
        })
}

/// Validates, simulates, fits, runs every controller and writes the artifacts.
/// Output bytes depend only on the configuration.
pub fn run_experiment(config: &ExperimentConfig) -> Result<RunReport, CliError> {
    config.validate()?;
    let out = &config.output_dir;
    std::fs::create_dir_all(out).map_err(|source| CliError::Io {
        path: out.clone(),
        source,
    })?;

    let dataset = build_dataset(config)?;
    dataset
        .write_csv(create(&out.join(DATASET_FILE))?)
        .context(DATASET_FILE)?;

    let mut strategies = Vec::new();
    if config.control.proposed {
        strategies.push(Strategy::Sparse);
    }
    strategies.extend(config.control.gains.iter().map(|&gain| Strategy::Baseline { gain }));

    let (model, ensemble) = if config.control.proposed {
        let model = fit_model(config, dataset)?;
        let ensemble = model
            .draw_ensemble(config.inference.samples, config.inference.seed)
            .context("drawing the importance ensemble")?;
        ensemble
            .write_weights_csv(create(&out.join(WEIGHTS_FILE))?)
            .context(WEIGHTS_FILE)?;
        (Some(model), Some(ensemble))
    } else {
        (None, None)
    };

    let control = config.control_config();
    let truth = disturbance(config.dataset.truth);
    let tau = control.tau;
    let episodes = strategies
        .par_iter()
        .map(|&strategy| {
            let source = source_for(strategy, config, model.as_ref(), ensemble.as_ref());
            run_episode(strategy, source, truth, |t| benchmark_velocity(t, tau), &control)
                .context(&format!("episode {}", strategy.name()))
        })
        .collect::<Result<Vec<_>, _>>()?;

    for e in &episodes {
        e.write_csv(create(&out.join(episode_file(&e.name)))?)
            .context(&episode_file(&e.name))?;
    }
    write_summary_csv(&episodes, create(&out.join(SUMMARY_FILE))?).context(SUMMARY_FILE)?;

    Ok(RunReport {
        output_dir: out.clone(),
        effective_sample_size: ensemble.as_ref().map(|e| e.effective_sample_size()),
        episodes,
    })
}

fn source_for<'a>(
    strategy: Strategy,
    config: &ExperimentConfig,
    model: Option<&'a HgpModel>,
    ensemble: Option<&'a ImportanceEnsemble>,
) -> Option<PosteriorSource<'a>> {
    match strategy {
        Strategy::Baseline { .. } => None,
        Strategy::Sparse if config.inference.redraw_per_step => {
            model.map(|model| PosteriorSource::Redraw {
                model,
                samples: config.inference.samples,
                seed: config.inference.seed,
            })
        }
        Strategy::Sparse => ensemble.map(PosteriorSource::Shared),
    }
}
