//! TOML experiment configuration.
//!
//! ```toml
//! output_dir = "out/benchmark"
//!
//! [dataset]
//! grid_per_axis = 10
//! lower = -1.0
//! upper = 1.0
//! replicates = 2
//! truth = "benchmark"
//! seed = 20240601
//!
//! [kernel_f]
//! amplitude = 407.0
//! precision = [1.37, 5.55]
//!
//! [kernel_h]
//! amplitude = 2.14
//! precision = [0.0241, 1.86]
//!
//! [inference]
//! samples = 1000
//! jitter = 1e-12
//! seed = 7
//! redraw_per_step = false
//!
//! [control]
//! tau = 0.005
//! margin = 0.1
//! violation_budget = 0.01
//! horizon = 500
//! gains = [1.0, 0.5, 0.1]
//! proposed = true
//! ```

use std::path::{Path, PathBuf};

use serde::Deserialize;

use crate::CliError;

/// Dimension of the plant state, and so of every input.
pub const STATE_DIM: usize = 2;

#[derive(Debug, Clone, PartialEq, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentConfig {
    pub output_dir: PathBuf,
    pub dataset: DatasetConfig,
    pub kernel_f: KernelConfig,
    pub kernel_h: KernelConfig,
    pub inference: InferenceConfig,
    pub control: ControlBlock,
}

#[derive(Debug, Clone, PartialEq, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DatasetConfig {
    /// Points per axis of the square tensor grid, endpoints included.
    pub grid_per_axis: usize,
    pub lower: f64,
    pub upper: f64,
    pub replicates: usize,
    pub truth: Truth,
    pub seed: u64,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Truth {
    /// `f = -10 sin(pi x1) - 10 sin(2 pi x2)`, `g^2 = 0.1 + 1.5 / (1 + exp(-10 x2))`.
    Benchmark,
}

#[derive(Debug, Clone, PartialEq, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct KernelConfig {
    pub amplitude: f64,
    pub precision: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct InferenceConfig {
    pub samples: usize,
    pub jitter: f64,
    pub seed: u64,
    #[serde(default)]
    pub redraw_per_step: bool,
}

#[derive(Debug, Clone, PartialEq, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ControlBlock {
    pub tau: f64,
    pub margin: f64,
    pub violation_budget: f64,
    pub horizon: usize,
    #[serde(default)]
    pub gains: Vec<f64>,
    #[serde(default = "default_true")]
    pub proposed: bool,
}

fn default_true() -> bool {
    true
}

impl ExperimentConfig {
    pub fn parse(text: &str) -> Result<Self, CliError> {
        toml::from_str(text).map_err(|e| CliError::Parse(e.to_string()))
    }

    pub fn load(path: &Path) -> Result<Self, CliError> {
        let text = std::fs::read_to_string(path).map_err(|source| CliError::Io {
            path: path.to_path_buf(),
            source,
        })?;
        Self::parse(&text)
    }

    /// The configuration used to reproduce the published tracking experiment.
    pub fn benchmark(output_dir: impl Into<PathBuf>) -> Self {
        Self {
            output_dir: output_dir.into(),
            dataset: DatasetConfig {
                grid_per_axis: 10,
                lower: -1.0,
                upper: 1.0,
                replicates: 2,
                truth: Truth::Benchmark,
                seed: 20240601,
            },
            kernel_f: KernelConfig {
                amplitude: 407.0,
                precision: vec![1.37, 5.55],
            },
            kernel_h: KernelConfig {
                amplitude: 2.14,
                precision: vec![0.0241, 1.86],
            },
            inference: InferenceConfig {
                samples: 1000,
                jitter: 1e-12,
                seed: 7,
                redraw_per_step: false,
            },
            control: ControlBlock {
                tau: 0.005,
                margin: 0.1,
                violation_budget: 0.01,
                horizon: 500,
                gains: vec![1.0, 0.5, 0.1],
                proposed: true,
            },
        }
    }

    pub fn control_config(&self) -> hetgp::controller::ControlConfig {
        hetgp::controller::ControlConfig {
            tau: self.control.tau,
            margin: self.control.margin,
            violation_budget: self.control.violation_budget,
            horizon: self.control.horizon,
        }
    }

    /// Every violated invariant, one message per problem.
    pub fn problems(&self) -> Vec<String> {
        let mut p = Vec::new();
        let d = &self.dataset;
        if d.grid_per_axis < 1 {
            p.push("dataset.grid_per_axis must be at least 1".into());
        }
        if !(d.lower.is_finite() && d.upper.is_finite() && d.lower < d.upper) {
            p.push(format!(
                "dataset.lower < dataset.upper required, got {} and {}",
                d.lower, d.upper
            ));
        }
        if d.replicates < 1 {
            p.push("dataset.replicates must be at least 1".into());
        }
        if self.control.proposed && d.replicates < 2 {
            p.push(format!(
                "the proposed controller needs dataset.replicates >= 2, got {}",
                d.replicates
            ));
        }

        for (name, k) in [("kernel_f", &self.kernel_f), ("kernel_h", &self.kernel_h)] {
            if !(k.amplitude > 0.0 && k.amplitude.is_finite()) {
                p.push(format!("{name}.amplitude must be positive, got {}", k.amplitude));
            }
            if k.precision.len() != STATE_DIM {
                p.push(format!(
                    "{name}.precision needs {STATE_DIM} entries, got {}",
                    k.precision.len()
                ));
            }
            if k.precision.iter().any(|v| !(*v > 0.0 && v.is_finite())) {
                p.push(format!("{name}.precision entries must be positive, got {:?}", k.precision));
            }
        }

        let inf = &self.inference;
        if inf.samples < 1 {
            p.push("inference.samples must be at least 1".into());
        }
        if !(inf.jitter >= 0.0 && inf.jitter.is_finite()) {
            p.push(format!("inference.jitter must be nonnegative, got {}", inf.jitter));
        }

        let c = &self.control;
        if !(c.tau > 0.0 && c.tau.is_finite()) {
            p.push(format!("control.tau must be positive, got {}", c.tau));
        }
        if !(c.margin > 0.0 && c.margin.is_finite()) {
            p.push(format!("control.margin must be positive, got {}", c.margin));
        }
        if !(c.violation_budget > 0.0 && c.violation_budget < 1.0) {
            p.push(format!(
                "control.violation_budget must lie in (0, 1), got {}",
                c.violation_budget
            ));
        }
        if c.horizon < 1 {
            p.push("control.horizon must be at least 1".into());
        }
        if c.gains.iter().any(|g| !g.is_finite()) {
            p.push(format!("control.gains must be finite, got {:?}", c.gains));
        }
        let mut names: Vec<String> = c.gains.iter().map(|g| format!("kappa_{g}")).collect();
        names.sort();
        if names.windows(2).any(|w| w[0] == w[1]) {
            p.push(format!("control.gains must be distinct, got {:?}", c.gains));
        }
        if !c.proposed && c.gains.is_empty() {
            p.push("no controller selected: set control.proposed or control.gains".into());
        }
        p
    }

    pub fn validate(&self) -> Result<(), CliError> {
        let problems = self.problems();
        if problems.is_empty() {
            Ok(())
        } else {
            Err(CliError::Invalid(problems))
        }
    }
}
