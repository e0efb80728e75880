//! Chance-constrained sparse tracking control of a double integrator with an
//! unknown state-dependent disturbance.
//!
//! Plant: `xi+ = xi + tau (xi_2, f(xi) + u_hat + u)` with the feedforward
//! `u_hat = v - (xi_1 - r_1)/tau`. Reference: `r+ = r + tau (r_2, v)`.
//!
//! The sparse controller picks the smallest-magnitude `u` in `[u_l, u_u]`,
//! the set of inputs for which `Pr(|xi_2(t+1) - r_2(t+1)| <= margin) >= 1 - budget`
//! under the GP posterior of `f(xi(t))`.

use std::io::Write;

use crate::dataset::format_f64;
use crate::error::{Error, Result};
use crate::hgp::{HgpModel, ImportanceEnsemble};

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ControlConfig {
    pub tau: f64,
    pub margin: f64,
    pub violation_budget: f64,
    pub horizon: usize,
}

impl ControlConfig {
    /// Time step 0.005, margin 0.1, budget 0.01, 500 steps.
    pub fn benchmark() -> Self {
        Self {
            tau: 0.005,
            margin: 0.1,
            violation_budget: 0.01,
            horizon: 500,
        }
    }

    pub fn validate(&self) -> Result<()> {
        let mut problems = Vec::new();
        if !(self.tau > 0.0 && self.tau.is_finite()) {
            problems.push(format!("tau must be positive, got {}", self.tau));
        }
        if !(self.margin > 0.0 && self.margin.is_finite()) {
            problems.push(format!("margin must be positive, got {}", self.margin));
        }
        if !(self.violation_budget > 0.0 && self.violation_budget < 1.0) {
            problems.push(format!(
                "violation budget must lie in (0, 1), got {}",
                self.violation_budget
            ));
        }
        if self.horizon == 0 {
            problems.push("horizon must be at least 1".into());
        }
        if problems.is_empty() {
            Ok(())
        } else {
            Err(Error::InvalidArgument(problems.join("; ")))
        }
    }
}

/// Reference velocity `v(t) = 3 cos(pi tau t)`.
pub fn benchmark_velocity(t: usize, tau: f64) -> f64 {
    3.0 * (std::f64::consts::PI * tau * t as f64).cos()
}

pub fn reference_step(r: [f64; 2], v: f64, tau: f64) -> [f64; 2] {
    [r[0] + tau * r[1], r[1] + tau * v]
}

pub fn plant_step<F: Fn(&[f64]) -> f64>(
    xi: [f64; 2],
    u_hat: f64,
    u: f64,
    disturbance: F,
    tau: f64,
) -> [f64; 2] {
    let f = disturbance(&xi);
    [xi[0] + tau * xi[1], xi[1] + tau * (f + u_hat + u)]
}

pub fn feedforward(xi: [f64; 2], r: [f64; 2], v: f64, tau: f64) -> f64 {
    v - (xi[0] - r[0]) / tau
}

pub fn baseline_control(gain: f64, xi: [f64; 2], r: [f64; 2], tau: f64) -> f64 {
    -gain * (xi[1] - r[1]) / tau
}

/// Intermediate quantities of one sparse-control decision.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SparseDecision {
    pub u: f64,
    pub lower: f64,
    pub upper: f64,
    /// Level with `delta = budget / 2`.
    pub gamma_upper: f64,
    /// Level with `delta = 1 - budget / 2`.
    pub gamma_lower: f64,
    /// Set when `lower > upper`; `u` is then the midpoint.
    pub infeasible: bool,
}

/// Three-case sparse rule on the admissible interval `[lower, upper]`.
pub fn sparse_rule(lower: f64, upper: f64) -> (f64, bool) {
    if lower > upper {
        (0.5 * (lower + upper), true)
    } else if upper < 0.0 {
        (upper, false)
    } else if lower > 0.0 {
        (lower, false)
    } else {
        (0.0, false)
    }
}

/// Sparse input from the posterior quantiles of the disturbance at `xi`.
pub fn sparse_control(
    ensemble: &ImportanceEnsemble,
    xi: [f64; 2],
    next_reference_velocity: f64,
    u_hat: f64,
    config: &ControlConfig,
) -> Result<SparseDecision> {
    let posterior = ensemble.at(&xi)?;
    let gamma_upper = posterior.solve_delta(0.5 * config.violation_budget)?;
    let gamma_lower = posterior.solve_delta(1.0 - 0.5 * config.violation_budget)?;
    Ok(decision_from_levels(
        gamma_upper,
        gamma_lower,
        xi,
        next_reference_velocity,
        u_hat,
        config,
    ))
}

pub fn decision_from_levels(
    gamma_upper: f64,
    gamma_lower: f64,
    xi: [f64; 2],
    next_reference_velocity: f64,
    u_hat: f64,
    config: &ControlConfig,
) -> SparseDecision {
    let eta = -u_hat + (next_reference_velocity - xi[1]) / config.tau;
    let slack = config.margin / config.tau;
    let upper = -gamma_upper + slack + eta;
    let lower = -gamma_lower - slack + eta;
    let (u, infeasible) = sparse_rule(lower, upper);
    SparseDecision {
        u,
        lower,
        upper,
        gamma_upper,
        gamma_lower,
        infeasible,
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Strategy {
    Sparse,
    Baseline { gain: f64 },
}

impl Strategy {
    /// `proposed`, or `kappa_<gain>` for a baseline.
    pub fn name(&self) -> String {
        match self {
            Strategy::Sparse => "proposed".into(),
            Strategy::Baseline { gain } => format!("kappa_{gain}"),
        }
    }
}

/// Where the sparse controller obtains its posterior at each step.
pub enum PosteriorSource<'a> {
    /// One ensemble shared by every step.
    Shared(&'a ImportanceEnsemble),
    /// A fresh ensemble per step from stream `seed + t` of the model.
    Redraw {
        model: &'a HgpModel,
        samples: usize,
        seed: u64,
    },
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct StepRecord {
    pub t: usize,
    pub reference: [f64; 2],
    pub state: [f64; 2],
    pub u_hat: f64,
    pub u: f64,
    pub lower: f64,
    pub upper: f64,
    pub gamma_upper: f64,
    pub gamma_lower: f64,
    pub infeasible: bool,
    /// `|xi_2(t+1) - r_2(t+1)| > margin`.
    pub violation: bool,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct EpisodeSummary {
    pub cost: f64,
    pub violations: usize,
    pub infeasible_steps: usize,
}

#[derive(Debug, Clone)]
pub struct EpisodeRecord {
    pub name: String,
    pub rows: Vec<StepRecord>,
    pub summary: EpisodeSummary,
}

pub fn summarize(rows: &[StepRecord]) -> EpisodeSummary {
    EpisodeSummary {
        cost: rows.iter().map(|r| r.u.abs()).sum(),
        violations: rows.iter().filter(|r| r.violation).count(),
        infeasible_steps: rows.iter().filter(|r| r.infeasible).count(),
    }
}

/// Simulates `config.horizon` steps from `xi(0) = r(0) = 0`.
///
/// Per step: `u_hat` from the current state and reference, then the
/// reference advances so the controller sees `r_2(t+1)`, then the plant.
pub fn run_episode<F, V>(
    strategy: Strategy,
    source: Option<PosteriorSource<'_>>,
    disturbance: F,
    velocity: V,
    config: &ControlConfig,
) -> Result<EpisodeRecord>
where
    F: Fn(&[f64]) -> f64,
    V: Fn(usize) -> f64,
{
    config.validate()?;
    if matches!(strategy, Strategy::Sparse) && source.is_none() {
        return Err(Error::InvalidArgument(
            "the sparse controller needs a posterior source".into(),
        ));
    }
    let tau = config.tau;
    let mut xi = [0.0; 2];
    let mut r = [0.0; 2];
    let mut rows = Vec::with_capacity(config.horizon);
    for t in 0..config.horizon {
        let v = velocity(t);
        let u_hat = feedforward(xi, r, v, tau);
        let r_next = reference_step(r, v, tau);
        let decision = match strategy {
            Strategy::Sparse => match source.as_ref() {
                Some(PosteriorSource::Shared(ensemble)) => {
                    sparse_control(ensemble, xi, r_next[1], u_hat, config)?
                }
                Some(PosteriorSource::Redraw {
                    model,
                    samples,
                    seed,
                }) => {
                    let ensemble = model.draw_ensemble(*samples, seed.wrapping_add(t as u64))?;
                    sparse_control(&ensemble, xi, r_next[1], u_hat, config)?
                }
                None => unreachable!(),
            },
            Strategy::Baseline { gain } => SparseDecision {
                u: baseline_control(gain, xi, r, tau),
                lower: f64::NAN,
                upper: f64::NAN,
                gamma_upper: f64::NAN,
                gamma_lower: f64::NAN,
                infeasible: false,
            },
        };
        let xi_next = plant_step(xi, u_hat, decision.u, &disturbance, tau);
        rows.push(StepRecord {
            t,
            reference: r,
            state: xi,
            u_hat,
            u: decision.u,
            lower: decision.lower,
            upper: decision.upper,
            gamma_upper: decision.gamma_upper,
            gamma_lower: decision.gamma_lower,
            infeasible: decision.infeasible,
            violation: (xi_next[1] - r_next[1]).abs() > config.margin,
        });
        xi = xi_next;
        r = r_next;
    }
    let summary = summarize(&rows);
    Ok(EpisodeRecord {
        name: strategy.name(),
        rows,
        summary,
    })
}

pub const EPISODE_COLUMNS: [&str; 13] = [
    "t",
    "r1",
    "r2",
    "xi1",
    "xi2",
    "u_hat",
    "u",
    "u_l",
    "u_u",
    "gamma_u",
    "gamma_l",
    "infeasible",
    "violation",
];

impl EpisodeRecord {
    pub fn write_csv<W: Write>(&self, writer: W) -> Result<()> {
        let mut w = csv::Writer::from_writer(writer);
        w.write_record(EPISODE_COLUMNS)?;
        for row in &self.rows {
            w.write_record([
                row.t.to_string(),
                format_f64(row.reference[0]),
                format_f64(row.reference[1]),
                format_f64(row.state[0]),
                format_f64(row.state[1]),
                format_f64(row.u_hat),
                format_f64(row.u),
                format_f64(row.lower),
                format_f64(row.upper),
                format_f64(row.gamma_upper),
                format_f64(row.gamma_lower),
                u8::from(row.infeasible).to_string(),
                u8::from(row.violation).to_string(),
            ])?;
        }
        w.flush()?;
        Ok(())
    }
}

/// `controller,cost,violations,infeasible_steps`, one row per episode.
pub fn write_summary_csv<W: Write>(episodes: &[EpisodeRecord], writer: W) -> Result<()> {
    let mut w = csv::Writer::from_writer(writer);
    w.write_record(["controller", "cost", "violations", "infeasible_steps"])?;
    for e in episodes {
        w.write_record([
            e.name.clone(),
            format_f64(e.summary.cost),
            e.summary.violations.to_string(),
            e.summary.infeasible_steps.to_string(),
        ])?;
    }
    w.flush()?;
    Ok(())
}
