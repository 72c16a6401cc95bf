//! Matched runs at velocity cutoffs `N` and `N + 1`.
//!
//! One candidate stream feeds both legs: the `N` leg evolves the accepted
//! core, the `N + 1` leg evolves the same core plus the shell of candidates
//! with `N <= |v| < N + 1`. Both legs advance with a common step, so the
//! only difference between them is the shell's contribution to the self
//! field.

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::experiment::{RunError, Simulation};
use crate::sampling::sample_with_shell;
use crate::scenario::ScenarioConfig;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ConvergencePair {
    pub cutoff_n: f64,
    pub seed: u64,
    pub shell_count: usize,
    pub times: Vec<f64>,
    /// Max position gap over the common particles.
    pub delta_series: Vec<f64>,
    /// Max velocity gap over the common particles.
    pub eta_series: Vec<f64>,
    pub sigma_series: Vec<f64>,
    /// Trapezoid integral of the per-step eta, sampled at `times`.
    pub eta_integral_series: Vec<f64>,
    pub sup_sigma: f64,
    pub steps: u64,
}

fn gaps(a: &Simulation, b: &Simulation) -> (f64, f64) {
    let mut delta = 0.0f64;
    let mut eta = 0.0f64;
    for (p, q) in a.state.particles.iter().zip(&b.state.particles) {
        delta = delta.max((p.position - q.position).norm());
        eta = eta.max((p.velocity - q.velocity).norm());
    }
    (delta, eta)
}

/// Runs both legs to `t_end`, sampling the gaps every `record_cadence`
/// steps and at the end. `cutoff_n` replaces the scenario's own cutoff.
pub fn run_pair(scenario: &ScenarioConfig, cutoff_n: f64, seed: u64) -> Result<ConvergencePair, RunError> {
    if !(cutoff_n > 0.0) || !cutoff_n.is_finite() {
        return Err(RunError::Data(format!("cutoff must be positive and finite, got {cutoff_n}")));
    }
    let mut cfg = scenario.clone();
    cfg.datum.cutoff_n = cutoff_n;
    cfg.seed = seed;
    cfg.validate()?;
    let (core, shell) = sample_with_shell(&cfg.datum, cfg.particle_count, seed, cutoff_n + 1.0)?;
    let shell_count = shell.len();
    let mut wide = core.clone();
    wide.extend(shell);

    let mut leg_n = Simulation::with_particles(&cfg, core)?;
    let mut leg_n1 = Simulation::with_particles(&cfg, wide)?;

    let mut pair = ConvergencePair {
        cutoff_n,
        seed,
        shell_count,
        times: vec![0.0],
        delta_series: vec![0.0],
        eta_series: vec![0.0],
        sigma_series: vec![0.0],
        eta_integral_series: vec![0.0],
        sup_sigma: 0.0,
        steps: 0,
    };
    let cadence = cfg.record_cadence;
    let mut eta_prev = 0.0;
    let mut eta_integral = 0.0;
    while !leg_n.finished() {
        let dt = leg_n.next_dt()?.min(leg_n1.next_dt()?);
        let t0 = leg_n.state.time;
        leg_n.step_with_dt(dt)?;
        leg_n1.step_with_dt(dt)?;
        let (delta, eta) = gaps(&leg_n, &leg_n1);
        eta_integral += 0.5 * (leg_n.state.time - t0) * (eta_prev + eta);
        eta_prev = eta;
        let sigma = delta + eta;
        pair.sup_sigma = pair.sup_sigma.max(sigma);
        let k = leg_n.state.step_index;
        if k % cadence == 0 || leg_n.finished() {
            pair.times.push(leg_n.state.time);
            pair.delta_series.push(delta);
            pair.eta_series.push(eta);
            pair.sigma_series.push(sigma);
            pair.eta_integral_series.push(eta_integral);
        }
    }
    pair.steps = leg_n.state.step_index;
    Ok(pair)
}

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum ReportError {
    #[error("a convergence report needs at least two pairs, got {0}")]
    TooFewPairs(usize),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ConvergenceRow {
    pub cutoff_n: f64,
    pub sup_sigma: f64,
    /// `sup_sigma / previous sup_sigma`; `None` on the first row.
    pub ratio: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ConvergenceReport {
    pub rows: Vec<ConvergenceRow>,
    /// True when `sup_sigma` strictly decreases from row to row.
    pub monotone: bool,
}

/// Tabulates pairs in the order given.
pub fn convergence_report(pairs: &[ConvergencePair]) -> Result<ConvergenceReport, ReportError> {
    if pairs.len() < 2 {
        return Err(ReportError::TooFewPairs(pairs.len()));
    }
    let mut rows: Vec<ConvergenceRow> = Vec::with_capacity(pairs.len());
    for p in pairs {
        let ratio = rows.last().map(|r| p.sup_sigma / r.sup_sigma);
        rows.push(ConvergenceRow {
            cutoff_n: p.cutoff_n,
            sup_sigma: p.sup_sigma,
            ratio,
        });
    }
    let monotone = rows.windows(2).all(|w| w[1].sup_sigma < w[0].sup_sigma);
    Ok(ConvergenceReport { rows, monotone })
}

/// Mean and standard error of `sup_sigma` over repeat seeds at one cutoff.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SeedBand {
    pub cutoff_n: f64,
    pub mean: f64,
    pub stderr: f64,
    pub samples: Vec<f64>,
}

pub fn seed_band(pairs: &[ConvergencePair]) -> Option<SeedBand> {
    let first = pairs.first()?;
    let samples: Vec<f64> = pairs.iter().map(|p| p.sup_sigma).collect();
    let n = samples.len() as f64;
    let mean = samples.iter().sum::<f64>() / n;
    let stderr = if samples.len() > 1 {
        let var = samples.iter().map(|s| (s - mean).powi(2)).sum::<f64>() / (n - 1.0);
        (var / n).sqrt()
    } else {
        f64::INFINITY
    };
    Some(SeedBand {
        cutoff_n: first.cutoff_n,
        mean,
        stderr,
        samples,
    })
}

/// True when each band's mean exceeds the next one's by more than the
/// standard error of the difference.
pub fn decreasing_beyond_noise(bands: &[SeedBand]) -> bool {
    bands.len() >= 2
        && bands.windows(2).all(|w| {
            let gap = w[0].mean - w[1].mean;
            gap > (w[0].stderr.powi(2) + w[1].stderr.powi(2)).sqrt()
        })
}
