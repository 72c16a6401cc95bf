//! Monitored quantities: energies, wall distance, speed envelope, maximal
//! displacement, velocity tails and the window-averaged self-field ladder.

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use magshield_ledger::LadderSchedule;

use crate::fields::{ExternalFields, FieldError};
use crate::integrator::{shield_residuals, SimState};
use crate::sampling::{density_l53_norm, estimate_density, GridSpec, Particle};
use crate::self_field::{potential_energy, SelfFieldError, SolverConfig};

#[derive(Debug, Clone, PartialEq, Error)]
pub enum DiagError {
    #[error(transparent)]
    Field(#[from] FieldError),
    #[error(transparent)]
    SelfField(#[from] SelfFieldError),
    #[error("first ladder window {delta1} is shorter than two sampling intervals of {dt}")]
    WindowTooShort { delta1: f64, dt: f64 },
    #[error("insufficient sample: {0}")]
    InsufficientSample(String),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DiagRecord {
    pub time: f64,
    pub kinetic: f64,
    pub potential_self: f64,
    pub potential_external: f64,
    pub total_energy: f64,
    pub min_x1: f64,
    pub max_speed: f64,
    pub running_max_speed: f64,
    pub displacement_r: f64,
    pub charge: f64,
    pub shield_residual_max: f64,
    pub l53_norm: f64,
    pub avg_field_by_level: BTreeMap<u32, f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DiagnosticsConfig {
    /// Floor of the running maximal speed.
    #[serde(default = "default_c3")]
    pub c3: f64,
    /// Cells per axis of the density grid behind `l53_norm`.
    #[serde(default = "default_density_grid")]
    pub density_grid: usize,
}

fn default_c3() -> f64 {
    1.0
}
fn default_density_grid() -> usize {
    32
}

impl Default for DiagnosticsConfig {
    fn default() -> Self {
        Self {
            c3: default_c3(),
            density_grid: default_density_grid(),
        }
    }
}

impl DiagnosticsConfig {
    pub fn validate(&self) -> Result<(), (&'static str, String)> {
        if !(self.c3.is_finite() && self.c3 > 0.0) {
            return Err(("c3", format!("must be finite and > 0, got {}", self.c3)));
        }
        if self.density_grid == 0 {
            return Err(("density_grid", "must be >= 1".into()));
        }
        Ok(())
    }
}

/// `k` indices spread evenly over `0..n`.
pub fn tracked_indices(n: usize, k: usize) -> Vec<usize> {
    let k = k.min(n);
    (0..k).map(|i| i * n / k).collect()
}

fn max_speed(ps: &[Particle]) -> f64 {
    ps.iter().map(|p| p.velocity.norm()).fold(0.0, f64::max)
}

/// Running quantities that must see every step.
#[derive(Debug, Clone)]
pub struct Monitor {
    cfg: DiagnosticsConfig,
    tracked: Vec<usize>,
    running_max_speed: f64,
    displacement_r: f64,
    ladder: Option<WindowLadder>,
}

impl Monitor {
    pub fn new(
        cfg: DiagnosticsConfig,
        state: &SimState,
        tracked: Vec<usize>,
        ladder: Option<WindowLadder>,
    ) -> Self {
        let running_max_speed = cfg.c3.max(max_speed(&state.particles));
        Self {
            cfg,
            tracked,
            running_max_speed,
            displacement_r: 1.0,
            ladder,
        }
    }

    pub fn tracked(&self) -> &[usize] {
        &self.tracked
    }

    pub fn ladder(&self) -> Option<&WindowLadder> {
        self.ladder.as_ref()
    }

    /// Folds in the step that just ended at `state.time`.
    pub fn observe_step(&mut self, state: &SimState) -> Result<(), DiagError> {
        let dt = state.last_dt;
        let before = self.running_max_speed;
        self.running_max_speed = before.max(max_speed(&state.particles));
        self.displacement_r += 0.5 * (before + self.running_max_speed) * dt;
        if let Some(ladder) = &mut self.ladder {
            let e: Vec<f64> = self.tracked.iter().map(|&k| state.fields_cache[k].norm()).collect();
            ladder.push(dt, &e)?;
        }
        Ok(())
    }

    pub fn record(
        &self,
        state: &SimState,
        solver: &SolverConfig,
        fields: &ExternalFields,
    ) -> Result<DiagRecord, DiagError> {
        let ps = &state.particles;
        let kinetic: f64 = ps.iter().map(|p| 0.5 * p.weight * p.velocity.norm_squared()).sum();
        let potential_self = potential_energy(ps, solver)?;
        let mut potential_external = 0.0;
        for p in ps {
            potential_external += p.weight * fields.external_potential(&p.position)?;
        }
        let residuals = shield_residuals(state, fields)?;
        let shield_residual_max = self
            .tracked
            .iter()
            .map(|&k| residuals[k].abs())
            .fold(0.0, f64::max);
        let l53_norm = if ps.is_empty() {
            0.0
        } else {
            let grid = GridSpec::covering(ps, self.cfg.density_grid);
            density_l53_norm(&estimate_density(ps, &grid))
        };
        Ok(DiagRecord {
            time: state.time,
            kinetic,
            potential_self,
            potential_external,
            total_energy: kinetic + potential_self + potential_external,
            min_x1: state.min_x1(),
            max_speed: max_speed(ps),
            running_max_speed: self.running_max_speed,
            displacement_r: self.displacement_r,
            charge: state.charge(),
            shield_residual_max,
            l53_norm,
            avg_field_by_level: self.ladder.as_ref().map(|l| l.levels()).unwrap_or_default(),
        })
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ConfinementReport {
    /// `max (min_x1)^-(tau-1) / running_max_speed` over the records.
    pub c_hat: f64,
    pub ratio_series: Vec<(f64, f64)>,
    /// Least-squares slope of the ratio over the final third of the records.
    pub trend_slope: Option<f64>,
    pub trend_stderr: Option<f64>,
    pub passed: bool,
    pub failure: Option<String>,
}

/// Ordinary least squares; returns `(slope, standard error of slope)`.
pub fn ols_slope(points: &[(f64, f64)]) -> Option<(f64, f64)> {
    let n = points.len();
    if n < 3 {
        return None;
    }
    let nf = n as f64;
    let mx = points.iter().map(|p| p.0).sum::<f64>() / nf;
    let my = points.iter().map(|p| p.1).sum::<f64>() / nf;
    let sxx: f64 = points.iter().map(|p| (p.0 - mx).powi(2)).sum();
    if sxx == 0.0 {
        return None;
    }
    let sxy: f64 = points.iter().map(|p| (p.0 - mx) * (p.1 - my)).sum();
    let slope = sxy / sxx;
    let intercept = my - slope * mx;
    let sse: f64 = points
        .iter()
        .map(|p| (p.1 - intercept - slope * p.0).powi(2))
        .sum();
    Some((slope, (sse / (nf - 2.0) / sxx).sqrt()))
}

/// Checks that `(min_x1)^-(tau-1)` stays bounded by a multiple of the running
/// maximal speed with no upward trend at the end of the run.
pub fn confinement_bound_check(history: &[DiagRecord], tau: f64) -> ConfinementReport {
    let mut failure = None;
    let mut ratio_series = Vec::with_capacity(history.len());
    for r in history {
        if !(r.min_x1 > 0.0) {
            failure = Some(format!("min_x1 reached {} at t = {}", r.min_x1, r.time));
            break;
        }
        ratio_series.push((r.time, r.min_x1.powf(-(tau - 1.0)) / r.running_max_speed));
    }
    let c_hat = ratio_series.iter().map(|p| p.1).fold(0.0, f64::max);
    let tail = &ratio_series[ratio_series.len() - ratio_series.len() / 3..];
    let fit = ols_slope(tail);
    if failure.is_none() {
        if history.is_empty() {
            failure = Some("empty history".into());
        } else if !c_hat.is_finite() {
            failure = Some("unbounded ratio".into());
        } else if let Some((slope, se)) = fit {
            if slope - se > 0.0 {
                failure = Some(format!("ratio grows in the final third (slope {slope:e} +- {se:e})"));
            }
        }
    }
    ConfinementReport {
        c_hat,
        ratio_series,
        trend_slope: fit.map(|f| f.0),
        trend_stderr: fit.map(|f| f.1),
        passed: failure.is_none(),
        failure,
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TailCheckConfig {
    pub bins: usize,
    pub min_bin_count: usize,
    pub min_tail_bins: usize,
    pub slack: f64,
    pub min_particles: usize,
}

impl Default for TailCheckConfig {
    fn default() -> Self {
        Self {
            bins: 48,
            min_bin_count: 20,
            min_tail_bins: 10,
            slack: 2.0,
            min_particles: 10_000,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct TailBin {
    pub v_lo: f64,
    pub v_hi: f64,
    pub count: usize,
    /// Count per unit velocity-space volume of the shell.
    pub density: f64,
    pub envelope: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct TailReport {
    pub lambda1: f64,
    pub log_amplitude: f64,
    pub mode_bin: usize,
    pub tail: Vec<TailBin>,
    pub worst_ratio: f64,
    pub passed: bool,
}

/// Fits `log f(v) = a - lambda1 v^2` to the velocity-space density of the
/// bins beyond the mode of the speed histogram and checks every such bin
/// against `slack * exp(a - lambda1 v^2)`.
pub fn gaussian_tail_check(particles: &[Particle], cfg: &TailCheckConfig) -> Result<TailReport, DiagError> {
    if particles.len() < cfg.min_particles {
        return Err(DiagError::InsufficientSample(format!(
            "{} particles, need {}",
            particles.len(),
            cfg.min_particles
        )));
    }
    let vmax = max_speed(particles);
    if !(vmax > 0.0) || cfg.bins < 2 {
        return Err(DiagError::InsufficientSample("degenerate speed range".into()));
    }
    let width = vmax / cfg.bins as f64;
    let mut counts = vec![0usize; cfg.bins];
    for p in particles {
        let k = ((p.velocity.norm() / width) as usize).min(cfg.bins - 1);
        counts[k] += 1;
    }
    let mode_bin = (0..cfg.bins).max_by_key(|&k| (counts[k], std::cmp::Reverse(k))).unwrap();
    let shell = |k: usize| {
        let (a, b) = (k as f64 * width, (k + 1) as f64 * width);
        4.0 / 3.0 * std::f64::consts::PI * (b.powi(3) - a.powi(3))
    };
    let mid = |k: usize| (k as f64 + 0.5) * width;
    let usable: Vec<usize> = (mode_bin + 1..cfg.bins)
        .filter(|&k| counts[k] >= cfg.min_bin_count)
        .collect();
    if usable.len() < cfg.min_tail_bins {
        return Err(DiagError::InsufficientSample(format!(
            "{} usable tail bins, need {}",
            usable.len(),
            cfg.min_tail_bins
        )));
    }
    let pts: Vec<(f64, f64)> = usable
        .iter()
        .map(|&k| (mid(k).powi(2), (counts[k] as f64 / shell(k)).ln()))
        .collect();
    let n = pts.len() as f64;
    let mx = pts.iter().map(|p| p.0).sum::<f64>() / n;
    let my = pts.iter().map(|p| p.1).sum::<f64>() / n;
    let sxx: f64 = pts.iter().map(|p| (p.0 - mx).powi(2)).sum();
    let sxy: f64 = pts.iter().map(|p| (p.0 - mx) * (p.1 - my)).sum();
    let slope = sxy / sxx;
    let lambda1 = -slope;
    let log_amplitude = my - slope * mx;
    let mut worst_ratio = 0.0f64;
    let tail: Vec<TailBin> = usable
        .iter()
        .map(|&k| {
            let density = counts[k] as f64 / shell(k);
            let envelope = (log_amplitude - lambda1 * mid(k).powi(2)).exp();
            worst_ratio = worst_ratio.max(density / envelope);
            TailBin {
                v_lo: k as f64 * width,
                v_hi: (k + 1) as f64 * width,
                count: counts[k],
                density,
                envelope,
            }
        })
        .collect();
    Ok(TailReport {
        lambda1,
        log_amplitude,
        mode_bin,
        tail,
        worst_ratio,
        passed: lambda1 > 0.0 && worst_ratio < cfg.slack,
    })
}

/// Streaming maxima of window-averaged `|E|` along tracked characteristics.
///
/// Level-1 windows are `[k D1, (k+1) D1)`; a level-`l` window is the union of
/// `G` consecutive level-`(l-1)` windows. The signal is piecewise constant
/// over each pushed interval and split exactly at window boundaries.
#[derive(Debug, Clone)]
pub struct WindowLadder {
    schedule: Vec<f64>,
    g_factor: u64,
    time: f64,
    window_index: u64,
    current: Vec<f64>,
    /// Per level >= 2: running sums of completed sub-window integrals.
    group_sums: Vec<Vec<f64>>,
    group_counts: Vec<u64>,
    best: Vec<Option<f64>>,
}

impl WindowLadder {
    /// `max_dt` is the largest sampling interval that will be pushed.
    pub fn new(schedule: &LadderSchedule, tracked: usize, max_dt: f64) -> Result<Self, DiagError> {
        let delta1 = schedule.delta1;
        if !(delta1 >= 2.0 * max_dt) {
            return Err(DiagError::WindowTooShort { delta1, dt: max_dt });
        }
        let levels = schedule.schedule.len().max(1);
        Ok(Self {
            schedule: if schedule.schedule.is_empty() {
                vec![delta1]
            } else {
                schedule.schedule.clone()
            },
            g_factor: schedule.g_factor.max(1),
            time: 0.0,
            window_index: 0,
            current: vec![0.0; tracked],
            group_sums: vec![vec![0.0; tracked]; levels.saturating_sub(1)],
            group_counts: vec![0; levels.saturating_sub(1)],
            best: vec![None; levels],
        })
    }

    pub fn push(&mut self, dt: f64, values: &[f64]) -> Result<(), DiagError> {
        let delta1 = self.schedule[0];
        if dt > 0.5 * delta1 {
            return Err(DiagError::WindowTooShort { delta1, dt });
        }
        let mut remaining = dt;
        while remaining > 0.0 {
            let end = (self.window_index + 1) as f64 * delta1;
            let room = end - self.time;
            let take = if remaining >= room { room } else { remaining };
            for (acc, v) in self.current.iter_mut().zip(values) {
                *acc += v * take.max(0.0);
            }
            remaining -= take;
            if take == room {
                self.time = end;
                self.complete_level1();
            } else {
                self.time += take;
            }
        }
        Ok(())
    }

    fn complete_level1(&mut self) {
        self.window_index += 1;
        let n = self.current.len();
        let integrals = std::mem::replace(&mut self.current, vec![0.0; n]);
        self.update_best(0, &integrals);
        let mut carry = integrals;
        for lvl in 1..self.schedule.len() {
            let sums = &mut self.group_sums[lvl - 1];
            for (s, c) in sums.iter_mut().zip(&carry) {
                *s += c;
            }
            self.group_counts[lvl - 1] += 1;
            if self.group_counts[lvl - 1] < self.g_factor {
                break;
            }
            self.group_counts[lvl - 1] = 0;
            carry = std::mem::replace(sums, vec![0.0; n]);
            self.update_best(lvl, &carry);
        }
    }

    fn update_best(&mut self, level: usize, integrals: &[f64]) {
        let width = self.schedule[level];
        let m = integrals.iter().map(|i| i / width).fold(0.0, f64::max);
        self.best[level] = Some(self.best[level].map_or(m, |b| b.max(m)));
    }

    /// Level (1-based) to the maximum window average over completed windows.
    pub fn levels(&self) -> BTreeMap<u32, f64> {
        self.best
            .iter()
            .enumerate()
            .filter_map(|(l, b)| b.map(|v| (l as u32 + 1, v)))
            .collect()
    }
}

/// Batch form of [`WindowLadder`]: `series` holds `(dt, |E| per tracked
/// particle)` for consecutive sampling intervals.
pub fn field_time_average(
    series: &[(f64, Vec<f64>)],
    schedule: &LadderSchedule,
) -> Result<BTreeMap<u32, f64>, DiagError> {
    let tracked = series.first().map_or(0, |s| s.1.len());
    let max_dt = series.iter().map(|s| s.0).fold(0.0, f64::max);
    let mut ladder = WindowLadder::new(schedule, tracked, max_dt)?;
    for (dt, e) in series {
        ladder.push(*dt, e)?;
    }
    Ok(ladder.levels())
}

/// Whether `levels` is non-increasing, allowing `ulps` units of rounding in
/// each comparison.
pub fn ladder_is_monotone(levels: &BTreeMap<u32, f64>, ulps: f64) -> bool {
    let v: Vec<f64> = levels.values().copied().collect();
    v.windows(2)
        .all(|w| w[1] <= w[0] + ulps * f64::EPSILON * w[0].abs())
}
