//! Boris-type time stepping of the characteristics
//! `X' = V`, `V' = E + V x B - grad U`.
//!
//! Each step is drift(dt/2), kick, drift(dt/2). The kick is the Boris
//! half-kick / rotation / half-kick with all forces sampled at the
//! half-drifted positions, so the scheme is second order in the synchronized
//! variables and exact for constant forces. The rotation preserves `|v|`
//! exactly in exact arithmetic.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::fields::{ExternalFields, FieldError};
use crate::sampling::Particle;
use crate::self_field::{all_fields, SelfFieldError, SolverConfig};
use crate::Vec3;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum StepError {
    #[error("particle {particle} crossed the wall (x1 = {x1}) at t = {time}")]
    WallCrossing { particle: usize, x1: f64, time: f64 },
    #[error("time step {dt} fell below dt_min = {dt_min} at t = {time}")]
    TimestepCollapse { dt: f64, dt_min: f64, time: f64 },
    #[error(transparent)]
    Field(#[from] FieldError),
    #[error(transparent)]
    SelfField(#[from] SelfFieldError),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct StepperConfig {
    pub dt_base: f64,
    #[serde(default = "default_gyro_safety")]
    pub gyro_safety: f64,
    #[serde(default = "default_wall_safety")]
    pub wall_safety: f64,
    pub dt_min: f64,
    pub t_end: f64,
}

fn default_gyro_safety() -> f64 {
    0.2
}
fn default_wall_safety() -> f64 {
    0.1
}

impl StepperConfig {
    pub fn new(dt_base: f64, dt_min: f64, t_end: f64) -> Self {
        Self {
            dt_base,
            gyro_safety: default_gyro_safety(),
            wall_safety: default_wall_safety(),
            dt_min,
            t_end,
        }
    }

    /// Same configuration with every step-size control divided by `factor`.
    pub fn refined(&self, factor: f64) -> Self {
        Self {
            dt_base: self.dt_base / factor,
            gyro_safety: self.gyro_safety / factor,
            wall_safety: self.wall_safety / factor,
            dt_min: self.dt_min / factor,
            t_end: self.t_end,
        }
    }

    pub fn validate(&self) -> Result<(), (&'static str, String)> {
        let pos = |name: &'static str, v: f64| {
            if v.is_finite() && v > 0.0 {
                Ok(())
            } else {
                Err((name, format!("must be finite and > 0, got {v}")))
            }
        };
        pos("dt_base", self.dt_base)?;
        pos("dt_min", self.dt_min)?;
        for (name, v) in [("gyro_safety", self.gyro_safety), ("wall_safety", self.wall_safety)] {
            if !(v > 0.0 && v <= 1.0) {
                return Err((name, format!("must lie in (0, 1], got {v}")));
            }
        }
        if self.dt_min > self.dt_base {
            return Err(("dt_min", format!("{} exceeds dt_base {}", self.dt_min, self.dt_base)));
        }
        if !(self.t_end.is_finite() && self.t_end >= 0.0) {
            return Err(("t_end", format!("must be finite and >= 0, got {}", self.t_end)));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct SimState {
    pub time: f64,
    pub particles: Vec<Particle>,
    /// Self-field each particle felt during the last step.
    pub fields_cache: Vec<Vec3>,
    pub step_index: u64,
    pub last_dt: f64,
    /// `int (E_2 + F_2) ds` per particle, F the external non-magnetic force.
    pub transverse_impulse: Vec<f64>,
    /// `(V_2(0), X_1(0))` per particle.
    pub initial: Vec<(f64, f64)>,
}

impl SimState {
    pub fn new(particles: Vec<Particle>) -> Self {
        let n = particles.len();
        let initial = particles.iter().map(|p| (p.velocity[1], p.position[0])).collect();
        Self {
            time: 0.0,
            particles,
            fields_cache: vec![Vec3::zeros(); n],
            step_index: 0,
            last_dt: 0.0,
            transverse_impulse: vec![0.0; n],
            initial,
        }
    }

    pub fn charge(&self) -> f64 {
        self.particles.iter().map(|p| p.weight).sum()
    }

    pub fn min_x1(&self) -> f64 {
        self.particles.iter().map(|p| p.position[0]).fold(f64::INFINITY, f64::min)
    }
}

/// Velocity update: half kick by `e`, rotation about `b` (Boris/Cayley form),
/// half kick.
#[inline]
pub fn boris_kick(v: Vec3, e: Vec3, b: Vec3, dt: f64) -> Vec3 {
    let half = 0.5 * dt;
    let v_minus = v + e * half;
    let t = b * half;
    let t2 = t.norm_squared();
    let v_prime = v_minus + v_minus.cross(&t);
    let s = t * (2.0 / (1.0 + t2));
    let v_plus = v_minus + v_prime.cross(&s);
    v_plus + e * half
}

/// One step of a single particle in fields held fixed over the step:
/// half drift, [`boris_kick`], half drift with the new velocity.
pub fn boris_step(p: &Particle, e_total: Vec3, b: Vec3, dt: f64) -> Particle {
    let mid = p.position + p.velocity * (0.5 * dt);
    let v = boris_kick(p.velocity, e_total, b, dt);
    Particle {
        position: mid + v * (0.5 * dt),
        velocity: v,
        weight: p.weight,
    }
}

/// Global step size from the base step, the gyro-frequency and the wall
/// approach rate.
pub fn compute_dt(state: &SimState, fields: &ExternalFields, cfg: &StepperConfig) -> Result<f64, StepError> {
    let mut max_b = 0.0f64;
    let mut wall = f64::INFINITY;
    for (k, p) in state.particles.iter().enumerate() {
        let x1 = p.position[0];
        if x1 <= 0.0 {
            return Err(StepError::WallCrossing {
                particle: k,
                x1,
                time: state.time,
            });
        }
        max_b = max_b.max(fields.h(x1)?.abs());
        wall = wall.min(x1 / p.velocity[0].abs().max(1e-12));
    }
    let mut dt = cfg.dt_base;
    if max_b > 0.0 {
        dt = dt.min(cfg.gyro_safety / max_b);
    }
    dt = dt.min(cfg.wall_safety * wall);
    if dt < cfg.dt_min {
        return Err(StepError::TimestepCollapse {
            dt,
            dt_min: cfg.dt_min,
            time: state.time,
        });
    }
    Ok(dt)
}

fn first_behind_wall(ps: &[Particle]) -> Option<(usize, f64)> {
    ps.iter()
        .enumerate()
        .find(|(_, p)| !(p.position[0] > 0.0))
        .map(|(k, p)| (k, p.position[0]))
}

/// Advances every particle by one common step. On error the state is left
/// as it was before the step.
pub fn advance(
    state: &mut SimState,
    solver: &SolverConfig,
    fields: &ExternalFields,
    cfg: &StepperConfig,
) -> Result<f64, StepError> {
    let dt = compute_dt(state, fields, cfg)?;
    step_with_dt(state, solver, fields, dt, cfg.t_end)
}

/// One step of size `min(dt, t_end - time)`, with `dt` chosen by the caller.
/// Landing on `t_end` sets the time to exactly `t_end`.
pub fn step_with_dt(
    state: &mut SimState,
    solver: &SolverConfig,
    fields: &ExternalFields,
    dt: f64,
    t_end: f64,
) -> Result<f64, StepError> {
    let mut dt = dt;
    let remaining = t_end - state.time;
    let last = remaining <= dt;
    if last {
        dt = remaining;
    }
    let half = 0.5 * dt;

    let mut mid: Vec<Particle> = state
        .particles
        .iter()
        .map(|p| Particle {
            position: p.position + p.velocity * half,
            ..*p
        })
        .collect();
    if let Some((particle, x1)) = first_behind_wall(&mid) {
        return Err(StepError::WallCrossing {
            particle,
            x1,
            time: state.time + half,
        });
    }

    let e_self = all_fields(&mid, solver)?;
    let kicked: Vec<(Vec3, f64)> = mid
        .par_iter()
        .zip(e_self.par_iter())
        .map(|(p, e)| {
            let f = fields.total_external_force(&p.position)?;
            let b = fields.magnetic_field(&p.position)?;
            let e_total = e + f;
            Ok((boris_kick(p.velocity, e_total, b, dt), e_total[1] * dt))
        })
        .collect::<Result<_, FieldError>>()?;
    for (p, (v, _)) in mid.iter_mut().zip(&kicked) {
        p.velocity = *v;
        p.position += *v * half;
    }
    if let Some((particle, x1)) = first_behind_wall(&mid) {
        return Err(StepError::WallCrossing {
            particle,
            x1,
            time: state.time + dt,
        });
    }

    state.particles = mid;
    state.fields_cache = e_self;
    for (acc, (_, di)) in state.transverse_impulse.iter_mut().zip(&kicked) {
        *acc += di;
    }
    state.time = if last { t_end } else { state.time + dt };
    state.step_index += 1;
    state.last_dt = dt;
    Ok(dt)
}

/// Steps until `t_end`, calling `observe` after every completed step.
/// Returns the number of steps taken.
pub fn run<F>(
    state: &mut SimState,
    solver: &SolverConfig,
    fields: &ExternalFields,
    cfg: &StepperConfig,
    mut observe: F,
) -> Result<u64, StepError>
where
    F: FnMut(&SimState),
{
    let start = state.step_index;
    while state.time < cfg.t_end {
        advance(state, solver, fields, cfg)?;
        observe(state);
    }
    Ok(state.step_index - start)
}

/// Per-particle residual of the transverse momentum balance
/// `V_2(t) - V_2(0) + H(X_1(t)) - H(X_1(0)) - int (E_2 + F_2) ds`.
pub fn shield_residuals(state: &SimState, fields: &ExternalFields) -> Result<Vec<f64>, FieldError> {
    state
        .particles
        .iter()
        .zip(&state.initial)
        .zip(&state.transverse_impulse)
        .map(|((p, &(v2_0, x1_0)), imp)| {
            let dh = fields.magnetic_primitive(p.position[0])? - fields.magnetic_primitive(x1_0)?;
            Ok(p.velocity[1] - v2_0 + dh - imp)
        })
        .collect()
}
