//! Initial ensembles and density estimates.
//!
//! Positions are uniform in an axis-aligned box inside `x1 > A > 0`;
//! velocity components are i.i.d. centered Gaussians of variance
//! `1 / (2 lambda)`, restricted to `|v| < cutoff_n` by rejection.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};
use serde::{Deserialize, Serialize};
use statrs::distribution::{ChiSquared, ContinuousCDF};
use thiserror::Error;

use crate::Vec3;

/// Smallest admissible acceptance probability of the velocity cutoff.
pub const MIN_ACCEPTANCE: f64 = 1e-6;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Particle {
    pub position: Vec3,
    pub velocity: Vec3,
    pub weight: f64,
}

impl Particle {
    pub fn new(position: Vec3, velocity: Vec3, weight: f64) -> Self {
        Self {
            position,
            velocity,
            weight,
        }
    }
}

#[derive(Debug, Error, Clone, PartialEq)]
pub enum SamplingError {
    #[error("invalid initial datum: `{field}` {reason}")]
    InvalidDatum { field: &'static str, reason: String },
    #[error("velocity cutoff {cutoff} accepts only {probability:e} of the Gaussian (minimum {MIN_ACCEPTANCE:e})")]
    CutoffTooSmall { cutoff: f64, probability: f64 },
    #[error("particle count must be at least 1")]
    EmptyEnsemble,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct InitialDatum {
    /// Gaussian rate in `exp(-lambda v^2)`.
    pub lambda: f64,
    /// Value of the integral of the initial density (sum of weights).
    pub total_charge: f64,
    /// Velocity cutoff `N`; infinite means no cutoff.
    #[serde(default = "infinite")]
    pub cutoff_n: f64,
    pub box_min: [f64; 3],
    pub box_max: [f64; 3],
}

fn infinite() -> f64 {
    f64::INFINITY
}

impl InitialDatum {
    pub fn validate(&self) -> Result<(), SamplingError> {
        let bad = |field: &'static str, reason: String| {
            Err(SamplingError::InvalidDatum { field, reason })
        };
        if !(self.lambda > 0.0 && self.lambda.is_finite()) {
            return bad("lambda", format!("must be finite and > 0, got {}", self.lambda));
        }
        if !(self.total_charge > 0.0 && self.total_charge.is_finite()) {
            return bad(
                "total_charge",
                format!("must be finite and > 0, got {}", self.total_charge),
            );
        }
        if !(self.cutoff_n > 0.0) {
            return bad("cutoff_n", format!("must be > 0, got {}", self.cutoff_n));
        }
        if !(self.box_min[0] > 0.0) {
            return bad(
                "box_min",
                format!("first coordinate A must be > 0, got {}", self.box_min[0]),
            );
        }
        for k in 0..3 {
            if !(self.box_min[k].is_finite()
                && self.box_max[k].is_finite()
                && self.box_max[k] > self.box_min[k])
            {
                return bad(
                    "box_max",
                    format!("must exceed box_min componentwise (axis {k})"),
                );
            }
        }
        Ok(())
    }

    /// Per-component velocity standard deviation `sqrt(1 / (2 lambda))`.
    pub fn thermal_sigma(&self) -> f64 {
        (0.5 / self.lambda).sqrt()
    }

    pub fn box_volume(&self) -> f64 {
        (0..3).map(|k| self.box_max[k] - self.box_min[k]).product()
    }

    /// Probability that an uncut Gaussian velocity satisfies `|v| < cutoff`.
    pub fn acceptance_probability(&self, cutoff: f64) -> f64 {
        if cutoff.is_infinite() {
            return 1.0;
        }
        let z = cutoff / self.thermal_sigma();
        ChiSquared::new(3.0).expect("3 dof").cdf(z * z)
    }

    /// Amplitude `C1` of `f0 = C1 exp(-lambda v^2)` on `box x b(N)` implied by
    /// `total_charge`.
    pub fn derived_c1(&self) -> f64 {
        let gaussian_mass = (std::f64::consts::PI / self.lambda).powf(1.5);
        self.total_charge
            / (self.box_volume() * gaussian_mass * self.acceptance_probability(self.cutoff_n))
    }
}

/// Candidate draws in a fixed order: three uniforms for the position, then
/// three normals for the velocity.
struct CandidateStream<'a> {
    datum: &'a InitialDatum,
    rng: ChaCha8Rng,
    normal: Normal<f64>,
}

impl<'a> CandidateStream<'a> {
    fn new(datum: &'a InitialDatum, seed: u64) -> Self {
        Self {
            datum,
            rng: ChaCha8Rng::seed_from_u64(seed),
            normal: Normal::new(0.0, datum.thermal_sigma()).expect("finite sigma"),
        }
    }

    fn next(&mut self) -> (Vec3, Vec3) {
        let (lo, hi) = (self.datum.box_min, self.datum.box_max);
        let mut x = Vec3::zeros();
        for k in 0..3 {
            let u: f64 = self.rng.random();
            x[k] = lo[k] + u * (hi[k] - lo[k]);
        }
        let v = Vec3::new(
            self.normal.sample(&mut self.rng),
            self.normal.sample(&mut self.rng),
            self.normal.sample(&mut self.rng),
        );
        (x, v)
    }
}

/// Draws `count` particles with `|v| < cutoff_n` and equal weights summing to
/// `total_charge`. The same `(datum, count, seed)` always yields the same
/// ensemble.
pub fn sample(datum: &InitialDatum, count: usize, seed: u64) -> Result<Vec<Particle>, SamplingError> {
    sample_with_shell(datum, count, seed, datum.cutoff_n).map(|(core, _)| core)
}

/// Draws the core ensemble exactly as [`sample`] does and, from the same
/// candidate stream, keeps the rejected candidates with
/// `cutoff_n <= |v| < shell_hi` as a velocity shell. Shell particles carry
/// the core per-particle weight.
pub fn sample_with_shell(
    datum: &InitialDatum,
    count: usize,
    seed: u64,
    shell_hi: f64,
) -> Result<(Vec<Particle>, Vec<Particle>), SamplingError> {
    datum.validate()?;
    if count == 0 {
        return Err(SamplingError::EmptyEnsemble);
    }
    let probability = datum.acceptance_probability(datum.cutoff_n);
    if probability < MIN_ACCEPTANCE {
        return Err(SamplingError::CutoffTooSmall {
            cutoff: datum.cutoff_n,
            probability,
        });
    }
    let weight = datum.total_charge / count as f64;
    let mut stream = CandidateStream::new(datum, seed);
    let mut core = Vec::with_capacity(count);
    let mut shell = Vec::new();
    while core.len() < count {
        let (x, v) = stream.next();
        let speed = v.norm();
        if speed < datum.cutoff_n {
            core.push(Particle::new(x, v, weight));
        } else if speed < shell_hi {
            shell.push(Particle::new(x, v, weight));
        }
    }
    // If equal weights do not sum to total_charge in floating point, the last
    // weight absorbs the rounding (total - head is exact by Sterbenz).
    let sum: f64 = core.iter().map(|p| p.weight).sum();
    if sum != datum.total_charge {
        let head: f64 = core[..count - 1].iter().map(|p| p.weight).sum();
        core[count - 1].weight = datum.total_charge - head;
    }
    Ok((core, shell))
}

/// Uniform cell-centered grid.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GridSpec {
    pub origin: [f64; 3],
    pub spacing: [f64; 3],
    pub dims: [usize; 3],
}

impl GridSpec {
    /// Grid of `cells` per axis whose interior covers the bounding box of
    /// `particles`, padded by one cell so every cloud-in-cell footprint lands
    /// on the grid.
    pub fn covering(particles: &[Particle], cells: usize) -> Self {
        let cells = cells.max(3);
        let mut lo = [f64::INFINITY; 3];
        let mut hi = [f64::NEG_INFINITY; 3];
        for p in particles {
            for k in 0..3 {
                lo[k] = lo[k].min(p.position[k]);
                hi[k] = hi[k].max(p.position[k]);
            }
        }
        let mut origin = [0.0; 3];
        let mut spacing = [1.0; 3];
        for k in 0..3 {
            if !lo[k].is_finite() {
                lo[k] = 0.0;
                hi[k] = 1.0;
            }
            let extent = (hi[k] - lo[k]).max(1e-12 * (1.0 + lo[k].abs()));
            spacing[k] = extent / (cells - 2) as f64;
            origin[k] = lo[k] - spacing[k];
        }
        Self {
            origin,
            spacing,
            dims: [cells; 3],
        }
    }

    pub fn cell_volume(&self) -> f64 {
        self.spacing.iter().product()
    }

    pub fn len(&self) -> usize {
        self.dims.iter().product()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    /// Flat index with `x1` fastest.
    pub fn index(&self, i: [usize; 3]) -> usize {
        i[0] + self.dims[0] * (i[1] + self.dims[1] * i[2])
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct DensityField {
    pub grid: GridSpec,
    pub rho: Vec<f64>,
    /// Charge whose footprint fell outside the grid.
    pub overflow_charge: f64,
    /// Number of particles with at least part of their footprint outside.
    pub overflow_particles: usize,
}

impl DensityField {
    /// Integral of the density over the grid.
    pub fn total(&self) -> f64 {
        self.rho.iter().sum::<f64>() * self.grid.cell_volume()
    }
}

/// Cloud-in-cell deposition of particle weights, divided by the cell volume.
pub fn estimate_density(particles: &[Particle], grid: &GridSpec) -> DensityField {
    let mut mass = vec![0.0; grid.len()];
    let mut overflow_charge = 0.0;
    let mut overflow_particles = 0;
    for p in particles {
        let mut base = [0i64; 3];
        let mut frac = [0.0; 3];
        for k in 0..3 {
            let u = (p.position[k] - grid.origin[k]) / grid.spacing[k] - 0.5;
            let f = u.floor();
            base[k] = f as i64;
            frac[k] = u - f;
        }
        let mut spilled = false;
        for corner in 0..8 {
            let mut idx = [0usize; 3];
            let mut w = p.weight;
            let mut inside = true;
            for k in 0..3 {
                let up = (corner >> k) & 1 == 1;
                let i = base[k] + up as i64;
                w *= if up { frac[k] } else { 1.0 - frac[k] };
                if i < 0 || i >= grid.dims[k] as i64 {
                    inside = false;
                } else {
                    idx[k] = i as usize;
                }
            }
            if inside {
                mass[grid.index(idx)] += w;
            } else if w != 0.0 {
                overflow_charge += w;
                spilled = true;
            }
        }
        overflow_particles += spilled as usize;
    }
    let vc = grid.cell_volume();
    DensityField {
        grid: grid.clone(),
        rho: mass.into_iter().map(|m| m / vc).collect(),
        overflow_charge,
        overflow_particles,
    }
}

/// `sum over cells of rho^(5/3) * cell volume`.
pub fn density_l53_norm(field: &DensityField) -> f64 {
    let vc = field.grid.cell_volume();
    field.rho.iter().map(|&r| r.max(0.0).powf(5.0 / 3.0)).sum::<f64>() * vc
}
