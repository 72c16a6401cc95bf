//! External fields: the attractive wall potential `U`, the wall magnetic
//! field `B = (0, 0, h(x1))`, the primitive of `h`, and the fixed point
//! charge that may replace `U`.
//!
//! Near the wall (`x1 <= blend_lo`) the profiles are the pure powers
//! `U = -x1^-mu` and `h = x1^-tau`. On `(blend_lo, blend_hi)` both are
//! multiplied by the quintic taper [`taper`], and both vanish identically
//! for `x1 >= blend_hi`.

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::Vec3;

#[derive(Debug, Error, Clone, Copy, PartialEq)]
pub enum FieldError {
    #[error("external field undefined at x1 = {x1} (need x1 > 0)")]
    BehindWall { x1: f64 },
    #[error("point-charge field undefined at the origin")]
    AtOrigin,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExternalFieldConfig {
    pub mu: f64,
    pub tau: f64,
    #[serde(default = "default_blend_lo")]
    pub blend_lo: f64,
    #[serde(default = "default_blend_hi")]
    pub blend_hi: f64,
    #[serde(default)]
    pub point_charge_mode: bool,
    #[serde(default = "default_point_charge_strength")]
    pub point_charge_strength: f64,
    /// `false` sets `h` to zero everywhere (shield-off counterfactual).
    #[serde(default = "default_true")]
    pub magnetic_enabled: bool,
    /// `false` removes the attractive potential (and the point charge).
    #[serde(default = "default_true")]
    pub potential_enabled: bool,
}

fn default_blend_lo() -> f64 {
    1.0
}
fn default_blend_hi() -> f64 {
    2.0
}
fn default_point_charge_strength() -> f64 {
    1.0
}
fn default_true() -> bool {
    true
}

impl ExternalFieldConfig {
    pub fn new(mu: f64, tau: f64) -> Self {
        Self {
            mu,
            tau,
            blend_lo: default_blend_lo(),
            blend_hi: default_blend_hi(),
            point_charge_mode: false,
            point_charge_strength: default_point_charge_strength(),
            magnetic_enabled: true,
            potential_enabled: true,
        }
    }

    /// Returns the name and reason of the first violated invariant.
    pub fn validate(&self) -> Result<(), (&'static str, String)> {
        if !(self.mu > 0.0 && self.mu.is_finite()) {
            return Err(("mu", format!("must be finite and > 0, got {}", self.mu)));
        }
        if !(self.tau > 1.0 && self.tau.is_finite()) {
            return Err(("tau", format!("must be finite and > 1, got {}", self.tau)));
        }
        if !(self.blend_lo > 0.0 && self.blend_lo.is_finite()) {
            return Err((
                "blend_lo",
                format!("must be finite and > 0, got {}", self.blend_lo),
            ));
        }
        if !(self.blend_hi > self.blend_lo && self.blend_hi.is_finite()) {
            return Err((
                "blend_hi",
                format!(
                    "must be finite and > blend_lo = {}, got {}",
                    self.blend_lo, self.blend_hi
                ),
            ));
        }
        if !(self.point_charge_strength >= 0.0 && self.point_charge_strength.is_finite()) {
            return Err((
                "point_charge_strength",
                format!("must be finite and >= 0, got {}", self.point_charge_strength),
            ));
        }
        Ok(())
    }
}

/// Quintic smoothstep taper: 1 at `lo`, 0 at `hi`, with vanishing first and
/// second derivatives at both ends. Returns `(chi, dchi/dx)`.
pub fn taper(x: f64, lo: f64, hi: f64) -> (f64, f64) {
    if x <= lo {
        return (1.0, 0.0);
    }
    if x >= hi {
        return (0.0, 0.0);
    }
    let w = hi - lo;
    let s = (x - lo) / w;
    let s2 = s * s;
    let s3 = s2 * s;
    let step = s3 * (10.0 - 15.0 * s + 6.0 * s2);
    let dstep = 30.0 * s2 * (1.0 - 2.0 * s + s2) / w;
    (1.0 - step, -dstep)
}

/// Number of cells in the tabulated primitive on the taper segment.
const PRIMITIVE_TABLE_CELLS: usize = 2048;

/// Immutable evaluator for the external fields.
///
/// Construction tabulates the primitive of `h` on the taper segment; after
/// that every method is a pure function and the value can be shared freely.
#[derive(Debug, Clone)]
pub struct ExternalFields {
    cfg: ExternalFieldConfig,
    /// Primitive values at the table nodes `blend_lo + k * step`.
    table: Vec<f64>,
    step: f64,
    /// Additive constant of the closed form on `(0, blend_lo]`.
    near_wall_offset: f64,
}

impl ExternalFields {
    pub fn new(cfg: ExternalFieldConfig) -> Self {
        let (lo, hi) = (cfg.blend_lo, cfg.blend_hi);
        let step = (hi - lo) / PRIMITIVE_TABLE_CELLS as f64;
        let mut table = vec![0.0; PRIMITIVE_TABLE_CELLS + 1];
        if cfg.magnetic_enabled {
            let h = |x: f64| raw_h(&cfg, x);
            // Integrate backwards from blend_hi where the primitive is 0.
            for k in (0..PRIMITIVE_TABLE_CELLS).rev() {
                let a = lo + k as f64 * step;
                let b = if k + 1 == PRIMITIVE_TABLE_CELLS {
                    hi
                } else {
                    lo + (k + 1) as f64 * step
                };
                table[k] = table[k + 1] - adaptive_gauss(&h, a, b, 1e-15, 0);
            }
        }
        let near_wall_offset = if cfg.magnetic_enabled {
            table[0] - power_primitive(lo, cfg.tau)
        } else {
            0.0
        };
        Self {
            cfg,
            table,
            step,
            near_wall_offset,
        }
    }

    pub fn config(&self) -> &ExternalFieldConfig {
        &self.cfg
    }

    fn check(x1: f64) -> Result<(), FieldError> {
        if x1 > 0.0 {
            Ok(())
        } else {
            Err(FieldError::BehindWall { x1 })
        }
    }

    /// Profile `h(x1)` of the magnetic field.
    pub fn h(&self, x1: f64) -> Result<f64, FieldError> {
        Self::check(x1)?;
        if !self.cfg.magnetic_enabled {
            return Ok(0.0);
        }
        Ok(raw_h(&self.cfg, x1))
    }

    /// `B(x) = (0, 0, h(x1))`.
    pub fn magnetic_field(&self, x: &Vec3) -> Result<Vec3, FieldError> {
        Ok(Vec3::new(0.0, 0.0, self.h(x[0])?))
    }

    /// Primitive of `h`, normalized to vanish at `blend_hi`.
    pub fn magnetic_primitive(&self, x1: f64) -> Result<f64, FieldError> {
        Self::check(x1)?;
        if !self.cfg.magnetic_enabled {
            return Ok(0.0);
        }
        let (lo, hi) = (self.cfg.blend_lo, self.cfg.blend_hi);
        if x1 >= hi {
            return Ok(0.0);
        }
        if x1 <= lo {
            return Ok(power_primitive(x1, self.cfg.tau) + self.near_wall_offset);
        }
        // Cubic Hermite interpolation with the exact derivative h at the nodes.
        let u = (x1 - lo) / self.step;
        let k = (u.floor() as usize).min(PRIMITIVE_TABLE_CELLS - 1);
        let a = lo + k as f64 * self.step;
        let t = (x1 - a) / self.step;
        let (p0, p1) = (self.table[k], self.table[k + 1]);
        let m0 = raw_h(&self.cfg, a) * self.step;
        let m1 = raw_h(&self.cfg, (a + self.step).min(hi)) * self.step;
        let t2 = t * t;
        let t3 = t2 * t;
        Ok((2.0 * t3 - 3.0 * t2 + 1.0) * p0
            + (t3 - 2.0 * t2 + t) * m0
            + (-2.0 * t3 + 3.0 * t2) * p1
            + (t3 - t2) * m1)
    }

    /// Potential energy per unit charge of the external attractor.
    ///
    /// In point-charge mode this is `-s / |x|` instead of the wall power law.
    pub fn external_potential(&self, x: &Vec3) -> Result<f64, FieldError> {
        Self::check(x[0])?;
        if !self.cfg.potential_enabled {
            return Ok(0.0);
        }
        if self.cfg.point_charge_mode {
            let r = x.norm();
            if r == 0.0 {
                return Err(FieldError::AtOrigin);
            }
            return Ok(-self.cfg.point_charge_strength / r);
        }
        let x1 = x[0];
        let (chi, _) = taper(x1, self.cfg.blend_lo, self.cfg.blend_hi);
        if chi == 0.0 {
            return Ok(0.0);
        }
        Ok(-x1.powf(-self.cfg.mu) * chi)
    }

    /// `-grad U` of the wall potential (zero in point-charge mode; see
    /// [`Self::point_charge_force`]).
    pub fn external_force(&self, x: &Vec3) -> Result<Vec3, FieldError> {
        Self::check(x[0])?;
        if !self.cfg.potential_enabled || self.cfg.point_charge_mode {
            return Ok(Vec3::zeros());
        }
        let x1 = x[0];
        let mu = self.cfg.mu;
        let (chi, dchi) = taper(x1, self.cfg.blend_lo, self.cfg.blend_hi);
        if chi == 0.0 {
            return Ok(Vec3::zeros());
        }
        let p = x1.powf(-mu);
        // U = -p chi  =>  -dU/dx1 = p' chi + p chi' with p' = -mu p / x1
        let f1 = -mu * p / x1 * chi + p * dchi;
        Ok(Vec3::new(f1, 0.0, 0.0))
    }

    /// Attraction `-s x / |x|^3` toward a fixed charge at the origin.
    pub fn point_charge_force(&self, x: &Vec3) -> Result<Vec3, FieldError> {
        let s = self.cfg.point_charge_strength;
        let r2 = x.norm_squared();
        if r2 == 0.0 {
            return Err(FieldError::AtOrigin);
        }
        if s == 0.0 {
            return Ok(Vec3::zeros());
        }
        let r = r2.sqrt();
        Ok(-s * x / (r2 * r))
    }

    /// Total external non-magnetic acceleration: `-grad U`, or the point-charge
    /// attraction when that mode is on.
    pub fn total_external_force(&self, x: &Vec3) -> Result<Vec3, FieldError> {
        Self::check(x[0])?;
        if !self.cfg.potential_enabled {
            return Ok(Vec3::zeros());
        }
        if self.cfg.point_charge_mode {
            self.point_charge_force(x)
        } else {
            self.external_force(x)
        }
    }
}

fn raw_h(cfg: &ExternalFieldConfig, x1: f64) -> f64 {
    let (chi, _) = taper(x1, cfg.blend_lo, cfg.blend_hi);
    if chi == 0.0 {
        0.0
    } else {
        x1.powf(-cfg.tau) * chi
    }
}

/// `x^(1-tau) / (1-tau)`, an antiderivative of `x^-tau`.
fn power_primitive(x: f64, tau: f64) -> f64 {
    x.powf(1.0 - tau) / (1.0 - tau)
}

const GL5_NODES: [f64; 5] = [
    0.0,
    -0.538_469_310_105_683_1,
    0.538_469_310_105_683_1,
    -0.906_179_845_938_664,
    0.906_179_845_938_664,
];
const GL5_WEIGHTS: [f64; 5] = [
    0.568_888_888_888_888_9,
    0.478_628_670_499_366_5,
    0.478_628_670_499_366_5,
    0.236_926_885_056_189_1,
    0.236_926_885_056_189_1,
];

fn gauss5(f: &impl Fn(f64) -> f64, a: f64, b: f64) -> f64 {
    let (m, r) = (0.5 * (a + b), 0.5 * (b - a));
    r * GL5_NODES
        .iter()
        .zip(GL5_WEIGHTS)
        .map(|(&x, w)| w * f(m + r * x))
        .sum::<f64>()
}

/// Adaptive 5-point Gauss-Legendre quadrature by interval bisection.
pub(crate) fn adaptive_gauss(f: &impl Fn(f64) -> f64, a: f64, b: f64, tol: f64, depth: u32) -> f64 {
    let whole = gauss5(f, a, b);
    let m = 0.5 * (a + b);
    let split = gauss5(f, a, m) + gauss5(f, m, b);
    if depth >= 30 || (split - whole).abs() <= tol.max(1e-15 * split.abs()) {
        return split;
    }
    adaptive_gauss(f, a, m, 0.5 * tol, depth + 1) + adaptive_gauss(f, m, b, 0.5 * tol, depth + 1)
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn fields(mu: f64, tau: f64) -> ExternalFields {
        ExternalFields::new(ExternalFieldConfig::new(mu, tau))
    }

    #[test]
    fn potential_examples() {
        let f = fields(1.0, 6.0);
        assert_eq!(f.external_potential(&Vec3::new(0.5, 7.0, -3.0)).unwrap(), -2.0);
        assert_eq!(fields(2.0, 6.0).external_potential(&Vec3::new(3.0, 0.0, 0.0)).unwrap(), 0.0);
        // chi(1.5) = 1/2 for the symmetric quintic.
        assert_relative_eq!(
            f.external_potential(&Vec3::new(1.5, 0.0, 0.0)).unwrap(),
            -1.0 / 3.0,
            max_relative = 1e-15
        );
    }

    #[test]
    fn force_examples() {
        let f = fields(1.0, 6.0);
        assert_eq!(f.external_force(&Vec3::new(0.5, 0.0, 0.0)).unwrap(), Vec3::new(-4.0, 0.0, 0.0));
        assert_eq!(f.external_force(&Vec3::new(5.0, 0.0, 0.0)).unwrap(), Vec3::zeros());
        let f = fields(2.0, 6.0).external_force(&Vec3::new(0.1, 0.0, 0.0)).unwrap();
        assert_relative_eq!(f[0], -2.0e3, max_relative = 1e-13);
        assert_eq!((f[1], f[2]), (0.0, 0.0));
    }

    #[test]
    fn magnetic_examples() {
        let b = fields(1.0, 6.0).magnetic_field(&Vec3::new(0.5, 0.0, 0.0)).unwrap();
        assert_eq!(b, Vec3::new(0.0, 0.0, 64.0));
        assert_eq!(fields(1.0, 6.0).magnetic_field(&Vec3::new(2.5, 0.0, 0.0)).unwrap(), Vec3::zeros());
        let b = fields(1.0, 4.0).magnetic_field(&Vec3::new(0.1, 0.0, 0.0)).unwrap();
        assert_relative_eq!(b[2], 1.0e4, max_relative = 1e-13);
    }

    #[test]
    fn point_charge_examples() {
        let mut cfg = ExternalFieldConfig::new(1.0, 6.0);
        cfg.point_charge_mode = true;
        let f = ExternalFields::new(cfg.clone());
        assert_eq!(f.point_charge_force(&Vec3::new(1.0, 0.0, 0.0)).unwrap(), Vec3::new(-1.0, 0.0, 0.0));
        assert_eq!(f.point_charge_force(&Vec3::new(0.0, 2.0, 0.0)).unwrap(), Vec3::new(0.0, -0.25, 0.0));
        assert_eq!(f.point_charge_force(&Vec3::zeros()), Err(FieldError::AtOrigin));
        cfg.point_charge_strength = 0.0;
        let f = ExternalFields::new(cfg);
        assert_eq!(f.point_charge_force(&Vec3::new(0.3, -1.0, 2.0)).unwrap(), Vec3::zeros());
    }

    #[test]
    fn point_charge_replaces_wall_potential() {
        let mut cfg = ExternalFieldConfig::new(1.0, 6.0);
        cfg.point_charge_mode = true;
        let f = ExternalFields::new(cfg);
        let x = Vec3::new(0.5, 0.0, 0.0);
        assert_eq!(f.external_potential(&x).unwrap(), -2.0);
        assert_eq!(f.external_force(&x).unwrap(), Vec3::zeros());
        assert_eq!(f.total_external_force(&x).unwrap(), Vec3::new(-4.0, 0.0, 0.0));
        // No taper: the charge still attracts far from the wall.
        assert!(f.total_external_force(&Vec3::new(5.0, 0.0, 0.0)).unwrap()[0] < 0.0);
    }

    #[test]
    fn domain_errors_behind_the_wall() {
        let f = fields(1.0, 6.0);
        for x1 in [0.0, -0.1] {
            let x = Vec3::new(x1, 0.0, 0.0);
            assert!(f.external_potential(&x).is_err());
            assert!(f.external_force(&x).is_err());
            assert!(f.magnetic_field(&x).is_err());
            assert!(f.magnetic_primitive(x1).is_err());
        }
    }

    #[test]
    fn fields_depend_on_x1_only() {
        let f = fields(1.3, 6.5);
        let mut rng = ChaCha8Rng::seed_from_u64(7);
        for &x1 in &[0.2, 0.9, 1.4, 1.99, 2.5] {
            let base = Vec3::new(x1, 0.0, 0.0);
            let (u0, f0, b0) = (
                f.external_potential(&base).unwrap(),
                f.external_force(&base).unwrap(),
                f.magnetic_field(&base).unwrap(),
            );
            for _ in 0..100 {
                let x = Vec3::new(x1, rng.random_range(-50.0..50.0), rng.random_range(-50.0..50.0));
                assert_eq!(f.external_potential(&x).unwrap(), u0);
                assert_eq!(f.external_force(&x).unwrap(), f0);
                assert_eq!(f.magnetic_field(&x).unwrap(), b0);
            }
        }
    }

    #[test]
    fn signs_on_the_support() {
        let f = fields(1.0, 6.0);
        let mut x1 = 0.01;
        while x1 < 2.0 {
            let x = Vec3::new(x1, 0.0, 0.0);
            assert!(f.h(x1).unwrap() > 0.0, "h({x1})");
            assert!(f.external_potential(&x).unwrap() < 0.0, "U({x1})");
            x1 += 0.01;
        }
    }

    /// Second-order one-sided differences across the taper ends agree to O(eps^2).
    #[test]
    fn c1_at_taper_ends() {
        let f = fields(1.0, 6.0);
        let u = |x1: f64| f.external_potential(&Vec3::new(x1, 0.0, 0.0)).unwrap();
        let h = |x1: f64| f.h(x1).unwrap();
        for &knot in &[1.0, 2.0] {
            for g in [&u as &dyn Fn(f64) -> f64, &h] {
                for eps in [1e-2, 5e-3, 2.5e-3, 1.25e-3] {
                    let left = (3.0 * g(knot) - 4.0 * g(knot - eps) + g(knot - 2.0 * eps)) / (2.0 * eps);
                    let right = (-3.0 * g(knot) + 4.0 * g(knot + eps) - g(knot + 2.0 * eps)) / (2.0 * eps);
                    let gap = (left - right).abs();
                    assert!(gap <= 500.0 * eps * eps, "knot {knot}, eps {eps}, gap {gap}");
                }
            }
        }
    }

    #[test]
    fn primitive_examples() {
        let f = fields(1.0, 6.0);
        assert_eq!(f.magnetic_primitive(2.0).unwrap(), 0.0);
        assert_eq!(f.magnetic_primitive(3.7).unwrap(), 0.0);
        // Central difference at 0.3 converges at second order.
        let x = 0.3;
        let err = |eps: f64| {
            ((f.magnetic_primitive(x + eps).unwrap() - f.magnetic_primitive(x - eps).unwrap())
                / (2.0 * eps)
                - f.h(x).unwrap())
            .abs()
        };
        let (e1, e2) = (err(1e-3), err(5e-4));
        assert!(e1 / e2 > 3.5 && e1 / e2 < 4.5, "ratio {}", e1 / e2);
        // Monotone increasing, diverging to -inf at the wall.
        let mut prev = f64::NEG_INFINITY;
        for k in 1..=400 {
            let v = f.magnetic_primitive(k as f64 * 0.005).unwrap();
            assert!(v > prev);
            prev = v;
        }
        assert!(f.magnetic_primitive(1e-3).unwrap() < -1e13);
    }

    #[test]
    fn primitive_is_continuous_through_the_taper() {
        let f = fields(1.0, 6.0);
        let exact_taper_integral = adaptive_gauss(&|x| f.h(x).unwrap(), 1.0, 2.0, 1e-15, 0);
        assert_relative_eq!(
            f.magnetic_primitive(1.0).unwrap(),
            -exact_taper_integral,
            max_relative = 1e-12
        );
        let eps = 1e-9;
        let jump = f.magnetic_primitive(1.0 + eps).unwrap() - f.magnetic_primitive(1.0 - eps).unwrap();
        assert!(jump.abs() < 1e-8);
    }

    #[test]
    fn primitive_derivative_matches_h_at_random_points() {
        let f = fields(1.0, 6.0);
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        for _ in 0..1000 {
            let x: f64 = rng.random_range(0.05..3.0);
            let d = |eps: f64| {
                (f.magnetic_primitive(x + eps).unwrap() - f.magnetic_primitive(x - eps).unwrap())
                    / (2.0 * eps)
            };
            let eps = 1e-4 * x;
            let scale = f.h(x).unwrap().abs().max(1.0);
            // Truncation error eps^2 h''/6 bounded generously by eps^2 * |h| * tau^3 / x^2.
            let bound = eps * eps * scale * 400.0 / (x * x) + 1e-9 * scale;
            assert!((d(eps) - f.h(x).unwrap()).abs() <= bound, "x = {x}");
        }
    }

    #[test]
    fn disabled_magnet_is_zero_everywhere() {
        let mut cfg = ExternalFieldConfig::new(1.0, 6.0);
        cfg.magnetic_enabled = false;
        let f = ExternalFields::new(cfg);
        assert_eq!(f.magnetic_field(&Vec3::new(0.1, 0.0, 0.0)).unwrap(), Vec3::zeros());
        assert_eq!(f.magnetic_primitive(0.1).unwrap(), 0.0);
        assert!(f.external_force(&Vec3::new(0.5, 0.0, 0.0)).unwrap()[0] < 0.0);
    }

    #[test]
    fn validation_names_the_field() {
        let mut cfg = ExternalFieldConfig::new(-1.0, 6.0);
        assert_eq!(cfg.validate().unwrap_err().0, "mu");
        cfg.mu = 1.0;
        cfg.tau = 1.0;
        assert_eq!(cfg.validate().unwrap_err().0, "tau");
        cfg.tau = 6.0;
        cfg.blend_hi = 0.5;
        assert_eq!(cfg.validate().unwrap_err().0, "blend_hi");
    }
}
