//! Self-consistent Coulomb field of the macroparticle ensemble.
//!
//! `E(x) = sum_j w_j (x - y_j) / (|x - y_j|^2 + eps^2)^(3/2)`, evaluated either
//! by direct summation or with a Barnes-Hut octree. Both paths are
//! data-parallel over targets and sum each target in a fixed order, so results
//! do not depend on the thread count.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::sampling::Particle;
use crate::Vec3;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum SelfFieldError {
    #[error("coincident particles {i} and {j} with zero softening")]
    Singularity { i: usize, j: usize },
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "lowercase")]
pub enum SolverMode {
    #[default]
    Direct,
    Tree,
    /// No self-interaction at all.
    Off,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SolverConfig {
    /// Plummer softening length. `None` means "use [`default_softening`]";
    /// it is resolved before a run starts and treated as zero if left unset.
    #[serde(default)]
    pub softening: Option<f64>,
    #[serde(default = "default_opening_angle")]
    pub opening_angle: f64,
    #[serde(default)]
    pub mode: SolverMode,
    #[serde(default)]
    pub quadrupole: bool,
}

fn default_opening_angle() -> f64 {
    0.3
}

impl Default for SolverConfig {
    fn default() -> Self {
        Self {
            softening: None,
            opening_angle: default_opening_angle(),
            mode: SolverMode::Direct,
            quadrupole: false,
        }
    }
}

impl SolverConfig {
    pub fn direct(softening: f64) -> Self {
        Self {
            softening: Some(softening),
            ..Self::default()
        }
    }

    pub fn tree(softening: f64, opening_angle: f64) -> Self {
        Self {
            softening: Some(softening),
            opening_angle,
            mode: SolverMode::Tree,
            quadrupole: false,
        }
    }

    pub fn eps(&self) -> f64 {
        self.softening.unwrap_or(0.0)
    }

    pub fn validate(&self) -> Result<(), (&'static str, String)> {
        if let Some(e) = self.softening {
            if !(e.is_finite() && e >= 0.0) {
                return Err(("softening", format!("must be finite and >= 0, got {e}")));
            }
        }
        let t = self.opening_angle;
        if !(t > 0.0 && t < 1.0) {
            return Err(("opening_angle", format!("must lie in (0, 1), got {t}")));
        }
        Ok(())
    }
}

/// `1e-3` times the mean interparticle spacing `(volume / count)^(1/3)`.
pub fn default_softening(box_volume: f64, count: usize) -> f64 {
    1e-3 * (box_volume / count.max(1) as f64).cbrt()
}

#[inline]
fn kernel(d: Vec3, eps2: f64) -> (f64, f64) {
    let r2 = d.norm_squared() + eps2;
    let inv = 1.0 / r2.sqrt();
    (r2, inv * inv * inv)
}

/// Field at an arbitrary point. The first particle sitting exactly at `x` is
/// treated as the evaluation point itself and skipped.
pub fn direct_field_at(
    particles: &[Particle],
    x: Vec3,
    cfg: &SolverConfig,
) -> Result<Vec3, SelfFieldError> {
    if cfg.mode == SolverMode::Off {
        return Ok(Vec3::zeros());
    }
    let eps2 = cfg.eps() * cfg.eps();
    let mut self_index = None;
    let mut e = Vec3::zeros();
    for (j, p) in particles.iter().enumerate() {
        let d = x - p.position;
        if d == Vec3::zeros() {
            match self_index {
                None => {
                    self_index = Some(j);
                    continue;
                }
                Some(i) if eps2 == 0.0 => return Err(SelfFieldError::Singularity { i, j }),
                Some(_) => continue,
            }
        }
        let (_, inv3) = kernel(d, eps2);
        e += d * (p.weight * inv3);
    }
    Ok(e)
}

fn direct_field_on(particles: &[Particle], i: usize, eps2: f64) -> Result<Vec3, SelfFieldError> {
    let x = particles[i].position;
    let mut e = Vec3::zeros();
    for (j, p) in particles.iter().enumerate() {
        if j == i {
            continue;
        }
        let d = x - p.position;
        let (r2, inv3) = kernel(d, eps2);
        if r2 == 0.0 {
            return Err(SelfFieldError::Singularity { i, j });
        }
        e += d * (p.weight * inv3);
    }
    Ok(e)
}

/// Self-field at every particle, self-interaction excluded by index.
pub fn all_fields(particles: &[Particle], cfg: &SolverConfig) -> Result<Vec<Vec3>, SelfFieldError> {
    let eps2 = cfg.eps() * cfg.eps();
    match cfg.mode {
        SolverMode::Off => Ok(vec![Vec3::zeros(); particles.len()]),
        SolverMode::Direct => (0..particles.len())
            .into_par_iter()
            .map(|i| direct_field_on(particles, i, eps2))
            .collect(),
        SolverMode::Tree => {
            let tree = Octree::build(particles, cfg.quadrupole);
            (0..particles.len())
                .into_par_iter()
                .map(|i| tree.field(particles, particles[i].position, Some(i), cfg.opening_angle, eps2))
                .collect()
        }
    }
}

/// `1/2 sum_{i != j} w_i w_j / sqrt(|x_i - x_j|^2 + eps^2)`, always by direct
/// summation; zero when the solver is off.
pub fn potential_energy(particles: &[Particle], cfg: &SolverConfig) -> Result<f64, SelfFieldError> {
    if cfg.mode == SolverMode::Off {
        return Ok(0.0);
    }
    let eps2 = cfg.eps() * cfg.eps();
    let rows: Vec<f64> = (0..particles.len())
        .into_par_iter()
        .map(|i| {
            let pi = &particles[i];
            let mut acc = 0.0;
            for (j, pj) in particles.iter().enumerate().skip(i + 1) {
                let r2 = (pi.position - pj.position).norm_squared() + eps2;
                if r2 == 0.0 {
                    return Err(SelfFieldError::Singularity { i, j });
                }
                acc += pj.weight / r2.sqrt();
            }
            Ok(pi.weight * acc)
        })
        .collect::<Result<_, _>>()?;
    Ok(rows.iter().sum())
}

const LEAF_CAPACITY: usize = 8;
const MAX_DEPTH: usize = 48;

#[derive(Debug, Clone)]
struct Node {
    center: Vec3,
    half: f64,
    com: Vec3,
    weight: f64,
    /// Traceless quadrupole about `com`, row-major.
    quad: Option<[f64; 9]>,
    /// Children occupy `children[child_start..child_start + child_len]`.
    child_start: usize,
    child_len: usize,
    /// Particles occupy `order[start..end]`; only read for leaves.
    start: usize,
    end: usize,
}

impl Node {
    fn is_leaf(&self) -> bool {
        self.child_len == 0
    }

    fn contains(&self, x: &Vec3) -> bool {
        (0..3).all(|k| (x[k] - self.center[k]).abs() <= self.half)
    }
}

/// Barnes-Hut octree over a particle slice. Built once per evaluation, then
/// read-only.
#[derive(Debug, Clone)]
pub struct Octree {
    nodes: Vec<Node>,
    children: Vec<usize>,
    order: Vec<usize>,
}

impl Octree {
    pub fn build(particles: &[Particle], quadrupole: bool) -> Self {
        let mut tree = Self {
            nodes: Vec::new(),
            children: Vec::new(),
            order: (0..particles.len()).collect(),
        };
        if particles.is_empty() {
            return tree;
        }
        let mut lo = Vec3::repeat(f64::INFINITY);
        let mut hi = Vec3::repeat(f64::NEG_INFINITY);
        for p in particles {
            lo = lo.inf(&p.position);
            hi = hi.sup(&p.position);
        }
        let center = (lo + hi) * 0.5;
        let half = ((hi - lo).max() * 0.5).max(1e-300) * (1.0 + 1e-12);
        tree.build_node(particles, center, half, 0, particles.len(), 0, quadrupole);
        tree
    }

    #[allow(clippy::too_many_arguments)]
    fn build_node(
        &mut self,
        particles: &[Particle],
        center: Vec3,
        half: f64,
        start: usize,
        end: usize,
        depth: usize,
        quadrupole: bool,
    ) -> usize {
        let idx = self.nodes.len();
        let mut weight = 0.0;
        let mut moment = Vec3::zeros();
        for &k in &self.order[start..end] {
            weight += particles[k].weight;
            moment += particles[k].position * particles[k].weight;
        }
        let com = if weight != 0.0 { moment / weight } else { center };
        let quad = quadrupole.then(|| {
            let mut q = [0.0; 9];
            for &k in &self.order[start..end] {
                let d = particles[k].position - com;
                let w = particles[k].weight;
                let d2 = d.norm_squared();
                for a in 0..3 {
                    for b in 0..3 {
                        let delta = if a == b { d2 } else { 0.0 };
                        q[3 * a + b] += w * (3.0 * d[a] * d[b] - delta);
                    }
                }
            }
            q
        });
        self.nodes.push(Node {
            center,
            half,
            com,
            weight,
            quad,
            child_start: 0,
            child_len: 0,
            start,
            end,
        });
        if end - start <= LEAF_CAPACITY || depth >= MAX_DEPTH {
            return idx;
        }

        // Counting sort of the range into octants.
        let octant = |x: &Vec3| -> usize {
            (usize::from(x[0] > center[0]))
                | (usize::from(x[1] > center[1]) << 1)
                | (usize::from(x[2] > center[2]) << 2)
        };
        let mut counts = [0usize; 8];
        for &k in &self.order[start..end] {
            counts[octant(&particles[k].position)] += 1;
        }
        let mut offsets = [0usize; 8];
        let mut acc = start;
        for o in 0..8 {
            offsets[o] = acc;
            acc += counts[o];
        }
        let mut sorted = vec![0usize; end - start];
        let mut cursor = offsets;
        for &k in &self.order[start..end] {
            let o = octant(&particles[k].position);
            sorted[cursor[o] - start] = k;
            cursor[o] += 1;
        }
        self.order[start..end].copy_from_slice(&sorted);

        let mut kids = Vec::with_capacity(8);
        for o in 0..8 {
            if counts[o] == 0 {
                continue;
            }
            let q = half * 0.5;
            let c = center
                + Vec3::new(
                    if o & 1 != 0 { q } else { -q },
                    if o & 2 != 0 { q } else { -q },
                    if o & 4 != 0 { q } else { -q },
                );
            let s = offsets[o];
            kids.push(self.build_node(particles, c, q, s, s + counts[o], depth + 1, quadrupole));
        }
        let child_start = self.children.len();
        self.children.extend_from_slice(&kids);
        self.nodes[idx].child_start = child_start;
        self.nodes[idx].child_len = kids.len();
        idx
    }

    /// Field at `x`, skipping particle `skip` if given.
    pub fn field(
        &self,
        particles: &[Particle],
        x: Vec3,
        skip: Option<usize>,
        theta: f64,
        eps2: f64,
    ) -> Result<Vec3, SelfFieldError> {
        let mut e = Vec3::zeros();
        if self.nodes.is_empty() {
            return Ok(e);
        }
        let theta2 = theta * theta;
        let mut stack = vec![0usize];
        while let Some(n) = stack.pop() {
            let node = &self.nodes[n];
            let d = x - node.com;
            let r2 = d.norm_squared();
            let size = 2.0 * node.half;
            if !node.contains(&x) && size * size < theta2 * r2 {
                let (_, inv3) = kernel(d, eps2);
                e += d * (node.weight * inv3);
                if let Some(q) = &node.quad {
                    let qd = Vec3::new(
                        q[0] * d[0] + q[1] * d[1] + q[2] * d[2],
                        q[3] * d[0] + q[4] * d[1] + q[5] * d[2],
                        q[6] * d[0] + q[7] * d[1] + q[8] * d[2],
                    );
                    let inv_r2 = 1.0 / r2;
                    let inv_r5 = inv_r2 * inv_r2 / r2.sqrt();
                    e += -qd * inv_r5 + d * (2.5 * d.dot(&qd) * inv_r5 * inv_r2);
                }
                continue;
            }
            if node.is_leaf() {
                for &j in &self.order[node.start..node.end] {
                    if Some(j) == skip {
                        continue;
                    }
                    let dj = x - particles[j].position;
                    let (rr, inv3) = kernel(dj, eps2);
                    if rr == 0.0 {
                        return Err(SelfFieldError::Singularity {
                            i: skip.unwrap_or(usize::MAX),
                            j,
                        });
                    }
                    e += dj * (particles[j].weight * inv3);
                }
                continue;
            }
            // Reverse push so children are visited in octant order.
            for &c in self.children[node.child_start..node.child_start + node.child_len]
                .iter()
                .rev()
            {
                stack.push(c);
            }
        }
        Ok(e)
    }
}
