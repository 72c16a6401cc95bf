//! Particle simulation of a single-species Vlasov-Poisson plasma held in the
//! half-space `x1 > 0` by a wall magnetic field that diverges at `x1 = 0`,
//! against an external potential that attracts the plasma toward the wall.
//!
//! The crate is organized bottom-up:
//!
//! * [`fields`]: external potential, magnetic profile and its primitive,
//!   optional point charge at the origin.
//! * [`sampling`]: initial macroparticle ensembles, density deposition.
//! * [`self_field`]: Coulomb self-field by direct summation or octree.
//! * [`integrator`]: Boris-type stepping with wall-aware time-step control.
//! * [`diagnostics`]: energies, wall distance, speed envelopes, tail fits,
//!   window-averaged field ladder.
//! * [`cutoff_ladder`]: matched runs at velocity cutoffs `N` and `N + 1`.
//! * [`scenario`], [`snapshot`], [`experiment`]: configuration, persistence,
//!   sweeps and plot data.

pub mod fields;
pub mod sampling;
pub mod self_field;
pub mod integrator;
pub mod diagnostics;
pub mod scenario;
pub mod snapshot;
pub mod experiment;
pub mod cutoff_ladder;

pub use sampling::Particle;

/// Three-vector used for positions, velocities and fields.
pub type Vec3 = nalgebra::Vector3<f64>;
