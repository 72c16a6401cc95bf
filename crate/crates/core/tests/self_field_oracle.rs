use magshield::self_field::{
    all_fields, direct_field_at, potential_energy, SolverConfig, SolverMode,
};
use magshield::{Particle, Vec3};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

fn cloud(n: usize, seed: u64) -> Vec<Particle> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    (0..n)
        .map(|_| Particle {
            position: Vec3::new(rng.random(), rng.random(), rng.random()),
            velocity: Vec3::zeros(),
            weight: rng.random_range(0.5..1.5),
        })
        .collect()
}

/// Plain double loop over raw coordinates, no shared code with the solver.
fn oracle_fields(ps: &[Particle], eps: f64) -> Vec<[f64; 3]> {
    let mut out = vec![[0.0; 3]; ps.len()];
    for i in 0..ps.len() {
        for j in 0..ps.len() {
            if i == j {
                continue;
            }
            let dx = ps[i].position.x - ps[j].position.x;
            let dy = ps[i].position.y - ps[j].position.y;
            let dz = ps[i].position.z - ps[j].position.z;
            let r = (dx * dx + dy * dy + dz * dz + eps * eps).sqrt();
            let s = ps[j].weight / (r * r * r);
            out[i][0] += s * dx;
            out[i][1] += s * dy;
            out[i][2] += s * dz;
        }
    }
    out
}

fn max_relative_error(a: &[Vec3], b: &[Vec3]) -> f64 {
    a.iter()
        .zip(b)
        .map(|(x, y)| (x - y).norm() / y.norm())
        .fold(0.0, f64::max)
}

#[test]
fn direct_matches_double_loop() {
    for eps in [0.0, 0.05] {
        let ps = cloud(10, 3);
        let cfg = SolverConfig::direct(eps);
        let got = all_fields(&ps, &cfg).unwrap();
        let want = oracle_fields(&ps, eps);
        for (g, w) in got.iter().zip(&want) {
            let w = Vec3::new(w[0], w[1], w[2]);
            assert!((g - w).norm() <= 1e-14 * w.norm(), "{g} vs {w}");
        }
        // Evaluation at a particle position skips that particle.
        let at = direct_field_at(&ps, ps[4].position, &cfg).unwrap();
        assert!((at - got[4]).norm() <= 1e-14 * got[4].norm());
    }
}

#[test]
fn energy_matches_double_loop() {
    let ps = cloud(10, 9);
    let mut want = 0.0;
    for i in 0..ps.len() {
        for j in 0..ps.len() {
            if i != j {
                want += 0.5 * ps[i].weight * ps[j].weight / (ps[i].position - ps[j].position).norm();
            }
        }
    }
    let got = potential_energy(&ps, &SolverConfig::direct(0.0)).unwrap();
    assert!((got - want).abs() <= 1e-14 * want);
}

#[test]
fn tree_monopole_accuracy_at_theta_0_3() {
    let ps = cloud(1000, 11);
    let direct = all_fields(&ps, &SolverConfig::direct(0.0)).unwrap();
    let tree = all_fields(&ps, &SolverConfig::tree(0.0, 0.3)).unwrap();
    let err = max_relative_error(&tree, &direct);
    assert!(err < 1e-2, "max relative error {err}");
}

#[test]
fn tree_error_shrinks_with_opening_angle() {
    let ps = cloud(1000, 12);
    let direct = all_fields(&ps, &SolverConfig::direct(0.0)).unwrap();
    let errs: Vec<f64> = [0.8, 0.5, 0.3, 0.1]
        .iter()
        .map(|&t| max_relative_error(&all_fields(&ps, &SolverConfig::tree(0.0, t)).unwrap(), &direct))
        .collect();
    for w in errs.windows(2) {
        assert!(w[1] <= w[0], "{errs:?}");
    }
}

#[test]
fn tiny_opening_angle_reduces_to_direct() {
    let ps = cloud(300, 13);
    let direct = all_fields(&ps, &SolverConfig::direct(1e-3)).unwrap();
    let tree = all_fields(&ps, &SolverConfig::tree(1e-3, 1e-9)).unwrap();
    assert!(max_relative_error(&tree, &direct) < 1e-12);
}

#[test]
fn quadrupole_improves_on_monopole() {
    let ps = cloud(1000, 14);
    let direct = all_fields(&ps, &SolverConfig::direct(0.0)).unwrap();
    let mono = all_fields(&ps, &SolverConfig::tree(0.0, 0.5)).unwrap();
    let quad_cfg = SolverConfig {
        quadrupole: true,
        ..SolverConfig::tree(0.0, 0.5)
    };
    let quad = all_fields(&ps, &quad_cfg).unwrap();
    assert!(max_relative_error(&quad, &direct) < max_relative_error(&mono, &direct));
}

/// Points spread evenly over a sphere: outside it they act like one charge.
#[test]
fn shell_theorem() {
    let n = 4000;
    let golden = std::f64::consts::PI * (3.0 - 5f64.sqrt());
    let ps: Vec<Particle> = (0..n)
        .map(|k| {
            let z = 1.0 - 2.0 * (k as f64 + 0.5) / n as f64;
            let r = (1.0 - z * z).sqrt();
            let phi = golden * k as f64;
            Particle {
                position: Vec3::new(r * phi.cos(), r * phi.sin(), z),
                velocity: Vec3::zeros(),
                weight: 1.0 / n as f64,
            }
        })
        .collect();
    for mode in [SolverMode::Direct, SolverMode::Tree] {
        let cfg = SolverConfig {
            mode,
            ..SolverConfig::tree(0.0, 0.3)
        };
        for x in [Vec3::new(1.5, 0.0, 0.0), Vec3::new(0.0, -2.0, 1.0), Vec3::new(3.0, 3.0, 3.0)] {
            let e = if mode == SolverMode::Direct {
                direct_field_at(&ps, x, &cfg).unwrap()
            } else {
                let mut with_probe = ps.clone();
                with_probe.push(Particle {
                    position: x,
                    velocity: Vec3::zeros(),
                    weight: 0.0,
                });
                all_fields(&with_probe, &cfg).unwrap()[n]
            };
            let want = x / x.norm().powi(3);
            assert!((e - want).norm() < 0.01 * want.norm(), "{mode:?} at {x}");
        }
    }
}

#[test]
fn repeated_evaluation_is_bit_identical() {
    let ps = cloud(500, 15);
    let cfg = SolverConfig::tree(1e-4, 0.5);
    let a = all_fields(&ps, &cfg).unwrap();
    let b = all_fields(&ps, &cfg).unwrap();
    assert_eq!(a, b);
    let pool = rayon::ThreadPoolBuilder::new().num_threads(3).build().unwrap();
    let c = pool.install(|| all_fields(&ps, &cfg).unwrap());
    assert_eq!(a, c);
}
