use std::f64::consts::PI;

use phlab::curves::JetCurve;
use phlab::fields::sample_vector_field;
use phlab::measures::{
    j_delta, pushforward_curve_measure, seminorm, AtomicMeasure, CurveMeasure, GridDensity,
    DEFAULT_LIPSCHITZ_BOUND,
};
use phlab::models::{Endomorphism, LinearMap, PerturbedLinear};
use phlab::torus::{torus_dist, TorusPoint};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

mod common;

use common::*;

const QUAD: usize = 512;
const LADDER: [f64; 4] = [0.2, 0.1, 0.05, 0.02];

#[test]
fn disk_average_counts_atoms_in_the_open_disk() {
    let mut rng = ChaCha8Rng::seed_from_u64(1);
    for _ in 0..50 {
        let mu = random_atoms(&mut rng);
        let w = TorusPoint::new(rng.random(), rng.random());
        let delta = 0.1;
        let count: f64 = mu
            .atoms()
            .iter()
            .filter(|(z, _)| torus_dist(z, &w) < delta)
            .map(|(_, m)| m)
            .sum();
        let expected = count / (PI * delta * delta);
        assert!((j_delta(&mu, delta, &w).unwrap() - expected).abs() <= 1e-12 * expected.max(1.0));
    }
}

#[test]
fn seminorm_bound_and_monotonicity_on_random_atoms() {
    let mut rng = ChaCha8Rng::seed_from_u64(2);
    for _ in 0..100 {
        let mu = random_atoms(&mut rng);
        let norms: Vec<f64> = LADDER
            .iter()
            .map(|d| seminorm(&mu, *d, QUAD).unwrap())
            .collect();
        for (d, v) in LADDER.iter().zip(&norms) {
            assert!(*v <= mu.mass() / (PI * d * d) * 1.01, "delta = {d}: {v}");
        }
        for i in 0..LADDER.len() {
            for j in i..LADDER.len() {
                assert!(norms[i] <= 16.0 * norms[j], "{} vs {}", norms[i], norms[j]);
            }
        }
    }
}

#[test]
fn seminorm_is_subadditive() {
    let mut rng = ChaCha8Rng::seed_from_u64(3);
    for _ in 0..30 {
        let mu = random_atoms(&mut rng);
        let nu = random_atoms(&mut rng);
        let both = mu.sum(&nu);
        for d in LADDER {
            let lhs = seminorm(&both, d, QUAD).unwrap();
            let rhs = seminorm(&mu, d, QUAD).unwrap() + seminorm(&nu, d, QUAD).unwrap();
            assert!(lhs <= rhs * (1.0 + 1e-12));
        }
    }
}

#[test]
fn seminorm_is_homogeneous() {
    let mut rng = ChaCha8Rng::seed_from_u64(4);
    let mu = random_atoms(&mut rng);
    let scaled =
        AtomicMeasure::new(mu.atoms().iter().map(|(z, m)| (*z, 3.0 * m)).collect()).unwrap();
    let a = seminorm(&mu, 0.1, QUAD).unwrap();
    let b = seminorm(&scaled, 0.1, QUAD).unwrap();
    assert!((b - 3.0 * a).abs() < 1e-10 * b);
}

#[test]
fn atomic_approximations_converge_to_the_density() {
    let density = |z: &TorusPoint| 1.0 + 0.5 * (2.0 * PI * z.x()).sin() * (2.0 * PI * z.y()).cos();
    let mu = GridDensity::from_fn(64, density).unwrap();
    let target = seminorm(&mu, 0.1, QUAD).unwrap();
    let errors: Vec<f64> = [32usize, 96, 288]
        .iter()
        .map(|&k| {
            let h = 1.0 / k as f64;
            let atoms = (0..k * k)
                .map(|idx| {
                    let z =
                        TorusPoint::new(((idx / k) as f64 + 0.5) * h, ((idx % k) as f64 + 0.5) * h);
                    (z, density(&z) * h * h)
                })
                .collect();
            let approx = AtomicMeasure::new(atoms).unwrap();
            (seminorm(&approx, 0.1, QUAD).unwrap() - target).abs() / target
        })
        .collect();
    assert!(errors[2] < 0.01, "{errors:?}");
}

#[test]
fn curve_measure_mass_is_conserved() {
    let field = sample_vector_field(9, 6, 8).unwrap();
    let f = PerturbedLinear::new(LinearMap::cat(), 0.02, field, 5).unwrap();
    let eu = f.default_cones().eu;
    let mut rng = ChaCha8Rng::seed_from_u64(5);
    for _ in 0..10 {
        let start = TorusPoint::new(rng.random(), rng.random());
        let curve = JetCurve::from_curvature(
            start,
            eu.angle_of(),
            &[rng.random_range(-0.5..0.5)],
            0.2,
            0.01,
            5,
        )
        .unwrap();
        let slope: f64 = rng.random_range(-2.0..2.0);
        let log_density: Vec<f64> = curve.samples().iter().map(|s| slope * s.t).collect();
        let nu = CurveMeasure::new(curve, log_density).unwrap();
        for n in 1..=3 {
            let pushed = pushforward_curve_measure(&f, &nu, n, DEFAULT_LIPSCHITZ_BOUND).unwrap();
            let mass: f64 = pushed.iter().map(CurveMeasure::mass).sum();
            assert!(
                (mass - nu.mass()).abs() <= 1e-10 * nu.mass(),
                "n = {n}: {mass} vs {}",
                nu.mass()
            );
        }
    }
}
