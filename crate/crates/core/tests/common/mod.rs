#![allow(dead_code)]

use phlab::curves::JetCurve;
use phlab::fields::sample_vector_field;
use phlab::lyapunov::ExponentQuadruple;
use phlab::measures::AtomicMeasure;
use phlab::models::{Endomorphism, LinearMap, PerturbedLinear, PolynomialMap, VianaMap};
use phlab::torus::{TangentVector, TorusPoint};
use rand::Rng;
use rand_chacha::ChaCha8Rng;

pub const ORDER: usize = 5;

pub fn perturbed_cat(amplitude: f64) -> PerturbedLinear {
    PerturbedLinear::new(
        LinearMap::cat(),
        amplitude,
        sample_vector_field(9, 6, 3).unwrap(),
        ORDER,
    )
    .unwrap()
}

pub fn built_in_models() -> Vec<(Box<dyn Endomorphism>, f64)> {
    vec![
        (Box::new(LinearMap::cat()), 0.5),
        (Box::new(LinearMap::new([[3, 0], [1, 2]])), 0.5),
        (Box::new(perturbed_cat(0.02)), 0.5),
        (Box::new(VianaMap::new(2, 1.0, 0.1).unwrap()), 0.3),
        (Box::new(PolynomialMap::fold()), 0.15),
        (Box::new(PolynomialMap::bowl()), 0.15),
    ]
}

pub struct RandomCurve {
    pub start: TorusPoint,
    pub angle: f64,
    pub kappa: Vec<f64>,
    pub curve: JetCurve,
}

pub fn random_curve(
    rng: &mut ChaCha8Rng,
    f: &dyn Endomorphism,
    radius: f64,
    length: f64,
) -> RandomCurve {
    let cones = f.default_cones();
    let start = TorusPoint::new(
        rng.random_range(-radius..radius),
        rng.random_range(-radius..radius),
    );
    let angle = cones.eu.angle_of() + rng.random_range(-0.5..0.5) * cones.theta_u;
    let kappa: Vec<f64> = (0..3).map(|_| rng.random_range(-1.0..1.0)).collect();
    let curve = JetCurve::from_curvature(start, angle, &kappa, length, 0.01, ORDER).unwrap();
    RandomCurve {
        start,
        angle,
        kappa,
        curve,
    }
}

/// Tangent angle of the curve with curvature polynomial `kappa`.
pub fn phi(c: &RandomCurve, s: f64) -> f64 {
    let mut acc = c.angle;
    let mut fact = 1.0;
    for (j, k) in c.kappa.iter().enumerate() {
        fact *= (j + 1) as f64;
        acc += k * s.powi(j as i32 + 1) / fact;
    }
    acc
}

/// Displacement along the curve from parameter `a` to `b`, composite Simpson.
pub fn chord(c: &RandomCurve, a: f64, b: f64) -> [f64; 2] {
    let m = 16 * ((b - a).abs() / 0.005).ceil().max(1.0) as usize;
    let h = (b - a) / m as f64;
    let mut acc = [0.0; 2];
    for i in 0..=m {
        let w = if i == 0 || i == m {
            1.0
        } else if i % 2 == 1 {
            4.0
        } else {
            2.0
        };
        let p = phi(c, a + i as f64 * h);
        acc[0] += w * p.cos();
        acc[1] += w * p.sin();
    }
    [acc[0] * h / 3.0, acc[1] * h / 3.0]
}

/// Curvature of the image curve and its arclength derivative at parameter
/// `t`, from finite differences of `F` composed with the curve.
pub fn oracle_jets(f: &dyn Endomorphism, c: &RandomCurve, base: &TorusPoint, t: f64) -> (f64, f64) {
    let h = 1e-3;
    let image_base = f.eval(base);
    let g = |k: i32| -> [f64; 2] {
        let d = chord(c, t, t + k as f64 * h);
        let v = image_base.displacement_to(&f.eval(&base.exp(TangentVector::new(d[0], d[1]))));
        [v.vx, v.vy]
    };
    let p: Vec<[f64; 2]> = (-2..=2).map(g).collect();
    let comp = |i: usize| -> (f64, f64, f64) {
        let v = |k: usize| p[k][i];
        let d1 = (v(0) - 8.0 * v(1) + 8.0 * v(3) - v(4)) / (12.0 * h);
        let d2 = (-v(0) + 16.0 * v(1) - 30.0 * v(2) + 16.0 * v(3) - v(4)) / (12.0 * h * h);
        let d3 = (-v(0) + 2.0 * v(1) - 2.0 * v(3) + v(4)) / (2.0 * h * h * h);
        (d1, d2, d3)
    };
    let (x1, x2, x3) = comp(0);
    let (y1, y2, y3) = comp(1);
    let speed = x1.hypot(y1);
    let n = x1 * y2 - y1 * x2;
    let dn = x1 * y3 - y1 * x3;
    let dspeed = (x1 * x2 + y1 * y2) / speed;
    let kappa = n / speed.powi(3);
    let dkappa = (dn / speed.powi(3) - 3.0 * n * dspeed / speed.powi(4)) / speed;
    (kappa, dkappa)
}

pub fn close(a: f64, b: f64, rel: f64) -> bool {
    (a - b).abs() <= rel * b.abs().max(1.0)
}

pub fn random_atoms(rng: &mut ChaCha8Rng) -> AtomicMeasure {
    let count = rng.random_range(1..60);
    let clustered = rng.random_bool(0.5);
    let centre = TorusPoint::new(rng.random(), rng.random());
    let atoms = (0..count)
        .map(|_| {
            let z = if clustered {
                TorusPoint::new(
                    centre.x() + 0.05 * rng.random::<f64>(),
                    centre.y() + 0.05 * rng.random::<f64>(),
                )
            } else {
                TorusPoint::new(rng.random(), rng.random())
            };
            (z, rng.random_range(0.01..1.0))
        })
        .collect();
    AtomicMeasure::new(atoms).unwrap()
}

/// `h` with `h^(q)(x) = rho + a (x - c)^2`, plus a random polynomial of degree
/// below `q`, in monomial coefficients.
pub fn random_sublevel_poly(rng: &mut ChaCha8Rng, q: usize, rho: f64) -> Vec<f64> {
    let a = rng.random_range(0.0..5.0);
    let c = rng.random_range(-0.5..1.5);
    let mut coeffs = vec![rho + a * c * c, -2.0 * a * c, a];
    for _ in 0..q {
        let mut next = vec![rng.random_range(-1.0..1.0)];
        next.extend(coeffs.iter().enumerate().map(|(k, v)| v / (k + 1) as f64));
        coeffs = next;
    }
    coeffs
}

pub fn triangular() -> PerturbedLinear {
    let base = LinearMap::new([[3, 0], [1, 2]]);
    PerturbedLinear::new(base, 0.02, sample_vector_field(8, 5, 17).unwrap(), 5).unwrap()
}

pub fn chi() -> ExponentQuadruple {
    ExponentQuadruple::new(0.59, 0.79, 0.998, 1.198).unwrap()
}
