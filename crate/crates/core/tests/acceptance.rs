//! One PASS/FAIL line per acceptance criterion. Exits nonzero if any fails.

use std::f64::consts::PI;
use std::panic::{catch_unwind, AssertUnwindSafe};
use std::time::{Duration, Instant};

use phlab::contact::{contact_measure, fit_beta, sublevel_bound_check, PiecewisePoly};
use phlab::curves::{
    distortion_report, image_jet, push_tracked, pushforward_curve, JetCurve, JetSample,
};
use phlab::fields::{derive_seed, mode_variance, sample_field, sample_vector_field};
use phlab::lyapunov::{
    multiplicity, pesin_membership, pointwise_exponents, ExponentQuadruple, PesinParams,
    DEFAULT_CONE_DIRECTIONS,
};
use phlab::measures::{
    birkhoff_orbit_measure, pushforward_curve_measure, seminorm, AtomicMeasure, CurveMeasure,
    GridDensity, DEFAULT_LIPSCHITZ_BOUND,
};
use phlab::models::{Endomorphism, LinearMap, PolynomialMap, VianaMap};
use phlab::skewprod::{
    exact_vs_grid, iterate_ladder, ly_coefficients, GridSpec, SkewParams, StripFunction,
};
use phlab::torus::{TangentVector, TorusPoint};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

mod common;

use common::*;

const QUAD: usize = 512;

type Criterion = (&'static str, fn() -> Verdict);

struct Verdict {
    pass: bool,
    detail: String,
}

fn verdict(pass: bool, detail: impl Into<String>) -> Verdict {
    Verdict {
        pass,
        detail: detail.into(),
    }
}

fn timed(limit: Duration, f: impl FnOnce() -> Verdict) -> Verdict {
    let start = Instant::now();
    let v = f();
    let elapsed = start.elapsed();
    Verdict {
        pass: v.pass && elapsed <= limit,
        detail: format!(
            "{}; {:.1}s of {}s",
            v.detail,
            elapsed.as_secs_f64(),
            limit.as_secs()
        ),
    }
}

fn lasota_yorke() -> Verdict {
    timed(Duration::from_secs(60), || {
        let p = SkewParams::reference();
        let report = p.validate();
        let (q, c) = ly_coefficients(&p);
        let psi = StripFunction::unit_tent();
        let rows = iterate_ladder(&p, &psi, 8).unwrap();
        let ly = rows.iter().filter_map(|r| r.ly).all(|c| c.pass);
        let steps = rows.iter().filter(|r| r.ly.is_some()).count();
        let mass = rows
            .iter()
            .map(|r| (r.mass - 1.0).abs())
            .fold(0.0, f64::max);
        let bounded = rows.iter().all(|r| r.l2_sq <= r.geometric_bound);
        let coefficients = (q - 0.8333).abs() < 1e-3 && (c - 4.667).abs() < 1e-3;
        verdict(
            report.pass && report.transversality > 0.7 && ly && steps == 8 && mass <= 1e-12 && bounded && coefficients,
            format!(
                "margin {:.4}, {steps} steps ly={ly}, mass drift {mass:.1e}, geometric bound={bounded}, q={q:.4} C={c:.4}",
                report.transversality
            ),
        )
    })
}

fn central_exponent() -> Verdict {
    let chi = SkewParams::reference().central_exponent();
    verdict(
        (chi - 0.6f64.ln()).abs() <= 1e-15 && (chi + 0.510826).abs() < 1e-6,
        format!("{chi:.9}"),
    )
}

fn exact_vs_grid_transfer() -> Verdict {
    timed(Duration::from_secs(300), || {
        let p = SkewParams::reference();
        let psi = StripFunction::unit_tent();
        let grid = GridSpec {
            nx: 1024,
            ny: 1024,
            y_half: p.y_window(psi.support_radius()).unwrap(),
        };
        let r = exact_vs_grid(&p, &psi, 8, grid).unwrap();
        verdict(
            r.pass,
            format!("L1 {:.3e} vs 2 x {:.3e}", r.l1_distance, r.mass_bound),
        )
    })
}

fn volume_oracle(f: &dyn Endomorphism, z: &TorusPoint, n: usize) -> f64 {
    let mut q = *z;
    let mut acc = 0.0;
    for _ in 0..n {
        acc += f.jacobian(&q).det().abs().ln();
        q = f.eval(&q);
    }
    acc / n as f64
}

fn lyapunov_exponents() -> Verdict {
    let cat = LinearMap::cat();
    let z = TorusPoint::new(0.1234, 0.5678);
    let golden = ((3.0 + 5f64.sqrt()) / 2.0).ln();
    let e = pointwise_exponents(&cat, &z, 10_000).unwrap();
    let cat_ok = (e.central + golden).abs() < 1e-3 && (e.unstable - golden).abs() < 1e-3;
    let tri = LinearMap::new([[3, 0], [1, 2]]);
    let t = pointwise_exponents(&tri, &z, 100).unwrap();
    let tri_ok = (t.central - 2f64.ln()).abs() < 1e-6 && (t.unstable - 3f64.ln()).abs() < 1e-6;
    let mut worst = 0.0f64;
    let mut rng = ChaCha8Rng::seed_from_u64(4);
    let models: Vec<Box<dyn Endomorphism>> = vec![
        Box::new(cat),
        Box::new(tri),
        Box::new(triangular()),
        Box::new(perturbed_cat(0.02)),
    ];
    for f in &models {
        for n in [1, 10, 100, 500] {
            let z = TorusPoint::new(rng.random(), rng.random());
            let e = pointwise_exponents(f.as_ref(), &z, n).unwrap();
            worst = worst.max((e.central + e.unstable - volume_oracle(f.as_ref(), &z, n)).abs());
        }
    }
    verdict(
        cat_ok && tri_ok && worst <= 1e-9,
        format!(
            "cat ({:.6}, {:.6}), triangular ({:.8}, {:.8}), volume identity {worst:.1e}",
            e.central, e.unstable, t.central, t.unstable
        ),
    )
}

fn jet_recursion() -> Verdict {
    let mut rng = ChaCha8Rng::seed_from_u64(20);
    let mut worst = 0.0f64;
    let mut curves = 0;
    for (f, radius) in built_in_models() {
        for _ in 0..20 {
            let c = random_curve(&mut rng, f.as_ref(), radius, 0.05);
            let pieces = pushforward_curve(f.as_ref(), &c.curve, 1).unwrap();
            for original in c.curve.samples().iter().step_by(2) {
                let (kappa, dkappa) = oracle_jets(f.as_ref(), &c, &original.point, original.t);
                let direct = image_jet(f.as_ref(), original).unwrap();
                let pushed = pieces.iter().find_map(|p| {
                    p.source_param
                        .iter()
                        .position(|s| *s == original.t)
                        .map(|i| p.curve.samples()[i].jets.clone())
                });
                for jets in [Some(direct.jets), pushed].into_iter().flatten() {
                    worst = worst.max((jets[0] - kappa).abs() / kappa.abs().max(1.0));
                    worst = worst.max((jets[1] - dkappa).abs() / dkappa.abs().max(1.0));
                }
            }
            curves += 1;
        }
    }
    let s = JetSample {
        t: 0.0,
        point: TorusPoint::new(0.0, 0.0),
        tangent: TangentVector::new(1.0, 0.0),
        jets: vec![0.0; ORDER - 2],
    };
    let fold = image_jet(&PolynomialMap::fold(), &s).unwrap().jets[0];
    verdict(
        worst <= 1e-4 && (fold - 0.5).abs() <= 1e-10,
        format!("{curves} curves, worst relative error {worst:.1e}, fold d2 = {fold:.12}"),
    )
}

fn seminorm_suite() -> Verdict {
    let lebesgue = seminorm(&GridDensity::lebesgue(64), 0.1, QUAD).unwrap();
    let delta = 0.1;
    let dirac = seminorm(
        &AtomicMeasure::dirac(TorusPoint::new(0.3, 0.6)),
        delta,
        QUAD,
    )
    .unwrap();
    let dirac_expected = 1.0 / (PI.sqrt() * delta);
    let mut rng = ChaCha8Rng::seed_from_u64(2);
    let ladder = [0.2, 0.1, 0.05, 0.02];
    let mut bound_ok = true;
    let mut monotone_ok = true;
    for _ in 0..100 {
        let mu = random_atoms(&mut rng);
        let norms: Vec<f64> = ladder
            .iter()
            .map(|d| seminorm(&mu, *d, QUAD).unwrap())
            .collect();
        bound_ok &= ladder
            .iter()
            .zip(&norms)
            .all(|(d, v)| *v <= mu.mass() / (PI * d * d) * 1.01);
        monotone_ok &=
            (0..norms.len()).all(|i| (i..norms.len()).all(|j| norms[i] <= 16.0 * norms[j]));
    }
    let orbit = birkhoff_orbit_measure(
        &LinearMap::cat(),
        &TorusPoint::new(0.1234, 0.5678),
        1_000_000,
        100,
    )
    .unwrap();
    let plateau: Vec<f64> = [0.1, 0.05, 0.02, 0.01]
        .iter()
        .map(|d| seminorm(&orbit, *d, QUAD).unwrap())
        .collect();
    let plateau_ok = plateau.iter().all(|v| (v - 1.0).abs() <= 0.1);
    verdict(
        (lebesgue - 1.0).abs() <= 0.01
            && (dirac - dirac_expected).abs() <= 0.02 * dirac_expected
            && bound_ok
            && monotone_ok
            && plateau_ok,
        format!(
            "lebesgue {lebesgue:.4}, dirac {dirac:.4} vs {dirac_expected:.4}, bound={bound_ok}, C0=16 monotone={monotone_ok}, birkhoff {plateau:.3?}"
        ),
    )
}

fn multiplicity_oracle() -> Verdict {
    let tri = LinearMap::new([[3, 0], [1, 2]]);
    let z = TorusPoint::new(0.31, 0.72);
    let chi = ExponentQuadruple::new(0.59, 0.79, 0.998, 1.198).unwrap();
    let counts: Vec<(usize, usize)> = (1..=3)
        .map(|n| {
            let p = PesinParams::new(chi, 0.05, 0.5, n).unwrap();
            let r = multiplicity(
                &tri,
                &z,
                &p,
                1.0,
                &tri.default_cones(),
                DEFAULT_CONE_DIRECTIONS,
            )
            .unwrap();
            (r.multiplicity, r.preimages)
        })
        .collect();
    let expected = (1..=3u32).all(|n| counts[n as usize - 1] == (6usize.pow(n) - 1, 6usize.pow(n)));
    let cat = LinearMap::cat();
    let cat_chi = ExponentQuadruple::new(-1.06, -0.86, 0.86, 1.06).unwrap();
    let cat_n = multiplicity(
        &cat,
        &z,
        &PesinParams::new(cat_chi, 0.05, 0.5, 3).unwrap(),
        1.0,
        &cat.default_cones(),
        DEFAULT_CONE_DIRECTIONS,
    )
    .unwrap()
    .multiplicity;
    verdict(
        expected && cat_n == 0,
        format!("triangular (N, preimages) {counts:?}, cat N = {cat_n}"),
    )
}

fn sublevel_bounds() -> Verdict {
    let monomials = [
        (vec![0.0, 1.0], 1, -1.0, 0.1, 0.2),
        (vec![0.0, 0.0, 0.5], 2, -1.0, 0.02, 0.4),
        (
            vec![0.0, 0.0, 0.0, 1.0 / 6.0],
            3,
            -1.0,
            0.001,
            2.0 * 0.006f64.cbrt(),
        ),
    ];
    let mut monomial_ok = true;
    for (coeffs, q, lo, eps, measure) in monomials {
        let h = PiecewisePoly::from_global(&coeffs, vec![lo, 1.0]).unwrap();
        let row = sublevel_bound_check(&h, q, 1.0, &[eps]).unwrap()[0];
        monomial_ok &= row.pass && (row.measure - measure).abs() < 1e-9;
    }
    let mut rng = ChaCha8Rng::seed_from_u64(41);
    let mut random_ok = 0;
    for _ in 0..100 {
        let q = rng.random_range(1..5);
        let rho = rng.random_range(0.1..3.0);
        let coeffs = random_sublevel_poly(&mut rng, q, rho);
        let mut breaks = vec![0.0, 1.0];
        for _ in 0..rng.random_range(0..4) {
            breaks.push(rng.random_range(0.05..0.95));
        }
        breaks.sort_by(f64::total_cmp);
        let h = PiecewisePoly::from_global(&coeffs, breaks).unwrap();
        if sublevel_bound_check(&h, q, rho, &[1e-1, 1e-2, 1e-3, 1e-4, 1e-6])
            .unwrap()
            .iter()
            .all(|r| r.pass)
        {
            random_ok += 1;
        }
    }
    verdict(
        monomial_ok && random_ok == 100,
        format!("monomials={monomial_ok}, random {random_ok}/100"),
    )
}

fn contact_beta(a0: f64, y0: f64) -> f64 {
    let f = VianaMap::new(2, a0, 0.1).unwrap();
    let curve =
        JetCurve::from_curvature(TorusPoint::new(0.05, y0), 0.0, &[], 0.9, 0.01, ORDER).unwrap();
    let ladder = [1e-2, 3e-3, 1e-3, 3e-4, 1e-4];
    let rows = contact_measure(&f, &curve, 1, &ladder, 200_000).unwrap();
    let pts: Vec<(f64, f64)> = rows.iter().map(|r| (r.eps, r.measure)).collect();
    fit_beta(&pts).unwrap().beta
}

fn contact_exponents() -> Verdict {
    let y0: f64 = 0.3;
    let transversal = contact_beta(y0 * y0, y0);
    let tangency = contact_beta(y0 * y0 - 0.1, y0);
    verdict(
        (transversal - 1.0).abs() <= 0.1 && (tangency - 0.5).abs() <= 0.05,
        format!("transversal {transversal:.4}, tangency {tangency:.4}"),
    )
}

fn gaussian_sampler() -> Verdict {
    let s = 4;
    let draws = 2000;
    let fields: Vec<_> = (0..draws)
        .map(|i| sample_field(s, 4, derive_seed(99, i)).unwrap())
        .collect();
    let modes = [
        (0, 0),
        (0, 1),
        (1, 0),
        (1, 1),
        (1, -1),
        (2, 0),
        (0, 3),
        (2, -3),
        (3, 3),
        (1, 4),
    ];
    let mut worst = 0.0f64;
    for (n, m) in modes {
        let var = mode_variance(s, n, m);
        let second: f64 =
            fields.iter().map(|f| f.coeff(n, m).norm_sqr()).sum::<f64>() / draws as f64;
        let se = if (n, m) == (0, 0) {
            var * 2f64.sqrt()
        } else {
            var
        } / (draws as f64).sqrt();
        worst = worst.max((second - var).abs() / se);
    }
    let a = serde_json::to_string(&sample_vector_field(5, 6, 1234).unwrap()).unwrap();
    let b = serde_json::to_string(&sample_vector_field(5, 6, 1234).unwrap()).unwrap();
    verdict(
        worst < 3.0 && a == b,
        format!("worst deviation {worst:.2} SE, reproducible={}", a == b),
    )
}

fn property_suites() -> Verdict {
    let f = perturbed_cat(0.02);
    let cones = f.default_cones();
    let mut rng = ChaCha8Rng::seed_from_u64(22);
    let mut semigroup = 0.0f64;
    for _ in 0..3 {
        let c = random_curve(&mut rng, &f, 0.5, 0.1);
        let two = pushforward_curve(&f, &c.curve, 2).unwrap();
        let one_one =
            push_tracked(&f, &cones, pushforward_curve(&f, &c.curve, 1).unwrap(), 1).unwrap();
        for (p, q) in two.iter().zip(&one_one) {
            for (a, b) in p.curve.samples().iter().zip(q.curve.samples()) {
                semigroup = semigroup.max(a.point.displacement_to(&b.point).norm());
                semigroup = semigroup.max((a.tangent - b.tangent).norm());
            }
        }
    }

    let tri = triangular();
    let tri_cones = tri.default_cones();
    let member = |z: &TorusPoint, eps: f64, k: f64, n: usize| {
        pesin_membership(
            &tri,
            z,
            &PesinParams::new(chi(), eps, k, n).unwrap(),
            &tri_cones,
            DEFAULT_CONE_DIRECTIONS,
        )
        .member
    };
    let mut monotone = true;
    let mut contained = true;
    for i in 0..100 {
        let z = TorusPoint::new((i % 10) as f64 / 10.0 + 0.03, (i / 10) as f64 / 10.0 + 0.07);
        let (eps, k, n) = (0.05, 0.3, 4);
        if member(&z, eps, k, n) {
            monotone &= member(&z, eps, k + 0.2, n) && member(&z, eps + 0.05, k, n);
            let mut w = z;
            for i in 0..n {
                contained &=
                    member(&w, eps, k, n - i) && member(&z, eps, k + eps * i as f64 + 1e-12, n - i);
                w = tri.eval(&w);
            }
        }
    }

    let lambda = (3.0 + 5f64.sqrt()) / 2.0;
    let seed = random_curve(&mut rng, &f, 0.5, 0.05);
    let kappa: Vec<f64> = seed.kappa.iter().map(|k| 0.2 * k).collect();
    let distortion: Vec<f64> = (1..=5)
        .map(|n| {
            let c = JetCurve::from_curvature(
                seed.start,
                seed.angle,
                &kappa,
                0.5 * lambda.powi(-n),
                0.001,
                ORDER,
            )
            .unwrap();
            distortion_report(&f, &c, n as usize).unwrap().distortion
        })
        .collect();
    let spread = distortion[2..].iter().fold(0.0f64, |m, d| m.max(*d))
        - distortion[2..].iter().fold(f64::INFINITY, |m, d| m.min(*d));
    let plateau = distortion.iter().all(|d| *d < 0.5) && spread < 0.05;

    let start = TorusPoint::new(rng.random(), rng.random());
    let curve =
        JetCurve::from_curvature(start, cones.eu.angle_of(), &[0.3], 0.2, 0.01, ORDER).unwrap();
    let log_density: Vec<f64> = curve.samples().iter().map(|s| 0.5 * s.t).collect();
    let nu = CurveMeasure::new(curve, log_density).unwrap();
    let mut mass = 0.0f64;
    for n in 1..=3 {
        let pushed = pushforward_curve_measure(&f, &nu, n, DEFAULT_LIPSCHITZ_BOUND).unwrap();
        mass = mass.max(
            (pushed.iter().map(CurveMeasure::mass).sum::<f64>() - nu.mass()).abs() / nu.mass(),
        );
    }
    let skew = iterate_ladder(&SkewParams::reference(), &StripFunction::unit_tent(), 8).unwrap();
    let skew_mass = skew
        .iter()
        .map(|r| (r.mass - 1.0).abs())
        .fold(0.0, f64::max);

    verdict(
        semigroup < 1e-8 && monotone && contained && plateau && mass < 1e-10 && skew_mass < 1e-12,
        format!(
            "semigroup {semigroup:.1e}, monotone={monotone}, containments={contained}, distortion {distortion:.3?}, mass drift {mass:.1e}/{skew_mass:.1e}"
        ),
    )
}

fn main() {
    let criteria: [Criterion; 11] = [
        ("lasota-yorke ladder", lasota_yorke),
        ("skew central exponent", central_exponent),
        ("exact vs grid transfer", exact_vs_grid_transfer),
        ("lyapunov exponents", lyapunov_exponents),
        ("jet recursion", jet_recursion),
        ("seminorm suite", seminorm_suite),
        ("multiplicity oracle", multiplicity_oracle),
        ("sublevel bounds", sublevel_bounds),
        ("contact exponents", contact_exponents),
        ("gaussian sampler", gaussian_sampler),
        ("property suites", property_suites),
    ];
    std::panic::set_hook(Box::new(|_| {}));
    let mut failures = 0;
    for (i, (name, run)) in criteria.iter().enumerate() {
        let v = catch_unwind(AssertUnwindSafe(run)).unwrap_or_else(|e| {
            let msg = e
                .downcast_ref::<String>()
                .cloned()
                .or_else(|| e.downcast_ref::<&str>().map(|s| s.to_string()))
                .unwrap_or_default();
            verdict(false, format!("panicked: {msg}"))
        });
        if !v.pass {
            failures += 1;
        }
        println!(
            "criterion {:>2} {:<24} {}  {}",
            i + 1,
            name,
            if v.pass { "PASS" } else { "FAIL" },
            v.detail
        );
    }
    println!(
        "{} of {} criteria passed",
        criteria.len() - failures,
        criteria.len()
    );
    if failures > 0 {
        std::process::exit(1);
    }
}
