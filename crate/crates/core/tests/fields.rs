use num_complex::Complex64;
use phlab::fields::{derive_seed, mode_variance, sample_field, sample_vector_field, FourierField};
use phlab::torus::{TangentVector, TorusPoint};
use proptest::prelude::*;

const MODES: [(i64, i64); 10] = [
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

#[test]
fn coefficient_variances_match_the_prescription() {
    let s = 4;
    let draws = 2000;
    let fields: Vec<FourierField> = (0..draws)
        .map(|i| sample_field(s, 4, derive_seed(99, i)).unwrap())
        .collect();
    for (n, m) in MODES {
        let var = mode_variance(s, n, m);
        let (re, im) = fields.iter().fold((0.0, 0.0), |(r, i), f| {
            let a = f.coeff(n, m);
            (r + a.re * a.re, i + a.im * a.im)
        });
        let (re, im) = (re / draws as f64, im / draws as f64);
        let share = if (n, m) == (0, 0) { var } else { var / 2.0 };
        let se = share * 2f64.sqrt() / (draws as f64).sqrt();
        assert!(
            (re - share).abs() < 3.0 * se,
            "({n},{m}) real: {re} vs {share}"
        );
        if (n, m) == (0, 0) {
            assert_eq!(im, 0.0);
        } else {
            assert!(
                (im - share).abs() < 3.0 * se,
                "({n},{m}) imaginary: {im} vs {share}"
            );
        }
    }
}

#[test]
fn sampling_is_bit_reproducible() {
    let a = sample_vector_field(5, 6, 1234).unwrap();
    let b = sample_vector_field(5, 6, 1234).unwrap();
    for (u, v) in a.iter().zip(&b) {
        for n in -6..=6 {
            for m in -6..=6 {
                assert_eq!(u.coeff(n, m).re.to_bits(), v.coeff(n, m).re.to_bits());
                assert_eq!(u.coeff(n, m).im.to_bits(), v.coeff(n, m).im.to_bits());
            }
        }
    }
    assert_ne!(
        sample_field(5, 6, 1).unwrap(),
        sample_field(5, 6, 2).unwrap()
    );
}

#[test]
fn sobolev_sums_are_finite() {
    for s in 3..10 {
        for seed in 0..5 {
            let f = sample_field(s, 8, seed).unwrap();
            assert!(f.sobolev_sum().is_finite() && f.sobolev_sum() > 0.0);
            assert!(f.l2_norm_sq().is_finite());
        }
    }
}

fn direct_sum(modes: &[((i64, i64), Complex64)], z: &TorusPoint) -> f64 {
    modes
        .iter()
        .map(|&((n, m), a)| {
            let phase = 2.0 * std::f64::consts::PI * (n as f64 * z.x() + m as f64 * z.y());
            if (n, m) == (0, 0) {
                a.re
            } else {
                2.0 * (a.re * phase.cos() - a.im * phase.sin())
            }
        })
        .sum()
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(200))]

    #[test]
    fn hermitian_fields_are_real(seed in 0u64..10_000, x in 0.0f64..1.0, y in 0.0f64..1.0) {
        let f = sample_field(4, 6, seed).unwrap();
        prop_assert!(f.eval_complex(&TorusPoint::new(x, y)).im.abs() <= 1e-10);
    }

    #[test]
    fn evaluation_matches_the_real_series(
        coeffs in prop::collection::vec((-2.0f64..2.0, -2.0f64..2.0), 4),
        x in 0.0f64..1.0,
        y in 0.0f64..1.0,
    ) {
        let keys = [(0, 0), (1, 0), (2, -1), (0, 3)];
        let modes: Vec<((i64, i64), Complex64)> =
            keys.iter().zip(&coeffs).map(|(k, (r, i))| (*k, Complex64::new(*r, if *k == (0, 0) { 0.0 } else { *i }))).collect();
        let f = FourierField::from_modes(5, 3, &modes).unwrap();
        let z = TorusPoint::new(x, y);
        prop_assert!((f.eval(&z) - direct_sum(&modes, &z)).abs() < 1e-12);
    }

    #[test]
    fn derivatives_match_finite_differences(seed in 0u64..1000, x in 0.0f64..1.0, y in 0.0f64..1.0) {
        let f = sample_field(6, 4, seed).unwrap();
        let z = TorusPoint::new(x, y);
        let h = 1e-5;
        let at = |dx: f64, dy: f64| z.exp(TangentVector::new(dx, dy));
        let d1 = f.derivatives(&z, 1).unwrap();
        let d2 = f.derivatives(&z, 2).unwrap();
        let scale = 1.0 + d1.iter().chain(&d2).fold(0.0f64, |m, v| m.max(v.abs()));
        let fx = (f.eval(&at(h, 0.0)) - f.eval(&at(-h, 0.0))) / (2.0 * h);
        let fy = (f.eval(&at(0.0, h)) - f.eval(&at(0.0, -h))) / (2.0 * h);
        prop_assert!((d1[0] - fx).abs() < 1e-5 * scale);
        prop_assert!((d1[1] - fy).abs() < 1e-5 * scale);
        let gx = |p: &TorusPoint| f.derivatives(p, 1).unwrap();
        let fxy = (gx(&at(0.0, h))[0] - gx(&at(0.0, -h))[0]) / (2.0 * h);
        let fyy = (gx(&at(0.0, h))[1] - gx(&at(0.0, -h))[1]) / (2.0 * h);
        prop_assert!((d2[1] - fxy).abs() < 1e-5 * scale);
        prop_assert!((d2[2] - fyy).abs() < 1e-5 * scale);
    }
}
