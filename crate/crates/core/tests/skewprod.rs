use phlab::skewprod::{
    apply_branch, apply_transfer, iterate_ladder, l2_pairing, verify_ly_inequality, Profile,
    SkewParams, SlopeProfile, StripFunction, StripGrid,
};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

fn random_profile(rng: &mut ChaCha8Rng, signed: bool) -> Profile {
    let interior = rng.random_range(1..6);
    let lo: f64 = rng.random_range(-1.5..0.5);
    let mut knots = vec![lo];
    for _ in 0..=interior {
        let last = *knots.last().unwrap();
        knots.push(last + rng.random_range(0.05..0.6));
    }
    let values = (0..knots.len())
        .map(|i| {
            if i == 0 || i == knots.len() - 1 {
                0.0
            } else if signed {
                rng.random_range(-1.0..1.0)
            } else {
                rng.random_range(0.0..1.0)
            }
        })
        .collect();
    Profile::new(knots, values).unwrap()
}

fn random_params(rng: &mut ChaCha8Rng) -> SkewParams {
    loop {
        let d = rng.random_range(2..4);
        let a = (0..d)
            .map(|i| 2.0 * i as f64 - (d - 1) as f64 + rng.random_range(-0.1..0.1))
            .collect();
        let b = (0..d)
            .map(|_| {
                let m = rng.random_range(0.3..0.7);
                if rng.random_bool(0.3) {
                    -m
                } else {
                    m
                }
            })
            .collect();
        let c = (0..d).map(|_| rng.random_range(-0.2..0.2)).collect();
        let p = SkewParams::new(d, a, b, c).unwrap();
        if p.validate().pass {
            return p;
        }
    }
}

fn random_initial(rng: &mut ChaCha8Rng) -> StripFunction {
    let mut psi = StripFunction::zero();
    for _ in 0..rng.random_range(1..3) {
        psi.extend(StripFunction::line_constant(random_profile(rng, false)));
    }
    psi
}

/// `sum_i psi(F_i^{-1}(x, y)) / (d |b_i|)` evaluated pointwise.
fn pullback(p: &SkewParams, psi: &StripFunction, x: f64, y: f64) -> f64 {
    let d = p.d as f64;
    (0..p.d)
        .map(|i| {
            let x0 = (x + i as f64) / d;
            let y0 = (y - p.a[i] * x0 - p.c[i]) / p.b[i];
            psi.eval(x0, y0) / (d * p.b[i].abs())
        })
        .sum()
}

#[test]
fn exact_transfer_matches_pointwise_pullback() {
    let mut rng = ChaCha8Rng::seed_from_u64(31);
    for _ in 0..30 {
        let p = random_params(&mut rng);
        let mut psi = random_initial(&mut rng);
        for _ in 0..3 {
            let next = apply_transfer(&p, &psi).unwrap();
            for _ in 0..50 {
                let x: f64 = rng.random();
                let y: f64 = rng.random_range(-3.0..3.0);
                let oracle = pullback(&p, &psi, x, y);
                assert!((next.eval(x, y) - oracle).abs() < 1e-12 * (1.0 + oracle.abs()));
            }
            psi = next.merged();
        }
    }
}

#[test]
fn mass_is_conserved_exactly() {
    let mut rng = ChaCha8Rng::seed_from_u64(32);
    for _ in 0..10 {
        let p = random_params(&mut rng);
        let psi = random_initial(&mut rng);
        let depth = if p.d == 2 { 10 } else { 6 };
        let rows = iterate_ladder(&p, &psi, depth).unwrap();
        for row in &rows {
            assert!(
                (row.mass - psi.mass()).abs() <= 1e-12 * psi.mass(),
                "n = {}",
                row.n
            );
        }
    }
}

#[test]
fn slopes_stay_confined_and_separated() {
    let mut rng = ChaCha8Rng::seed_from_u64(33);
    for _ in 0..20 {
        let p = random_params(&mut rng);
        let theta = p.theta();
        let gap = theta * p.b_max() / p.d as f64;
        let mut psi = random_initial(&mut rng);
        for _ in 0..5 {
            let branches: Vec<StripFunction> = (0..p.d)
                .map(|i| apply_branch(&p, i, &psi).unwrap())
                .collect();
            for (i, bi) in branches.iter().enumerate() {
                for piece in &bi.pieces {
                    assert!(
                        piece.slope.abs() <= theta,
                        "slope {} > {theta}",
                        piece.slope
                    );
                }
                for bj in &branches[i + 1..] {
                    for u in &bi.pieces {
                        for v in &bj.pieces {
                            assert!((u.slope - v.slope).abs() > gap);
                        }
                    }
                }
            }
            psi = apply_transfer(&p, &psi).unwrap().merged();
        }
    }
}

#[test]
fn supports_stay_in_the_invariant_window() {
    let mut rng = ChaCha8Rng::seed_from_u64(34);
    for _ in 0..20 {
        let p = random_params(&mut rng);
        let mut psi = random_initial(&mut rng);
        let bound = p.support_radius(psi.support_radius()).unwrap();
        for _ in 0..8 {
            psi = apply_transfer(&p, &psi).unwrap().merged();
            assert!(psi.support_radius() <= bound + 1e-12);
        }
    }
}

/// `int_0^1 int g1(y - k1 x) g2(y - k2 x) dy dx`: exact in `y` by Simpson on
/// merged breakpoints, composite Simpson in `x`.
fn brute_pairing(p1: &SlopeProfile, p2: &SlopeProfile) -> f64 {
    let inner = |x: f64| -> f64 {
        let mut knots: Vec<f64> = p1
            .profile
            .knots()
            .iter()
            .map(|k| k + p1.slope * x)
            .chain(p2.profile.knots().iter().map(|k| k + p2.slope * x))
            .collect();
        knots.sort_by(f64::total_cmp);
        knots
            .windows(2)
            .map(|w| {
                let g = |y: f64| p1.eval(x, y) * p2.eval(x, y);
                (w[1] - w[0]) / 6.0 * (g(w[0]) + 4.0 * g(0.5 * (w[0] + w[1])) + g(w[1]))
            })
            .sum()
    };
    let m = 4000;
    let h = 1.0 / m as f64;
    (0..=m)
        .map(|i| {
            let w = if i == 0 || i == m {
                1.0
            } else if i % 2 == 1 {
                4.0
            } else {
                2.0
            };
            w * inner(i as f64 * h)
        })
        .sum::<f64>()
        * h
        / 3.0
}

#[test]
fn pairing_matches_brute_force() {
    let mut rng = ChaCha8Rng::seed_from_u64(35);
    for trial in 0..20 {
        let k1 = rng.random_range(-0.7..0.7);
        let k2 = if trial % 4 == 0 {
            k1
        } else {
            rng.random_range(-0.7..0.7)
        };
        let p1 = SlopeProfile::new(k1, random_profile(&mut rng, true));
        let p2 = SlopeProfile::new(k2, random_profile(&mut rng, true));
        let exact = l2_pairing(&p1, &p2);
        let brute = brute_pairing(&p1, &p2);
        assert!((exact - brute).abs() < 1e-6, "{exact} vs {brute}");
        assert!((exact - l2_pairing(&p2, &p1)).abs() < 1e-12);
    }
}

#[test]
fn pairing_obeys_cauchy_schwarz() {
    let mut rng = ChaCha8Rng::seed_from_u64(36);
    for _ in 0..1000 {
        let p1 = SlopeProfile::new(rng.random_range(-0.7..0.7), random_profile(&mut rng, true));
        let p2 = SlopeProfile::new(rng.random_range(-0.7..0.7), random_profile(&mut rng, true));
        let cross = l2_pairing(&p1, &p2);
        let bound = (l2_pairing(&p1, &p1) * l2_pairing(&p2, &p2)).sqrt();
        assert!(cross.abs() <= bound * (1.0 + 1e-12));
    }
}

#[test]
fn lasota_yorke_holds_for_random_parameters() {
    let mut rng = ChaCha8Rng::seed_from_u64(37);
    for _ in 0..10 {
        let p = random_params(&mut rng);
        let mut psi = random_initial(&mut rng);
        for _ in 0..5 {
            assert!(verify_ly_inequality(&p, &psi).unwrap().pass);
            psi = apply_transfer(&p, &psi).unwrap().merged();
        }
    }
}

#[test]
fn grid_operator_conserves_mass_inside_the_window() {
    let p = SkewParams::reference();
    let psi = StripFunction::unit_tent();
    let y_half = p.y_window(1.0).unwrap();
    let mut grid = StripGrid::from_strip(&psi, 1024, 1024, y_half).unwrap();
    let m0 = grid.mass();
    for _ in 0..6 {
        grid = grid.transfer(&p);
        assert!((grid.mass() - m0).abs() < 1e-6, "{} vs {m0}", grid.mass());
    }
}
