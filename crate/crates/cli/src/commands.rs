use std::fmt::Write as _;

use phlab::contact::{
    contact_ladder_csv, contact_measure, fit_beta, jet_contact_gap, q_lattice_round,
    sublevel_bound_check, CurveJet, JetLatticeSpec, PiecewisePoly, DEFAULT_CONTACT_SAMPLES,
};
use phlab::curves::{distortion_report, pushforward_curve, total_length, JetCurve};
use phlab::experiment::{genericity_experiment, Diagnostic, ExperimentSpec};
use phlab::fields::{derive_seed, sample_vector_field};
use phlab::lyapunov::{
    measure_exponents, multiplicity, pesin_membership, pointwise_exponents, transversality_ratio,
    ExponentQuadruple, PesinParams,
};
use phlab::measures::{
    ac_diagnostic_ladder, birkhoff_orbit_measure, ladder_to_csv, loglog_slope, GridDensity,
};
use phlab::models::{check_hyperbolicity, Endomorphism, HyperbolicityBudget};
use phlab::skewprod::{
    exact_vs_grid, invariant_density, iterate_ladder, DensityEstimate, DensityMode, GridSpec,
    Profile, SkewParams, StripFunction, StripGrid,
};
use phlab::torus::{Lattice, TangentVector, TorusPoint};
use phlab::{Error, Result};
use serde::Serialize;
use serde_json::{json, Value};

use crate::config::Config;
use crate::model::build_model;
use crate::{Outcome, Run};

fn to_value<T: Serialize>(v: &T) -> Value {
    serde_json::to_value(v).unwrap_or(Value::Null)
}

fn done(results: Value, pass: Option<bool>) -> Result<Outcome> {
    Ok(Outcome { results, pass })
}

fn point(cfg: &Config, prefix: &str, x: f64, y: f64) -> Result<TorusPoint> {
    Ok(TorusPoint::new(
        cfg.get(&format!("{prefix}.x"), x)?,
        cfg.get(&format!("{prefix}.y"), y)?,
    ))
}

fn budget(cfg: &Config) -> Result<HyperbolicityBudget> {
    HyperbolicityBudget::new(
        cfg.get("budget.lambda", 0.3)?,
        cfg.get("budget.c", 0.05)?,
        cfg.get("budget.big_lambda", 4.0)?,
        cfg.get("budget.rho", 0.1)?,
        cfg.get("budget.n_g", 1)?,
    )
}

/// Uniform `[0, 1)` value from a seed and an index.
fn uniform(seed: u64, index: u64) -> f64 {
    (derive_seed(seed, index) >> 11) as f64 / (1u64 << 53) as f64
}

pub fn check(run: &mut Run) -> Result<Outcome> {
    let f = build_model(&run.cfg, run.seed)?;
    let b = budget(&run.cfg)?;
    let grid = Lattice::with_points_per_axis(run.cfg.get("check.grid", 16)?)?;
    let n: usize = run.cfg.get("check.n", 10)?;
    let dirs: usize = run.cfg.get("check.directions", 9)?;
    let report = check_hyperbolicity(f.as_ref(), &f.default_cones(), &b, n, &grid, dirs)?;
    done(
        json!({ "model": f.name(), "report": to_value(&report) }),
        Some(report.pass),
    )
}

pub fn orbit(run: &mut Run) -> Result<Outcome> {
    let f = build_model(&run.cfg, run.seed)?;
    let z = point(&run.cfg, "orbit", 0.1234, 0.5678)?;
    let n: usize = run.cfg.get("orbit.n", 10_000)?;
    let burn_in: usize = run.cfg.get("orbit.burn_in", 0)?;
    let dump: usize = run.cfg.get("orbit.dump", 1000)?;
    let pointwise = pointwise_exponents(f.as_ref(), &z, n)?;
    let mu = birkhoff_orbit_measure(f.as_ref(), &z, n, burn_in)?;
    let averaged = measure_exponents(f.as_ref(), &mu)?;
    let mut csv = String::from("t,x,y\n");
    for (t, (p, _)) in mu.atoms().iter().take(dump).enumerate() {
        let _ = writeln!(csv, "{t},{:.16e},{:.16e}", p.x(), p.y());
    }
    run.csv("orbit.csv", csv);
    done(
        json!({
            "model": f.name(),
            "pointwise": to_value(&pointwise),
            "birkhoff": to_value(&averaged),
        }),
        None,
    )
}

fn curve_from_config(cfg: &Config, f: &dyn Endomorphism) -> Result<JetCurve> {
    let start = point(cfg, "curve", 0.1, 0.2)?;
    let eu = f.default_cones().eu;
    let angle: f64 = cfg.get("curve.angle", eu.angle_of())?;
    let length: f64 = cfg.get("curve.length", 1.0)?;
    let order: usize = cfg.get("curve.order", f.order())?;
    JetCurve::segment(start, TangentVector::from_angle(angle), length, order)
}

pub fn curve(run: &mut Run) -> Result<Outcome> {
    let f = build_model(&run.cfg, run.seed)?;
    let gamma = curve_from_config(&run.cfg, f.as_ref())?;
    let n: usize = run.cfg.get("curve.n", 1)?;
    let dump: usize = run.cfg.get("curve.dump", 8)?;
    let eps = run
        .cfg
        .list("contact.eps", &[1e-1, 3e-2, 1e-2, 3e-3, 1e-3])?;
    let samples: usize = run.cfg.get("contact.samples", DEFAULT_CONTACT_SAMPLES)?;
    let pieces = pushforward_curve(f.as_ref(), &gamma, n.max(1))?;
    let distortion = distortion_report(f.as_ref(), &gamma, n.max(1))?;
    for (i, p) in pieces.iter().take(dump).enumerate() {
        run.csv(&format!("curve_piece_{i}.csv"), p.curve.to_csv());
    }
    let ladder = contact_measure(f.as_ref(), &gamma, n, &eps, samples)?;
    run.csv("contact.csv", contact_ladder_csv(&ladder));
    let pts: Vec<(f64, f64)> = ladder.iter().map(|r| (r.eps, r.measure)).collect();
    let fit = match fit_beta(&pts) {
        Ok(fit) => to_value(&fit),
        Err(e) => json!({ "unavailable": e.to_string() }),
    };
    done(
        json!({
            "model": f.name(),
            "pieces": pieces.len(),
            "total_length": total_length(&pieces),
            "distortion": to_value(&distortion),
            "contact": to_value(&ladder),
            "beta_fit": fit,
        }),
        None,
    )
}

pub fn measure(run: &mut Run) -> Result<Outcome> {
    let deltas = run.cfg.list("measure.deltas", &[0.1, 0.05, 0.02, 0.01])?;
    let quad: usize = run.cfg.get("measure.quad", 512)?;
    let source = run.cfg.string("measure.source", "birkhoff");
    let ladder = match source.as_str() {
        "birkhoff" => {
            let f = build_model(&run.cfg, run.seed)?;
            let z = point(&run.cfg, "orbit", 0.1234, 0.5678)?;
            let n: usize = run.cfg.get("orbit.n", 100_000)?;
            let burn_in: usize = run.cfg.get("orbit.burn_in", 0)?;
            let mu = birkhoff_orbit_measure(f.as_ref(), &z, n, burn_in)?;
            ac_diagnostic_ladder(&mu, &deltas, quad)?
        }
        "lebesgue" => {
            let res: usize = run.cfg.get("measure.resolution", 256)?;
            ac_diagnostic_ladder(&GridDensity::lebesgue(res), &deltas, quad)?
        }
        other => return Err(Error::Config(format!("unknown measure.source {other:?}"))),
    };
    run.csv("seminorm.csv", ladder_to_csv(&ladder));
    let rows: Vec<Value> = ladder
        .iter()
        .map(|(d, v)| json!({ "delta": d, "seminorm": v }))
        .collect();
    done(
        json!({ "ladder": rows, "loglog_slope": loglog_slope(&ladder) }),
        None,
    )
}

fn chi_from_config(cfg: &Config) -> Result<ExponentQuadruple> {
    let chi = cfg.list("pesin.chi", &[0.59, 0.79, 0.998, 1.198])?;
    if chi.len() != 4 {
        return Err(Error::Config("pesin.chi needs four values".into()));
    }
    ExponentQuadruple::new(chi[0], chi[1], chi[2], chi[3])
}

pub fn pesin(run: &mut Run) -> Result<Outcome> {
    let f = build_model(&run.cfg, run.seed)?;
    let z = point(&run.cfg, "pesin", 0.1234, 0.5678)?;
    let chi = chi_from_config(&run.cfg)?;
    let eps: f64 = run.cfg.get("pesin.eps", 0.01)?;
    let k: f64 = run.cfg.get("pesin.k", 1.0)?;
    let n: usize = run.cfg.get("pesin.n", 3)?;
    let h: f64 = run.cfg.get("pesin.h", 1.0)?;
    let dirs: usize = run.cfg.get("pesin.directions", 9)?;
    let ladder = run.cfg.usize_list("pesin.ladder", &[1, 2, 3])?;
    let cones = f.default_cones();
    let params = PesinParams::new(chi, eps, k, n)?;
    let member = pesin_membership(f.as_ref(), &z, &params, &cones, dirs);
    let mult = multiplicity(f.as_ref(), &z, &params, h, &cones, dirs)?;
    let ratio = match transversality_ratio(f.as_ref(), &chi, eps, k, &ladder, &[z], h, &cones) {
        Ok(rows) => {
            let mut csv = String::from("n,multiplicity,ratio\n");
            for r in &rows {
                let _ = writeln!(csv, "{},{},{:.16e}", r.n, r.max_multiplicity, r.ratio);
            }
            run.csv("transversality.csv", csv);
            to_value(&rows)
        }
        Err(Error::Parameter(msg)) => json!({ "unavailable": msg }),
        Err(e) => return Err(e),
    };
    done(
        json!({
            "model": f.name(),
            "membership": to_value(&member),
            "multiplicity": to_value(&mult),
            "transversality_ratio": ratio,
        }),
        None,
    )
}

fn skew_params(cfg: &Config) -> Result<SkewParams> {
    let d: usize = cfg.get("skew.d", 2)?;
    SkewParams::new(
        d,
        cfg.list("skew.a", &[1.0, -1.0])?,
        cfg.list("skew.b", &[0.6, 0.6])?,
        cfg.list("skew.c", &[0.0, 0.0])?,
    )
}

/// Unit-mass tent of half-width `skew.radius` at slope zero.
fn skew_initial(cfg: &Config) -> Result<StripFunction> {
    let radius: f64 = cfg.get("skew.radius", 1.0)?;
    Ok(StripFunction::line_constant(Profile::tent(
        0.0,
        radius,
        1.0 / radius,
    )?))
}

fn skew_grid(cfg: &Config, p: &SkewParams, nx: usize, ny: usize) -> Result<GridSpec> {
    let radius: f64 = cfg.get("skew.radius", 1.0)?;
    Ok(GridSpec {
        nx: cfg.get("skew.nx", nx)?,
        ny: cfg.get("skew.ny", ny)?,
        y_half: cfg.get("skew.y_half", p.y_window(radius)?)?,
    })
}

pub fn skew_validate(run: &mut Run) -> Result<Outcome> {
    let p = skew_params(&run.cfg)?;
    let report = p.validate();
    done(
        json!({ "validation": to_value(&report), "central_exponent": p.central_exponent() }),
        Some(report.pass),
    )
}

fn ladder_csv(rows: &[phlab::skewprod::IterateRow]) -> String {
    let mut csv = String::from("n,pieces,mass,l2_sq,lhs,rhs,geometric_bound\n");
    for r in rows {
        let (lhs, rhs) = r.ly.map(|c| (c.lhs, c.rhs)).unwrap_or((f64::NAN, f64::NAN));
        let _ = writeln!(
            csv,
            "{},{},{:.16e},{:.16e},{:.16e},{:.16e},{:.16e}",
            r.n, r.pieces, r.mass, r.l2_sq, lhs, rhs, r.geometric_bound
        );
    }
    csv
}

pub fn skew_iterate(run: &mut Run) -> Result<Outcome> {
    let p = skew_params(&run.cfg)?;
    let psi = skew_initial(&run.cfg)?;
    let n: usize = run.cfg.get("skew.n", 8)?;
    let rows = iterate_ladder(&p, &psi, n)?;
    run.csv("iterates.csv", ladder_csv(&rows));
    done(json!({ "iterates": to_value(&rows) }), None)
}

pub fn skew_verify_ly(run: &mut Run) -> Result<Outcome> {
    let p = skew_params(&run.cfg)?;
    let psi = skew_initial(&run.cfg)?;
    let n: usize = run.cfg.get("skew.n", 8)?;
    let mass_tol: f64 = run.cfg.get("skew.mass_tol", 1e-12)?;
    let validation = p.validate();
    let rows = iterate_ladder(&p, &psi, n)?;
    run.csv("iterates.csv", ladder_csv(&rows));
    let m0 = psi.mass();
    let per_step: Vec<Value> = rows
        .iter()
        .map(|r| {
            json!({
                "n": r.n,
                "ly_pass": r.ly.map(|c| c.pass),
                "mass_pass": (r.mass - m0).abs() <= mass_tol,
                "bound_pass": r.l2_sq <= r.geometric_bound * (1.0 + 1e-12),
            })
        })
        .collect();
    let pass = validation.pass
        && rows.iter().all(|r| {
            r.ly.is_none_or(|c| c.pass)
                && (r.mass - m0).abs() <= mass_tol
                && r.l2_sq <= r.geometric_bound * (1.0 + 1e-12)
        });
    done(
        json!({ "validation": to_value(&validation), "iterates": to_value(&rows), "checks": per_step }),
        Some(pass),
    )
}

pub fn skew_density(run: &mut Run) -> Result<Outcome> {
    let p = skew_params(&run.cfg)?;
    let psi = skew_initial(&run.cfg)?;
    let n: usize = run.cfg.get("skew.n", 8)?;
    let mode = match run.cfg.string("skew.mode", "exact").as_str() {
        "exact" => DensityMode::Exact,
        "grid" => DensityMode::Grid,
        other => return Err(Error::Config(format!("unknown skew.mode {other:?}"))),
    };
    let grid = skew_grid(&run.cfg, &p, 256, 256)?;
    let (estimate, diagnostics) = invariant_density(&p, &psi, n, mode, grid)?;
    let dump_nx: usize = run.cfg.get("density.nx", 64)?;
    let dump_ny: usize = run.cfg.get("density.ny", 128)?;
    let dump = StripGrid::sample(dump_nx, dump_ny, grid.y_half, |x, y| estimate.eval(x, y))?;
    run.csv("density.csv", dump.to_csv());
    let pieces = match &estimate {
        DensityEstimate::Exact(s) => Some(s.len()),
        DensityEstimate::Grid(_) => None,
    };
    done(
        json!({ "diagnostics": to_value(&diagnostics), "pieces": pieces, "grid": to_value(&grid) }),
        None,
    )
}

pub fn skew_exact_vs_grid(run: &mut Run) -> Result<Outcome> {
    let p = skew_params(&run.cfg)?;
    let psi = skew_initial(&run.cfg)?;
    let n: usize = run.cfg.get("skew.n", 8)?;
    let grid = skew_grid(&run.cfg, &p, 1024, 1024)?;
    let report = exact_vs_grid(&p, &psi, n, grid)?;
    done(
        json!({ "comparison": to_value(&report), "grid": to_value(&grid) }),
        Some(report.pass),
    )
}

fn random_jets(cfg: &Config, f: &dyn Endomorphism, seed: u64) -> Result<Vec<CurveJet>> {
    let count: usize = cfg.get("jets.count", 1000)?;
    let spread: f64 = cfg.get("jets.scalar_range", 0.0)?;
    let q = f.order().saturating_sub(2).max(1);
    let cones = f.default_cones();
    (0..count as u64)
        .map(|i| {
            let base = 8 * i;
            let p = TorusPoint::new(uniform(seed, base), uniform(seed, base + 1));
            let tilt = (2.0 * uniform(seed, base + 2) - 1.0) * cones.theta_u;
            let scalars = (0..q - 1)
                .map(|k| spread * (2.0 * uniform(seed, base + 3 + k as u64) - 1.0))
                .collect();
            CurveJet::new(p, cones.eu.rotated(tilt), scalars)
        })
        .collect()
}

pub fn jets_gap(run: &mut Run) -> Result<Outcome> {
    let f = build_model(&run.cfg, run.seed)?;
    let n: usize = run.cfg.get("jets.n", 3)?;
    let jets = random_jets(&run.cfg, f.as_ref(), run.seed)?;
    let gap = jet_contact_gap(f.as_ref(), &jets, n)?;
    done(json!({ "model": f.name(), "gap": to_value(&gap) }), None)
}

fn lattice_spec(cfg: &Config) -> Result<JetLatticeSpec> {
    JetLatticeSpec::new(
        cfg.get("lattice.n", 3)?,
        cfg.get("lattice.lambda_minus", 0.5)?,
        cfg.get("lattice.lambda_plus", 1.0)?,
        cfg.get("lattice.r", 5)?,
    )
}

pub fn jets_round(run: &mut Run) -> Result<Outcome> {
    let spec = lattice_spec(&run.cfg)?;
    let p = point(&run.cfg, "jets", 0.1234, 0.5678)?;
    let angle: f64 = run.cfg.get("jets.angle", 0.1)?;
    let scalars = run.cfg.list("jets.scalars", &vec![0.0; spec.r - 3])?;
    let eu_angle: f64 = run.cfg.get("jets.eu_angle", 0.0)?;
    let bound: f64 = run.cfg.get("lattice.scalar_bound", 1.0)?;
    let jet = CurveJet::new(p, TangentVector::from_angle(angle), scalars)?;
    let rounded = q_lattice_round(&jet, &spec, &TangentVector::from_angle(eu_angle))?;
    let distance = phlab::contact::jet_distance(&jet, &rounded)?;
    done(
        json!({
            "input": to_value(&jet),
            "rounded": to_value(&rounded),
            "distance": distance,
            "steps": to_value(&spec.steps()),
            "log_cardinality": spec.log_cardinality(bound),
            "cardinality_exponent": spec.cardinality_exponent(),
        }),
        None,
    )
}

pub fn jets_sublevel(run: &mut Run) -> Result<Outcome> {
    let coeffs = run.cfg.list("sublevel.coeffs", &[0.0, 0.0, 0.5])?;
    let breaks = run.cfg.list("sublevel.breaks", &[-1.0, 1.0])?;
    let q: usize = run.cfg.get("sublevel.q", 2)?;
    let rho: f64 = run.cfg.get("sublevel.rho", 1.0)?;
    let eps = run.cfg.list("sublevel.eps", &[1e-1, 1e-2, 1e-3])?;
    let h = PiecewisePoly::from_global(&coeffs, breaks)?;
    let rows = sublevel_bound_check(&h, q, rho, &eps)?;
    let pass = rows.iter().all(|r| r.pass);
    done(json!({ "rows": to_value(&rows) }), Some(pass))
}

pub fn perturb_sample(run: &mut Run) -> Result<Outcome> {
    let s: u32 = run.cfg.get("field.s", 7)?;
    let n_max: usize = run.cfg.get("field.n_max", 8)?;
    let grid: usize = run.cfg.get("field.grid", 32)?;
    let fields = sample_vector_field(s, n_max, run.seed)?;
    let mut csv = String::from("x,y,u,v\n");
    for i in 0..grid {
        for j in 0..grid {
            let z = TorusPoint::new(i as f64 / grid as f64, j as f64 / grid as f64);
            let _ = writeln!(
                csv,
                "{:.16e},{:.16e},{:.16e},{:.16e}",
                z.x(),
                z.y(),
                fields[0].eval(&z),
                fields[1].eval(&z)
            );
        }
    }
    run.csv("field.csv", csv);
    let stats: Vec<Value> = fields
        .iter()
        .map(|f| json!({ "l2_norm_sq": f.l2_norm_sq(), "sobolev_sum": f.sobolev_sum() }))
        .collect();
    done(json!({ "components": stats }), None)
}

pub fn perturb_experiment(run: &mut Run) -> Result<Outcome> {
    let cfg = &run.cfg;
    let order: usize = cfg.get("experiment.r", 5)?;
    let diagnostic = match cfg.string("experiment.diagnostic", "ratio").as_str() {
        "ratio" => {
            let z = point(cfg, "pesin", 0.1234, 0.5678)?;
            Diagnostic::TransversalityRatio {
                chi: chi_from_config(cfg)?,
                eps: cfg.get("pesin.eps", 0.01)?,
                k: cfg.get("pesin.k", 1.0)?,
                n: cfg.get("pesin.n", 2)?,
                h: cfg.get("pesin.h", 1.0)?,
                points: vec![z],
                threshold: cfg.get("experiment.threshold", 1.0)?,
            }
        }
        "gap" => {
            let base =
                phlab::models::LinearMap::new(cfg.matrix("experiment.matrix", [[3, 0], [1, 2]])?)
                    .with_order(order);
            Diagnostic::JetContactGap {
                jets: random_jets(cfg, &base, run.seed)?,
                n: cfg.get("jets.n", 3)?,
                threshold: cfg.get("experiment.threshold", 0.0)?,
            }
        }
        "beta" => {
            let base =
                phlab::models::LinearMap::new(cfg.matrix("experiment.matrix", [[3, 0], [1, 2]])?)
                    .with_order(order);
            Diagnostic::ContactBeta {
                curve: curve_from_config(cfg, &base)?,
                n: cfg.get("curve.n", 1)?,
                ladder: cfg.list("contact.eps", &[1e-1, 3e-2, 1e-2, 3e-3, 1e-3])?,
                samples: cfg.get("contact.samples", 20_000)?,
                threshold: cfg.get("experiment.threshold", 0.5)?,
            }
        }
        other => {
            return Err(Error::Config(format!(
                "unknown experiment.diagnostic {other:?}"
            )))
        }
    };
    let spec = ExperimentSpec {
        base: cfg.matrix("experiment.matrix", [[3, 0], [1, 2]])?,
        amplitude: cfg.get("experiment.amplitude", 0.01)?,
        smoothness: cfg.get("experiment.s", (order + 2) as u32)?,
        n_max: cfg.get("experiment.n_max", 4)?,
        order,
        trials: cfg.get("experiment.trials", 10)?,
        seed: run.seed,
        budget: budget(cfg)?,
        check_grid: cfg.get("check.grid", 8)?,
        check_iterates: cfg.get("check.n", 3)?,
        diagnostic,
    };
    let table = genericity_experiment(&spec)?;
    let mut csv = String::from("trial,seed,hyperbolic,value,satisfied\n");
    for t in &table.trials {
        let value = t.value.map(|v| format!("{v:.16e}")).unwrap_or_default();
        let sat = t.satisfied.map(|s| s.to_string()).unwrap_or_default();
        let _ = writeln!(
            csv,
            "{},{},{},{},{}",
            t.index, t.seed, t.hyperbolic, value, sat
        );
    }
    run.csv("trials.csv", csv);
    done(json!({ "table": to_value(&table) }), None)
}
