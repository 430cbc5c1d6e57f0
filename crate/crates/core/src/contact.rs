//! Contact of iterated curves with the critical set: curve jets and their
//! metric, jets of critical level curves, contact-measure ladders, the
//! sublevel-set bound for polynomials and the jet lattice.

use std::fmt::Write as _;

use serde::{Deserialize, Serialize};

use crate::critical::det_taylor;
use crate::curves::{image_jet, JetCurve, JetSample};
use crate::error::{Error, Result};
use crate::models::{critical_distance, ConeField, Endomorphism};
use crate::torus::{angle, signed_angle, torus_dist, Lattice, TangentVector, TorusPoint};

/// Gradients of `det DF` below this are treated as degenerate.
pub const GRAD_FLOOR: f64 = 1e-8;
pub const DEFAULT_CONTACT_SAMPLES: usize = 100_000;
/// Relative agreement required between the contact measure at `M` and `2M` samples.
pub const CONTACT_STABILITY: f64 = 0.01;

/// `q`-jet of a curve: base point, unit tangent and `d^2, ..., d^q`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CurveJet {
    pub point: TorusPoint,
    pub tangent: TangentVector,
    pub scalars: Vec<f64>,
}

impl CurveJet {
    pub fn new(point: TorusPoint, tangent: TangentVector, scalars: Vec<f64>) -> Result<Self> {
        let tangent = tangent.normalized()?;
        Ok(CurveJet {
            point,
            tangent,
            scalars,
        })
    }

    pub fn order(&self) -> usize {
        self.scalars.len() + 1
    }

    pub fn from_sample(s: &JetSample, order: usize) -> Self {
        let mut scalars = s.jets.clone();
        scalars.resize(order.saturating_sub(1), 0.0);
        CurveJet {
            point: s.point,
            tangent: s.tangent,
            scalars,
        }
    }

    pub fn to_sample(&self) -> JetSample {
        JetSample {
            t: 0.0,
            point: self.point,
            tangent: self.tangent,
            jets: self.scalars.clone(),
        }
    }

    /// Same germ traversed backwards.
    pub fn reversed(&self) -> CurveJet {
        CurveJet {
            point: self.point,
            tangent: -self.tangent,
            scalars: self
                .scalars
                .iter()
                .enumerate()
                .map(|(i, v)| if i % 2 == 0 { -v } else { *v })
                .collect(),
        }
    }
}

/// `max(d(p1, p2), angle(t1, t2), max_i |d^i_1 - d^i_2|)`.
pub fn jet_distance(j1: &CurveJet, j2: &CurveJet) -> Result<f64> {
    if j1.order() != j2.order() {
        return Err(Error::Domain(format!(
            "jet orders differ: {} vs {}",
            j1.order(),
            j2.order()
        )));
    }
    let mut d = torus_dist(&j1.point, &j2.point).max(angle(&j1.tangent, &j2.tangent)?);
    for (a, b) in j1.scalars.iter().zip(&j2.scalars) {
        d = d.max((a - b).abs());
    }
    Ok(d)
}

/// Distance between unoriented jets: the minimum over both orientations of `j2`.
pub fn unoriented_jet_distance(j1: &CurveJet, j2: &CurveJet) -> Result<f64> {
    Ok(jet_distance(j1, j2)?.min(jet_distance(j1, &j2.reversed())?))
}

/// Jet of the image curve at the image point.
pub fn jet_action(f: &dyn Endomorphism, j: &CurveJet, cones: &ConeField) -> Result<CurveJet> {
    if !cones.in_unstable(&j.tangent) {
        return Err(Error::ConeViolation { t: 0.0 });
    }
    push_jet(f, j)
}

fn push_jet(f: &dyn Endomorphism, j: &CurveJet) -> Result<CurveJet> {
    if j.scalars.is_empty() {
        let v = f.jacobian(&j.point).apply(j.tangent);
        return CurveJet::new(f.eval(&j.point), v, Vec::new());
    }
    let img = image_jet(f, &j.to_sample())?;
    Ok(CurveJet {
        point: f.eval(&j.point),
        tangent: img.tangent,
        scalars: img.jets,
    })
}

/// `n`-fold jet action.
pub fn iterate_jet_action(
    f: &dyn Endomorphism,
    j: &CurveJet,
    n: usize,
    cones: &ConeField,
) -> Result<CurveJet> {
    let mut out = j.clone();
    for _ in 0..n {
        out = jet_action(f, &out, cones)?;
    }
    Ok(out)
}

/// Jet of order `r - 2` of the level curve of `det DF` through `w`, oriented
/// so that the gradient points to its left.
pub fn critical_jet(f: &dyn Endomorphism, w: &TorusPoint) -> Result<CurveJet> {
    let q = f.order().saturating_sub(2).max(1);
    level_curve_jet(f, w, q)
}

pub fn level_curve_jet(f: &dyn Endomorphism, w: &TorusPoint, q: usize) -> Result<CurveJet> {
    let det = det_taylor(f, w, q.max(1))?;
    let grad = TangentVector::new(det.coeff(1, 0), det.coeff(0, 1));
    let g = grad.norm();
    if !(g > GRAD_FLOOR) {
        return Err(Error::DegenerateLevelSet(g));
    }
    let tangent = TangentVector::new(grad.vy / g, -grad.vx / g);
    let mut sample = JetSample {
        t: 0.0,
        point: *w,
        tangent,
        jets: vec![0.0; q.saturating_sub(1)],
    };
    let mut factorial = 1.0;
    for m in 2..=q {
        factorial *= m as f64;
        sample.jets[m - 2] = 0.0;
        let (x, y, _) = sample.germ(q);
        let e_m = det.compose(&x, &y).coeff(m);
        sample.jets[m - 2] = -e_m * factorial / g;
    }
    Ok(CurveJet {
        point: *w,
        tangent,
        scalars: sample.jets,
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ContactSample {
    pub eps: f64,
    pub measure: f64,
    /// Agreement of the `M` and `2M` sample estimates.
    pub stable: bool,
}

/// Parameter measure of `{t : d(F^n gamma(t), C(F)) < eps}` for each `eps`.
pub fn contact_measure(
    f: &dyn Endomorphism,
    gamma: &JetCurve,
    n: usize,
    eps_ladder: &[f64],
    samples: usize,
) -> Result<Vec<ContactSample>> {
    if samples == 0 {
        return Err(Error::Parameter(
            "need at least one parameter sample".into(),
        ));
    }
    let length = gamma.length();
    let distances = |m: usize| -> Vec<f64> {
        (0..m)
            .map(|i| {
                let t = (i as f64 + 0.5) * length / m as f64;
                let mut z = gamma.at(t).point;
                for _ in 0..n {
                    z = f.eval(&z);
                }
                critical_distance(f, &z)
            })
            .collect()
    };
    let coarse = distances(samples);
    let fine = distances(2 * samples);
    let measure = |d: &[f64], eps: f64| {
        d.iter().filter(|v| **v < eps).count() as f64 * length / d.len() as f64
    };
    Ok(eps_ladder
        .iter()
        .map(|&eps| {
            let m1 = measure(&coarse, eps);
            let m2 = measure(&fine, eps);
            ContactSample {
                eps,
                measure: m2,
                stable: (m1 - m2).abs() <= CONTACT_STABILITY * m2 + length / samples as f64,
            }
        })
        .collect())
}

pub fn contact_ladder_csv(rows: &[ContactSample]) -> String {
    let mut out = String::from("eps,measure\n");
    for r in rows {
        let _ = writeln!(out, "{:.16e},{:.16e}", r.eps, r.measure);
    }
    out
}

/// Least-squares fit of `measure ~ C eps^beta`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct BetaFit {
    pub c: f64,
    /// `+inf` when no ladder point sees any contact.
    pub beta: f64,
    pub r_squared: f64,
    pub points: usize,
}

impl BetaFit {
    pub fn is_no_contact(&self) -> bool {
        self.beta.is_infinite()
    }
}

pub fn fit_beta(samples: &[(f64, f64)]) -> Result<BetaFit> {
    let pts: Vec<(f64, f64)> = samples
        .iter()
        .filter(|(e, m)| *e > 0.0 && *m > 0.0)
        .map(|(e, m)| (e.ln(), m.ln()))
        .collect();
    if pts.is_empty() {
        return Ok(BetaFit {
            c: 0.0,
            beta: f64::INFINITY,
            r_squared: 1.0,
            points: 0,
        });
    }
    if pts.len() < 4 {
        return Err(Error::Parameter(format!(
            "fit needs at least 4 positive ladder points, got {}",
            pts.len()
        )));
    }
    let n = pts.len() as f64;
    let mx = pts.iter().map(|p| p.0).sum::<f64>() / n;
    let my = pts.iter().map(|p| p.1).sum::<f64>() / n;
    let sxx: f64 = pts.iter().map(|p| (p.0 - mx).powi(2)).sum();
    let sxy: f64 = pts.iter().map(|p| (p.0 - mx) * (p.1 - my)).sum();
    let syy: f64 = pts.iter().map(|p| (p.1 - my).powi(2)).sum();
    if sxx == 0.0 {
        return Err(Error::Parameter("ladder needs distinct eps values".into()));
    }
    let beta = sxy / sxx;
    let r_squared = if syy == 0.0 {
        1.0
    } else {
        sxy * sxy / (sxx * syy)
    };
    Ok(BetaFit {
        c: (my - beta * mx).exp(),
        beta,
        r_squared,
        points: pts.len(),
    })
}

fn horner(c: &[f64], s: f64) -> f64 {
    c.iter().rev().fold(0.0, |acc, v| acc * s + v)
}

fn poly_deriv(c: &[f64]) -> Vec<f64> {
    c.iter()
        .enumerate()
        .skip(1)
        .map(|(i, v)| i as f64 * v)
        .collect()
}

fn trimmed(c: &[f64]) -> &[f64] {
    let scale = c.iter().fold(0.0f64, |m, v| m.max(v.abs()));
    let mut len = c.len();
    while len > 0 && c[len - 1].abs() <= 1e-300_f64.max(scale * 1e-15) {
        len -= 1;
    }
    &c[..len]
}

/// Real roots of the polynomial `c` in `[lo, hi]`, by splitting at the roots
/// of the derivative into monotone pieces and bisecting sign changes.
pub fn real_roots(c: &[f64], lo: f64, hi: f64) -> Vec<f64> {
    let c = trimmed(c);
    match c.len() {
        0 | 1 => Vec::new(),
        2 => {
            let r = -c[0] / c[1];
            if r >= lo && r <= hi {
                vec![r]
            } else {
                Vec::new()
            }
        }
        _ => {
            let mut cuts = vec![lo];
            cuts.extend(real_roots(&poly_deriv(c), lo, hi));
            cuts.push(hi);
            let mut roots: Vec<f64> = Vec::new();
            for w in cuts.windows(2) {
                let (mut a, mut b) = (w[0], w[1]);
                let (mut fa, fb) = (horner(c, a), horner(c, b));
                if fa == 0.0 {
                    roots.push(a);
                    continue;
                }
                if fb == 0.0 {
                    roots.push(b);
                    continue;
                }
                if fa.signum() == fb.signum() {
                    continue;
                }
                for _ in 0..200 {
                    let m = 0.5 * (a + b);
                    if m <= a || m >= b {
                        break;
                    }
                    let fm = horner(c, m);
                    if fm == 0.0 {
                        a = m;
                        b = m;
                        break;
                    }
                    if fm.signum() == fa.signum() {
                        a = m;
                        fa = fm;
                    } else {
                        b = m;
                    }
                }
                roots.push(0.5 * (a + b));
            }
            roots.sort_by(f64::total_cmp);
            roots.dedup_by(|a, b| (*a - *b).abs() <= 1e-14 * (1.0 + b.abs()));
            roots
        }
    }
}

/// Piecewise polynomial on `[breaks[0], breaks[m]]`; piece `i` is given by
/// coefficients in the local variable `x - breaks[i]`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PiecewisePoly {
    breaks: Vec<f64>,
    pieces: Vec<Vec<f64>>,
}

impl PiecewisePoly {
    pub fn new(breaks: Vec<f64>, pieces: Vec<Vec<f64>>) -> Result<Self> {
        if breaks.len() != pieces.len() + 1 || pieces.is_empty() {
            return Err(Error::Parameter("need one more break than pieces".into()));
        }
        if breaks.windows(2).any(|w| !(w[0] < w[1])) {
            return Err(Error::Parameter("breaks must strictly increase".into()));
        }
        Ok(PiecewisePoly { breaks, pieces })
    }

    /// A single global polynomial `sum c_k x^k`, split at `breaks`.
    pub fn from_global(coeffs: &[f64], breaks: Vec<f64>) -> Result<Self> {
        let pieces = breaks[..breaks.len().saturating_sub(1)]
            .iter()
            .map(|&a| taylor_shift(coeffs, a))
            .collect();
        PiecewisePoly::new(breaks, pieces)
    }

    pub fn breaks(&self) -> &[f64] {
        &self.breaks
    }

    pub fn pieces(&self) -> &[Vec<f64>] {
        &self.pieces
    }

    pub fn eval(&self, x: f64) -> f64 {
        let i = self
            .breaks
            .partition_point(|b| *b <= x)
            .saturating_sub(1)
            .min(self.pieces.len() - 1);
        horner(&self.pieces[i], x - self.breaks[i])
    }

    fn piece_derivative(&self, i: usize, k: usize) -> Vec<f64> {
        (0..k).fold(self.pieces[i].clone(), |c, _| poly_deriv(&c))
    }

    /// `min |h^(q)|` over the domain.
    pub fn min_abs_derivative(&self, q: usize) -> f64 {
        (0..self.pieces.len())
            .map(|i| {
                let d = self.piece_derivative(i, q);
                let len = self.breaks[i + 1] - self.breaks[i];
                if !real_roots(&d, 0.0, len).is_empty() {
                    return 0.0;
                }
                let mut pts = vec![0.0, len];
                pts.extend(real_roots(&poly_deriv(&d), 0.0, len));
                pts.iter()
                    .map(|s| horner(&d, *s).abs())
                    .fold(f64::INFINITY, f64::min)
            })
            .fold(f64::INFINITY, f64::min)
    }

    /// Largest mismatch of derivatives `0..=q` across interior breaks.
    pub fn junction_defect(&self, q: usize) -> f64 {
        let mut worst = 0.0f64;
        for i in 1..self.pieces.len() {
            let len = self.breaks[i] - self.breaks[i - 1];
            for k in 0..=q {
                let left = horner(&self.piece_derivative(i - 1, k), len);
                let right = horner(&self.piece_derivative(i, k), 0.0);
                worst = worst.max((left - right).abs() / (1.0 + left.abs().max(right.abs())));
            }
        }
        worst
    }

    /// Lebesgue measure of `{|h| <= eps}`.
    pub fn sublevel_measure(&self, eps: f64) -> f64 {
        let mut total = 0.0;
        for (i, c) in self.pieces.iter().enumerate() {
            let len = self.breaks[i + 1] - self.breaks[i];
            let mut cuts = vec![0.0, len];
            for shift in [eps, -eps] {
                let mut shifted = c.clone();
                shifted[0] -= shift;
                cuts.extend(real_roots(&shifted, 0.0, len));
            }
            cuts.sort_by(f64::total_cmp);
            for w in cuts.windows(2) {
                if w[1] > w[0] && horner(c, 0.5 * (w[0] + w[1])).abs() <= eps {
                    total += w[1] - w[0];
                }
            }
        }
        total
    }
}

fn taylor_shift(coeffs: &[f64], a: f64) -> Vec<f64> {
    let mut c = coeffs.to_vec();
    let n = c.len();
    for i in 0..n {
        for j in (i..n.saturating_sub(1)).rev() {
            c[j] += a * c[j + 1];
        }
    }
    c
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SublevelRow {
    pub eps: f64,
    pub measure: f64,
    pub bound: f64,
    pub pass: bool,
}

/// Compare `m({|h| <= eps})` with `2^{q+1} (eps / rho)^{1/q}`.
pub fn sublevel_bound_check(
    h: &PiecewisePoly,
    q: usize,
    rho: f64,
    eps_ladder: &[f64],
) -> Result<Vec<SublevelRow>> {
    if q == 0 || !(rho > 0.0) {
        return Err(Error::Parameter("need q >= 1 and rho > 0".into()));
    }
    let defect = h.junction_defect(q);
    if defect > 1e-9 {
        return Err(Error::Precondition(format!(
            "not C^{q} across breaks (defect {defect:e})"
        )));
    }
    let min_d = h.min_abs_derivative(q);
    if min_d < rho * (1.0 - 1e-12) {
        return Err(Error::Precondition(format!(
            "min |h^({q})| = {min_d} < rho = {rho}"
        )));
    }
    Ok(eps_ladder
        .iter()
        .map(|&eps| {
            let measure = h.sublevel_measure(eps);
            let bound = 2f64.powi(q as i32 + 1) * (eps / rho).powf(1.0 / q as f64);
            SublevelRow {
                eps,
                measure,
                bound,
                pass: measure <= bound,
            }
        })
        .collect())
}

/// Lattice of jets at step `n` for the rate band `(lambda_minus, lambda_plus)`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct JetLatticeSpec {
    pub n: usize,
    pub lambda_minus: f64,
    pub lambda_plus: f64,
    pub r: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LatticeSteps {
    pub position: f64,
    pub angle: f64,
    /// Steps for `d^2, ..., d^{r-2}`.
    pub scalars: Vec<f64>,
}

impl JetLatticeSpec {
    pub fn new(n: usize, lambda_minus: f64, lambda_plus: f64, r: usize) -> Result<Self> {
        if !(lambda_minus > 0.0 && lambda_minus < lambda_plus) {
            return Err(Error::Parameter("need 0 < lambda- < lambda+".into()));
        }
        if r < 3 || n == 0 {
            return Err(Error::Parameter("need r >= 3 and n >= 1".into()));
        }
        Ok(JetLatticeSpec {
            n,
            lambda_minus,
            lambda_plus,
            r,
        })
    }

    pub fn steps(&self) -> LatticeSteps {
        let n = self.n as f64;
        let r = self.r as f64;
        let position = Lattice::new((-self.lambda_plus * (r - 2.0) * n).exp())
            .map(|l| l.spacing())
            .unwrap_or(1.0);
        LatticeSteps {
            position,
            angle: (-self.lambda_plus * (r - 3.0) * n).exp(),
            scalars: (2..=self.r - 2)
                .map(|q| {
                    ((-self.lambda_plus * (r - 3.0) + self.lambda_minus * (q as f64 - 1.0)) * n)
                        .exp()
                })
                .collect(),
        }
    }

    /// Growth rate of the lattice cardinality:
    /// `(r - 2)((r - 1) lambda+ - (r - 3) lambda- / 2)`.
    pub fn cardinality_exponent(&self) -> f64 {
        let r = self.r as f64;
        (r - 2.0) * ((r - 1.0) * self.lambda_plus - (r - 3.0) * self.lambda_minus / 2.0)
    }

    /// `log #Q` counted over positions, angles in `[-pi, pi)` and scalars in
    /// `[-bound, bound]`.
    pub fn log_cardinality(&self, scalar_bound: f64) -> f64 {
        let steps = self.steps();
        let per_axis = (1.0 / steps.position).round();
        let mut log = 2.0 * per_axis.ln();
        log += (2.0 * std::f64::consts::PI / steps.angle).ceil().ln();
        for s in &steps.scalars {
            log += (2.0 * (scalar_bound / s).floor() + 1.0).ln();
        }
        log
    }
}

/// Band admissibility `(r-2)(r-1 - (r-3)/2 * l-/l+) < (r-nu-2)(r-3 - (2s-r-nu+1)/(2 nu))`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct BandReport {
    pub lhs: f64,
    pub rhs: f64,
    pub holds: bool,
}

pub fn band_condition(
    r: usize,
    s: usize,
    nu: usize,
    lambda_minus: f64,
    lambda_plus: f64,
) -> BandReport {
    let (r, s, nu) = (r as f64, s as f64, nu as f64);
    let lhs = (r - 2.0) * (r - 1.0 - (r - 3.0) / 2.0 * lambda_minus / lambda_plus);
    let rhs = (r - nu - 2.0) * (r - 3.0 - (2.0 * s - r - nu + 1.0) / (2.0 * nu));
    BandReport {
        lhs,
        rhs,
        holds: lhs < rhs,
    }
}

fn round_to(v: f64, step: f64) -> f64 {
    (v / step).round() * step
}

/// Componentwise rounding to the nearest lattice jet; the tangent angle is
/// measured from `eu`.
pub fn q_lattice_round(
    j: &CurveJet,
    spec: &JetLatticeSpec,
    eu: &TangentVector,
) -> Result<CurveJet> {
    let steps = spec.steps();
    let point =
        Lattice::with_points_per_axis((1.0 / steps.position).round() as usize)?.nearest(&j.point);
    let eu = eu.normalized()?;
    let mut theta = round_to(signed_angle(&eu, &j.tangent), steps.angle);
    if theta.abs() > std::f64::consts::PI {
        theta -= steps.angle.copysign(theta);
    }
    let mut scalars = j.scalars.clone();
    for (v, s) in scalars.iter_mut().zip(&steps.scalars) {
        *v = round_to(*v, *s);
    }
    Ok(CurveJet {
        point,
        tangent: eu.rotated(theta),
        scalars,
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ContactGap {
    /// `+inf` when the critical set is empty.
    pub gap: f64,
    pub jets: usize,
    pub critical_samples: usize,
}

/// Minimal unoriented jet distance between `F^n` of the given jets and the
/// jets of the critical curves at their traced vertices.
pub fn jet_contact_gap(f: &dyn Endomorphism, jets: &[CurveJet], n: usize) -> Result<ContactGap> {
    let crit = f.critical_set();
    if crit.is_empty() {
        return Ok(ContactGap {
            gap: f64::INFINITY,
            jets: jets.len(),
            critical_samples: 0,
        });
    }
    let q = f.order().saturating_sub(2).max(1);
    let critical: Vec<CurveJet> = crit
        .points()
        .filter_map(|w| level_curve_jet(f, w, q).ok())
        .collect();
    let mut gap = f64::INFINITY;
    for j in jets {
        let mut img = j.clone();
        img.scalars.resize(q.saturating_sub(1), 0.0);
        for _ in 0..n {
            img = push_jet(f, &img)?;
        }
        for c in &critical {
            if torus_dist(&img.point, &c.point) >= gap {
                continue;
            }
            gap = gap.min(unoriented_jet_distance(&img, c)?);
        }
    }
    Ok(ContactGap {
        gap,
        jets: jets.len(),
        critical_samples: critical.len(),
    })
}
