//! Smooth self-maps of the torus with closed-form derivatives, reference
//! cone fields and the sampled partial-hyperbolicity checker.

use std::f64::consts::{FRAC_PI_4, PI};
use std::fmt::Debug;
use std::sync::OnceLock;

use serde::{Deserialize, Serialize};

use crate::critical::{trace_critical_set, CriticalSet};
use crate::error::{Error, Result};
use crate::fields::FourierField;
use crate::series::Taylor2;
use crate::torus::{line_angle, torus_dist, Lattice, Mat2, TangentVector, TorusPoint};

pub const NEWTON_TOL: f64 = 1e-12;
pub const NEWTON_MAX_ITER: usize = 50;
/// Determinant magnitude below which a point counts as critical.
pub const TOL_CRIT: f64 = 1e-9;
pub const DEFAULT_CRIT_RES: f64 = 1e-3;

/// A `C^r` self-map of the torus (or of a local chart of it).
pub trait Endomorphism: Send + Sync + Debug {
    fn name(&self) -> String;

    /// Differentiability order `r`.
    fn order(&self) -> usize;

    /// Highest order for which `taylor` succeeds.
    fn max_derivative_order(&self) -> usize {
        self.order()
    }

    fn eval(&self, z: &TorusPoint) -> TorusPoint;

    fn jacobian(&self, z: &TorusPoint) -> Mat2;

    /// Taylor polynomials of the two lifted components at `z`, in the
    /// increments `(dx, dy)`. The constant terms are a lift of `eval(z)`.
    fn taylor(&self, z: &TorusPoint, order: usize) -> Result<[Taylor2; 2]>;

    fn critical_set(&self) -> &CriticalSet;

    /// Integer linear part when preimages can be enumerated by Newton's
    /// method from linear seeds.
    fn linear_part(&self) -> Option<[[i64; 2]; 2]> {
        None
    }

    fn default_cones(&self) -> ConeField;

    /// False for models that only make sense in a chart around the origin.
    fn is_global(&self) -> bool {
        true
    }

    /// Coordinates of `z` in the model's chart.
    fn chart(&self, z: &TorusPoint) -> [f64; 2] {
        if self.is_global() {
            z.coords()
        } else {
            z.signed_coords()
        }
    }

    /// `D^q F_z (v_1, ..., v_q)` for a symmetric `q`-linear form.
    fn derivative(&self, z: &TorusPoint, dirs: &[TangentVector]) -> Result<TangentVector> {
        let q = dirs.len();
        if q == 0 {
            let p = self.eval(z);
            return Ok(TangentVector::new(p.x(), p.y()));
        }
        if q == 1 {
            return Ok(self.jacobian(z).apply(dirs[0]));
        }
        let t = self.taylor(z, q)?;
        let mut out = [0.0; 2];
        for mask in 0..(1usize << q) {
            let mut weight = 1.0;
            let mut nx = 0;
            for (i, v) in dirs.iter().enumerate() {
                if mask & (1 << i) == 0 {
                    weight *= v.vx;
                    nx += 1;
                } else {
                    weight *= v.vy;
                }
            }
            if weight == 0.0 {
                continue;
            }
            for (c, o) in t.iter().zip(out.iter_mut()) {
                *o += weight * c.partial(nx, q - nx);
            }
        }
        Ok(TangentVector::new(out[0], out[1]))
    }
}

/// `(D_*, D^*)`: expansion of `v` and the complementary area factor.
pub fn dstar_dupper(f: &dyn Endomorphism, z: &TorusPoint, v: &TangentVector) -> Result<(f64, f64)> {
    if v.is_zero() {
        return Err(Error::Domain("direction must be nonzero".into()));
    }
    let m = f.jacobian(z);
    let lower = m.apply(*v).norm() / v.norm();
    if lower == 0.0 {
        return Err(Error::DegenerateDirection);
    }
    Ok((lower, m.det() / lower))
}

/// Distance to the critical set, with the convention that it is 1 when the
/// set is empty.
pub fn critical_distance(f: &dyn Endomorphism, z: &TorusPoint) -> f64 {
    f.critical_set().distance(z)
}

/// Constant reference cone fields around two transversal directions.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ConeField {
    pub eu: TangentVector,
    pub ec: TangentVector,
    pub theta_u: f64,
    pub theta_c: f64,
}

impl ConeField {
    pub fn new(eu: TangentVector, ec: TangentVector, theta_u: f64, theta_c: f64) -> Result<Self> {
        for th in [theta_u, theta_c] {
            if !(th > 0.0 && th < FRAC_PI_4) {
                return Err(Error::Parameter(format!(
                    "cone half-angle {th} not in (0, pi/4)"
                )));
            }
        }
        Ok(ConeField {
            eu: eu.normalized()?,
            ec: ec.normalized()?,
            theta_u,
            theta_c,
        })
    }

    pub fn with_angles(&self, theta_u: f64, theta_c: f64) -> Result<Self> {
        ConeField::new(self.eu, self.ec, theta_u, theta_c)
    }

    pub fn in_unstable(&self, v: &TangentVector) -> bool {
        line_angle(v, &self.eu)
            .map(|a| a <= self.theta_u + 1e-12)
            .unwrap_or(false)
    }

    pub fn in_central(&self, v: &TangentVector) -> bool {
        line_angle(v, &self.ec)
            .map(|a| a <= self.theta_c + 1e-12)
            .unwrap_or(false)
    }

    fn sample(axis: TangentVector, theta: f64, count: usize) -> Vec<TangentVector> {
        if count <= 1 {
            return vec![axis];
        }
        (0..count)
            .map(|j| axis.rotated(theta * (2.0 * j as f64 / (count - 1) as f64 - 1.0)))
            .collect()
    }

    /// Equispaced unit directions across the unstable cone, boundaries included.
    pub fn unstable_samples(&self, count: usize) -> Vec<TangentVector> {
        Self::sample(self.eu, self.theta_u, count)
    }

    pub fn central_samples(&self, count: usize) -> Vec<TangentVector> {
        Self::sample(self.ec, self.theta_c, count)
    }
}

fn cones_for_matrix(m: &Mat2, theta: f64) -> ConeField {
    let (eu, ec) = match m.real_eigen() {
        Some([(l1, v1), (l2, v2)]) if (l1.abs() - l2.abs()).abs() > 1e-12 => (v1, v2),
        _ => (TangentVector::new(1.0, 0.0), TangentVector::new(0.0, 1.0)),
    };
    ConeField::new(eu, ec, theta, theta).expect("valid default cone")
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct HyperbolicityBudget {
    pub lambda: f64,
    pub c: f64,
    pub big_lambda: f64,
    pub rho: f64,
    pub n_g: usize,
}

impl HyperbolicityBudget {
    pub fn new(lambda: f64, c: f64, big_lambda: f64, rho: f64, n_g: usize) -> Result<Self> {
        if !(lambda > 0.0) {
            return Err(Error::Parameter("expansion rate must be positive".into()));
        }
        if !(big_lambda > c && c > 0.0) {
            return Err(Error::Parameter("need norm bound > slack > 0".into()));
        }
        if !(n_g as f64 * lambda - c > 0.0) {
            return Err(Error::Parameter(
                "iterate threshold too small for the slack".into(),
            ));
        }
        Ok(HyperbolicityBudget {
            lambda,
            c,
            big_lambda,
            rho,
            n_g,
        })
    }
}

/// Worst margins of the sampled cone and growth conditions. A positive
/// margin means the condition held at every sample.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ConditionReport {
    pub disjoint_cones: f64,
    pub forward_invariance: f64,
    pub backward_invariance: f64,
    pub expansion: f64,
    pub area_domination: f64,
    pub norm_bound: f64,
    pub backward_skipped: usize,
    pub samples: usize,
    pub pass: bool,
}

pub fn check_hyperbolicity(
    f: &dyn Endomorphism,
    cones: &ConeField,
    budget: &HyperbolicityBudget,
    n_max: usize,
    grid: &Lattice,
    directions_per_cone: usize,
) -> Result<ConditionReport> {
    if directions_per_cone < 3 {
        return Err(Error::Parameter(
            "need at least 3 directions per cone".into(),
        ));
    }
    let disjoint = line_angle(&cones.eu, &cones.ec)? - cones.theta_u - cones.theta_c;
    let mut fwd = f64::INFINITY;
    let mut bwd = f64::INFINITY;
    let mut expansion = f64::INFINITY;
    let mut area = f64::INFINITY;
    let mut norm_bound = f64::INFINITY;
    let mut skipped = 0;
    let mut samples = 0;
    let us = cones.unstable_samples(directions_per_cone);
    let cs = cones.central_samples(directions_per_cone);
    for z in grid.points() {
        samples += 1;
        let m = f.jacobian(&z);
        norm_bound = norm_bound.min(budget.big_lambda - m.norm());
        for v in &us {
            let w = m.apply(*v);
            let a = if w.is_zero() {
                PI
            } else {
                line_angle(&w, &cones.eu)?
            };
            fwd = fwd.min(cones.theta_u - a);
        }
        match m.inverse() {
            Some(inv) if m.det().abs() > TOL_CRIT => {
                for v in &cs {
                    let a = line_angle(&inv.apply(*v), &cones.ec)?;
                    bwd = bwd.min(cones.theta_c - a);
                }
            }
            _ => skipped += 1,
        }
        for v in &us {
            let mut p = z;
            let mut w = *v;
            let mut log_norm = 0.0;
            let mut log_det = 0.0;
            for n in 1..=n_max {
                let j = f.jacobian(&p);
                w = j.apply(w);
                let nw = w.norm();
                log_norm += nw.ln();
                log_det += j.det().abs().ln();
                if nw > 0.0 {
                    w = w * (1.0 / nw);
                }
                p = f.eval(&p);
                let target = budget.lambda * n as f64 - budget.c;
                expansion = expansion.min(log_norm - target);
                let log_upper = log_det - log_norm;
                area = area.min(log_norm - target - log_upper);
                if nw == 0.0 {
                    break;
                }
            }
        }
    }
    let pass = [disjoint, fwd, bwd, expansion, area, norm_bound]
        .iter()
        .all(|m| *m > 0.0);
    Ok(ConditionReport {
        disjoint_cones: disjoint,
        forward_invariance: fwd,
        backward_invariance: bwd,
        expansion,
        area_domination: area,
        norm_bound,
        backward_skipped: skipped,
        samples,
        pass,
    })
}

/// Lattice `Z^2 / A Z^2` coset representatives.
pub fn coset_representatives(a: [[i64; 2]; 2]) -> Vec<[i64; 2]> {
    let det = a[0][0] * a[1][1] - a[0][1] * a[1][0];
    if det == 0 {
        return Vec::new();
    }
    let adj = [[a[1][1], -a[0][1]], [-a[1][0], a[0][0]]];
    let corners = [
        [0, 0],
        [a[0][0], a[1][0]],
        [a[0][1], a[1][1]],
        [a[0][0] + a[0][1], a[1][0] + a[1][1]],
    ];
    let xmin = corners.iter().map(|c| c[0]).min().unwrap();
    let xmax = corners.iter().map(|c| c[0]).max().unwrap();
    let ymin = corners.iter().map(|c| c[1]).min().unwrap();
    let ymax = corners.iter().map(|c| c[1]).max().unwrap();
    let inside = |u: i64| {
        if det > 0 {
            0 <= u && u < det
        } else {
            det < u && u <= 0
        }
    };
    let mut out = Vec::new();
    for kx in xmin..=xmax {
        for ky in ymin..=ymax {
            let u0 = adj[0][0] * kx + adj[0][1] * ky;
            let u1 = adj[1][0] * kx + adj[1][1] * ky;
            if inside(u0) && inside(u1) {
                out.push([kx, ky]);
            }
        }
    }
    out
}

/// All points `w` with `F^n(w) = z`, found by Newton iteration from the
/// preimages under the linear part.
pub fn preimages(f: &dyn Endomorphism, z: &TorusPoint, n: usize) -> Result<Vec<TorusPoint>> {
    let a = f.linear_part().ok_or_else(|| {
        Error::UnsupportedModel(format!("{} has no branch enumeration", f.name()))
    })?;
    if n == 0 {
        return Ok(vec![*z]);
    }
    let am = Mat2::new(
        a[0][0] as f64,
        a[0][1] as f64,
        a[1][0] as f64,
        a[1][1] as f64,
    );
    let ainv = am
        .inverse()
        .ok_or_else(|| Error::UnsupportedModel("singular linear part".into()))?;
    let reps = coset_representatives(a);
    let mut level: Vec<(TorusPoint, String)> = vec![(*z, String::new())];
    for _ in 0..n {
        let mut next = Vec::with_capacity(level.len() * reps.len());
        for (target, word) in &level {
            for (bi, k) in reps.iter().enumerate() {
                let seed = ainv.apply(TangentVector::new(
                    target.x() + k[0] as f64,
                    target.y() + k[1] as f64,
                ));
                let word = if word.is_empty() {
                    bi.to_string()
                } else {
                    format!("{word}.{bi}")
                };
                let w = newton_preimage(f, target, TorusPoint::new(seed.vx, seed.vy))
                    .ok_or_else(|| Error::BranchFailure { word: word.clone() })?;
                next.push((w, word));
            }
        }
        level = next;
    }
    Ok(level.into_iter().map(|(p, _)| p).collect())
}

fn newton_preimage(
    f: &dyn Endomorphism,
    target: &TorusPoint,
    seed: TorusPoint,
) -> Option<TorusPoint> {
    let mut w = seed;
    for _ in 0..NEWTON_MAX_ITER {
        let r = f.eval(&w).displacement_to(target);
        if r.norm() < NEWTON_TOL {
            return Some(w);
        }
        let step = f.jacobian(&w).inverse()?.apply(r);
        w = w.exp(step);
    }
    let r = f.eval(&w).displacement_to(target).norm();
    (r < NEWTON_TOL * 10.0).then_some(w)
}

/// `z -> A z mod Z^2` for an integer matrix.
#[derive(Debug, Clone)]
pub struct LinearMap {
    m: [[i64; 2]; 2],
    r: usize,
    empty: CriticalSet,
}

impl LinearMap {
    pub fn new(m: [[i64; 2]; 2]) -> Self {
        LinearMap {
            m,
            r: 5,
            empty: CriticalSet::empty(),
        }
    }

    pub fn with_order(mut self, r: usize) -> Self {
        self.r = r;
        self
    }

    pub fn cat() -> Self {
        LinearMap::new([[2, 1], [1, 1]])
    }

    pub fn identity() -> Self {
        LinearMap::new([[1, 0], [0, 1]])
    }

    pub fn matrix(&self) -> Mat2 {
        let m = self.m;
        Mat2::new(
            m[0][0] as f64,
            m[0][1] as f64,
            m[1][0] as f64,
            m[1][1] as f64,
        )
    }

    pub fn entries(&self) -> [[i64; 2]; 2] {
        self.m
    }
}

impl Endomorphism for LinearMap {
    fn name(&self) -> String {
        let m = self.m;
        format!(
            "linear[[{},{}],[{},{}]]",
            m[0][0], m[0][1], m[1][0], m[1][1]
        )
    }

    fn order(&self) -> usize {
        self.r
    }

    fn max_derivative_order(&self) -> usize {
        usize::MAX
    }

    fn eval(&self, z: &TorusPoint) -> TorusPoint {
        let v = self.matrix().apply(TangentVector::new(z.x(), z.y()));
        TorusPoint::new(v.vx, v.vy)
    }

    fn jacobian(&self, _z: &TorusPoint) -> Mat2 {
        self.matrix()
    }

    fn taylor(&self, z: &TorusPoint, order: usize) -> Result<[Taylor2; 2]> {
        let m = self.matrix();
        let mut a = Taylor2::zero(order);
        let mut b = Taylor2::zero(order);
        a.set(0, 0, m.a * z.x() + m.b * z.y());
        b.set(0, 0, m.c * z.x() + m.d * z.y());
        a.set(1, 0, m.a);
        a.set(0, 1, m.b);
        b.set(1, 0, m.c);
        b.set(0, 1, m.d);
        Ok([a, b])
    }

    fn critical_set(&self) -> &CriticalSet {
        &self.empty
    }

    fn linear_part(&self) -> Option<[[i64; 2]; 2]> {
        (self.matrix().det() != 0.0).then_some(self.m)
    }

    fn default_cones(&self) -> ConeField {
        cones_for_matrix(&self.matrix(), 0.1)
    }
}

/// `z -> A z + eps * Phi(z) mod Z^2` with `Phi` a pair of Fourier fields.
#[derive(Debug)]
pub struct PerturbedLinear {
    base: LinearMap,
    eps: f64,
    field: [FourierField; 2],
    r: usize,
    crit: OnceLock<CriticalSet>,
}

impl PerturbedLinear {
    pub fn new(base: LinearMap, eps: f64, field: [FourierField; 2], r: usize) -> Result<Self> {
        let s = field[0].smoothness().min(field[1].smoothness()) as usize;
        if s < r + 2 {
            return Err(Error::Smoothness {
                requested: r + 2,
                max: s,
            });
        }
        Ok(PerturbedLinear {
            base,
            eps,
            field,
            r,
            crit: OnceLock::new(),
        })
    }

    pub fn amplitude(&self) -> f64 {
        self.eps
    }

    pub fn base(&self) -> &LinearMap {
        &self.base
    }

    pub fn field(&self) -> &[FourierField; 2] {
        &self.field
    }
}

impl Endomorphism for PerturbedLinear {
    fn name(&self) -> String {
        format!("perturbed-{}", self.base.name())
    }

    fn order(&self) -> usize {
        self.r
    }

    fn max_derivative_order(&self) -> usize {
        self.field[0]
            .max_derivative()
            .min(self.field[1].max_derivative())
    }

    fn eval(&self, z: &TorusPoint) -> TorusPoint {
        let v = self.base.matrix().apply(TangentVector::new(z.x(), z.y()));
        if self.eps == 0.0 {
            return TorusPoint::new(v.vx, v.vy);
        }
        TorusPoint::new(
            v.vx + self.eps * self.field[0].eval(z),
            v.vy + self.eps * self.field[1].eval(z),
        )
    }

    fn jacobian(&self, z: &TorusPoint) -> Mat2 {
        let m = self.base.matrix();
        if self.eps == 0.0 {
            return m;
        }
        let fx = self.field[0].taylor_unchecked(z, 1);
        let fy = self.field[1].taylor_unchecked(z, 1);
        Mat2::new(
            m.a + self.eps * fx.coeff(1, 0),
            m.b + self.eps * fx.coeff(0, 1),
            m.c + self.eps * fy.coeff(1, 0),
            m.d + self.eps * fy.coeff(0, 1),
        )
    }

    fn taylor(&self, z: &TorusPoint, order: usize) -> Result<[Taylor2; 2]> {
        let [a, b] = self.base.taylor(z, order)?;
        if self.eps == 0.0 {
            return Ok([a, b]);
        }
        let pa = self.field[0].taylor(z, order)?;
        let pb = self.field[1].taylor(z, order)?;
        Ok([&a + &pa.scale(self.eps), &b + &pb.scale(self.eps)])
    }

    fn critical_set(&self) -> &CriticalSet {
        self.crit.get_or_init(|| {
            if self.eps == 0.0 {
                CriticalSet::empty()
            } else {
                trace_critical_set(self, DEFAULT_CRIT_RES)
            }
        })
    }

    fn linear_part(&self) -> Option<[[i64; 2]; 2]> {
        self.base.linear_part()
    }

    fn default_cones(&self) -> ConeField {
        self.base.default_cones()
    }
}

/// `(x, y) -> (d x mod 1, a0 + eps sin(2 pi x) - y^2)` with `y` read in
/// `[-1/2, 1/2)`. The critical set is the circle `{y = 0}`.
#[derive(Debug, Clone)]
pub struct VianaMap {
    d: u32,
    a0: f64,
    eps: f64,
    r: usize,
    crit: CriticalSet,
}

impl VianaMap {
    pub fn new(d: u32, a0: f64, eps: f64) -> Result<Self> {
        Self::with_resolution(d, a0, eps, DEFAULT_CRIT_RES)
    }

    pub fn with_resolution(d: u32, a0: f64, eps: f64, crit_res: f64) -> Result<Self> {
        if d < 2 {
            return Err(Error::Parameter("base degree must be at least 2".into()));
        }
        if !(crit_res > 0.0 && crit_res < 0.5) {
            return Err(Error::Parameter(
                "critical resolution must lie in (0, 1/2)".into(),
            ));
        }
        let n = (1.0 / crit_res).ceil() as usize;
        let line: Vec<TorusPoint> = (0..n)
            .map(|i| TorusPoint::new(i as f64 / n as f64, 0.0))
            .collect();
        Ok(VianaMap {
            d,
            a0,
            eps,
            r: 5,
            crit: CriticalSet::from_polylines(vec![(line, true)], crit_res),
        })
    }

    pub fn with_order(mut self, r: usize) -> Self {
        self.r = r;
        self
    }

    pub fn degree(&self) -> u32 {
        self.d
    }
}

impl Endomorphism for VianaMap {
    fn name(&self) -> String {
        format!("viana(d={},a0={},eps={})", self.d, self.a0, self.eps)
    }

    fn order(&self) -> usize {
        self.r
    }

    fn max_derivative_order(&self) -> usize {
        usize::MAX
    }

    fn eval(&self, z: &TorusPoint) -> TorusPoint {
        let [x, y] = self.chart(z);
        TorusPoint::new(
            self.d as f64 * x,
            self.a0 + self.eps * (2.0 * PI * x).sin() - y * y,
        )
    }

    fn chart(&self, z: &TorusPoint) -> [f64; 2] {
        [z.x(), z.signed_coords()[1]]
    }

    fn jacobian(&self, z: &TorusPoint) -> Mat2 {
        let [x, y] = self.chart(z);
        Mat2::new(
            self.d as f64,
            0.0,
            2.0 * PI * self.eps * (2.0 * PI * x).cos(),
            -2.0 * y,
        )
    }

    fn taylor(&self, z: &TorusPoint, order: usize) -> Result<[Taylor2; 2]> {
        let [x, y] = self.chart(z);
        let mut a = Taylor2::zero(order);
        a.set(0, 0, self.d as f64 * x);
        a.set(1, 0, self.d as f64);
        let w = 2.0 * PI;
        let b = Taylor2::from_partials(order, |i, j| match (i, j) {
            (0, 0) => self.a0 + self.eps * (w * x).sin() - y * y,
            (i, 0) => self.eps * w.powi(i as i32) * (w * x + i as f64 * PI / 2.0).sin(),
            (0, 1) => -2.0 * y,
            (0, 2) => -2.0,
            _ => 0.0,
        });
        Ok([a, b])
    }

    fn critical_set(&self) -> &CriticalSet {
        &self.crit
    }

    fn default_cones(&self) -> ConeField {
        ConeField::new(
            TangentVector::new(1.0, 0.0),
            TangentVector::new(0.0, 1.0),
            0.3,
            0.3,
        )
        .expect("valid cones")
    }
}

/// Polynomial map in a chart around the origin, `sum c x^i y^j` per component.
#[derive(Debug)]
pub struct PolynomialMap {
    label: String,
    comps: [Vec<(f64, u32, u32)>; 2],
    cones: ConeField,
    r: usize,
    crit: OnceLock<CriticalSet>,
}

impl PolynomialMap {
    pub fn new(label: &str, comps: [Vec<(f64, u32, u32)>; 2], cones: ConeField) -> Self {
        PolynomialMap {
            label: label.to_string(),
            comps,
            cones,
            r: 5,
            crit: OnceLock::new(),
        }
    }

    /// `(x, y) -> (2x, y/2 + x^2)`.
    pub fn fold() -> Self {
        PolynomialMap::new(
            "fold",
            [vec![(2.0, 1, 0)], vec![(0.5, 0, 1), (1.0, 2, 0)]],
            ConeField::new(
                TangentVector::new(1.0, 0.0),
                TangentVector::new(0.0, 1.0),
                0.3,
                0.3,
            )
            .expect("valid cones"),
        )
    }

    /// `(x, y) -> (x, x^2 y + y^2)`, whose Jacobian determinant is `x^2 + 2y`.
    pub fn bowl() -> Self {
        PolynomialMap::new(
            "bowl",
            [vec![(1.0, 1, 0)], vec![(1.0, 2, 1), (1.0, 0, 2)]],
            ConeField::new(
                TangentVector::new(1.0, 0.0),
                TangentVector::new(0.0, 1.0),
                0.3,
                0.3,
            )
            .expect("valid cones"),
        )
    }

    fn partial(terms: &[(f64, u32, u32)], x: f64, y: f64, a: usize, b: usize) -> f64 {
        let falling = |n: u32, k: usize| -> f64 { (0..k).map(|i| (n as f64) - i as f64).product() };
        terms
            .iter()
            .filter(|(_, i, j)| *i as usize >= a && *j as usize >= b)
            .map(|&(c, i, j)| {
                c * falling(i, a)
                    * falling(j, b)
                    * x.powi(i as i32 - a as i32)
                    * y.powi(j as i32 - b as i32)
            })
            .sum()
    }
}

impl Endomorphism for PolynomialMap {
    fn name(&self) -> String {
        format!("polynomial-{}", self.label)
    }

    fn order(&self) -> usize {
        self.r
    }

    fn max_derivative_order(&self) -> usize {
        usize::MAX
    }

    fn is_global(&self) -> bool {
        false
    }

    fn eval(&self, z: &TorusPoint) -> TorusPoint {
        let [x, y] = self.chart(z);
        TorusPoint::new(
            Self::partial(&self.comps[0], x, y, 0, 0),
            Self::partial(&self.comps[1], x, y, 0, 0),
        )
    }

    fn jacobian(&self, z: &TorusPoint) -> Mat2 {
        let [x, y] = self.chart(z);
        let p = |k: usize, a, b| Self::partial(&self.comps[k], x, y, a, b);
        Mat2::new(p(0, 1, 0), p(0, 0, 1), p(1, 1, 0), p(1, 0, 1))
    }

    fn taylor(&self, z: &TorusPoint, order: usize) -> Result<[Taylor2; 2]> {
        let [x, y] = self.chart(z);
        Ok([0, 1].map(|k| {
            Taylor2::from_partials(order, |a, b| Self::partial(&self.comps[k], x, y, a, b))
        }))
    }

    fn critical_set(&self) -> &CriticalSet {
        self.crit
            .get_or_init(|| trace_critical_set(self, DEFAULT_CRIT_RES))
    }

    fn default_cones(&self) -> ConeField {
        self.cones.clone()
    }
}

/// Minimal pairwise torus distance of a point set (diagnostic for preimages).
pub fn min_pairwise_distance(points: &[TorusPoint]) -> f64 {
    let mut best = f64::INFINITY;
    for (i, p) in points.iter().enumerate() {
        for q in &points[i + 1..] {
            best = best.min(torus_dist(p, q));
        }
    }
    best
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn dstar_examples() {
        let cat = LinearMap::cat();
        let z = TorusPoint::new(0.3, 0.4);
        let (lo, up) = dstar_dupper(&cat, &z, &TangentVector::new(1.0, 0.0)).unwrap();
        assert!((lo - 5f64.sqrt()).abs() < 1e-14);
        assert!((up - 1.0 / 5f64.sqrt()).abs() < 1e-14);
        let id = LinearMap::identity();
        let v = TangentVector::from_angle(0.7);
        assert_eq!(dstar_dupper(&id, &z, &v).unwrap(), (1.0, 1.0));
        let tri = LinearMap::new([[3, 0], [1, 2]]);
        let s = 0.5f64.sqrt();
        let (lo, up) = dstar_dupper(&tri, &z, &TangentVector::new(s, s)).unwrap();
        assert!((lo - 3.0).abs() < 1e-14 && (up - 2.0).abs() < 1e-14);
        let fold = PolynomialMap::bowl();
        let origin = TorusPoint::new(0.0, 0.0);
        assert_eq!(
            dstar_dupper(&fold, &origin, &TangentVector::new(0.0, 1.0)),
            Err(Error::DegenerateDirection)
        );
    }

    #[test]
    fn coset_counts() {
        assert_eq!(coset_representatives([[3, 0], [1, 2]]).len(), 6);
        assert_eq!(coset_representatives([[2, 1], [1, 1]]).len(), 1);
        assert_eq!(coset_representatives([[2, 1], [1, 3]]).len(), 5);
        assert_eq!(coset_representatives([[0, 1], [-3, 0]]).len(), 3);
    }

    #[test]
    fn preimage_examples() {
        let tri = LinearMap::new([[3, 0], [1, 2]]);
        let o = TorusPoint::new(0.0, 0.0);
        let pre = preimages(&tri, &o, 1).unwrap();
        assert_eq!(pre.len(), 6);
        for p in &pre {
            assert!(torus_dist(&tri.eval(p), &o) < 1e-12);
        }
        assert!(min_pairwise_distance(&pre) > 1e-8);
        assert_eq!(preimages(&LinearMap::cat(), &o, 2).unwrap().len(), 1);
        assert!(matches!(
            preimages(&PolynomialMap::fold(), &o, 1),
            Err(Error::UnsupportedModel(_))
        ));
    }

    #[test]
    fn hyperbolicity_examples() {
        let cat = LinearMap::cat();
        let cones = cat.default_cones();
        let grid = Lattice::new(0.3).unwrap();
        let ok = HyperbolicityBudget::new(0.9, 0.05, 3.0, 0.1, 1).unwrap();
        let rep = check_hyperbolicity(&cat, &cones, &ok, 10, &grid, 5).unwrap();
        assert!(rep.pass, "{rep:?}");
        let bad = HyperbolicityBudget::new(2.0, 0.05, 3.0, 0.1, 1).unwrap();
        let rep = check_hyperbolicity(&cat, &cones, &bad, 10, &grid, 5).unwrap();
        assert!(!rep.pass && rep.expansion < 0.0);
        let id = LinearMap::identity();
        let rep = check_hyperbolicity(&id, &id.default_cones(), &ok, 5, &grid, 3).unwrap();
        assert!(rep.expansion < 0.0);
    }

    #[test]
    fn viana_taylor_matches_jacobian() {
        let v = VianaMap::new(3, 0.1, 0.05).unwrap();
        let z = TorusPoint::new(0.21, 0.13);
        let [a, b] = v.taylor(&z, 3).unwrap();
        let j = v.jacobian(&z);
        assert_eq!(a.partial(1, 0), j.a);
        assert!((b.partial(1, 0) - j.c).abs() < 1e-14);
        assert!((b.partial(0, 1) - j.d).abs() < 1e-14);
        assert!((critical_distance(&v, &TorusPoint::new(0.4, 0.25)) - 0.25).abs() < 1e-12);
    }
}
