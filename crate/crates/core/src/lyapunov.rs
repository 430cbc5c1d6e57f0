//! Central directions, Lyapunov exponents, Pesin-block membership and the
//! multiplicity of tangencies among preimages.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::measures::AtomicMeasure;
use crate::models::{critical_distance, preimages, ConeField, Endomorphism, TOL_CRIT};
use crate::torus::{angle, line_angle, Mat2, TangentVector, TorusPoint};

pub const EC_TOL: f64 = 1e-8;
pub const EC_MAX_ITER: usize = 200;
/// Minimal `log(s_max / s_min)` of `DF^n` accepted as evidence of domination.
pub const DOMINATION_GAP: f64 = 1.0;
pub const DEFAULT_CONE_DIRECTIONS: usize = 9;
/// Atoms closer than this to the critical set are dropped from measure averages.
pub const CRIT_EXCLUSION: f64 = 1e-6;

fn orbit(f: &dyn Endomorphism, z: &TorusPoint, n: usize) -> Result<(Vec<TorusPoint>, Vec<Mat2>)> {
    let mut pts = Vec::with_capacity(n + 1);
    let mut jac = Vec::with_capacity(n);
    let mut p = *z;
    for step in 0..n {
        let j = f.jacobian(&p);
        if j.det().abs() < TOL_CRIT {
            return Err(Error::NearCritical { step });
        }
        pts.push(p);
        jac.push(j);
        p = f.eval(&p);
    }
    pts.push(p);
    Ok((pts, jac))
}

fn pull_back(jac: &[Mat2], w: TangentVector) -> TangentVector {
    jac.iter().rev().fold(w, |v, j| {
        let u = j.inverse().expect("noncritical orbit").apply(v);
        u * (1.0 / u.norm())
    })
}

/// Approximate `E^c(z)` by pulling back the reference central direction
/// along `n` or more forward steps, until successive approximations agree
/// and the derivative cocycle shows a dominated gap.
pub fn central_direction(f: &dyn Endomorphism, z: &TorusPoint, n: usize) -> Result<TangentVector> {
    central_direction_from(f, z, n, f.default_cones().ec)
}

pub fn central_direction_from(
    f: &dyn Endomorphism,
    z: &TorusPoint,
    n: usize,
    reference: TangentVector,
) -> Result<TangentVector> {
    let reference = reference.normalized()?;
    let max_iter = n.max(EC_MAX_ITER);
    let (_, jac) = orbit(f, z, max_iter)?;
    let mut prev = reference;
    let mut product = Mat2::IDENTITY;
    let mut last_angle = f64::INFINITY;
    for m in 1..=max_iter {
        product = jac[m - 1].mul(&product);
        let scale = product.frobenius();
        product = product.scale(1.0 / scale);
        let (smax, smin) = product.singular_values();
        let gap = if smin > 0.0 {
            (smax / smin).ln()
        } else {
            f64::INFINITY
        };
        let e = pull_back(&jac[..m], reference);
        last_angle = line_angle(&e, &prev)?;
        prev = e;
        if m >= n.max(1) && last_angle <= EC_TOL && gap >= DOMINATION_GAP {
            return Ok(e);
        }
    }
    Err(Error::NoDomination(format!(
        "central direction not settled after {max_iter} steps (last change {last_angle:e})"
    )))
}

fn dominated_along(jac: &[Mat2]) -> bool {
    let mut product = Mat2::IDENTITY;
    for j in jac {
        product = j.mul(&product);
        product = product.scale(1.0 / product.frobenius());
        let (smax, smin) = product.singular_values();
        if smin == 0.0 || (smax / smin).ln() >= DOMINATION_GAP {
            return true;
        }
    }
    false
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PointwiseExponents {
    pub central: f64,
    pub unstable: f64,
    /// `(1/n) log |det DF^n_z|`.
    pub volume: f64,
    pub dominated: bool,
}

/// Finite-time central and unstable exponents along the orbit of `z`.
pub fn pointwise_exponents(
    f: &dyn Endomorphism,
    z: &TorusPoint,
    n: usize,
) -> Result<PointwiseExponents> {
    if n == 0 {
        return Err(Error::Parameter("orbit length must be positive".into()));
    }
    let look_ahead = EC_MAX_ITER;
    let (_, jac) = orbit(f, z, n + look_ahead)?;
    let mut w = f.default_cones().ec.normalized()?;
    let mut central = vec![TangentVector::default(); n];
    for i in (0..n + look_ahead).rev() {
        let u = jac[i].inverse().expect("noncritical orbit").apply(w);
        w = u * (1.0 / u.norm());
        if i < n {
            central[i] = w;
        }
    }
    let mut sum_c = 0.0;
    let mut sum_u = 0.0;
    let mut sum_det = 0.0;
    for (j, e) in jac.iter().zip(&central) {
        let lc = j.apply(*e).norm().ln();
        let ld = j.det().abs().ln();
        sum_c += lc;
        sum_u += ld - lc;
        sum_det += ld;
    }
    let nf = n as f64;
    Ok(PointwiseExponents {
        central: sum_c / nf,
        unstable: sum_u / nf,
        volume: sum_det / nf,
        dominated: dominated_along(&jac[..look_ahead.min(jac.len())]),
    })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MeasureExponents {
    pub central: f64,
    pub unstable: f64,
    pub excluded_atoms: usize,
    pub excluded_mass: f64,
}

/// Mass-weighted one-step exponents. Atoms near the critical set are
/// dropped and the remaining mass renormalised.
pub fn measure_exponents(f: &dyn Endomorphism, mu: &AtomicMeasure) -> Result<MeasureExponents> {
    let mut sum_c = 0.0;
    let mut sum_u = 0.0;
    let mut kept = 0.0;
    let mut excluded_atoms = 0;
    let mut excluded_mass = 0.0;
    let reference = f.default_cones().ec;
    for (z, w) in mu.atoms() {
        let j = f.jacobian(z);
        if j.det().abs() < TOL_CRIT || critical_distance(f, z) < CRIT_EXCLUSION {
            excluded_atoms += 1;
            excluded_mass += w;
            continue;
        }
        let e = match central_direction_from(f, z, 1, reference) {
            Ok(e) => e,
            Err(Error::NoDomination(_)) => {
                let (_, jac) = orbit(f, z, EC_MAX_ITER)?;
                pull_back(&jac, reference)
            }
            Err(Error::NearCritical { .. }) => {
                excluded_atoms += 1;
                excluded_mass += w;
                continue;
            }
            Err(e) => return Err(e),
        };
        let lc = j.apply(e).norm().ln();
        sum_c += w * lc;
        sum_u += w * (j.det().abs().ln() - lc);
        kept += w;
    }
    if kept <= 0.0 {
        return Err(Error::Parameter(
            "no atoms left away from the critical set".into(),
        ));
    }
    Ok(MeasureExponents {
        central: sum_c / kept,
        unstable: sum_u / kept,
        excluded_atoms,
        excluded_mass,
    })
}

/// `log min_{v in S^u(z)} |D^*F(z, v)|`; `-inf` at critical points.
pub fn l_function(
    f: &dyn Endomorphism,
    z: &TorusPoint,
    cones: &ConeField,
    directions: usize,
) -> f64 {
    let j = f.jacobian(z);
    if j.det().abs() < TOL_CRIT {
        return f64::NEG_INFINITY;
    }
    cones
        .unstable_samples(directions)
        .iter()
        .map(|v| {
            let lower = j.apply(*v).norm();
            (j.det() / lower).abs().ln()
        })
        .fold(f64::INFINITY, f64::min)
}

/// Exponent bands `chi_c^- < chi_c^+ < chi_u^- < chi_u^+`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ExponentQuadruple {
    pub c_minus: f64,
    pub c_plus: f64,
    pub u_minus: f64,
    pub u_plus: f64,
}

impl ExponentQuadruple {
    pub fn new(c_minus: f64, c_plus: f64, u_minus: f64, u_plus: f64) -> Result<Self> {
        if !(c_minus < c_plus && c_plus < u_minus && u_minus < u_plus) {
            return Err(Error::Parameter(format!(
                "exponent bands must increase: {c_minus} < {c_plus} < {u_minus} < {u_plus}"
            )));
        }
        Ok(ExponentQuadruple {
            c_minus,
            c_plus,
            u_minus,
            u_plus,
        })
    }

    pub fn central_width(&self) -> f64 {
        self.c_plus - self.c_minus
    }

    pub fn unstable_width(&self) -> f64 {
        self.u_plus - self.u_minus
    }

    /// `chi_c^- + chi_u^- > 0` and `chi_c^- < 0`.
    pub fn volume_expanding_contracting_center(&self) -> bool {
        self.c_minus + self.u_minus > 0.0 && self.c_minus < 0.0
    }

    /// `chi_c^- + chi_u^- - (chi_c^+ - chi_c^-) - (chi_u^+ - chi_u^-)`.
    pub fn defect_margin(&self) -> f64 {
        self.c_minus + self.u_minus - self.central_width() - self.unstable_width()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PesinParams {
    pub chi: ExponentQuadruple,
    pub eps: f64,
    pub k: f64,
    pub n: usize,
}

impl PesinParams {
    pub fn new(chi: ExponentQuadruple, eps: f64, k: f64, n: usize) -> Result<Self> {
        if !(eps > 0.0 && k > 0.0) {
            return Err(Error::Parameter("slack parameters must be positive".into()));
        }
        Ok(PesinParams { chi, eps, k, n })
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PesinReport {
    pub member: bool,
    pub worst_margin: f64,
    pub central_lower: f64,
    pub central_upper: f64,
    pub unstable_lower: f64,
    pub unstable_upper: f64,
    pub directions: usize,
}

/// Membership of `z` in the block `Lambda(chi, eps, k, n; F)`, with the
/// extremes over the unstable cone approximated by sampled directions.
pub fn pesin_membership(
    f: &dyn Endomorphism,
    z: &TorusPoint,
    p: &PesinParams,
    cones: &ConeField,
    directions: usize,
) -> PesinReport {
    let n = p.n;
    let mut margins = [f64::INFINITY; 4];
    let mut pts = Vec::with_capacity(n + 1);
    let mut q = *z;
    for _ in 0..n {
        pts.push(q);
        q = f.eval(&q);
    }
    let jac: Vec<Mat2> = pts.iter().map(|p| f.jacobian(p)).collect();
    let dirs = cones.unstable_samples(directions);
    for i in 0..n {
        for v in &dirs {
            let mut w = *v;
            let mut log_lower = 0.0;
            let mut log_det = 0.0;
            for j in (i + 1)..=n {
                let m = &jac[j - 1];
                w = m.apply(w);
                let nw = w.norm();
                log_lower += nw.ln();
                log_det += m.det().abs().ln();
                if nw > 0.0 {
                    w = w * (1.0 / nw);
                }
                let len = (j - i) as f64;
                let slack = p.eps * (n - j) as f64 + p.k;
                let log_upper = log_det - log_lower;
                let c = &p.chi;
                margins[0] = margins[0].min(log_upper - (c.c_minus * len - slack));
                margins[1] = margins[1].min(c.c_plus * len + slack - log_upper);
                margins[2] = margins[2].min(log_lower - (c.u_minus * len - slack));
                margins[3] = margins[3].min(c.u_plus * len + slack - log_lower);
            }
        }
    }
    let clean = |m: f64| if m.is_nan() { f64::NEG_INFINITY } else { m };
    let margins = margins.map(clean);
    let worst = margins.iter().copied().fold(f64::INFINITY, f64::min);
    PesinReport {
        member: worst >= 0.0,
        worst_margin: worst,
        central_lower: margins[0],
        central_upper: margins[1],
        unstable_lower: margins[2],
        unstable_upper: margins[3],
        directions: dirs.len(),
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MultiplicityReport {
    /// Maximal number of other block preimages with nearly parallel images.
    pub multiplicity: usize,
    pub preimages: usize,
    pub block_members: usize,
    pub threshold: f64,
    /// Self-pairs are never counted.
    pub self_pairs_excluded: bool,
}

/// `max_w #{w' != w in W : angle(DF^n E^u(w), DF^n E^u(w')) <= 5H e^{(chi_c^+ - chi_u^-) n + 2k}}`
/// with `W` the block members among `F^{-n}(z)`.
pub fn multiplicity(
    f: &dyn Endomorphism,
    z: &TorusPoint,
    p: &PesinParams,
    h: f64,
    cones: &ConeField,
    directions: usize,
) -> Result<MultiplicityReport> {
    if !(h > 0.0) {
        return Err(Error::Parameter("H must be positive".into()));
    }
    let pre = preimages(f, z, p.n)?;
    let members: Vec<&TorusPoint> = pre
        .iter()
        .filter(|w| pesin_membership(f, w, p, cones, directions).member)
        .collect();
    let dirs: Vec<TangentVector> = members
        .iter()
        .map(|w| {
            let mut q = **w;
            let mut v = cones.eu;
            for _ in 0..p.n {
                v = f.jacobian(&q).apply(v);
                v = v * (1.0 / v.norm());
                q = f.eval(&q);
            }
            v
        })
        .collect();
    let threshold = 5.0 * h * ((p.chi.c_plus - p.chi.u_minus) * p.n as f64 + 2.0 * p.k).exp();
    let mut best = 0;
    for (i, u) in dirs.iter().enumerate() {
        let count = dirs
            .iter()
            .enumerate()
            .filter(|(j, v)| *j != i && line_angle(u, v).map(|a| a <= threshold).unwrap_or(false))
            .count();
        best = best.max(count);
    }
    Ok(MultiplicityReport {
        multiplicity: best,
        preimages: pre.len(),
        block_members: members.len(),
        threshold,
        self_pairs_excluded: true,
    })
}

/// Line angles between the pushed unstable directions of all pairs of
/// `n`-th preimages, sorted increasingly.
pub fn pairwise_angle_spectrum(
    f: &dyn Endomorphism,
    z: &TorusPoint,
    n: usize,
    cones: &ConeField,
) -> Result<Vec<f64>> {
    let pre = preimages(f, z, n)?;
    let dirs: Vec<TangentVector> = pre
        .iter()
        .map(|w| {
            let mut q = *w;
            let mut v = cones.eu;
            for _ in 0..n {
                v = f.jacobian(&q).apply(v);
                v = v * (1.0 / v.norm());
                q = f.eval(&q);
            }
            v
        })
        .collect();
    let mut out = Vec::new();
    for i in 0..dirs.len() {
        for j in (i + 1)..dirs.len() {
            out.push(line_angle(&dirs[i], &dirs[j])?);
        }
    }
    out.sort_by(f64::total_cmp);
    Ok(out)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RatioRow {
    pub n: usize,
    pub max_multiplicity: usize,
    pub ratio: f64,
}

/// `max_z log(max(N, 1)) / (n * defect_margin)` over a ladder of `n`.
#[allow(clippy::too_many_arguments)]
pub fn transversality_ratio(
    f: &dyn Endomorphism,
    chi: &ExponentQuadruple,
    eps: f64,
    k: f64,
    n_ladder: &[usize],
    z_samples: &[TorusPoint],
    h: f64,
    cones: &ConeField,
) -> Result<Vec<RatioRow>> {
    let denom = chi.defect_margin();
    if !(denom > 0.0) {
        return Err(Error::Parameter(format!("nonpositive denominator {denom}")));
    }
    n_ladder
        .iter()
        .map(|&n| {
            let p = PesinParams::new(*chi, eps, k, n)?;
            let mut best = 0;
            for z in z_samples {
                best = best
                    .max(multiplicity(f, z, &p, h, cones, DEFAULT_CONE_DIRECTIONS)?.multiplicity);
            }
            Ok(RatioRow {
                n,
                max_multiplicity: best,
                ratio: (best.max(1) as f64).ln() / (n as f64 * denom),
            })
        })
        .collect()
}

/// Angle between `DF_z E^c(z)` and `E^c(F z)`.
pub fn central_invariance_defect(f: &dyn Endomorphism, z: &TorusPoint, n: usize) -> Result<f64> {
    let e0 = central_direction(f, z, n)?;
    let e1 = central_direction(f, &f.eval(z), n)?;
    line_angle(&f.jacobian(z).apply(e0), &e1)
}

/// Unsigned angle helper re-exported for reports.
pub fn direction_angle(u: &TangentVector, v: &TangentVector) -> Result<f64> {
    angle(u, v)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::models::LinearMap;

    #[test]
    fn triangular_central_direction() {
        let tri = LinearMap::new([[3, 0], [1, 2]]);
        let e = central_direction(&tri, &TorusPoint::new(0.3, 0.1), 20).unwrap();
        assert!(e.vx.abs() < 1e-6 && (e.vy.abs() - 1.0).abs() < 1e-6);
        assert!(matches!(
            central_direction(&LinearMap::identity(), &TorusPoint::new(0.1, 0.1), 5),
            Err(Error::NoDomination(_))
        ));
    }

    #[test]
    fn conformal_exponents_flag_domination() {
        let m = LinearMap::new([[2, 0], [0, 2]]);
        let e = pointwise_exponents(&m, &TorusPoint::new(0.1, 0.2), 50).unwrap();
        assert!(!e.dominated);
        assert!((e.central - 2f64.ln()).abs() < 1e-12);
        assert!((e.unstable - 2f64.ln()).abs() < 1e-12);
    }

    #[test]
    fn l_function_examples() {
        let id = LinearMap::identity();
        assert_eq!(
            l_function(&id, &TorusPoint::new(0.1, 0.1), &id.default_cones(), 9),
            0.0
        );
    }

    #[test]
    fn empty_index_range_is_member() {
        let tri = LinearMap::new([[3, 0], [1, 2]]);
        let chi = ExponentQuadruple::new(0.5, 0.8, 1.0, 1.2).unwrap();
        let p = PesinParams::new(chi, 0.01, 1.0, 0).unwrap();
        assert!(
            pesin_membership(
                &tri,
                &TorusPoint::new(0.0, 0.0),
                &p,
                &tri.default_cones(),
                9
            )
            .member
        );
    }
}
