//! Measures on curves and on the torus, their transport, and the disk-average
//! seminorms `||mu||_delta = ||J_delta mu||_{L^2}` with
//! `J_delta mu(w) = mu(B(w, delta)) / (pi delta^2)`.

use std::borrow::Cow;
use std::f64::consts::PI;

use serde::{Deserialize, Serialize};

use crate::curves::{loglinear_mass, push_tracked, JetCurve, PushedCurve};
use crate::error::{Error, Result};
use crate::models::Endomorphism;
use crate::torus::{torus_dist, wrap_signed, TorusPoint};

pub const DEFAULT_LIPSCHITZ_BOUND: f64 = 10.0;
pub const QUAD_TOL: f64 = 0.01;
pub const DEFAULT_QUAD_GRID: usize = 512;
const SUPERSAMPLE: usize = 4;

/// A measure on a jet curve with Lipschitz log-density.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CurveMeasure {
    inner: PushedCurve,
    lipschitz: f64,
}

fn log_lipschitz(curve: &JetCurve, log_density: &[f64]) -> f64 {
    curve
        .samples()
        .windows(2)
        .zip(log_density.windows(2))
        .map(|(s, l)| (l[1] - l[0]).abs() / (s[1].t - s[0].t))
        .fold(0.0, f64::max)
}

impl CurveMeasure {
    /// Density given by its logarithm at each sample, interpolated linearly.
    pub fn new(curve: JetCurve, log_density: Vec<f64>) -> Result<Self> {
        if log_density.len() != curve.samples().len() {
            return Err(Error::Parameter(
                "one log-density value per sample required".into(),
            ));
        }
        if log_density.iter().any(|v| !v.is_finite()) {
            return Err(Error::Parameter("log-density must be finite".into()));
        }
        let masses = curve
            .samples()
            .windows(2)
            .zip(log_density.windows(2))
            .map(|(s, l)| loglinear_mass(s[0].t, s[1].t, l[0], l[1]))
            .collect();
        let lipschitz = log_lipschitz(&curve, &log_density);
        let mut inner = PushedCurve::identity(curve);
        inner.log_density = Some(log_density);
        inner.masses = Some(masses);
        Ok(CurveMeasure { inner, lipschitz })
    }

    /// Constant density with the given total mass.
    pub fn uniform(curve: JetCurve, mass: f64) -> Result<Self> {
        let n = curve.samples().len();
        let level = (mass / curve.length()).ln();
        CurveMeasure::new(curve, vec![level; n])
    }

    fn from_pushed(inner: PushedCurve) -> Self {
        let lipschitz = log_lipschitz(&inner.curve, inner.log_density.as_deref().unwrap_or(&[]));
        CurveMeasure { inner, lipschitz }
    }

    pub fn curve(&self) -> &JetCurve {
        &self.inner.curve
    }

    pub fn log_density(&self) -> &[f64] {
        self.inner.log_density.as_deref().unwrap_or(&[])
    }

    pub fn interval_masses(&self) -> &[f64] {
        self.inner.masses.as_deref().unwrap_or(&[])
    }

    /// Lipschitz constant witness of `log phi` over consecutive samples.
    pub fn lipschitz(&self) -> f64 {
        self.lipschitz
    }

    pub fn mass(&self) -> f64 {
        self.interval_masses().iter().sum()
    }

    /// Mass recomputed from the sampled density by the trapezoid rule.
    pub fn quadrature_mass(&self) -> f64 {
        self.curve()
            .samples()
            .windows(2)
            .zip(self.log_density().windows(2))
            .map(|(s, l)| 0.5 * (s[1].t - s[0].t) * (l[0].exp() + l[1].exp()))
            .sum()
    }

    /// Source parameter of each sample on the original curve.
    pub fn source_param(&self) -> &[f64] {
        &self.inner.source_param
    }

    /// Atoms at the samples carrying the interval masses split evenly
    /// between the two endpoints.
    pub fn to_atoms(&self) -> AtomicMeasure {
        let samples = self.curve().samples();
        let mut w = vec![0.0; samples.len()];
        for (i, m) in self.interval_masses().iter().enumerate() {
            w[i] += 0.5 * m;
            w[i + 1] += 0.5 * m;
        }
        AtomicMeasure {
            atoms: samples
                .iter()
                .zip(w)
                .filter(|(_, w)| *w > 0.0)
                .map(|(s, w)| (s.point, w))
                .collect(),
        }
    }
}

/// Push a curve measure `n` times. The density is transported by
/// `phi o p_n^{-1} (p_n^{-1})'`; the result is split with the curve.
pub fn pushforward_curve_measure(
    f: &dyn Endomorphism,
    nu: &CurveMeasure,
    n: usize,
    lipschitz_bound: f64,
) -> Result<Vec<CurveMeasure>> {
    if nu.lipschitz > lipschitz_bound {
        return Err(Error::Precondition(format!(
            "log-density Lipschitz constant {} exceeds the bound {}",
            nu.lipschitz, lipschitz_bound
        )));
    }
    if n == 0 {
        return Err(Error::Parameter(
            "number of iterates must be positive".into(),
        ));
    }
    let pieces = push_tracked(f, &f.default_cones(), vec![nu.inner.clone()], n)?;
    Ok(pieces.into_iter().map(CurveMeasure::from_pushed).collect())
}

/// Weighted point masses.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AtomicMeasure {
    atoms: Vec<(TorusPoint, f64)>,
}

impl AtomicMeasure {
    pub fn new(atoms: Vec<(TorusPoint, f64)>) -> Result<Self> {
        if atoms.iter().any(|(_, w)| !(*w > 0.0 && w.is_finite())) {
            return Err(Error::Parameter("atom weights must be positive".into()));
        }
        Ok(AtomicMeasure { atoms })
    }

    pub fn dirac(z: TorusPoint) -> Self {
        AtomicMeasure {
            atoms: vec![(z, 1.0)],
        }
    }

    pub fn atoms(&self) -> &[(TorusPoint, f64)] {
        &self.atoms
    }

    pub fn len(&self) -> usize {
        self.atoms.len()
    }

    pub fn is_empty(&self) -> bool {
        self.atoms.is_empty()
    }

    pub fn mass(&self) -> f64 {
        self.atoms.iter().map(|(_, w)| w).sum()
    }

    pub fn integrate(&self, g: impl Fn(&TorusPoint) -> f64) -> f64 {
        self.atoms.iter().map(|(z, w)| w * g(z)).sum()
    }

    pub fn sum(&self, other: &AtomicMeasure) -> AtomicMeasure {
        let mut atoms = self.atoms.clone();
        atoms.extend(other.atoms.iter().copied());
        AtomicMeasure { atoms }
    }
}

/// Uniform weights on `F^{burn_in}(z), ..., F^{n-1}(z)`.
pub fn birkhoff_orbit_measure(
    f: &dyn Endomorphism,
    z: &TorusPoint,
    n: usize,
    burn_in: usize,
) -> Result<AtomicMeasure> {
    if n <= burn_in {
        return Err(Error::Parameter(
            "orbit length must exceed the burn-in".into(),
        ));
    }
    let w = 1.0 / (n - burn_in) as f64;
    let mut p = *z;
    let mut atoms = Vec::with_capacity(n - burn_in);
    for i in 0..n {
        if i >= burn_in {
            atoms.push((p, w));
        }
        p = f.eval(&p);
    }
    Ok(AtomicMeasure { atoms })
}

/// Piecewise-constant density on a `G x G` grid of cells.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GridDensity {
    resolution: usize,
    values: Vec<f64>,
}

impl GridDensity {
    /// `values[i * G + j]` is the density on cell `[i/G, (i+1)/G) x [j/G, (j+1)/G)`.
    pub fn new(resolution: usize, values: Vec<f64>) -> Result<Self> {
        if resolution == 0 || values.len() != resolution * resolution {
            return Err(Error::Parameter("grid needs G*G values".into()));
        }
        if values.iter().any(|v| !(*v >= 0.0 && v.is_finite())) {
            return Err(Error::Parameter(
                "grid densities must be nonnegative".into(),
            ));
        }
        Ok(GridDensity { resolution, values })
    }

    pub fn lebesgue(resolution: usize) -> Self {
        GridDensity {
            resolution,
            values: vec![1.0; resolution * resolution],
        }
    }

    pub fn from_fn(resolution: usize, density: impl Fn(&TorusPoint) -> f64) -> Result<Self> {
        let g = resolution as f64;
        let values = (0..resolution * resolution)
            .map(|k| {
                density(&TorusPoint::new(
                    ((k / resolution) as f64 + 0.5) / g,
                    ((k % resolution) as f64 + 0.5) / g,
                ))
            })
            .collect();
        GridDensity::new(resolution, values)
    }

    pub fn resolution(&self) -> usize {
        self.resolution
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn mass(&self) -> f64 {
        self.values.iter().sum::<f64>() / (self.resolution * self.resolution) as f64
    }

    /// Point masses at the centres of a `4x` subcell refinement.
    pub fn supersampled_atoms(&self) -> AtomicMeasure {
        let g = self.resolution;
        let sub = (g * SUPERSAMPLE) as f64;
        let cell_w = 1.0 / (g * g * SUPERSAMPLE * SUPERSAMPLE) as f64;
        let mut atoms = Vec::with_capacity(g * g * SUPERSAMPLE * SUPERSAMPLE);
        for i in 0..g {
            for j in 0..g {
                let v = self.values[i * g + j];
                if v <= 0.0 {
                    continue;
                }
                for a in 0..SUPERSAMPLE {
                    for b in 0..SUPERSAMPLE {
                        let x = ((i * SUPERSAMPLE + a) as f64 + 0.5) / sub;
                        let y = ((j * SUPERSAMPLE + b) as f64 + 0.5) / sub;
                        atoms.push((TorusPoint::new(x, y), v * cell_w));
                    }
                }
            }
        }
        AtomicMeasure { atoms }
    }

    /// Grid histogram of an atomic measure.
    pub fn histogram(mu: &AtomicMeasure, resolution: usize) -> Self {
        let g = resolution as f64;
        let mut values = vec![0.0; resolution * resolution];
        for (z, w) in mu.atoms() {
            let i = ((z.x() * g) as usize).min(resolution - 1);
            let j = ((z.y() * g) as usize).min(resolution - 1);
            values[i * resolution + j] += w * g * g;
        }
        GridDensity { resolution, values }
    }
}

/// Measures on the torus that the seminorm machinery accepts.
pub trait TorusMeasure {
    fn total_mass(&self) -> f64;

    /// Point masses realising the measure for disk counting.
    fn point_masses(&self) -> Cow<'_, AtomicMeasure>;

    /// Smallest radius the representation resolves.
    fn min_radius(&self) -> f64 {
        0.0
    }
}

impl TorusMeasure for AtomicMeasure {
    fn total_mass(&self) -> f64 {
        self.mass()
    }

    fn point_masses(&self) -> Cow<'_, AtomicMeasure> {
        Cow::Borrowed(self)
    }
}

impl TorusMeasure for GridDensity {
    fn total_mass(&self) -> f64 {
        self.mass()
    }

    fn point_masses(&self) -> Cow<'_, AtomicMeasure> {
        Cow::Owned(self.supersampled_atoms())
    }

    fn min_radius(&self) -> f64 {
        4.0 / self.resolution as f64
    }
}

fn check_radius(mu: &dyn TorusMeasure, delta: f64) -> Result<()> {
    if !(delta > 0.0 && delta < 0.5) {
        return Err(Error::Domain(format!("radius {delta} not in (0, 1/2)")));
    }
    let min = mu.min_radius();
    if delta < min {
        return Err(Error::Resolution { delta, min });
    }
    Ok(())
}

/// `mu(B(w, delta)) / (pi delta^2)`.
pub fn j_delta(mu: &dyn TorusMeasure, delta: f64, w: &TorusPoint) -> Result<f64> {
    check_radius(mu, delta)?;
    let pm = mu.point_masses();
    let inside: f64 = pm
        .atoms()
        .iter()
        .filter(|(z, _)| torus_dist(z, w) < delta)
        .map(|(_, m)| m)
        .sum();
    Ok(inside / (PI * delta * delta))
}

/// `J_delta mu` at the cell centres of a `quad x quad` grid, row-major in x.
pub fn j_delta_field(mu: &dyn TorusMeasure, delta: f64, quad: usize) -> Result<Vec<f64>> {
    check_radius(mu, delta)?;
    let min = 4.0 / quad as f64;
    if delta < min {
        return Err(Error::Resolution { delta, min });
    }
    let g = quad as i64;
    let gf = quad as f64;
    // diff[j * (G+1) + i]: row j (y index), difference along x
    let mut diff = vec![0.0; quad * (quad + 1)];
    let add_run = |j: usize, lo: i64, hi: i64, w: f64, diff: &mut Vec<f64>| {
        let row = j * (quad + 1);
        let (l, h) = (lo.rem_euclid(g), hi.rem_euclid(g));
        if hi - lo + 1 >= g {
            diff[row] += w;
            diff[row + quad] -= w;
        } else if l <= h {
            diff[row + l as usize] += w;
            diff[row + h as usize + 1] -= w;
        } else {
            diff[row + l as usize] += w;
            diff[row + quad] -= w;
            diff[row] += w;
            diff[row + h as usize + 1] -= w;
        }
    };
    let pm = mu.point_masses();
    for (z, w) in pm.atoms() {
        let (ax, ay) = (z.x(), z.y());
        let j_lo = ((ay - delta) * gf - 0.5).floor() as i64 + 1;
        let j_hi = ((ay + delta) * gf - 0.5).ceil() as i64 - 1;
        for j in j_lo..=j_hi {
            let yj = (j as f64 + 0.5) / gf;
            let dy = wrap_signed(yj - ay);
            let r2 = delta * delta - dy * dy;
            if r2 <= 0.0 {
                continue;
            }
            let hw = r2.sqrt();
            let i_lo = ((ax - hw) * gf - 0.5).floor() as i64 + 1;
            let i_hi = ((ax + hw) * gf - 0.5).ceil() as i64 - 1;
            if i_hi < i_lo {
                continue;
            }
            add_run(j.rem_euclid(g) as usize, i_lo, i_hi, *w, &mut diff);
        }
    }
    let norm = 1.0 / (PI * delta * delta);
    let mut out = vec![0.0; quad * quad];
    for j in 0..quad {
        let mut acc = 0.0;
        for i in 0..quad {
            acc += diff[j * (quad + 1) + i];
            out[i * quad + j] = acc * norm;
        }
    }
    Ok(out)
}

/// `||mu||_delta` by a Riemann sum on `quad x quad` cell centres.
pub fn seminorm(mu: &dyn TorusMeasure, delta: f64, quad: usize) -> Result<f64> {
    let field = j_delta_field(mu, delta, quad)?;
    Ok((field.iter().map(|v| v * v).sum::<f64>() / field.len() as f64).sqrt())
}

/// `(mu, nu)_delta`.
pub fn seminorm_pairing(
    mu: &dyn TorusMeasure,
    nu: &dyn TorusMeasure,
    delta: f64,
    quad: usize,
) -> Result<f64> {
    let a = j_delta_field(mu, delta, quad)?;
    let b = j_delta_field(nu, delta, quad)?;
    Ok(a.iter().zip(&b).map(|(x, y)| x * y).sum::<f64>() / a.len() as f64)
}

/// `(delta, ||mu||_delta)` over a decreasing ladder of radii.
pub fn ac_diagnostic_ladder(
    mu: &dyn TorusMeasure,
    ladder: &[f64],
    quad: usize,
) -> Result<Vec<(f64, f64)>> {
    ladder
        .iter()
        .map(|&d| Ok((d, seminorm(mu, d, quad)?)))
        .collect()
}

/// Least-squares slope of `log value` against `log delta`.
pub fn loglog_slope(ladder: &[(f64, f64)]) -> f64 {
    let pts: Vec<(f64, f64)> = ladder.iter().map(|(d, v)| (d.ln(), v.ln())).collect();
    let n = pts.len() as f64;
    let mx = pts.iter().map(|p| p.0).sum::<f64>() / n;
    let my = pts.iter().map(|p| p.1).sum::<f64>() / n;
    let sxy: f64 = pts.iter().map(|p| (p.0 - mx) * (p.1 - my)).sum();
    let sxx: f64 = pts.iter().map(|p| (p.0 - mx).powi(2)).sum();
    sxy / sxx
}

pub fn ladder_to_csv(ladder: &[(f64, f64)]) -> String {
    let mut out = String::from("delta,value\n");
    for (d, v) in ladder {
        out.push_str(&format!("{d:.16e},{v:.16e}\n"));
    }
    out
}
