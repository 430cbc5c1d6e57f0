//! Arclength-parameterized curves carrying the scalar jets
//! `d^2 gamma, ..., d^{r-1} gamma` (curvature and its arclength derivatives),
//! and their transport under an endomorphism.

use std::fmt::Write as _;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::models::{ConeField, Endomorphism};
use crate::series::Series;
use crate::torus::{TangentVector, TorusPoint};

pub const D_STAR_FLOOR: f64 = 1e-8;
pub const MAX_PIECE_LENGTH: f64 = 10.0;
pub const CURVE_JUMP_TOL: f64 = 1e-3;
const MAX_SPACING: f64 = 0.01;
const SAFETY: f64 = 1.5;

const GL_NODES: [f64; 8] = [
    -0.960_289_856_497_536_3,
    -0.796_666_477_413_626_7,
    -0.525_532_409_916_329,
    -0.183_434_642_495_649_8,
    0.183_434_642_495_649_8,
    0.525_532_409_916_329,
    0.796_666_477_413_626_7,
    0.960_289_856_497_536_3,
];
const GL_WEIGHTS: [f64; 8] = [
    0.101_228_536_290_376_3,
    0.222_381_034_453_374_5,
    0.313_706_645_877_887_3,
    0.362_683_783_378_362,
    0.362_683_783_378_362,
    0.313_706_645_877_887_3,
    0.222_381_034_453_374_5,
    0.101_228_536_290_376_3,
];

/// Eight-point Gauss-Legendre rule on `[a, b]`.
pub fn gauss_legendre(a: f64, b: f64, f: impl Fn(f64) -> f64) -> f64 {
    let half = 0.5 * (b - a);
    let mid = 0.5 * (a + b);
    GL_NODES
        .iter()
        .zip(GL_WEIGHTS.iter())
        .map(|(x, w)| w * f(mid + half * x))
        .sum::<f64>()
        * half
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct JetSample {
    pub t: f64,
    pub point: TorusPoint,
    pub tangent: TangentVector,
    /// `d^2 gamma(t), ..., d^{r-1} gamma(t)`.
    pub jets: Vec<f64>,
}

impl JetSample {
    pub fn angle(&self) -> f64 {
        self.tangent.angle_of()
    }

    /// Local Taylor model of the curve in arclength offset `h`:
    /// position series and tangent-angle series, both of order `order`.
    pub fn germ(&self, order: usize) -> (Series, Series, Series) {
        let mut derivs = vec![self.angle()];
        derivs.extend(self.jets.iter().copied());
        derivs.resize(order, 0.0);
        let phi = Series::from_derivatives(&derivs[..order.max(1)]);
        let (s, c) = phi.sin_cos();
        let x = c.integ(self.point.x());
        let y = s.integ(self.point.y());
        (x, y, phi)
    }

    /// Sample at arclength offset `h`, from the local Taylor model.
    pub fn advance(&self, h: f64) -> JetSample {
        let order = self.jets.len() + 1;
        let (x, y, phi) = self.germ(order);
        let ang = phi.eval(h);
        let q = self.jets.len();
        let jets = (0..q)
            .map(|k| {
                let mut acc = 0.0;
                let mut fact = 1.0;
                for j in 0..(q - k) {
                    if j > 0 {
                        fact *= j as f64;
                    }
                    acc += self.jets[k + j] * h.powi(j as i32) / fact;
                }
                acc
            })
            .collect();
        JetSample {
            t: self.t + h,
            point: TorusPoint::new(x.eval(h), y.eval(h)),
            tangent: TangentVector::from_angle(ang),
            jets,
        }
    }
}

/// Jets of the image curve at the image of a sample.
#[derive(Debug, Clone, PartialEq)]
pub struct ImageJet {
    pub point: TorusPoint,
    pub tangent: TangentVector,
    pub jets: Vec<f64>,
    /// `D_*F` along the tangent: the derivative of the new arclength.
    pub speed: f64,
    /// `D^*F` along the tangent.
    pub upper: f64,
}

/// Push the jet of a curve at one point through `f`.
pub fn image_jet(f: &dyn Endomorphism, sample: &JetSample) -> Result<ImageJet> {
    let q = sample.jets.len();
    if q == 0 {
        return Err(Error::Parameter("curves need r >= 3".into()));
    }
    let order = q + 1;
    let [fa, fb] = f.taylor(&sample.point, order)?;
    let (x, y, _) = sample.germ(order);
    let gx = fa.compose(&x, &y);
    let gy = fb.compose(&x, &y);
    let (dx, dy) = (gx.deriv(), gy.deriv());
    let speed = (&(&dx * &dx) + &(&dy * &dy)).sqrt();
    let speed0 = speed.coeff(0);
    if !(speed0 >= D_STAR_FLOOR) {
        return Err(Error::DegeneratePushforward {
            t: sample.t,
            dstar: speed0,
        });
    }
    let (ddx, ddy) = (dx.deriv(), dy.deriv());
    let m = ddx.order();
    let cross = &(&dx.truncate(m) * &ddy) - &(&dy.truncate(m) * &ddx);
    let inv = speed.truncate(cross.order()).recip();
    let mut kappa = &cross * &inv.powi(3);
    let mut jets = Vec::with_capacity(q);
    jets.push(kappa.coeff(0));
    for _ in 1..q {
        let d = kappa.deriv();
        kappa = &d * &inv.truncate(d.order());
        jets.push(kappa.coeff(0));
    }
    let det = f.jacobian(&sample.point).det();
    Ok(ImageJet {
        point: TorusPoint::new(gx.coeff(0), gy.coeff(0)),
        tangent: TangentVector::new(dx.coeff(0) / speed0, dy.coeff(0) / speed0),
        jets,
        speed: speed0,
        upper: det / speed0,
    })
}

/// Second-order jet of the image from the explicit transport formula
/// `d2' = (D^*/D_*^2) d2 + <D^2F(v,v), (DF v)^perp> / D_*^3`.
pub fn image_curvature_closed_form(f: &dyn Endomorphism, sample: &JetSample) -> Result<f64> {
    let v = sample.tangent;
    let dfv = f.jacobian(&sample.point).apply(v);
    let lower = dfv.norm();
    if lower < D_STAR_FLOOR {
        return Err(Error::DegeneratePushforward {
            t: sample.t,
            dstar: lower,
        });
    }
    let upper = f.jacobian(&sample.point).det() / lower;
    let second = f.derivative(&sample.point, &[v, v])?;
    let q2 = second.dot(&dfv.perp());
    Ok(upper / (lower * lower) * sample.jets[0] + q2 / lower.powi(3))
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct JetCurve {
    samples: Vec<JetSample>,
    order: usize,
    lip_top: f64,
}

fn top_lipschitz(samples: &[JetSample]) -> f64 {
    samples
        .windows(2)
        .map(|w| {
            let dt = w[1].t - w[0].t;
            let (a, b) = (w[0].jets.last(), w[1].jets.last());
            match (a, b) {
                (Some(a), Some(b)) if dt > 0.0 => (b - a).abs() / dt,
                _ => 0.0,
            }
        })
        .fold(0.0, f64::max)
}

impl JetCurve {
    /// Validating constructor. Parameters must start at 0 and increase;
    /// tangents must be unit vectors.
    pub fn new(samples: Vec<JetSample>, order: usize) -> Result<Self> {
        if order < 3 {
            return Err(Error::Parameter("jet curves need r >= 3".into()));
        }
        if samples.len() < 2 {
            return Err(Error::Parameter(
                "a curve needs at least two samples".into(),
            ));
        }
        if samples[0].t != 0.0 {
            return Err(Error::Parameter("curve parameters must start at 0".into()));
        }
        for w in samples.windows(2) {
            if !(w[1].t > w[0].t) {
                return Err(Error::Parameter("curve parameters must increase".into()));
            }
        }
        for s in &samples {
            if (s.tangent.norm() - 1.0).abs() > 1e-10 {
                return Err(Error::Parameter(format!(
                    "tangent at t = {} is not a unit vector",
                    s.t
                )));
            }
            if s.jets.len() != order - 2 {
                return Err(Error::Parameter(format!(
                    "sample at t = {} carries {} jets, expected {}",
                    s.t,
                    s.jets.len(),
                    order - 2
                )));
            }
        }
        let lip_top = top_lipschitz(&samples);
        Ok(JetCurve {
            samples,
            order,
            lip_top,
        })
    }

    /// Curve whose curvature is the polynomial `kappa(s) = sum c_k s^k / k!`
    /// with `c = kappa_derivs`, integrated from `start` with initial tangent
    /// angle `angle`.
    pub fn from_curvature(
        start: TorusPoint,
        angle: f64,
        kappa_derivs: &[f64],
        length: f64,
        spacing: f64,
        order: usize,
    ) -> Result<Self> {
        if !(length > 0.0 && spacing > 0.0) {
            return Err(Error::Parameter(
                "length and spacing must be positive".into(),
            ));
        }
        let q = order.saturating_sub(2);
        let kappa = |s: f64, k: usize| -> f64 {
            // k-th derivative of the curvature polynomial at s
            let mut acc = 0.0;
            let mut fact = 1.0;
            for (j, c) in kappa_derivs.iter().skip(k).enumerate() {
                if j > 0 {
                    fact *= j as f64;
                }
                acc += c * s.powi(j as i32) / fact;
            }
            acc
        };
        let phi = |s: f64| -> f64 {
            let mut acc = angle;
            let mut fact = 1.0;
            for (j, c) in kappa_derivs.iter().enumerate() {
                fact *= (j + 1) as f64;
                acc += c * s.powi(j as i32 + 1) / fact;
            }
            acc
        };
        let m = (length / spacing).ceil().max(1.0) as usize;
        let h = length / m as f64;
        let mut samples = Vec::with_capacity(m + 1);
        let (mut x, mut y) = (start.x(), start.y());
        for i in 0..=m {
            let t = i as f64 * h;
            if i > 0 {
                let a = t - h;
                x += gauss_legendre(a, t, |s| phi(s).cos());
                y += gauss_legendre(a, t, |s| phi(s).sin());
            }
            samples.push(JetSample {
                t,
                point: TorusPoint::new(x, y),
                tangent: TangentVector::from_angle(phi(t)),
                jets: (0..q).map(|k| kappa(t, k)).collect(),
            });
        }
        JetCurve::new(samples, order)
    }

    /// Straight segment.
    pub fn segment(
        start: TorusPoint,
        direction: TangentVector,
        length: f64,
        order: usize,
    ) -> Result<Self> {
        JetCurve::from_curvature(start, direction.angle_of(), &[], length, MAX_SPACING, order)
    }

    pub fn samples(&self) -> &[JetSample] {
        &self.samples
    }

    pub fn order(&self) -> usize {
        self.order
    }

    pub fn length(&self) -> f64 {
        self.samples.last().map(|s| s.t).unwrap_or(0.0)
    }

    pub fn lip_top(&self) -> f64 {
        self.lip_top
    }

    /// Sample at parameter `t`, from the Taylor model of the nearest sample.
    pub fn at(&self, t: f64) -> JetSample {
        let i = self.nearest_index(t);
        let s = &self.samples[i];
        if t == s.t {
            s.clone()
        } else {
            s.advance(t - s.t)
        }
    }

    fn nearest_index(&self, t: f64) -> usize {
        let idx = self.samples.partition_point(|s| s.t < t);
        if idx == 0 {
            0
        } else if idx >= self.samples.len() {
            self.samples.len() - 1
        } else if (self.samples[idx].t - t) < (t - self.samples[idx - 1].t) {
            idx
        } else {
            idx - 1
        }
    }

    /// Largest jet discontinuity between consecutive samples, per unit arclength,
    /// measured against the Taylor prediction from the left sample.
    pub fn max_jet_jump(&self) -> f64 {
        self.samples
            .windows(2)
            .map(|w| {
                let dt = w[1].t - w[0].t;
                let pred = w[0].advance(dt);
                pred.jets
                    .iter()
                    .zip(&w[1].jets)
                    .map(|(a, b)| (a - b).abs() / dt)
                    .fold(0.0, f64::max)
            })
            .fold(0.0, f64::max)
    }

    pub fn to_csv(&self) -> String {
        let mut out = String::from("t,x,y,tx,ty");
        for k in 2..self.order {
            let _ = write!(out, ",d{k}");
        }
        out.push('\n');
        for s in &self.samples {
            let _ = write!(
                out,
                "{:.16e},{:.16e},{:.16e},{:.16e},{:.16e}",
                s.t,
                s.point.x(),
                s.point.y(),
                s.tangent.vx,
                s.tangent.vy
            );
            for j in &s.jets {
                let _ = write!(out, ",{j:.16e}");
            }
            out.push('\n');
        }
        out
    }

    pub fn from_csv(text: &str) -> Result<Self> {
        let mut lines = text.lines();
        let header = lines
            .next()
            .ok_or_else(|| Error::Parameter("empty curve file".into()))?;
        let cols = header.split(',').count();
        if cols < 6 {
            return Err(Error::Parameter(
                "curve file needs t,x,y,tx,ty and jets".into(),
            ));
        }
        let order = cols - 3;
        let mut samples = Vec::new();
        for (ln, line) in lines.enumerate().filter(|(_, l)| !l.trim().is_empty()) {
            let vals: std::result::Result<Vec<f64>, _> =
                line.split(',').map(|v| v.trim().parse::<f64>()).collect();
            let vals = vals.map_err(|e| Error::Parameter(format!("line {}: {e}", ln + 2)))?;
            if vals.len() != cols {
                return Err(Error::Parameter(format!(
                    "line {}: expected {cols} columns",
                    ln + 2
                )));
            }
            samples.push(JetSample {
                t: vals[0],
                point: TorusPoint::new(vals[1], vals[2]),
                tangent: TangentVector::new(vals[3], vals[4]),
                jets: vals[5..].to_vec(),
            });
        }
        JetCurve::new(samples, order)
    }
}

/// Per-sample bookkeeping carried through a pushforward.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PushedCurve {
    pub curve: JetCurve,
    /// Parameter of each sample on the original curve.
    pub source_param: Vec<f64>,
    /// `log p_n'` at each sample, with `p_n` the arclength reparameterization.
    pub log_rate: Vec<f64>,
    /// Log density of a transported measure, if any.
    pub log_density: Option<Vec<f64>>,
    /// Mass of each interval between consecutive samples, if any.
    pub masses: Option<Vec<f64>>,
}

impl PushedCurve {
    pub fn identity(curve: JetCurve) -> Self {
        let n = curve.samples.len();
        PushedCurve {
            source_param: curve.samples.iter().map(|s| s.t).collect(),
            log_rate: vec![0.0; n],
            curve,
            log_density: None,
            masses: None,
        }
    }

    pub fn min_rate(&self) -> f64 {
        self.log_rate
            .iter()
            .copied()
            .fold(f64::INFINITY, f64::min)
            .exp()
    }
}

/// Mass of `[a, b]` under the density `exp(l(t))`, `l` linear between
/// `la` at `a` and `lb` at `b`.
pub(crate) fn loglinear_mass(a: f64, b: f64, la: f64, lb: f64) -> f64 {
    let d = lb - la;
    let w = b - a;
    if d.abs() < 1e-8 {
        w * la.exp() * (1.0 + d / 2.0 + d * d / 6.0)
    } else {
        w * (lb.exp() - la.exp()) / d
    }
}

fn hermite(t0: f64, t1: f64, y0: f64, y1: f64, d0: f64, d1: f64, t: f64) -> f64 {
    let h = t1 - t0;
    let s = (t - t0) / h;
    let (s2, s3) = (s * s, s * s * s);
    (2.0 * s3 - 3.0 * s2 + 1.0) * y0
        + (s3 - 2.0 * s2 + s) * h * d0
        + (-2.0 * s3 + 3.0 * s2) * y1
        + (s3 - s2) * h * d1
}

struct Work {
    samples: Vec<JetSample>,
    images: Vec<ImageJet>,
    source: Vec<f64>,
    log_rate: Vec<f64>,
    log_density: Option<Vec<f64>>,
    masses: Option<Vec<f64>>,
}

impl Work {
    /// Subdivide interval `i` into `m` equal parts.
    fn subdivide(&mut self, f: &dyn Endomorphism, i: usize, m: usize) -> Result<()> {
        let (a, b) = (self.samples[i].t, self.samples[i + 1].t);
        let h = (b - a) / m as f64;
        let mut new_samples = Vec::with_capacity(m - 1);
        let mut new_images = Vec::with_capacity(m - 1);
        let mut new_source = Vec::with_capacity(m - 1);
        let mut new_rate = Vec::with_capacity(m - 1);
        let mut new_dens = Vec::with_capacity(m - 1);
        let (r0, r1) = (self.log_rate[i], self.log_rate[i + 1]);
        for j in 1..m {
            let t = a + j as f64 * h;
            let s = if t - a <= b - t {
                self.samples[i].advance(t - a)
            } else {
                self.samples[i + 1].advance(t - b)
            };
            let s = JetSample { t, ..s };
            new_images.push(image_jet(f, &s)?);
            new_samples.push(s);
            new_source.push(hermite(
                a,
                b,
                self.source[i],
                self.source[i + 1],
                (-r0).exp(),
                (-r1).exp(),
                t,
            ));
            let w = (t - a) / (b - a);
            new_rate.push(r0 + w * (r1 - r0));
            if let Some(ld) = &self.log_density {
                new_dens.push(ld[i] + w * (ld[i + 1] - ld[i]));
            }
        }
        if let Some(masses) = &mut self.masses {
            let ld = self
                .log_density
                .as_ref()
                .expect("masses come with a density");
            let mut knots = vec![(a, ld[i])];
            knots.extend(new_samples.iter().zip(&new_dens).map(|(s, d)| (s.t, *d)));
            knots.push((b, ld[i + 1]));
            let parts: Vec<f64> = knots
                .windows(2)
                .map(|w| loglinear_mass(w[0].0, w[1].0, w[0].1, w[1].1))
                .collect();
            let total: f64 = parts.iter().sum();
            let parent = masses[i];
            let split: Vec<f64> = parts.iter().map(|p| parent * p / total).collect();
            masses.splice(i..=i, split);
        }
        let at = i + 1;
        self.samples.splice(at..at, new_samples);
        self.images.splice(at..at, new_images);
        self.source.splice(at..at, new_source);
        self.log_rate.splice(at..at, new_rate);
        if let Some(ld) = &mut self.log_density {
            ld.splice(at..at, new_dens);
        }
        Ok(())
    }
}

fn image_length(f: &dyn Endomorphism, a: &JetSample, b: &JetSample) -> f64 {
    let (ta, tb) = (a.t, b.t);
    let mid = 0.5 * (ta + tb);
    gauss_legendre(ta, tb, |t| {
        let s = if t <= mid {
            a.advance(t - ta)
        } else {
            b.advance(t - tb)
        };
        f.jacobian(&s.point).apply(s.tangent).norm()
    })
}

/// One application of `f` to a tracked curve; the result is split into
/// pieces no longer than `MAX_PIECE_LENGTH`.
fn push_once(
    f: &dyn Endomorphism,
    cones: &ConeField,
    pc: &PushedCurve,
) -> Result<Vec<PushedCurve>> {
    let samples = pc.curve.samples.clone();
    for (s, src) in samples.iter().zip(&pc.source_param) {
        if !cones.in_unstable(&s.tangent) {
            return Err(Error::ConeViolation { t: *src });
        }
    }
    let images = samples
        .iter()
        .zip(&pc.source_param)
        .map(|(s, src)| {
            image_jet(f, s).map_err(|e| match e {
                Error::DegeneratePushforward { dstar, .. } => {
                    Error::DegeneratePushforward { t: *src, dstar }
                }
                other => other,
            })
        })
        .collect::<Result<Vec<_>>>()?;
    let mut work = Work {
        samples,
        images,
        source: pc.source_param.clone(),
        log_rate: pc.log_rate.clone(),
        log_density: pc.log_density.clone(),
        masses: pc.masses.clone(),
    };
    let mut lengths = Vec::new();
    for _pass in 0..6 {
        lengths.clear();
        let mut refined = false;
        let mut i = 0;
        while i + 1 < work.samples.len() {
            let len = image_length(f, &work.samples[i], &work.samples[i + 1]);
            let curv = work.images[i].jets[0]
                .abs()
                .max(work.images[i + 1].jets[0].abs());
            let target = MAX_SPACING.min(0.1 / curv.max(1e-300));
            if len > target {
                let m = ((len / target) * 1.05).ceil() as usize;
                work.subdivide(f, i, m.max(2))?;
                refined = true;
                // re-measure the new sub-intervals on the next pass
                i += m.max(2);
                continue;
            }
            lengths.push(len);
            i += 1;
        }
        if !refined {
            break;
        }
    }
    if lengths.len() + 1 != work.samples.len() {
        lengths = work
            .samples
            .windows(2)
            .map(|w| image_length(f, &w[0], &w[1]))
            .collect();
    }
    let mut params = Vec::with_capacity(work.samples.len());
    let mut acc = 0.0;
    params.push(0.0);
    for l in &lengths {
        acc += l;
        params.push(acc);
    }
    let n = work.samples.len();
    let log_rate: Vec<f64> = (0..n)
        .map(|i| work.log_rate[i] + work.images[i].speed.ln())
        .collect();
    let log_density = work.log_density.as_ref().map(|ld| {
        (0..n)
            .map(|i| ld[i] - work.images[i].speed.ln())
            .collect::<Vec<_>>()
    });
    // split into pieces
    let mut pieces = Vec::new();
    let mut start = 0;
    while start + 1 < n {
        let mut end = start + 1;
        while end + 1 < n && params[end + 1] - params[start] <= MAX_PIECE_LENGTH {
            end += 1;
        }
        let base = params[start];
        let samples: Vec<JetSample> = (start..=end)
            .map(|i| JetSample {
                t: params[i] - base,
                point: work.images[i].point,
                tangent: work.images[i].tangent,
                jets: work.images[i].jets.clone(),
            })
            .collect();
        pieces.push(PushedCurve {
            curve: JetCurve::new(samples, pc.curve.order)?,
            source_param: work.source[start..=end].to_vec(),
            log_rate: log_rate[start..=end].to_vec(),
            log_density: log_density.as_ref().map(|ld| ld[start..=end].to_vec()),
            masses: work.masses.as_ref().map(|m| m[start..end].to_vec()),
        });
        start = end;
    }
    Ok(pieces)
}

/// Apply `f` `n` times to tracked curves.
pub fn push_tracked(
    f: &dyn Endomorphism,
    cones: &ConeField,
    curves: Vec<PushedCurve>,
    n: usize,
) -> Result<Vec<PushedCurve>> {
    let mut current = curves;
    for _ in 0..n {
        let mut next = Vec::new();
        for pc in &current {
            next.extend(push_once(f, cones, pc)?);
        }
        current = next;
    }
    Ok(current)
}

/// `F^n_* gamma`, split into pieces, with the reparameterization tracked at
/// every sample.
pub fn pushforward_curve(
    f: &dyn Endomorphism,
    gamma: &JetCurve,
    n: usize,
) -> Result<Vec<PushedCurve>> {
    pushforward_curve_with(f, &f.default_cones(), gamma, n)
}

pub fn pushforward_curve_with(
    f: &dyn Endomorphism,
    cones: &ConeField,
    gamma: &JetCurve,
    n: usize,
) -> Result<Vec<PushedCurve>> {
    if n == 0 {
        return Err(Error::Parameter(
            "number of iterates must be positive".into(),
        ));
    }
    push_tracked(f, cones, vec![PushedCurve::identity(gamma.clone())], n)
}

/// Bounds `K^(2), ..., K^(r)`; the last entry bounds the Lipschitz constant
/// of the top jet.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AdmissibilityConstants {
    pub bounds: Vec<f64>,
}

impl AdmissibilityConstants {
    pub fn new(bounds: Vec<f64>) -> Result<Self> {
        if bounds.is_empty() || bounds.iter().any(|b| !(*b > 0.0)) {
            return Err(Error::Parameter(
                "admissibility constants must be positive".into(),
            ));
        }
        Ok(AdmissibilityConstants { bounds })
    }

    pub fn uniform(value: f64, order: usize) -> Result<Self> {
        AdmissibilityConstants::new(vec![value; order.saturating_sub(1)])
    }

    /// `K^(k)`.
    pub fn get(&self, k: usize) -> Option<f64> {
        k.checked_sub(2).and_then(|i| self.bounds.get(i).copied())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AdmissibilityReport {
    pub cone_margin: f64,
    pub jet_margins: Vec<f64>,
    pub lipschitz_margin: f64,
    pub pass: bool,
}

pub fn admissibility_check(
    gamma: &JetCurve,
    k: &AdmissibilityConstants,
    cones: &ConeField,
) -> AdmissibilityReport {
    let cone_margin = gamma
        .samples
        .iter()
        .map(|s| {
            cones.theta_u
                - crate::torus::line_angle(&s.tangent, &cones.eu).unwrap_or(std::f64::consts::PI)
        })
        .fold(f64::INFINITY, f64::min);
    let q = gamma.order - 2;
    let jet_margins: Vec<f64> = (0..q)
        .map(|j| {
            let bound = k.get(j + 2).unwrap_or(f64::INFINITY);
            gamma
                .samples
                .iter()
                .map(|s| bound - s.jets[j].abs())
                .fold(f64::INFINITY, f64::min)
        })
        .collect();
    let lipschitz_margin = k.get(gamma.order).unwrap_or(f64::INFINITY) - gamma.lip_top;
    let pass =
        cone_margin >= 0.0 && jet_margins.iter().all(|m| *m >= 0.0) && lipschitz_margin >= 0.0;
    AdmissibilityReport {
        cone_margin,
        jet_margins,
        lipschitz_margin,
        pass,
    }
}

/// Jet of `F^n_* gamma` at the image of one sample, together with the
/// accumulated `log D_*F^n` and `log |det DF^n|`.
pub fn iterate_jet(
    f: &dyn Endomorphism,
    sample: &JetSample,
    n: usize,
) -> Result<(JetSample, f64, f64)> {
    let mut s = sample.clone();
    let mut log_lower = 0.0;
    let mut log_det = 0.0;
    for _ in 0..n {
        let img = image_jet(f, &s)?;
        log_lower += img.speed.ln();
        log_det += f.jacobian(&s.point).det().abs().ln();
        s = JetSample {
            t: s.t,
            point: img.point,
            tangent: img.tangent,
            jets: img.jets,
        };
    }
    Ok((s, log_lower, log_det))
}

/// Empirical constants for which the `n`-step transport of the trial curves
/// closes: `|d^k| <= q K + R` with `q < 1`.
pub fn estimate_admissibility_constants(
    f: &dyn Endomorphism,
    budget: &crate::models::HyperbolicityBudget,
    trial_curves: &[JetCurve],
    n: usize,
) -> Result<AdmissibilityConstants> {
    if n < budget.n_g {
        return Err(Error::Precondition(format!(
            "n = {n} is below the iterate threshold {}",
            budget.n_g
        )));
    }
    let order = trial_curves
        .first()
        .map(|c| c.order)
        .ok_or_else(|| Error::Parameter("no trial curves".into()))?;
    let q = order - 2;
    let mut q_obs = vec![0.0f64; q + 1];
    let mut r_obs = vec![0.0f64; q + 1];
    for curve in trial_curves {
        for s in &curve.samples {
            let (img, log_lower, log_det) = iterate_jet(f, s, n)?;
            for j in 0..q {
                let k = j + 2;
                let rho_log = log_det - (k as f64 + 1.0) * log_lower;
                let rho = rho_log.exp();
                q_obs[j] = q_obs[j].max(rho);
                r_obs[j] = r_obs[j].max((img.jets[j] - rho * s.jets[j]).abs());
            }
            let rho_top = (log_det - (order as f64 + 1.0) * log_lower).exp();
            q_obs[q] = q_obs[q].max(rho_top);
        }
    }
    let pushed = trial_curves
        .iter()
        .map(|c| pushforward_curve(f, c, n))
        .collect::<Result<Vec<_>>>()?;
    for (curve, pieces) in trial_curves.iter().zip(&pushed) {
        for p in pieces {
            r_obs[q] = r_obs[q].max(p.curve.lip_top - q_obs[q] * curve.lip_top);
        }
    }
    let mut bounds = Vec::with_capacity(q + 1);
    for j in 0..=q {
        if q_obs[j] >= 1.0 {
            return Err(Error::NoContraction {
                order: j + 2,
                q: q_obs[j],
            });
        }
        let k = SAFETY * r_obs[j].max(0.0) / (1.0 - q_obs[j]);
        bounds.push(k.max(SAFETY));
    }
    AdmissibilityConstants::new(bounds)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DistortionReport {
    pub min_rate: f64,
    pub distortion: f64,
}

/// `min p_n'` and `sup |log p_n'(t) - log p_n'(s)|` over samples.
pub fn distortion_report(
    f: &dyn Endomorphism,
    gamma: &JetCurve,
    n: usize,
) -> Result<DistortionReport> {
    let pieces = pushforward_curve(f, gamma, n)?;
    let rates = pieces.iter().flat_map(|p| p.log_rate.iter().copied());
    let (lo, hi) = rates.fold((f64::INFINITY, f64::NEG_INFINITY), |(lo, hi), r| {
        (lo.min(r), hi.max(r))
    });
    Ok(DistortionReport {
        min_rate: lo.exp(),
        distortion: hi - lo,
    })
}

/// Total length of a list of pushed pieces.
pub fn total_length(pieces: &[PushedCurve]) -> f64 {
    pieces.iter().map(|p| p.curve.length()).sum()
}
