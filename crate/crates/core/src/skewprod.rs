//! Piecewise affine skew product `(x, y) -> (d x, a_i x + b_i y + c_i)` on
//! `[0, 1) x R`, with an exact transfer operator acting on sums of
//! line-constant functions and an independent grid discretisation.
//!
//! A piece `(k, g)` stands for `psi(x, y) = g(y - k x)`. Branch `i` sends it to
//! `(k', g~)` with `k' = (a_i + b_i k) / d` and
//! `g~(u) = g((u - k' i - c_i) / b_i) / (d |b_i|)`: substitute `x = (x' + i) / d`
//! and `y = (y' - a_i x - c_i) / b_i` into `g(y - k x)` and divide by the
//! Jacobian `d |b_i|`.

use std::fmt::Write as _;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Piece budget of the exact engine before merging.
pub const EXACT_PIECE_CAP: usize = 100_000;
const SLOPE_SLACK: f64 = 1e-12;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SkewParams {
    pub d: usize,
    pub a: Vec<f64>,
    pub b: Vec<f64>,
    pub c: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ValidationReport {
    pub theta: f64,
    pub b_max: f64,
    /// `d - max |b_i|`.
    pub partial_hyperbolicity: f64,
    /// `min |b_i| - 1/d`.
    pub volume_expansion: f64,
    /// `-sum log |b_i|`.
    pub dissipation: f64,
    /// `min_{i != i'} |a_i - a_i'| - 3 theta b_max`.
    pub transversality: f64,
    pub pass: bool,
}

impl SkewParams {
    pub fn new(d: usize, a: Vec<f64>, b: Vec<f64>, c: Vec<f64>) -> Result<Self> {
        if d < 2 {
            return Err(Error::Parameter(format!("degree {d} < 2")));
        }
        if a.len() != d || b.len() != d || c.len() != d {
            return Err(Error::Parameter("a, b, c must each have d entries".into()));
        }
        if b.iter().any(|v| *v == 0.0 || !v.is_finite())
            || a.iter().chain(&c).any(|v| !v.is_finite())
        {
            return Err(Error::Parameter(
                "coefficients must be finite with b_i != 0".into(),
            ));
        }
        Ok(SkewParams { d, a, b, c })
    }

    /// `d = 2, a = (1, -1), b = (0.6, 0.6), c = (0, 0)`.
    pub fn reference() -> Self {
        SkewParams::new(2, vec![1.0, -1.0], vec![0.6, 0.6], vec![0.0, 0.0]).expect("valid")
    }

    pub fn theta(&self) -> f64 {
        self.a
            .iter()
            .zip(&self.b)
            .map(|(a, b)| a.abs() / (self.d as f64 - b.abs()))
            .fold(0.0, f64::max)
    }

    pub fn b_max(&self) -> f64 {
        self.b.iter().map(|b| b.abs()).fold(0.0, f64::max)
    }

    pub fn b_min(&self) -> f64 {
        self.b.iter().map(|b| b.abs()).fold(f64::INFINITY, f64::min)
    }

    pub fn validate(&self) -> ValidationReport {
        let d = self.d as f64;
        let theta = self.theta();
        let b_max = self.b_max();
        let mut gap = f64::INFINITY;
        for i in 0..self.d {
            for j in (i + 1)..self.d {
                gap = gap.min((self.a[i] - self.a[j]).abs());
            }
        }
        let report = ValidationReport {
            theta,
            b_max,
            partial_hyperbolicity: d - b_max,
            volume_expansion: self.b_min() - 1.0 / d,
            dissipation: -self.b.iter().map(|b| b.abs().ln()).sum::<f64>(),
            transversality: gap - 3.0 * theta * b_max,
            pass: false,
        };
        let pass = report.partial_hyperbolicity > 0.0
            && report.volume_expansion > 0.0
            && report.dissipation > 0.0
            && report.transversality > 0.0;
        ValidationReport { pass, ..report }
    }

    /// `d^{-1} sum log |b_i|`.
    pub fn central_exponent(&self) -> f64 {
        self.b.iter().map(|b| b.abs().ln()).sum::<f64>() / self.d as f64
    }

    fn check_slope(&self, k: f64) -> Result<()> {
        let theta = self.theta();
        if k.abs() > theta * (1.0 + SLOPE_SLACK) {
            return Err(Error::Domain(format!("slope {k} exceeds theta = {theta}")));
        }
        Ok(())
    }

    /// Slope of the image of a line of slope `k` under branch `i`.
    pub fn branch_slope(&self, i: usize, k: f64) -> Result<f64> {
        if i >= self.d {
            return Err(Error::Domain(format!("branch {i} out of range")));
        }
        self.check_slope(k)?;
        Ok((self.a[i] + self.b[i] * k) / self.d as f64)
    }

    /// Bound on `|y - k x|` over the supports of all iterates of a function
    /// whose profiles lie in `[-radius, radius]`.
    pub fn support_radius(&self, radius: f64) -> Result<f64> {
        let b_max = self.b_max();
        if b_max >= 1.0 {
            return Err(Error::Parameter("support bound needs max |b_i| < 1".into()));
        }
        let c_max = self.c.iter().map(|c| c.abs()).fold(0.0, f64::max);
        Ok((self.theta() * (self.d as f64 - 1.0) + c_max) / (1.0 - b_max) + radius)
    }

    /// Half-width of the y-window used by the grid operator: the invariant
    /// strip bound with a 20% margin.
    pub fn y_window(&self, radius: f64) -> Result<f64> {
        let b_max = self.b_max();
        if b_max >= 1.0 {
            return Err(Error::Parameter("window needs max |b_i| < 1".into()));
        }
        let d = self.d as f64;
        let drift = (0..self.d)
            .map(|i| self.a[i].abs() * (i as f64 + 1.0) / d + self.c[i].abs())
            .fold(0.0, f64::max);
        Ok(1.2 * radius.max(drift / (1.0 - b_max)))
    }
}

/// Compactly supported continuous piecewise-linear function of one variable,
/// vanishing at both ends of its support.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Profile {
    knots: Vec<f64>,
    values: Vec<f64>,
}

impl Profile {
    pub fn new(knots: Vec<f64>, values: Vec<f64>) -> Result<Self> {
        if knots.len() != values.len() || knots.len() < 2 {
            return Err(Error::Parameter(
                "profile needs matching knots and values, at least two".into(),
            ));
        }
        if knots.windows(2).any(|w| !(w[0] < w[1])) {
            return Err(Error::Parameter(
                "profile knots must strictly increase".into(),
            ));
        }
        if values[0] != 0.0 || *values.last().expect("nonempty") != 0.0 {
            return Err(Error::Parameter(
                "profile must vanish at its end knots".into(),
            ));
        }
        if knots.iter().chain(&values).any(|v| !v.is_finite()) {
            return Err(Error::Parameter("profile entries must be finite".into()));
        }
        Ok(Profile { knots, values })
    }

    /// Tent of height `height` on `[centre - half_width, centre + half_width]`.
    pub fn tent(centre: f64, half_width: f64, height: f64) -> Result<Self> {
        Profile::new(
            vec![centre - half_width, centre, centre + half_width],
            vec![0.0, height, 0.0],
        )
    }

    pub fn knots(&self) -> &[f64] {
        &self.knots
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn support(&self) -> (f64, f64) {
        (self.knots[0], *self.knots.last().expect("nonempty"))
    }

    pub fn is_nonnegative(&self) -> bool {
        self.values.iter().all(|v| *v >= 0.0)
    }

    pub fn eval(&self, u: f64) -> f64 {
        let (lo, hi) = self.support();
        if !(u > lo && u < hi) {
            return 0.0;
        }
        let j = self.knots.partition_point(|k| *k <= u) - 1;
        let (x0, x1) = (self.knots[j], self.knots[j + 1]);
        let t = (u - x0) / (x1 - x0);
        self.values[j] + t * (self.values[j + 1] - self.values[j])
    }

    pub fn integral(&self) -> f64 {
        self.knots
            .windows(2)
            .zip(self.values.windows(2))
            .map(|(x, v)| 0.5 * (x[1] - x[0]) * (v[0] + v[1]))
            .sum()
    }

    pub fn abs_integral(&self) -> f64 {
        self.knots
            .windows(2)
            .zip(self.values.windows(2))
            .map(|(x, v)| {
                let h = x[1] - x[0];
                if v[0] * v[1] >= 0.0 {
                    0.5 * h * (v[0].abs() + v[1].abs())
                } else {
                    0.5 * h * (v[0] * v[0] + v[1] * v[1]) / (v[0].abs() + v[1].abs())
                }
            })
            .sum()
    }

    /// `u -> scale * g((u - shift) / stretch)`.
    pub fn affine_image(&self, stretch: f64, shift: f64, scale: f64) -> Profile {
        let mut pairs: Vec<(f64, f64)> = self
            .knots
            .iter()
            .zip(&self.values)
            .map(|(k, v)| (stretch * k + shift, scale * v))
            .collect();
        if stretch < 0.0 {
            pairs.reverse();
        }
        Profile {
            knots: pairs.iter().map(|p| p.0).collect(),
            values: pairs.iter().map(|p| p.1).collect(),
        }
    }

    pub fn scaled(&self, s: f64) -> Profile {
        Profile {
            knots: self.knots.clone(),
            values: self.values.iter().map(|v| v * s).collect(),
        }
    }

    /// Pointwise sum on the union of knots.
    pub fn add(&self, other: &Profile) -> Profile {
        let mut knots: Vec<f64> = self.knots.iter().chain(&other.knots).copied().collect();
        knots.sort_by(f64::total_cmp);
        knots.dedup();
        let values = knots
            .iter()
            .map(|u| self.eval(*u) + other.eval(*u))
            .collect();
        Profile { knots, values }
    }

    /// Sum of `|jump in slope|` over all knots.
    pub fn kink_mass(&self) -> f64 {
        let slopes: Vec<f64> = self
            .knots
            .windows(2)
            .zip(self.values.windows(2))
            .map(|(x, v)| (v[1] - v[0]) / (x[1] - x[0]))
            .collect();
        let mut total = slopes[0].abs() + slopes.last().expect("nonempty").abs();
        total += slopes.windows(2).map(|s| (s[1] - s[0]).abs()).sum::<f64>();
        total
    }

    fn antiderivative(&self) -> Antiderivative<'_> {
        let mut cum = Vec::with_capacity(self.knots.len());
        let mut acc = 0.0;
        cum.push(0.0);
        for (x, v) in self.knots.windows(2).zip(self.values.windows(2)) {
            acc += 0.5 * (x[1] - x[0]) * (v[0] + v[1]);
            cum.push(acc);
        }
        Antiderivative { profile: self, cum }
    }
}

struct Antiderivative<'a> {
    profile: &'a Profile,
    cum: Vec<f64>,
}

impl Antiderivative<'_> {
    fn eval(&self, t: f64) -> f64 {
        let p = self.profile;
        let (lo, hi) = p.support();
        if t <= lo {
            return 0.0;
        }
        if t >= hi {
            return *self.cum.last().expect("nonempty");
        }
        let j = p.knots.partition_point(|k| *k <= t) - 1;
        let h = t - p.knots[j];
        let slope = (p.values[j + 1] - p.values[j]) / (p.knots[j + 1] - p.knots[j]);
        self.cum[j] + h * (p.values[j] + 0.5 * slope * h)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SlopeProfile {
    pub slope: f64,
    pub profile: Profile,
}

impl SlopeProfile {
    pub fn new(slope: f64, profile: Profile) -> Self {
        SlopeProfile { slope, profile }
    }

    pub fn eval(&self, x: f64, y: f64) -> f64 {
        self.profile.eval(y - self.slope * x)
    }
}

/// Exact `int_0^1 int g1(y - k1 x) g2(y - k2 x) dy dx`.
///
/// With `D = k1 - k2` this is `int g1(u) (G2(u + D) - G2(u)) / D du`, a
/// piecewise cubic between the knots of `g1`, `g2` and `g2 - D`, so Simpson's
/// rule on the merged knots is exact.
pub fn l2_pairing(p1: &SlopeProfile, p2: &SlopeProfile) -> f64 {
    let delta = p1.slope - p2.slope;
    let (g1, g2) = (&p1.profile, &p2.profile);
    let (lo1, hi1) = g1.support();
    let (lo2, hi2) = g2.support();
    let shift_lo = delta.min(0.0);
    let shift_hi = delta.max(0.0);
    let lo = lo1.max(lo2 - shift_hi);
    let hi = hi1.min(hi2 - shift_lo);
    if !(lo < hi) {
        return 0.0;
    }
    let mut knots: Vec<f64> = g1.knots.iter().chain(&g2.knots).copied().collect();
    if delta != 0.0 {
        knots.extend(g2.knots.iter().map(|k| k - delta));
    }
    knots.retain(|k| *k > lo && *k < hi);
    knots.push(lo);
    knots.push(hi);
    knots.sort_by(f64::total_cmp);
    knots.dedup();
    let integrand: Box<dyn Fn(f64) -> f64> = if delta == 0.0 {
        Box::new(|u| g1.eval(u) * g2.eval(u))
    } else {
        let anti = g2.antiderivative();
        Box::new(move |u| g1.eval(u) * (anti.eval(u + delta) - anti.eval(u)) / delta)
    };
    knots
        .windows(2)
        .map(|w| {
            let (a, b) = (w[0], w[1]);
            (b - a) / 6.0 * (integrand(a) + 4.0 * integrand(0.5 * (a + b)) + integrand(b))
        })
        .sum()
}

/// Finite sum of line-constant pieces.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct StripFunction {
    pub pieces: Vec<SlopeProfile>,
}

impl StripFunction {
    pub fn new(pieces: Vec<SlopeProfile>) -> Self {
        StripFunction { pieces }
    }

    pub fn zero() -> Self {
        StripFunction::default()
    }

    /// `psi(x, y) = g(y)`.
    pub fn line_constant(g: Profile) -> Self {
        StripFunction::new(vec![SlopeProfile::new(0.0, g)])
    }

    /// Unit-mass tent `1 - |y|` on `[-1, 1]`.
    pub fn unit_tent() -> Self {
        StripFunction::line_constant(Profile::tent(0.0, 1.0, 1.0).expect("valid tent"))
    }

    pub fn len(&self) -> usize {
        self.pieces.len()
    }

    pub fn is_empty(&self) -> bool {
        self.pieces.is_empty()
    }

    pub fn eval(&self, x: f64, y: f64) -> f64 {
        self.pieces.iter().map(|p| p.eval(x, y)).sum()
    }

    /// `sum_j int g_j`, the L1 norm when every piece is nonnegative.
    pub fn mass(&self) -> f64 {
        self.pieces.iter().map(|p| p.profile.integral()).sum()
    }

    pub fn l1_norm(&self) -> f64 {
        if self.pieces.iter().all(|p| p.profile.is_nonnegative()) {
            self.mass()
        } else {
            self.pieces.iter().map(|p| p.profile.abs_integral()).sum()
        }
    }

    pub fn l2_norm_sq(&self) -> f64 {
        let n = self.pieces.len();
        let mut total = 0.0;
        for i in 0..n {
            total += l2_pairing(&self.pieces[i], &self.pieces[i]);
            for j in (i + 1)..n {
                total += 2.0 * l2_pairing(&self.pieces[i], &self.pieces[j]);
            }
        }
        total
    }

    pub fn max_abs_slope(&self) -> f64 {
        self.pieces
            .iter()
            .map(|p| p.slope.abs())
            .fold(0.0, f64::max)
    }

    /// Largest `|u|` reached by any profile support.
    pub fn support_radius(&self) -> f64 {
        self.pieces
            .iter()
            .map(|p| {
                let (lo, hi) = p.profile.support();
                lo.abs().max(hi.abs())
            })
            .fold(0.0, f64::max)
    }

    pub fn scaled(&self, s: f64) -> Self {
        StripFunction::new(
            self.pieces
                .iter()
                .map(|p| SlopeProfile::new(p.slope, p.profile.scaled(s)))
                .collect(),
        )
    }

    pub fn extend(&mut self, other: StripFunction) {
        self.pieces.extend(other.pieces);
    }

    /// Sum pieces of bit-identical slope.
    pub fn merged(self) -> Self {
        let mut pieces: Vec<SlopeProfile> = self.pieces;
        pieces.sort_by(|p, q| p.slope.total_cmp(&q.slope));
        let mut out: Vec<SlopeProfile> = Vec::with_capacity(pieces.len());
        for p in pieces {
            match out.last_mut() {
                Some(last) if last.slope == p.slope => last.profile = last.profile.add(&p.profile),
                _ => out.push(p),
            }
        }
        StripFunction::new(out)
    }
}

/// Image of one branch's restriction.
pub fn apply_branch(p: &SkewParams, i: usize, psi: &StripFunction) -> Result<StripFunction> {
    let d = p.d as f64;
    let pieces = psi
        .pieces
        .iter()
        .map(|piece| {
            let k_new = p.branch_slope(i, piece.slope)?;
            let shift = k_new * i as f64 + p.c[i];
            let profile = piece
                .profile
                .affine_image(p.b[i], shift, 1.0 / (d * p.b[i].abs()));
            Ok(SlopeProfile::new(k_new, profile))
        })
        .collect::<Result<Vec<_>>>()?;
    Ok(StripFunction::new(pieces))
}

/// Exact transfer operator; the piece count is multiplied by `d`.
pub fn apply_transfer(p: &SkewParams, psi: &StripFunction) -> Result<StripFunction> {
    let mut out = StripFunction::zero();
    for i in 0..p.d {
        out.extend(apply_branch(p, i, psi)?);
    }
    Ok(out)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct LyCheck {
    pub lhs: f64,
    pub rhs: f64,
    pub pass: bool,
}

impl LyCheck {
    pub fn margin(&self) -> f64 {
        self.rhs - self.lhs
    }
}

/// `||P psi||_2^2 <= ||psi||_2^2 / (d min|b|) + d ||psi||_1^2 / (theta b_max)`.
pub fn verify_ly_inequality(p: &SkewParams, psi: &StripFunction) -> Result<LyCheck> {
    let image = apply_transfer(p, psi)?;
    Ok(ly_check_with_image(p, psi, &image))
}

fn ly_check_with_image(p: &SkewParams, psi: &StripFunction, image: &StripFunction) -> LyCheck {
    let lhs = image.l2_norm_sq();
    let rhs = ly_rhs(p, psi.l2_norm_sq(), psi.l1_norm());
    LyCheck {
        lhs,
        rhs,
        pass: lhs <= rhs,
    }
}

fn ly_rhs(p: &SkewParams, l2_sq: f64, l1: f64) -> f64 {
    let d = p.d as f64;
    l2_sq / (d * p.b_min()) + d / (p.theta() * p.b_max()) * l1 * l1
}

/// Coefficients `(q, C)` of the inequality, `q = 1/(d min|b|)` and `C = d/(theta b_max)`.
pub fn ly_coefficients(p: &SkewParams) -> (f64, f64) {
    let d = p.d as f64;
    (1.0 / (d * p.b_min()), d / (p.theta() * p.b_max()))
}

/// `q^n ||psi_0||_2^2 + C ||psi_0||_1^2 sum_{m<n} q^m`.
pub fn geometric_l2_bound(p: &SkewParams, l2_sq0: f64, l1: f64, n: usize) -> f64 {
    let (q, c) = ly_coefficients(p);
    let tail: f64 = (0..n).map(|m| q.powi(m as i32)).sum();
    q.powi(n as i32) * l2_sq0 + c * l1 * l1 * tail
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct IterateRow {
    pub n: usize,
    pub pieces: usize,
    pub mass: f64,
    pub l2_sq: f64,
    /// Left and right side of the inequality for the step `n -> n + 1`.
    pub ly: Option<LyCheck>,
    pub geometric_bound: f64,
}

/// Iterates `psi, P psi, ..., P^n psi` with the per-step inequality check.
pub fn iterate_ladder(p: &SkewParams, psi0: &StripFunction, n: usize) -> Result<Vec<IterateRow>> {
    check_initial(p, psi0)?;
    let l2_0 = psi0.l2_norm_sq();
    let l1_0 = psi0.l1_norm();
    let mut rows = Vec::with_capacity(n + 1);
    let mut psi = psi0.clone();
    let mut l2 = l2_0;
    for m in 0..=n {
        let next = if m < n {
            Some(transfer_capped(p, &psi)?)
        } else {
            None
        };
        let next_l2 = next.as_ref().map(|s| s.l2_norm_sq());
        let ly = next_l2.map(|lhs| {
            let rhs = ly_rhs(p, l2, psi.l1_norm());
            LyCheck {
                lhs,
                rhs,
                pass: lhs <= rhs,
            }
        });
        rows.push(IterateRow {
            n: m,
            pieces: psi.len(),
            mass: psi.mass(),
            l2_sq: l2,
            ly,
            geometric_bound: geometric_l2_bound(p, l2_0, l1_0, m),
        });
        if let (Some(s), Some(v)) = (next, next_l2) {
            psi = s;
            l2 = v;
        }
    }
    Ok(rows)
}

fn check_initial(p: &SkewParams, psi: &StripFunction) -> Result<()> {
    for piece in &psi.pieces {
        p.check_slope(piece.slope)?;
    }
    Ok(())
}

fn transfer_capped(p: &SkewParams, psi: &StripFunction) -> Result<StripFunction> {
    if psi.len() * p.d > EXACT_PIECE_CAP {
        return Err(Error::Resource(format!(
            "exact transfer would need {} pieces (cap {EXACT_PIECE_CAP}); use grid mode",
            psi.len() * p.d
        )));
    }
    Ok(apply_transfer(p, psi)?.merged())
}

/// Node grid on `[0, 1] x [-y_half, y_half]`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StripGrid {
    nx: usize,
    ny: usize,
    y_half: f64,
    values: Vec<f64>,
}

impl StripGrid {
    pub fn zeros(nx: usize, ny: usize, y_half: f64) -> Result<Self> {
        if nx == 0 || ny == 0 || !(y_half > 0.0) {
            return Err(Error::Parameter(
                "grid needs positive resolution and window".into(),
            ));
        }
        Ok(StripGrid {
            nx,
            ny,
            y_half,
            values: vec![0.0; (nx + 1) * (ny + 1)],
        })
    }

    pub fn sample(nx: usize, ny: usize, y_half: f64, f: impl Fn(f64, f64) -> f64) -> Result<Self> {
        let mut g = StripGrid::zeros(nx, ny, y_half)?;
        for i in 0..=nx {
            let x = g.x(i);
            for j in 0..=ny {
                let y = g.y(j);
                g.values[i * (ny + 1) + j] = f(x, y);
            }
        }
        Ok(g)
    }

    pub fn from_strip(psi: &StripFunction, nx: usize, ny: usize, y_half: f64) -> Result<Self> {
        StripGrid::sample(nx, ny, y_half, |x, y| psi.eval(x, y))
    }

    pub fn nx(&self) -> usize {
        self.nx
    }

    pub fn ny(&self) -> usize {
        self.ny
    }

    pub fn y_half(&self) -> f64 {
        self.y_half
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn hx(&self) -> f64 {
        1.0 / self.nx as f64
    }

    pub fn hy(&self) -> f64 {
        2.0 * self.y_half / self.ny as f64
    }

    pub fn x(&self, i: usize) -> f64 {
        i as f64 * self.hx()
    }

    pub fn y(&self, j: usize) -> f64 {
        -self.y_half + j as f64 * self.hy()
    }

    pub fn get(&self, i: usize, j: usize) -> f64 {
        self.values[i * (self.ny + 1) + j]
    }

    /// Bilinear interpolation, zero outside the window.
    pub fn interpolate(&self, x: f64, y: f64) -> f64 {
        let fy = (y + self.y_half) / self.hy();
        if !(0.0..=self.ny as f64).contains(&fy) {
            return 0.0;
        }
        let fx = (x * self.nx as f64).clamp(0.0, self.nx as f64);
        let i = (fx.floor() as usize).min(self.nx - 1);
        let j = (fy.floor() as usize).min(self.ny - 1);
        let tx = fx - i as f64;
        let ty = fy - j as f64;
        let v00 = self.get(i, j);
        let v01 = self.get(i, j + 1);
        let v10 = self.get(i + 1, j);
        let v11 = self.get(i + 1, j + 1);
        (1.0 - tx) * ((1.0 - ty) * v00 + ty * v01) + tx * ((1.0 - ty) * v10 + ty * v11)
    }

    fn trapezoid(&self, f: impl Fn(f64) -> f64) -> f64 {
        let mut total = 0.0;
        for i in 0..=self.nx {
            let wx = if i == 0 || i == self.nx { 0.5 } else { 1.0 };
            for j in 0..=self.ny {
                let wy = if j == 0 || j == self.ny { 0.5 } else { 1.0 };
                total += wx * wy * f(self.values[i * (self.ny + 1) + j]);
            }
        }
        total * self.hx() * self.hy()
    }

    pub fn mass(&self) -> f64 {
        self.trapezoid(|v| v)
    }

    pub fn l1_norm(&self) -> f64 {
        self.trapezoid(f64::abs)
    }

    /// Trapezoid L1 distance between two grids on the same nodes.
    pub fn l1_distance(&self, other: &StripGrid) -> Result<f64> {
        if self.nx != other.nx || self.ny != other.ny || self.y_half != other.y_half {
            return Err(Error::Parameter("grids differ".into()));
        }
        let diff = StripGrid {
            values: self
                .values
                .iter()
                .zip(&other.values)
                .map(|(a, b)| a - b)
                .collect(),
            ..self.clone()
        };
        Ok(diff.l1_norm())
    }

    /// Pullback quadrature `sum_i v(F_i^{-1}(x, y)) / (d |b_i|)` at every node.
    pub fn transfer(&self, p: &SkewParams) -> StripGrid {
        let d = p.d as f64;
        let mut out = StripGrid {
            values: vec![0.0; self.values.len()],
            ..self.clone()
        };
        for ix in 0..=self.nx {
            let x_new = self.x(ix);
            for jy in 0..=self.ny {
                let y_new = self.y(jy);
                let mut acc = 0.0;
                for i in 0..p.d {
                    let x = (x_new + i as f64) / d;
                    let y = (y_new - p.a[i] * x - p.c[i]) / p.b[i];
                    acc += self.interpolate(x, y) / (d * p.b[i].abs());
                }
                out.values[ix * (self.ny + 1) + jy] = acc;
            }
        }
        out
    }

    pub fn add_scaled(&mut self, other: &StripGrid, s: f64) {
        for (a, b) in self.values.iter_mut().zip(&other.values) {
            *a += s * b;
        }
    }

    pub fn to_csv(&self) -> String {
        let mut out = String::from("x,y,value\n");
        for i in 0..=self.nx {
            for j in 0..=self.ny {
                let _ = writeln!(
                    out,
                    "{:.16e},{:.16e},{:.16e}",
                    self.x(i),
                    self.y(j),
                    self.get(i, j)
                );
            }
        }
        out
    }
}

/// L1 interpolation error bound for bilinear sampling of `psi` with cell
/// sizes `hx`, `hy`: each kink of slope jump `J` along a line of slope `k`
/// contributes `|J| (|k| hx + hy)^2 / 4`.
pub fn interpolation_bound(psi: &StripFunction, hx: f64, hy: f64) -> f64 {
    psi.pieces
        .iter()
        .map(|p| {
            let w = p.slope.abs() * hx + hy;
            p.profile.kink_mass() * w * w / 4.0
        })
        .sum()
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum DensityMode {
    Exact,
    Grid,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DensityDiagnostics {
    pub mode: DensityMode,
    pub iterations: usize,
    /// `||P^m psi_0||_2^2` for `m < N` (exact mode) or their trapezoid values.
    pub l2_norms: Vec<f64>,
    /// `||C_{m+1} - C_m||_1` on the diagnostic grid.
    pub cesaro_differences: Vec<f64>,
    pub masses: Vec<f64>,
    pub central_exponent: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub enum DensityEstimate {
    Exact(StripFunction),
    Grid(StripGrid),
}

impl DensityEstimate {
    pub fn eval(&self, x: f64, y: f64) -> f64 {
        match self {
            DensityEstimate::Exact(s) => s.eval(x, y),
            DensityEstimate::Grid(g) => g.interpolate(x, y),
        }
    }
}

/// Resolution of the grid used for Cesàro differences and grid mode.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct GridSpec {
    pub nx: usize,
    pub ny: usize,
    pub y_half: f64,
}

/// Cesàro average `N^{-1} sum_{m<N} P^m psi_0`.
pub fn invariant_density(
    p: &SkewParams,
    psi0: &StripFunction,
    n: usize,
    mode: DensityMode,
    grid: GridSpec,
) -> Result<(DensityEstimate, DensityDiagnostics)> {
    if n == 0 {
        return Err(Error::Parameter("need at least one iterate".into()));
    }
    check_initial(p, psi0)?;
    let nf = n as f64;
    let mut l2_norms = Vec::with_capacity(n);
    let mut masses = Vec::with_capacity(n);
    let mut differences = Vec::with_capacity(n.saturating_sub(1));
    let mut running = StripGrid::zeros(grid.nx, grid.ny, grid.y_half)?;
    let mut track = |m: usize, sample: &StripGrid, running: &mut StripGrid| {
        if m == 0 {
            running.add_scaled(sample, 1.0);
            return;
        }
        // C_{m+1} - C_m = (P^m psi - C_m) / (m + 1)
        let mut diff = sample.clone();
        diff.add_scaled(running, -1.0);
        differences.push(diff.l1_norm() / (m as f64 + 1.0));
        let w = 1.0 / (m as f64 + 1.0);
        for (c, s) in running.values.iter_mut().zip(&sample.values) {
            *c += w * (s - *c);
        }
    };
    match mode {
        DensityMode::Exact => {
            if p.d
                .checked_pow((n - 1) as u32)
                .is_none_or(|c| c.saturating_mul(psi0.len()) > EXACT_PIECE_CAP)
            {
                return Err(Error::Resource(format!(
                    "exact mode with N = {n} exceeds the piece cap {EXACT_PIECE_CAP}; use grid mode"
                )));
            }
            let mut psi = psi0.clone();
            let mut average = StripFunction::zero();
            for m in 0..n {
                l2_norms.push(psi.l2_norm_sq());
                masses.push(psi.mass());
                let sample = StripGrid::from_strip(&psi, grid.nx, grid.ny, grid.y_half)?;
                track(m, &sample, &mut running);
                average.extend(psi.scaled(1.0 / nf));
                if m + 1 < n {
                    psi = transfer_capped(p, &psi)?;
                }
            }
            let diagnostics = DensityDiagnostics {
                mode,
                iterations: n,
                l2_norms,
                cesaro_differences: differences,
                masses,
                central_exponent: p.central_exponent(),
            };
            Ok((DensityEstimate::Exact(average.merged()), diagnostics))
        }
        DensityMode::Grid => {
            let mut v = StripGrid::from_strip(psi0, grid.nx, grid.ny, grid.y_half)?;
            let mut average = StripGrid::zeros(grid.nx, grid.ny, grid.y_half)?;
            for m in 0..n {
                l2_norms.push(v.trapezoid(|t| t * t));
                masses.push(v.mass());
                track(m, &v, &mut running);
                average.add_scaled(&v, 1.0 / nf);
                if m + 1 < n {
                    v = v.transfer(p);
                }
            }
            let diagnostics = DensityDiagnostics {
                mode,
                iterations: n,
                l2_norms,
                cesaro_differences: differences,
                masses,
                central_exponent: p.central_exponent(),
            };
            Ok((DensityEstimate::Grid(average), diagnostics))
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ExactVsGrid {
    pub iterations: usize,
    pub l1_distance: f64,
    /// Cesàro average of the accumulated per-step interpolation bounds.
    pub mass_bound: f64,
    pub exact_mass: f64,
    pub grid_mass: f64,
    pub pass: bool,
}

/// Cross-validation of the exact and grid engines on the grid nodes.
pub fn exact_vs_grid(
    p: &SkewParams,
    psi0: &StripFunction,
    n: usize,
    grid: GridSpec,
) -> Result<ExactVsGrid> {
    let (exact, _) = invariant_density(p, psi0, n, DensityMode::Exact, grid)?;
    let (approx, _) = invariant_density(p, psi0, n, DensityMode::Grid, grid)?;
    let (DensityEstimate::Exact(exact), DensityEstimate::Grid(approx)) = (exact, approx) else {
        unreachable!("modes requested explicitly")
    };
    let exact_grid = StripGrid::from_strip(&exact, grid.nx, grid.ny, grid.y_half)?;
    let l1_distance = exact_grid.l1_distance(&approx)?;
    let hx = 1.0 / grid.nx as f64;
    let hy = 2.0 * grid.y_half / grid.ny as f64;
    let mut psi = psi0.clone();
    let mut accumulated = 0.0;
    let mut total = 0.0;
    for m in 0..n {
        accumulated += interpolation_bound(&psi, hx, hy);
        total += accumulated;
        if m + 1 < n {
            psi = transfer_capped(p, &psi)?;
        }
    }
    let mass_bound = total / n as f64;
    Ok(ExactVsGrid {
        iterations: n,
        l1_distance,
        mass_bound,
        exact_mass: exact_grid.mass(),
        grid_mass: approx.mass(),
        pass: l1_distance <= 2.0 * mass_bound,
    })
}
