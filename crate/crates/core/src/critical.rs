//! Critical sets as polylines: tracing by continuation along level curves
//! of the Jacobian determinant, and fast distance queries.

use serde::{Deserialize, Serialize};

use crate::error::Result;
use crate::models::Endomorphism;
use crate::series::Taylor2;
use crate::torus::{torus_dist, wrap_signed, TangentVector, TorusPoint};

const BUCKETS: usize = 64;

/// Union of polylines approximating `{det DF = 0}`.
#[derive(Debug, Clone, Default, Serialize, Deserialize)]
pub struct CriticalSet {
    polylines: Vec<Polyline>,
    resolution: f64,
    #[serde(skip)]
    buckets: Vec<Vec<(usize, usize)>>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Polyline {
    pub points: Vec<TorusPoint>,
    pub closed: bool,
}

impl Polyline {
    pub fn segments(&self) -> impl Iterator<Item = (TorusPoint, TorusPoint)> + '_ {
        let n = self.points.len();
        let count = if self.closed && n > 1 {
            n
        } else {
            n.saturating_sub(1)
        };
        (0..count).map(move |i| (self.points[i], self.points[(i + 1) % n]))
    }
}

/// Distance from `z` to the segment `[p, q]` on the torus, measured in the
/// chart centred at `p`. Valid for short segments.
fn segment_distance(z: &TorusPoint, p: &TorusPoint, q: &TorusPoint) -> f64 {
    let d = p.displacement_to(q);
    let w = p.displacement_to(z);
    let len2 = d.norm_sq();
    if len2 == 0.0 {
        return w.norm();
    }
    let t = (w.dot(&d) / len2).clamp(0.0, 1.0);
    (w - d * t).norm()
}

impl CriticalSet {
    pub fn empty() -> Self {
        CriticalSet::default()
    }

    pub fn from_polylines(lines: Vec<(Vec<TorusPoint>, bool)>, resolution: f64) -> Self {
        let polylines = lines
            .into_iter()
            .filter(|(p, _)| !p.is_empty())
            .map(|(points, closed)| Polyline { points, closed })
            .collect();
        let mut set = CriticalSet {
            polylines,
            resolution,
            buckets: Vec::new(),
        };
        set.rebuild_index();
        set
    }

    fn bucket_of(z: &TorusPoint) -> (usize, usize) {
        let b = BUCKETS as f64;
        (
            ((z.x() * b) as usize).min(BUCKETS - 1),
            ((z.y() * b) as usize).min(BUCKETS - 1),
        )
    }

    fn rebuild_index(&mut self) {
        self.buckets = vec![Vec::new(); BUCKETS * BUCKETS];
        for (li, line) in self.polylines.iter().enumerate() {
            for (si, (p, q)) in line.segments().enumerate() {
                // register at both ends and the midpoint; segments are
                // shorter than a bucket
                let mid = p.exp(p.displacement_to(&q) * 0.5);
                let mut cells = vec![
                    Self::bucket_of(&p),
                    Self::bucket_of(&q),
                    Self::bucket_of(&mid),
                ];
                cells.sort_unstable();
                cells.dedup();
                for (bx, by) in cells {
                    self.buckets[bx * BUCKETS + by].push((li, si));
                }
            }
            if line.points.len() == 1 {
                let (bx, by) = Self::bucket_of(&line.points[0]);
                self.buckets[bx * BUCKETS + by].push((li, usize::MAX));
            }
        }
    }

    pub fn is_empty(&self) -> bool {
        self.polylines.is_empty()
    }

    pub fn resolution(&self) -> f64 {
        self.resolution
    }

    pub fn polylines(&self) -> &[Polyline] {
        &self.polylines
    }

    pub fn points(&self) -> impl Iterator<Item = &TorusPoint> {
        self.polylines.iter().flat_map(|l| l.points.iter())
    }

    fn entry_distance(&self, z: &TorusPoint, li: usize, si: usize) -> f64 {
        let line = &self.polylines[li];
        if si == usize::MAX {
            return torus_dist(z, &line.points[0]);
        }
        let n = line.points.len();
        segment_distance(z, &line.points[si], &line.points[(si + 1) % n])
    }

    /// Distance to the set; 1 when the set is empty.
    pub fn distance(&self, z: &TorusPoint) -> f64 {
        if self.is_empty() {
            return 1.0;
        }
        if self.buckets.is_empty() {
            return self.brute_distance(z);
        }
        let (bx, by) = Self::bucket_of(z);
        let cell = 1.0 / BUCKETS as f64;
        let mut best = f64::INFINITY;
        let max_ring = BUCKETS / 2;
        for ring in 0..=max_ring {
            // segments may poke one cell beyond where they are registered
            if best < (ring as f64 - 2.0) * cell {
                break;
            }
            let r = ring as i64;
            for dx in -r..=r {
                for dy in -r..=r {
                    if dx.abs() != r && dy.abs() != r {
                        continue;
                    }
                    let cx = (bx as i64 + dx).rem_euclid(BUCKETS as i64) as usize;
                    let cy = (by as i64 + dy).rem_euclid(BUCKETS as i64) as usize;
                    for &(li, si) in &self.buckets[cx * BUCKETS + cy] {
                        best = best.min(self.entry_distance(z, li, si));
                    }
                }
            }
        }
        if best.is_finite() {
            best
        } else {
            self.brute_distance(z)
        }
    }

    fn brute_distance(&self, z: &TorusPoint) -> f64 {
        let mut best = f64::INFINITY;
        for line in &self.polylines {
            if line.points.len() == 1 {
                best = best.min(torus_dist(z, &line.points[0]));
            }
            for (p, q) in line.segments() {
                best = best.min(segment_distance(z, &p, &q));
            }
        }
        best
    }

    /// Closest vertex of the polylines to `z`.
    pub fn nearest_vertex(&self, z: &TorusPoint) -> Option<TorusPoint> {
        self.points()
            .min_by(|a, b| torus_dist(z, a).total_cmp(&torus_dist(z, b)))
            .copied()
    }
}

/// Taylor polynomial of `det DF` at `z` of the given order.
pub fn det_taylor(f: &dyn Endomorphism, z: &TorusPoint, order: usize) -> Result<Taylor2> {
    let [a, b] = f.taylor(z, order + 1)?;
    let (ax, ay, bx, by) = (a.diff_x(), a.diff_y(), b.diff_x(), b.diff_y());
    Ok(&(&ax * &by) - &(&ay * &bx))
}

fn det_value(f: &dyn Endomorphism, z: &TorusPoint) -> f64 {
    f.jacobian(z).det()
}

fn det_grad(f: &dyn Endomorphism, z: &TorusPoint) -> Option<(f64, TangentVector)> {
    let t = det_taylor(f, z, 1).ok()?;
    Some((
        t.coeff(0, 0),
        TangentVector::new(t.coeff(1, 0), t.coeff(0, 1)),
    ))
}

fn in_window(f: &dyn Endomorphism, z: &TorusPoint) -> bool {
    if f.is_global() {
        return true;
    }
    let [x, y] = z.signed_coords();
    x.abs() < 0.499 && y.abs() < 0.499
}

/// Newton projection onto the zero level set along the gradient.
fn project(f: &dyn Endomorphism, mut z: TorusPoint, tol: f64) -> Option<TorusPoint> {
    for _ in 0..30 {
        let (v, g) = det_grad(f, &z)?;
        let g2 = g.norm_sq();
        if g2 < 1e-20 {
            return None;
        }
        let step = g * (-v / g2);
        z = z.exp(step);
        if step.norm() < tol * 1e-3 {
            return (det_value(f, &z).abs() < tol * g2.sqrt()).then_some(z);
        }
    }
    None
}

/// Trace `{det DF = 0}` by sign-change seeding on a coarse grid followed by
/// predictor-corrector continuation with step `res`.
pub fn trace_critical_set(f: &dyn Endomorphism, res: f64) -> CriticalSet {
    const SEED_GRID: usize = 128;
    let h = 1.0 / SEED_GRID as f64;
    let at = |i: usize, j: usize| {
        let (x, y) = (i as f64 * h, j as f64 * h);
        if f.is_global() {
            TorusPoint::new(x, y)
        } else {
            TorusPoint::new(x - 0.5, y - 0.5)
        }
    };
    let mut vals = vec![0.0; SEED_GRID * SEED_GRID];
    for i in 0..SEED_GRID {
        for j in 0..SEED_GRID {
            vals[i * SEED_GRID + j] = det_value(f, &at(i, j));
        }
    }
    let mut seeds = Vec::new();
    let limit = if f.is_global() {
        SEED_GRID
    } else {
        SEED_GRID - 1
    };
    for i in 0..limit {
        for j in 0..limit {
            let v = vals[i * SEED_GRID + j];
            for (ni, nj) in [((i + 1) % SEED_GRID, j), (i, (j + 1) % SEED_GRID)] {
                let w = vals[ni * SEED_GRID + nj];
                if v == 0.0 || v * w < 0.0 {
                    let p = at(i, j);
                    let q = p.exp(p.displacement_to(&at(ni, nj)) * (v / (v - w)));
                    if let Some(s) = project(f, q, res) {
                        if in_window(f, &s) {
                            seeds.push(s);
                        }
                    }
                }
            }
        }
    }
    let mut lines: Vec<(Vec<TorusPoint>, bool)> = Vec::new();
    for seed in seeds {
        let covered = lines
            .iter()
            .any(|(pts, _)| pts.iter().any(|p| torus_dist(p, &seed) < 2.0 * res));
        if covered {
            continue;
        }
        let (fwd, closed) = continue_curve(f, seed, res, 1.0, &lines);
        let pts = if closed {
            fwd
        } else {
            let (mut back, _) = continue_curve(f, seed, res, -1.0, &lines);
            back.reverse();
            back.pop();
            back.extend(fwd);
            back
        };
        lines.push((pts, closed));
    }
    CriticalSet::from_polylines(lines, res)
}

fn continue_curve(
    f: &dyn Endomorphism,
    seed: TorusPoint,
    res: f64,
    sign: f64,
    existing: &[(Vec<TorusPoint>, bool)],
) -> (Vec<TorusPoint>, bool) {
    let max_steps = (20.0 / res) as usize;
    let mut pts = vec![seed];
    let mut z = seed;
    for step in 0..max_steps {
        let Some((_, g)) = det_grad(f, &z) else { break };
        let Ok(t) = TangentVector::new(g.vy, -g.vx).normalized() else {
            break;
        };
        let pred = z.exp(t * (res * sign));
        let Some(next) = project(f, pred, res) else {
            break;
        };
        if !in_window(f, &next) {
            break;
        }
        if step > 3 && torus_dist(&next, &seed) < res {
            return (pts, true);
        }
        let hit = existing
            .iter()
            .any(|(p, _)| p.iter().any(|q| torus_dist(q, &next) < 0.5 * res));
        pts.push(next);
        if hit {
            break;
        }
        z = next;
    }
    (pts, false)
}

/// Signed height of `z` above the horizontal circle `{y = 0}`.
pub fn signed_height(z: &TorusPoint) -> f64 {
    wrap_signed(z.y())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::models::{LinearMap, PolynomialMap};

    #[test]
    fn empty_set_distance_is_one() {
        let c = CriticalSet::empty();
        assert_eq!(c.distance(&TorusPoint::new(0.2, 0.3)), 1.0);
        assert!(LinearMap::cat().critical_set().is_empty());
    }

    #[test]
    fn bowl_critical_curve_is_parabola() {
        let bowl = PolynomialMap::bowl();
        let crit = bowl.critical_set();
        assert!(!crit.is_empty());
        for p in crit.points() {
            let [x, y] = p.signed_coords();
            assert!((y + x * x / 2.0).abs() < 1e-9, "({x},{y})");
        }
        let z = TorusPoint::new(0.0, 0.0);
        assert!(crit.distance(&z) < 1e-6);
        let above = TorusPoint::new(0.0, 0.05);
        assert!((crit.distance(&above) - 0.05).abs() < 1e-3);
    }

    #[test]
    fn bucket_distance_matches_brute_force() {
        let bowl = PolynomialMap::bowl();
        let crit = bowl.critical_set();
        for k in 0..50 {
            let z = TorusPoint::new(0.37 * k as f64, 0.113 * k as f64);
            assert!((crit.distance(&z) - crit.brute_distance(&z)).abs() < 1e-12);
        }
    }
}
