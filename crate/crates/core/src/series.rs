//! Truncated power series in one variable and truncated Taylor polynomials in
//! two variables. These carry every derivative computation along curves.

use std::ops::{Add, Mul, Neg, Sub};

/// Truncated power series `sum c_k t^k`, `k = 0..=order`.
#[derive(Debug, Clone, PartialEq)]
pub struct Series {
    coeffs: Vec<f64>,
}

impl Series {
    pub fn zero(order: usize) -> Self {
        Series {
            coeffs: vec![0.0; order + 1],
        }
    }

    pub fn constant(c: f64, order: usize) -> Self {
        let mut s = Series::zero(order);
        s.coeffs[0] = c;
        s
    }

    /// `c + t` truncated at `order`.
    pub fn variable(c: f64, order: usize) -> Self {
        let mut s = Series::constant(c, order);
        if order >= 1 {
            s.coeffs[1] = 1.0;
        }
        s
    }

    pub fn from_coeffs(coeffs: Vec<f64>) -> Self {
        assert!(!coeffs.is_empty(), "series needs at least one coefficient");
        Series { coeffs }
    }

    /// Series whose `k`-th derivative at 0 is `derivs[k]`.
    pub fn from_derivatives(derivs: &[f64]) -> Self {
        let mut fact = 1.0;
        let coeffs = derivs
            .iter()
            .enumerate()
            .map(|(k, d)| {
                if k > 0 {
                    fact *= k as f64;
                }
                d / fact
            })
            .collect();
        Series::from_coeffs(coeffs)
    }

    pub fn order(&self) -> usize {
        self.coeffs.len() - 1
    }

    pub fn coeffs(&self) -> &[f64] {
        &self.coeffs
    }

    pub fn coeff(&self, k: usize) -> f64 {
        self.coeffs.get(k).copied().unwrap_or(0.0)
    }

    pub fn set_coeff(&mut self, k: usize, v: f64) {
        self.coeffs[k] = v;
    }

    /// `k`-th derivative at the expansion point.
    pub fn derivative_at_zero(&self, k: usize) -> f64 {
        let f: f64 = (1..=k).map(|i| i as f64).product();
        self.coeff(k) * f
    }

    pub fn truncate(&self, order: usize) -> Series {
        let mut c = self.coeffs.clone();
        c.resize(order + 1, 0.0);
        Series { coeffs: c }
    }

    pub fn eval(&self, t: f64) -> f64 {
        self.coeffs.iter().rev().fold(0.0, |acc, c| acc * t + c)
    }

    /// Formal derivative; the order drops by one (never below zero).
    pub fn deriv(&self) -> Series {
        if self.coeffs.len() == 1 {
            return Series::zero(0);
        }
        Series {
            coeffs: (1..self.coeffs.len())
                .map(|k| self.coeffs[k] * k as f64)
                .collect(),
        }
    }

    /// Antiderivative with constant term `c0`; the order grows by one.
    pub fn integ(&self, c0: f64) -> Series {
        let mut coeffs = Vec::with_capacity(self.coeffs.len() + 1);
        coeffs.push(c0);
        coeffs.extend(
            self.coeffs
                .iter()
                .enumerate()
                .map(|(k, c)| c / (k + 1) as f64),
        );
        Series { coeffs }
    }

    pub fn scale(&self, s: f64) -> Series {
        Series {
            coeffs: self.coeffs.iter().map(|c| c * s).collect(),
        }
    }

    pub fn recip(&self) -> Series {
        let n = self.coeffs.len();
        let a0 = self.coeffs[0];
        let mut r = vec![0.0; n];
        r[0] = 1.0 / a0;
        for k in 1..n {
            let s: f64 = (1..=k).map(|j| self.coeffs[j] * r[k - j]).sum();
            r[k] = -s / a0;
        }
        Series { coeffs: r }
    }

    pub fn sqrt(&self) -> Series {
        let n = self.coeffs.len();
        let mut r = vec![0.0; n];
        r[0] = self.coeffs[0].sqrt();
        for k in 1..n {
            let s: f64 = (1..k).map(|j| r[j] * r[k - j]).sum();
            r[k] = (self.coeffs[k] - s) / (2.0 * r[0]);
        }
        Series { coeffs: r }
    }

    /// `(sin f, cos f)`.
    pub fn sin_cos(&self) -> (Series, Series) {
        let n = self.coeffs.len();
        let mut s = vec![0.0; n];
        let mut c = vec![0.0; n];
        (s[0], c[0]) = self.coeffs[0].sin_cos();
        // s' = c f', c' = -s f'
        for k in 1..n {
            let mut ds = 0.0;
            let mut dc = 0.0;
            for j in 1..=k {
                let fj = j as f64 * self.coeffs[j];
                ds += fj * c[k - j];
                dc -= fj * s[k - j];
            }
            s[k] = ds / k as f64;
            c[k] = dc / k as f64;
        }
        (Series { coeffs: s }, Series { coeffs: c })
    }

    pub fn powi(&self, p: usize) -> Series {
        let mut out = Series::constant(1.0, self.order());
        for _ in 0..p {
            out = &out * self;
        }
        out
    }

    fn binary(&self, o: &Series, f: impl Fn(f64, f64) -> f64) -> Series {
        let n = self.coeffs.len().min(o.coeffs.len());
        Series {
            coeffs: (0..n).map(|k| f(self.coeffs[k], o.coeffs[k])).collect(),
        }
    }
}

impl Add for &Series {
    type Output = Series;
    fn add(self, o: &Series) -> Series {
        self.binary(o, |a, b| a + b)
    }
}

impl Sub for &Series {
    type Output = Series;
    fn sub(self, o: &Series) -> Series {
        self.binary(o, |a, b| a - b)
    }
}

impl Neg for &Series {
    type Output = Series;
    fn neg(self) -> Series {
        self.scale(-1.0)
    }
}

/// Cauchy product truncated at the smaller order.
impl Mul for &Series {
    type Output = Series;
    fn mul(self, o: &Series) -> Series {
        let n = self.coeffs.len().min(o.coeffs.len());
        let mut c = vec![0.0; n];
        for (i, a) in self.coeffs.iter().take(n).enumerate() {
            if *a == 0.0 {
                continue;
            }
            for (j, b) in o.coeffs.iter().take(n - i).enumerate() {
                c[i + j] += a * b;
            }
        }
        Series { coeffs: c }
    }
}

/// Truncated Taylor polynomial `sum c_{ab} dx^a dy^b` with `a + b <= order`.
#[derive(Debug, Clone, PartialEq)]
pub struct Taylor2 {
    order: usize,
    coeffs: Vec<f64>,
}

#[inline]
fn tri_index(a: usize, b: usize) -> usize {
    let n = a + b;
    n * (n + 1) / 2 + b
}

impl Taylor2 {
    pub fn zero(order: usize) -> Self {
        Taylor2 {
            order,
            coeffs: vec![0.0; (order + 1) * (order + 2) / 2],
        }
    }

    pub fn order(&self) -> usize {
        self.order
    }

    pub fn coeff(&self, a: usize, b: usize) -> f64 {
        if a + b > self.order {
            0.0
        } else {
            self.coeffs[tri_index(a, b)]
        }
    }

    pub fn set(&mut self, a: usize, b: usize, v: f64) {
        if a + b <= self.order {
            self.coeffs[tri_index(a, b)] = v;
        }
    }

    pub fn add_to(&mut self, a: usize, b: usize, v: f64) {
        if a + b <= self.order {
            self.coeffs[tri_index(a, b)] += v;
        }
    }

    /// Build from partial derivatives: `partial(a, b) = d^{a+b} f / dx^a dy^b`.
    pub fn from_partials(order: usize, partial: impl Fn(usize, usize) -> f64) -> Self {
        let mut t = Taylor2::zero(order);
        let mut fact = vec![1.0; order + 1];
        for k in 1..=order {
            fact[k] = fact[k - 1] * k as f64;
        }
        for n in 0..=order {
            for b in 0..=n {
                let a = n - b;
                t.set(a, b, partial(a, b) / (fact[a] * fact[b]));
            }
        }
        t
    }

    /// `d^{a+b} f / dx^a dy^b` at the expansion point.
    pub fn partial(&self, a: usize, b: usize) -> f64 {
        let fa: f64 = (1..=a).map(|i| i as f64).product();
        let fb: f64 = (1..=b).map(|i| i as f64).product();
        self.coeff(a, b) * fa * fb
    }

    pub fn value(&self) -> f64 {
        self.coeffs[0]
    }

    pub fn eval(&self, dx: f64, dy: f64) -> f64 {
        let mut total = 0.0;
        for n in 0..=self.order {
            for b in 0..=n {
                let a = n - b;
                total += self.coeffs[tri_index(a, b)] * dx.powi(a as i32) * dy.powi(b as i32);
            }
        }
        total
    }

    pub fn diff_x(&self) -> Taylor2 {
        let order = self.order.saturating_sub(1);
        let mut t = Taylor2::zero(order);
        if self.order == 0 {
            return t;
        }
        for n in 0..=order {
            for b in 0..=n {
                let a = n - b;
                t.set(a, b, self.coeff(a + 1, b) * (a + 1) as f64);
            }
        }
        t
    }

    pub fn diff_y(&self) -> Taylor2 {
        let order = self.order.saturating_sub(1);
        let mut t = Taylor2::zero(order);
        if self.order == 0 {
            return t;
        }
        for n in 0..=order {
            for b in 0..=n {
                let a = n - b;
                t.set(a, b, self.coeff(a, b + 1) * (b + 1) as f64);
            }
        }
        t
    }

    pub fn truncate(&self, order: usize) -> Taylor2 {
        let mut t = Taylor2::zero(order);
        for n in 0..=order.min(self.order) {
            for b in 0..=n {
                t.set(n - b, b, self.coeff(n - b, b));
            }
        }
        t
    }

    pub fn scale(&self, s: f64) -> Taylor2 {
        Taylor2 {
            order: self.order,
            coeffs: self.coeffs.iter().map(|c| c * s).collect(),
        }
    }

    /// Substitute `dx = x(t) - x(0)`, `dy = y(t) - y(0)`; constant terms of
    /// the arguments are ignored.
    pub fn compose(&self, x: &Series, y: &Series) -> Series {
        let order = x.order().min(y.order());
        let mut dx = x.truncate(order);
        dx.set_coeff(0, 0.0);
        let mut dy = y.truncate(order);
        dy.set_coeff(0, 0.0);
        let kmax = self.order.min(order);
        let mut px = vec![Series::constant(1.0, order)];
        let mut py = vec![Series::constant(1.0, order)];
        for k in 1..=kmax {
            px.push(&px[k - 1] * &dx);
            py.push(&py[k - 1] * &dy);
        }
        let mut out = Series::zero(order);
        for n in 0..=kmax {
            for (b, pyb) in py.iter().enumerate().take(n + 1) {
                let a = n - b;
                let c = self.coeff(a, b);
                if c == 0.0 {
                    continue;
                }
                let term = &px[a] * pyb;
                out = &out + &term.scale(c);
            }
        }
        out
    }
}

impl Add for &Taylor2 {
    type Output = Taylor2;
    fn add(self, o: &Taylor2) -> Taylor2 {
        let order = self.order.min(o.order);
        let mut t = Taylor2::zero(order);
        for (i, c) in t.coeffs.iter_mut().enumerate() {
            *c = self.coeffs[i] + o.coeffs[i];
        }
        t
    }
}

impl Sub for &Taylor2 {
    type Output = Taylor2;
    fn sub(self, o: &Taylor2) -> Taylor2 {
        let order = self.order.min(o.order);
        let mut t = Taylor2::zero(order);
        for (i, c) in t.coeffs.iter_mut().enumerate() {
            *c = self.coeffs[i] - o.coeffs[i];
        }
        t
    }
}

impl Mul for &Taylor2 {
    type Output = Taylor2;
    fn mul(self, o: &Taylor2) -> Taylor2 {
        let order = self.order.min(o.order);
        let mut t = Taylor2::zero(order);
        for n1 in 0..=order {
            for b1 in 0..=n1 {
                let c1 = self.coeff(n1 - b1, b1);
                if c1 == 0.0 {
                    continue;
                }
                for n2 in 0..=(order - n1) {
                    for b2 in 0..=n2 {
                        t.add_to(n1 - b1 + n2 - b2, b1 + b2, c1 * o.coeff(n2 - b2, b2));
                    }
                }
            }
        }
        t
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn reciprocal_and_sqrt() {
        let s = Series::from_coeffs(vec![2.0, 1.0, 0.5, -0.25]);
        let one = &s * &s.recip();
        assert!((one.coeff(0) - 1.0).abs() < 1e-15);
        for k in 1..4 {
            assert!(one.coeff(k).abs() < 1e-15);
        }
        let r = s.sqrt();
        let back = &r * &r;
        for k in 0..4 {
            assert!((back.coeff(k) - s.coeff(k)).abs() < 1e-14);
        }
    }

    #[test]
    fn sin_cos_of_linear() {
        let (s, c) = Series::variable(0.3, 6).scale(2.0).sin_cos();
        for k in 0..=6 {
            // d^k sin(2t + 0.6) at 0 = 2^k sin(0.6 + k pi/2)
            let want = 2f64.powi(k as i32) * (0.6 + k as f64 * std::f64::consts::FRAC_PI_2).sin();
            assert!((s.derivative_at_zero(k) - want).abs() < 1e-11);
            let wantc = 2f64.powi(k as i32) * (0.6 + k as f64 * std::f64::consts::FRAC_PI_2).cos();
            assert!((c.derivative_at_zero(k) - wantc).abs() < 1e-11);
        }
    }

    #[test]
    fn taylor2_compose_matches_direct() {
        // f = 1 + 2dx + 3dx dy - dy^2
        let mut f = Taylor2::zero(3);
        f.set(0, 0, 1.0);
        f.set(1, 0, 2.0);
        f.set(1, 1, 3.0);
        f.set(0, 2, -1.0);
        let x = Series::from_coeffs(vec![5.0, 1.0, 0.5, 0.0]);
        let y = Series::from_coeffs(vec![-1.0, 0.0, 2.0, 1.0]);
        let c = f.compose(&x, &y);
        let t = 1e-3;
        let dx = x.eval(t) - 5.0;
        let dy = y.eval(t) + 1.0;
        assert!((c.eval(t) - f.eval(dx, dy)).abs() < 1e-11);
    }

    #[test]
    fn taylor2_partials_roundtrip() {
        let t = Taylor2::from_partials(4, |a, b| (a * 10 + b) as f64);
        assert_eq!(t.partial(2, 1), 21.0);
        assert_eq!(t.diff_x().partial(1, 1), 21.0);
        assert_eq!(t.diff_y().partial(2, 0), 21.0);
    }
}
