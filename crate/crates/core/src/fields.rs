//! Real-valued random Fourier fields on the torus with Sobolev-type decay.
//!
//! A field is `f(z) = sum a_{nm} e^{2 pi i (n x + m y)}` over `|n|, |m| <= N`
//! with `a_{-n,-m} = conj(a_{nm})`. Sampled coefficients are centered
//! Gaussians with `E|a_{nm}|^2 = (n^2 + m^2 + 1)^{-(2s-3)/2}`.

use std::f64::consts::PI;

use num_complex::Complex64;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::series::Taylor2;
use crate::torus::TorusPoint;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FourierField {
    smoothness: u32,
    n_max: usize,
    re: Vec<f64>,
    im: Vec<f64>,
}

/// Coefficient variance for mode `(n, m)` at smoothness `s`.
pub fn mode_variance(s: u32, n: i64, m: i64) -> f64 {
    let base = (n * n + m * m + 1) as f64;
    base.powf(-(2.0 * s as f64 - 3.0) / 2.0)
}

/// Modes sampled independently, in sampling order: `(0,0)` first, then the
/// upper half plane. The remaining modes are Hermitian mirrors.
fn half_plane_modes(n_max: i64) -> impl Iterator<Item = (i64, i64)> {
    std::iter::once((0, 0)).chain((0..=n_max).flat_map(move |n| {
        (-n_max..=n_max)
            .filter(move |&m| n > 0 || m > 0)
            .map(move |m| (n, m))
    }))
}

impl FourierField {
    pub fn zero(smoothness: u32, n_max: usize) -> Self {
        let side = 2 * n_max + 1;
        FourierField {
            smoothness,
            n_max,
            re: vec![0.0; side * side],
            im: vec![0.0; side * side],
        }
    }

    /// Field with the given modes; each mirror `(-n,-m)` is set to the
    /// conjugate. The imaginary part of `(0,0)` is dropped.
    pub fn from_modes(
        smoothness: u32,
        n_max: usize,
        modes: &[((i64, i64), Complex64)],
    ) -> Result<Self> {
        let mut f = FourierField::zero(smoothness, n_max);
        for &((n, m), a) in modes {
            f.set_coeff(n, m, a)?;
        }
        Ok(f)
    }

    pub fn smoothness(&self) -> u32 {
        self.smoothness
    }

    pub fn n_max(&self) -> usize {
        self.n_max
    }

    /// Highest derivative order the field is declared to support.
    pub fn max_derivative(&self) -> usize {
        self.smoothness.saturating_sub(3) as usize
    }

    fn index(&self, n: i64, m: i64) -> Option<usize> {
        let nm = self.n_max as i64;
        if n.abs() > nm || m.abs() > nm {
            return None;
        }
        let side = 2 * self.n_max + 1;
        Some((n + nm) as usize * side + (m + nm) as usize)
    }

    pub fn coeff(&self, n: i64, m: i64) -> Complex64 {
        match self.index(n, m) {
            Some(i) => Complex64::new(self.re[i], self.im[i]),
            None => Complex64::new(0.0, 0.0),
        }
    }

    pub fn set_coeff(&mut self, n: i64, m: i64, a: Complex64) -> Result<()> {
        let i = self
            .index(n, m)
            .ok_or_else(|| Error::Domain(format!("mode ({n},{m}) outside truncation")))?;
        let j = self.index(-n, -m).expect("mirror index in range");
        if i == j {
            self.re[i] = a.re;
            self.im[i] = 0.0;
        } else {
            self.re[i] = a.re;
            self.im[i] = a.im;
            self.re[j] = a.re;
            self.im[j] = -a.im;
        }
        Ok(())
    }

    /// `sum |a_{nm}|^2`, the mean square of the field.
    pub fn l2_norm_sq(&self) -> f64 {
        self.re
            .iter()
            .zip(&self.im)
            .map(|(r, i)| r * r + i * i)
            .sum()
    }

    /// `sum (n^2+m^2+1)^{s-3} |a_{nm}|^2`.
    pub fn sobolev_sum(&self) -> f64 {
        let nm = self.n_max as i64;
        let mut total = 0.0;
        for n in -nm..=nm {
            for m in -nm..=nm {
                let w = ((n * n + m * m + 1) as f64).powi(self.smoothness as i32 - 3);
                total += w * self.coeff(n, m).norm_sqr();
            }
        }
        total
    }

    fn phases(&self, v: f64) -> Vec<Complex64> {
        let nm = self.n_max as i64;
        (-nm..=nm)
            .map(|k| Complex64::from_polar(1.0, 2.0 * PI * v * k as f64))
            .collect()
    }

    /// Complex field value; the imaginary part is roundoff for a Hermitian field.
    pub fn eval_complex(&self, z: &TorusPoint) -> Complex64 {
        let ex = self.phases(z.x());
        let ey = self.phases(z.y());
        let side = 2 * self.n_max + 1;
        let mut total = Complex64::new(0.0, 0.0);
        for (i, exn) in ex.iter().enumerate() {
            let mut row = Complex64::new(0.0, 0.0);
            for (j, eym) in ey.iter().enumerate() {
                let k = i * side + j;
                if self.re[k] == 0.0 && self.im[k] == 0.0 {
                    continue;
                }
                row += Complex64::new(self.re[k], self.im[k]) * eym;
            }
            total += row * exn;
        }
        total
    }

    pub fn eval(&self, z: &TorusPoint) -> f64 {
        self.eval_complex(z).re
    }

    /// All partials of total order `q`: entry `j` is `d^q f / dx^{q-j} dy^j`.
    pub fn derivatives(&self, z: &TorusPoint, q: usize) -> Result<Vec<f64>> {
        let t = self.taylor(z, q)?;
        Ok((0..=q).map(|j| t.partial(q - j, j)).collect())
    }

    /// Taylor polynomial of order `order` at `z`.
    pub fn taylor(&self, z: &TorusPoint, order: usize) -> Result<Taylor2> {
        if order > self.max_derivative() {
            return Err(Error::Smoothness {
                requested: order,
                max: self.max_derivative(),
            });
        }
        Ok(self.taylor_unchecked(z, order))
    }

    pub(crate) fn taylor_unchecked(&self, z: &TorusPoint, order: usize) -> Taylor2 {
        let nm = self.n_max as i64;
        let side = 2 * self.n_max + 1;
        let ex = self.phases(z.x());
        let ey = self.phases(z.y());
        let two_pi_i = Complex64::new(0.0, 2.0 * PI);
        let pow_table: Vec<Vec<Complex64>> = (-nm..=nm)
            .map(|k| {
                let f = two_pi_i * k as f64;
                let mut p = vec![Complex64::new(1.0, 0.0); order + 1];
                for a in 1..=order {
                    p[a] = p[a - 1] * f;
                }
                p
            })
            .collect();
        let ncoef = (order + 1) * (order + 2) / 2;
        let mut acc = vec![Complex64::new(0.0, 0.0); ncoef];
        for i in 0..side {
            for j in 0..side {
                let k = i * side + j;
                if self.re[k] == 0.0 && self.im[k] == 0.0 {
                    continue;
                }
                let w = Complex64::new(self.re[k], self.im[k]) * ex[i] * ey[j];
                let mut idx = 0;
                for n in 0..=order {
                    for b in 0..=n {
                        acc[idx] += w * pow_table[i][n - b] * pow_table[j][b];
                        idx += 1;
                    }
                }
            }
        }
        let mut idx = 0;
        let mut partials = vec![vec![0.0; order + 1]; order + 1];
        for n in 0..=order {
            for b in 0..=n {
                partials[n - b][b] = acc[idx].re;
                idx += 1;
            }
        }
        Taylor2::from_partials(order, |a, b| partials[a][b])
    }

    /// Log of the density of the translated Gaussian measure `N(. - shift)`
    /// with respect to `N`, evaluated at this field. Both fields must share
    /// smoothness and truncation.
    pub fn log_shift_density(&self, shift: &FourierField) -> Result<f64> {
        if shift.n_max != self.n_max || shift.smoothness != self.smoothness {
            return Err(Error::Parameter(
                "shift field has a different truncation".into(),
            ));
        }
        let mut total = 0.0;
        for (n, m) in half_plane_modes(self.n_max as i64) {
            let var = mode_variance(self.smoothness, n, m);
            let a = self.coeff(n, m);
            let h = shift.coeff(n, m);
            if n == 0 && m == 0 {
                total += (a.re * h.re - 0.5 * h.re * h.re) / var;
            } else {
                let v = var / 2.0;
                total += (a.re * h.re + a.im * h.im - 0.5 * (h.re * h.re + h.im * h.im)) / v;
            }
        }
        Ok(total)
    }
}

fn check_field_params(s: u32, n_max: usize) -> Result<()> {
    if s < 3 {
        return Err(Error::Parameter(format!("smoothness {s} below 3")));
    }
    if n_max < 1 {
        return Err(Error::Parameter("truncation must be at least 1".into()));
    }
    Ok(())
}

fn sample_into(f: &mut FourierField, rng: &mut ChaCha8Rng) {
    for (n, m) in half_plane_modes(f.n_max as i64) {
        let var = mode_variance(f.smoothness, n, m);
        let g1: f64 = StandardNormal.sample(rng);
        if n == 0 && m == 0 {
            f.set_coeff(0, 0, Complex64::new(g1 * var.sqrt(), 0.0))
                .expect("origin mode in range");
        } else {
            let g2: f64 = StandardNormal.sample(rng);
            let sd = (var / 2.0).sqrt();
            f.set_coeff(n, m, Complex64::new(g1 * sd, g2 * sd))
                .expect("mode in range");
        }
    }
}

/// One scalar field, deterministic in `seed`.
pub fn sample_field(s: u32, n_max: usize, seed: u64) -> Result<FourierField> {
    check_field_params(s, n_max)?;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut f = FourierField::zero(s, n_max);
    sample_into(&mut f, &mut rng);
    Ok(f)
}

/// Two independent fields for an `R^2`-valued perturbation.
pub fn sample_vector_field(s: u32, n_max: usize, seed: u64) -> Result<[FourierField; 2]> {
    check_field_params(s, n_max)?;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut a = FourierField::zero(s, n_max);
    let mut b = FourierField::zero(s, n_max);
    sample_into(&mut a, &mut rng);
    sample_into(&mut b, &mut rng);
    Ok([a, b])
}

/// Per-trial seed derived from a master seed.
pub fn derive_seed(master: u64, index: u64) -> u64 {
    // splitmix64 finalizer
    let mut z = master ^ index.wrapping_add(1).wrapping_mul(0x9E37_79B9_7F4A_7C15);
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}
