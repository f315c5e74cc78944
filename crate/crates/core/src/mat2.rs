//! Allocation-free 2×2 real linear algebra.
//!
//! Every matrix function here goes through the split `M = s·I + N` with
//! `s = tr(M)/2` and `N` traceless, so that `N² = δ·I` where
//! `δ = ((m11 − m22)/2)² + m12·m21`. The eigenvalues are `s ± √δ`, and any
//! analytic function of `M` is `f(M) = α·I + β·N` for scalars `α, β`
//! depending only on `s` and `δ`.

use std::ops::{Add, AddAssign, Mul, Neg, Sub};

use num_complex::Complex64;

use crate::error::{Error, Result};

/// Real 2-vector.
#[derive(Clone, Copy, Debug, Default, PartialEq)]
pub struct Vec2 {
    pub v1: f64,
    pub v2: f64,
}

/// Real 2×2 matrix in row-major field order.
#[derive(Clone, Copy, Debug, Default, PartialEq)]
pub struct Mat2 {
    pub m11: f64,
    pub m12: f64,
    pub m21: f64,
    pub m22: f64,
}

/// Column-stacked image of a [`Mat2`]: `(m11, m21, m12, m22)`.
#[derive(Clone, Copy, Debug, Default, PartialEq)]
pub struct Vec4(pub [f64; 4]);

impl Vec2 {
    pub const ZERO: Vec2 = Vec2 { v1: 0.0, v2: 0.0 };

    pub const fn new(v1: f64, v2: f64) -> Self {
        Vec2 { v1, v2 }
    }

    pub fn try_new(v1: f64, v2: f64) -> Result<Self> {
        if v1.is_finite() && v2.is_finite() {
            Ok(Vec2 { v1, v2 })
        } else {
            Err(Error::InvalidParameter(format!(
                "non-finite vector ({v1}, {v2})"
            )))
        }
    }

    pub fn dot(self, other: Vec2) -> f64 {
        self.v1 * other.v1 + self.v2 * other.v2
    }

    /// Euclidean norm.
    pub fn norm(self) -> f64 {
        self.v1.hypot(self.v2)
    }

    pub fn max_abs(self) -> f64 {
        self.v1.abs().max(self.v2.abs())
    }

    /// Componentwise positive part.
    pub fn positive_part(self) -> Vec2 {
        Vec2::new(self.v1.max(0.0), self.v2.max(0.0))
    }

    pub fn is_nonnegative(self) -> bool {
        self.v1 >= 0.0 && self.v2 >= 0.0
    }

    pub fn is_finite(self) -> bool {
        self.v1.is_finite() && self.v2.is_finite()
    }

    /// `self · otherᵀ`.
    pub fn outer(self, other: Vec2) -> Mat2 {
        Mat2::new(
            self.v1 * other.v1,
            self.v1 * other.v2,
            self.v2 * other.v1,
            self.v2 * other.v2,
        )
    }

    pub fn to_array(self) -> [f64; 2] {
        [self.v1, self.v2]
    }
}

impl From<[f64; 2]> for Vec2 {
    fn from(a: [f64; 2]) -> Self {
        Vec2::new(a[0], a[1])
    }
}

impl Add for Vec2 {
    type Output = Vec2;
    fn add(self, o: Vec2) -> Vec2 {
        Vec2::new(self.v1 + o.v1, self.v2 + o.v2)
    }
}

impl AddAssign for Vec2 {
    fn add_assign(&mut self, o: Vec2) {
        self.v1 += o.v1;
        self.v2 += o.v2;
    }
}

impl Sub for Vec2 {
    type Output = Vec2;
    fn sub(self, o: Vec2) -> Vec2 {
        Vec2::new(self.v1 - o.v1, self.v2 - o.v2)
    }
}

impl Neg for Vec2 {
    type Output = Vec2;
    fn neg(self) -> Vec2 {
        Vec2::new(-self.v1, -self.v2)
    }
}

impl Mul<Vec2> for f64 {
    type Output = Vec2;
    fn mul(self, v: Vec2) -> Vec2 {
        Vec2::new(self * v.v1, self * v.v2)
    }
}

impl Mat2 {
    pub const ZERO: Mat2 = Mat2::new(0.0, 0.0, 0.0, 0.0);
    pub const IDENTITY: Mat2 = Mat2::new(1.0, 0.0, 0.0, 1.0);

    pub const fn new(m11: f64, m12: f64, m21: f64, m22: f64) -> Self {
        Mat2 { m11, m12, m21, m22 }
    }

    /// Checked constructor; rejects NaN and infinities.
    pub fn try_new(m11: f64, m12: f64, m21: f64, m22: f64) -> Result<Self> {
        let m = Mat2::new(m11, m12, m21, m22);
        if m.is_finite() {
            Ok(m)
        } else {
            Err(Error::InvalidParameter(format!("non-finite matrix {m:?}")))
        }
    }

    pub const fn diag(d1: f64, d2: f64) -> Self {
        Mat2::new(d1, 0.0, 0.0, d2)
    }

    pub fn is_finite(&self) -> bool {
        self.m11.is_finite() && self.m12.is_finite() && self.m21.is_finite() && self.m22.is_finite()
    }

    pub fn trace(&self) -> f64 {
        self.m11 + self.m22
    }

    pub fn det(&self) -> f64 {
        self.m11 * self.m22 - self.m12 * self.m21
    }

    pub fn transpose(&self) -> Mat2 {
        Mat2::new(self.m11, self.m21, self.m12, self.m22)
    }

    /// Largest absolute entry.
    pub fn max_abs(&self) -> f64 {
        self.m11
            .abs()
            .max(self.m12.abs())
            .max(self.m21.abs())
            .max(self.m22.abs())
    }

    /// Frobenius inner product `Σ MᵢⱼNᵢⱼ`.
    pub fn frobenius_dot(&self, other: &Mat2) -> f64 {
        self.m11 * other.m11 + self.m12 * other.m12 + self.m21 * other.m21 + self.m22 * other.m22
    }

    pub fn to_array(&self) -> [f64; 4] {
        [self.m11, self.m12, self.m21, self.m22]
    }

    pub fn from_array(a: [f64; 4]) -> Self {
        Mat2::new(a[0], a[1], a[2], a[3])
    }

    /// Column stacking: `(m11, m21, m12, m22)`.
    pub fn vec(&self) -> Vec4 {
        Vec4([self.m11, self.m21, self.m12, self.m22])
    }

    /// `s = tr/2` and `δ` such that `(M − sI)² = δI`.
    fn split(&self) -> (f64, f64) {
        let s = 0.5 * self.trace();
        let h = 0.5 * (self.m11 - self.m22);
        (s, h * h + self.m12 * self.m21)
    }

    /// Roots of the characteristic polynomial, ordered by real part ascending
    /// (then imaginary part ascending).
    pub fn eigenvalues(&self) -> [Complex64; 2] {
        let (s, delta) = self.split();
        if delta >= 0.0 {
            let r = delta.sqrt();
            let det = self.det();
            // avoid cancellation in the root of smaller magnitude
            let (lo, hi) = if s >= 0.0 {
                let big = s + r;
                let small = if big != 0.0 { det / big } else { 0.0 };
                (small, big)
            } else {
                let small = s - r;
                (small, det / small)
            };
            let (lo, hi) = if lo <= hi { (lo, hi) } else { (hi, lo) };
            [Complex64::new(lo, 0.0), Complex64::new(hi, 0.0)]
        } else {
            let r = (-delta).sqrt();
            [Complex64::new(s, -r), Complex64::new(s, r)]
        }
    }

    /// Spectral radius `max |ξᵢ|`.
    pub fn spectral_radius(&self) -> f64 {
        let [a, b] = self.eigenvalues();
        a.norm().max(b.norm())
    }

    /// `α·I + β·(M − sI)`.
    fn combine(&self, s: f64, alpha: f64, beta: f64) -> Mat2 {
        Mat2::new(
            alpha + beta * (self.m11 - s),
            beta * self.m12,
            beta * self.m21,
            alpha + beta * (self.m22 - s),
        )
    }

    /// Matrix exponential by the closed-form 2×2 formula.
    pub fn expm(&self) -> Result<Mat2> {
        let (s, delta) = self.split();
        let r_abs = delta.abs().sqrt();
        let [xi1, _] = self.eigenvalues();
        let out = if 2.0 * r_abs < 1e-8 * (1.0 + xi1.norm()) {
            // repeated eigenvalue: cosh(√δ) and sinh(√δ)/√δ as series in δ
            let es = s.exp();
            let c = 1.0 + delta / 2.0 + delta * delta / 24.0;
            let sc = 1.0 + delta / 6.0 + delta * delta / 120.0;
            self.combine(s, es * c, es * sc)
        } else if delta > 0.0 {
            let r = r_abs;
            if r > 1.0 {
                // exp(M) = [e^{s+r}(N + rI) − e^{s−r}(N − rI)] / 2r
                let ep = (s + r).exp();
                let em = (s - r).exp();
                let n11 = self.m11 - s;
                let n22 = self.m22 - s;
                Mat2::new(
                    (ep * (n11 + r) - em * (n11 - r)) / (2.0 * r),
                    (ep - em) * self.m12 / (2.0 * r),
                    (ep - em) * self.m21 / (2.0 * r),
                    (ep * (n22 + r) - em * (n22 - r)) / (2.0 * r),
                )
            } else {
                let es = s.exp();
                self.combine(s, es * r.cosh(), es * r.sinh() / r)
            }
        } else {
            let r = r_abs;
            let es = s.exp();
            self.combine(s, es * r.cos(), es * r.sin() / r)
        };
        if out.is_finite() {
            Ok(out)
        } else {
            Err(Error::Overflow)
        }
    }

    /// Principal matrix logarithm. Requires both eigenvalues to have
    /// positive real part.
    pub fn logm(&self) -> Result<Mat2> {
        let (s, delta) = self.split();
        let [xi1, xi2] = self.eigenvalues();
        let min_re = xi1.re.min(xi2.re);
        if !(min_re > 0.0) {
            return Err(Error::NonPositiveSpectrum { re: min_re });
        }
        // s > 0 here in both the real and the complex case
        let u = delta / (s * s);
        let x = u.abs().sqrt();
        let beta = if x < 1e-4 {
            // atanh(x)/x and atan(x)/x share the series 1 + u/3 + u²/5
            (1.0 + u / 3.0 + u * u / 5.0) / s
        } else if delta > 0.0 {
            x.atanh() / (x * s)
        } else {
            x.atan() / (x * s)
        };
        let alpha = if delta >= 0.0 {
            0.5 * (xi1.re.ln() + xi2.re.ln())
        } else {
            xi1.norm().ln()
        };
        Ok(self.combine(s, alpha, beta))
    }

    /// Logarithm by the power series `Σ (−1)^{k−1}/k · (M − I)^k`.
    /// Kept as a cross-check on [`Mat2::logm`].
    pub fn logm_series(&self) -> Result<Mat2> {
        let x = *self - Mat2::IDENTITY;
        let radius = x.spectral_radius();
        if radius >= 1.0 {
            return Err(Error::SeriesDiverges { radius });
        }
        let mut power = x;
        let mut sum = Mat2::ZERO;
        for k in 1..200_000u32 {
            let sign = if k % 2 == 1 { 1.0 } else { -1.0 };
            let term = (sign / k as f64) * power;
            sum += term;
            if term.max_abs() <= 1e-18 * sum.max_abs().max(1e-300) {
                return Ok(sum);
            }
            power = power * x;
        }
        Err(Error::SeriesDiverges { radius })
    }

    /// Inverse via adjugate over determinant.
    ///
    /// Singularity is judged relative to the squared scale of the entries so
    /// the test does not depend on units.
    pub fn inverse(&self) -> Result<Mat2> {
        let det = self.det();
        let scale = self.max_abs();
        if !(det.abs() > 1e-14 * scale * scale) {
            return Err(Error::Singular { det });
        }
        Ok(Mat2::new(
            self.m22 / det,
            -self.m12 / det,
            -self.m21 / det,
            self.m11 / det,
        ))
    }
}

impl Add for Mat2 {
    type Output = Mat2;
    fn add(self, o: Mat2) -> Mat2 {
        Mat2::new(
            self.m11 + o.m11,
            self.m12 + o.m12,
            self.m21 + o.m21,
            self.m22 + o.m22,
        )
    }
}

impl AddAssign for Mat2 {
    fn add_assign(&mut self, o: Mat2) {
        *self = *self + o;
    }
}

impl Sub for Mat2 {
    type Output = Mat2;
    fn sub(self, o: Mat2) -> Mat2 {
        Mat2::new(
            self.m11 - o.m11,
            self.m12 - o.m12,
            self.m21 - o.m21,
            self.m22 - o.m22,
        )
    }
}

impl Neg for Mat2 {
    type Output = Mat2;
    fn neg(self) -> Mat2 {
        Mat2::new(-self.m11, -self.m12, -self.m21, -self.m22)
    }
}

impl Mul for Mat2 {
    type Output = Mat2;
    fn mul(self, o: Mat2) -> Mat2 {
        Mat2::new(
            self.m11 * o.m11 + self.m12 * o.m21,
            self.m11 * o.m12 + self.m12 * o.m22,
            self.m21 * o.m11 + self.m22 * o.m21,
            self.m21 * o.m12 + self.m22 * o.m22,
        )
    }
}

impl Mul<Vec2> for Mat2 {
    type Output = Vec2;
    fn mul(self, v: Vec2) -> Vec2 {
        Vec2::new(
            self.m11 * v.v1 + self.m12 * v.v2,
            self.m21 * v.v1 + self.m22 * v.v2,
        )
    }
}

impl Mul<Mat2> for f64 {
    type Output = Mat2;
    fn mul(self, m: Mat2) -> Mat2 {
        Mat2::new(self * m.m11, self * m.m12, self * m.m21, self * m.m22)
    }
}

impl Vec4 {
    pub fn dot(&self, other: &Vec4) -> f64 {
        self.0.iter().zip(other.0.iter()).map(|(a, b)| a * b).sum()
    }

    /// Inverse of [`Mat2::vec`].
    pub fn to_mat(&self) -> Mat2 {
        Mat2::new(self.0[0], self.0[2], self.0[1], self.0[3])
    }
}

/// Free-function form of [`Mat2::vec`].
pub fn vec(m: &Mat2) -> Vec4 {
    m.vec()
}
