//! Complex 2×2 matrices, projective lines and the Hermitian model of H³.

use std::fmt;
use std::ops::{Add, AddAssign, Mul, Neg, Sub};

use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

pub type C64 = Complex64;

pub const I: C64 = C64::new(0.0, 1.0);
const ONE: C64 = C64::new(1.0, 0.0);
const ZERO: C64 = C64::new(0.0, 0.0);

/// A complex 2×2 matrix `[[a, b], [c, d]]`.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct Mat2 {
    pub a: C64,
    pub b: C64,
    pub c: C64,
    pub d: C64,
}

impl Mat2 {
    pub const IDENTITY: Mat2 = Mat2 { a: ONE, b: ZERO, c: ZERO, d: ONE };
    pub const ZERO: Mat2 = Mat2 { a: ZERO, b: ZERO, c: ZERO, d: ZERO };

    pub const fn new(a: C64, b: C64, c: C64, d: C64) -> Self {
        Mat2 { a, b, c, d }
    }

    pub fn real(a: f64, b: f64, c: f64, d: f64) -> Self {
        Mat2::new(a.into(), b.into(), c.into(), d.into())
    }

    pub fn diag(a: C64, d: C64) -> Self {
        Mat2::new(a, ZERO, ZERO, d)
    }

    pub fn scalar(s: C64) -> Self {
        Mat2::diag(s, s)
    }

    /// `ε₋ = [[0,0],[−1,0]]`.
    pub fn eps_minus() -> Self {
        Mat2::real(0.0, 0.0, -1.0, 0.0)
    }

    /// `ε₊ = [[0,1],[0,0]]`.
    pub fn eps_plus() -> Self {
        Mat2::real(0.0, 1.0, 0.0, 0.0)
    }

    /// `ε = diag(i, −i)`.
    pub fn eps() -> Self {
        Mat2::diag(I, -I)
    }

    /// Outer product `x yᵗ` (no conjugation).
    pub fn outer(x: [C64; 2], y: [C64; 2]) -> Self {
        Mat2::new(x[0] * y[0], x[0] * y[1], x[1] * y[0], x[1] * y[1])
    }

    pub fn det(&self) -> C64 {
        self.a * self.d - self.b * self.c
    }

    pub fn trace(&self) -> C64 {
        self.a + self.d
    }

    pub fn transpose(&self) -> Self {
        Mat2::new(self.a, self.c, self.b, self.d)
    }

    pub fn conj(&self) -> Self {
        Mat2::new(self.a.conj(), self.b.conj(), self.c.conj(), self.d.conj())
    }

    /// Conjugate transpose.
    pub fn adjoint(&self) -> Self {
        Mat2::new(self.a.conj(), self.c.conj(), self.b.conj(), self.d.conj())
    }

    /// Adjugate `[[d, −b], [−c, a]]`; equals the inverse when `det = 1`.
    pub fn adjugate(&self) -> Self {
        Mat2::new(self.d, -self.b, -self.c, self.a)
    }

    pub fn inverse(&self) -> Result<Self> {
        let det = self.det();
        if det.norm() <= f64::MIN_POSITIVE || !det.is_finite() {
            return Err(Error::Singular);
        }
        Ok(self.adjugate().scale(det.inv()))
    }

    pub fn scale(&self, s: C64) -> Self {
        Mat2::new(self.a * s, self.b * s, self.c * s, self.d * s)
    }

    pub fn apply(&self, v: [C64; 2]) -> [C64; 2] {
        [self.a * v[0] + self.b * v[1], self.c * v[0] + self.d * v[1]]
    }

    /// Traceless part `A − ½ tr A`.
    pub fn tracefree_part(&self) -> Self {
        let h = self.trace() * 0.5;
        Mat2::new(self.a - h, self.b, self.c, self.d - h)
    }

    pub fn norm_fro(&self) -> f64 {
        (self.a.norm_sqr() + self.b.norm_sqr() + self.c.norm_sqr() + self.d.norm_sqr()).sqrt()
    }

    /// Operator 2-norm (largest singular value).
    pub fn norm(&self) -> f64 {
        let (smax, _) = self.singular_values();
        smax
    }

    /// `(σ_max, σ_min)`.
    pub fn singular_values(&self) -> (f64, f64) {
        let f2 = self.norm_fro().powi(2);
        let det = self.det().norm();
        let disc = (f2 * f2 - 4.0 * det * det).max(0.0).sqrt();
        let smax = ((f2 + disc) * 0.5).sqrt();
        let smin = if smax > 0.0 { det / smax } else { 0.0 };
        (smax, smin)
    }

    pub fn max_abs(&self) -> f64 {
        self.a.norm().max(self.b.norm()).max(self.c.norm()).max(self.d.norm())
    }

    pub fn is_finite(&self) -> bool {
        self.a.is_finite() && self.b.is_finite() && self.c.is_finite() && self.d.is_finite()
    }

    pub fn is_sl2(&self, tol: f64) -> bool {
        (self.det() - 1.0).norm() <= tol
    }

    pub fn is_hermitian(&self, tol: f64) -> bool {
        (*self - self.adjoint()).max_abs() <= tol
    }

    pub fn is_tracefree(&self, tol: f64) -> bool {
        self.trace().norm() <= tol
    }

    /// Distance to the nearest of `±𝟙` in operator norm, with the sign attaining it.
    pub fn distance_to_pm_identity(&self) -> (f64, i8) {
        let plus = (*self - Mat2::IDENTITY).norm();
        let minus = (*self + Mat2::IDENTITY).norm();
        if plus <= minus {
            (plus, 1)
        } else {
            (minus, -1)
        }
    }

    /// Unit vector spanning the kernel of the nearest rank-one matrix (smallest right singular vector).
    pub fn smallest_singular_vector(&self) -> [C64; 2] {
        // Eigenvector of AᴴA for its smallest eigenvalue.
        let h = self.adjoint() * *self;
        let p = h.a.re;
        let r = h.d.re;
        let s = h.b;
        let half = 0.5 * (p - r);
        let root = (half * half + s.norm_sqr()).sqrt();
        let lmin = 0.5 * (p + r) - root;
        let v1 = [s, C64::from(lmin - p)];
        let v2 = [C64::from(lmin - r), s.conj()];
        let n1 = v1[0].norm_sqr() + v1[1].norm_sqr();
        let n2 = v2[0].norm_sqr() + v2[1].norm_sqr();
        let v = if n1 >= n2 { v1 } else { v2 };
        let n = n1.max(n2).sqrt();
        if n == 0.0 {
            [ONE, ZERO]
        } else {
            [v[0] / n, v[1] / n]
        }
    }
}

impl Add for Mat2 {
    type Output = Mat2;
    fn add(self, o: Mat2) -> Mat2 {
        Mat2::new(self.a + o.a, self.b + o.b, self.c + o.c, self.d + o.d)
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
        Mat2::new(self.a - o.a, self.b - o.b, self.c - o.c, self.d - o.d)
    }
}

impl Neg for Mat2 {
    type Output = Mat2;
    fn neg(self) -> Mat2 {
        Mat2::new(-self.a, -self.b, -self.c, -self.d)
    }
}

impl Mul for Mat2 {
    type Output = Mat2;
    #[inline]
    fn mul(self, o: Mat2) -> Mat2 {
        Mat2::new(
            self.a * o.a + self.b * o.c,
            self.a * o.b + self.b * o.d,
            self.c * o.a + self.d * o.c,
            self.c * o.b + self.d * o.d,
        )
    }
}

impl Mul<C64> for Mat2 {
    type Output = Mat2;
    fn mul(self, s: C64) -> Mat2 {
        self.scale(s)
    }
}

impl Mul<f64> for Mat2 {
    type Output = Mat2;
    fn mul(self, s: f64) -> Mat2 {
        Mat2::new(self.a * s, self.b * s, self.c * s, self.d * s)
    }
}

impl fmt::Display for Mat2 {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "[[{}, {}], [{}, {}]]", self.a, self.b, self.c, self.d)
    }
}

/// `sin ω / ω` with a series near zero; even in ω, so only ω² is needed.
#[inline]
fn sinc_from_sq(w2: C64, w: C64) -> C64 {
    if w.norm() < 1e-4 {
        ONE - w2 / 6.0 + w2 * w2 / 120.0
    } else {
        w.sin() / w
    }
}

/// Exponential of a tracefree matrix without validating the trace.
#[inline]
pub(crate) fn exp_tf(a: &Mat2) -> Mat2 {
    let w2 = a.det();
    let w = w2.sqrt();
    let c = w.cos();
    let s = sinc_from_sq(w2, w);
    Mat2::new(c + s * a.a, s * a.b, s * a.c, c + s * a.d)
}

/// `exp A = cos ω 𝟙 + sinc ω A` with `ω² = det A`.
pub fn exp_tracefree(a: &Mat2) -> Result<Mat2> {
    let tol = 1e-12 * (1.0 + a.norm_fro());
    if !a.is_tracefree(tol) {
        return Err(Error::NotTracefree(a.trace().norm()));
    }
    Ok(exp_tf(a))
}

/// A point of CP¹, stored as a unit vector whose first nonzero entry is real positive.
#[derive(Clone, Copy, Debug, Serialize, Deserialize)]
pub struct CPLine {
    v: [C64; 2],
}

impl CPLine {
    pub fn new(v1: C64, v2: C64) -> Result<Self> {
        let n = (v1.norm_sqr() + v2.norm_sqr()).sqrt();
        if !(n > 0.0) || !n.is_finite() {
            return Err(Error::ZeroVector);
        }
        let (u1, u2) = (v1 / n, v2 / n);
        // Phase is fixed by the larger component when the first is numerically zero.
        let pivot = if u1.norm() > 1e-300 { u1 } else { u2 };
        let phase = pivot.conj() / pivot.norm();
        Ok(CPLine { v: [u1 * phase, u2 * phase] })
    }

    pub fn from_vec(v: [C64; 2]) -> Result<Self> {
        CPLine::new(v[0], v[1])
    }

    pub fn real(x: f64, y: f64) -> Result<Self> {
        CPLine::new(x.into(), y.into())
    }

    pub fn vector(&self) -> [C64; 2] {
        self.v
    }

    /// The Hermitian-orthogonal line.
    pub fn perp(&self) -> CPLine {
        let [a, b] = self.v;
        CPLine::new(-b.conj(), a.conj()).expect("unit vector has nonzero perp")
    }

    /// `|⟨v, w⟩|`, which is 1 exactly when the lines coincide.
    pub fn overlap(&self, other: &CPLine) -> f64 {
        (self.v[0].conj() * other.v[0] + self.v[1].conj() * other.v[1]).norm()
    }

    pub fn approx_eq(&self, other: &CPLine, tol: f64) -> bool {
        self.overlap(other) > 1.0 - tol
    }

    /// True when the line has a real representative.
    pub fn is_real(&self, tol: f64) -> bool {
        self.v[0].im.abs() <= tol && self.v[1].im.abs() <= tol
    }
}

impl PartialEq for CPLine {
    fn eq(&self, other: &Self) -> bool {
        self.approx_eq(other, 1e-12)
    }
}

impl fmt::Display for CPLine {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "[{} : {}]", self.v[0], self.v[1])
    }
}

/// `π_L = v v*` for the unit representative `v` of `L`.
pub fn hermitian_projection(line: &CPLine) -> Mat2 {
    let [x, y] = line.vector();
    Mat2::new(x * x.conj(), x * y.conj(), y * x.conj(), y * y.conj())
}

fn pauli_assemble(x: [f64; 4]) -> Mat2 {
    Mat2::new(
        C64::new(x[0] + x[3], 0.0),
        C64::new(x[1], -x[2]),
        C64::new(x[1], x[2]),
        C64::new(x[0] - x[3], 0.0),
    )
}

/// A point of H³ as a positive Hermitian matrix of determinant one.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct H3Point {
    x: Mat2,
}

impl H3Point {
    pub fn new(x: Mat2, tol: f64) -> Result<Self> {
        if !x.is_hermitian(tol * (1.0 + x.max_abs())) {
            return Err(Error::NotH3Point("matrix is not Hermitian".into()));
        }
        let det = x.det();
        if (det - 1.0).norm() > tol * (1.0 + x.norm_fro().powi(2)) {
            return Err(Error::NotH3Point(format!("det = {det}, expected 1")));
        }
        if x.trace().re <= 0.0 {
            return Err(Error::NotH3Point("matrix is not positive definite".into()));
        }
        Ok(H3Point { x })
    }

    /// From `(x₀, x₁, x₂, x₃)` with `x₀² − |x|² = 1`, `x₀ > 0`.
    pub fn from_hyperboloid(x: [f64; 4], tol: f64) -> Result<Self> {
        H3Point::new(pauli_assemble(x), tol)
    }

    pub fn origin() -> Self {
        H3Point { x: Mat2::IDENTITY }
    }

    pub fn matrix(&self) -> Mat2 {
        self.x
    }

    pub fn hyperboloid(&self) -> [f64; 4] {
        let m = &self.x;
        [
            0.5 * (m.a.re + m.d.re),
            0.5 * (m.b.re + m.c.re),
            0.5 * (m.c.im - m.b.im),
            0.5 * (m.a.re - m.d.re),
        ]
    }

    pub fn ball(&self) -> [f64; 3] {
        let x = self.hyperboloid();
        let s = 1.0 / (1.0 + x[0]);
        [x[1] * s, x[2] * s, x[3] * s]
    }

    /// Hyperbolic distance, from the chord length `4 sinh²(d/2) = −det(X − Y)`.
    pub fn distance(&self, other: &H3Point) -> f64 {
        let chord2 = -(self.x - other.x).det().re;
        2.0 * (0.5 * chord2.max(0.0).sqrt()).asinh()
    }
}

/// Hyperboloid and Poincaré-ball coordinates of a point.
pub fn h3_coordinates(p: &H3Point) -> ([f64; 4], [f64; 3]) {
    (p.hyperboloid(), p.ball())
}
