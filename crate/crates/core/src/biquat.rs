//! Arithmetic of the complex quaternions (biquaternions).
//!
//! A biquaternion is `p = p0 + p1 e1 + p2 e2 + p3 e3` with complex `p_k`.
//! The units follow the standard quaternion table (`e_k^2 = -1`,
//! `e1 e2 = e3` and cyclic), and the complex unit commutes with every `e_k`.
//! The algebra is associative but not commutative, and it has zero
//! divisors such as `1 + i e1`.

use std::fmt;
use std::ops::{Add, AddAssign, Mul, MulAssign, Neg, Sub, SubAssign};

use num_complex::Complex64;
use serde::{Deserialize, Serialize};

/// Complex scalars of the algebra.
pub type Complex = Complex64;

pub(crate) const ZERO_C: Complex = Complex::new(0.0, 0.0);
pub(crate) const ONE_C: Complex = Complex::new(1.0, 0.0);
pub(crate) const I_C: Complex = Complex::new(0.0, 1.0);

/// Relative tolerance used by [`Biquaternion::classify_zero_divisor`] when
/// callers have no better estimate.
pub const DEFAULT_ZERO_DIVISOR_TOL: f64 = 1e-10;

/// An element of the biquaternion algebra, stored as its four complex
/// coefficients with respect to `e0, e1, e2, e3`.
#[derive(Clone, Copy, Default, PartialEq, Serialize, Deserialize)]
pub struct Biquaternion {
    pub c: [Complex; 4],
}

/// Invertibility class of a biquaternion.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ZeroDivisorClass {
    Invertible,
    Zero,
    ZeroDivisor,
}

impl Biquaternion {
    pub const ZERO: Biquaternion = Biquaternion { c: [ZERO_C; 4] };
    pub const ONE: Biquaternion = Biquaternion {
        c: [ONE_C, ZERO_C, ZERO_C, ZERO_C],
    };

    pub const fn new(c0: Complex, c1: Complex, c2: Complex, c3: Complex) -> Self {
        Biquaternion {
            c: [c0, c1, c2, c3],
        }
    }

    /// Biquaternion with real coefficients.
    pub const fn from_real(c: [f64; 4]) -> Self {
        Biquaternion {
            c: [
                Complex::new(c[0], 0.0),
                Complex::new(c[1], 0.0),
                Complex::new(c[2], 0.0),
                Complex::new(c[3], 0.0),
            ],
        }
    }

    /// Scalar `s e0`.
    pub fn scalar(s: Complex) -> Self {
        Biquaternion {
            c: [s, ZERO_C, ZERO_C, ZERO_C],
        }
    }

    /// Purely vectorial element `v1 e1 + v2 e2 + v3 e3`.
    pub fn vector(v: [Complex; 3]) -> Self {
        Biquaternion {
            c: [ZERO_C, v[0], v[1], v[2]],
        }
    }

    /// Purely vectorial element with real coefficients.
    pub fn real_vector(v: [f64; 3]) -> Self {
        Biquaternion::from_real([0.0, v[0], v[1], v[2]])
    }

    /// The unit `e_k`, `k = 0..=3`.
    pub fn unit(k: usize) -> Self {
        let mut c = [ZERO_C; 4];
        c[k] = ONE_C;
        Biquaternion { c }
    }

    /// Scalar part `Sc p = p0`.
    #[inline]
    pub fn sc(&self) -> Complex {
        self.c[0]
    }

    /// Vector part as a triple of complex numbers.
    #[inline]
    pub fn vec(&self) -> [Complex; 3] {
        [self.c[1], self.c[2], self.c[3]]
    }

    /// The element `Vec p` (scalar part set to zero).
    pub fn vec_part(&self) -> Self {
        Biquaternion {
            c: [ZERO_C, self.c[1], self.c[2], self.c[3]],
        }
    }

    /// Quaternionic conjugate `p0 - vec p`.
    #[inline]
    pub fn bar(&self) -> Self {
        Biquaternion {
            c: [self.c[0], -self.c[1], -self.c[2], -self.c[3]],
        }
    }

    /// Componentwise complex conjugation.
    #[inline]
    pub fn complex_conj(&self) -> Self {
        Biquaternion {
            c: [
                self.c[0].conj(),
                self.c[1].conj(),
                self.c[2].conj(),
                self.c[3].conj(),
            ],
        }
    }

    /// Combined conjugation `p0* - (vec p)*`.
    #[inline]
    pub fn dagger(&self) -> Self {
        Biquaternion {
            c: [
                self.c[0].conj(),
                -self.c[1].conj(),
                -self.c[2].conj(),
                -self.c[3].conj(),
            ],
        }
    }

    /// Hermitian inner product `Sc(p^dagger q) = sum conj(p_k) q_k`,
    /// conjugate-linear in `self`.
    #[inline]
    pub fn inner(&self, q: &Biquaternion) -> Complex {
        self.c[0].conj() * q.c[0]
            + self.c[1].conj() * q.c[1]
            + self.c[2].conj() * q.c[2]
            + self.c[3].conj() * q.c[3]
    }

    #[inline]
    pub fn norm_sqr(&self) -> f64 {
        self.c.iter().map(|z| z.norm_sqr()).sum()
    }

    #[inline]
    pub fn norm(&self) -> f64 {
        self.norm_sqr().sqrt()
    }

    /// Bilinear "dot" of the vector parts, `sum_{k=1..3} p_k q_k` (no conjugation).
    #[inline]
    pub fn vec_dot(&self, q: &Biquaternion) -> Complex {
        self.c[1] * q.c[1] + self.c[2] * q.c[2] + self.c[3] * q.c[3]
    }

    /// `p * bar(p)`, which is always a scalar: `p0^2 + vec p . vec p`.
    pub fn norm_form(&self) -> Complex {
        self.c[0] * self.c[0] + self.vec_dot(self)
    }

    /// Classifies `self` as zero, a zero divisor, or invertible.
    ///
    /// `tol` is relative: `p` is a zero divisor when `|p bar(p)| <= tol |p|^2`
    /// and `|p| > tol`.
    pub fn classify_zero_divisor(&self, tol: f64) -> ZeroDivisorClass {
        let n2 = self.norm_sqr();
        if n2.sqrt() <= tol {
            ZeroDivisorClass::Zero
        } else if (*self * self.bar()).norm() <= tol * n2 {
            ZeroDivisorClass::ZeroDivisor
        } else {
            ZeroDivisorClass::Invertible
        }
    }

    /// Two-sided inverse `bar(p) / (p bar(p))`, if `p` is invertible.
    pub fn inverse(&self) -> Option<Biquaternion> {
        match self.classify_zero_divisor(DEFAULT_ZERO_DIVISOR_TOL) {
            ZeroDivisorClass::Invertible => Some(self.bar() * (ONE_C / self.norm_form())),
            _ => None,
        }
    }

    pub fn is_finite(&self) -> bool {
        self.c.iter().all(|z| z.re.is_finite() && z.im.is_finite())
    }

    /// Whether the vector part vanishes within `tol` (absolute).
    pub fn is_scalar(&self, tol: f64) -> bool {
        self.c[1..].iter().all(|z| z.norm() <= tol)
    }

    pub fn max_abs_diff(&self, other: &Biquaternion) -> f64 {
        (*self - *other).norm()
    }
}

impl fmt::Debug for Biquaternion {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(
            f,
            "({}{:+}i) + ({}{:+}i)e1 + ({}{:+}i)e2 + ({}{:+}i)e3",
            self.c[0].re,
            self.c[0].im,
            self.c[1].re,
            self.c[1].im,
            self.c[2].re,
            self.c[2].im,
            self.c[3].re,
            self.c[3].im
        )
    }
}

impl Add for Biquaternion {
    type Output = Biquaternion;
    #[inline]
    fn add(self, q: Biquaternion) -> Biquaternion {
        Biquaternion {
            c: [
                self.c[0] + q.c[0],
                self.c[1] + q.c[1],
                self.c[2] + q.c[2],
                self.c[3] + q.c[3],
            ],
        }
    }
}

impl AddAssign for Biquaternion {
    #[inline]
    fn add_assign(&mut self, q: Biquaternion) {
        for k in 0..4 {
            self.c[k] += q.c[k];
        }
    }
}

impl Sub for Biquaternion {
    type Output = Biquaternion;
    #[inline]
    fn sub(self, q: Biquaternion) -> Biquaternion {
        Biquaternion {
            c: [
                self.c[0] - q.c[0],
                self.c[1] - q.c[1],
                self.c[2] - q.c[2],
                self.c[3] - q.c[3],
            ],
        }
    }
}

impl SubAssign for Biquaternion {
    #[inline]
    fn sub_assign(&mut self, q: Biquaternion) {
        for k in 0..4 {
            self.c[k] -= q.c[k];
        }
    }
}

impl Neg for Biquaternion {
    type Output = Biquaternion;
    #[inline]
    fn neg(self) -> Biquaternion {
        Biquaternion {
            c: [-self.c[0], -self.c[1], -self.c[2], -self.c[3]],
        }
    }
}

/// `pq = p0 q0 - p.q + p0 q + q0 p + p x q`.
impl Mul for Biquaternion {
    type Output = Biquaternion;
    #[inline]
    fn mul(self, q: Biquaternion) -> Biquaternion {
        let [p0, p1, p2, p3] = self.c;
        let [q0, q1, q2, q3] = q.c;
        Biquaternion {
            c: [
                p0 * q0 - (p1 * q1 + p2 * q2 + p3 * q3),
                p0 * q1 + q0 * p1 + (p2 * q3 - p3 * q2),
                p0 * q2 + q0 * p2 + (p3 * q1 - p1 * q3),
                p0 * q3 + q0 * p3 + (p1 * q2 - p2 * q1),
            ],
        }
    }
}

impl MulAssign for Biquaternion {
    #[inline]
    fn mul_assign(&mut self, q: Biquaternion) {
        *self = *self * q;
    }
}

impl Mul<Complex> for Biquaternion {
    type Output = Biquaternion;
    #[inline]
    fn mul(self, s: Complex) -> Biquaternion {
        Biquaternion {
            c: [self.c[0] * s, self.c[1] * s, self.c[2] * s, self.c[3] * s],
        }
    }
}

impl Mul<Biquaternion> for Complex {
    type Output = Biquaternion;
    #[inline]
    fn mul(self, p: Biquaternion) -> Biquaternion {
        p * self
    }
}

impl Mul<f64> for Biquaternion {
    type Output = Biquaternion;
    #[inline]
    fn mul(self, s: f64) -> Biquaternion {
        Biquaternion {
            c: [self.c[0] * s, self.c[1] * s, self.c[2] * s, self.c[3] * s],
        }
    }
}

impl Mul<Biquaternion> for f64 {
    type Output = Biquaternion;
    #[inline]
    fn mul(self, p: Biquaternion) -> Biquaternion {
        p * self
    }
}

impl std::iter::Sum for Biquaternion {
    fn sum<I: Iterator<Item = Biquaternion>>(iter: I) -> Biquaternion {
        iter.fold(Biquaternion::ZERO, |a, b| a + b)
    }
}

/// Left multiplication by a real 3-vector `v1 e1 + v2 e2 + v3 e3`.
///
/// This is the hot path of the volume potentials, where the kernel is a
/// real vector.
#[inline(always)]
pub(crate) fn real_vec_mul(v: [f64; 3], q: &Biquaternion) -> Biquaternion {
    let [q0, q1, q2, q3] = q.c;
    Biquaternion {
        c: [
            -(q1 * v[0] + q2 * v[1] + q3 * v[2]),
            q0 * v[0] + (q3 * v[1] - q2 * v[2]),
            q0 * v[1] + (q1 * v[2] - q3 * v[0]),
            q0 * v[2] + (q2 * v[0] - q1 * v[1]),
        ],
    }
}
