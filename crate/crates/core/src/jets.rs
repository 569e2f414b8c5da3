//! Second-order jets (value, gradient, Hessian) of analytic functions on R^3.
//!
//! Jets compose by the chain and product rules, so closed-form derivatives
//! of the test functions never go through finite differences.

use std::ops::{Add, Mul, Neg, Sub};

use crate::biquat::{Biquaternion, Complex, ZERO_C};
use crate::geom::Point;

/// Jet of a complex-valued function at a point.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct ScalarJet {
    pub v: Complex,
    pub g: [Complex; 3],
    pub h: [[Complex; 3]; 3],
}

/// Jet of a biquaternion-valued function at a point.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct BiquatJet {
    pub v: Biquaternion,
    pub g: [Biquaternion; 3],
    pub h: [[Biquaternion; 3]; 3],
}

impl ScalarJet {
    pub fn constant(c: Complex) -> Self {
        ScalarJet {
            v: c,
            g: [ZERO_C; 3],
            h: [[ZERO_C; 3]; 3],
        }
    }

    pub fn real(c: f64) -> Self {
        Self::constant(Complex::new(c, 0.0))
    }

    /// The coordinate function `x_k` at `x`.
    pub fn coord(x: Point, k: usize) -> Self {
        let mut j = Self::real(x[k]);
        j.g[k] = Complex::new(1.0, 0.0);
        j
    }

    /// `phi(self)` given `phi`, `phi'`, `phi''` at the value.
    pub fn compose(&self, f0: Complex, f1: Complex, f2: Complex) -> Self {
        ScalarJet {
            v: f0,
            g: self.g.map(|d| f1 * d),
            h: std::array::from_fn(|a| std::array::from_fn(|b| f2 * self.g[a] * self.g[b] + f1 * self.h[a][b])),
        }
    }

    pub fn exp(&self) -> Self {
        let e = self.v.exp();
        self.compose(e, e, e)
    }

    pub fn sin(&self) -> Self {
        let (s, c) = (self.v.sin(), self.v.cos());
        self.compose(s, c, -s)
    }

    pub fn cos(&self) -> Self {
        let (s, c) = (self.v.sin(), self.v.cos());
        self.compose(c, -s, -c)
    }

    pub fn recip(&self) -> Self {
        let r = 1.0 / self.v;
        self.compose(r, -r * r, 2.0 * r * r * r)
    }

    pub fn scale(&self, s: Complex) -> Self {
        ScalarJet {
            v: self.v * s,
            g: self.g.map(|d| d * s),
            h: self.h.map(|row| row.map(|d| d * s)),
        }
    }

    pub fn laplacian(&self) -> Complex {
        self.h[0][0] + self.h[1][1] + self.h[2][2]
    }

    /// `b e_k`-style lift: this jet times a constant biquaternion.
    pub fn times(&self, b: Biquaternion) -> BiquatJet {
        BiquatJet {
            v: b * self.v,
            g: self.g.map(|d| b * d),
            h: self.h.map(|row| row.map(|d| b * d)),
        }
    }
}

impl Add for ScalarJet {
    type Output = ScalarJet;
    fn add(self, o: ScalarJet) -> ScalarJet {
        ScalarJet {
            v: self.v + o.v,
            g: std::array::from_fn(|a| self.g[a] + o.g[a]),
            h: std::array::from_fn(|a| std::array::from_fn(|b| self.h[a][b] + o.h[a][b])),
        }
    }
}

impl Sub for ScalarJet {
    type Output = ScalarJet;
    fn sub(self, o: ScalarJet) -> ScalarJet {
        self + (-o)
    }
}

impl Neg for ScalarJet {
    type Output = ScalarJet;
    fn neg(self) -> ScalarJet {
        self.scale(Complex::new(-1.0, 0.0))
    }
}

impl Mul for ScalarJet {
    type Output = ScalarJet;
    fn mul(self, o: ScalarJet) -> ScalarJet {
        ScalarJet {
            v: self.v * o.v,
            g: std::array::from_fn(|a| self.g[a] * o.v + self.v * o.g[a]),
            h: std::array::from_fn(|a| {
                std::array::from_fn(|b| {
                    self.h[a][b] * o.v + self.g[a] * o.g[b] + self.g[b] * o.g[a] + self.v * o.h[a][b]
                })
            }),
        }
    }
}

impl BiquatJet {
    pub fn zero() -> Self {
        BiquatJet {
            v: Biquaternion::ZERO,
            g: [Biquaternion::ZERO; 3],
            h: [[Biquaternion::ZERO; 3]; 3],
        }
    }

    /// `sum_k c_k e_k` from component jets.
    pub fn from_components(c: [ScalarJet; 4]) -> Self {
        let mut out = Self::zero();
        for (k, j) in c.iter().enumerate() {
            out = out + j.times(Biquaternion::unit(k));
        }
        out
    }

    /// Component `k` as a scalar jet.
    pub fn component(&self, k: usize) -> ScalarJet {
        ScalarJet {
            v: self.v.c[k],
            g: self.g.map(|d| d.c[k]),
            h: self.h.map(|row| row.map(|d| d.c[k])),
        }
    }

    /// Scalar jet times this jet.
    pub fn scalar_mul(&self, s: &ScalarJet) -> Self {
        BiquatJet {
            v: self.v * s.v,
            g: std::array::from_fn(|a| self.g[a] * s.v + self.v * s.g[a]),
            h: std::array::from_fn(|a| {
                std::array::from_fn(|b| {
                    self.h[a][b] * s.v + self.g[a] * s.g[b] + self.g[b] * s.g[a] + self.v * s.h[a][b]
                })
            }),
        }
    }

    /// `D w = sum_k e_k dw/dx_k`.
    pub fn d(&self) -> Biquaternion {
        (0..3).map(|k| Biquaternion::unit(k + 1) * self.g[k]).sum()
    }

    /// `d/dx_a (D w)`.
    pub fn d_partial(&self, a: usize) -> Biquaternion {
        (0..3).map(|k| Biquaternion::unit(k + 1) * self.h[a][k]).sum()
    }

    pub fn laplacian(&self) -> Biquaternion {
        self.h[0][0] + self.h[1][1] + self.h[2][2]
    }
}

impl Add for BiquatJet {
    type Output = BiquatJet;
    fn add(self, o: BiquatJet) -> BiquatJet {
        BiquatJet {
            v: self.v + o.v,
            g: std::array::from_fn(|a| self.g[a] + o.g[a]),
            h: std::array::from_fn(|a| std::array::from_fn(|b| self.h[a][b] + o.h[a][b])),
        }
    }
}

/// Gradient of a scalar jet as the vector biquaternion `sum_k e_k df/dx_k`.
pub fn grad_vector(f: &ScalarJet) -> Biquaternion {
    Biquaternion::vector(f.g)
}
