//! Transposes and adjoints of coefficient tuples, the annihilator of the
//! Vekua space, and closed-form checks of the worked factorizations.

use std::sync::Arc;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::bergman::OrthonormalBasis;
use crate::biquat::{Biquaternion, Complex};
use crate::error::{Result, VekuaError};
use crate::geom::{self, Point};
use crate::grid::{apply_d, same_grid, l2_inner, sphere_mesh, BiquatField, DomainGrid, DomainSpec, ScalarField};
use crate::integral::{q_a_apply, vekua_residual, CoefficientTuple};
use crate::jets::{grad_vector, BiquatJet, ScalarJet};

/// `A* = (bar a1, a4, bar a3, a2)`, so that `Q_A^T = Q_{A*}`.
pub fn transpose_coeffs(a: &CoefficientTuple) -> CoefficientTuple {
    let c = a.coefficients();
    CoefficientTuple::new([
        c[0].map(|q| q.bar()),
        c[3].clone(),
        c[2].map(|q| q.bar()),
        c[1].clone(),
    ])
    .expect("transposing finite coefficients")
}

/// `A† = (a1†, conj a4, a3†, conj a2)`, the Hilbert adjoint tuple.
pub fn adjoint_coeffs(a: &CoefficientTuple) -> CoefficientTuple {
    let c = a.coefficients();
    CoefficientTuple::new([
        c[0].map(|q| q.dagger()),
        c[3].map(|q| q.complex_conj()),
        c[2].map(|q| q.dagger()),
        c[1].map(|q| q.complex_conj()),
    ])
    .expect("adjoining finite coefficients")
}

/// `(v|u) = Sc sum_x w bar(v) u`.
pub fn duality_pairing(v: &BiquatField, u: &BiquatField) -> Result<Complex> {
    same_grid(v.grid(), u.grid())?;
    let s: Complex = v
        .values()
        .iter()
        .zip(u.values())
        .map(|(p, q)| (p.bar() * *q).sc())
        .sum();
    Ok(s * v.grid().weight())
}

/// Compactly supported smooth test function: a `(1 - s^2)^3` bump times a
/// linear biquaternion polynomial.
#[derive(Clone, Debug)]
pub struct TestFunctionW0 {
    pub field: BiquatField,
    pub support_margin: f64,
    center: Point,
    radius: f64,
    poly: [Biquaternion; 4],
}

impl TestFunctionW0 {
    /// `u(x) = b((x - c) / r) (p0 + sum_k p_k (x_k - c_k))`.
    pub fn bump(grid: &Arc<DomainGrid>, center: Point, radius: f64, poly: [Biquaternion; 4]) -> Result<Self> {
        if !(radius > 0.0) || !radius.is_finite() || !poly.iter().all(|p| p.is_finite()) {
            return Err(VekuaError::InvalidParameter(format!("bump radius {radius}")));
        }
        let margin = grid.spec().boundary_distance(center) - radius;
        let required = 4.0 * grid.h_max();
        if !(margin >= required) {
            return Err(VekuaError::SupportMarginViolated {
                distance: margin,
                required,
            });
        }
        let mut t = TestFunctionW0 {
            field: BiquatField::zeros(grid),
            support_margin: margin,
            center,
            radius,
            poly,
        };
        t.field = BiquatField::sample(grid, |x| t.value(x));
        Ok(t)
    }

    pub fn center(&self) -> Point {
        self.center
    }

    pub fn radius(&self) -> f64 {
        self.radius
    }

    pub fn value(&self, x: Point) -> Biquaternion {
        self.jet(x).v
    }

    /// Closed-form jet at `x`; identically zero outside the support.
    pub fn jet(&self, x: Point) -> BiquatJet {
        let d = geom::sub(x, self.center);
        let s2 = geom::dot(d, d) / (self.radius * self.radius);
        if s2 >= 1.0 {
            return BiquatJet::zero();
        }
        let r2 = self.radius * self.radius;
        let one = Complex::new(1.0, 0.0);
        let mut t = ScalarJet::real(1.0 - s2);
        for k in 0..3 {
            t.g[k] = Complex::new(-2.0 * d[k] / r2, 0.0);
            t.h[k][k] = Complex::new(-2.0 / r2, 0.0);
        }
        let b = t.compose(t.v * t.v * t.v, 3.0 * t.v * t.v, 6.0 * t.v);
        let mut p = ScalarJet::real(1.0).times(self.poly[0]);
        for k in 0..3 {
            let mut xk = ScalarJet::real(d[k]);
            xk.g[k] = one;
            p = p + xk.times(self.poly[k + 1]);
        }
        p.scalar_mul(&b)
    }

    /// `D u` in closed form.
    pub fn d_exact(&self) -> BiquatField {
        BiquatField::sample(self.field.grid(), |x| self.jet(x).d())
    }
}

/// Five bumps with distinct centers and polynomial factors, scaled to the
/// inradius about the domain center; on the unit ball they leave room for
/// grids down to `n = 16`.
pub fn standard_bumps(grid: &Arc<DomainGrid>, count: usize) -> Result<Vec<TestFunctionW0>> {
    let c = |re: f64, im: f64| Complex::new(re, im);
    let q = |a: [Complex; 4]| Biquaternion::new(a[0], a[1], a[2], a[3]);
    let z = c(0.0, 0.0);
    let specs: [(Point, f64, [Biquaternion; 4]); 5] = [
        ([0.0, 0.0, 0.0], 0.5, [Biquaternion::ONE, Biquaternion::ZERO, Biquaternion::ZERO, Biquaternion::ZERO]),
        (
            [0.15, 0.0, 0.0],
            0.35,
            [q([z, c(1.0, 0.0), z, z]), q([c(0.5, 0.0), z, z, z]), Biquaternion::ZERO, Biquaternion::ZERO],
        ),
        (
            [0.0, -0.15, 0.0],
            0.35,
            [q([c(0.0, 1.0), z, c(1.0, 0.0), z]), Biquaternion::ZERO, q([z, z, z, c(2.0, 0.0)]), Biquaternion::ZERO],
        ),
        (
            [0.0, 0.0, 0.15],
            0.35,
            [q([z, z, z, c(1.0, -1.0)]), Biquaternion::ZERO, Biquaternion::ZERO, q([c(1.0, 0.0), z, z, z])],
        ),
        (
            [-0.1, 0.1, -0.1],
            0.32,
            [q([c(0.3, 0.0), c(0.0, 0.7), c(-0.4, 0.0), c(0.2, 0.1)]), q([z, c(1.0, 0.0), z, z]), Biquaternion::ZERO, q([z, z, c(0.0, 1.0), z])],
        ),
    ];
    let shift = grid.spec().center();
    let scale = grid.spec().boundary_distance(shift);
    specs
        .iter()
        .cycle()
        .take(count)
        .map(|(c0, r, p)| {
            let center = std::array::from_fn(|k| shift[k] + scale * c0[k]);
            TestFunctionW0::bump(grid, center, scale * r, *p)
        })
        .collect()
}

/// `(D - Q_{A*}) u`.
pub fn annihilator_element(a: &CoefficientTuple, u: &TestFunctionW0) -> Result<BiquatField> {
    check_margin(u)?;
    apply_d(&u.field).sub(&q_a_apply(&transpose_coeffs(a), &u.field)?)
}

/// `max_n |<phi_n, v>| / (|phi_n| |v|)` with `v = (D - Q_{A†}) u`.
pub fn orthogonality_check(a: &CoefficientTuple, basis: &OrthonormalBasis, u: &TestFunctionW0) -> Result<f64> {
    check_margin(u)?;
    let v = apply_d(&u.field).sub(&q_a_apply(&adjoint_coeffs(a), &u.field)?)?;
    let nv = v.l2_norm();
    if nv == 0.0 {
        return Ok(0.0);
    }
    let pairs: Vec<f64> = basis
        .members()
        .par_iter()
        .map(|phi| {
            let np = phi.l2_norm();
            if np == 0.0 {
                return Ok(0.0);
            }
            Ok(l2_inner(phi, &v)?.norm() / (np * nv))
        })
        .collect::<Result<_>>()?;
    Ok(pairs.into_iter().fold(0.0, f64::max))
}

/// `|(v|Du) - (D_h v|u)| / (|u| |v|)` with `Du` exact and `D_h v` by
/// finite differences.
pub fn transpose_duality_defect(u: &TestFunctionW0, v: &BiquatField) -> Result<f64> {
    let du = u.d_exact();
    let lhs = duality_pairing(v, &du)?;
    let rhs = duality_pairing(&apply_d(v), &u.field)?;
    let scale = u.field.l2_norm() * v.l2_norm();
    if scale == 0.0 {
        return Ok(0.0);
    }
    Ok((lhs - rhs).norm() / scale)
}

fn check_margin(u: &TestFunctionW0) -> Result<()> {
    let required = 4.0 * u.field.grid().h_max();
    if u.support_margin < required {
        return Err(VekuaError::SupportMarginViolated {
            distance: u.support_margin,
            required,
        });
    }
    Ok(())
}

/// Analytic scalar function given by its jets.
pub type ScalarJetFn = Arc<dyn Fn(Point) -> ScalarJet + Send + Sync>;

/// Analytic biquaternion function given by its jets.
pub type BiquatJetFn = Arc<dyn Fn(Point) -> BiquatJet + Send + Sync>;

/// Sampled potentials of a nonvanishing `f`, with its jets kept alongside.
#[derive(Clone)]
pub struct SchrodingerData {
    f_jet: ScalarJetFn,
    pub f: ScalarField,
    pub q_f: ScalarField,
    pub q_inv_f: ScalarField,
    pub r: [[ScalarField; 3]; 3],
}

impl std::fmt::Debug for SchrodingerData {
    fn fmt(&self, fm: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        fm.debug_struct("SchrodingerData").field("cells", &self.f.len()).finish()
    }
}

const VANISHING_TOL: f64 = 1e-12;

fn jets_on(grid: &Arc<DomainGrid>, f: &ScalarJetFn) -> Result<Vec<ScalarJet>> {
    let jets: Vec<ScalarJet> = (0..grid.len()).into_par_iter().map(|c| f(grid.center(c))).collect();
    for (c, j) in jets.iter().enumerate() {
        if !(j.v.norm() > VANISHING_TOL) {
            return Err(VekuaError::VanishingFunction(grid.center(c)));
        }
    }
    Ok(jets)
}

/// `R_{jk} = d_j d_k f / f - d_j f d_k f / f^2`.
fn r_matrix(f: &ScalarJet) -> [[Complex; 3]; 3] {
    std::array::from_fn(|j| std::array::from_fn(|k| f.h[j][k] / f.v - f.g[j] * f.g[k] / (f.v * f.v)))
}

impl SchrodingerData {
    /// Samples `f`, `q_f = Δf/f`, `q_{1/f} = f Δ(1/f)` and `R` on `grid`.
    pub fn new(grid: &Arc<DomainGrid>, f: ScalarJetFn) -> Result<Self> {
        let jets = jets_on(grid, &f)?;
        let sample = |g: &dyn Fn(&ScalarJet) -> Complex| {
            ScalarField::new(grid, jets.iter().map(g).collect()).expect("one value per cell")
        };
        let rm: Vec<[[Complex; 3]; 3]> = jets.iter().map(r_matrix).collect();
        let r = std::array::from_fn(|j| {
            std::array::from_fn(|k| ScalarField::new(grid, rm.iter().map(|m| m[j][k]).collect()).expect("one value per cell"))
        });
        Ok(SchrodingerData {
            f: sample(&|j| j.v),
            q_f: sample(&|j| j.laplacian() / j.v),
            q_inv_f: sample(&|j| j.v * j.recip().laplacian()),
            r,
            f_jet: f,
        })
    }

    pub fn grid(&self) -> &Arc<DomainGrid> {
        self.f.grid()
    }

    pub fn f_jet(&self, x: Point) -> ScalarJet {
        (self.f_jet)(x)
    }

    /// Pointwise `|q_{1/f} - (-2 (∇f/f)^2 - Δf/f)|`, with the square taken in
    /// the quaternion algebra.
    pub fn darboux_defect(&self) -> f64 {
        let grid = self.grid();
        (0..grid.len())
            .into_par_iter()
            .map(|c| {
                let j = self.f_jet(grid.center(c));
                let g = grad_vector(&j) * (1.0 / j.v);
                let formula = -2.0 * (g * g).sc() - self.q_f.values()[c];
                let q = self.q_inv_f.values()[c];
                (q - formula).norm() / q.norm().max(1.0)
            })
            .reduce(|| 0.0, f64::max)
    }
}

/// `D_f D_{1/f} w` from jets, with `D_f = D + M^{∇f/f}` and `M^a w = w a`.
fn schrodinger_lhs(f: &ScalarJet, w: &BiquatJet) -> Biquaternion {
    let g = grad_vector(f) * (1.0 / f.v);
    let r = r_matrix(f);
    // d_a (∇f/f) = sum_k R_{ka} e_k
    let dg: [Biquaternion; 3] = std::array::from_fn(|a| Biquaternion::vector(std::array::from_fn(|k| r[k][a])));
    let v = w.d() - w.v * g;
    let dv = (0..3).map(|a| {
        let da = w.d_partial(a) - w.g[a] * g - w.v * dg[a];
        Biquaternion::unit(a + 1) * da
    });
    dv.sum::<Biquaternion>() + v * g
}

/// Scalar and vector residuals of the factorization identities for `D_f
/// D_{1/f}`, relative to the largest term, maximized over cell centers.
pub fn schrodinger_factorization_check(data: &SchrodingerData, w: &BiquatJetFn) -> Result<(f64, f64)> {
    let grid = data.grid();
    let rows: Vec<[f64; 4]> = (0..grid.len())
        .into_par_iter()
        .map(|c| {
            let x = grid.center(c);
            let f = data.f_jet(x);
            let wj = w(x);
            let lhs = schrodinger_lhs(&f, &wj);
            let lap = wj.laplacian();
            let q_f = data.q_f.values()[c];
            let q_inv = data.q_inv_f.values()[c];
            let sc_rhs = -lap.sc() + q_f * wj.v.sc();
            let wv = wj.v.vec();
            let lv = lap.vec();
            let vec_rhs: [Complex; 3] = std::array::from_fn(|k| {
                let rw: Complex = (0..3).map(|j| data.r[k][j].values()[c] * wv[j]).sum();
                -lv[k] + q_inv * wv[k] + 2.0 * rw
            });
            let lv_lhs = lhs.vec();
            let vec_err = (0..3).map(|k| (lv_lhs[k] - vec_rhs[k]).norm()).fold(0.0, f64::max);
            let sc_scale = lhs.sc().norm().max(lap.sc().norm()).max((q_f * wj.v.sc()).norm());
            let vec_scale = (0..3)
                .map(|k| lv_lhs[k].norm().max(lv[k].norm()).max((q_inv * wv[k]).norm()).max(wv[k].norm()))
                .fold(0.0, f64::max);
            [(lhs.sc() - sc_rhs).norm(), sc_scale, vec_err, vec_scale]
        })
        .collect();
    let max = |i: usize| rows.iter().map(|r| r[i]).fold(0.0, f64::max);
    let rel = |e: f64, s: f64| if s > 0.0 { e / s } else { e };
    Ok((rel(max(0), max(1)), rel(max(2), max(3))))
}

/// `L u = (f D (1/f)) ((1/f) D f) u = f D(D(f u) / f^2)` from jets.
fn df_lhs(f: &ScalarJet, u: &BiquatJet) -> Biquaternion {
    let p = u.scalar_mul(f);
    let q = p.d();
    let s = (*f * *f).recip();
    let dv = (0..3).map(|a| Biquaternion::unit(a + 1) * (p.d_partial(a) * s.v + q * s.g[a]));
    dv.sum::<Biquaternion>() * f.v
}

/// `-(2/f) sum_{k != j} e_k e_j d_k f d_j u`.
fn df_cross_term(f: &ScalarJet, u: &BiquatJet) -> Biquaternion {
    let mut acc = Biquaternion::ZERO;
    for k in 0..3 {
        for j in 0..3 {
            if k != j {
                acc += Biquaternion::unit(k + 1) * Biquaternion::unit(j + 1) * u.g[j] * f.g[k];
            }
        }
    }
    acc * (-2.0 / f.v)
}

/// Relative residual of `L u = (-Δ + q_{1/f}) u - (2/f) sum_{k≠j} e_k e_j
/// d_k f d_j u` over the cell centers of `grid`.
pub fn df_factorization_check(grid: &Arc<DomainGrid>, f: &ScalarJetFn, u: &BiquatJetFn) -> Result<f64> {
    let jets = jets_on(grid, f)?;
    let (err, scale) = jets
        .par_iter()
        .enumerate()
        .map(|(c, fj)| {
            let uj = u(grid.center(c));
            let lhs = df_lhs(fj, &uj);
            let q_inv = fj.v * fj.recip().laplacian();
            let lap = uj.laplacian();
            let cross = df_cross_term(fj, &uj);
            let rhs = -lap + uj.v * q_inv + cross;
            let scale = lhs.norm().max(lap.norm()).max((uj.v * q_inv).norm()).max(cross.norm());
            ((lhs - rhs).norm(), scale)
        })
        .reduce(|| (0.0, 0.0), |a, b| (a.0.max(b.0), a.1.max(b.1)));
    Ok(if scale > 0.0 { err / scale } else { err })
}

/// Cross term of the `f D (1/f)` identity for scalar `u`, against
/// `-2 (∇f × ∇u) / f`.
pub fn df_scalar_cross_defect(f: &ScalarJet, u: &ScalarJet) -> f64 {
    let uj = u.times(Biquaternion::ONE);
    let cross = df_cross_term(f, &uj);
    let (a, b) = (f.g, u.g);
    let c = [a[1] * b[2] - a[2] * b[1], a[2] * b[0] - a[0] * b[2], a[0] * b[1] - a[1] * b[0]];
    let expect = Biquaternion::vector(c) * (-2.0 / f.v);
    (cross - expect).norm() / expect.norm().max(1e-300)
}

/// `f(x) = exp(x_1)`.
pub fn exp_x1() -> ScalarJetFn {
    Arc::new(|x: Point| ScalarJet::coord(x, 0).exp())
}

/// `f(x) = 1 + x_1^2 / 2`.
pub fn quadratic_x1() -> ScalarJetFn {
    Arc::new(|x: Point| {
        let x1 = ScalarJet::coord(x, 0);
        ScalarJet::real(1.0) + (x1 * x1).scale(Complex::new(0.5, 0.0))
    })
}

/// `f ≡ 1`.
pub fn unit_f() -> ScalarJetFn {
    Arc::new(|_| ScalarJet::real(1.0))
}

/// `w(x) = x_2 e_0 + x_3 e_1`.
pub fn linear_w() -> BiquatJetFn {
    Arc::new(|x: Point| {
        let z = ScalarJet::real(0.0);
        BiquatJet::from_components([ScalarJet::coord(x, 1), ScalarJet::coord(x, 2), z, z])
    })
}

/// A genuinely curved field exercising every Hessian entry.
pub fn curved_w() -> BiquatJetFn {
    Arc::new(|x: Point| {
        let [x1, x2, x3] = [0, 1, 2].map(|k| ScalarJet::coord(x, k));
        BiquatJet::from_components([
            x1.sin() * x2,
            x3 * x3 + x1 * x2,
            (x1 * x2 * x3).scale(Complex::new(0.5, 0.25)),
            x2.cos().scale(Complex::new(0.0, 1.0)) + x3.exp(),
        ])
    })
}

/// Overlap data for `w = ∇u + iπ u e1`, which lies in the Vekua space and
/// in the image of the transpose operator at once.
#[derive(Clone, Debug, Serialize, Deserialize, PartialEq)]
pub struct BesselWitness {
    /// `(w|w)`, which vanishes when `w` annihilates itself.
    pub self_pairing_re: f64,
    pub self_pairing_im: f64,
    /// `||w||^2` in the Hilbert norm.
    pub norm_sqr: f64,
    pub gradient_energy: f64,
    pub mass_term: f64,
    /// `|(D + M^α) u - w|_∞ / |w|_∞`, closed form.
    pub transpose_image_defect: f64,
}

#[derive(Clone, Debug, Serialize, Deserialize, PartialEq)]
pub struct BesselReport {
    pub sqrt_lambda: f64,
    pub boundary_max: f64,
    pub eigen_residual: f64,
    pub vekua_residual_closed_form: f64,
    pub vekua_residual_discrete: f64,
    pub witness: BesselWitness,
}

/// First positive zero of `J_{1/2}(z) = sqrt(2 / (π z)) sin z`, by Newton's
/// method on the Bessel function itself.
pub fn j_half_first_root() -> f64 {
    let j = |z: f64| (2.0 / (std::f64::consts::PI * z)).sqrt() * z.sin();
    let dj = |z: f64| (2.0 / (std::f64::consts::PI * z)).sqrt() * (z.cos() - z.sin() / (2.0 * z));
    let mut z = 3.0;
    for _ in 0..50 {
        let step = j(z) / dj(z);
        z -= step;
        if step.abs() < 1e-16 {
            break;
        }
    }
    z
}

/// Jet of `u(x) = sin(k r) / r` with `u(0) = k`.
pub fn bessel_jet(k: f64, x: Point) -> ScalarJet {
    let r = geom::norm(x);
    let (u, du_r, d2u) = if k * r < 1e-2 {
        let (k2, r2) = (k * k, r * r);
        let k3 = k * k2;
        let k5 = k3 * k2;
        let k7 = k5 * k2;
        (
            k - k3 * r2 / 6.0 + k5 * r2 * r2 / 120.0 - k7 * r2 * r2 * r2 / 5040.0,
            -k3 / 3.0 + k5 * r2 / 30.0 - k7 * r2 * r2 / 840.0,
            -k3 / 3.0 + k5 * r2 / 10.0 - k7 * r2 * r2 / 168.0,
        )
    } else {
        let (s, c) = (k * r).sin_cos();
        let du = k * c / r - s / (r * r);
        (s / r, du / r, -k * k * s / r - 2.0 * k * c / (r * r) + 2.0 * s / (r * r * r))
    };
    let mut j = ScalarJet::real(u);
    for a in 0..3 {
        j.g[a] = Complex::new(du_r * x[a], 0.0);
        for b in 0..3 {
            let radial = if r > 0.0 { (d2u - du_r) * x[a] * x[b] / (r * r) } else { 0.0 };
            let diag = if a == b { du_r } else { 0.0 };
            j.h[a][b] = Complex::new(radial + diag, 0.0);
        }
    }
    j
}

/// Jet of `w = ∇u + i k u e1` from the jet of `u`.
fn bessel_w(k: f64, u: &ScalarJet) -> BiquatJet {
    let ik = Complex::new(0.0, k);
    let e1 = Biquaternion::unit(1);
    BiquatJet {
        v: grad_vector(u) + e1 * (ik * u.v),
        g: std::array::from_fn(|a| Biquaternion::vector(u.h[a]) + e1 * (ik * u.g[a])),
        h: [[Biquaternion::ZERO; 3]; 3],
    }
}

/// Runs the Bessel example on a grid over the unit ball.
pub fn bessel_example(grid: &Arc<DomainGrid>) -> Result<BesselReport> {
    match grid.spec() {
        DomainSpec::Ball { center, radius } if *center == [0.0; 3] && *radius == 1.0 => {}
        _ => return Err(VekuaError::NotABall),
    }
    let k = j_half_first_root();
    let mesh = sphere_mesh(grid.spec(), 2000)?;
    let boundary_max = mesh
        .points
        .iter()
        .map(|&p| bessel_jet(k, p).v.norm())
        .fold(0.0, f64::max);

    let jets: Vec<ScalarJet> = (0..grid.len()).into_par_iter().map(|c| bessel_jet(k, grid.center(c))).collect();
    let umax = jets.iter().map(|j| j.v.norm()).fold(0.0, f64::max);
    let eig = jets
        .iter()
        .map(|j| (-j.laplacian() - k * k * j.v).norm())
        .fold(0.0, f64::max);

    let alpha = Biquaternion::unit(1) * Complex::new(0.0, k);
    let mut vmax: f64 = 0.0;
    let mut wmax: f64 = 0.0;
    let mut image: f64 = 0.0;
    for j in &jets {
        let w = bessel_w(k, j);
        vmax = vmax.max((w.d() - w.v * alpha).norm());
        wmax = wmax.max(w.v.norm());
        let du = grad_vector(j);
        image = image.max((du + j.v * alpha - w.v).norm());
    }

    let w_field = BiquatField::new(grid, jets.iter().map(|j| bessel_w(k, j).v).collect())?;
    let a = CoefficientTuple::constant([alpha, Biquaternion::ZERO, Biquaternion::ZERO, Biquaternion::ZERO]);
    let discrete = vekua_residual(&a, &w_field)?;
    let pairing = duality_pairing(&w_field, &w_field)?;
    let wt = grid.weight();
    let gradient_energy: f64 = jets.iter().map(|j| j.g.iter().map(|d| d.norm_sqr()).sum::<f64>()).sum::<f64>() * wt;
    let mass_term: f64 = jets.iter().map(|j| k * k * j.v.norm_sqr()).sum::<f64>() * wt;
    let norm = w_field.l2_norm();

    Ok(BesselReport {
        sqrt_lambda: k,
        boundary_max,
        eigen_residual: eig / umax,
        vekua_residual_closed_form: vmax / wmax,
        vekua_residual_discrete: discrete,
        witness: BesselWitness {
            self_pairing_re: pairing.re,
            self_pairing_im: pairing.im,
            norm_sqr: norm * norm,
            gradient_energy,
            mass_term,
            transpose_image_defect: image / wmax,
        },
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::bergman::{exterior_points, gram_schmidt, monogenic_basis, vekua_basis};
    use crate::integral::{theodorescu, Coefficient};
    use crate::rng;
    use proptest::prelude::*;

    fn ball(n: usize) -> Arc<DomainGrid> {
        DomainGrid::new(DomainSpec::unit_ball(), n).unwrap()
    }

    fn c(re: f64, im: f64) -> Complex {
        Complex::new(re, im)
    }

    fn sample_tuple(seed: u64) -> [Biquaternion; 4] {
        let mut r = rng::seeded(seed);
        std::array::from_fn(|_| rng::biquaternion(&mut r))
    }

    fn consts(t: &CoefficientTuple) -> [Biquaternion; 4] {
        std::array::from_fn(|j| match t.coefficient(j) {
            Coefficient::Constant(a) => *a,
            Coefficient::Field(_) => panic!("constant expected"),
        })
    }

    #[test]
    fn transpose_of_vector_coefficient() {
        let t = transpose_coeffs(&CoefficientTuple::constant([Biquaternion::unit(1), Biquaternion::ZERO, Biquaternion::ZERO, Biquaternion::ZERO]));
        assert_eq!(consts(&t)[0], -Biquaternion::unit(1));
        assert!(transpose_coeffs(&CoefficientTuple::zero()).is_zero());
        assert!(adjoint_coeffs(&CoefficientTuple::zero()).is_zero());
    }

    #[test]
    fn transpose_and_adjoint_componentwise() {
        let a = sample_tuple(3);
        let t = consts(&transpose_coeffs(&CoefficientTuple::constant(a)));
        let d = consts(&adjoint_coeffs(&CoefficientTuple::constant(a)));
        // Oracle: bar negates c1..c3, conj conjugates each component.
        let bar = |q: Biquaternion| Biquaternion::new(q.c[0], -q.c[1], -q.c[2], -q.c[3]);
        let cj = |q: Biquaternion| Biquaternion::new(q.c[0].conj(), q.c[1].conj(), q.c[2].conj(), q.c[3].conj());
        assert_eq!(t, [bar(a[0]), a[3], bar(a[2]), a[1]]);
        assert_eq!(d, [bar(cj(a[0])), cj(a[3]), bar(cj(a[2])), cj(a[1])]);
        let tt = consts(&transpose_coeffs(&transpose_coeffs(&CoefficientTuple::constant(a))));
        assert_eq!(tt, a);
    }

    #[test]
    fn bessel_coefficient_is_adjoint_fixed_point() {
        let a1 = Biquaternion::unit(1) * c(0.0, std::f64::consts::PI);
        let d = consts(&adjoint_coeffs(&CoefficientTuple::constant([a1, Biquaternion::ZERO, Biquaternion::ZERO, Biquaternion::ZERO])));
        assert_eq!(d[0], a1);
        let real = Biquaternion::scalar(c(0.7, 0.0));
        let d = consts(&adjoint_coeffs(&CoefficientTuple::constant([real; 4])));
        assert_eq!(d, [real; 4]);
    }

    proptest! {
        #[test]
        fn adjoint_equals_transpose_for_real_coefficients(v in proptest::array::uniform16(-1.0f64..1.0)) {
            let a: [Biquaternion; 4] = std::array::from_fn(|j| Biquaternion::from_real([v[4 * j], v[4 * j + 1], v[4 * j + 2], v[4 * j + 3]]));
            let t = CoefficientTuple::constant(a);
            prop_assert_eq!(consts(&adjoint_coeffs(&t)), consts(&transpose_coeffs(&t)));
        }
    }

    #[test]
    fn transpose_identity_for_q_a() {
        // (v | Q_A u) = (Q_{A*} v | u) for arbitrary fields.
        let grid = ball(10);
        let mut r = rng::seeded(11);
        let u = rng::field(&grid, &mut r);
        let v = rng::field(&grid, &mut r);
        let a = CoefficientTuple::constant(sample_tuple(5));
        let lhs = duality_pairing(&v, &q_a_apply(&a, &u).unwrap()).unwrap();
        let rhs = duality_pairing(&q_a_apply(&transpose_coeffs(&a), &v).unwrap(), &u).unwrap();
        assert!((lhs - rhs).norm() < 1e-12 * lhs.norm().max(1.0));
        let lhs = l2_inner(&v, &q_a_apply(&a, &u).unwrap()).unwrap();
        let rhs = l2_inner(&q_a_apply(&adjoint_coeffs(&a), &v).unwrap(), &u).unwrap();
        assert!((lhs - rhs).norm() < 1e-12 * lhs.norm().max(1.0));
    }

    #[test]
    fn pairing_examples() {
        let grid = DomainGrid::new(DomainSpec::unit_box(), 8).unwrap();
        let e1 = BiquatField::constant(&grid, Biquaternion::unit(1));
        let p = duality_pairing(&e1, &e1).unwrap();
        assert!((p - c(grid.total_weight(), 0.0)).norm() < 1e-14);
        let mut r = rng::seeded(2);
        let real = |f: BiquatField| f.map(|q| Biquaternion::from_real(q.c.map(|z| z.re)));
        let u = real(rng::field(&grid, &mut r));
        let v = real(rng::field(&grid, &mut r));
        let a = duality_pairing(&u, &v).unwrap();
        let b = duality_pairing(&v, &u).unwrap();
        assert!((a - b).norm() < 1e-13);
        let other = ball(8);
        assert!(matches!(duality_pairing(&u, &BiquatField::zeros(&other)), Err(VekuaError::GridMismatch)));
    }

    #[test]
    fn theodorescu_is_symmetric_for_pairing() {
        let grid = ball(12);
        let mut r = rng::seeded(9);
        let u = rng::field(&grid, &mut r);
        let v = rng::field(&grid, &mut r);
        let lhs = duality_pairing(&v, &theodorescu(&u)).unwrap();
        let rhs = duality_pairing(&theodorescu(&v), &u).unwrap();
        assert!((lhs - rhs).norm() < 1e-9 * lhs.norm().max(1.0));
    }

    #[test]
    fn bumps_respect_margin() {
        let grid = ball(16);
        let bumps = standard_bumps(&grid, 5).unwrap();
        assert_eq!(bumps.len(), 5);
        for b in &bumps {
            assert!(b.support_margin >= 4.0 * grid.h_max());
            for (cell, q) in b.field.values().iter().enumerate() {
                if grid.boundary_distance(cell) <= b.support_margin {
                    assert!(q.norm() <= 1e-12);
                }
            }
        }
        let err = TestFunctionW0::bump(&grid, [0.6, 0.0, 0.0], 0.3, [Biquaternion::ONE; 4]);
        assert!(matches!(err, Err(VekuaError::SupportMarginViolated { .. })));
    }

    #[test]
    fn bump_jet_matches_finite_differences() {
        let grid = ball(16);
        let b = &standard_bumps(&grid, 5).unwrap()[4];
        let x = [-0.05, 0.2, -0.15];
        let j = b.jet(x);
        let h = 1e-5;
        for a in 0..3 {
            let mut p = x;
            let mut m = x;
            p[a] += h;
            m[a] -= h;
            let d = (b.value(p) - b.value(m)) * (0.5 / h);
            assert!((d - j.g[a]).norm() < 1e-7);
            let dd = (b.jet(p).g[a] - b.jet(m).g[a]) * (0.5 / h);
            assert!((dd - j.h[a][a]).norm() < 1e-6);
        }
    }

    #[test]
    fn annihilator_trivial_cases() {
        let grid = ball(16);
        let zero = TestFunctionW0::bump(&grid, [0.0; 3], 0.4, [Biquaternion::ZERO; 4]).unwrap();
        let a = CoefficientTuple::constant(sample_tuple(1));
        assert_eq!(annihilator_element(&a, &zero).unwrap().sup_norm(), 0.0);
        let u = &standard_bumps(&grid, 2).unwrap()[1];
        let v = annihilator_element(&CoefficientTuple::zero(), u).unwrap();
        assert_eq!(v.values(), apply_d(&u.field).values());
    }

    #[test]
    fn annihilator_pairs_to_zero_with_vekua_solutions() {
        // For w with D w = Q_A w exactly on the grid, (w | (D - Q_{A*}) u) = 0
        // by discrete summation by parts.
        let grid = ball(16);
        let u = &standard_bumps(&grid, 3).unwrap()[2];
        let a = CoefficientTuple::constant(sample_tuple(8));
        let mut r = rng::seeded(4);
        let w = rng::field(&grid, &mut r);
        let lhs = duality_pairing(&w, &annihilator_element(&a, u).unwrap()).unwrap();
        let dw = apply_d(&w).sub(&q_a_apply(&a, &w).unwrap()).unwrap();
        let rhs = duality_pairing(&dw, &u.field).unwrap();
        assert!((lhs - rhs).norm() < 1e-11 * lhs.norm().max(1.0));
    }

    #[test]
    fn transpose_duality_converges_at_second_order() {
        let v_of = |g: &Arc<DomainGrid>| {
            BiquatField::sample(g, |x| Biquaternion::new(c(x[0] * x[1], 0.3), c(x[2].sin(), 0.0), c(1.0, x[0]), c(x[1] * x[1], -x[2])))
        };
        let mut errs = Vec::new();
        for n in [16, 32] {
            let grid = ball(n);
            let u = &standard_bumps(&grid, 5).unwrap()[4];
            errs.push(transpose_duality_defect(u, &v_of(&grid)).unwrap());
        }
        let order = (errs[0] / errs[1]).log2();
        assert!(order >= 1.8, "{errs:?}");
    }

    #[test]
    fn orthogonality_hodge_case_refines() {
        let mut out = Vec::new();
        for n in [16, 24] {
            let grid = ball(n);
            let pts = exterior_points(grid.spec(), 8, 1.5).unwrap();
            let basis = gram_schmidt(&monogenic_basis(&grid, &pts).unwrap()).unwrap();
            let bumps = standard_bumps(&grid, 5).unwrap();
            let a = CoefficientTuple::zero();
            let m = bumps
                .iter()
                .map(|u| orthogonality_check(&a, &basis, u).unwrap())
                .fold(0.0, f64::max);
            out.push(m);
        }
        assert!(out[1] < out[0] && out[1] < 0.05, "{out:?}");
    }

    #[test]
    fn orthogonality_constant_preset() {
        let grid = ball(16);
        let a = CoefficientTuple::constant([Biquaternion::scalar(c(0.125, 0.0)), Biquaternion::ZERO, Biquaternion::ZERO, Biquaternion::ZERO]);
        let pts = exterior_points(grid.spec(), 4, 1.5).unwrap();
        let mono = monogenic_basis(&grid, &pts).unwrap();
        let basis = gram_schmidt(&vekua_basis(&a, &mono, 1e-12, 200).unwrap()).unwrap();
        let u = &standard_bumps(&grid, 1).unwrap()[0];
        assert!(orthogonality_check(&a, &basis, u).unwrap() < 0.1);
        let zero = TestFunctionW0::bump(&grid, [0.0; 3], 0.4, [Biquaternion::ZERO; 4]).unwrap();
        assert_eq!(orthogonality_check(&a, &basis, &zero).unwrap(), 0.0);
    }

    #[test]
    fn schrodinger_unit_f() {
        let grid = ball(10);
        let data = SchrodingerData::new(&grid, unit_f()).unwrap();
        for w in [linear_w(), curved_w()] {
            let (s, v) = schrodinger_factorization_check(&data, &w).unwrap();
            assert!(s <= 1e-12 && v <= 1e-12, "{s} {v}");
        }
    }

    #[test]
    fn schrodinger_exponential_f() {
        let grid = ball(12);
        let data = SchrodingerData::new(&grid, exp_x1()).unwrap();
        for w in [linear_w(), curved_w()] {
            let (s, v) = schrodinger_factorization_check(&data, &w).unwrap();
            assert!(s <= 1e-10 && v <= 1e-10, "{s} {v}");
        }
        assert!(data.darboux_defect() <= 1e-12);
        let data = SchrodingerData::new(&grid, quadratic_x1()).unwrap();
        let (s, v) = schrodinger_factorization_check(&data, &curved_w()).unwrap();
        assert!(s <= 1e-10 && v <= 1e-10, "{s} {v}");
        assert!(data.darboux_defect() <= 1e-12);
        for j in 0..3 {
            for k in 0..3 {
                assert_eq!(data.r[j][k].values(), data.r[k][j].values());
            }
        }
    }

    #[test]
    fn vanishing_f_is_rejected() {
        let grid = ball(8);
        let f: ScalarJetFn = Arc::new(|x: Point| ScalarJet::coord(x, 0) - ScalarJet::real(grid_x()));
        fn grid_x() -> f64 {
            -1.0 + 2.0 * 3.5 / 8.0
        }
        assert!(matches!(SchrodingerData::new(&grid, f.clone()), Err(VekuaError::VanishingFunction(_))));
        assert!(matches!(df_factorization_check(&grid, &f, &linear_w()), Err(VekuaError::VanishingFunction(_))));
    }

    #[test]
    fn df_identity_holds() {
        let grid = ball(12);
        for f in [unit_f(), quadratic_x1(), exp_x1()] {
            for u in [linear_w(), curved_w()] {
                let r = df_factorization_check(&grid, &f, &u).unwrap();
                assert!(r <= 1e-10, "{r}");
            }
        }
        let scalar_u: BiquatJetFn = Arc::new(|x: Point| {
            let j = ScalarJet::coord(x, 1).sin() * ScalarJet::coord(x, 2);
            j.times(Biquaternion::ONE)
        });
        assert!(df_factorization_check(&grid, &quadratic_x1(), &scalar_u).unwrap() <= 1e-10);
    }

    #[test]
    fn df_cross_term_is_cross_product_for_scalar_u() {
        let x = [0.3, -0.2, 0.5];
        let f = quadratic_x1()(x);
        let u = ScalarJet::coord(x, 1).sin() * ScalarJet::coord(x, 2) + ScalarJet::coord(x, 0);
        assert!(df_scalar_cross_defect(&f, &u) < 1e-14);
    }

    #[test]
    fn df_residual_is_linear_in_u() {
        let grid = ball(10);
        let sum: BiquatJetFn = Arc::new(|x: Point| linear_w()(x) + curved_w()(x));
        assert!(df_factorization_check(&grid, &exp_x1(), &sum).unwrap() <= 1e-10);
    }

    #[test]
    fn bessel_root_is_pi() {
        assert!((j_half_first_root() - std::f64::consts::PI).abs() < 1e-14);
    }

    #[test]
    fn bessel_jet_matches_finite_differences() {
        let k = std::f64::consts::PI;
        for x in [[0.3, -0.2, 0.4], [0.001, 0.002, -0.001]] {
            let j = bessel_jet(k, x);
            let h = 1e-5;
            for a in 0..3 {
                let mut p = x;
                let mut m = x;
                p[a] += h;
                m[a] -= h;
                let d = (bessel_jet(k, p).v - bessel_jet(k, m).v) / (2.0 * h);
                assert!((d - j.g[a]).norm() < 1e-8);
                for b in 0..3 {
                    let d2 = (bessel_jet(k, p).g[b] - bessel_jet(k, m).g[b]) / (2.0 * h);
                    assert!((d2 - j.h[a][b]).norm() < 1e-7);
                }
            }
        }
        assert_eq!(bessel_jet(k, [0.0; 3]).v, c(k, 0.0));
    }

    #[test]
    fn bessel_report() {
        let grid = ball(16);
        let r = bessel_example(&grid).unwrap();
        assert!((r.sqrt_lambda - std::f64::consts::PI).abs() < 1e-14);
        assert!(r.boundary_max <= 1e-12);
        assert!(r.eigen_residual <= 1e-10);
        assert!(r.vekua_residual_closed_form <= 1e-8);
        assert!(r.witness.transpose_image_defect <= 1e-14);
        assert!(r.witness.norm_sqr > 1.0);
        let box_grid = DomainGrid::new(DomainSpec::unit_box(), 8).unwrap();
        assert!(matches!(bessel_example(&box_grid), Err(VekuaError::NotABall)));
    }
}
