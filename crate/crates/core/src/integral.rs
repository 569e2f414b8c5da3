//! Volume and boundary integral operators, the coefficient operator `Q_A`,
//! the Neumann-series inverse of `S_G^A`, and the Helmholtz-type kernels.

use std::sync::Arc;

use serde::{Deserialize, Serialize};

use crate::biquat::{Biquaternion, Complex, ZeroDivisorClass, DEFAULT_ZERO_DIVISOR_TOL, I_C, ZERO_C};
use crate::error::{Result, VekuaError};
use crate::geom::{self, Point};
use crate::grid::{apply_d, same_grid, BiquatField, DomainGrid, DomainSpec, SurfaceMesh};
use crate::lattice::{self, convolve, Full, RealScalar, RealVec, Table};

const FOUR_PI: f64 = 4.0 * std::f64::consts::PI;

#[inline]
fn cauchy_vec(x: Point) -> [f64; 3] {
    let r2 = geom::dot(x, x);
    let s = -1.0 / (FOUR_PI * r2 * r2.sqrt());
    geom::scale(x, s)
}

/// Cauchy kernel `E(x) = -x / (4 pi |x|^3)`.
pub fn cauchy_kernel(x: Point) -> Result<Biquaternion> {
    if geom::norm(x) == 0.0 {
        return Err(VekuaError::Singular);
    }
    Ok(Biquaternion::real_vector(cauchy_vec(x)))
}

fn field_slices<'a>(fields: &[&'a BiquatField]) -> Result<Vec<&'a [Biquaternion]>> {
    if let Some(first) = fields.first() {
        for f in &fields[1..] {
            same_grid(first.grid(), f.grid())?;
        }
    }
    Ok(fields.iter().map(|f| f.values()).collect())
}

fn wrap(grid: &Arc<DomainGrid>, out: Vec<Vec<Biquaternion>>) -> Vec<BiquatField> {
    out.into_iter()
        .map(|v| BiquatField::new(grid, v).expect("convolution preserves length"))
        .collect()
}

fn cauchy_table(grid: &DomainGrid) -> Table<RealVec> {
    Table::build(grid, RealVec::default(), |d| RealVec(cauchy_vec(d)))
}

/// Theodorescu transform `T_G u(x) = -sum_{y != x} w E(y - x) u(y)`.
pub fn theodorescu(u: &BiquatField) -> BiquatField {
    theodorescu_many(&[u]).expect("single field").pop().unwrap()
}

/// Theodorescu transform of several fields on one grid.
pub fn theodorescu_many(fields: &[&BiquatField]) -> Result<Vec<BiquatField>> {
    let Some(first) = fields.first() else {
        return Ok(Vec::new());
    };
    let grid = first.grid();
    let inputs = field_slices(fields)?;
    let out = convolve(grid, &cauchy_table(grid), &inputs);
    Ok(wrap(grid, out))
}

/// `T_G u` at an arbitrary point; a source cell whose center coincides with
/// `x` is skipped.
pub fn theodorescu_at(u: &BiquatField, x: Point) -> Biquaternion {
    let grid = u.grid();
    let w = grid.weight();
    let eps = 1e-12 * grid.h_max();
    let mut acc = Biquaternion::ZERO;
    for (c, v) in u.values().iter().enumerate() {
        let d = geom::sub(x, grid.center(c));
        if geom::norm(d) > eps {
            acc += crate::biquat::real_vec_mul(geom::scale(cauchy_vec(d), w), v);
        }
    }
    acc
}

fn newtonian_table(grid: &DomainGrid) -> Table<RealScalar> {
    let selfv = lattice::newtonian_self_integral(grid.h());
    Table::build(grid, RealScalar(selfv), |d| RealScalar(1.0 / (FOUR_PI * geom::norm(d))))
}

/// Newtonian potential `L_G u(x) = (1/4 pi) int u(y) / |x - y| dV`, with the
/// singular cell integrated exactly over the cell box.
pub fn newtonian_potential(u: &BiquatField) -> BiquatField {
    newtonian_many(&[u]).expect("single field").pop().unwrap()
}

pub fn newtonian_many(fields: &[&BiquatField]) -> Result<Vec<BiquatField>> {
    let Some(first) = fields.first() else {
        return Ok(Vec::new());
    };
    let grid = first.grid();
    let inputs = field_slices(fields)?;
    Ok(wrap(grid, convolve(grid, &newtonian_table(grid), &inputs)))
}

/// Sign selector for the Helmholtz-type kernels `K_{-alpha}` and `K_{+alpha}`,
/// fundamental solutions of `D - alpha` and `D + alpha` respectively.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Sign {
    Minus,
    Plus,
}

impl Sign {
    fn factor(self) -> f64 {
        match self {
            Sign::Minus => -1.0,
            Sign::Plus => 1.0,
        }
    }
}

/// `K_{-+alpha}(x) = -e^{i alpha r} / 4 pi (-+alpha / r + x / r^3 - i alpha x / r^2)`.
pub fn helmholtz_kernel(alpha: Complex, sign: Sign, x: Point) -> Result<Biquaternion> {
    if alpha.im < 0.0 || !alpha.is_finite() {
        return Err(VekuaError::InvalidParameter(format!(
            "Helmholtz parameter needs Im >= 0, got {alpha}"
        )));
    }
    if geom::norm(x) == 0.0 {
        return Err(VekuaError::Singular);
    }
    Ok(resolvent_kernel_raw(alpha * sign.factor(), alpha, x))
}

/// Kernel of `(D + xi)^{-1}` using the decaying exponent `mu`
/// (`mu = +-xi`, `Im mu >= 0`).
#[inline]
fn resolvent_kernel_raw(xi: Complex, mu: Complex, x: Point) -> Biquaternion {
    let r = geom::norm(x);
    let ph = (I_C * mu * r).exp() * (-1.0 / FOUR_PI);
    let vec_coef = ph * (Complex::new(1.0 / (r * r * r), 0.0) - I_C * mu / (r * r));
    Biquaternion::new(
        ph * xi / r,
        vec_coef * x[0],
        vec_coef * x[1],
        vec_coef * x[2],
    )
}

/// Decaying exponent for `(D + xi)^{-1}` and its derivative in `xi`.
fn resolvent_branch(xi: Complex) -> (Complex, f64) {
    if xi.im <= 0.0 {
        (-xi, -1.0)
    } else {
        (xi, 1.0)
    }
}

fn resolvent_self(grid: &DomainGrid, xi: Complex, mu: Complex) -> Biquaternion {
    let c = lattice::newtonian_self_integral(grid.h());
    let w = grid.weight();
    Biquaternion::scalar(-xi * (c + I_C * mu * (w / FOUR_PI)))
}

fn resolvent_derivative_raw(xi: Complex, mu: Complex, s: f64, x: Point) -> Biquaternion {
    let r = geom::norm(x);
    let ph = (I_C * mu * r).exp() * (-1.0 / FOUR_PI);
    let sc = ph * (I_C * xi * s + 1.0 / r);
    let vc = ph * mu * (s / r);
    Biquaternion::new(sc, vc * x[0], vc * x[1], vc * x[2])
}

fn resolvent_derivative_self(grid: &DomainGrid, xi: Complex, mu: Complex, s: f64) -> Biquaternion {
    let c = lattice::newtonian_self_integral(grid.h());
    let w = grid.weight();
    Biquaternion::scalar(-(c + I_C * mu * (w / FOUR_PI)) - I_C * xi * (s * w / FOUR_PI))
}

/// `T_G^xi`, the volume potential inverting `D + xi` for scalar `xi`.
pub fn t_g_xi_many(fields: &[&BiquatField], xi: Complex) -> Result<Vec<BiquatField>> {
    let Some(first) = fields.first() else {
        return Ok(Vec::new());
    };
    if xi == ZERO_C {
        return theodorescu_many(fields);
    }
    let grid = first.grid();
    let inputs = field_slices(fields)?;
    let (mu, _) = resolvent_branch(xi);
    let table = Table::build(grid, Full(resolvent_self(grid, xi, mu)), |d| {
        Full(resolvent_kernel_raw(xi, mu, d))
    });
    Ok(wrap(grid, convolve(grid, &table, &inputs)))
}

pub fn t_g_xi(u: &BiquatField, xi: Complex) -> BiquatField {
    t_g_xi_many(&[u], xi).expect("single field").pop().unwrap()
}

/// Derivative of `T_G^xi u` with respect to `xi`, from the closed-form
/// derivative of the kernel.
pub fn t_g_xi_derivative(u: &BiquatField, xi: Complex) -> BiquatField {
    let grid = u.grid();
    let (mu, s) = resolvent_branch(xi);
    let table = Table::build(grid, Full(resolvent_derivative_self(grid, xi, mu, s)), |d| {
        Full(resolvent_derivative_raw(xi, mu, s, d))
    });
    wrap(grid, convolve(grid, &table, &[u.values()])).pop().unwrap()
}

/// Classification of a biquaternion parameter `alpha` for `D + M^alpha`.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum AlphaBranch {
    Scalar,
    NonzeroVecSquare,
    NullVecSquare,
    DivisorNonzeroSc,
    DivisorZeroSc,
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct AlphaParam {
    pub alpha: Biquaternion,
    pub branch: AlphaBranch,
    /// Square root of the quaternion square of the vector part, `Im >= 0`.
    pub lambda: Complex,
    pub xi_plus: Complex,
    pub xi_minus: Complex,
}

fn classify_alpha(alpha: &Biquaternion) -> AlphaBranch {
    let tol = DEFAULT_ZERO_DIVISOR_TOL;
    let v = alpha.vec_part();
    let scale = alpha.norm().max(1.0);
    if v.norm() <= tol * scale {
        return AlphaBranch::Scalar;
    }
    if alpha.classify_zero_divisor(tol) == ZeroDivisorClass::ZeroDivisor {
        return if alpha.sc().norm() <= tol * scale {
            AlphaBranch::DivisorZeroSc
        } else {
            AlphaBranch::DivisorNonzeroSc
        };
    }
    if v.vec_dot(&v).norm() <= tol * v.norm_sqr() {
        AlphaBranch::NullVecSquare
    } else {
        AlphaBranch::NonzeroVecSquare
    }
}

impl AlphaParam {
    pub fn new(alpha: Biquaternion) -> Result<Self> {
        if !alpha.is_finite() {
            return Err(VekuaError::InvalidParameter("alpha must be finite".into()));
        }
        let branch = classify_alpha(&alpha);
        let v = alpha.vec_part();
        // Quaternion square of a vector is minus its bilinear dot product.
        let mut lambda = (-v.vec_dot(&v)).sqrt();
        if lambda.im < 0.0 {
            lambda = -lambda;
        }
        if branch == AlphaBranch::Scalar {
            lambda = ZERO_C;
        }
        let a0 = alpha.sc();
        Ok(AlphaParam {
            alpha,
            branch,
            lambda,
            xi_plus: a0 + lambda,
            xi_minus: a0 - lambda,
        })
    }

    /// Right factors `(lambda +- alpha_vec) / (2 lambda)`.
    pub fn projectors(&self) -> Option<(Biquaternion, Biquaternion)> {
        if self.lambda.norm() == 0.0 {
            return None;
        }
        let v = self.alpha.vec_part();
        let l = Biquaternion::scalar(self.lambda);
        let inv = 1.0 / (2.0 * self.lambda);
        Some(((l + v) * inv, (l - v) * inv))
    }
}

/// `T_G^alpha u`, a right inverse of `D_alpha = D + M^alpha`.
pub fn t_g_alpha(ap: &AlphaParam, u: &BiquatField) -> Result<BiquatField> {
    let actual = classify_alpha(&ap.alpha);
    if actual != ap.branch {
        return Err(VekuaError::BranchMismatch {
            expected: format!("{:?}", ap.branch),
            actual: format!("{actual:?}"),
        });
    }
    match ap.branch {
        AlphaBranch::Scalar => Ok(t_g_xi(u, ap.alpha.sc())),
        AlphaBranch::NonzeroVecSquare | AlphaBranch::DivisorNonzeroSc => {
            let (pp, pm) = ap.projectors().ok_or(VekuaError::Singular)?;
            let tp = t_g_xi(u, ap.xi_plus);
            let tm = t_g_xi(u, ap.xi_minus);
            tp.right_mul(pp).add(&tm.right_mul(pm))
        }
        AlphaBranch::NullVecSquare => {
            let a0 = ap.alpha.sc();
            let t = t_g_xi(u, a0);
            let dt = t_g_xi_derivative(u, a0);
            t.add(&dt.right_mul(ap.alpha.vec_part()))
        }
        AlphaBranch::DivisorZeroSc => {
            let t = theodorescu(u);
            let l = newtonian_potential(u);
            t.sub(&l.right_mul(ap.alpha))
        }
    }
}

/// Cauchy integral value with a flag for targets close to the surface.
#[derive(Clone, Copy, Debug)]
pub struct CauchyValue {
    pub value: Biquaternion,
    pub near_singular: bool,
}

/// `C_Gamma psi(x) = sum area E(y - x) nu(y) psi(y)` over the mesh.
pub fn cauchy_boundary(mesh: &SurfaceMesh, psi: &[Biquaternion], x: Point) -> Result<CauchyValue> {
    if psi.len() != mesh.len() {
        return Err(VekuaError::InvalidParameter(format!(
            "{} boundary values for {} mesh points",
            psi.len(),
            mesh.len()
        )));
    }
    let spacing = mesh.spacing();
    let mut near = false;
    let mut acc = Biquaternion::ZERO;
    for ((y, nu), (a, p)) in mesh
        .points
        .iter()
        .zip(&mesh.normals)
        .zip(mesh.areas.iter().zip(psi))
    {
        let d = geom::sub(*y, x);
        let r = geom::norm(d);
        if r == 0.0 {
            return Err(VekuaError::Singular);
        }
        if r < 0.5 * spacing {
            near = true;
        }
        let e = Biquaternion::real_vector(geom::scale(cauchy_vec(d), *a));
        acc += e * Biquaternion::real_vector(*nu) * *p;
    }
    Ok(CauchyValue {
        value: acc,
        near_singular: near,
    })
}

/// Result of a Borel-Pompeiu check.
#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct BorelPompeiuReport {
    /// `max |C u + T D u - u| / max |u|` over the probes.
    pub residual: f64,
    pub probes: usize,
    pub near_singular: usize,
}

/// Checks `u = C_Gamma[u] + T_G[D u]` at the probe points for an analytic
/// `u`; `D u` is taken by finite differences of the sampled field.
pub fn borel_pompeiu_residual<F>(
    grid: &Arc<DomainGrid>,
    mesh: &SurfaceMesh,
    u: F,
    probes: &[Point],
) -> Result<BorelPompeiuReport>
where
    F: Fn(Point) -> Biquaternion,
{
    if !matches!(grid.spec(), DomainSpec::Ball { .. }) {
        return Err(VekuaError::NotABall);
    }
    let sampled = BiquatField::sample(grid, &u);
    let du = apply_d(&sampled);
    let trace: Vec<Biquaternion> = mesh.points.iter().map(|&y| u(y)).collect();
    let umax = sampled.sup_norm().max(f64::MIN_POSITIVE);
    let mut worst = 0.0f64;
    let mut near = 0;
    for &x in probes {
        let c = cauchy_boundary(mesh, &trace, x)?;
        if c.near_singular {
            near += 1;
        }
        let t = theodorescu_at(&du, x);
        worst = worst.max((c.value + t - u(x)).norm() / umax);
    }
    Ok(BorelPompeiuReport {
        residual: worst,
        probes: probes.len(),
        near_singular: near,
    })
}

/// `count` seeded probe points, each the center of a cell whose center lies
/// within `fraction` of the circumscribed radius around the domain center.
pub fn probe_points(grid: &DomainGrid, count: usize, fraction: f64, seed: u64) -> Vec<Point> {
    let mut rng = crate::rng::seeded(seed);
    let center = grid.spec().center();
    let radius = fraction * grid.spec().circumscribed_radius();
    let mut out = Vec::with_capacity(count);
    let mut attempts = 0;
    while out.len() < count && attempts < 100 * count.max(1) {
        attempts += 1;
        let p = crate::rng::point_in_ball(&mut rng, center, radius);
        if let Some(c) = grid.locate(p) {
            out.push(grid.center(c));
        }
    }
    out
}

/// One coefficient of `A`: a constant or a sampled field.
#[derive(Clone, Debug)]
pub enum Coefficient {
    Constant(Biquaternion),
    Field(BiquatField),
}

impl Coefficient {
    fn sup(&self) -> f64 {
        match self {
            Coefficient::Constant(a) => a.norm(),
            Coefficient::Field(f) => f.sup_norm(),
        }
    }

    fn is_zero(&self) -> bool {
        match self {
            Coefficient::Constant(a) => *a == Biquaternion::ZERO,
            Coefficient::Field(f) => f.values().iter().all(|v| *v == Biquaternion::ZERO),
        }
    }

    #[inline]
    pub fn at(&self, cell: usize) -> Biquaternion {
        match self {
            Coefficient::Constant(a) => *a,
            Coefficient::Field(f) => f.values()[cell],
        }
    }

    /// Applies `op` pointwise.
    pub fn map<F: Fn(&Biquaternion) -> Biquaternion>(&self, op: F) -> Coefficient {
        match self {
            Coefficient::Constant(a) => Coefficient::Constant(op(a)),
            Coefficient::Field(f) => Coefficient::Field(f.map(op)),
        }
    }
}

/// `A = (a1, a2, a3, a4)` with sup-norm bounds.
#[derive(Clone, Debug)]
pub struct CoefficientTuple {
    a: [Coefficient; 4],
    bounds: [f64; 4],
}

impl CoefficientTuple {
    pub fn new(a: [Coefficient; 4]) -> Result<Self> {
        for c in &a {
            let finite = match c {
                Coefficient::Constant(v) => v.is_finite(),
                Coefficient::Field(f) => f.is_finite(),
            };
            if !finite {
                return Err(VekuaError::InvalidParameter("coefficients must be finite".into()));
            }
        }
        let bounds = std::array::from_fn(|j| a[j].sup());
        Ok(CoefficientTuple { a, bounds })
    }

    pub fn zero() -> Self {
        Self::constant([Biquaternion::ZERO; 4])
    }

    pub fn constant(a: [Biquaternion; 4]) -> Self {
        CoefficientTuple {
            bounds: a.map(|v| v.norm()),
            a: a.map(Coefficient::Constant),
        }
    }

    pub fn coefficient(&self, j: usize) -> &Coefficient {
        &self.a[j]
    }

    pub fn coefficients(&self) -> &[Coefficient; 4] {
        &self.a
    }

    pub fn bounds(&self) -> [f64; 4] {
        self.bounds
    }

    pub fn sum_bounds(&self) -> f64 {
        self.bounds.iter().sum()
    }

    pub fn is_zero(&self) -> bool {
        self.a.iter().all(Coefficient::is_zero)
    }

    /// Contraction estimate `sqrt2 diam(G) * sqrt2 * sum ||a_j||`.
    pub fn kappa(&self, domain: &DomainSpec) -> f64 {
        2.0 * domain.diameter() * self.sum_bounds()
    }

    fn check_grid(&self, grid: &Arc<DomainGrid>) -> Result<()> {
        for c in &self.a {
            if let Coefficient::Field(f) = c {
                same_grid(f.grid(), grid)?;
            }
        }
        Ok(())
    }
}

/// `Q_A w = w a1 + bar(w) a2 + a3 w + a4 bar(w)`, pointwise.
pub fn q_a_apply(a: &CoefficientTuple, w: &BiquatField) -> Result<BiquatField> {
    a.check_grid(w.grid())?;
    let active: [bool; 4] = std::array::from_fn(|j| !a.a[j].is_zero());
    let values = w
        .values()
        .iter()
        .enumerate()
        .map(|(c, v)| {
            let vb = v.bar();
            let mut out = Biquaternion::ZERO;
            if active[0] {
                out += *v * a.a[0].at(c);
            }
            if active[1] {
                out += vb * a.a[1].at(c);
            }
            if active[2] {
                out += a.a[2].at(c) * *v;
            }
            if active[3] {
                out += a.a[3].at(c) * vb;
            }
            out
        })
        .collect();
    BiquatField::new(w.grid(), values)
}

/// `S_G^A w = w - T_G Q_A w`.
pub fn s_g_a_apply(a: &CoefficientTuple, w: &BiquatField) -> Result<BiquatField> {
    let tq = theodorescu(&q_a_apply(a, w)?);
    w.sub(&tq)
}

/// Outcome of the Neumann iteration for `(S_G^A)^{-1} h`.
#[derive(Clone, Debug)]
pub struct NeumannSolution {
    pub w: BiquatField,
    pub iterations: usize,
    /// `||S w_k - h|| / ||h||` for each iterate, starting at `w_0 = h`.
    pub residuals: Vec<f64>,
    pub kappa: f64,
}

impl NeumannSolution {
    /// Successive residual ratios.
    pub fn ratios(&self) -> Vec<f64> {
        self.residuals
            .windows(2)
            .map(|p| if p[0] > 0.0 { p[1] / p[0] } else { 0.0 })
            .collect()
    }
}

/// Solves `S_G^A w = h` by `w_{k+1} = h + T_G Q_A w_k`.
pub fn s_g_a_inverse(
    a: &CoefficientTuple,
    h: &BiquatField,
    tol: f64,
    max_iter: usize,
) -> Result<NeumannSolution> {
    Ok(s_g_a_inverse_many(a, &[h], tol, max_iter)?.pop().unwrap())
}

/// Batched Neumann iteration; every right-hand side must converge.
pub fn s_g_a_inverse_many(
    a: &CoefficientTuple,
    hs: &[&BiquatField],
    tol: f64,
    max_iter: usize,
) -> Result<Vec<NeumannSolution>> {
    let Some(first) = hs.first() else {
        return Ok(Vec::new());
    };
    let grid = first.grid();
    let kappa = a.kappa(grid.spec());
    if kappa >= 1.0 {
        return Err(VekuaError::ContractionViolated { kappa });
    }
    if !(tol > 0.0) {
        return Err(VekuaError::InvalidParameter(format!("tolerance must be positive, got {tol}")));
    }
    field_slices(hs)?;
    let hnorm: Vec<f64> = hs.iter().map(|h| h.l2_norm()).collect();
    let mut w: Vec<BiquatField> = hs.iter().map(|h| (*h).clone()).collect();
    let mut residuals: Vec<Vec<f64>> = vec![Vec::new(); hs.len()];
    let mut prev: Vec<Option<BiquatField>> = vec![None; hs.len()];
    let mut done: Vec<bool> = hnorm.iter().map(|&n| n == 0.0).collect();
    for (b, d) in done.iter().enumerate() {
        if *d {
            residuals[b].push(0.0);
        }
    }
    let mut iterations = vec![0usize; hs.len()];
    for _ in 0..=max_iter {
        let active: Vec<usize> = (0..hs.len()).filter(|&b| !done[b]).collect();
        if active.is_empty() {
            break;
        }
        let q: Vec<BiquatField> = active
            .iter()
            .map(|&b| q_a_apply(a, &w[b]))
            .collect::<Result<_>>()?;
        let tq = theodorescu_many(&q.iter().collect::<Vec<_>>())?;
        for (&b, p) in active.iter().zip(tq) {
            // S w_k - h = (w_k - h) - T Q w_k = T Q w_{k-1} - T Q w_k.
            let r = match &prev[b] {
                None => p.l2_norm(),
                Some(pp) => pp.sub(&p)?.l2_norm(),
            };
            let rel = r / hnorm[b];
            residuals[b].push(rel);
            if rel <= tol {
                done[b] = true;
                continue;
            }
            if iterations[b] == max_iter {
                return Err(VekuaError::NoConvergence {
                    iterations: max_iter,
                    residual: rel,
                });
            }
            w[b] = hs[b].add(&p)?;
            prev[b] = Some(p);
            iterations[b] += 1;
        }
    }
    Ok(w
        .into_iter()
        .zip(residuals)
        .zip(iterations)
        .map(|((w, residuals), iterations)| NeumannSolution {
            w,
            iterations,
            residuals,
            kappa,
        })
        .collect())
}

/// Interior max of `|D w - Q_A w|` over cells at least two spacings from the
/// boundary, divided by `max |w|`.
pub fn vekua_residual(a: &CoefficientTuple, w: &BiquatField) -> Result<f64> {
    let grid = w.grid();
    let interior = grid.interior_cells(2.0 * grid.h_max());
    let r = apply_d(w).sub(&q_a_apply(a, w)?)?;
    let wmax = w.sup_norm();
    if wmax == 0.0 {
        return Ok(0.0);
    }
    Ok(r.sup_norm_on(&interior) / wmax)
}

/// Power-iteration estimate of the discrete `L2` operator norm of `T_G`.
///
/// `T_G` is self-adjoint for the Hilbert inner product, so `||T v|| / ||v||`
/// along the iteration converges to the norm from below.
pub fn theodorescu_norm(grid: &Arc<DomainGrid>, iterations: usize, seed: u64) -> f64 {
    let mut rng = crate::rng::seeded(seed);
    let mut v = crate::rng::field(grid, &mut rng);
    let mut est = 0.0;
    for _ in 0..iterations.max(1) {
        let nv = v.l2_norm();
        v = v.scale(Complex::new(1.0 / nv, 0.0));
        let tv = theodorescu(&v);
        est = tv.l2_norm();
        v = tv;
    }
    est
}

/// Interior `max |D T_G u - u| / max |u|` over cells two spacings from the
/// boundary.
pub fn right_inverse_residual(u: &BiquatField) -> Result<f64> {
    let grid = u.grid();
    let interior = grid.interior_cells(2.0 * grid.h_max());
    let r = apply_d(&theodorescu(u)).sub(u)?;
    let umax = u.sup_norm();
    if umax == 0.0 {
        return Ok(0.0);
    }
    Ok(r.sup_norm_on(&interior) / umax)
}

/// Interior defect of `D T_G 1 = 1`, the combined quadrature and
/// differencing error of the grid.
pub fn quadrature_defect(grid: &Arc<DomainGrid>) -> f64 {
    right_inverse_residual(&BiquatField::constant(grid, Biquaternion::ONE)).expect("same grid")
}

/// Central-difference residual of `(D -+ alpha) K_{-+alpha}` at `x` with
/// step `h`, relative to the larger of the two terms.
pub fn helmholtz_fd_residual(alpha: Complex, sign: Sign, x: Point, h: f64) -> Result<f64> {
    let k = helmholtz_kernel(alpha, sign, x)?;
    let mut dk = Biquaternion::ZERO;
    for a in 0..3 {
        let mut p = x;
        let mut m = x;
        p[a] += h;
        m[a] -= h;
        let d = (helmholtz_kernel(alpha, sign, p)? - helmholtz_kernel(alpha, sign, m)?) * (0.5 / h);
        dk += Biquaternion::unit(a + 1) * d;
    }
    let ak = k * (alpha * sign.factor());
    Ok((dk + ak).norm() / dk.norm().max(ak.norm()).max(f64::MIN_POSITIVE))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::grid::{l2_inner, laplacian, sc_pairing, sphere_mesh};
    use crate::rng;

    fn ball(n: usize) -> Arc<DomainGrid> {
        DomainGrid::new(DomainSpec::unit_ball(), n).unwrap()
    }

    fn c(re: f64, im: f64) -> Complex {
        Complex::new(re, im)
    }

    /// Smooth field supported in |x| < 0.6.
    fn bump_field(grid: &Arc<DomainGrid>) -> BiquatField {
        BiquatField::sample(grid, |x| {
            let s2 = geom::dot(x, x) / 0.36;
            let b = if s2 < 1.0 { (1.0 - s2).powi(3) } else { 0.0 };
            Biquaternion::new(c(b, 0.5 * b * x[0]), c(b * x[1], 0.0), c(0.0, b), c(b * x[2], -b))
        })
    }

    fn fd_d(f: &dyn Fn(Point) -> Biquaternion, x: Point, h: f64, left: bool) -> Biquaternion {
        let mut acc = Biquaternion::ZERO;
        for k in 0..3 {
            let mut p = x;
            let mut m = x;
            p[k] += h;
            m[k] -= h;
            let d = (f(p) - f(m)) * (0.5 / h);
            let e = Biquaternion::unit(k + 1);
            acc += if left { e * d } else { d * e };
        }
        acc
    }

    #[test]
    fn cauchy_kernel_values() {
        let e = cauchy_kernel([1.0, 0.0, 0.0]).unwrap();
        assert!((e - Biquaternion::unit(1) * (-1.0 / FOUR_PI)).norm() < 1e-16);
        let e = cauchy_kernel([0.0, 2.0, 0.0]).unwrap();
        assert!((e.norm() - 1.0 / (16.0 * std::f64::consts::PI)).abs() < 1e-16);
        assert!(e.sc() == ZERO_C);
        assert!(matches!(cauchy_kernel([0.0; 3]), Err(VekuaError::Singular)));
        let f = |x: Point| cauchy_kernel(x).unwrap();
        assert!(fd_d(&f, [0.7, 0.0, 0.0], 1e-3, true).norm() < 1e-5);
        assert!(fd_d(&f, [0.3, -0.4, 0.5], 1e-3, false).norm() < 1e-5);
    }

    #[test]
    fn theodorescu_of_zero_is_zero() {
        let g = ball(8);
        assert_eq!(theodorescu(&BiquatField::zeros(&g)).sup_norm(), 0.0);
    }

    #[test]
    fn theodorescu_matches_pointwise_definition() {
        let g = ball(10);
        let mut r = rng::seeded(5);
        let u = rng::field(&g, &mut r);
        let tu = theodorescu(&u);
        let w = g.weight();
        for cidx in (0..g.len()).step_by(37) {
            let x = g.center(cidx);
            let mut acc = Biquaternion::ZERO;
            for s in 0..g.len() {
                if s != cidx {
                    let y = g.center(s);
                    acc -= cauchy_kernel(geom::sub(y, x)).unwrap() * u.values()[s] * w;
                }
            }
            assert!((tu.values()[cidx] - acc).norm() < 1e-12);
            assert!((theodorescu_at(&u, x) - acc).norm() < 1e-12);
        }
    }

    #[test]
    fn theodorescu_is_deterministic_and_batched_consistently() {
        let g = ball(10);
        let mut r = rng::seeded(1);
        let u = rng::field(&g, &mut r);
        let v = rng::field(&g, &mut r);
        let a = theodorescu(&u);
        let both = theodorescu_many(&[&v, &u]).unwrap();
        assert_eq!(a.values(), both[1].values());
    }

    #[test]
    fn right_inverse_converges() {
        let errs: Vec<f64> = [16usize, 24]
            .iter()
            .map(|&n| {
                let g = ball(n);
                let u = bump_field(&g);
                let r = apply_d(&theodorescu(&u)).sub(&u).unwrap();
                let interior = g.interior_cells(2.0 * g.h_max());
                r.sup_norm_on(&interior) / u.sup_norm()
            })
            .collect();
        assert!(errs[1] < errs[0], "{errs:?}");
        assert!(errs[1] < 0.1, "{errs:?}");
    }

    #[test]
    fn right_inverse_helpers() {
        let g = ball(16);
        let r = right_inverse_residual(&bump_field(&g)).unwrap();
        assert!(r > 0.0 && r < 0.2, "{r}");
        assert_eq!(right_inverse_residual(&BiquatField::zeros(&g)).unwrap(), 0.0);
        let q = quadrature_defect(&g);
        assert!(q > 0.0 && q < 0.2, "{q}");
        let f = helmholtz_fd_residual(c(1.0, 1.0), Sign::Plus, [0.5, 0.2, -0.3], 1e-3).unwrap();
        assert!(f < 1e-4, "{f}");
        assert!(helmholtz_fd_residual(c(1.0, 1.0), Sign::Plus, [0.5, 0.2, -0.3], 0.3).unwrap() > f);
    }

    #[test]
    fn theodorescu_symmetric_under_pairing() {
        let g = ball(10);
        let mut r = rng::seeded(11);
        let u = rng::field(&g, &mut r);
        let v = rng::field(&g, &mut r);
        let lhs = sc_pairing(&theodorescu(&u).bar(), &v).unwrap();
        let rhs = sc_pairing(&u.bar(), &theodorescu(&v)).unwrap();
        assert!((lhs - rhs).norm() <= 1e-9 * u.l2_norm() * v.l2_norm());
        let lhs = l2_inner(&theodorescu(&u), &v).unwrap();
        let rhs = l2_inner(&u, &theodorescu(&v)).unwrap();
        assert!((lhs - rhs).norm() <= 1e-12 * u.l2_norm() * v.l2_norm());
    }

    #[test]
    fn norm_bound_on_random_fields() {
        let g = ball(10);
        let mut r = rng::seeded(2);
        let bound = std::f64::consts::SQRT_2 * 2.0;
        for _ in 0..20 {
            let u = rng::field(&g, &mut r);
            assert!(theodorescu(&u).l2_norm() / u.l2_norm() <= bound);
        }
        assert!(theodorescu_norm(&g, 20, 3) <= bound * 1.05);
    }

    #[test]
    fn newtonian_inverts_minus_laplacian() {
        let g = ball(20);
        let u = bump_field(&g);
        let lu = newtonian_potential(&u);
        let r = laplacian(&lu).add(&u).unwrap();
        let interior = g.interior_cells(2.0 * g.h_max());
        assert!(r.sup_norm_on(&interior) / u.sup_norm() < 0.1);
        let mut rr = rng::seeded(4);
        let a = rng::field(&g, &mut rr);
        let b = rng::field(&g, &mut rr);
        let lhs = sc_pairing(&newtonian_potential(&a), &b).unwrap();
        let rhs = sc_pairing(&a, &newtonian_potential(&b)).unwrap();
        assert!((lhs - rhs).norm() <= 1e-10 * a.l2_norm() * b.l2_norm());
    }

    #[test]
    fn cauchy_boundary_of_constant() {
        let mesh = sphere_mesh(&DomainSpec::unit_ball(), 10_000).unwrap();
        let one = vec![Biquaternion::ONE; mesh.len()];
        let inside = cauchy_boundary(&mesh, &one, [0.0; 3]).unwrap();
        assert!((inside.value - Biquaternion::ONE).norm() < 1e-6);
        assert!(!inside.near_singular);
        let outside = cauchy_boundary(&mesh, &one, [1.6, 0.3, 0.0]).unwrap();
        assert!(outside.value.norm() < 1e-2);
        let near = cauchy_boundary(&mesh, &one, mesh.points[0]).is_err();
        assert!(near);
    }

    #[test]
    fn cauchy_boundary_reproduces_monogenic() {
        let mesh = sphere_mesh(&DomainSpec::unit_ball(), 10_000).unwrap();
        let q = [1.5, 0.2, -0.3];
        let f = |x: Point| cauchy_kernel(geom::sub(x, q)).unwrap() * Biquaternion::new(c(1.0, 0.0), c(0.0, 1.0), ZERO_C, c(0.5, 0.0));
        let psi: Vec<_> = mesh.points.iter().map(|&y| f(y)).collect();
        for x in [[0.0, 0.0, 0.0], [0.3, -0.2, 0.4]] {
            let v = cauchy_boundary(&mesh, &psi, x).unwrap().value;
            assert!((v - f(x)).norm() < 1e-3 * f(x).norm(), "{v:?}");
        }
    }

    #[test]
    fn borel_pompeiu_coarse() {
        let g = ball(16);
        let mesh = sphere_mesh(g.spec(), 4000).unwrap();
        let probes = probe_points(&g, 5, 0.5, 9);
        assert_eq!(probes.len(), 5);
        let rep = borel_pompeiu_residual(&g, &mesh, |_| Biquaternion::ONE, &probes).unwrap();
        assert!(rep.residual < 0.02, "{rep:?}");
        let u = |x: Point| Biquaternion::from_real([x[0], 0.0, 0.0, x[1]]);
        let rep = borel_pompeiu_residual(&g, &mesh, u, &probes).unwrap();
        assert!(rep.residual < 0.1, "{rep:?}");
    }

    #[test]
    fn q_a_examples() {
        let g = ball(8);
        let w = BiquatField::constant(&g, Biquaternion::unit(1));
        assert_eq!(q_a_apply(&CoefficientTuple::zero(), &w).unwrap().sup_norm(), 0.0);
        let a = CoefficientTuple::constant([Biquaternion::ONE, Biquaternion::ZERO, Biquaternion::ZERO, Biquaternion::ZERO]);
        assert_eq!(q_a_apply(&a, &w).unwrap().values()[0], Biquaternion::unit(1));
        let ie2 = Biquaternion::new(ZERO_C, ZERO_C, I_C, ZERO_C);
        let w = BiquatField::constant(&g, ie2);
        let a = CoefficientTuple::constant([Biquaternion::ZERO, Biquaternion::ZERO, Biquaternion::ZERO, Biquaternion::ONE]);
        assert_eq!(q_a_apply(&a, &w).unwrap().values()[3], -ie2);
    }

    #[test]
    fn q_a_matches_pointwise_formula() {
        let g = ball(8);
        let mut r = rng::seeded(21);
        let coeffs: [Biquaternion; 4] = std::array::from_fn(|_| rng::biquaternion(&mut r));
        let a = CoefficientTuple::constant(coeffs);
        let w = rng::field(&g, &mut r);
        let q = q_a_apply(&a, &w).unwrap();
        for (v, out) in w.values().iter().zip(q.values()) {
            let expect = crate::biquat::oracle::mul(v, &coeffs[0])
                + crate::biquat::oracle::mul(&v.bar(), &coeffs[1])
                + crate::biquat::oracle::mul(&coeffs[2], v)
                + crate::biquat::oracle::mul(&coeffs[3], &v.bar());
            assert!((expect - *out).norm() < 1e-14);
        }
    }

    #[test]
    fn s_g_a_identity_for_zero_and_linear() {
        let g = ball(8);
        let mut r = rng::seeded(8);
        let w = rng::field(&g, &mut r);
        let s = s_g_a_apply(&CoefficientTuple::zero(), &w).unwrap();
        assert_eq!(s.values(), w.values());
        let a = CoefficientTuple::constant(std::array::from_fn(|_| rng::biquaternion(&mut r) * 0.05));
        let v = rng::field(&g, &mut r);
        let z = c(0.3, -0.7);
        let lhs = s_g_a_apply(&a, &w.add(&v.scale(z)).unwrap()).unwrap();
        let rhs = s_g_a_apply(&a, &w).unwrap().add(&s_g_a_apply(&a, &v).unwrap().scale(z)).unwrap();
        assert!(lhs.sub(&rhs).unwrap().sup_norm() < 1e-12);
    }

    #[test]
    fn d_of_s_g_a_is_vekua_operator() {
        let g = ball(16);
        let w = bump_field(&g);
        let a = CoefficientTuple::constant([Biquaternion::unit(2) * 0.1, Biquaternion::ZERO, Biquaternion::ONE * 0.05, Biquaternion::ZERO]);
        let lhs = apply_d(&s_g_a_apply(&a, &w).unwrap());
        let rhs = apply_d(&w).sub(&q_a_apply(&a, &w).unwrap()).unwrap();
        let interior = g.interior_cells(2.0 * g.h_max());
        let err = lhs.sub(&rhs).unwrap().sup_norm_on(&interior);
        assert!(err < 0.1 * rhs.sup_norm_on(&interior).max(w.sup_norm() * 0.1), "{err}");
    }

    #[test]
    fn neumann_zero_coefficients_one_step() {
        let g = ball(8);
        let mut r = rng::seeded(3);
        let h = rng::field(&g, &mut r);
        let sol = s_g_a_inverse(&CoefficientTuple::zero(), &h, 1e-12, 10).unwrap();
        assert_eq!(sol.iterations, 0);
        assert_eq!(sol.w.values(), h.values());
    }

    #[test]
    fn neumann_contracts_geometrically() {
        let g = ball(10);
        let a = CoefficientTuple::constant([Biquaternion::ONE * 0.125, Biquaternion::ZERO, Biquaternion::ZERO, Biquaternion::ZERO]);
        assert!((a.kappa(g.spec()) - 0.5).abs() < 1e-15);
        let mut r = rng::seeded(4);
        let h = rng::field(&g, &mut r);
        let sol = s_g_a_inverse(&a, &h, 1e-10, 100).unwrap();
        assert!(sol.ratios().iter().all(|&q| q <= 0.6), "{:?}", sol.ratios());
        let check = s_g_a_apply(&a, &sol.w).unwrap().sub(&h).unwrap().l2_norm() / h.l2_norm();
        assert!(check <= 1e-10, "{check}");
        let big = CoefficientTuple::constant([Biquaternion::ONE * 0.25, Biquaternion::ZERO, Biquaternion::ZERO, Biquaternion::ZERO]);
        assert!(matches!(
            s_g_a_inverse(&big, &h, 1e-10, 100),
            Err(VekuaError::ContractionViolated { .. })
        ));
        assert!(matches!(
            s_g_a_inverse(&a, &h, 1e-14, 1),
            Err(VekuaError::NoConvergence { .. })
        ));
    }

    #[test]
    fn helmholtz_kernel_is_fundamental_solution() {
        let h = 1e-3;
        for alpha in [c(2.0, 0.0), c(0.0, 1.0), c(1.0, 1.0)] {
            for sign in [Sign::Minus, Sign::Plus] {
                let f = |x: Point| helmholtz_kernel(alpha, sign, x).unwrap();
                for x in [[0.7, 0.0, 0.0], [0.3, -0.5, 0.4]] {
                    let r = fd_d(&f, x, h, true) + f(x) * (alpha * sign.factor());
                    assert!(r.norm() <= 1e-4 * f(x).norm().max(1.0), "{alpha} {sign:?} {r:?}");
                }
            }
        }
        let e = helmholtz_kernel(ZERO_C, Sign::Minus, [0.2, 0.3, -0.1]).unwrap();
        assert!((e - cauchy_kernel([0.2, 0.3, -0.1]).unwrap()).norm() < 1e-15);
        let k1 = helmholtz_kernel(I_C, Sign::Plus, [1.0, 0.0, 0.0]).unwrap().norm();
        let k2 = helmholtz_kernel(I_C, Sign::Plus, [2.0, 0.0, 0.0]).unwrap().norm();
        assert!(k2 < k1);
        assert!(helmholtz_kernel(c(0.0, -1.0), Sign::Plus, [1.0, 0.0, 0.0]).is_err());
    }

    #[test]
    fn resolvent_derivative_matches_difference_quotient() {
        let x = [0.3, -0.2, 0.5];
        for xi in [c(0.7, -0.2), c(-0.4, 0.9), c(1.5, 0.0)] {
            let (mu, s) = resolvent_branch(xi);
            let d = resolvent_derivative_raw(xi, mu, s, x);
            let eps = 1e-6;
            let num = (resolvent_kernel_raw(xi + eps, mu + s * eps, x)
                - resolvent_kernel_raw(xi - eps, mu - s * eps, x))
                * (0.5 / eps);
            assert!((d - num).norm() < 1e-7, "{xi}");
        }
    }

    #[test]
    fn alpha_branches() {
        let b = |c0: Complex, c1: Complex, c2: Complex, c3: Complex| Biquaternion::new(c0, c1, c2, c3);
        let cases = [
            (b(c(2.0, 0.0), ZERO_C, ZERO_C, ZERO_C), AlphaBranch::Scalar),
            (b(ZERO_C, c(1.0, 0.0), ZERO_C, ZERO_C), AlphaBranch::NonzeroVecSquare),
            (b(c(1.0, 0.0), c(1.0, 0.0), I_C, ZERO_C), AlphaBranch::NullVecSquare),
            (b(I_C, c(1.0, 0.0), ZERO_C, ZERO_C), AlphaBranch::DivisorNonzeroSc),
            (b(ZERO_C, c(1.0, 0.0), I_C, ZERO_C), AlphaBranch::DivisorZeroSc),
        ];
        for (alpha, branch) in cases {
            let ap = AlphaParam::new(alpha).unwrap();
            assert_eq!(ap.branch, branch, "{alpha:?}");
            assert!(ap.lambda.im >= 0.0);
            if let Some((pp, pm)) = ap.projectors() {
                assert!((pp + pm - Biquaternion::ONE).norm() < 1e-14);
                assert!((pp * pp - pp).norm() < 1e-14);
                assert!((pp * pm).norm() < 1e-14);
            }
        }
        let mut ap = AlphaParam::new(b(c(2.0, 0.0), ZERO_C, ZERO_C, ZERO_C)).unwrap();
        ap.branch = AlphaBranch::NullVecSquare;
        let g = ball(8);
        assert!(matches!(
            t_g_alpha(&ap, &BiquatField::zeros(&g)),
            Err(VekuaError::BranchMismatch { .. })
        ));
    }

    #[test]
    fn scalar_alpha_is_helmholtz_convolution() {
        let g = ball(8);
        let mut r = rng::seeded(6);
        let u = rng::field(&g, &mut r);
        let a0 = 1.3;
        let ap = AlphaParam::new(Biquaternion::from_real([a0, 0.0, 0.0, 0.0])).unwrap();
        let t = t_g_alpha(&ap, &u).unwrap();
        let w = g.weight();
        let selfv = resolvent_self(&g, c(a0, 0.0), c(-a0, 0.0));
        for x in (0..g.len()).step_by(29) {
            let mut acc = selfv * u.values()[x];
            for y in 0..g.len() {
                if y != x {
                    let d = geom::sub(g.center(x), g.center(y));
                    acc += helmholtz_kernel(c(-a0, 0.0), Sign::Minus, d).unwrap() * u.values()[y] * w;
                }
            }
            assert!((t.values()[x] - acc).norm() <= 1e-10 * acc.norm().max(1.0));
        }
    }

    fn reconstruction_error(alpha: Biquaternion, n: usize) -> f64 {
        let g = ball(n);
        let ap = AlphaParam::new(alpha).unwrap();
        let w = bump_field(&g);
        let dw = apply_d(&w).add(&w.right_mul(alpha)).unwrap();
        let back = t_g_alpha(&ap, &dw).unwrap();
        let interior = g.interior_cells(2.0 * g.h_max());
        back.sub(&w).unwrap().sup_norm_on(&interior) / w.sup_norm()
    }

    #[test]
    fn t_alpha_inverts_d_alpha_on_bumps() {
        let b = |c0: Complex, c1: Complex, c2: Complex, c3: Complex| Biquaternion::new(c0, c1, c2, c3);
        for alpha in [
            b(c(1.0, 0.0), ZERO_C, ZERO_C, ZERO_C),
            b(ZERO_C, c(1.0, 0.0), c(0.5, 0.0), ZERO_C),
            b(c(0.5, 0.0), c(1.0, 0.0), I_C, ZERO_C),
            b(I_C, c(1.0, 0.0), ZERO_C, ZERO_C),
            b(ZERO_C, c(1.0, 0.0), I_C, ZERO_C),
        ] {
            let e16 = reconstruction_error(alpha, 16);
            let e24 = reconstruction_error(alpha, 24);
            assert!(e24 < e16 && e24 < 0.08, "{alpha:?}: {e16} {e24}");
        }
    }

    #[test]
    fn divisor_zero_sc_composes_sub_operators() {
        let g = ball(8);
        let mut r = rng::seeded(12);
        let u = rng::field(&g, &mut r);
        let alpha = Biquaternion::new(ZERO_C, c(1.0, 0.0), I_C, ZERO_C);
        let ap = AlphaParam::new(alpha).unwrap();
        let t = t_g_alpha(&ap, &u).unwrap();
        let expect = theodorescu(&u).sub(&newtonian_potential(&u).right_mul(alpha)).unwrap();
        assert!(t.sub(&expect).unwrap().sup_norm() < 1e-13);
        // Limit of the null-vector branch as the scalar part goes to zero.
        let dt = t_g_xi_derivative(&u, ZERO_C);
        assert!(dt.add(&newtonian_potential(&u)).unwrap().sup_norm() < 1e-13);
    }

    #[test]
    fn vekua_residual_sanity() {
        let q = [1.6, 0.0, 0.0];
        let res: Vec<f64> = [16usize, 32]
            .iter()
            .map(|&n| {
                let g = ball(n);
                let w = BiquatField::sample(&g, |x| cauchy_kernel(geom::sub(x, q)).unwrap());
                let fixed = g.interior_cells(0.25);
                apply_d(&w).sup_norm_on(&fixed) / w.sup_norm()
            })
            .collect();
        assert!(res[1] < res[0] / 3.0, "{res:?}");
        let g = ball(16);
        let w = BiquatField::sample(&g, |x| cauchy_kernel(geom::sub(x, q)).unwrap());
        assert!(vekua_residual(&CoefficientTuple::zero(), &w).unwrap() < 0.1);
        let mut rr = rng::seeded(1);
        let noise = rng::field(&g, &mut rr);
        assert!(vekua_residual(&CoefficientTuple::zero(), &noise).unwrap() > 1.0);
    }
}
