//! Finite-dimensional model of the Vekua-Bergman space: bases generated by
//! Cauchy kernels with exterior poles, orthonormalization, reproducing
//! kernels, the Bergman projection, and the right-module kernel.

use std::sync::Arc;

use nalgebra::DMatrix;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::biquat::{Biquaternion, Complex, ZERO_C};
use crate::error::{Result, VekuaError};
use crate::geom::{self, Point};
use crate::grid::{hc_inner, l2_inner, BiquatField, DomainGrid, DomainSpec};
use crate::integral::{cauchy_kernel, s_g_a_inverse_many, Coefficient, CoefficientTuple};

/// Relative norm below which a Gram-Schmidt candidate is dropped.
pub const RANK_DROP_TOL: f64 = 1e-10;
/// Default radius factor for exterior poles.
pub const DEFAULT_SCALE: f64 = 1.5;

/// Where a basis came from.
#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct BasisSource {
    pub exterior_points: Vec<Point>,
    pub scale: f64,
    /// Free-form description of the coefficient tuple.
    pub coefficients: serde_json::Value,
}

/// Orthonormal family in `L2(G)` over the complex numbers.
#[derive(Clone, Debug)]
pub struct OrthonormalBasis {
    members: Vec<BiquatField>,
    gram_residual: f64,
    dropped: Vec<usize>,
    pub source: BasisSource,
}

/// `m` Fibonacci-lattice points on the sphere of radius
/// `scale * circumscribed radius` about the domain center.
pub fn exterior_points(spec: &DomainSpec, m: usize, scale: f64) -> Result<Vec<Point>> {
    if !(scale > 1.0) || !scale.is_finite() {
        return Err(VekuaError::InvalidParameter(format!(
            "exterior scale must exceed 1, got {scale}"
        )));
    }
    if m == 0 {
        return Err(VekuaError::InvalidParameter("need at least one exterior point".into()));
    }
    let c = spec.center();
    let r = scale * spec.circumscribed_radius();
    Ok(geom::fibonacci_sphere(m)
        .into_iter()
        .map(|u| geom::add(c, geom::scale(u, r)))
        .collect())
}

/// Fields `E(. - q) e_j` for every pole `q` and `j = 0..3`, pole-major.
pub fn monogenic_basis(grid: &Arc<DomainGrid>, points: &[Point]) -> Result<Vec<BiquatField>> {
    for &q in points {
        if grid.spec().boundary_distance(q) >= 0.0 {
            return Err(VekuaError::PointInsideDomain(q));
        }
    }
    let out = points
        .par_iter()
        .map(|&q| {
            let e = BiquatField::sample(grid, |x| cauchy_kernel(geom::sub(x, q)).expect("pole is exterior"));
            (0..4).map(|j| e.right_mul(Biquaternion::unit(j))).collect::<Vec<_>>()
        })
        .collect::<Vec<_>>();
    Ok(out.into_iter().flatten().collect())
}

/// Transports monogenic fields into the Vekua space: `w_n = (S_G^A)^{-1} h_n`.
pub fn vekua_basis(
    a: &CoefficientTuple,
    mono: &[BiquatField],
    tol: f64,
    max_iter: usize,
) -> Result<Vec<BiquatField>> {
    if a.is_zero() {
        return Ok(mono.to_vec());
    }
    let refs: Vec<&BiquatField> = mono.iter().collect();
    Ok(s_g_a_inverse_many(a, &refs, tol, max_iter)?
        .into_iter()
        .map(|s| s.w)
        .collect())
}

/// Complex Gram matrix `G_{mn} = <f_m, f_n>`.
pub fn gram_matrix(fields: &[BiquatField]) -> Result<DMatrix<Complex>> {
    let n = fields.len();
    let rows: Vec<Vec<Complex>> = (0..n)
        .into_par_iter()
        .map(|i| {
            (0..n)
                .map(|j| l2_inner(&fields[i], &fields[j]))
                .collect::<Result<Vec<_>>>()
        })
        .collect::<Result<_>>()?;
    Ok(DMatrix::from_fn(n, n, |i, j| rows[i][j]))
}

/// Smallest eigenvalue of a Hermitian matrix.
pub fn hermitian_min_eigenvalue(m: &DMatrix<Complex>) -> f64 {
    let sym = (m + m.adjoint()) * Complex::new(0.5, 0.0);
    sym.symmetric_eigenvalues()
        .iter()
        .cloned()
        .fold(f64::INFINITY, f64::min)
}

/// Smallest eigenvalue of the Gram matrix of the members scaled to unit norm.
pub fn normalized_gram_min_eigenvalue(fields: &[BiquatField]) -> Result<f64> {
    let unit: Vec<BiquatField> = fields
        .iter()
        .map(|f| {
            let n = f.l2_norm();
            if n == 0.0 {
                f.clone()
            } else {
                f.scale(Complex::new(1.0 / n, 0.0))
            }
        })
        .collect();
    Ok(hermitian_min_eigenvalue(&gram_matrix(&unit)?))
}

fn project_out(v: &mut BiquatField, basis: &[BiquatField]) -> Result<()> {
    for phi in basis {
        let c = l2_inner(phi, v)?;
        v.axpy(-c, phi)?;
    }
    Ok(())
}

/// Modified Gram-Schmidt with one reorthogonalization pass; candidates whose
/// norm after projection falls below `RANK_DROP_TOL` times their original
/// norm are dropped and their indices recorded.
pub fn gram_schmidt(fields: &[BiquatField]) -> Result<OrthonormalBasis> {
    if fields.is_empty() {
        return Err(VekuaError::AllFieldsZero);
    }
    let mut members: Vec<BiquatField> = Vec::new();
    let mut dropped = Vec::new();
    for (idx, f) in fields.iter().enumerate() {
        if let Some(first) = members.first() {
            crate::grid::same_grid(first.grid(), f.grid())?;
        }
        let n0 = f.l2_norm();
        if n0 == 0.0 || !n0.is_finite() {
            dropped.push(idx);
            continue;
        }
        let mut v = f.clone();
        project_out(&mut v, &members)?;
        project_out(&mut v, &members)?;
        let n1 = v.l2_norm();
        if n1 < RANK_DROP_TOL * n0 {
            dropped.push(idx);
            continue;
        }
        members.push(v.scale(Complex::new(1.0 / n1, 0.0)));
    }
    if members.is_empty() {
        return Err(VekuaError::AllFieldsZero);
    }
    let gram_residual = gram_residual(&members)?;
    Ok(OrthonormalBasis {
        members,
        gram_residual,
        dropped,
        source: BasisSource::default(),
    })
}

fn gram_residual(members: &[BiquatField]) -> Result<f64> {
    let g = gram_matrix(members)?;
    let mut worst = 0.0f64;
    for i in 0..g.nrows() {
        for j in 0..g.ncols() {
            let target = if i == j { 1.0 } else { 0.0 };
            worst = worst.max((g[(i, j)] - target).norm());
        }
    }
    Ok(worst)
}

/// Everything needed to rebuild a basis container.
#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct BasisManifest {
    pub source: BasisSource,
    pub gram_residual: f64,
    pub dropped: Vec<usize>,
    pub tolerances: std::collections::BTreeMap<String, f64>,
}

impl OrthonormalBasis {
    pub fn members(&self) -> &[BiquatField] {
        &self.members
    }

    pub fn len(&self) -> usize {
        self.members.len()
    }

    pub fn is_empty(&self) -> bool {
        self.members.is_empty()
    }

    pub fn grid(&self) -> &Arc<DomainGrid> {
        self.members[0].grid()
    }

    pub fn gram_residual(&self) -> f64 {
        self.gram_residual
    }

    /// Input indices dropped for rank deficiency.
    pub fn dropped(&self) -> &[usize] {
        &self.dropped
    }

    pub fn with_source(mut self, source: BasisSource) -> Self {
        self.source = source;
        self
    }

    /// Serializes the basis as a "VKB1" container.
    pub fn to_bytes(&self, tolerances: &std::collections::BTreeMap<String, f64>) -> Result<Vec<u8>> {
        let manifest = BasisManifest {
            source: self.source.clone(),
            gram_residual: self.gram_residual,
            dropped: self.dropped.clone(),
            tolerances: tolerances.clone(),
        };
        crate::snapshot::encode_container(&serde_json::to_value(manifest)?, &self.members)
    }

    /// Reads a container written by [`OrthonormalBasis::to_bytes`].
    pub fn from_bytes(bytes: &[u8]) -> Result<(Self, BasisManifest)> {
        let (value, members) = crate::snapshot::decode_container(bytes)?;
        let manifest: BasisManifest = serde_json::from_value(value)?;
        if members.is_empty() {
            return Err(VekuaError::Format("basis container has no members".into()));
        }
        let basis = OrthonormalBasis {
            gram_residual: gram_residual(&members)?,
            members,
            dropped: manifest.dropped.clone(),
            source: manifest.source.clone(),
        };
        Ok((basis, manifest))
    }

    fn interior_cell(&self, x: Point) -> Result<usize> {
        let grid = self.grid();
        let margin = 2.0 * grid.h_max();
        if grid.spec().boundary_distance(x) < margin {
            return Err(VekuaError::PointNotInterior { point: x, margin });
        }
        grid.locate(x)
            .ok_or(VekuaError::PointNotInterior { point: x, margin })
    }

    fn values_at(&self, x: Point) -> Result<Vec<Biquaternion>> {
        let c = self.interior_cell(x)?;
        Ok(self.members.iter().map(|m| m.values()[c]).collect())
    }
}

/// `K_x^k = sum_n phi_n conj(phi_{n,k}(x))`, with `x` taken at the center of
/// its cell.
pub fn kernel_component(basis: &OrthonormalBasis, x: Point, k: usize) -> Result<BiquatField> {
    if k > 3 {
        return Err(VekuaError::InvalidParameter(format!("component index {k} out of range")));
    }
    let px = basis.values_at(x)?;
    let mut out = BiquatField::zeros(basis.grid());
    for (phi, v) in basis.members.iter().zip(&px) {
        out.axpy(v.c[k].conj(), phi)?;
    }
    Ok(out)
}

/// Entries `K_x^{k,j}(t)`, the `j`-th component of `K_x^k` at `t`.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct KernelMatrix {
    pub entries: [[Complex; 4]; 4],
}

impl KernelMatrix {
    /// `max |K_x^{k,j}(t) - conj(K_t^{j,k}(x))|`.
    pub fn hermitian_defect(&self, swapped: &KernelMatrix) -> f64 {
        let mut worst = 0.0f64;
        for k in 0..4 {
            for j in 0..4 {
                worst = worst.max((self.entries[k][j] - swapped.entries[j][k].conj()).norm());
            }
        }
        worst
    }
}

pub fn kernel_matrix(basis: &OrthonormalBasis, x: Point, t: Point) -> Result<KernelMatrix> {
    let px = basis.values_at(x)?;
    let pt = basis.values_at(t)?;
    let mut entries = [[ZERO_C; 4]; 4];
    for (a, b) in px.iter().zip(&pt) {
        for (k, row) in entries.iter_mut().enumerate() {
            for (j, e) in row.iter_mut().enumerate() {
                *e += b.c[j] * a.c[k].conj();
            }
        }
    }
    Ok(KernelMatrix { entries })
}

/// `K(x, t; a) = sum_n phi_n(x) <phi_n(t), a>`.
pub fn bergman_kernel(basis: &OrthonormalBasis, x: Point, t: Point, a: Biquaternion) -> Result<Biquaternion> {
    let px = basis.values_at(x)?;
    let pt = basis.values_at(t)?;
    Ok(px
        .iter()
        .zip(&pt)
        .fold(Biquaternion::ZERO, |acc, (p, q)| acc + *p * q.inner(&a)))
}

/// `sum_n phi_n <phi_n, u>`.
pub fn bergman_project(basis: &OrthonormalBasis, u: &BiquatField) -> Result<BiquatField> {
    let coeffs: Vec<Complex> = basis
        .members
        .par_iter()
        .map(|phi| l2_inner(phi, u))
        .collect::<Result<_>>()?;
    let mut out = BiquatField::zeros(u.grid());
    for (phi, c) in basis.members.iter().zip(coeffs) {
        out.axpy(c, phi)?;
    }
    Ok(out)
}

/// Pointwise defect `max |Q_A(w a) - Q_A(w) a| / |w a|` over cells, sample
/// values `w`, and `a` in `{e1, e2, e3, i e0}`. It vanishes exactly when
/// `Q_A` commutes with right multiplication by constants.
pub fn module_defect(a: &CoefficientTuple, cells: usize) -> f64 {
    let samples = [
        Biquaternion::from_real([0.3, -0.7, 0.2, 0.9]),
        Biquaternion::new(
            Complex::new(0.1, 0.5),
            Complex::new(-0.4, 0.2),
            Complex::new(0.8, -0.3),
            Complex::new(0.0, 0.6),
        ),
    ];
    let rights = [
        Biquaternion::unit(1),
        Biquaternion::unit(2),
        Biquaternion::unit(3),
        Biquaternion::scalar(Complex::new(0.0, 1.0)),
    ];
    let q = |c: usize, w: Biquaternion| {
        let wb = w.bar();
        let co = a.coefficients();
        w * co[0].at(c) + wb * co[1].at(c) + co[2].at(c) * w + co[3].at(c) * wb
    };
    let ncells = a
        .coefficients()
        .iter()
        .find_map(|c| match c {
            Coefficient::Field(f) => Some(f.len()),
            Coefficient::Constant(_) => None,
        })
        .unwrap_or(1)
        .min(cells.max(1));
    let mut worst = 0.0f64;
    for c in 0..ncells {
        for w in samples {
            for r in rights {
                let wr = w * r;
                worst = worst.max((q(c, wr) - q(c, w) * r).norm() / wr.norm());
            }
        }
    }
    worst
}

/// Threshold on [`module_defect`] above which `A` is not of module type.
pub const MODULE_DEFECT_TOL: f64 = 1e-10;

/// Right-module kernel `K(x, t) = (K_x^0(t))^dagger`.
pub fn module_kernel(basis: &OrthonormalBasis, a: &CoefficientTuple, x: Point, t: Point) -> Result<Biquaternion> {
    check_module(a, basis.grid().len())?;
    let px = basis.values_at(x)?;
    let pt = basis.values_at(t)?;
    let k0 = px
        .iter()
        .zip(&pt)
        .fold(Biquaternion::ZERO, |acc, (p, q)| acc + *q * p.c[0].conj());
    Ok(k0.dagger())
}

/// `sum_t w_t K(x, t) w(t)`, i.e. `<<K_x^0 | w>>`.
pub fn module_reproduce(basis: &OrthonormalBasis, a: &CoefficientTuple, x: Point, w: &BiquatField) -> Result<Biquaternion> {
    check_module(a, basis.grid().len())?;
    let k0 = kernel_component(basis, x, 0)?;
    hc_inner(&k0, w)
}

fn check_module(a: &CoefficientTuple, cells: usize) -> Result<()> {
    let defect = module_defect(a, cells);
    if defect > MODULE_DEFECT_TOL {
        return Err(VekuaError::ModuleStructureAbsent { defect });
    }
    Ok(())
}

/// `||P w - w|| / ||w||` in the discrete `L2` norm.
pub fn projection_error(basis: &OrthonormalBasis, w: &BiquatField) -> Result<f64> {
    let p = bergman_project(basis, w)?;
    let n = w.l2_norm();
    if n == 0.0 {
        return Ok(0.0);
    }
    Ok(p.sub(w)?.l2_norm() / n)
}

/// A pole off the Fibonacci lattices used for basis generation.
pub fn held_out_point(spec: &DomainSpec, scale: f64) -> Point {
    let d = [0.3, -0.5, 0.81];
    let u = geom::scale(d, 1.0 / geom::norm(d));
    geom::add(spec.center(), geom::scale(u, scale * spec.circumscribed_radius()))
}
