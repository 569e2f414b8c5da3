//! Voxel discretization of a bounded domain, sampled fields, finite
//! differences, discrete inner products, and the sphere boundary mesh.
//!
//! Cells are classified by their centers only: a cell belongs to the domain
//! iff its center does. Fields store one value per inside cell, in row-major
//! order over the full `n^3` grid (`k` fastest).

use std::ops::{Add, Mul, Sub};
use std::sync::Arc;

use serde::{Deserialize, Serialize};

use crate::biquat::{Biquaternion, Complex, ZERO_C};
use crate::error::{Result, VekuaError};
use crate::geom::{self, Point};

/// Smallest admissible number of cells per axis.
pub const MIN_CELLS_PER_AXIS: usize = 8;

/// A ball or an axis-aligned box.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum DomainSpec {
    Ball { center: Point, radius: f64 },
    Box { min: Point, max: Point },
}

impl DomainSpec {
    pub fn unit_ball() -> Self {
        DomainSpec::Ball {
            center: [0.0; 3],
            radius: 1.0,
        }
    }

    pub fn unit_box() -> Self {
        DomainSpec::Box {
            min: [0.0; 3],
            max: [1.0; 3],
        }
    }

    pub fn validate(&self) -> Result<()> {
        match self {
            DomainSpec::Ball { center, radius } => {
                if !(radius.is_finite() && *radius > 0.0) || center.iter().any(|c| !c.is_finite()) {
                    return Err(VekuaError::InvalidDomain(format!(
                        "ball needs a finite center and positive radius, got radius {radius}"
                    )));
                }
            }
            DomainSpec::Box { min, max } => {
                if (0..3).any(|k| !(min[k].is_finite() && max[k].is_finite() && min[k] < max[k])) {
                    return Err(VekuaError::InvalidDomain(format!(
                        "box needs min < max componentwise, got {min:?} / {max:?}"
                    )));
                }
            }
        }
        Ok(())
    }

    pub fn diameter(&self) -> f64 {
        match self {
            DomainSpec::Ball { radius, .. } => 2.0 * radius,
            DomainSpec::Box { min, max } => geom::dist(*min, *max),
        }
    }

    pub fn volume(&self) -> f64 {
        match self {
            DomainSpec::Ball { radius, .. } => 4.0 / 3.0 * std::f64::consts::PI * radius.powi(3),
            DomainSpec::Box { min, max } => (0..3).map(|k| max[k] - min[k]).product(),
        }
    }

    pub fn center(&self) -> Point {
        match self {
            DomainSpec::Ball { center, .. } => *center,
            DomainSpec::Box { min, max } => geom::scale(geom::add(*min, *max), 0.5),
        }
    }

    /// Radius of the smallest ball about [`DomainSpec::center`] containing the domain.
    pub fn circumscribed_radius(&self) -> f64 {
        match self {
            DomainSpec::Ball { radius, .. } => *radius,
            DomainSpec::Box { .. } => 0.5 * self.diameter(),
        }
    }

    /// Signed distance to the boundary: positive inside, negative outside.
    pub fn boundary_distance(&self, p: Point) -> f64 {
        match self {
            DomainSpec::Ball { center, radius } => radius - geom::dist(p, *center),
            DomainSpec::Box { min, max } => {
                let inside = (0..3).all(|k| p[k] > min[k] && p[k] < max[k]);
                if inside {
                    (0..3)
                        .map(|k| (p[k] - min[k]).min(max[k] - p[k]))
                        .fold(f64::INFINITY, f64::min)
                } else {
                    let d: Point = std::array::from_fn(|k| {
                        (min[k] - p[k]).max(0.0).max(p[k] - max[k])
                    });
                    -geom::norm(d)
                }
            }
        }
    }

    pub fn contains(&self, p: Point) -> bool {
        match self {
            DomainSpec::Ball { center, radius } => geom::dist(p, *center) < *radius,
            DomainSpec::Box { min, max } => (0..3).all(|k| p[k] > min[k] && p[k] < max[k]),
        }
    }

    fn bounding_box(&self) -> (Point, Point) {
        match self {
            DomainSpec::Ball { center, radius } => (
                std::array::from_fn(|k| center[k] - radius),
                std::array::from_fn(|k| center[k] + radius),
            ),
            DomainSpec::Box { min, max } => (*min, *max),
        }
    }
}

/// Which finite-difference stencil a cell could use along its worst axis.
#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum StencilOrder {
    /// Neither neighbor inside along some axis; derivative set to zero.
    Degenerate,
    /// One-sided first-order difference along some axis.
    OneSided,
    /// Central second-order differences along all three axes.
    Central,
}

/// Voxelized domain.
#[derive(Debug)]
pub struct DomainGrid {
    spec: DomainSpec,
    n: usize,
    h: Point,
    origin: Point,
    /// Grid indices `(i, j, k)` of the inside cells, row-major.
    cells: Vec<[u32; 3]>,
    /// Full-grid map to compact index, `u32::MAX` outside.
    index: Vec<u32>,
    stencil: Vec<StencilOrder>,
}

impl PartialEq for DomainGrid {
    fn eq(&self, other: &Self) -> bool {
        self.n == other.n && self.spec == other.spec
    }
}

const OUTSIDE: u32 = u32::MAX;

impl DomainGrid {
    /// Voxelizes `spec` with `n` cells per axis of its bounding box.
    pub fn new(spec: DomainSpec, n: usize) -> Result<Arc<DomainGrid>> {
        spec.validate()?;
        if n < MIN_CELLS_PER_AXIS {
            return Err(VekuaError::InvalidParameter(format!(
                "need at least {MIN_CELLS_PER_AXIS} cells per axis, got {n}"
            )));
        }
        if n > 1 << 10 {
            return Err(VekuaError::InvalidParameter(format!("{n} cells per axis is too many")));
        }
        let (lo, hi) = spec.bounding_box();
        let h: Point = std::array::from_fn(|k| (hi[k] - lo[k]) / n as f64);
        let mut cells = Vec::new();
        let mut index = vec![OUTSIDE; n * n * n];
        for i in 0..n {
            for j in 0..n {
                for k in 0..n {
                    let c = [
                        lo[0] + (i as f64 + 0.5) * h[0],
                        lo[1] + (j as f64 + 0.5) * h[1],
                        lo[2] + (k as f64 + 0.5) * h[2],
                    ];
                    if spec.contains(c) {
                        index[(i * n + j) * n + k] = cells.len() as u32;
                        cells.push([i as u32, j as u32, k as u32]);
                    }
                }
            }
        }
        if cells.is_empty() {
            return Err(VekuaError::EmptyGrid);
        }
        let mut grid = DomainGrid {
            spec,
            n,
            h,
            origin: lo,
            cells,
            index,
            stencil: Vec::new(),
        };
        grid.stencil = (0..grid.len())
            .map(|c| {
                (0..3)
                    .map(|axis| {
                        match (grid.neighbor(c, axis, 1), grid.neighbor(c, axis, -1)) {
                            (Some(_), Some(_)) => StencilOrder::Central,
                            (None, None) => StencilOrder::Degenerate,
                            _ => StencilOrder::OneSided,
                        }
                    })
                    .min()
                    .unwrap()
            })
            .collect();
        Ok(Arc::new(grid))
    }

    pub fn spec(&self) -> &DomainSpec {
        &self.spec
    }

    pub fn n(&self) -> usize {
        self.n
    }

    /// Spacing per axis.
    pub fn h(&self) -> Point {
        self.h
    }

    /// Largest spacing.
    pub fn h_max(&self) -> f64 {
        self.h.iter().cloned().fold(0.0, f64::max)
    }

    pub fn origin(&self) -> Point {
        self.origin
    }

    /// Number of inside cells.
    pub fn len(&self) -> usize {
        self.cells.len()
    }

    pub fn is_empty(&self) -> bool {
        self.cells.is_empty()
    }

    /// Midpoint quadrature weight (cell volume), identical for every cell.
    pub fn weight(&self) -> f64 {
        self.h[0] * self.h[1] * self.h[2]
    }

    pub fn total_weight(&self) -> f64 {
        self.weight() * self.len() as f64
    }

    pub fn cell_index(&self, c: usize) -> [u32; 3] {
        self.cells[c]
    }

    pub fn cell_indices(&self) -> &[[u32; 3]] {
        &self.cells
    }

    pub fn center(&self, c: usize) -> Point {
        let [i, j, k] = self.cells[c];
        [
            self.origin[0] + (i as f64 + 0.5) * self.h[0],
            self.origin[1] + (j as f64 + 0.5) * self.h[1],
            self.origin[2] + (k as f64 + 0.5) * self.h[2],
        ]
    }

    pub fn centers(&self) -> impl Iterator<Item = Point> + '_ {
        (0..self.len()).map(move |c| self.center(c))
    }

    /// Compact index of the cell at grid position `(i, j, k)`, if inside.
    pub fn lookup(&self, i: i64, j: i64, k: i64) -> Option<usize> {
        let n = self.n as i64;
        if i < 0 || j < 0 || k < 0 || i >= n || j >= n || k >= n {
            return None;
        }
        match self.index[((i * n + j) * n + k) as usize] {
            OUTSIDE => None,
            c => Some(c as usize),
        }
    }

    /// Inside cell whose voxel contains `p`.
    pub fn locate(&self, p: Point) -> Option<usize> {
        let idx: [i64; 3] =
            std::array::from_fn(|k| ((p[k] - self.origin[k]) / self.h[k]).floor() as i64);
        self.lookup(idx[0], idx[1], idx[2])
    }

    /// Neighbor of cell `c` at `step` cells along `axis`.
    pub fn neighbor(&self, c: usize, axis: usize, step: i64) -> Option<usize> {
        let mut idx = self.cells[c].map(|v| v as i64);
        idx[axis] += step;
        self.lookup(idx[0], idx[1], idx[2])
    }

    pub fn stencil_order(&self, c: usize) -> StencilOrder {
        self.stencil[c]
    }

    pub fn stencil_orders(&self) -> &[StencilOrder] {
        &self.stencil
    }

    /// Distance from the center of cell `c` to the boundary.
    pub fn boundary_distance(&self, c: usize) -> f64 {
        self.spec.boundary_distance(self.center(c))
    }

    /// Cells whose centers are at least `margin` inside the domain.
    pub fn interior_cells(&self, margin: f64) -> Vec<usize> {
        (0..self.len())
            .filter(|&c| self.boundary_distance(c) >= margin)
            .collect()
    }
}

/// Biquaternion-valued function sampled on the inside cells of a grid.
#[derive(Clone, Debug)]
pub struct BiquatField {
    grid: Arc<DomainGrid>,
    values: Vec<Biquaternion>,
}

/// Complex-valued function sampled on the inside cells of a grid.
#[derive(Clone, Debug)]
pub struct ScalarField {
    grid: Arc<DomainGrid>,
    values: Vec<Complex>,
}

pub(crate) fn same_grid(a: &Arc<DomainGrid>, b: &Arc<DomainGrid>) -> Result<()> {
    if Arc::ptr_eq(a, b) || **a == **b {
        Ok(())
    } else {
        Err(VekuaError::GridMismatch)
    }
}

impl BiquatField {
    pub fn new(grid: &Arc<DomainGrid>, values: Vec<Biquaternion>) -> Result<Self> {
        if values.len() != grid.len() {
            return Err(VekuaError::InvalidParameter(format!(
                "{} values for a grid with {} inside cells",
                values.len(),
                grid.len()
            )));
        }
        Ok(BiquatField {
            grid: Arc::clone(grid),
            values,
        })
    }

    pub fn zeros(grid: &Arc<DomainGrid>) -> Self {
        Self::constant(grid, Biquaternion::ZERO)
    }

    pub fn constant(grid: &Arc<DomainGrid>, v: Biquaternion) -> Self {
        BiquatField {
            grid: Arc::clone(grid),
            values: vec![v; grid.len()],
        }
    }

    /// Evaluates `f` at every inside cell center.
    pub fn sample<F: Fn(Point) -> Biquaternion>(grid: &Arc<DomainGrid>, f: F) -> Self {
        BiquatField {
            grid: Arc::clone(grid),
            values: grid.centers().map(f).collect(),
        }
    }

    pub fn grid(&self) -> &Arc<DomainGrid> {
        &self.grid
    }

    pub fn values(&self) -> &[Biquaternion] {
        &self.values
    }

    pub fn values_mut(&mut self) -> &mut [Biquaternion] {
        &mut self.values
    }

    pub fn into_values(self) -> Vec<Biquaternion> {
        self.values
    }

    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }

    pub fn is_finite(&self) -> bool {
        self.values.iter().all(Biquaternion::is_finite)
    }

    /// Value at the cell containing `p`.
    pub fn value_at(&self, p: Point) -> Option<Biquaternion> {
        self.grid.locate(p).map(|c| self.values[c])
    }

    pub fn map<F: Fn(&Biquaternion) -> Biquaternion>(&self, f: F) -> Self {
        BiquatField {
            grid: Arc::clone(&self.grid),
            values: self.values.iter().map(f).collect(),
        }
    }

    pub fn zip_map<F: Fn(&Biquaternion, &Biquaternion) -> Biquaternion>(
        &self,
        other: &BiquatField,
        f: F,
    ) -> Result<Self> {
        same_grid(&self.grid, &other.grid)?;
        Ok(BiquatField {
            grid: Arc::clone(&self.grid),
            values: self
                .values
                .iter()
                .zip(&other.values)
                .map(|(a, b)| f(a, b))
                .collect(),
        })
    }

    pub fn add(&self, other: &BiquatField) -> Result<Self> {
        self.zip_map(other, |a, b| *a + *b)
    }

    pub fn sub(&self, other: &BiquatField) -> Result<Self> {
        self.zip_map(other, |a, b| *a - *b)
    }

    pub fn scale(&self, s: Complex) -> Self {
        self.map(|v| *v * s)
    }

    /// Pointwise `u(x) a`.
    pub fn right_mul(&self, a: Biquaternion) -> Self {
        self.map(|v| *v * a)
    }

    /// Pointwise `a u(x)`.
    pub fn left_mul(&self, a: Biquaternion) -> Self {
        self.map(|v| a * *v)
    }

    pub fn bar(&self) -> Self {
        self.map(Biquaternion::bar)
    }

    /// `self += s * other`.
    pub fn axpy(&mut self, s: Complex, other: &BiquatField) -> Result<()> {
        same_grid(&self.grid, &other.grid)?;
        for (a, b) in self.values.iter_mut().zip(&other.values) {
            *a += *b * s;
        }
        Ok(())
    }

    /// Component `k` as a scalar field.
    pub fn component(&self, k: usize) -> ScalarField {
        ScalarField {
            grid: Arc::clone(&self.grid),
            values: self.values.iter().map(|v| v.c[k]).collect(),
        }
    }

    pub fn sup_norm(&self) -> f64 {
        self.values.iter().map(Biquaternion::norm).fold(0.0, f64::max)
    }

    /// Max pointwise norm over the cells listed in `cells`.
    pub fn sup_norm_on(&self, cells: &[usize]) -> f64 {
        cells
            .iter()
            .map(|&c| self.values[c].norm())
            .fold(0.0, f64::max)
    }

    pub fn l2_norm(&self) -> f64 {
        (self.grid.weight() * self.values.iter().map(Biquaternion::norm_sqr).sum::<f64>()).sqrt()
    }
}

impl ScalarField {
    pub fn new(grid: &Arc<DomainGrid>, values: Vec<Complex>) -> Result<Self> {
        if values.len() != grid.len() {
            return Err(VekuaError::InvalidParameter(format!(
                "{} values for a grid with {} inside cells",
                values.len(),
                grid.len()
            )));
        }
        Ok(ScalarField {
            grid: Arc::clone(grid),
            values,
        })
    }

    pub fn sample<F: Fn(Point) -> Complex>(grid: &Arc<DomainGrid>, f: F) -> Self {
        ScalarField {
            grid: Arc::clone(grid),
            values: grid.centers().map(f).collect(),
        }
    }

    pub fn grid(&self) -> &Arc<DomainGrid> {
        &self.grid
    }

    pub fn values(&self) -> &[Complex] {
        &self.values
    }

    pub fn into_values(self) -> Vec<Complex> {
        self.values
    }

    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }

    /// The field `u e0`.
    pub fn to_biquat(&self) -> BiquatField {
        BiquatField {
            grid: Arc::clone(&self.grid),
            values: self.values.iter().map(|&z| Biquaternion::scalar(z)).collect(),
        }
    }

    pub fn sup_norm(&self) -> f64 {
        self.values.iter().map(|z| z.norm()).fold(0.0, f64::max)
    }
}

/// Difference quotient along `axis` for every inside cell: central where both
/// neighbors are inside, one-sided where only one is, zero otherwise.
pub(crate) fn partial_values<T>(grid: &DomainGrid, values: &[T], axis: usize) -> Vec<T>
where
    T: Copy + Default + Sub<Output = T> + Mul<f64, Output = T>,
{
    let h = grid.h[axis];
    (0..grid.len())
        .map(|c| {
            match (grid.neighbor(c, axis, 1), grid.neighbor(c, axis, -1)) {
                (Some(p), Some(m)) => (values[p] - values[m]) * (0.5 / h),
                (Some(p), None) => (values[p] - values[c]) * (1.0 / h),
                (None, Some(m)) => (values[c] - values[m]) * (1.0 / h),
                (None, None) => T::default(),
            }
        })
        .collect()
}

fn laplacian_values<T>(grid: &DomainGrid, values: &[T]) -> Vec<T>
where
    T: Copy + Default + Add<Output = T> + Sub<Output = T> + Mul<f64, Output = T>,
{
    (0..grid.len())
        .map(|c| {
            let mut acc = T::default();
            for axis in 0..3 {
                let inv_h2 = 1.0 / (grid.h[axis] * grid.h[axis]);
                let u = values[c];
                let second = match (grid.neighbor(c, axis, 1), grid.neighbor(c, axis, -1)) {
                    (Some(p), Some(m)) => (values[p] - u * 2.0 + values[m]) * inv_h2,
                    (Some(p), None) => match grid.neighbor(c, axis, 2) {
                        Some(pp) => (u - values[p] * 2.0 + values[pp]) * inv_h2,
                        None => T::default(),
                    },
                    (None, Some(m)) => match grid.neighbor(c, axis, -2) {
                        Some(mm) => (u - values[m] * 2.0 + values[mm]) * inv_h2,
                        None => T::default(),
                    },
                    (None, None) => T::default(),
                };
                acc = acc + second;
            }
            acc
        })
        .collect()
}

impl BiquatField {
    /// Finite-difference partial derivative along `axis`.
    pub fn partial(&self, axis: usize) -> BiquatField {
        BiquatField {
            grid: Arc::clone(&self.grid),
            values: partial_values(&self.grid, &self.values, axis),
        }
    }
}

impl ScalarField {
    pub fn partial(&self, axis: usize) -> ScalarField {
        ScalarField {
            grid: Arc::clone(&self.grid),
            values: partial_values(&self.grid, &self.values, axis),
        }
    }
}

/// Left action of the Moisil-Theodorescu operator, `D u = sum_k e_k du/dx_k`.
pub fn apply_d(u: &BiquatField) -> BiquatField {
    let parts: Vec<Vec<Biquaternion>> =
        (0..3).map(|a| partial_values(&u.grid, &u.values, a)).collect();
    let e = [
        Biquaternion::unit(1),
        Biquaternion::unit(2),
        Biquaternion::unit(3),
    ];
    let values = (0..u.len())
        .map(|c| e[0] * parts[0][c] + e[1] * parts[1][c] + e[2] * parts[2][c])
        .collect();
    BiquatField {
        grid: Arc::clone(&u.grid),
        values,
    }
}

/// Right action `u D = sum_k du/dx_k e_k`.
pub fn apply_d_right(u: &BiquatField) -> BiquatField {
    let parts: Vec<Vec<Biquaternion>> =
        (0..3).map(|a| partial_values(&u.grid, &u.values, a)).collect();
    let e = [
        Biquaternion::unit(1),
        Biquaternion::unit(2),
        Biquaternion::unit(3),
    ];
    let values = (0..u.len())
        .map(|c| parts[0][c] * e[0] + parts[1][c] * e[1] + parts[2][c] * e[2])
        .collect();
    BiquatField {
        grid: Arc::clone(&u.grid),
        values,
    }
}

/// 7-point Laplacian of a biquaternion field.
pub fn laplacian(u: &BiquatField) -> BiquatField {
    BiquatField {
        grid: Arc::clone(&u.grid),
        values: laplacian_values(&u.grid, &u.values),
    }
}

/// 7-point Laplacian of a scalar field.
pub fn laplacian_scalar(u: &ScalarField) -> ScalarField {
    ScalarField {
        grid: Arc::clone(&u.grid),
        values: laplacian_values(&u.grid, &u.values),
    }
}

/// Discrete `<u, v> = sum_cells weight * <u(x), v(x)>`.
pub fn l2_inner(u: &BiquatField, v: &BiquatField) -> Result<Complex> {
    same_grid(&u.grid, &v.grid)?;
    let s = u
        .values
        .iter()
        .zip(&v.values)
        .fold(ZERO_C, |acc, (a, b)| acc + a.inner(b));
    Ok(s * u.grid.weight())
}

/// Discrete right-module inner product `sum_cells weight * u(x)^dagger v(x)`.
pub fn hc_inner(u: &BiquatField, v: &BiquatField) -> Result<Biquaternion> {
    same_grid(&u.grid, &v.grid)?;
    let s = u
        .values
        .iter()
        .zip(&v.values)
        .fold(Biquaternion::ZERO, |acc, (a, b)| acc + a.dagger() * *b);
    Ok(s * u.grid.weight())
}

/// Discrete bilinear pairing `sum_cells weight * Sc(a(x) b(x))`.
pub fn sc_pairing(a: &BiquatField, b: &BiquatField) -> Result<Complex> {
    same_grid(&a.grid, &b.grid)?;
    let s = a
        .values
        .iter()
        .zip(&b.values)
        .fold(ZERO_C, |acc, (x, y)| acc + (*x * *y).sc());
    Ok(s * a.grid.weight())
}

/// Point cloud on a sphere with outward unit normals and equal-area weights.
#[derive(Clone, Debug)]
pub struct SurfaceMesh {
    pub points: Vec<Point>,
    pub normals: Vec<Point>,
    pub areas: Vec<f64>,
}

impl SurfaceMesh {
    pub fn len(&self) -> usize {
        self.points.len()
    }

    pub fn is_empty(&self) -> bool {
        self.points.is_empty()
    }

    pub fn total_area(&self) -> f64 {
        self.areas.iter().sum()
    }

    /// Typical spacing between neighboring points.
    pub fn spacing(&self) -> f64 {
        (self.total_area() / self.len() as f64).sqrt()
    }
}

/// Fibonacci-lattice boundary mesh of a ball with `m` points.
pub fn sphere_mesh(spec: &DomainSpec, m: usize) -> Result<SurfaceMesh> {
    let DomainSpec::Ball { center, radius } = *spec else {
        return Err(VekuaError::NotABall);
    };
    if m < 100 {
        return Err(VekuaError::InvalidParameter(format!(
            "sphere mesh needs at least 100 points, got {m}"
        )));
    }
    let normals = geom::fibonacci_sphere(m);
    let points = normals
        .iter()
        .map(|nu| geom::add(center, geom::scale(*nu, radius)))
        .collect();
    let area = 4.0 * std::f64::consts::PI * radius * radius / m as f64;
    Ok(SurfaceMesh {
        points,
        normals,
        areas: vec![area; m],
    })
}
