//! Direct summation of volume potentials on the voxel lattice.
//!
//! Every kernel evaluated between cell centers depends only on the integer
//! offset between the two cells, so it is tabulated once per grid over all
//! `(2n - 1)^3` offsets with the quadrature weight folded in. Targets are
//! processed one grid row at a time; for each target the sum runs over
//! sources in ascending cell order, which fixes the result bit for bit
//! independently of the thread count.

use rayon::prelude::*;

use crate::biquat::{real_vec_mul, Biquaternion};
use crate::geom::Point;
use crate::grid::DomainGrid;

/// A tabulated kernel value acting on a biquaternion from the left.
pub(crate) trait Entry: Copy + Send + Sync {
    fn mul_acc(&self, u: &Biquaternion, acc: &mut Biquaternion);
}

/// Real vector kernel `v1 e1 + v2 e2 + v3 e3`.
#[derive(Clone, Copy, Debug, Default)]
pub(crate) struct RealVec(pub [f64; 3]);

/// Real scalar kernel.
#[derive(Clone, Copy, Debug, Default)]
pub(crate) struct RealScalar(pub f64);

/// General biquaternion kernel.
#[derive(Clone, Copy, Debug, Default)]
pub(crate) struct Full(pub Biquaternion);

impl Entry for RealVec {
    #[inline(always)]
    fn mul_acc(&self, u: &Biquaternion, acc: &mut Biquaternion) {
        *acc += real_vec_mul(self.0, u);
    }
}

impl Entry for RealScalar {
    #[inline(always)]
    fn mul_acc(&self, u: &Biquaternion, acc: &mut Biquaternion) {
        for k in 0..4 {
            acc.c[k] += u.c[k] * self.0;
        }
    }
}

impl Entry for Full {
    #[inline(always)]
    fn mul_acc(&self, u: &Biquaternion, acc: &mut Biquaternion) {
        *acc += self.0 * *u;
    }
}

/// Kernel values for every lattice offset `x - y`, weight included.
pub(crate) struct Table<E> {
    n: usize,
    m: usize,
    data: Vec<E>,
}

impl<E: Entry> Table<E> {
    /// Tabulates `weight * f(x - y)` for nonzero offsets and stores
    /// `self_entry` unchanged at the zero offset.
    pub fn build<F>(grid: &DomainGrid, self_entry: E, f: F) -> Self
    where
        F: Fn(Point) -> E + Sync,
        E: std::ops::Mul<f64, Output = E>,
    {
        let n = grid.n();
        let m = 2 * n - 1;
        let h = grid.h();
        let w = grid.weight();
        let off = (n - 1) as f64;
        let data = (0..m * m * m)
            .into_par_iter()
            .map(|idx| {
                let di = (idx / (m * m)) as f64 - off;
                let dj = ((idx / m) % m) as f64 - off;
                let dk = (idx % m) as f64 - off;
                if di == 0.0 && dj == 0.0 && dk == 0.0 {
                    self_entry
                } else {
                    f([di * h[0], dj * h[1], dk * h[2]]) * w
                }
            })
            .collect();
        Table { n, m, data }
    }

    /// Entries for fixed `(di, dj)`, indexed by `dk + n - 1`.
    #[inline]
    fn row(&self, di: i64, dj: i64) -> &[E] {
        let off = self.n as i64 - 1;
        let start = (((di + off) as usize) * self.m + (dj + off) as usize) * self.m;
        &self.data[start..start + self.m]
    }
}

impl std::ops::Mul<f64> for RealVec {
    type Output = RealVec;
    fn mul(self, s: f64) -> RealVec {
        RealVec(self.0.map(|v| v * s))
    }
}

impl std::ops::Mul<f64> for RealScalar {
    type Output = RealScalar;
    fn mul(self, s: f64) -> RealScalar {
        RealScalar(self.0 * s)
    }
}

impl std::ops::Mul<f64> for Full {
    type Output = Full;
    fn mul(self, s: f64) -> Full {
        Full(self.0 * s)
    }
}

/// Maximal run of inside cells sharing `(i, j)` with consecutive `k`.
#[derive(Clone, Copy, Debug)]
struct Run {
    i: i64,
    j: i64,
    k0: i64,
    start: usize,
    len: usize,
}

fn runs(grid: &DomainGrid) -> Vec<Run> {
    let mut out: Vec<Run> = Vec::new();
    for (c, idx) in grid.cell_indices().iter().enumerate() {
        let [i, j, k] = idx.map(|v| v as i64);
        match out.last_mut() {
            Some(r) if r.i == i && r.j == j && r.k0 + r.len as i64 == k => r.len += 1,
            _ => out.push(Run {
                i,
                j,
                k0: k,
                start: c,
                len: 1,
            }),
        }
    }
    out
}

/// `out_b(x) = sum_y table(x - y) u_b(y)` for every field `u_b`.
pub(crate) fn convolve<E: Entry>(
    grid: &DomainGrid,
    table: &Table<E>,
    inputs: &[&[Biquaternion]],
) -> Vec<Vec<Biquaternion>> {
    let runs = runs(grid);
    let nb = inputs.len();
    let off = grid.n() as i64 - 1;
    let per_run: Vec<Vec<Biquaternion>> = runs
        .par_iter()
        .map(|t| {
            let mut acc = vec![Biquaternion::ZERO; nb * t.len];
            for s in &runs {
                let row = table.row(t.i - s.i, t.j - s.j);
                for o in 0..s.len {
                    let ks = s.k0 + o as i64;
                    let base = (t.k0 - ks + off) as usize;
                    let kernel = &row[base..base + t.len];
                    for (b, u) in inputs.iter().enumerate() {
                        let us = u[s.start + o];
                        let a = &mut acc[b * t.len..(b + 1) * t.len];
                        for (e, a) in kernel.iter().zip(a.iter_mut()) {
                            e.mul_acc(&us, a);
                        }
                    }
                }
            }
            acc
        })
        .collect();
    let mut out: Vec<Vec<Biquaternion>> = (0..nb).map(|_| Vec::with_capacity(grid.len())).collect();
    for (t, acc) in runs.iter().zip(&per_run) {
        for (b, o) in out.iter_mut().enumerate() {
            o.extend_from_slice(&acc[b * t.len..(b + 1) * t.len]);
        }
    }
    out
}

/// Integral of `1 / (4 pi |y|)` over an axis-aligned box of edges `h`
/// centered at the origin.
pub fn newtonian_self_integral(h: Point) -> f64 {
    let (a, b, c) = (0.5 * h[0], 0.5 * h[1], 0.5 * h[2]);
    let d = (a * a + b * b + c * c).sqrt();
    let octant = a * b * ((c + d) / a.hypot(b)).ln()
        + b * c * ((a + d) / b.hypot(c)).ln()
        + c * a * ((b + d) / c.hypot(a)).ln()
        - 0.5 * a * a * (b * c / (a * d)).atan()
        - 0.5 * b * b * (c * a / (b * d)).atan()
        - 0.5 * c * c * (a * b / (c * d)).atan();
    8.0 * octant / (4.0 * std::f64::consts::PI)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::biquat::Complex;
    use crate::grid::DomainSpec;

    #[test]
    fn cube_self_integral_constant() {
        // Integral of 1/|x| over the unit cube is 2.380077363979553.
        let c = newtonian_self_integral([1.0; 3]);
        assert!((c - 2.380077363979553 / (4.0 * std::f64::consts::PI)).abs() < 1e-14);
        assert!((c - 0.18940053870923704).abs() < 1e-14);
        let c2 = newtonian_self_integral([0.5; 3]);
        assert!((c2 - 0.25 * c).abs() < 1e-15);
    }

    #[test]
    fn self_integral_of_flat_box_matches_midpoint_refinement() {
        let h = [1.0, 0.6, 0.4];
        let m = 60;
        let mut s = 0.0;
        // Midpoint rule on an even lattice avoids the singular center.
        for i in 0..m {
            for j in 0..m {
                for k in 0..m {
                    let p = [
                        (i as f64 + 0.5) / m as f64 - 0.5,
                        ((j as f64 + 0.5) / m as f64 - 0.5) * 0.6,
                        ((k as f64 + 0.5) / m as f64 - 0.5) * 0.4,
                    ];
                    s += 1.0 / (p[0] * p[0] + p[1] * p[1] + p[2] * p[2]).sqrt();
                }
            }
        }
        s *= 0.24 / (m * m * m) as f64 / (4.0 * std::f64::consts::PI);
        assert!((s - newtonian_self_integral(h)).abs() < 2e-3 * s);
    }

    #[test]
    fn convolution_matches_naive_sum() {
        let grid = DomainGrid::new(DomainSpec::unit_ball(), 9).unwrap();
        let kernel = |d: Point| {
            let r = (d[0] * d[0] + d[1] * d[1] + d[2] * d[2]).sqrt();
            Full(Biquaternion::new(
                Complex::new(1.0 / r, 0.3),
                Complex::new(d[0], -d[1]),
                Complex::new(d[1] * d[2], 0.0),
                Complex::new(0.0, d[2] / r),
            ))
        };
        let selfe = Full(Biquaternion::from_real([0.7, 0.0, 0.0, 0.0]));
        let table = Table::build(&grid, selfe, kernel);
        let u: Vec<Biquaternion> = grid
            .centers()
            .map(|x| Biquaternion::new(
                Complex::new(x[0], 1.0),
                Complex::new(x[1] * x[2], 0.0),
                Complex::new(-x[2], x[0]),
                Complex::new(0.5, 0.0),
            ))
            .collect();
        let v: Vec<Biquaternion> = u.iter().map(|q| q.bar()).collect();
        let out = convolve(&grid, &table, &[&u, &v]);
        let w = grid.weight();
        for c in (0..grid.len()).step_by(7) {
            let x = grid.center(c);
            let mut acc = [Biquaternion::ZERO; 2];
            for s in 0..grid.len() {
                let e = if s == c {
                    selfe.0
                } else {
                    kernel(crate::geom::sub(x, grid.center(s))).0 * w
                };
                acc[0] += e * u[s];
                acc[1] += e * v[s];
            }
            for b in 0..2 {
                assert!((out[b][c] - acc[b]).norm() <= 1e-12 * acc[b].norm().max(1.0));
            }
        }
    }
}
