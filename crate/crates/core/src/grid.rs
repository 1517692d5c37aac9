//! Uniform cell-centred grids, ghost-layer fields and the discrete Laplacian.
//!
//! Interior cells use 1-based indices `1..=n` along each axis; indices `0`
//! and `n + 1` address the ghost layer. Cell `(i, j, k)` is centred at
//! `((i - 1/2) dx, (j - 1/2) dy, (k - 1/2) dz)`.

use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Grid {
    pub nx: usize,
    pub ny: usize,
    pub nz: usize,
    pub dx: f64,
    pub dy: f64,
    pub dz: f64,
}

impl Grid {
    pub fn new(counts: [usize; 3], spacings: [f64; 3]) -> Result<Self> {
        for (axis, &n) in ["x", "y", "z"].iter().zip(&counts) {
            if n == 0 {
                return Err(Error::Config(format!(
                    "cell count along {axis} must be at least 1"
                )));
            }
        }
        for (axis, &h) in ["x", "y", "z"].iter().zip(&spacings) {
            if !(h > 0.0 && h.is_finite()) {
                return Err(Error::Config(format!(
                    "spacing along {axis} must be positive, got {h}"
                )));
            }
        }
        Ok(Grid {
            nx: counts[0],
            ny: counts[1],
            nz: counts[2],
            dx: spacings[0],
            dy: spacings[1],
            dz: spacings[2],
        })
    }

    pub fn counts(&self) -> [usize; 3] {
        [self.nx, self.ny, self.nz]
    }

    pub fn spacings(&self) -> [f64; 3] {
        [self.dx, self.dy, self.dz]
    }

    pub fn n_cells(&self) -> usize {
        self.nx * self.ny * self.nz
    }

    pub fn cell_volume(&self) -> f64 {
        self.dx * self.dy * self.dz
    }

    /// Storage extent including one ghost layer per face.
    pub fn padded(&self) -> [usize; 3] {
        [self.nx + 2, self.ny + 2, self.nz + 2]
    }

    pub fn storage_len(&self) -> usize {
        let [a, b, c] = self.padded();
        a * b * c
    }

    /// Linear storage index of `(i, j, k)` in ghost-inclusive coordinates.
    #[inline(always)]
    pub fn idx(&self, i: usize, j: usize, k: usize) -> usize {
        i + (self.nx + 2) * (j + (self.ny + 2) * k)
    }

    /// Centre of interior cell `(i, j, k)` (1-based).
    pub fn center(&self, i: usize, j: usize, k: usize) -> [f64; 3] {
        [
            (i as f64 - 0.5) * self.dx,
            (j as f64 - 0.5) * self.dy,
            (k as f64 - 0.5) * self.dz,
        ]
    }

    /// Axes with more than one cell. Axes of extent 1 carry no Laplacian term.
    pub fn active_axes(&self) -> [bool; 3] {
        [self.nx > 1, self.ny > 1, self.nz > 1]
    }

    /// Visits interior cells in k-outer, j-middle, i-inner order.
    pub fn for_each_cell(&self, mut f: impl FnMut(usize, usize, usize)) {
        for k in 1..=self.nz {
            for j in 1..=self.ny {
                for i in 1..=self.nx {
                    f(i, j, k);
                }
            }
        }
    }
}

/// Three scalar components over the interior plus one ghost layer.
#[derive(Debug, Clone, PartialEq)]
pub struct VectorField {
    shape: [usize; 3],
    comps: [Vec<f64>; 3],
}

impl VectorField {
    pub fn zeros(grid: &Grid) -> Self {
        let n = grid.storage_len();
        VectorField {
            shape: grid.counts(),
            comps: [vec![0.0; n], vec![0.0; n], vec![0.0; n]],
        }
    }

    /// Interior and ghosts set to `v`.
    pub fn uniform(grid: &Grid, v: [f64; 3]) -> Self {
        let n = grid.storage_len();
        VectorField {
            shape: grid.counts(),
            comps: [vec![v[0]; n], vec![v[1]; n], vec![v[2]; n]],
        }
    }

    /// Samples `f` at interior cell centres and fills the ghosts.
    pub fn from_fn(grid: &Grid, mut f: impl FnMut([f64; 3]) -> [f64; 3]) -> Self {
        let mut field = Self::zeros(grid);
        grid.for_each_cell(|i, j, k| {
            let v = f(grid.center(i, j, k));
            field.set(grid.idx(i, j, k), v);
        });
        apply_neumann_ghosts(&mut field, grid);
        field
    }

    pub fn shape(&self) -> [usize; 3] {
        self.shape
    }

    pub fn check_shape(&self, grid: &Grid) -> Result<()> {
        if self.shape == grid.counts() {
            Ok(())
        } else {
            Err(Error::ShapeMismatch {
                expected: grid.counts(),
                found: self.shape,
            })
        }
    }

    #[inline(always)]
    pub fn get(&self, idx: usize) -> [f64; 3] {
        [self.comps[0][idx], self.comps[1][idx], self.comps[2][idx]]
    }

    #[inline(always)]
    pub fn set(&mut self, idx: usize, v: [f64; 3]) {
        self.comps[0][idx] = v[0];
        self.comps[1][idx] = v[1];
        self.comps[2][idx] = v[2];
    }

    pub fn comp(&self, c: usize) -> &[f64] {
        &self.comps[c]
    }

    pub fn comp_mut(&mut self, c: usize) -> &mut [f64] {
        &mut self.comps[c]
    }

    pub fn comps_mut(&mut self) -> [&mut [f64]; 3] {
        let [a, b, c] = &mut self.comps;
        [a, b, c]
    }

    /// Copies the interior (and ghosts) of `other` into `self`.
    pub fn copy_from(&mut self, other: &VectorField) {
        debug_assert_eq!(self.shape, other.shape);
        for c in 0..3 {
            self.comps[c].copy_from_slice(&other.comps[c]);
        }
    }

    /// `max |v|` over interior cells.
    pub fn max_norm(&self, grid: &Grid) -> f64 {
        let mut max = 0.0f64;
        grid.for_each_cell(|i, j, k| {
            let v = self.get(grid.idx(i, j, k));
            max = max.max(norm(v));
        });
        max
    }

    /// `max ||v| - 1|` over interior cells.
    pub fn max_unit_deviation(&self, grid: &Grid) -> f64 {
        let mut max = 0.0f64;
        grid.for_each_cell(|i, j, k| {
            let v = self.get(grid.idx(i, j, k));
            max = max.max((norm(v) - 1.0).abs());
        });
        max
    }

    /// `max |self - other|` (Euclidean per cell) over interior cells.
    pub fn max_distance(&self, other: &VectorField, grid: &Grid) -> f64 {
        let mut max = 0.0f64;
        grid.for_each_cell(|i, j, k| {
            let id = grid.idx(i, j, k);
            let a = self.get(id);
            let b = other.get(id);
            max = max.max(norm([a[0] - b[0], a[1] - b[1], a[2] - b[2]]));
        });
        max
    }

    /// Largest absolute component over interior cells.
    pub fn max_abs(&self, grid: &Grid) -> f64 {
        let mut max = 0.0f64;
        grid.for_each_cell(|i, j, k| {
            let v = self.get(grid.idx(i, j, k));
            max = max.max(v[0].abs()).max(v[1].abs()).max(v[2].abs());
        });
        max
    }

    pub fn is_finite(&self, grid: &Grid) -> bool {
        let mut ok = true;
        grid.for_each_cell(|i, j, k| {
            let v = self.get(grid.idx(i, j, k));
            ok &= v.iter().all(|x| x.is_finite());
        });
        ok
    }

    /// Interior inner product `sum_cells a . b` (no volume factor).
    pub fn dot(&self, other: &VectorField, grid: &Grid) -> f64 {
        let mut terms = Vec::with_capacity(grid.n_cells());
        grid.for_each_cell(|i, j, k| {
            let id = grid.idx(i, j, k);
            let a = self.get(id);
            let b = other.get(id);
            terms.push(a[0] * b[0] + a[1] * b[1] + a[2] * b[2]);
        });
        pairwise_sum(&terms)
    }
}

/// One scalar per interior cell, i-fastest, no ghosts.
#[derive(Debug, Clone, PartialEq)]
pub struct ScalarField {
    shape: [usize; 3],
    pub data: Vec<f64>,
}

impl ScalarField {
    pub fn zeros(grid: &Grid) -> Self {
        ScalarField {
            shape: grid.counts(),
            data: vec![0.0; grid.n_cells()],
        }
    }

    pub fn from_vec(grid: &Grid, data: Vec<f64>) -> Result<Self> {
        if data.len() != grid.n_cells() {
            return Err(Error::Config(format!(
                "scalar field has {} values, grid has {} cells",
                data.len(),
                grid.n_cells()
            )));
        }
        Ok(ScalarField {
            shape: grid.counts(),
            data,
        })
    }

    pub fn shape(&self) -> [usize; 3] {
        self.shape
    }

    /// 0-based interior index.
    #[inline(always)]
    pub fn idx(&self, i: usize, j: usize, k: usize) -> usize {
        i + self.shape[0] * (j + self.shape[1] * k)
    }

    pub fn max_abs(&self) -> f64 {
        self.data.iter().fold(0.0f64, |m, v| m.max(v.abs()))
    }
}

#[inline(always)]
pub fn norm(v: [f64; 3]) -> f64 {
    (v[0] * v[0] + v[1] * v[1] + v[2] * v[2]).sqrt()
}

#[inline(always)]
pub fn cross(a: [f64; 3], b: [f64; 3]) -> [f64; 3] {
    [
        a[1] * b[2] - a[2] * b[1],
        a[2] * b[0] - a[0] * b[2],
        a[0] * b[1] - a[1] * b[0],
    ]
}

#[inline(always)]
pub fn dot3(a: [f64; 3], b: [f64; 3]) -> f64 {
    a[0] * b[0] + a[1] * b[1] + a[2] * b[2]
}

/// Deterministic pairwise (tree) summation.
pub fn pairwise_sum(xs: &[f64]) -> f64 {
    const BLOCK: usize = 32;
    if xs.len() <= BLOCK {
        xs.iter().sum()
    } else {
        let mid = xs.len() / 2;
        pairwise_sum(&xs[..mid]) + pairwise_sum(&xs[mid..])
    }
}

/// Copies each boundary-adjacent interior value into the facing ghost.
pub fn apply_neumann_ghosts(field: &mut VectorField, grid: &Grid) {
    let (nx, ny, nz) = (grid.nx, grid.ny, grid.nz);
    for a in field.comps_mut() {
        for k in 1..=nz {
            for j in 1..=ny {
                a[grid.idx(0, j, k)] = a[grid.idx(1, j, k)];
                a[grid.idx(nx + 1, j, k)] = a[grid.idx(nx, j, k)];
            }
        }
        for k in 1..=nz {
            for i in 1..=nx {
                a[grid.idx(i, 0, k)] = a[grid.idx(i, 1, k)];
                a[grid.idx(i, ny + 1, k)] = a[grid.idx(i, ny, k)];
            }
        }
        for j in 1..=ny {
            for i in 1..=nx {
                a[grid.idx(i, j, 0)] = a[grid.idx(i, j, 1)];
                a[grid.idx(i, j, nz + 1)] = a[grid.idx(i, j, nz)];
            }
        }
    }
}

/// Seven-point Laplacian on the interior; requires filled ghosts.
pub fn discrete_laplacian(field: &VectorField, grid: &Grid) -> VectorField {
    let mut out = VectorField::zeros(grid);
    discrete_laplacian_into(field, grid, &mut out);
    out
}

pub fn discrete_laplacian_into(field: &VectorField, grid: &Grid, out: &mut VectorField) {
    let [ax, ay, az] = grid.active_axes();
    let (cx, cy, cz) = (
        1.0 / (grid.dx * grid.dx),
        1.0 / (grid.dy * grid.dy),
        1.0 / (grid.dz * grid.dz),
    );
    let sy = grid.nx + 2;
    let sz = sy * (grid.ny + 2);
    for c in 0..3 {
        let a = field.comp(c);
        let o = out.comp_mut(c);
        for k in 1..=grid.nz {
            for j in 1..=grid.ny {
                let row = grid.idx(0, j, k);
                for i in 1..=grid.nx {
                    let id = row + i;
                    let centre = a[id];
                    let mut acc = 0.0;
                    if ax {
                        acc += (a[id + 1] - 2.0 * centre + a[id - 1]) * cx;
                    }
                    if ay {
                        acc += (a[id + sy] - 2.0 * centre + a[id - sy]) * cy;
                    }
                    if az {
                        acc += (a[id + sz] - 2.0 * centre + a[id - sz]) * cz;
                    }
                    o[id] = acc;
                }
            }
        }
    }
}

/// Arithmetic mean of each component over interior cells.
pub fn average_magnetization(field: &VectorField, grid: &Grid) -> [f64; 3] {
    let n = grid.n_cells();
    let mut buf = Vec::with_capacity(n);
    let mut out = [0.0; 3];
    for (c, o) in out.iter_mut().enumerate() {
        buf.clear();
        let a = field.comp(c);
        grid.for_each_cell(|i, j, k| buf.push(a[grid.idx(i, j, k)]));
        *o = pairwise_sum(&buf) / n as f64;
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;

    fn grid(c: [usize; 3], h: [f64; 3]) -> Grid {
        Grid::new(c, h).unwrap()
    }

    #[test]
    fn centering_convention() {
        let g = grid([2, 1, 1], [0.5, 1.0, 1.0]);
        assert_eq!(g.n_cells(), 2);
        assert_eq!(g.center(1, 1, 1)[0], 0.25);
        assert_eq!(g.center(2, 1, 1)[0], 0.75);
        assert_eq!(grid([128, 64, 10], [1.0, 1.0, 1.0]).n_cells(), 81920);
    }

    #[test]
    fn rejects_bad_counts_and_spacings() {
        assert!(Grid::new([0, 1, 1], [1.0; 3]).unwrap_err().is_config());
        assert!(Grid::new([1, 1, 1], [1.0, 0.0, 1.0]).is_err());
        assert!(Grid::new([1, 1, 1], [1.0, 1.0, -2.0]).is_err());
    }

    #[test]
    fn ghosts_copy_adjacent_interior() {
        let g = grid([2, 1, 1], [1.0; 3]);
        let mut f = VectorField::zeros(&g);
        f.set(g.idx(1, 1, 1), [3.0, 0.0, 0.0]);
        f.set(g.idx(2, 1, 1), [7.0, 0.0, 0.0]);
        apply_neumann_ghosts(&mut f, &g);
        assert_eq!(f.get(g.idx(0, 1, 1))[0], 3.0);
        assert_eq!(f.get(g.idx(3, 1, 1))[0], 7.0);

        let c = VectorField::from_fn(&grid([3, 4, 2], [1.0; 3]), |_| [0.3, -1.0, 2.0]);
        assert!(c.comp(0).iter().all(|&v| v == 0.3 || v == 0.0));
    }

    #[test]
    fn wall_derivative_vanishes_for_linear_profile() {
        let g = grid([4, 1, 1], [0.25, 1.0, 1.0]);
        let f = VectorField::from_fn(&g, |x| [x[0], 0.0, 0.0]);
        let a = f.comp(0);
        assert_eq!(a[g.idx(0, 1, 1)], a[g.idx(1, 1, 1)]);
        assert_eq!(a[g.idx(5, 1, 1)], a[g.idx(4, 1, 1)]);
    }

    #[test]
    fn laplacian_of_constant_is_exactly_zero() {
        let g = grid([5, 4, 3], [0.3, 0.7, 1.1]);
        let f = VectorField::from_fn(&g, |_| [0.123456789, -3.0, 1e5]);
        let l = discrete_laplacian(&f, &g);
        g.for_each_cell(|i, j, k| assert_eq!(l.get(g.idx(i, j, k)), [0.0; 3]));
    }

    #[test]
    fn laplacian_second_difference_of_squares() {
        let g = grid([4, 1, 1], [1.0; 3]);
        let mut f = VectorField::zeros(&g);
        for (i, v) in [1.0, 4.0, 9.0, 16.0].iter().enumerate() {
            f.set(g.idx(i + 1, 1, 1), [*v, 0.0, 0.0]);
        }
        apply_neumann_ghosts(&mut f, &g);
        let l = discrete_laplacian(&f, &g);
        assert_eq!(l.get(g.idx(2, 1, 1))[0], 2.0);
    }

    #[test]
    fn reduced_dimension_drops_axis() {
        // ny = nz = 1: only the x term survives, whatever dy and dz are.
        let g = grid([3, 1, 1], [1.0, 1e-3, 1e-3]);
        let f = VectorField::from_fn(&g, |x| [x[0] * x[0], 0.0, 0.0]);
        let l = discrete_laplacian(&f, &g);
        assert!((l.get(g.idx(2, 1, 1))[0] - 2.0).abs() < 1e-12);
    }

    #[test]
    fn averages() {
        let g = grid([2, 2, 1], [1.0; 3]);
        let f = VectorField::uniform(&g, [0.0, 0.0, 1.0]);
        assert_eq!(average_magnetization(&f, &g), [0.0, 0.0, 1.0]);

        let f = VectorField::from_fn(&g, |x| if x[0] < 1.0 { [1.0, 0.0, 0.0] } else { [-1.0, 0.0, 0.0] });
        assert_eq!(average_magnetization(&f, &g), [0.0, 0.0, 0.0]);

        let g = grid([2, 1, 1], [1.0; 3]);
        let f = VectorField::from_fn(&g, |x| if x[0] < 1.0 { [1.0, 0.0, 0.0] } else { [0.0, 1.0, 0.0] });
        assert_eq!(average_magnetization(&f, &g), [0.5, 0.5, 0.0]);
    }

    #[test]
    fn pairwise_sum_matches_naive_on_integers() {
        let xs: Vec<f64> = (0..1000).map(|i| i as f64).collect();
        assert_eq!(pairwise_sum(&xs), 499500.0);
        assert_eq!(pairwise_sum(&[]), 0.0);
    }
}
