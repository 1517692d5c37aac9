//! Fast inverse of `I - c Δ_h` under ghost-copy Neumann conditions.
//!
//! The cell-centred ghost copy `m_0 = m_1` is an even reflection about the
//! cell face, so the operator is diagonalised exactly by the type-II cosine
//! transform (inverse: type III). Eigenvalue of mode `(p, q, r)` is
//! `1 + c * sum_axes (2 - 2 cos(pi p / M)) / h^2`.

use std::f64::consts::PI;
use std::sync::Arc;

use rustdct::{DctPlanner, TransformType2And3};

use crate::error::{Error, Result};
use crate::grid::{apply_neumann_ghosts, discrete_laplacian, Grid, ScalarField, VectorField};

pub struct HelmholtzSolver {
    grid: Grid,
    coeff: f64,
    /// Reciprocal eigenvalues with the transform round-trip scale folded in.
    inv_eig: Vec<f64>,
    plans: [Option<Arc<dyn TransformType2And3<f64>>>; 3],
    work: Vec<f64>,
    line: Vec<f64>,
    scratch: Vec<f64>,
}

impl std::fmt::Debug for HelmholtzSolver {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("HelmholtzSolver")
            .field("grid", &self.grid)
            .field("coeff", &self.coeff)
            .finish_non_exhaustive()
    }
}

/// Eigenvalue of `-Δ_h` along one axis for cosine mode `p`.
fn axis_symbol(p: usize, n: usize, h: f64) -> f64 {
    (2.0 - 2.0 * (PI * p as f64 / n as f64).cos()) / (h * h)
}

impl HelmholtzSolver {
    pub fn new(grid: &Grid, coeff: f64) -> Result<Self> {
        if !(coeff >= 0.0 && coeff.is_finite()) {
            return Err(Error::Config(format!(
                "Helmholtz coefficient must be non-negative, got {coeff}"
            )));
        }
        let counts = grid.counts();
        let spacings = grid.spacings();
        let active = grid.active_axes();

        let mut planner = DctPlanner::new();
        let plans: [Option<Arc<dyn TransformType2And3<f64>>>; 3] = [0, 1, 2]
            .map(|a| active[a].then(|| planner.plan_dct2(counts[a])));
        let scratch_len = plans
            .iter()
            .flatten()
            .map(|p| p.get_scratch_len())
            .max()
            .unwrap_or(0);

        // DCT-III(DCT-II(x)) = (n/2) x along each transformed axis.
        let scale: f64 = (0..3)
            .filter(|&a| active[a])
            .map(|a| 2.0 / counts[a] as f64)
            .product();

        let symbols: [Vec<f64>; 3] = [0, 1, 2].map(|a| {
            (0..counts[a])
                .map(|p| if active[a] { axis_symbol(p, counts[a], spacings[a]) } else { 0.0 })
                .collect()
        });
        let mut inv_eig = Vec::with_capacity(grid.n_cells());
        for r in 0..grid.nz {
            for q in 0..grid.ny {
                for p in 0..grid.nx {
                    let lam = 1.0 + coeff * (symbols[0][p] + symbols[1][q] + symbols[2][r]);
                    inv_eig.push(scale / lam);
                }
            }
        }

        Ok(HelmholtzSolver {
            grid: *grid,
            coeff,
            inv_eig,
            plans,
            work: vec![0.0; grid.n_cells()],
            line: vec![0.0; *counts.iter().max().unwrap()],
            scratch: vec![0.0; scratch_len],
        })
    }

    pub fn coeff(&self) -> f64 {
        self.coeff
    }

    pub fn grid(&self) -> &Grid {
        &self.grid
    }

    /// Eigenvalues of `I - c Δ_h`, i-fastest over cosine modes.
    pub fn eigenvalues(&self) -> Vec<f64> {
        let counts = self.grid.counts();
        let active = self.grid.active_axes();
        let scale: f64 = (0..3)
            .filter(|&a| active[a])
            .map(|a| 2.0 / counts[a] as f64)
            .product();
        self.inv_eig.iter().map(|w| scale / w).collect()
    }

    pub fn solve(&mut self, rhs: &ScalarField) -> Result<ScalarField> {
        if rhs.shape() != self.grid.counts() {
            return Err(Error::ShapeMismatch {
                expected: self.grid.counts(),
                found: rhs.shape(),
            });
        }
        self.work.copy_from_slice(&rhs.data);
        self.solve_work();
        ScalarField::from_vec(&self.grid, self.work.clone())
    }

    /// Solves for one component of a ghosted field, writing the interior of
    /// `out` (ghosts untouched).
    pub fn solve_component(&mut self, rhs: &[f64], out: &mut [f64]) {
        let g = self.grid;
        let mut n = 0;
        for k in 1..=g.nz {
            for j in 1..=g.ny {
                let row = g.idx(1, j, k);
                self.work[n..n + g.nx].copy_from_slice(&rhs[row..row + g.nx]);
                n += g.nx;
            }
        }
        self.solve_work();
        let mut n = 0;
        for k in 1..=g.nz {
            for j in 1..=g.ny {
                let row = g.idx(1, j, k);
                out[row..row + g.nx].copy_from_slice(&self.work[n..n + g.nx]);
                n += g.nx;
            }
        }
    }

    fn solve_work(&mut self) {
        if self.coeff == 0.0 {
            return;
        }
        self.transform_all(false);
        for (w, s) in self.work.iter_mut().zip(&self.inv_eig) {
            *w *= s;
        }
        self.transform_all(true);
    }

    fn transform_all(&mut self, inverse: bool) {
        let counts = self.grid.counts();
        let strides = [1, counts[0], counts[0] * counts[1]];
        for axis in 0..3 {
            let Some(plan) = self.plans[axis].clone() else {
                continue;
            };
            let n = counts[axis];
            let stride = strides[axis];
            let line = &mut self.line[..n];
            // Enumerate line starts: all indices whose coordinate along `axis` is zero.
            let total = self.work.len();
            let block = stride * n;
            for outer in (0..total).step_by(block) {
                for inner in 0..stride {
                    let base = outer + inner;
                    for (p, v) in line.iter_mut().enumerate() {
                        *v = self.work[base + p * stride];
                    }
                    if inverse {
                        plan.process_dct3_with_scratch(line, &mut self.scratch);
                    } else {
                        plan.process_dct2_with_scratch(line, &mut self.scratch);
                    }
                    for (p, v) in line.iter().enumerate() {
                        self.work[base + p * stride] = *v;
                    }
                }
            }
        }
    }
}

/// Applies `(I - c Δ_h)` to an interior scalar field using the ghost stencil.
pub fn apply_helmholtz(grid: &Grid, coeff: f64, u: &ScalarField) -> ScalarField {
    let mut f = VectorField::zeros(grid);
    let mut n = 0;
    grid.for_each_cell(|i, j, k| {
        f.comp_mut(0)[grid.idx(i, j, k)] = u.data[n];
        n += 1;
    });
    apply_neumann_ghosts(&mut f, grid);
    let lap = discrete_laplacian(&f, grid);
    let mut out = ScalarField::zeros(grid);
    let mut n = 0;
    grid.for_each_cell(|i, j, k| {
        out.data[n] = u.data[n] - coeff * lap.comp(0)[grid.idx(i, j, k)];
        n += 1;
    });
    out
}

/// Dense assembly and elimination. Test oracle only; cubic cost.
pub mod dense {
    use super::*;

    /// Row-major matrix of `I - c Δ_h` over interior cells (i-fastest order).
    pub fn assemble(grid: &Grid, coeff: f64) -> Vec<Vec<f64>> {
        let n = grid.n_cells();
        let counts = grid.counts();
        let spacings = grid.spacings();
        let active = grid.active_axes();
        let mut a = vec![vec![0.0; n]; n];
        let lin = |c: [usize; 3]| c[0] + counts[0] * (c[1] + counts[1] * c[2]);
        for k in 0..counts[2] {
            for j in 0..counts[1] {
                for i in 0..counts[0] {
                    let here = [i, j, k];
                    let row = lin(here);
                    a[row][row] += 1.0;
                    for axis in 0..3 {
                        if !active[axis] {
                            continue;
                        }
                        let w = coeff / (spacings[axis] * spacings[axis]);
                        for dir in [-1i64, 1] {
                            let pos = here[axis] as i64 + dir;
                            // A missing neighbour is its own ghost copy: contributes nothing.
                            if pos < 0 || pos >= counts[axis] as i64 {
                                continue;
                            }
                            let mut nb = here;
                            nb[axis] = pos as usize;
                            a[row][row] += w;
                            a[row][lin(nb)] -= w;
                        }
                    }
                }
            }
        }
        a
    }

    /// Gaussian elimination with partial pivoting.
    pub fn solve(mut a: Vec<Vec<f64>>, mut b: Vec<f64>) -> Vec<f64> {
        let n = b.len();
        for col in 0..n {
            let piv = (col..n)
                .max_by(|&x, &y| a[x][col].abs().total_cmp(&a[y][col].abs()))
                .unwrap();
            a.swap(col, piv);
            b.swap(col, piv);
            for row in col + 1..n {
                let f = a[row][col] / a[col][col];
                if f == 0.0 {
                    continue;
                }
                let (top, bottom) = a.split_at_mut(row);
                for (x, p) in bottom[0][col..].iter_mut().zip(&top[col][col..]) {
                    *x -= f * p;
                }
                b[row] -= f * b[col];
            }
        }
        let mut x = vec![0.0; n];
        for row in (0..n).rev() {
            let s: f64 = (row + 1..n).map(|c| a[row][c] * x[c]).sum();
            x[row] = (b[row] - s) / a[row][row];
        }
        x
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn zero_coefficient_is_identity() {
        let g = Grid::new([5, 3, 2], [0.1, 0.2, 0.3]).unwrap();
        let mut s = HelmholtzSolver::new(&g, 0.0).unwrap();
        let rhs = ScalarField::from_vec(&g, (0..30).map(|i| (i as f64).sin()).collect()).unwrap();
        assert_eq!(s.solve(&rhs).unwrap(), rhs);
    }

    #[test]
    fn negative_coefficient_rejected() {
        let g = Grid::new([2, 1, 1], [1.0; 3]).unwrap();
        assert!(HelmholtzSolver::new(&g, -1.0).unwrap_err().is_config());
    }

    #[test]
    fn two_cell_eigenvalues_match_explicit_matrix() {
        // Assembled by hand: [[2, -1], [-1, 2]], eigenvalues 1 and 3.
        let g = Grid::new([2, 1, 1], [1.0; 3]).unwrap();
        let s = HelmholtzSolver::new(&g, 1.0).unwrap();
        let eig = s.eigenvalues();
        assert!((eig[0] - 1.0).abs() < 1e-15);
        assert!((eig[1] - 3.0).abs() < 1e-15);
        assert_eq!(dense::assemble(&g, 1.0), vec![vec![2.0, -1.0], vec![-1.0, 2.0]]);
    }

    #[test]
    fn zero_mode_eigenvalue_is_one() {
        let g = Grid::new([4, 3, 5], [0.5, 1.0, 2.0]).unwrap();
        for c in [0.0, 0.1, 17.0] {
            assert_eq!(HelmholtzSolver::new(&g, c).unwrap().eigenvalues()[0], 1.0);
        }
    }

    #[test]
    fn constant_rhs_is_fixed() {
        let g = Grid::new([8, 4, 3], [0.3, 0.2, 0.1]).unwrap();
        let mut s = HelmholtzSolver::new(&g, 2.5).unwrap();
        let rhs = ScalarField::from_vec(&g, vec![1.75; g.n_cells()]).unwrap();
        let u = s.solve(&rhs).unwrap();
        for v in u.data {
            assert!((v - 1.75).abs() < 1e-14);
        }
    }

    #[test]
    fn residual_on_16x8x4() {
        let g = Grid::new([16, 8, 4], [0.1, 0.15, 0.2]).unwrap();
        let mut s = HelmholtzSolver::new(&g, 0.37).unwrap();
        let rhs = ScalarField::from_vec(
            &g,
            (0..g.n_cells()).map(|i| ((i * 7919) % 101) as f64 / 50.0 - 1.0).collect(),
        )
        .unwrap();
        let u = s.solve(&rhs).unwrap();
        let back = apply_helmholtz(&g, 0.37, &u);
        let err = back
            .data
            .iter()
            .zip(&rhs.data)
            .fold(0.0f64, |m, (a, b)| m.max((a - b).abs()));
        assert!(err <= 1e-12 * rhs.max_abs(), "residual {err}");
    }
}
