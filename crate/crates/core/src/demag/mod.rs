//! Stray field `h_s = -∇U` as an aperiodic convolution of the
//! cell-averaged demagnetizing tensor with the magnetization.
//!
//! The kernel lives on a grid of twice the extent along each axis, so the
//! circular FFT convolution reproduces the open-boundary sum exactly. All
//! six tensor spectra are real (each entry is even, or odd along exactly
//! two axes), so only real parts are stored.

mod fft3;
pub mod tensor;

use std::sync::Arc;

use rustfft::num_complex::Complex64;

use crate::error::{Error, Result};
use crate::grid::{Grid, VectorField};
use fft3::Fft3;
pub use tensor::{cell_tensor, newell_tensor, Tensor6, TensorTable};

/// Precomputed spectral demag tensor for one grid. Immutable and shareable.
pub struct DemagKernel {
    grid: Grid,
    table: TensorTable,
    spectra: [Vec<f64>; 6],
    fft: Fft3,
}

impl std::fmt::Debug for DemagKernel {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("DemagKernel")
            .field("grid", &self.grid)
            .field("padded", &self.fft.dims())
            .finish_non_exhaustive()
    }
}

impl DemagKernel {
    pub fn build(grid: &Grid) -> Arc<Self> {
        let counts = grid.counts();
        let table = TensorTable::build(counts, grid.spacings());
        let padded = counts.map(|n| 2 * n);
        let fft = Fft3::new(padded);
        let [px, py, pz] = padded;

        let wrap = |p: usize, n: usize| -> Option<i64> {
            if p < n {
                Some(p as i64)
            } else if p > n {
                Some(p as i64 - 2 * n as i64)
            } else {
                None
            }
        };

        let mut real = vec![[0.0; 6]; px * py * pz];
        for k in 0..pz {
            let Some(dk) = wrap(k, counts[2]) else { continue };
            for j in 0..py {
                let Some(dj) = wrap(j, counts[1]) else { continue };
                for i in 0..px {
                    let Some(di) = wrap(i, counts[0]) else { continue };
                    real[i + px * (j + py * k)] = table.at(di, dj, dk);
                }
            }
        }

        let mut spec = vec![Complex64::default(); fft.spectral_len()];
        let mut buf = vec![0.0; px * py * pz];
        let spectra = [0, 1, 2, 3, 4, 5].map(|c| {
            for (b, t) in buf.iter_mut().zip(&real) {
                *b = t[c];
            }
            fft.forward(&mut buf, padded, &mut spec);
            spec.iter().map(|z| z.re).collect::<Vec<f64>>()
        });

        Arc::new(DemagKernel {
            grid: *grid,
            table,
            spectra,
            fft,
        })
    }

    pub fn grid(&self) -> &Grid {
        &self.grid
    }

    /// Real-space entry for the signed cell offset.
    pub fn entry(&self, di: i64, dj: i64, dk: i64) -> Tensor6 {
        self.table.at(di, dj, dk)
    }

    pub fn table(&self) -> &TensorTable {
        &self.table
    }
}

/// Per-evaluation scratch for [`stray_field_into`].
pub struct DemagWorkspace {
    real: Vec<f64>,
    spec: [Vec<Complex64>; 3],
}

impl DemagWorkspace {
    pub fn new(kernel: &DemagKernel) -> Self {
        let [px, py, pz] = kernel.fft.dims();
        let n = kernel.fft.spectral_len();
        DemagWorkspace {
            real: vec![0.0; px * py * pz],
            spec: [
                vec![Complex64::default(); n],
                vec![Complex64::default(); n],
                vec![Complex64::default(); n],
            ],
        }
    }
}

/// Allocating convenience wrapper around [`stray_field_into`].
pub fn stray_field(m: &VectorField, kernel: &DemagKernel, grid: &Grid) -> Result<VectorField> {
    let mut ws = DemagWorkspace::new(kernel);
    let mut out = VectorField::zeros(grid);
    stray_field_into(m, kernel, grid, &mut ws, &mut out)?;
    Ok(out)
}

/// Writes `h_s` on the interior of `out`; ghosts of `out` are left as they were.
pub fn stray_field_into(
    m: &VectorField,
    kernel: &DemagKernel,
    grid: &Grid,
    ws: &mut DemagWorkspace,
    out: &mut VectorField,
) -> Result<()> {
    if kernel.grid != *grid {
        return Err(Error::ShapeMismatch {
            expected: kernel.grid.counts(),
            found: grid.counts(),
        });
    }
    m.check_shape(grid)?;
    let counts = grid.counts();
    let [px, py, _] = kernel.fft.dims();

    for c in 0..3 {
        let src = m.comp(c);
        ws.real.iter_mut().for_each(|v| *v = 0.0);
        for k in 0..grid.nz {
            for j in 0..grid.ny {
                let from = grid.idx(1, j + 1, k + 1);
                let to = px * (j + py * k);
                ws.real[to..to + grid.nx].copy_from_slice(&src[from..from + grid.nx]);
            }
        }
        kernel.fft.forward(&mut ws.real, counts, &mut ws.spec[c]);
    }

    let [nxx, nyy, nzz, nxy, nxz, nyz] = &kernel.spectra;
    let [sx, sy, sz] = &mut ws.spec;
    for q in 0..sx.len() {
        let (mx, my, mz) = (sx[q], sy[q], sz[q]);
        sx[q] = -(mx * nxx[q] + my * nxy[q] + mz * nxz[q]);
        sy[q] = -(mx * nxy[q] + my * nyy[q] + mz * nyz[q]);
        sz[q] = -(mx * nxz[q] + my * nyz[q] + mz * nzz[q]);
    }

    let scale = 1.0 / kernel.fft.len() as f64;
    for c in 0..3 {
        kernel.fft.inverse(&mut ws.spec[c], counts, &mut ws.real);
        let dst = out.comp_mut(c);
        for k in 0..grid.nz {
            for j in 0..grid.ny {
                let to = grid.idx(1, j + 1, k + 1);
                let from = px * (j + py * k);
                for i in 0..grid.nx {
                    dst[to + i] = ws.real[from + i] * scale;
                }
            }
        }
    }
    Ok(())
}

/// Explicit double sum over source and target cells. O(n²); oracle only.
pub fn stray_field_direct(m: &VectorField, grid: &Grid) -> VectorField {
    let table = TensorTable::build(grid.counts(), grid.spacings());
    stray_field_direct_with(m, grid, &table)
}

pub fn stray_field_direct_with(m: &VectorField, grid: &Grid, table: &TensorTable) -> VectorField {
    let mut out = VectorField::zeros(grid);
    grid.for_each_cell(|i, j, k| {
        let mut h = [0.0; 3];
        grid.for_each_cell(|a, b, c| {
            let t = table.at(i as i64 - a as i64, j as i64 - b as i64, k as i64 - c as i64);
            let s = m.get(grid.idx(a, b, c));
            h[0] -= t[0] * s[0] + t[3] * s[1] + t[4] * s[2];
            h[1] -= t[3] * s[0] + t[1] * s[1] + t[5] * s[2];
            h[2] -= t[4] * s[0] + t[5] * s[1] + t[2] * s[2];
        });
        out.set(grid.idx(i, j, k), h);
    });
    out
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn zero_magnetization_gives_zero_field() {
        let g = Grid::new([4, 3, 2], [1.0, 1.0, 0.5]).unwrap();
        let k = DemagKernel::build(&g);
        let h = stray_field(&VectorField::zeros(&g), &k, &g).unwrap();
        assert_eq!(h.max_abs(&g), 0.0);
        assert_eq!(stray_field_direct(&VectorField::zeros(&g), &g).max_abs(&g), 0.0);
    }

    #[test]
    fn single_cube_self_field() {
        let g = Grid::new([1, 1, 1], [2.0, 2.0, 2.0]).unwrap();
        let k = DemagKernel::build(&g);
        let m = VectorField::uniform(&g, [0.0, 0.0, 1.0]);
        let h = stray_field(&m, &k, &g).unwrap().get(g.idx(1, 1, 1));
        assert!(h[0].abs() < 1e-15 && h[1].abs() < 1e-15);
        assert!((h[2] + 1.0 / 3.0).abs() < 1e-12, "{h:?}");
        let d = stray_field_direct(&m, &g).get(g.idx(1, 1, 1));
        assert!((d[2] + 1.0 / 3.0).abs() < 1e-12);
    }

    #[test]
    fn pair_of_cells_is_translation_symmetric() {
        let g = Grid::new([2, 1, 1], [1.0; 3]).unwrap();
        let m = VectorField::uniform(&g, [1.0, 0.0, 0.0]);
        let h = stray_field_direct(&m, &g);
        assert_eq!(h.get(g.idx(1, 1, 1)), h.get(g.idx(2, 1, 1)));
    }

    #[test]
    fn kernel_grid_mismatch_is_config_error() {
        let g = Grid::new([4, 3, 2], [1.0; 3]).unwrap();
        let other = Grid::new([4, 3, 3], [1.0; 3]).unwrap();
        let k = DemagKernel::build(&g);
        let err = stray_field(&VectorField::zeros(&other), &k, &other).unwrap_err();
        assert!(err.is_config());
    }
}
