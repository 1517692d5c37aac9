use std::sync::Arc;

use realfft::{ComplexToReal, RealFftPlanner, RealToComplex};
use rustfft::num_complex::Complex64;
use rustfft::{Fft, FftPlanner};

/// Real-to-complex 3D transform on an i-fastest `px * py * pz` array,
/// half-spectrum along x. Transforms skip lines that are known to be zero
/// (forward) or not needed (inverse), which matters for zero-padded data.
pub(crate) struct Fft3 {
    dims: [usize; 3],
    hx: usize,
    r2c: Arc<dyn RealToComplex<f64>>,
    c2r: Arc<dyn ComplexToReal<f64>>,
    y_fwd: Arc<dyn Fft<f64>>,
    y_inv: Arc<dyn Fft<f64>>,
    z_fwd: Arc<dyn Fft<f64>>,
    z_inv: Arc<dyn Fft<f64>>,
}

impl Fft3 {
    pub fn new(dims: [usize; 3]) -> Self {
        let mut real = RealFftPlanner::<f64>::new();
        let mut cplx = FftPlanner::<f64>::new();
        Fft3 {
            dims,
            hx: dims[0] / 2 + 1,
            r2c: real.plan_fft_forward(dims[0]),
            c2r: real.plan_fft_inverse(dims[0]),
            y_fwd: cplx.plan_fft_forward(dims[1]),
            y_inv: cplx.plan_fft_inverse(dims[1]),
            z_fwd: cplx.plan_fft_forward(dims[2]),
            z_inv: cplx.plan_fft_inverse(dims[2]),
        }
    }

    pub fn dims(&self) -> [usize; 3] {
        self.dims
    }

    pub fn len(&self) -> usize {
        self.dims.iter().product()
    }

    pub fn spectral_len(&self) -> usize {
        self.hx * self.dims[1] * self.dims[2]
    }

    /// `real` is clobbered. Only `[0, extent)` of `real` may be non-zero.
    pub fn forward(&self, real: &mut [f64], extent: [usize; 3], spec: &mut [Complex64]) {
        let [px, py, pz] = self.dims;
        let hx = self.hx;
        let mut scratch = self.r2c.make_scratch_vec();
        for k in 0..pz {
            for j in 0..py {
                let row = &mut spec[hx * (j + py * k)..hx * (j + py * k + 1)];
                if j < extent[1] && k < extent[2] {
                    let input = &mut real[px * (j + py * k)..px * (j + py * k + 1)];
                    self.r2c
                        .process_with_scratch(input, row, &mut scratch)
                        .expect("r2c buffer sizes are fixed at construction");
                } else {
                    row.fill(Complex64::default());
                }
            }
        }
        self.along_y(spec, extent[2], &self.y_fwd);
        self.along_z(spec, &self.z_fwd);
    }

    /// Unnormalised inverse. `spec` is clobbered; only `[0, extent)` of
    /// `real` is written.
    pub fn inverse(&self, spec: &mut [Complex64], extent: [usize; 3], real: &mut [f64]) {
        let [px, py, _] = self.dims;
        let hx = self.hx;
        self.along_z(spec, &self.z_inv);
        self.along_y(spec, extent[2], &self.y_inv);
        let mut scratch = self.c2r.make_scratch_vec();
        let mut out = self.c2r.make_output_vec();
        for k in 0..extent[2] {
            for j in 0..extent[1] {
                let row = &mut spec[hx * (j + py * k)..hx * (j + py * k + 1)];
                // DC and Nyquist bins of a real signal are real; drop roundoff.
                row[0].im = 0.0;
                if px % 2 == 0 {
                    row[hx - 1].im = 0.0;
                }
                self.c2r
                    .process_with_scratch(row, &mut out, &mut scratch)
                    .expect("c2r buffer sizes are fixed at construction");
                let start = px * (j + py * k);
                real[start..start + extent[0]].copy_from_slice(&out[..extent[0]]);
            }
        }
    }

    fn along_y(&self, spec: &mut [Complex64], planes: usize, fft: &Arc<dyn Fft<f64>>) {
        let [_, py, _] = self.dims;
        if py == 1 {
            return;
        }
        let hx = self.hx;
        let mut buf = vec![Complex64::default(); hx * py];
        let mut scratch = vec![Complex64::default(); fft.get_inplace_scratch_len()];
        for k in 0..planes {
            let plane = &mut spec[hx * py * k..hx * py * (k + 1)];
            for j in 0..py {
                for x in 0..hx {
                    buf[x * py + j] = plane[x + hx * j];
                }
            }
            fft.process_with_scratch(&mut buf, &mut scratch);
            for j in 0..py {
                for x in 0..hx {
                    plane[x + hx * j] = buf[x * py + j];
                }
            }
        }
    }

    fn along_z(&self, spec: &mut [Complex64], fft: &Arc<dyn Fft<f64>>) {
        let [_, py, pz] = self.dims;
        if pz == 1 {
            return;
        }
        let hx = self.hx;
        let plane = hx * py;
        let mut buf = vec![Complex64::default(); hx * pz];
        let mut scratch = vec![Complex64::default(); fft.get_inplace_scratch_len()];
        for j in 0..py {
            for k in 0..pz {
                for x in 0..hx {
                    buf[x * pz + k] = spec[x + hx * j + plane * k];
                }
            }
            fft.process_with_scratch(&mut buf, &mut scratch);
            for k in 0..pz {
                for x in 0..hx {
                    spec[x + hx * j + plane * k] = buf[x * pz + k];
                }
            }
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn round_trip_recovers_input() {
        let dims = [6, 4, 2];
        let fft = Fft3::new(dims);
        let n = fft.len();
        let orig: Vec<f64> = (0..n).map(|i| ((i * 37) % 11) as f64 - 5.0).collect();
        let mut real = orig.clone();
        let mut spec = vec![Complex64::default(); fft.spectral_len()];
        fft.forward(&mut real, dims, &mut spec);
        let mut back = vec![0.0; n];
        fft.inverse(&mut spec, dims, &mut back);
        for (a, b) in orig.iter().zip(&back) {
            assert!((a - b / n as f64).abs() < 1e-12);
        }
    }
}
