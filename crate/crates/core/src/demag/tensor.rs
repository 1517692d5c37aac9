//! Cell-averaged demagnetizing tensor between two identical rectangular cells.
//!
//! `N(R)` maps the magnetization of a source cell to the volume-averaged
//! field in a target cell displaced by `R`: `h = -N(R) m`. Near the origin
//! the closed-form Newell expressions are used; their 27-point differences
//! lose roughly `eps * (|R|/h)^6` relative precision, so beyond
//! [`NEWELL_RADIUS`] cell sizes the dipole kernel is integrated over the
//! cell-cell overlap with Gauss-Legendre quadrature instead.

use std::f64::consts::PI;

/// Displacements (in units of the largest cell edge) up to which the
/// closed-form expressions are used.
pub const NEWELL_RADIUS: f64 = 10.0;

/// Regularisation threshold for arguments of `asinh`/`atan` terms.
const GUARD: f64 = 1e-14;

/// The six independent entries `[xx, yy, zz, xy, xz, yz]`.
pub type Tensor6 = [f64; 6];

fn asinh_ratio(num: f64, den_sq: f64) -> f64 {
    if den_sq <= GUARD * GUARD {
        0.0
    } else {
        (num / den_sq.sqrt()).asinh()
    }
}

fn atan_ratio(num: f64, den: f64) -> f64 {
    if den.abs() <= GUARD {
        0.0
    } else {
        (num / den).atan()
    }
}

/// Newell's `f`, generating the diagonal entries. Even in every argument.
pub fn newell_f(x: f64, y: f64, z: f64) -> f64 {
    let (x, y, z) = (x.abs(), y.abs(), z.abs());
    let (x2, y2, z2) = (x * x, y * y, z * z);
    let r = (x2 + y2 + z2).sqrt();
    let mut acc = (2.0 * x2 - y2 - z2) * r / 6.0;
    if y > 0.0 {
        acc += 0.5 * y * (z2 - x2) * asinh_ratio(y, x2 + z2);
    }
    if z > 0.0 {
        acc += 0.5 * z * (y2 - x2) * asinh_ratio(z, x2 + y2);
    }
    if x > 0.0 && y > 0.0 && z > 0.0 {
        acc -= x * y * z * atan_ratio(y * z, x * r);
    }
    acc
}

/// Newell's `g`, generating the off-diagonal entries. Odd in `x` and `y`.
pub fn newell_g(x: f64, y: f64, z: f64) -> f64 {
    let (x2, y2, z2) = (x * x, y * y, z * z);
    let r = (x2 + y2 + z2).sqrt();
    let mut acc = -x * y * r / 3.0;
    if x != 0.0 && y != 0.0 && z != 0.0 {
        acc += x * y * z * asinh_ratio(z, x2 + y2);
    }
    if y != 0.0 {
        acc += y / 6.0 * (3.0 * z2 - y2) * asinh_ratio(x, y2 + z2);
    }
    if x != 0.0 {
        acc += x / 6.0 * (3.0 * z2 - x2) * asinh_ratio(y, x2 + z2);
    }
    if z != 0.0 {
        acc -= z * z2 / 6.0 * atan_ratio(x * y, z * r);
        if y != 0.0 {
            acc -= 0.5 * z * y2 * atan_ratio(x * z, y * r);
        }
        if x != 0.0 {
            acc -= 0.5 * z * x2 * atan_ratio(y * z, x * r);
        }
    }
    acc
}

const STENCIL: [(f64, f64); 3] = [(-1.0, -1.0), (0.0, 2.0), (1.0, -1.0)];

/// 27-point mixed second difference of `func` around `(x, y, z)`.
fn second_difference(func: impl Fn(f64, f64, f64) -> f64, p: [f64; 3], h: [f64; 3]) -> f64 {
    let mut acc = 0.0;
    for &(ex, wx) in &STENCIL {
        for &(ey, wy) in &STENCIL {
            for &(ez, wz) in &STENCIL {
                acc += wx * wy * wz * func(p[0] + ex * h[0], p[1] + ey * h[1], p[2] + ez * h[2]);
            }
        }
    }
    acc
}

/// Closed-form cell-averaged tensor at displacement `p` for cells `h`.
pub fn newell_tensor(p: [f64; 3], h: [f64; 3]) -> Tensor6 {
    let norm = 1.0 / (4.0 * PI * h[0] * h[1] * h[2]);
    let [x, y, z] = p;
    let [a, b, c] = h;
    [
        norm * second_difference(newell_f, [x, y, z], [a, b, c]),
        norm * second_difference(|u, v, w| newell_f(v, u, w), [x, y, z], [a, b, c]),
        norm * second_difference(|u, v, w| newell_f(w, v, u), [x, y, z], [a, b, c]),
        norm * second_difference(newell_g, [x, y, z], [a, b, c]),
        norm * second_difference(|u, v, w| newell_g(u, w, v), [x, y, z], [a, b, c]),
        norm * second_difference(|u, v, w| newell_g(v, w, u), [x, y, z], [a, b, c]),
    ]
}

/// Point-dipole tensor `-(3 r r^T - r^2 I) / (4 pi r^5)`.
pub fn dipole_tensor(r: [f64; 3]) -> Tensor6 {
    let r2 = r[0] * r[0] + r[1] * r[1] + r[2] * r[2];
    let inv5 = 1.0 / (4.0 * PI * r2 * r2 * r2.sqrt());
    [
        -(3.0 * r[0] * r[0] - r2) * inv5,
        -(3.0 * r[1] * r[1] - r2) * inv5,
        -(3.0 * r[2] * r[2] - r2) * inv5,
        -3.0 * r[0] * r[1] * inv5,
        -3.0 * r[0] * r[2] * inv5,
        -3.0 * r[1] * r[2] * inv5,
    ]
}

/// Six-point Gauss-Legendre nodes and weights on [-1, 1].
const GL6: [(f64, f64); 6] = [
    (-0.932_469_514_203_152, 0.171_324_492_379_170_3),
    (-0.661_209_386_466_264_5, 0.360_761_573_048_138_6),
    (-0.238_619_186_083_196_9, 0.467_913_934_572_691),
    (0.238_619_186_083_196_9, 0.467_913_934_572_691),
    (0.661_209_386_466_264_5, 0.360_761_573_048_138_6),
    (0.932_469_514_203_152, 0.171_324_492_379_170_3),
];

/// Quadrature nodes for `∫_{-h}^{h} φ(s) (h - |s|) / h ds`, split at zero.
fn triangle_rule(h: f64) -> Vec<(f64, f64)> {
    let mut rule = Vec::with_capacity(12);
    for sign in [-1.0, 1.0] {
        for &(t, w) in &GL6 {
            // map [-1, 1] onto [0, h]
            let s = 0.5 * h * (t + 1.0);
            let weight = 0.5 * w * (h - s);
            rule.push((sign * s, weight));
        }
    }
    rule
}

/// Cell-averaged tensor by quadrature of the dipole kernel over the overlap
/// of two cells. Accurate only for well-separated cells.
pub fn far_tensor(p: [f64; 3], h: [f64; 3]) -> Tensor6 {
    let rules = [triangle_rule(h[0]), triangle_rule(h[1]), triangle_rule(h[2])];
    let mut acc = [0.0; 6];
    for &(sx, wx) in &rules[0] {
        for &(sy, wy) in &rules[1] {
            for &(sz, wz) in &rules[2] {
                let w = wx * wy * wz;
                let t = dipole_tensor([p[0] + sx, p[1] + sy, p[2] + sz]);
                for (a, v) in acc.iter_mut().zip(t) {
                    *a += w * v;
                }
            }
        }
    }
    acc
}

/// Cell-averaged tensor between identical cells `h` displaced by `p`.
pub fn cell_tensor(p: [f64; 3], h: [f64; 3]) -> Tensor6 {
    // The tensor is scale invariant; work in units of the largest edge.
    let s = h[0].max(h[1]).max(h[2]);
    let hs = [h[0] / s, h[1] / s, h[2] / s];
    let ps = [p[0] / s, p[1] / s, p[2] / s];
    let dist = (ps[0] * ps[0] + ps[1] * ps[1] + ps[2] * ps[2]).sqrt();
    if dist <= NEWELL_RADIUS {
        newell_tensor(ps, hs)
    } else {
        far_tensor(ps, hs)
    }
}

/// Tensor entries for all non-negative cell offsets `0..n` per axis.
#[derive(Debug, Clone)]
pub struct TensorTable {
    counts: [usize; 3],
    entries: Vec<Tensor6>,
}

impl TensorTable {
    pub fn build(counts: [usize; 3], h: [f64; 3]) -> Self {
        let mut entries = Vec::with_capacity(counts.iter().product());
        for k in 0..counts[2] {
            for j in 0..counts[1] {
                for i in 0..counts[0] {
                    let p = [i as f64 * h[0], j as f64 * h[1], k as f64 * h[2]];
                    entries.push(cell_tensor(p, h));
                }
            }
        }
        TensorTable { counts, entries }
    }

    /// Entry for the signed offset `(di, dj, dk)`, applying parity rules.
    pub fn at(&self, di: i64, dj: i64, dk: i64) -> Tensor6 {
        let [nx, ny, _] = self.counts;
        let (i, j, k) = (di.unsigned_abs() as usize, dj.unsigned_abs() as usize, dk.unsigned_abs() as usize);
        let mut t = self.entries[i + nx * (j + ny * k)];
        let (sx, sy, sz) = (di.signum() as f64, dj.signum() as f64, dk.signum() as f64);
        // xy odd in x and y, xz odd in x and z, yz odd in y and z
        t[3] *= if di == 0 || dj == 0 { 1.0 } else { sx * sy };
        t[4] *= if di == 0 || dk == 0 { 1.0 } else { sx * sz };
        t[5] *= if dj == 0 || dk == 0 { 1.0 } else { sy * sz };
        t
    }

    pub fn counts(&self) -> [usize; 3] {
        self.counts
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn cube_self_term() {
        let t = newell_tensor([0.0; 3], [1.0; 3]);
        for d in &t[..3] {
            assert!((d - 1.0 / 3.0).abs() < 1e-12, "{t:?}");
        }
        for o in &t[3..] {
            assert!(o.abs() < 1e-14, "{t:?}");
        }
    }

    #[test]
    fn newell_and_quadrature_agree_at_switch_radius() {
        let h = [1.0, 0.8, 0.6];
        for p in [[10.0, 0.8, 0.0], [6.0, 6.4, 1.8], [0.0, 0.0, 10.2]] {
            let a = newell_tensor(p, h);
            let b = far_tensor(p, h);
            let scale = a.iter().fold(0.0f64, |m, v| m.max(v.abs()));
            for c in 0..6 {
                assert!((a[c] - b[c]).abs() < 1e-8 * scale, "{p:?} {c}: {} vs {}", a[c], b[c]);
            }
        }
    }

    #[test]
    fn off_diagonal_parity_is_applied() {
        let t = TensorTable::build([3, 3, 3], [1.0; 3]);
        let a = t.at(1, 2, 1);
        let b = t.at(-1, 2, 1);
        assert_eq!(a[0], b[0]);
        assert_eq!(a[3], -b[3]);
        assert_eq!(a[4], -b[4]);
        assert_eq!(a[5], b[5]);
    }
}
