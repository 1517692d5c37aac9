use micromag::demag::{cell_tensor, stray_field, stray_field_direct, DemagKernel};
use micromag::grid::{average_magnetization, Grid, VectorField};
use proptest::prelude::*;

/// Aharoni's demagnetizing factor along `c` of a `2a × 2b × 2c` prism.
fn aharoni_dz(a: f64, b: f64, c: f64) -> f64 {
    let r = (a * a + b * b + c * c).sqrt();
    let ab = (a * a + b * b).sqrt();
    let bc = (b * b + c * c).sqrt();
    let ac = (a * a + c * c).sqrt();
    let pi_d = (b * b - c * c) / (2.0 * b * c) * ((r - a) / (r + a)).ln()
        + (a * a - c * c) / (2.0 * a * c) * ((r - b) / (r + b)).ln()
        + b / (2.0 * c) * ((ab + a) / (ab - a)).ln()
        + a / (2.0 * c) * ((ab + b) / (ab - b)).ln()
        + c / (2.0 * a) * ((bc - b) / (bc + b)).ln()
        + c / (2.0 * b) * ((ac - a) / (ac + a)).ln()
        + 2.0 * (a * b / (c * r)).atan()
        + (a.powi(3) + b.powi(3) - 2.0 * c.powi(3)) / (3.0 * a * b * c)
        + (a * a + b * b - 2.0 * c * c) / (3.0 * a * b * c) * r
        + c / (a * b) * (ac + bc)
        - (ab.powi(3) + bc.powi(3) + ac.powi(3)) / (3.0 * a * b * c);
    pi_d / std::f64::consts::PI
}

#[test]
fn aharoni_oracle_sanity() {
    let d = aharoni_dz(1.0, 1.0, 1.0);
    assert!((d - 1.0 / 3.0).abs() < 1e-14, "{d}");
}

#[test]
fn self_term_matches_aharoni() {
    for h in [[1.0, 1.0, 1.0], [5.0, 5.0, 3.0], [2.0, 3.0, 0.5], [4.0, 1.0, 7.0]] {
        let t = cell_tensor([0.0; 3], h);
        let (a, b, c) = (h[0] / 2.0, h[1] / 2.0, h[2] / 2.0);
        let expect = [aharoni_dz(b, c, a), aharoni_dz(c, a, b), aharoni_dz(a, b, c)];
        for (got, want) in t[..3].iter().zip(expect) {
            assert!((got - want).abs() < 1e-12, "{h:?}: {got} vs {want}");
        }
        assert!(t[3..].iter().all(|v| v.abs() < 1e-14));
    }
}

/// Uniform magnetization: the cell-averaged field is `-N` of the whole prism.
/// The larger cases reach the quadrature branch of the tensor.
#[test]
fn uniform_prism_mean_field_matches_aharoni() {
    for (counts, h) in [([8, 8, 8], [1.0; 3]), ([24, 12, 1], [2.0, 2.0, 1.5]), ([40, 10, 2], [2.5, 2.5, 3.0])] {
        let grid = Grid::new(counts, h).unwrap();
        let kernel = DemagKernel::build(&grid);
        let ext = [0, 1, 2].map(|a| counts[a] as f64 * h[a] / 2.0);
        for axis in 0..3 {
            let mut dir = [0.0; 3];
            dir[axis] = 1.0;
            let m = VectorField::uniform(&grid, dir);
            let hd = stray_field(&m, &kernel, &grid).unwrap();
            let mean = average_magnetization(&hd, &grid);
            let want = match axis {
                0 => aharoni_dz(ext[1], ext[2], ext[0]),
                1 => aharoni_dz(ext[2], ext[0], ext[1]),
                _ => aharoni_dz(ext[0], ext[1], ext[2]),
            };
            assert!((mean[axis] + want).abs() < 1e-9, "{counts:?} axis {axis}: {} vs {}", -mean[axis], want);
        }
    }
}

fn unit_field(grid: &Grid, raw: &[[f64; 3]]) -> VectorField {
    let mut it = raw.iter().cycle();
    VectorField::from_fn(grid, |_| {
        let v = *it.next().unwrap();
        let n = (v[0] * v[0] + v[1] * v[1] + v[2] * v[2]).sqrt().max(1e-3);
        v.map(|c| c / n)
    })
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(48))]

    #[test]
    fn trace_is_one_on_self_and_zero_elsewhere(
        h in prop::array::uniform3(0.5f64..5.0),
        d in prop::array::uniform3(-14i32..14),
    ) {
        let p = [0, 1, 2].map(|a| d[a] as f64 * h[a]);
        let t = cell_tensor(p, h);
        let tr = t[0] + t[1] + t[2];
        let want = if d == [0, 0, 0] { 1.0 } else { 0.0 };
        prop_assert!((tr - want).abs() < 1e-11, "trace {tr} at {d:?}");
    }

    /// Cell aspect ratios up to 2; flatter cells lose more digits in the
    /// closed-form branch.
    #[test]
    fn tensor_is_even_in_displacement(
        h in prop::array::uniform3(1.0f64..2.0),
        d in prop::array::uniform3(-14i32..14),
    ) {
        let p = [0, 1, 2].map(|a| d[a] as f64 * h[a]);
        let a = cell_tensor(p, h);
        let b = cell_tensor(p.map(|c| -c), h);
        // Entries are bounded by one; the 27-point Newell sums cancel to ~1e-14.
        for (x, y) in a.iter().zip(b) {
            prop_assert!((x - y).abs() <= 1e-13, "{a:?} vs {b:?}");
        }
    }

    #[test]
    fn fft_matches_direct_sum(
        counts in prop::array::uniform3(1usize..7),
        h in prop::array::uniform3(0.5f64..4.0),
        raw in prop::collection::vec(prop::array::uniform3(-1.0f64..1.0), 1..64),
    ) {
        let grid = Grid::new(counts, h).unwrap();
        let m = unit_field(&grid, &raw);
        let kernel = DemagKernel::build(&grid);
        let fast = stray_field(&m, &kernel, &grid).unwrap();
        let slow = stray_field_direct(&m, &grid);
        let scale = slow.max_abs(&grid).max(1e-300);
        prop_assert!(fast.max_distance(&slow, &grid) <= 1e-10 * scale);
    }

    /// `h = -N m` is linear in `m`.
    #[test]
    fn stray_field_is_linear(
        counts in prop::array::uniform3(1usize..6),
        raw in prop::collection::vec(prop::array::uniform3(-1.0f64..1.0), 1..32),
        s in -3.0f64..3.0,
    ) {
        let grid = Grid::new(counts, [2.0, 1.0, 1.5]).unwrap();
        let kernel = DemagKernel::build(&grid);
        let m = unit_field(&grid, &raw);
        let mut ms = m.clone();
        for c in 0..3 {
            ms.comp_mut(c).iter_mut().for_each(|v| *v *= s);
        }
        let a = stray_field(&m, &kernel, &grid).unwrap();
        let b = stray_field(&ms, &kernel, &grid).unwrap();
        let mut a_s = a.clone();
        for c in 0..3 {
            a_s.comp_mut(c).iter_mut().for_each(|v| *v *= s);
        }
        prop_assert!(a_s.max_distance(&b, &grid) <= 1e-12 * (1.0 + a.max_abs(&grid) * s.abs()));
    }
}
