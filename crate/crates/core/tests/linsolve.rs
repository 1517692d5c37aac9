use micromag::grid::{Grid, ScalarField};
use micromag::linsolve::{apply_helmholtz, dense, HelmholtzSolver};
use proptest::prelude::*;

fn rhs(grid: &Grid, vals: &[f64]) -> ScalarField {
    let data = vals.iter().cycle().take(grid.n_cells()).copied().collect();
    ScalarField::from_vec(grid, data).unwrap()
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn residual_is_tiny(
        counts in prop::array::uniform3(1usize..17),
        h in prop::array::uniform3(0.2f64..3.0),
        c in 0.0f64..50.0,
        vals in prop::collection::vec(-1.0f64..1.0, 1..200),
    ) {
        let grid = Grid::new(counts, h).unwrap();
        let b = rhs(&grid, &vals);
        let u = HelmholtzSolver::new(&grid, c).unwrap().solve(&b).unwrap();
        let r = apply_helmholtz(&grid, c, &u);
        let res = r.data.iter().zip(&b.data).fold(0.0f64, |m, (x, y)| m.max((x - y).abs()));
        prop_assert!(res <= 1e-12 * b.max_abs().max(1e-300));
    }

    #[test]
    fn matches_dense_elimination(
        counts in (1usize..7, 1usize..6, 1usize..5),
        h in prop::array::uniform3(0.5f64..2.0),
        c in 0.0f64..5.0,
        vals in prop::collection::vec(-1.0f64..1.0, 1..120),
    ) {
        let grid = Grid::new([counts.0, counts.1, counts.2], h).unwrap();
        let b = rhs(&grid, &vals);
        let u = HelmholtzSolver::new(&grid, c).unwrap().solve(&b).unwrap();
        let x = dense::solve(dense::assemble(&grid, c), b.data.clone());
        let scale = x.iter().fold(1e-300f64, |m, v| m.max(v.abs()));
        for (a, b) in u.data.iter().zip(&x) {
            prop_assert!((a - b).abs() <= 1e-11 * scale);
        }
    }

    /// `(I - cΔ)` is an M-matrix with unit row sums, so its inverse is a contraction in the max norm.
    #[test]
    fn inverse_is_max_norm_contraction(
        counts in prop::array::uniform3(1usize..10),
        c in 0.0f64..20.0,
        vals in prop::collection::vec(-1.0f64..1.0, 1..100),
    ) {
        let grid = Grid::new(counts, [1.0, 1.5, 0.8]).unwrap();
        let b = rhs(&grid, &vals);
        let u = HelmholtzSolver::new(&grid, c).unwrap().solve(&b).unwrap();
        prop_assert!(u.max_abs() <= b.max_abs() * (1.0 + 1e-12));
    }

    /// The mean is preserved: the zero cosine mode has eigenvalue one.
    #[test]
    fn mean_is_preserved(
        counts in prop::array::uniform3(1usize..10),
        c in 0.0f64..20.0,
        vals in prop::collection::vec(-1.0f64..1.0, 1..100),
    ) {
        let grid = Grid::new(counts, [1.0, 1.5, 0.8]).unwrap();
        let b = rhs(&grid, &vals);
        let u = HelmholtzSolver::new(&grid, c).unwrap().solve(&b).unwrap();
        let (mu, mb) = (u.data.iter().sum::<f64>(), b.data.iter().sum::<f64>());
        prop_assert!((mu - mb).abs() <= 1e-12 * grid.n_cells() as f64);
    }
}
