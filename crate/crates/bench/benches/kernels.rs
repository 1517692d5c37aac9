use criterion::{black_box, criterion_group, criterion_main, BenchmarkId, Criterion};
use micromag::demag::{stray_field, DemagKernel};
use micromag::grid::{Grid, ScalarField};
use micromag::linsolve::HelmholtzSolver;
use micromag::problems::{random_unit_field, std4_spec, STD4_COARSE_NM};
use micromag::{EquationForm, FieldConfig, StepperKind};

const MESHES: [[usize; 3]; 3] = [[32, 32, 4], [64, 64, 4], [100, 25, 1]];

fn demag(c: &mut Criterion) {
    let mut group = c.benchmark_group("stray_field");
    for counts in MESHES {
        let grid = Grid::new(counts, [2.0, 2.0, 3.0]).unwrap();
        let kernel = DemagKernel::build(&grid);
        let m = random_unit_field(&grid, 1);
        group.bench_with_input(BenchmarkId::from_parameter(format!("{counts:?}")), &m, |b, m| {
            b.iter(|| stray_field(black_box(m), &kernel, &grid).unwrap())
        });
    }
    group.finish();
}

fn helmholtz(c: &mut Criterion) {
    let mut group = c.benchmark_group("helmholtz_solve");
    for counts in MESHES {
        let grid = Grid::new(counts, [2.0, 2.0, 3.0]).unwrap();
        let mut solver = HelmholtzSolver::new(&grid, 0.3).unwrap();
        let rhs = ScalarField::from_vec(&grid, (0..grid.n_cells()).map(|n| (0.37 * n as f64).sin()).collect()).unwrap();
        group.bench_with_input(BenchmarkId::from_parameter(format!("{counts:?}")), &rhs, |b, rhs| {
            b.iter(|| solver.solve(black_box(rhs)).unwrap())
        });
    }
    group.finish();
}

fn steps(c: &mut Criterion) {
    let setup = std4_spec(STD4_COARSE_NM, StepperKind::GspmBdf2, 1.0).setup(EquationForm::Ll).unwrap();
    let mut group = c.benchmark_group("std4_coarse_step");
    for kind in [StepperKind::Gspm, StepperKind::GspmSingleUpdate, StepperKind::GspmBdf2] {
        let m0 = random_unit_field(&setup.grid, 2);
        let mut st = setup.stepper(kind, setup.alpha, 1e-12, FieldConfig::default(), m0).unwrap();
        group.bench_function(kind.to_string(), |b| b.iter(|| st.step().unwrap()));
    }
    group.finish();
}

criterion_group!(benches, demag, helmholtz, steps);
criterion_main!(benches);
