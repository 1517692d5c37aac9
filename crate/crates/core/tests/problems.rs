use micromag::grid::average_magnetization;
use micromag::problems::*;
use micromag::{EquationForm, FieldConfig, StepperKind, VectorField};

fn max_component_change(a: [f64; 3], b: [f64; 3]) -> f64 {
    (0..3).map(|c| (a[c] - b[c]).abs()).fold(0.0, f64::max)
}

#[test]
fn s_state_is_an_equilibrium() {
    let setup = std4_spec(STD4_COARSE_NM, StepperKind::GspmBdf2, 1.0).setup(EquationForm::Ll).unwrap();
    let (s, report) = generate_s_state(&setup, &SStateOptions::default()).unwrap();
    assert!(report.ends.is_s_state());
    assert_eq!(report.stages.len(), 9);
    assert!(report.stages.iter().all(|r| r.converged));

    let mut st = setup.stepper(StepperKind::GspmBdf2, setup.alpha, 1e-12, FieldConfig::default(), s.clone()).unwrap();
    st.step().unwrap();
    let before = average_magnetization(&s, &setup.grid);
    let after = average_magnetization(&st.state.current, &setup.grid);
    assert!(max_component_change(before, after) < 1e-8, "{before:?} -> {after:?}");

    // Independent start: uniform along x with a small y tilt.
    let n = 1.01f64.sqrt();
    let m0 = VectorField::uniform(&setup.grid, [1.0 / n, 0.1 / n, 0.0]);
    let opts = RelaxOptions { tol: 1e-7, max_steps: 100_000, ..Default::default() };
    let (alt, rep) = relax(&setup, m0, [0.0; 3], &opts).unwrap();
    assert!(rep.converged);
    let alt_avg = average_magnetization(&alt, &setup.grid);
    assert!((alt_avg[0] - before[0]).abs() < 1e-5, "{alt_avg:?} vs {before:?}");
    assert!((0.955..0.975).contains(&before[0]), "{before:?}");
}

#[test]
fn vortex_without_current_stays_put() {
    let setup = std5_spec(StepperKind::GspmBdf2, 1.0).setup(EquationForm::LlgStt).unwrap();
    let (m, _) = relaxed_vortex(&setup, VORTEX_CORE_NM).unwrap();
    assert!(circulation(&m, &setup) > 0.9);
    let opts = Std5Options { duration_s: 1e-9, sample_every: 10, ..Default::default() };
    let out = run_std5(&setup, &m, 0.0, 0.0, &opts).unwrap();
    let start = out.series[0].m_avg;
    let drift = out.series.iter().map(|s| max_component_change(s.m_avg, start)).fold(0.0, f64::max);
    assert!(drift < 1e-6, "{drift:e}");
}

#[test]
fn stability_meshes() {
    let full = stability_spec(Scale::Full, StepperKind::Gspm, 1.0);
    assert_eq!(full.counts().unwrap(), [250, 250, 5]);
    assert_eq!(full.steps(), 1600);
    let desk = stability_spec(Scale::Desk, StepperKind::Gspm, 1.0);
    assert_eq!(desk.counts().unwrap(), [64, 64, 5]);
}

#[test]
fn std4_fine_mesh_counts() {
    let spec = std4_spec(STD4_FINE_NM, StepperKind::GspmBdf2, 1.0);
    assert_eq!(spec.counts().unwrap(), [200, 50, 1]);
}

/// ⟨m_y⟩(t) of GSPM and GSPM-BDF2 at 0.5 ps over the first 2 ns, plus the
/// crossing time against the 1 ps run.
#[test]
fn std4_steppers_agree_at_half_picosecond() {
    let setup = std4_spec(STD4_COARSE_NM, StepperKind::GspmBdf2, 1.0).setup(EquationForm::Ll).unwrap();
    let (s, _) = generate_s_state(&setup, &SStateOptions::default()).unwrap();
    let run = |stepper, dt_s| {
        let opts = Std4Options { stepper, dt_s, after_crossing_s: 2e-9, ..Default::default() };
        run_std4(&setup, &s, Std4Field::Field1, &opts).unwrap()
    };
    let g = run(StepperKind::Gspm, 0.5e-12);
    let b = run(StepperKind::GspmBdf2, 0.5e-12);
    let sc = setup.scaling;
    let sq: Vec<f64> = g
        .series
        .iter()
        .zip(&b.series)
        .take_while(|(x, _)| sc.time_to_ns(x.t) <= 2.0 + 1e-9)
        .map(|(x, y)| {
            assert_eq!(x.step, y.step);
            (x.m_avg[1] - y.m_avg[1]).powi(2)
        })
        .collect();
    assert!(sc.time_to_ns(g.series[sq.len() - 1].t) > 1.999);
    let rms = (sq.iter().sum::<f64>() / sq.len() as f64).sqrt();
    assert!(rms <= 0.02, "rms {rms}");

    let coarse_dt = run(StepperKind::GspmBdf2, 1e-12);
    let rel = (coarse_dt.crossing_ns - b.crossing_ns).abs() / b.crossing_ns;
    assert!(rel < 0.02, "{} vs {}", coarse_dt.crossing_ns, b.crossing_ns);
    eprintln!("rms {rms:.4}, crossing 1 ps {:.4} ns, 0.5 ps {:.4} ns", coarse_dt.crossing_ns, b.crossing_ns);
}
