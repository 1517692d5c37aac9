use micromag::physics::{AppliedField, SpinTorque};
use micromag::problems::{random_unit_field, ProblemSpec, NM};
use micromag::{Counters, EquationForm, FieldConfig, MaterialConfig, Setup, Stepper, StepperKind};
use proptest::prelude::*;

const KINDS: [StepperKind; 3] = [StepperKind::Gspm, StepperKind::GspmSingleUpdate, StepperKind::GspmBdf2];

fn small_setup(ku: f64) -> Setup {
    let spec = ProblemSpec {
        geometry_m: [24.0 * NM, 20.0 * NM, 9.0 * NM],
        cell_m: [4.0 * NM, 4.0 * NM, 3.0 * NM],
        material: MaterialConfig { ku, ..MaterialConfig::permalloy(0.1, NM) },
        dt_s: 1e-12,
        duration_s: 1e-10,
        stepper: StepperKind::GspmBdf2,
    };
    spec.setup(EquationForm::LlgStt).unwrap()
}

fn full_field(setup: &Setup) -> FieldConfig {
    FieldConfig {
        applied: AppliedField::Constant(setup.applied_mt(30.0, [0.3, -1.0, 0.2])),
        stt: Some(SpinTorque { u: setup.scaling.stt_drift(70.0), xi: 0.05 }),
        ..Default::default()
    }
}

fn stepper(setup: &Setup, kind: StepperKind, seed: u64, dt_s: f64, alpha: f64) -> Stepper {
    let m0 = random_unit_field(&setup.grid, seed);
    setup.stepper(kind, alpha, dt_s, full_field(setup), m0).unwrap()
}

#[test]
fn unit_norm_after_every_step() {
    let setup = small_setup(5e3);
    for kind in KINDS {
        let mut st = stepper(&setup, kind, 7, 1e-12, 0.1);
        for n in 1..=40 {
            st.step().unwrap();
            let dev = st.state.current.max_unit_deviation(&setup.grid);
            assert!(dev <= 1e-12, "{kind} step {n}: {dev:e}");
        }
        assert!(st.state.max_norm_error <= 1e-12);
    }
}

#[test]
fn cost_per_step() {
    let setup = small_setup(0.0);
    let expect = [
        (StepperKind::Gspm, Counters { helmholtz_solves: 5, strayfield_updates: 3 }),
        (StepperKind::GspmSingleUpdate, Counters { helmholtz_solves: 5, strayfield_updates: 1 }),
        (StepperKind::GspmBdf2, Counters { helmholtz_solves: 5, strayfield_updates: 1 }),
    ];
    for (kind, per_step) in expect {
        assert_eq!(kind.cost(), per_step);
        let mut st = stepper(&setup, kind, 3, 1e-12, 0.1);
        // The first BDF2 step bootstraps with one GSPM step.
        st.step().unwrap();
        let after_first = st.state.counters;
        for _ in 0..10 {
            let before = st.state.counters;
            st.step().unwrap();
            assert_eq!(st.state.last_step, per_step, "{kind}");
            assert_eq!(st.state.counters, before + per_step, "{kind}");
        }
        assert_eq!(st.state.counters, after_first + per_step * 10);
    }
}

#[test]
fn single_cube_is_a_fixed_point() {
    // One cubic cell: the self-demag field is -m/3, parallel to m, so no torque.
    let spec = ProblemSpec {
        geometry_m: [4.0 * NM; 3],
        cell_m: [4.0 * NM; 3],
        material: MaterialConfig::permalloy(0.1, NM),
        dt_s: 1e-12,
        duration_s: 1e-11,
        stepper: StepperKind::Gspm,
    };
    let setup = spec.setup(EquationForm::Ll).unwrap();
    for kind in KINDS {
        let m0 = micromag::VectorField::uniform(&setup.grid, [0.0, 0.0, 1.0]);
        let mut st = setup.stepper(kind, 0.1, 1e-12, FieldConfig::default(), m0.clone()).unwrap();
        for _ in 0..20 {
            st.step().unwrap();
        }
        assert!(st.state.current.max_distance(&m0, &setup.grid) < 1e-14, "{kind}");
    }
}

#[test]
fn runs_are_bitwise_reproducible() {
    let setup = small_setup(5e3);
    for kind in KINDS {
        let run = || {
            let mut st = stepper(&setup, kind, 11, 1e-12, 0.1);
            for _ in 0..15 {
                st.step().unwrap();
            }
            st.state.current
        };
        assert_eq!(run(), run(), "{kind}");
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(24))]

    #[test]
    fn norm_is_preserved_for_any_step_and_damping(
        seed in any::<u64>(),
        dt_ps in 0.01f64..4.0,
        alpha in 0.0f64..1.0,
        kind in prop::sample::select(KINDS.to_vec()),
    ) {
        let setup = small_setup(0.0);
        let mut st = stepper(&setup, kind, seed, dt_ps * 1e-12, alpha);
        for _ in 0..3 {
            // Large steps may legitimately break down; a finished step must be unit length.
            if st.step().is_err() {
                return Ok(());
            }
            prop_assert!(st.state.current.max_unit_deviation(&setup.grid) <= 1e-12);
        }
    }
}
