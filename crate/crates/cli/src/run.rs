use std::collections::BTreeMap;
use std::path::Path;
use std::time::Instant;

use anyhow::{Context, Result};
use micromag::config::InitialState;
use micromag::grid::average_magnetization;
use micromag::output::{self, records, write_snapshot, write_timeseries, Manifest};
use micromag::physics::{AppliedField, SpinTorque};
use micromag::problems::{
    generate_s_state, random_unit_field, relax, relaxed_vortex, run_std4, run_std5, stability_initial_state,
    vortex_initial_state, RelaxOptions, SStateOptions, Std4Options, Std5Options, STD5_CASES,
};
use micromag::steppers::{run_simulation, Flow, RunOptions};
use micromag::{Command, EquationForm, FieldConfig, RunConfig, Setup, VectorField};

pub enum Outcome {
    Passed,
    CheckFailed(Vec<String>),
}

pub fn execute(cfg: &RunConfig, jobs: usize) -> Result<Outcome> {
    output::ensure_writable(&cfg.out_dir)?;
    let start = Instant::now();
    let mut manifest = Manifest::new(cfg);
    let outcome = match cfg.command {
        Command::Converge => converge(cfg, jobs, &mut manifest)?,
        Command::Stability => stability(cfg, &mut manifest)?,
        Command::Std4 => std4(cfg, &mut manifest)?,
        Command::Std5 => std5(cfg, jobs, &mut manifest)?,
        Command::Relax => relax_cmd(cfg, &mut manifest)?,
        Command::Custom => custom(cfg, &mut manifest)?,
    };
    manifest.finish(start.elapsed());
    let path = manifest.write(&cfg.out_dir)?;
    println!("wrote {}", path.display());
    Ok(outcome)
}

fn meta(pairs: &[(&str, String)]) -> BTreeMap<String, String> {
    pairs.iter().map(|(k, v)| (k.to_string(), v.clone())).collect()
}

fn save_csv(cfg: &RunConfig, manifest: &mut Manifest, name: &str, rec: &[output::TimeSeriesRecord]) -> Result<()> {
    write_timeseries(rec, &cfg.out_dir.join(name))?;
    manifest.files.push(name.to_string());
    Ok(())
}

fn save_snapshot(
    cfg: &RunConfig,
    manifest: &mut Manifest,
    name: &str,
    setup: &Setup,
    m: &VectorField,
    t_ns: f64,
    metadata: BTreeMap<String, String>,
) -> Result<()> {
    write_snapshot(m, &setup.grid, t_ns, &metadata, &cfg.out_dir.join(name))?;
    manifest.files.push(name.to_string());
    Ok(())
}

fn converge(cfg: &RunConfig, jobs: usize, manifest: &mut Manifest) -> Result<Outcome> {
    let scheme = cfg.stepper();
    let mut failures = Vec::new();
    for &preset in &cfg.converge.cases {
        let report = preset.run(scheme, jobs).with_context(|| format!("convergence study {}", preset.name()))?;
        println!("{} ({scheme})\n{}", preset.name(), report.to_table());
        let name = format!("{}.csv", preset.name());
        std::fs::write(cfg.out_dir.join(&name), report.to_csv())
            .map_err(|e| micromag::Error::io(cfg.out_dir.join(&name), e))?;
        manifest.files.push(name);
        if let Some(p) = report.order {
            manifest.results.insert(format!("order_{}", preset.name()), p);
        }
        if cfg.converge.check {
            if let Err(msg) = preset.check(&report) {
                failures.push(msg);
            }
        }
    }
    Ok(if failures.is_empty() { Outcome::Passed } else { Outcome::CheckFailed(failures) })
}

/// Runs `steps` steps, writing the series and the periodic snapshots.
fn drive(
    cfg: &RunConfig,
    manifest: &mut Manifest,
    setup: &Setup,
    mut st: micromag::Stepper,
    steps: usize,
) -> Result<micromag::Stepper> {
    let every = cfg.sample_every_steps()?;
    let snap_every = cfg.snapshot_every_samples();
    let mut count = 0usize;
    let mut written = Vec::new();
    let mut failure = None;
    let series = run_simulation(&mut st, &setup.scaling, RunOptions { steps, sample_every: every, energy: true }, |s, m| {
        if let Some(n) = snap_every {
            if count.is_multiple_of(n) {
                let name = format!("snapshot_{:06}.txt", s.step);
                let t_ns = setup.scaling.time_to_ns(s.t);
                let md = meta(&[("trigger", "periodic".into()), ("step", s.step.to_string())]);
                if let Err(e) = write_snapshot(m, &setup.grid, t_ns, &md, &cfg.out_dir.join(&name)) {
                    failure = Some(e);
                    return Flow::Stop;
                }
                written.push(name);
            }
        }
        count += 1;
        Flow::Continue
    })?;
    if let Some(e) = failure {
        return Err(e.into());
    }
    manifest.files.extend(written);
    save_csv(cfg, manifest, "timeseries.csv", &records(&series, &setup.scaling))?;
    Ok(st)
}

fn finish_run(cfg: &RunConfig, manifest: &mut Manifest, setup: &Setup, st: &micromag::Stepper) -> Result<()> {
    let m = &st.state.current;
    let avg = average_magnetization(m, &setup.grid);
    for (c, v) in ["mx", "my", "mz"].iter().zip(avg) {
        manifest.results.insert(format!("final_{c}"), v);
    }
    manifest.results.insert("max_norm_error".into(), st.state.max_norm_error);
    manifest.results.insert("max_pre_projection_norm".into(), st.state.max_pre_projection_norm);
    manifest.counters = manifest.counters + st.state.counters;
    let t_ns = setup.scaling.time_to_ns(st.state.t);
    save_snapshot(cfg, manifest, "final.txt", setup, m, t_ns, meta(&[("trigger", "final".into())]))
}

fn stability(cfg: &RunConfig, manifest: &mut Manifest) -> Result<Outcome> {
    let spec = cfg.problem_spec()?;
    let setup = spec.setup(EquationForm::Ll)?;
    let m0 = stability_initial_state(&setup.grid);
    let st = setup.stepper(spec.stepper, setup.alpha, spec.dt_s, FieldConfig::default(), m0)?;
    let st = drive(cfg, manifest, &setup, st, spec.steps())?;
    finish_run(cfg, manifest, &setup, &st)?;
    Ok(Outcome::Passed)
}

fn std4(cfg: &RunConfig, manifest: &mut Manifest) -> Result<Outcome> {
    let spec = cfg.problem_spec()?;
    let setup = spec.setup(EquationForm::Ll)?;
    let opts = SStateOptions { seed: cfg.seed, stages: cfg.std4.stages, ..Default::default() };
    let (s_state, report) = generate_s_state(&setup, &opts).context("s-state generation")?;
    for r in &report.stages {
        manifest.counters = manifest.counters + r.counters;
    }
    save_snapshot(cfg, manifest, "s_state.txt", &setup, &s_state, 0.0, meta(&[
        ("trigger", "s_state".into()),
        ("seed", cfg.seed.to_string()),
    ]))?;

    let field = cfg.std4.field_case;
    let opts = Std4Options {
        stepper: spec.stepper,
        dt_s: spec.dt_s,
        after_crossing_s: cfg.std4.after_crossing_ns * 1e-9,
        sample_every: cfg.sample_every_steps()?,
        energy: true,
        ..Default::default()
    };
    let r = run_std4(&setup, &s_state, field, &opts)?;
    println!("{}: first <m_x> zero crossing at {:.5} ns", field.name(), r.crossing_ns);
    save_csv(cfg, manifest, "timeseries.csv", &records(&r.series, &setup.scaling))?;
    save_snapshot(cfg, manifest, "crossing.txt", &setup, &r.snapshot, r.snapshot_t_ns, meta(&[
        ("trigger", "mx_zero_crossing".into()),
        ("field_case", field.name().into()),
        ("crossing_ns", format!("{:.16e}", r.crossing_ns)),
    ]))?;
    manifest.counters = manifest.counters + r.counters;
    manifest.results.insert("crossing_ns".into(), r.crossing_ns);
    manifest.results.insert("centre_my".into(), r.signature.centre_my);
    manifest.results.insert("ends_my".into(), r.signature.ends_my);
    manifest.results.insert("max_norm_error".into(), r.max_norm_error);
    Ok(Outcome::Passed)
}

fn std5(cfg: &RunConfig, jobs: usize, manifest: &mut Manifest) -> Result<Outcome> {
    let spec = cfg.problem_spec()?;
    let setup = spec.setup(EquationForm::LlgStt)?;
    let (relaxed, rep) = relaxed_vortex(&setup, cfg.std5.core_radius_nm)?;
    manifest.counters = manifest.counters + rep.counters;
    save_snapshot(cfg, manifest, "relaxed.txt", &setup, &relaxed, 0.0, meta(&[("trigger", "relaxed".into())]))?;

    let drives: Vec<(String, f64, f64)> = match cfg.std5.bj_m_per_s {
        Some(bj) => vec![("custom".into(), bj, cfg.std5.xi.unwrap_or(0.0))],
        None => cfg.std5.cases.iter().map(|&c| (format!("case{c}"), STD5_CASES[c - 1].0, STD5_CASES[c - 1].1)).collect(),
    };
    let opts = Std5Options {
        stepper: spec.stepper,
        dt_s: spec.dt_s,
        duration_s: spec.duration_s,
        sample_every: cfg.sample_every_steps()?,
        energy: true,
    };
    let mut results = Vec::with_capacity(drives.len());
    for chunk in drives.chunks(jobs) {
        let outs: Vec<_> = std::thread::scope(|s| {
            let handles: Vec<_> = chunk
                .iter()
                .map(|(_, bj, xi)| s.spawn(|| run_std5(&setup, &relaxed, *bj, *xi, &opts)))
                .collect();
            handles.into_iter().map(|h| h.join().expect("worker panicked")).collect()
        });
        results.extend(outs);
    }
    let ms = setup.scaling.ms();
    for ((name, bj, xi), out) in drives.iter().zip(results) {
        let out = out.with_context(|| format!("std5 {name} (bJ = {bj} m/s, xi = {xi})"))?;
        let last = out.series.last().expect("non-empty series");
        println!("{name}: <M_x>(end) = {:.4e} A/m, <M_y>(end) = {:.4e} A/m", last.m_avg[0] * ms, last.m_avg[1] * ms);
        save_csv(cfg, manifest, &format!("{name}.csv"), &records(&out.series, &setup.scaling))?;
        let t_ns = setup.scaling.time_to_ns(last.t);
        save_snapshot(cfg, manifest, &format!("{name}_final.txt"), &setup, &out.final_field, t_ns, meta(&[
            ("trigger", "final".into()),
            ("bj_m_per_s", bj.to_string()),
            ("xi", xi.to_string()),
        ]))?;
        manifest.counters = manifest.counters + out.counters;
        manifest.results.insert(format!("{name}_Mx_end_A_per_m"), last.m_avg[0] * ms);
        manifest.results.insert(format!("{name}_My_end_A_per_m"), last.m_avg[1] * ms);
    }
    Ok(Outcome::Passed)
}

fn initial_state(cfg: &RunConfig, setup: &Setup) -> Result<VectorField> {
    Ok(match &cfg.drive.initial {
        InitialState::Uniform { direction } => {
            let n = micromag::grid::norm(*direction);
            VectorField::from_fn(&setup.grid, |_| direction.map(|c| c / n))
        }
        InitialState::Random => random_unit_field(&setup.grid, cfg.seed),
        InitialState::Vortex { core_radius_nm } => vortex_initial_state(setup, *core_radius_nm),
        InitialState::Snapshot { path } => load_snapshot(path, setup)?,
    })
}

fn load_snapshot(path: &Path, setup: &Setup) -> Result<VectorField> {
    let snap = output::read_snapshot(path)?;
    snap.field.check_shape(&setup.grid).with_context(|| format!("start snapshot {}", path.display()))?;
    Ok(snap.field)
}

fn relax_cmd(cfg: &RunConfig, manifest: &mut Manifest) -> Result<Outcome> {
    let spec = cfg.problem_spec()?;
    let setup = spec.setup(EquationForm::Ll)?;
    let m0 = initial_state(cfg, &setup)?;
    let b = cfg.drive.field_mt.map(|c| setup.scaling.field_from_mt(c));
    let defaults = RelaxOptions::default();
    let opts = RelaxOptions {
        stepper: spec.stepper,
        alpha: setup.alpha,
        dt_s: spec.dt_s,
        tol: cfg.drive.tolerance.unwrap_or(defaults.tol),
        max_steps: cfg.drive.max_steps.unwrap_or(defaults.max_steps),
    };
    let (m, rep) = relax(&setup, m0, b, &opts)?;
    println!("relaxation: {} steps, residual {:e}, converged {}", rep.steps, rep.residual, rep.converged);
    manifest.counters = rep.counters;
    manifest.results.insert("steps".into(), rep.steps as f64);
    manifest.results.insert("residual".into(), rep.residual);
    let avg = average_magnetization(&m, &setup.grid);
    for (c, v) in ["mx", "my", "mz"].iter().zip(avg) {
        manifest.results.insert(format!("final_{c}"), v);
    }
    save_snapshot(cfg, manifest, "relaxed.txt", &setup, &m, 0.0, meta(&[
        ("trigger", "relaxed".into()),
        ("converged", rep.converged.to_string()),
    ]))?;
    Ok(Outcome::Passed)
}

fn custom(cfg: &RunConfig, manifest: &mut Manifest) -> Result<Outcome> {
    let spec = cfg.problem_spec()?;
    let form = if cfg.drive.bj_m_per_s.is_some() { EquationForm::LlgStt } else { EquationForm::Ll };
    let setup = spec.setup(form)?;
    let m0 = initial_state(cfg, &setup)?;
    let field = FieldConfig {
        applied: AppliedField::Constant(cfg.drive.field_mt.map(|c| setup.scaling.field_from_mt(c))),
        stt: cfg.drive.bj_m_per_s.map(|bj| SpinTorque { u: setup.scaling.stt_drift(bj), xi: cfg.drive.xi }),
        ..Default::default()
    };
    let st = setup.stepper(spec.stepper, setup.alpha, spec.dt_s, field, m0)?;
    let st = drive(cfg, manifest, &setup, st, spec.steps())?;
    finish_run(cfg, manifest, &setup, &st)?;
    Ok(Outcome::Passed)
}
