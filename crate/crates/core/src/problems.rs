//! Drivers for the damping-stability study and the two standard problems.
//!
//! Every problem uses a characteristic length of 1 nm, so grid coordinates
//! and spacings are in nanometres.

use std::sync::Arc;
use std::time::{Duration, Instant};

use rand::{RngExt, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::demag::DemagKernel;
use crate::error::{Error, Result};
use crate::grid::{average_magnetization, Grid, VectorField};
use crate::physics::{
    nondimensionalize, AppliedField, EquationForm, FieldConfig, LocalField, MaterialConfig, NondimScaling, SpinTorque,
};
use crate::steppers::{run_simulation, Counters, Flow, RunOptions, Sample, Stepper, StepperKind};

pub const NM: f64 = 1e-9;

/// Geometry, mesh, material and time-step of one run, in SI units.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ProblemSpec {
    pub geometry_m: [f64; 3],
    pub cell_m: [f64; 3],
    pub material: MaterialConfig,
    pub dt_s: f64,
    pub duration_s: f64,
    pub stepper: StepperKind,
}

impl ProblemSpec {
    pub fn validate(&self) -> Result<()> {
        self.material.validate()?;
        for a in 0..3 {
            if !(self.cell_m[a] > 0.0 && self.cell_m[a].is_finite()) {
                return Err(Error::InvalidKey {
                    key: "cell_size_nm".into(),
                    message: format!("cell edges must be positive nanometres, got {:?}", self.cell_m.map(|c| c / NM)),
                });
            }
            if !(self.geometry_m[a] > 0.0 && self.geometry_m[a].is_finite()) {
                return Err(Error::InvalidKey {
                    key: "geometry_nm".into(),
                    message: format!("extents must be positive nanometres, got {:?}", self.geometry_m.map(|c| c / NM)),
                });
            }
        }
        if !(self.dt_s > 0.0 && self.dt_s.is_finite()) {
            return Err(Error::InvalidKey { key: "dt_ps".into(), message: "must be positive picoseconds".into() });
        }
        if !(self.duration_s > 0.0 && self.duration_s.is_finite()) {
            return Err(Error::InvalidKey {
                key: "duration_ns".into(),
                message: "must be positive nanoseconds".into(),
            });
        }
        self.counts().map(|_| ())
    }

    /// Cells per axis; the geometry must be a whole number of cells.
    pub fn counts(&self) -> Result<[usize; 3]> {
        let mut out = [0; 3];
        for (a, slot) in out.iter_mut().enumerate() {
            let r = self.geometry_m[a] / self.cell_m[a];
            let n = r.round();
            if n < 1.0 || (r - n).abs() > 1e-9 * r {
                return Err(Error::InvalidKey {
                    key: "cell_size_nm".into(),
                    message: format!(
                        "geometry {} nm is not a whole number of {} nm cells along axis {a}",
                        self.geometry_m[a] / NM,
                        self.cell_m[a] / NM
                    ),
                });
            }
            *slot = n as usize;
        }
        Ok(out)
    }

    pub fn steps(&self) -> usize {
        (self.duration_s / self.dt_s).round().max(1.0) as usize
    }

    /// Grid, scaling and demag kernel. `material.length` is forced to 1 nm.
    pub fn setup(&self, form: EquationForm) -> Result<Setup> {
        self.validate()?;
        let mut mat = self.material;
        mat.length = NM;
        let scaling = nondimensionalize(&mat, form);
        let grid = Grid::new(self.counts()?, self.cell_m.map(|c| c / NM))?;
        let kernel = DemagKernel::build(&grid);
        Ok(Setup { grid, scaling, kernel, alpha: mat.alpha })
    }
}

/// Everything shared between runs on one mesh.
#[derive(Debug, Clone)]
pub struct Setup {
    pub grid: Grid,
    pub scaling: NondimScaling,
    pub kernel: Arc<DemagKernel>,
    pub alpha: f64,
}

impl Setup {
    pub fn stepper(
        &self,
        kind: StepperKind,
        alpha: f64,
        dt_s: f64,
        cfg: FieldConfig,
        m0: VectorField,
    ) -> Result<Stepper> {
        let field = LocalField::new(&self.grid, &self.scaling, cfg, Some(self.kernel.clone()))?;
        let dt = self.scaling.seconds_to_time(dt_s);
        Stepper::new(kind, &self.grid, self.scaling.epsilon, alpha, dt, field, m0, 0.0)
    }

    /// Centre of the sample, in nm.
    pub fn centre(&self) -> [f64; 3] {
        let [nx, ny, nz] = self.grid.counts();
        let [dx, dy, dz] = self.grid.spacings();
        [0.5 * nx as f64 * dx, 0.5 * ny as f64 * dy, 0.5 * nz as f64 * dz]
    }

    pub fn applied_mt(&self, b_mt: f64, dir: [f64; 3]) -> [f64; 3] {
        let n = (dir[0] * dir[0] + dir[1] * dir[1] + dir[2] * dir[2]).sqrt();
        let h = self.scaling.field_from_mt(b_mt);
        dir.map(|d| h * d / n)
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RelaxOptions {
    pub stepper: StepperKind,
    pub alpha: f64,
    pub dt_s: f64,
    /// Stop once `max |Δm| / Δt` (dimensionless) falls below this.
    pub tol: f64,
    pub max_steps: usize,
}

impl Default for RelaxOptions {
    fn default() -> Self {
        RelaxOptions { stepper: StepperKind::Gspm, alpha: 0.5, dt_s: 1e-12, tol: 1e-4, max_steps: 20_000 }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct RelaxReport {
    pub steps: usize,
    pub residual: f64,
    pub converged: bool,
    pub counters: Counters,
}

/// Damped relaxation under a static applied field.
pub fn relax(setup: &Setup, m0: VectorField, applied: [f64; 3], opts: &RelaxOptions) -> Result<(VectorField, RelaxReport)> {
    let cfg = FieldConfig { applied: AppliedField::Constant(applied), ..Default::default() };
    let mut st = setup.stepper(opts.stepper, opts.alpha, opts.dt_s, cfg, m0)?;
    relax_stepper(&mut st, opts.tol, opts.max_steps)
        .map(|rep| (st.state.current.clone(), rep))
}

fn relax_stepper(st: &mut Stepper, tol: f64, max_steps: usize) -> Result<RelaxReport> {
    let mut residual = f64::INFINITY;
    let start = st.state.counters;
    let mut steps = 0;
    while steps < max_steps {
        st.step()?;
        steps += 1;
        residual = st.change_rate().unwrap_or(f64::INFINITY);
        if residual < tol {
            break;
        }
    }
    let c = st.state.counters;
    Ok(RelaxReport {
        steps,
        residual,
        converged: residual < tol,
        counters: Counters {
            helmholtz_solves: c.helmholtz_solves - start.helmholtz_solves,
            strayfield_updates: c.strayfield_updates - start.strayfield_updates,
        },
    })
}

/// Linearly interpolated time of the first sign change of `v`.
pub fn first_zero_crossing(series: &[(f64, f64)]) -> Result<f64> {
    for w in series.windows(2) {
        let ((t0, v0), (t1, v1)) = (w[0], w[1]);
        if v0 == 0.0 {
            return Ok(t0);
        }
        if v0 * v1 < 0.0 || v1 == 0.0 {
            return Ok(t0 + v0 / (v0 - v1) * (t1 - t0));
        }
    }
    Err(Error::NotFound("no sign change in series".into()))
}

// ---------------------------------------------------------------------------
// Standard Problem #4

pub const STD4_GEOMETRY_NM: [f64; 3] = [500.0, 125.0, 3.0];
pub const STD4_COARSE_NM: [f64; 3] = [5.0, 5.0, 3.0];
pub const STD4_FINE_NM: [f64; 3] = [2.5, 2.5, 3.0];
/// Seed of the random start for the s-state.
pub const S_STATE_SEED: u64 = 20_240_404;

pub fn std4_material() -> MaterialConfig {
    MaterialConfig::permalloy(0.02, NM)
}

pub fn std4_spec(cell_nm: [f64; 3], stepper: StepperKind, dt_ps: f64) -> ProblemSpec {
    ProblemSpec {
        geometry_m: STD4_GEOMETRY_NM.map(|v| v * NM),
        cell_m: cell_nm.map(|v| v * NM),
        material: std4_material(),
        dt_s: dt_ps * 1e-12,
        duration_s: 1e-9,
        stepper,
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Std4Field {
    /// 25 mT at 170° from +x.
    #[serde(rename = "25mT_170deg")]
    Field1,
    /// 36 mT at 190° from +x.
    #[serde(rename = "36mT_190deg")]
    Field2,
}

impl Std4Field {
    pub fn magnitude_mt(self) -> f64 {
        match self {
            Std4Field::Field1 => 25.0,
            Std4Field::Field2 => 36.0,
        }
    }

    pub fn angle_deg(self) -> f64 {
        match self {
            Std4Field::Field1 => 170.0,
            Std4Field::Field2 => 190.0,
        }
    }

    pub fn direction(self) -> [f64; 3] {
        let a = self.angle_deg().to_radians();
        [a.cos(), a.sin(), 0.0]
    }

    pub fn name(self) -> &'static str {
        match self {
            Std4Field::Field1 => "25mT_170deg",
            Std4Field::Field2 => "36mT_190deg",
        }
    }
}

impl std::str::FromStr for Std4Field {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        match s {
            "25mT_170deg" => Ok(Std4Field::Field1),
            "36mT_190deg" => Ok(Std4Field::Field2),
            other => Err(Error::InvalidKey {
                key: "field_case".into(),
                message: format!("expected \"25mT_170deg\" or \"36mT_190deg\", got \"{other}\""),
            }),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SStateOptions {
    pub seed: u64,
    pub stages: usize,
    pub start_mt: f64,
    pub relax: RelaxOptions,
    /// Tolerance of the final zero-field relaxation.
    pub final_tol: f64,
}

impl Default for SStateOptions {
    fn default() -> Self {
        SStateOptions {
            seed: S_STATE_SEED,
            stages: 8,
            start_mt: 100.0,
            relax: RelaxOptions::default(),
            final_tol: 1e-7,
        }
    }
}

/// Seeded random unit field.
pub fn random_unit_field(grid: &Grid, seed: u64) -> VectorField {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut m = VectorField::zeros(grid);
    grid.for_each_cell(|i, j, k| {
        let v = loop {
            let v: [f64; 3] = std::array::from_fn(|_| 2.0 * rng.random::<f64>() - 1.0);
            let n2 = v[0] * v[0] + v[1] * v[1] + v[2] * v[2];
            if n2 > 1e-4 && n2 <= 1.0 {
                let n = n2.sqrt();
                break v.map(|c| c / n);
            }
        };
        m.set(grid.idx(i, j, k), v);
    });
    m
}

/// Which of the two low-field states a thin rectangle settled into.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct EndDomains {
    /// Mean `m_y` over the leftmost and rightmost tenth of the sample.
    pub left_my: f64,
    pub right_my: f64,
    pub mean: [f64; 3],
}

impl EndDomains {
    pub fn of(m: &VectorField, grid: &Grid) -> Self {
        let band = (grid.nx / 10).max(1);
        let (mut l, mut r, mut nl, mut nr) = (0.0, 0.0, 0usize, 0usize);
        grid.for_each_cell(|i, j, k| {
            let v = m.get(grid.idx(i, j, k));
            if i <= band {
                l += v[1];
                nl += 1;
            } else if i > grid.nx - band {
                r += v[1];
                nr += 1;
            }
        });
        EndDomains { left_my: l / nl as f64, right_my: r / nr as f64, mean: average_magnetization(m, grid) }
    }

    /// End domains tilted the same way along y, with the body along x.
    pub fn is_s_state(&self) -> bool {
        self.mean[0] > 0.8 && self.left_my * self.right_my > 0.0
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SStateReport {
    pub stages: Vec<RelaxReport>,
    pub ends: EndDomains,
    pub seed: u64,
}

/// Relaxes a seeded random start through a staircase of fields along
/// `[1,1,1]` down to zero.
pub fn generate_s_state(setup: &Setup, opts: &SStateOptions) -> Result<(VectorField, SStateReport)> {
    let mut m = random_unit_field(&setup.grid, opts.seed);
    let cfg = FieldConfig::default();
    let mut st = setup.stepper(opts.relax.stepper, opts.relax.alpha, opts.relax.dt_s, cfg, m.clone())?;
    let mut stages = Vec::with_capacity(opts.stages + 1);
    for s in 0..=opts.stages {
        let b = opts.start_mt * (1.0 - s as f64 / opts.stages as f64);
        st.field_mut().cfg.applied = AppliedField::Constant(setup.applied_mt(b, [1.0, 1.0, 1.0]));
        let tol = if s == opts.stages { opts.final_tol } else { opts.relax.tol };
        stages.push(relax_stepper(&mut st, tol, opts.relax.max_steps)?);
    }
    m.copy_from(&st.state.current);
    let ends = EndDomains::of(&m, &setup.grid);
    let report = SStateReport { stages, ends, seed: opts.seed };
    if !ends.is_s_state() {
        return Err(Error::Diagnostic(format!(
            "relaxation ended in a state without s-state end domains: <m> = {:?}, end m_y = ({:.3}, {:.3})",
            ends.mean, ends.left_my, ends.right_my
        )));
    }
    Ok((m, report))
}

/// Sign pattern of `m_y` in the middle third against the two ends.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct RotationSignature {
    pub centre_my: f64,
    /// Outer tenth at each end, where the end domains sit.
    pub ends_my: f64,
    /// Outer thirds, reported for comparison.
    pub end_thirds_my: f64,
}

impl RotationSignature {
    pub fn of(m: &VectorField, grid: &Grid) -> Self {
        let band = (grid.nx / 10).max(1);
        let mut sums = [0.0; 3];
        let mut counts = [0usize; 3];
        grid.for_each_cell(|i, j, k| {
            let my = m.get(grid.idx(i, j, k))[1];
            let third = 3 * (i - 1) / grid.nx;
            let slot = if third == 1 { 0 } else { 2 };
            sums[slot] += my;
            counts[slot] += 1;
            if i <= band || i > grid.nx - band {
                sums[1] += my;
                counts[1] += 1;
            }
        });
        let mean = |s: usize| sums[s] / counts[s].max(1) as f64;
        RotationSignature { centre_my: mean(0), ends_my: mean(1), end_thirds_my: mean(2) }
    }

    pub fn same_direction(&self) -> bool {
        self.centre_my * self.ends_my > 0.0
    }
}

#[derive(Debug, Clone)]
pub struct Std4Result {
    pub series: Vec<Sample>,
    /// First zero crossing of `<m_x>`, in ns.
    pub crossing_ns: f64,
    /// Field at the step closest to the crossing.
    pub snapshot: VectorField,
    pub snapshot_t_ns: f64,
    pub signature: RotationSignature,
    pub counters: Counters,
    pub max_norm_error: f64,
    pub wall_time: Duration,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Std4Options {
    pub stepper: StepperKind,
    pub dt_s: f64,
    /// Keep integrating this long after the crossing.
    pub after_crossing_s: f64,
    /// Give up if no crossing happens by then.
    pub max_duration_s: f64,
    pub sample_every: usize,
    pub energy: bool,
}

impl Default for Std4Options {
    fn default() -> Self {
        Std4Options {
            stepper: StepperKind::GspmBdf2,
            dt_s: 1e-12,
            after_crossing_s: 1e-9,
            max_duration_s: 3e-9,
            sample_every: 1,
            energy: false,
        }
    }
}

/// Switches `field` on at `t = 0` on top of the s-state.
pub fn run_std4(setup: &Setup, s_state: &VectorField, field: Std4Field, opts: &Std4Options) -> Result<Std4Result> {
    let start = Instant::now();
    let h = setup.applied_mt(field.magnitude_mt(), field.direction());
    let cfg = FieldConfig { applied: AppliedField::Constant(h), ..Default::default() };
    let mut st = setup.stepper(opts.stepper, setup.alpha, opts.dt_s, cfg, s_state.clone())?;
    let sc = setup.scaling;
    let grid = setup.grid;
    let max_steps = (opts.max_duration_s / opts.dt_s).round() as usize;
    let after = (opts.after_crossing_s / opts.dt_s).round() as usize;
    let sample = |st: &mut Stepper, n: usize| -> Result<Sample> {
        Ok(Sample {
            step: n,
            t: st.state.t,
            m_avg: average_magnetization(&st.state.current, &grid),
            energy: if opts.energy { st.energy(&sc)? } else { f64::NAN },
        })
    };

    let mut series = vec![sample(&mut st, 0)?];
    let mut prev = (0.0, series[0].m_avg[0]);
    let mut found: Option<(f64, VectorField, f64)> = None;
    let mut stop_at = max_steps;
    let mut n = 0usize;
    while n < stop_at {
        st.step()?;
        n += 1;
        let mx = average_magnetization(&st.state.current, &grid)[0];
        let t = st.state.t;
        if found.is_none() {
            if let Ok(tc) = first_zero_crossing(&[prev, (t, mx)]) {
                let (field, ts) = if tc - prev.0 < t - tc {
                    (st.state.previous.clone().expect("history after a step"), prev.0)
                } else {
                    (st.state.current.clone(), t)
                };
                found = Some((tc, field, ts));
                stop_at = n + after;
            }
        }
        prev = (t, mx);
        if n.is_multiple_of(opts.sample_every.max(1)) || n == stop_at {
            series.push(sample(&mut st, n)?);
        }
    }
    let Some((tc, snapshot, ts)) = found else {
        return Err(Error::NotFound(format!(
            "<m_x> did not cross zero within {} ns",
            opts.max_duration_s * 1e9
        )));
    };
    let signature = RotationSignature::of(&snapshot, &setup.grid);
    Ok(Std4Result {
        series,
        crossing_ns: sc.time_to_ns(tc),
        snapshot,
        snapshot_t_ns: sc.time_to_ns(ts),
        signature,
        counters: st.state.counters,
        max_norm_error: st.state.max_norm_error,
        wall_time: start.elapsed(),
    })
}

// ---------------------------------------------------------------------------
// Standard Problem #5

pub const STD5_GEOMETRY_NM: [f64; 3] = [100.0, 100.0, 10.0];
pub const STD5_CELL_NM: [f64; 3] = [2.0, 2.0, 2.0];
/// `(bJ [m/s], ξ)` of the four cases and the comparison run.
pub const STD5_CASES: [(f64, f64); 5] = [(72.35, 0.0), (72.17, 0.05), (71.64, 0.1), (57.88, 0.5), (72.45, 0.5)];
pub const VORTEX_CORE_NM: f64 = 10.0;

pub fn std5_material() -> MaterialConfig {
    MaterialConfig::permalloy(0.1, NM)
}

pub fn std5_spec(stepper: StepperKind, dt_ps: f64) -> ProblemSpec {
    ProblemSpec {
        geometry_m: STD5_GEOMETRY_NM.map(|v| v * NM),
        cell_m: STD5_CELL_NM.map(|v| v * NM),
        material: std5_material(),
        dt_s: dt_ps * 1e-12,
        duration_s: 10e-9,
        stepper,
    }
}

/// `m = g / |g|` with `g = (-y, x, R)` about the sample centre (nm).
pub fn vortex_initial_state(setup: &Setup, r_nm: f64) -> VectorField {
    let c = setup.centre();
    VectorField::from_fn(&setup.grid, |p| {
        let (x, y) = (p[0] - c[0], p[1] - c[1]);
        let n = (x * x + y * y + r_nm * r_nm).sqrt();
        [-y / n, x / n, r_nm / n]
    })
}

/// Tolerance used to relax the vortex before a drive is switched on.
pub const VORTEX_RELAX_TOL: f64 = 1e-6;

/// The vortex start relaxed at zero field.
pub fn relaxed_vortex(setup: &Setup, r_nm: f64) -> Result<(VectorField, RelaxReport)> {
    let opts = RelaxOptions { tol: VORTEX_RELAX_TOL, max_steps: 100_000, ..Default::default() };
    let (m, rep) = relax(setup, vortex_initial_state(setup, r_nm), [0.0; 3], &opts)?;
    if !rep.converged {
        return Err(Error::Diagnostic(format!(
            "vortex relaxation stalled after {} steps at max |dm/dt| = {:e}",
            rep.steps, rep.residual
        )));
    }
    Ok((m, rep))
}

/// Mean in-plane circulation `<(r × m)_z>` about the centre; positive is counterclockwise.
pub fn circulation(m: &VectorField, setup: &Setup) -> f64 {
    let c = setup.centre();
    let g = setup.grid;
    let mut acc = Vec::with_capacity(g.n_cells());
    g.for_each_cell(|i, j, k| {
        let p = g.center(i, j, k);
        let (x, y) = (p[0] - c[0], p[1] - c[1]);
        let v = m.get(g.idx(i, j, k));
        let r = (x * x + y * y).sqrt().max(1e-12);
        acc.push((x * v[1] - y * v[0]) / r);
    });
    crate::grid::pairwise_sum(&acc) / g.n_cells() as f64
}

#[derive(Debug, Clone)]
pub struct RunOutput {
    pub series: Vec<Sample>,
    pub final_field: VectorField,
    pub counters: Counters,
    pub max_norm_error: f64,
    pub max_pre_projection_norm: f64,
    pub wall_time: Duration,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Std5Options {
    pub stepper: StepperKind,
    pub dt_s: f64,
    pub duration_s: f64,
    pub sample_every: usize,
    pub energy: bool,
}

impl Default for Std5Options {
    fn default() -> Self {
        Std5Options { stepper: StepperKind::GspmBdf2, dt_s: 1e-12, duration_s: 10e-9, sample_every: 10, energy: false }
    }
}

/// Drives the relaxed vortex with an in-plane current along x.
pub fn run_std5(setup: &Setup, relaxed: &VectorField, bj: f64, xi: f64, opts: &Std5Options) -> Result<RunOutput> {
    let stt = SpinTorque { u: setup.scaling.stt_drift(bj), xi };
    let cfg = FieldConfig { stt: Some(stt), ..Default::default() };
    let st = setup.stepper(opts.stepper, setup.alpha, opts.dt_s, cfg, relaxed.clone())?;
    let steps = (opts.duration_s / opts.dt_s).round().max(1.0) as usize;
    drive(st, &setup.scaling, steps, opts.sample_every, opts.energy)
}

fn drive(mut st: Stepper, scaling: &NondimScaling, steps: usize, every: usize, energy: bool) -> Result<RunOutput> {
    let start = Instant::now();
    let series = run_simulation(
        &mut st,
        scaling,
        RunOptions { steps, sample_every: every, energy },
        |_, _| Flow::Continue,
    )?;
    Ok(RunOutput {
        series,
        final_field: st.state.current.clone(),
        counters: st.state.counters,
        max_norm_error: st.state.max_norm_error,
        max_pre_projection_norm: st.state.max_pre_projection_norm,
        wall_time: start.elapsed(),
    })
}

// ---------------------------------------------------------------------------
// Damping-stability study

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Scale {
    /// 1 μm × 1 μm × 20 nm.
    Full,
    /// 256 nm × 256 nm × 20 nm.
    Desk,
}

impl std::str::FromStr for Scale {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        match s {
            "full" => Ok(Scale::Full),
            "desk" => Ok(Scale::Desk),
            other => Err(Error::InvalidKey {
                key: "scale".into(),
                message: format!("expected full or desk, got `{other}`"),
            }),
        }
    }
}

pub const STABILITY_CELL_NM: f64 = 4.0;
pub const STABILITY_ALPHA: f64 = 0.01;

pub fn stability_spec(scale: Scale, stepper: StepperKind, dt_ps: f64) -> ProblemSpec {
    let side = match scale {
        Scale::Full => 1000.0,
        Scale::Desk => 256.0,
    };
    ProblemSpec {
        geometry_m: [side * NM, side * NM, 20.0 * NM],
        cell_m: [STABILITY_CELL_NM * NM; 3],
        material: MaterialConfig::permalloy(STABILITY_ALPHA, NM),
        dt_s: dt_ps * 1e-12,
        duration_s: 1.6e-9,
        stepper,
    }
}

/// Uniform in-plane start along the square's diagonal.
pub fn stability_initial_state(grid: &Grid) -> VectorField {
    let s = std::f64::consts::FRAC_1_SQRT_2;
    VectorField::uniform(grid, [s, s, 0.0])
}

#[derive(Debug, Clone)]
pub struct StabilityResult {
    pub output: RunOutput,
    pub m_avg: [f64; 3],
    /// In-plane angle to +x (radians) on the middle z layer, i-fastest.
    pub angles: Vec<f64>,
}

/// Angle of in-plane `m` to the x axis on the middle z layer.
pub fn in_plane_angles(m: &VectorField, grid: &Grid) -> Vec<f64> {
    let k = grid.nz.div_ceil(2);
    let mut out = Vec::with_capacity(grid.nx * grid.ny);
    for j in 1..=grid.ny {
        for i in 1..=grid.nx {
            let v = m.get(grid.idx(i, j, k));
            out.push(v[1].atan2(v[0]));
        }
    }
    out
}

pub fn run_stability_study(spec: &ProblemSpec, sample_every: usize) -> Result<StabilityResult> {
    let setup = spec.setup(EquationForm::Ll)?;
    run_stability_with(&setup, spec, sample_every)
}

pub fn run_stability_with(setup: &Setup, spec: &ProblemSpec, sample_every: usize) -> Result<StabilityResult> {
    let m0 = stability_initial_state(&setup.grid);
    let st = setup.stepper(spec.stepper, setup.alpha, spec.dt_s, FieldConfig::default(), m0)?;
    let output = drive(st, &setup.scaling, spec.steps(), sample_every, false)?;
    let m_avg = average_magnetization(&output.final_field, &setup.grid);
    let angles = in_plane_angles(&output.final_field, &setup.grid);
    Ok(StabilityResult { output, m_avg, angles })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn zero_crossing_examples() {
        assert_eq!(first_zero_crossing(&[(0.0, 1.0), (1.0, -1.0)]).unwrap(), 0.5);
        assert!(matches!(first_zero_crossing(&[(0.0, 1.0), (1.0, 0.5), (2.0, 0.1)]), Err(Error::NotFound(_))));
        let t = first_zero_crossing(&[(0.0, 0.2), (1.0, 0.1), (2.0, -0.3)]).unwrap();
        assert!((t - 1.25).abs() < 1e-15);
    }

    #[test]
    fn std4_field_conversion() {
        let s = std4_spec(STD4_COARSE_NM, StepperKind::GspmBdf2, 1.0).setup(EquationForm::Ll).unwrap();
        let h = s.applied_mt(25.0, Std4Field::Field1.direction());
        let mag = 0.025 / (4.0e-7 * std::f64::consts::PI) / 8.0e5;
        let a = 170f64.to_radians();
        assert!((h[0] - mag * a.cos()).abs() < 1e-15 && (h[1] - mag * a.sin()).abs() < 1e-15);
        assert_eq!(s.grid.counts(), [100, 25, 1]);
    }

    #[test]
    fn indivisible_geometry_is_rejected() {
        let mut spec = stability_spec(Scale::Desk, StepperKind::Gspm, 1.0);
        spec.geometry_m[0] = 250.0 * NM;
        let err = spec.validate().unwrap_err();
        assert!(err.is_config() && err.to_string().contains("cell_size_nm"), "{err}");
        spec.geometry_m[0] = 256.0 * NM;
        spec.cell_m[1] = -4.0 * NM;
        assert!(spec.validate().unwrap_err().to_string().contains("cell_size_nm"));
    }

    #[test]
    fn vortex_initial_examples() {
        let s = std5_spec(StepperKind::GspmBdf2, 1.0).setup(EquationForm::LlgStt).unwrap();
        let c = s.centre();
        assert_eq!(c, [50.0, 50.0, 5.0]);
        let m = vortex_initial_state(&s, 10.0);
        // cell (26, 26) has centre (51, 51): g = (-1, 1, 10)
        let v = m.get(s.grid.idx(26, 26, 1));
        let n = (102f64).sqrt();
        assert!((v[0] + 1.0 / n).abs() < 1e-15 && (v[2] - 10.0 / n).abs() < 1e-15);
        assert!(circulation(&m, &s) > 0.0);
    }
}
