//! Gauss-Seidel projection time steppers.
//!
//! Every step performs five constant-coefficient solves with
//! `ℒ = (I - ε Δt Δ_h)^{-1}` and then projects onto the unit sphere.
//! GSPM re-evaluates the local field (including the stray field) three
//! times per step; the single-update variant and GSPM-BDF2 evaluate it
//! once. The Gauss-Seidel row order is significant and is kept exactly.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::grid::{apply_neumann_ghosts, average_magnetization, norm, Grid, VectorField};
use crate::linsolve::HelmholtzSolver;
use crate::physics::{energy_with_field, LocalField, NondimScaling};

/// Cells with `|m*|` below this are a numerical breakdown.
pub const BREAKDOWN_NORM: f64 = 1e-14;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum StepperKind {
    Gspm,
    /// GSPM with `f(m^n)` reused for every row.
    #[serde(rename = "gspm1f")]
    GspmSingleUpdate,
    GspmBdf2,
}

impl StepperKind {
    pub fn name(self) -> &'static str {
        match self {
            StepperKind::Gspm => "gspm",
            StepperKind::GspmSingleUpdate => "gspm1f",
            StepperKind::GspmBdf2 => "gspm-bdf2",
        }
    }

    /// Solves and stray-field updates for one step.
    pub fn cost(self) -> Counters {
        match self {
            StepperKind::Gspm => Counters { helmholtz_solves: 5, strayfield_updates: 3 },
            StepperKind::GspmSingleUpdate | StepperKind::GspmBdf2 => {
                Counters { helmholtz_solves: 5, strayfield_updates: 1 }
            }
        }
    }
}

impl std::str::FromStr for StepperKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "gspm" => Ok(StepperKind::Gspm),
            "gspm1f" => Ok(StepperKind::GspmSingleUpdate),
            "gspm-bdf2" => Ok(StepperKind::GspmBdf2),
            other => Err(Error::InvalidKey {
                key: "stepper".into(),
                message: format!("expected one of gspm, gspm1f, gspm-bdf2, got `{other}`"),
            }),
        }
    }
}

impl std::fmt::Display for StepperKind {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(self.name())
    }
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct Counters {
    pub helmholtz_solves: u64,
    pub strayfield_updates: u64,
}

impl std::ops::Add for Counters {
    type Output = Counters;
    fn add(self, o: Counters) -> Counters {
        Counters {
            helmholtz_solves: self.helmholtz_solves + o.helmholtz_solves,
            strayfield_updates: self.strayfield_updates + o.strayfield_updates,
        }
    }
}

impl std::ops::Mul<u64> for Counters {
    type Output = Counters;
    fn mul(self, n: u64) -> Counters {
        Counters {
            helmholtz_solves: self.helmholtz_solves * n,
            strayfield_updates: self.strayfield_updates * n,
        }
    }
}

/// Normalises every interior cell; fails on a collapsed cell.
pub fn project_unit_sphere(field: &mut VectorField, grid: &Grid) -> Result<()> {
    let g = *grid;
    let mut failure = None;
    g.for_each_cell(|i, j, k| {
        if failure.is_some() {
            return;
        }
        let id = g.idx(i, j, k);
        let v = field.get(id);
        let n = norm(v);
        if n < BREAKDOWN_NORM || !n.is_finite() {
            failure = Some(Error::Breakdown { cell: [i, j, k], norm: n });
            return;
        }
        field.set(id, [v[0] / n, v[1] / n, v[2] / n]);
    });
    match failure {
        Some(e) => Err(e),
        None => Ok(()),
    }
}

/// Magnetization history and bookkeeping.
#[derive(Debug, Clone)]
pub struct StepperState {
    /// Newest level, `m^{n+1}`.
    pub current: VectorField,
    /// Previous level `m^n`; `None` until one step has been taken.
    pub previous: Option<VectorField>,
    /// Dimensionless time of `current`.
    pub t: f64,
    pub steps: usize,
    pub counters: Counters,
    /// Counters of the most recent step.
    pub last_step: Counters,
    /// Largest `||m| - 1|` seen after any completed step.
    pub max_norm_error: f64,
    /// Largest `|m*|` seen before projection.
    pub max_pre_projection_norm: f64,
}

impl StepperState {
    pub fn new(initial: VectorField, t: f64) -> Self {
        StepperState {
            current: initial,
            previous: None,
            t,
            steps: 0,
            counters: Counters::default(),
            last_step: Counters::default(),
            max_norm_error: 0.0,
            max_pre_projection_norm: 0.0,
        }
    }
}

struct Scratch {
    f: VectorField,
    g: VectorField,
    gstar: VectorField,
    mstar: VectorField,
    tilde: VectorField,
    tstar: VectorField,
    forcing: VectorField,
    rhs: Vec<f64>,
}

/// A time stepper bound to one grid, one local-field model and one `Δt`.
pub struct Stepper {
    kind: StepperKind,
    grid: Grid,
    alpha: f64,
    dt: f64,
    solver: HelmholtzSolver,
    field: LocalField,
    pub state: StepperState,
    scratch: Scratch,
}

impl std::fmt::Debug for Stepper {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("Stepper")
            .field("kind", &self.kind)
            .field("grid", &self.grid)
            .field("alpha", &self.alpha)
            .field("dt", &self.dt)
            .field("t", &self.state.t)
            .finish_non_exhaustive()
    }
}

impl Stepper {
    /// `epsilon` is the dimensionless exchange coefficient; `dt` is dimensionless.
    #[allow(clippy::too_many_arguments)]
    pub fn new(
        kind: StepperKind,
        grid: &Grid,
        epsilon: f64,
        alpha: f64,
        dt: f64,
        field: LocalField,
        mut initial: VectorField,
        t0: f64,
    ) -> Result<Self> {
        if !(dt >= 0.0 && dt.is_finite()) {
            return Err(Error::InvalidKey {
                key: "dt".into(),
                message: format!("must be non-negative, got {dt}"),
            });
        }
        initial.check_shape(grid)?;
        if field.grid() != grid {
            return Err(Error::ShapeMismatch {
                expected: grid.counts(),
                found: field.grid().counts(),
            });
        }
        apply_neumann_ghosts(&mut initial, grid);
        let z = || VectorField::zeros(grid);
        Ok(Stepper {
            kind,
            grid: *grid,
            alpha,
            dt,
            solver: HelmholtzSolver::new(grid, epsilon * dt)?,
            field,
            state: StepperState::new(initial, t0),
            scratch: Scratch {
                f: z(),
                g: z(),
                gstar: z(),
                mstar: z(),
                tilde: z(),
                tstar: z(),
                forcing: z(),
                rhs: vec![0.0; grid.storage_len()],
            },
        })
    }

    pub fn kind(&self) -> StepperKind {
        self.kind
    }

    pub fn grid(&self) -> &Grid {
        &self.grid
    }

    pub fn dt(&self) -> f64 {
        self.dt
    }

    pub fn alpha(&self) -> f64 {
        self.alpha
    }

    pub fn field(&self) -> &LocalField {
        &self.field
    }

    pub fn field_mut(&mut self) -> &mut LocalField {
        &mut self.field
    }

    pub fn set_alpha(&mut self, alpha: f64) {
        self.alpha = alpha;
    }

    pub fn magnetization(&self) -> &VectorField {
        &self.state.current
    }

    /// Replaces the state with `m` at time `t`, dropping BDF2 history.
    pub fn reset(&mut self, mut m: VectorField, t: f64) {
        apply_neumann_ghosts(&mut m, &self.grid);
        let counters = self.state.counters;
        let (err, pre) = (self.state.max_norm_error, self.state.max_pre_projection_norm);
        self.state = StepperState::new(m, t);
        self.state.counters = counters;
        self.state.max_norm_error = err;
        self.state.max_pre_projection_norm = pre;
    }

    /// Advances one step with the configured scheme. The first GSPM-BDF2
    /// step bootstraps `m^1` with GSPM.
    pub fn step(&mut self) -> Result<()> {
        let step = self.state.steps;
        let r = match self.kind {
            StepperKind::Gspm => self.step_gspm(),
            StepperKind::GspmSingleUpdate => self.step_gspm_single_update(),
            StepperKind::GspmBdf2 => {
                if self.state.previous.is_none() {
                    self.bootstrap_bdf2()
                } else {
                    self.step_gspm_bdf2()
                }
            }
        };
        r.map_err(|e| e.at_step(step))
    }

    pub fn step_gspm(&mut self) -> Result<()> {
        self.gauss_seidel_step(true)
    }

    pub fn step_gspm_single_update(&mut self) -> Result<()> {
        self.gauss_seidel_step(false)
    }

    /// Produces `m^1` from `m^0` with one GSPM step so that BDF2 has history.
    pub fn bootstrap_bdf2(&mut self) -> Result<()> {
        self.step_gspm()
    }

    /// `g_c = ℒ(src_c + Δt f_c)` into component `dst_c` of `dst`.
    fn solve_into(&mut self, src: Source, c: usize, dst: Dest) {
        let dt = self.dt;
        let s = &mut self.scratch;
        let m = match src {
            Source::Current => &self.state.current,
            Source::Mstar => &s.mstar,
            Source::Tilde => &s.tilde,
        };
        let a = m.comp(c);
        let f = s.f.comp(c);
        let g = &self.grid;
        for kk in 1..=g.nz {
            for jj in 1..=g.ny {
                let row = g.idx(1, jj, kk);
                for id in row..row + g.nx {
                    s.rhs[id] = a[id] + dt * f[id];
                }
            }
        }
        let out = match dst {
            Dest::G => s.g.comp_mut(c),
            Dest::Gstar => s.gstar.comp_mut(c),
        };
        self.solver.solve_component(&s.rhs, out);
        self.state.last_step.helmholtz_solves += 1;
    }

    fn evaluate_field(&mut self, src: Source, t: f64) -> Result<()> {
        let s = &mut self.scratch;
        let m = match src {
            Source::Current => &mut self.state.current,
            Source::Mstar => &mut s.mstar,
            Source::Tilde => &mut s.tilde,
        };
        apply_neumann_ghosts(m, &self.grid);
        self.field.evaluate(m, t, &mut s.f)?;
        self.state.last_step.strayfield_updates += 1;
        Ok(())
    }

    fn gauss_seidel_step(&mut self, refresh: bool) -> Result<()> {
        self.state.last_step = Counters::default();
        let (alpha, dt) = (self.alpha, self.dt);
        let t = self.state.t;
        let g = self.grid;

        self.evaluate_field(Source::Current, t)?;
        for c in 0..3 {
            self.solve_into(Source::Current, c, Dest::G);
        }
        // Manufactured forcing is sampled where f is: at t_n here, t_{n+2} in BDF2.
        let forced = self.field.forcing_into(t, &mut self.scratch.forcing);
        let fdt = if forced { dt } else { 0.0 };

        // Row 1 on every cell; m* starts as a copy of m^n.
        self.scratch.mstar.copy_from(&self.state.current);
        {
            let m = &self.state.current;
            let s = &mut self.scratch;
            g.for_each_cell(|i, j, k| {
                let id = g.idx(i, j, k);
                let [m1, m2, m3] = m.get(id);
                let [g1, g2, g3] = s.g.get(id);
                let dot = m1 * g1 + m2 * g2 + m3 * g3;
                let v = m1 - (m2 * g3 - m3 * g2) - alpha * dot * m1 + alpha * g1
                    + fdt * s.forcing.comp(0)[id];
                s.mstar.comp_mut(0)[id] = v;
            });
        }

        if refresh {
            self.evaluate_field(Source::Mstar, t)?;
        }
        self.solve_into(Source::Mstar, 0, Dest::Gstar);
        {
            let m = &self.state.current;
            let s = &mut self.scratch;
            g.for_each_cell(|i, j, k| {
                let id = g.idx(i, j, k);
                let [_, m2, m3] = m.get(id);
                let [_, g2, g3] = s.g.get(id);
                let m1s = s.mstar.comp(0)[id];
                let g1s = s.gstar.comp(0)[id];
                let dot = m1s * g1s + m2 * g2 + m3 * g3;
                let v = m2 - (m3 * g1s - m1s * g3) - alpha * dot * m2 + alpha * g2
                    + fdt * s.forcing.comp(1)[id];
                s.mstar.comp_mut(1)[id] = v;
            });
        }

        if refresh {
            self.evaluate_field(Source::Mstar, t)?;
        }
        self.solve_into(Source::Mstar, 1, Dest::Gstar);
        {
            let m = &self.state.current;
            let s = &mut self.scratch;
            g.for_each_cell(|i, j, k| {
                let id = g.idx(i, j, k);
                let m3 = m.comp(2)[id];
                let g3 = s.g.comp(2)[id];
                let m1s = s.mstar.comp(0)[id];
                let m2s = s.mstar.comp(1)[id];
                let g1s = s.gstar.comp(0)[id];
                let g2s = s.gstar.comp(1)[id];
                let dot = m1s * g1s + m2s * g2s + m3 * g3;
                let v = m3 - (m1s * g2s - m2s * g1s) - alpha * dot * m3 + alpha * g3
                    + fdt * s.forcing.comp(2)[id];
                s.mstar.comp_mut(2)[id] = v;
            });
        }

        self.finish_step()
    }

    pub fn step_gspm_bdf2(&mut self) -> Result<()> {
        let Some(prev) = self.state.previous.as_ref() else {
            return Err(Error::MissingHistory);
        };
        self.state.last_step = Counters::default();
        let (alpha, dt) = (self.alpha, self.dt);
        let g = self.grid;
        let t_new = self.state.t + dt;

        // m̃ = 2 m^{n+1} - m^n
        {
            let cur = &self.state.current;
            let s = &mut self.scratch;
            for c in 0..3 {
                let (a, b) = (cur.comp(c), prev.comp(c));
                for (t, (x, y)) in s.tilde.comp_mut(c).iter_mut().zip(a.iter().zip(b)) {
                    *t = 2.0 * x - y;
                }
            }
        }
        self.evaluate_field(Source::Tilde, t_new)?;
        for c in 0..3 {
            self.solve_into(Source::Tilde, c, Dest::G);
        }
        let forced = self.field.forcing_into(t_new, &mut self.scratch.forcing);
        let fdt = if forced { dt } else { 0.0 };
        const TWO_THIRDS: f64 = 2.0 / 3.0;

        // m̃*_c = 2 m*_c - m^{n+1}_c feeds the next row's solve.
        {
            let cur = &self.state.current;
            let prev = self.state.previous.as_ref().unwrap();
            let s = &mut self.scratch;
            g.for_each_cell(|i, j, k| {
                let id = g.idx(i, j, k);
                let [t1, t2, t3] = s.tilde.get(id);
                let [g1, g2, g3] = s.g.get(id);
                let dot = t1 * g1 + t2 * g2 + t3 * g3;
                let m1s = TWO_THIRDS
                    * (2.0 * cur.comp(0)[id] - 0.5 * prev.comp(0)[id] - (t2 * g3 - t3 * g2)
                        - alpha * dot * t1
                        + alpha * g1
                        + fdt * s.forcing.comp(0)[id]);
                s.mstar.comp_mut(0)[id] = m1s;
                s.tstar.comp_mut(0)[id] = 2.0 * m1s - cur.comp(0)[id];
            });
        }
        self.solve_tilde_star(0);

        {
            let cur = &self.state.current;
            let prev = self.state.previous.as_ref().unwrap();
            let s = &mut self.scratch;
            g.for_each_cell(|i, j, k| {
                let id = g.idx(i, j, k);
                let [_, t2, t3] = s.tilde.get(id);
                let [_, g2, g3] = s.g.get(id);
                let ts1 = s.tstar.comp(0)[id];
                let gs1 = s.gstar.comp(0)[id];
                let dot = ts1 * gs1 + t2 * g2 + t3 * g3;
                let m2s = TWO_THIRDS
                    * (2.0 * cur.comp(1)[id] - 0.5 * prev.comp(1)[id] - (t3 * gs1 - ts1 * g3)
                        - alpha * dot * t2
                        + alpha * g2
                        + fdt * s.forcing.comp(1)[id]);
                s.mstar.comp_mut(1)[id] = m2s;
                s.tstar.comp_mut(1)[id] = 2.0 * m2s - cur.comp(1)[id];
            });
        }
        self.solve_tilde_star(1);

        {
            let cur = &self.state.current;
            let prev = self.state.previous.as_ref().unwrap();
            let s = &mut self.scratch;
            g.for_each_cell(|i, j, k| {
                let id = g.idx(i, j, k);
                let t3 = s.tilde.comp(2)[id];
                let g3 = s.g.comp(2)[id];
                let ts1 = s.tstar.comp(0)[id];
                let ts2 = s.tstar.comp(1)[id];
                let gs1 = s.gstar.comp(0)[id];
                let gs2 = s.gstar.comp(1)[id];
                let dot = ts1 * gs1 + ts2 * gs2 + t3 * g3;
                let m3s = TWO_THIRDS
                    * (2.0 * cur.comp(2)[id] - 0.5 * prev.comp(2)[id] - (ts1 * gs2 - ts2 * gs1)
                        - alpha * dot * t3
                        + alpha * g3
                        + fdt * s.forcing.comp(2)[id]);
                s.mstar.comp_mut(2)[id] = m3s;
            });
        }

        self.finish_step()
    }

    /// `g*_c = ℒ(m̃*_c + Δt f_c(m̃^{n+2}))`.
    fn solve_tilde_star(&mut self, c: usize) {
        let dt = self.dt;
        let g = self.grid;
        let s = &mut self.scratch;
        let a = s.tstar.comp(c);
        let f = s.f.comp(c);
        for kk in 1..=g.nz {
            for jj in 1..=g.ny {
                let row = g.idx(1, jj, kk);
                for id in row..row + g.nx {
                    s.rhs[id] = a[id] + dt * f[id];
                }
            }
        }
        self.solver.solve_component(&s.rhs, s.gstar.comp_mut(c));
        self.state.last_step.helmholtz_solves += 1;
    }

    /// Projects `m*`, refreshes ghosts and shifts the history.
    fn finish_step(&mut self) -> Result<()> {
        let g = self.grid;
        let pre = self.scratch.mstar.max_norm(&g);
        self.state.max_pre_projection_norm = self.state.max_pre_projection_norm.max(pre);
        project_unit_sphere(&mut self.scratch.mstar, &g)?;
        apply_neumann_ghosts(&mut self.scratch.mstar, &g);
        let err = self.scratch.mstar.max_unit_deviation(&g);
        let st = &mut self.state;
        st.max_norm_error = st.max_norm_error.max(err);

        // previous <- current <- m*, recycling the old previous buffer as m*.
        let recycled = st.previous.take().unwrap_or_else(|| VectorField::zeros(&g));
        let new = std::mem::replace(&mut self.scratch.mstar, recycled);
        let old = std::mem::replace(&mut st.current, new);
        st.previous = Some(old);
        st.t += self.dt;
        st.steps += 1;
        st.counters = st.counters + st.last_step;
        Ok(())
    }

    /// `max |m^{n+1} - m^n| / Δt` over cells, once a step has been taken.
    pub fn change_rate(&self) -> Option<f64> {
        let prev = self.state.previous.as_ref()?;
        if self.dt == 0.0 {
            return Some(0.0);
        }
        Some(self.state.current.max_distance(prev, &self.grid) / self.dt)
    }

    /// Energy of the current state (one extra, uncounted stray-field evaluation).
    pub fn energy(&mut self, scaling: &NondimScaling) -> Result<f64> {
        let t = self.state.t;
        let h_e = self.field.cfg.applied.at(t);
        let g = self.grid;
        let h_s = if self.field.kernel().is_some() {
            Some(self.field.update_stray_field(&self.state.current)?.clone())
        } else {
            None
        };
        Ok(energy_with_field(&self.state.current, scaling, h_e, h_s.as_ref(), &g))
    }
}

#[derive(Clone, Copy)]
enum Source {
    Current,
    Mstar,
    Tilde,
}

#[derive(Clone, Copy)]
enum Dest {
    G,
    Gstar,
}

/// One recorded sample of a run.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Sample {
    pub step: usize,
    /// Dimensionless time.
    pub t: f64,
    pub m_avg: [f64; 3],
    pub energy: f64,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RunOptions {
    pub steps: usize,
    /// Record a sample every this many steps (and at step 0 and the end).
    pub sample_every: usize,
    /// Compute the energy at each sample (costs one stray-field evaluation).
    pub energy: bool,
}

/// What a sample callback wants the loop to do next.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Flow {
    Continue,
    Stop,
}

/// Fixed-`Δt` loop. The callback sees every sample together with the field.
pub fn run_simulation(
    stepper: &mut Stepper,
    scaling: &NondimScaling,
    opts: RunOptions,
    mut on_sample: impl FnMut(&Sample, &VectorField) -> Flow,
) -> Result<Vec<Sample>> {
    if opts.steps == 0 {
        return Err(Error::Config("run duration must be at least one step".into()));
    }
    let every = opts.sample_every.max(1);
    let mut series = Vec::with_capacity(opts.steps / every + 2);
    let record = |st: &mut Stepper, n: usize| -> Result<Sample> {
        let energy = if opts.energy { st.energy(scaling)? } else { f64::NAN };
        Ok(Sample {
            step: n,
            t: st.state.t,
            m_avg: average_magnetization(&st.state.current, &st.grid),
            energy,
        })
    };
    let s = record(stepper, 0)?;
    series.push(s);
    if on_sample(&s, &stepper.state.current) == Flow::Stop {
        return Ok(series);
    }
    for n in 1..=opts.steps {
        stepper.step()?;
        if n % every == 0 || n == opts.steps {
            let s = record(stepper, n)?;
            series.push(s);
            if on_sample(&s, &stepper.state.current) == Flow::Stop {
                break;
            }
        }
    }
    Ok(series)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::physics::{nondimensionalize, AppliedField, EquationForm, FieldConfig, MaterialConfig};

    fn single_cell(kind: StepperKind, m0: [f64; 3], h: [f64; 3], alpha: f64, dt: f64) -> Stepper {
        let g = Grid::new([1, 1, 1], [1.0; 3]).unwrap();
        let s = nondimensionalize(&MaterialConfig::permalloy(alpha, 1.0), EquationForm::Ll);
        let cfg = FieldConfig {
            applied: AppliedField::Constant(h),
            demag: false,
            ..Default::default()
        };
        let field = LocalField::new(&g, &s, cfg, None).unwrap();
        Stepper::new(kind, &g, 0.0, alpha, dt, field, VectorField::uniform(&g, m0), 0.0).unwrap()
    }

    #[test]
    fn projection_examples() {
        let g = Grid::new([3, 1, 1], [1.0; 3]).unwrap();
        let mut f = VectorField::zeros(&g);
        f.set(g.idx(1, 1, 1), [0.0, 0.0, 2.0]);
        f.set(g.idx(2, 1, 1), [3.0, 4.0, 0.0]);
        f.set(g.idx(3, 1, 1), [1.0, 0.0, 0.0]);
        project_unit_sphere(&mut f, &g).unwrap();
        assert_eq!(f.get(g.idx(1, 1, 1)), [0.0, 0.0, 1.0]);
        assert_eq!(f.get(g.idx(2, 1, 1)), [0.6, 0.8, 0.0]);

        f.set(g.idx(2, 1, 1), [1e-20, 0.0, 0.0]);
        match project_unit_sphere(&mut f, &g) {
            Err(Error::Breakdown { cell, .. }) => assert_eq!(cell, [2, 1, 1]),
            other => panic!("expected breakdown, got {other:?}"),
        }
    }

    #[test]
    fn zero_field_is_fixed_point_for_every_scheme() {
        for kind in [StepperKind::Gspm, StepperKind::GspmSingleUpdate, StepperKind::GspmBdf2] {
            let mut st = single_cell(kind, [0.6, 0.0, 0.8], [0.0; 3], 0.3, 0.1);
            for _ in 0..5 {
                st.step().unwrap();
            }
            let m = st.magnetization().get(st.grid().idx(1, 1, 1));
            assert!((m[0] - 0.6).abs() < 1e-15 && (m[2] - 0.8).abs() < 1e-15, "{kind}: {m:?}");
        }
    }

    #[test]
    fn aligned_state_is_fixed_point() {
        for kind in [StepperKind::Gspm, StepperKind::GspmSingleUpdate, StepperKind::GspmBdf2] {
            let mut st = single_cell(kind, [0.0, 0.0, 1.0], [0.0, 0.0, 1.0], 0.1, 0.7);
            for _ in 0..4 {
                st.step().unwrap();
            }
            assert_eq!(st.magnetization().get(st.grid().idx(1, 1, 1)), [0.0, 0.0, 1.0]);
        }
    }

    #[test]
    fn counters_follow_cost_table() {
        for kind in [StepperKind::Gspm, StepperKind::GspmSingleUpdate, StepperKind::GspmBdf2] {
            let mut st = single_cell(kind, [1.0, 0.0, 0.0], [0.0, 0.0, 1.0], 0.1, 0.01);
            for n in 0..4 {
                st.step().unwrap();
                let want = if kind == StepperKind::GspmBdf2 && n == 0 {
                    StepperKind::Gspm.cost()
                } else {
                    kind.cost()
                };
                assert_eq!(st.state.last_step, want, "{kind} step {n}");
            }
        }
    }

    #[test]
    fn bdf2_without_history_is_an_error() {
        let mut st = single_cell(StepperKind::GspmBdf2, [1.0, 0.0, 0.0], [0.0; 3], 0.1, 0.01);
        assert!(matches!(st.step_gspm_bdf2(), Err(Error::MissingHistory)));
    }

    #[test]
    fn zero_dt_bootstrap_keeps_state() {
        let mut st = single_cell(StepperKind::GspmBdf2, [0.6, 0.8, 0.0], [0.0, 0.0, 1.0], 0.1, 0.0);
        st.bootstrap_bdf2().unwrap();
        let m = st.magnetization().get(st.grid().idx(1, 1, 1));
        assert!((m[0] - 0.6).abs() < 1e-15 && (m[1] - 0.8).abs() < 1e-15 && m[2] == 0.0);
    }

    /// Scalar re-statement of one GSPM step for a single cell with `ℒ = I`
    /// and a constant field `h`.
    fn oracle_gspm(m: [f64; 3], h: [f64; 3], a: f64, dt: f64) -> [f64; 3] {
        let g = [m[0] + dt * h[0], m[1] + dt * h[1], m[2] + dt * h[2]];
        let d0 = m[0] * g[0] + m[1] * g[1] + m[2] * g[2];
        let x = m[0] - (m[1] * g[2] - m[2] * g[1]) - a * d0 * m[0] + a * g[0];
        let gx = x + dt * h[0];
        let d1 = x * gx + m[1] * g[1] + m[2] * g[2];
        let y = m[1] - (m[2] * gx - x * g[2]) - a * d1 * m[1] + a * g[1];
        let gy = y + dt * h[1];
        let d2 = x * gx + y * gy + m[2] * g[2];
        let z = m[2] - (x * gy - y * gx) - a * d2 * m[2] + a * g[2];
        let n = (x * x + y * y + z * z).sqrt();
        [x / n, y / n, z / n]
    }

    fn oracle_bdf2(m1: [f64; 3], m0: [f64; 3], h: [f64; 3], a: f64, dt: f64) -> [f64; 3] {
        let t: [f64; 3] = std::array::from_fn(|c| 2.0 * m1[c] - m0[c]);
        let g: [f64; 3] = std::array::from_fn(|c| t[c] + dt * h[c]);
        let d0 = t[0] * g[0] + t[1] * g[1] + t[2] * g[2];
        let x = 2.0 / 3.0
            * (2.0 * m1[0] - 0.5 * m0[0] - (t[1] * g[2] - t[2] * g[1]) - a * d0 * t[0] + a * g[0]);
        let tx = 2.0 * x - m1[0];
        let gx = tx + dt * h[0];
        let d1 = tx * gx + t[1] * g[1] + t[2] * g[2];
        let y = 2.0 / 3.0
            * (2.0 * m1[1] - 0.5 * m0[1] - (t[2] * gx - tx * g[2]) - a * d1 * t[1] + a * g[1]);
        let ty = 2.0 * y - m1[1];
        let gy = ty + dt * h[1];
        let d2 = tx * gx + ty * gy + t[2] * g[2];
        let z = 2.0 / 3.0
            * (2.0 * m1[2] - 0.5 * m0[2] - (tx * gy - ty * gx) - a * d2 * t[2] + a * g[2]);
        let n = (x * x + y * y + z * z).sqrt();
        [x / n, y / n, z / n]
    }

    fn close(a: [f64; 3], b: [f64; 3]) -> bool {
        (0..3).all(|c| (a[c] - b[c]).abs() < 1e-14)
    }

    #[test]
    fn single_cell_matches_scalar_oracle() {
        let m0 = [0.48, -0.6, 0.64];
        let h = [0.3, 0.2, -1.1];
        let (a, dt) = (0.25, 0.05);

        let mut gs = single_cell(StepperKind::Gspm, m0, h, a, dt);
        let mut bd = single_cell(StepperKind::GspmBdf2, m0, h, a, dt);
        let mut want_gs = m0;
        let (mut prev, mut cur) = (m0, oracle_gspm(m0, h, a, dt));
        bd.step().unwrap();
        for n in 0..20 {
            gs.step().unwrap();
            want_gs = oracle_gspm(want_gs, h, a, dt);
            assert!(close(gs.magnetization().get(gs.grid().idx(1, 1, 1)), want_gs), "gspm step {n}");

            bd.step().unwrap();
            let next = oracle_bdf2(cur, prev, h, a, dt);
            (prev, cur) = (cur, next);
            assert!(close(bd.magnetization().get(bd.grid().idx(1, 1, 1)), cur), "bdf2 step {n}");
        }
    }
}
