//! Manufactured-solution convergence harness.
//!
//! The exact solutions are `m_e = (cos Φ sin t, sin Φ sin t, cos t)` with
//! `Φ = x̄` in 1D and `Φ = x̄ ȳ z̄` in 3D, where `x̄ = x²(1-x)²`. The forcing
//! `f̂ = ∂_t m_e + m_e × Δm_e + α m_e × (m_e × Δm_e)` makes `m_e` solve the
//! exchange-only equation `m_t = -m × Δm - α m × (m × Δm) + f̂`.

use std::fmt::Write as _;
use std::sync::Arc;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::grid::{cross, Grid, VectorField};
use crate::physics::{FieldConfig, Forcing, LocalField, NondimScaling};
use crate::steppers::{Stepper, StepperKind};

/// `x̄ = x²(1-x)²` and its first two derivatives.
fn bump(x: f64) -> [f64; 3] {
    let u = x * (1.0 - x);
    [u * u, 2.0 * u * (1.0 - 2.0 * x), 2.0 * (1.0 - 6.0 * x + 6.0 * x * x)]
}

/// `m_e` for a phase `Φ`.
fn exact_from_phase(phase: f64, t: f64) -> [f64; 3] {
    let s = t.sin();
    [phase.cos() * s, phase.sin() * s, t.cos()]
}

/// Forcing for a phase with squared gradient `grad2` and Laplacian `lap`.
fn forcing_from_phase(phase: f64, grad2: f64, lap: f64, t: f64, alpha: f64) -> [f64; 3] {
    let (s, c) = t.sin_cos();
    let (sp, cp) = phase.sin_cos();
    let m = [cp * s, sp * s, c];
    let m_t = [cp * c, sp * c, -s];
    let lap_m = [s * (-lap * sp - grad2 * cp), s * (lap * cp - grad2 * sp), 0.0];
    let a = cross(m, lap_m);
    let b = cross(m, a);
    [
        m_t[0] + a[0] + alpha * b[0],
        m_t[1] + a[1] + alpha * b[1],
        m_t[2] + a[2] + alpha * b[2],
    ]
}

pub fn exact_1d(x: f64, t: f64) -> [f64; 3] {
    exact_from_phase(bump(x)[0], t)
}

pub fn forcing_1d(x: f64, t: f64, alpha: f64) -> [f64; 3] {
    let [p, dp, ddp] = bump(x);
    forcing_from_phase(p, dp * dp, ddp, t, alpha)
}

pub fn exact_3d(x: f64, y: f64, z: f64, t: f64) -> [f64; 3] {
    exact_from_phase(bump(x)[0] * bump(y)[0] * bump(z)[0], t)
}

pub fn forcing_3d(x: f64, y: f64, z: f64, t: f64, alpha: f64) -> [f64; 3] {
    let ([a, da, dda], [b, db, ddb], [c, dc, ddc]) = (bump(x), bump(y), bump(z));
    let grad = [da * b * c, a * db * c, a * b * dc];
    let grad2 = grad[0] * grad[0] + grad[1] * grad[1] + grad[2] * grad[2];
    let lap = dda * b * c + a * ddb * c + a * b * ddc;
    forcing_from_phase(a * b * c, grad2, lap, t, alpha)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Dimension {
    One,
    Three,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Axis {
    Time,
    Space,
}

impl Axis {
    fn label(self) -> &'static str {
        match self {
            Axis::Time => "nt",
            Axis::Space => "nx",
        }
    }
}

/// One manufactured problem on the box `[0, extent]`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ManufacturedCase {
    pub dim: Dimension,
    pub alpha: f64,
    pub t_final: f64,
    pub extent: [f64; 3],
}

impl ManufacturedCase {
    /// 1D on `[0, 1]`, `T = 1e-2`, `α = 0.01`.
    pub fn one_d() -> Self {
        ManufacturedCase { dim: Dimension::One, alpha: 0.01, t_final: 1e-2, extent: [1.0; 3] }
    }

    /// 3D on `[0,2]×[0,1]×[0,0.2]`, `T = 1e-5`, `α = 0.01`.
    pub fn three_d_time() -> Self {
        ManufacturedCase {
            dim: Dimension::Three,
            alpha: 0.01,
            t_final: 1e-5,
            extent: [2.0, 1.0, 0.2],
        }
    }

    /// 3D on the unit cube, `T = 1e-5`, `α = 0.01`.
    pub fn three_d_space() -> Self {
        ManufacturedCase { dim: Dimension::Three, alpha: 0.01, t_final: 1e-5, extent: [1.0; 3] }
    }

    pub fn exact(&self, p: [f64; 3], t: f64) -> [f64; 3] {
        match self.dim {
            Dimension::One => exact_1d(p[0], t),
            Dimension::Three => exact_3d(p[0], p[1], p[2], t),
        }
    }

    pub fn forcing(&self, p: [f64; 3], t: f64) -> [f64; 3] {
        match self.dim {
            Dimension::One => forcing_1d(p[0], t, self.alpha),
            Dimension::Three => forcing_3d(p[0], p[1], p[2], t, self.alpha),
        }
    }

    /// Grid with `n` cells along every active axis.
    pub fn uniform_grid(&self, n: usize) -> Result<Grid> {
        match self.dim {
            Dimension::One => self.grid([n, 1, 1]),
            Dimension::Three => self.grid([n, n, n]),
        }
    }

    pub fn grid(&self, counts: [usize; 3]) -> Result<Grid> {
        if self.dim == Dimension::One && (counts[1] != 1 || counts[2] != 1) {
            return Err(Error::Config(format!("1D case needs counts [n, 1, 1], got {counts:?}")));
        }
        let h = [0, 1, 2].map(|a| {
            if counts[a] == 0 {
                0.0
            } else {
                self.extent[a] / counts[a] as f64
            }
        });
        Grid::new(counts, h)
    }
}

/// Max-norm error of `scheme` against `m_e(T)` after `nt` steps on `grid`.
pub fn run_case(case: &ManufacturedCase, scheme: StepperKind, grid: &Grid, nt: usize) -> Result<RunResult> {
    if nt == 0 {
        return Err(Error::Config("nt must be at least 1".into()));
    }
    let dt = case.t_final / nt as f64;
    let scaling = NondimScaling::dimensionless(1.0, 0.0, case.alpha);
    let c = *case;
    let cfg = FieldConfig {
        forcing: Some(Forcing(Arc::new(move |p, t| c.forcing(p, t)))),
        demag: false,
        ..Default::default()
    };
    let field = LocalField::new(grid, &scaling, cfg, None)?;
    let m0 = VectorField::from_fn(grid, |p| case.exact(p, 0.0));
    let mut st = Stepper::new(scheme, grid, 1.0, case.alpha, dt, field, m0, 0.0)?;
    for _ in 0..nt {
        st.step()?;
    }
    let exact = VectorField::from_fn(grid, |p| case.exact(p, case.t_final));
    Ok(RunResult {
        error: st.magnetization().max_distance(&exact, grid),
        max_norm_error: st.state.max_norm_error,
        counters: st.state.counters,
    })
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RunResult {
    pub error: f64,
    pub max_norm_error: f64,
    pub counters: crate::steppers::Counters,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Level {
    /// `nt` or `nx`.
    pub n: usize,
    /// `Δt` or `Δx`.
    pub h: f64,
    pub error: f64,
    pub max_norm_error: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ConvergenceReport {
    pub scheme: StepperKind,
    pub axis: Axis,
    pub levels: Vec<Level>,
    /// Least-squares slope of `log error` against `log h`. `None` when the
    /// errors are not strictly decreasing or fewer than three levels exist.
    pub order: Option<f64>,
    pub monotone: bool,
}

impl ConvergenceReport {
    pub fn from_levels(scheme: StepperKind, axis: Axis, levels: Vec<Level>) -> Self {
        let monotone = levels.windows(2).all(|w| w[1].error < w[0].error);
        let order = if monotone && levels.len() >= 3 {
            fit_order(&levels.iter().map(|l| (l.h, l.error)).collect::<Vec<_>>())
        } else {
            None
        };
        ConvergenceReport { scheme, axis, levels, order, monotone }
    }

    /// Slope between consecutive levels.
    pub fn pairwise_orders(&self) -> Vec<f64> {
        self.levels
            .windows(2)
            .map(|w| (w[1].error / w[0].error).ln() / (w[1].h / w[0].h).ln())
            .collect()
    }

    pub fn to_table(&self) -> String {
        let mut s = String::new();
        let _ = write!(s, "{:<10} |", self.axis.label());
        for l in &self.levels {
            let _ = write!(s, " {:>9}", l.n);
        }
        let _ = writeln!(s, " | order");
        let _ = write!(s, "{:<10} |", self.scheme.name());
        for l in &self.levels {
            let _ = write!(s, " {:>9.2e}", l.error);
        }
        match self.order {
            Some(p) => {
                let _ = writeln!(s, " | {p:.2}");
            }
            None => {
                let _ = writeln!(s, " | n/a (non-monotone)");
            }
        }
        s
    }

    pub fn to_csv(&self) -> String {
        let mut s = String::from("scheme,axis,n,h,error,max_norm_error\n");
        for l in &self.levels {
            let _ = writeln!(
                s,
                "{},{},{},{:e},{:e},{:e}",
                self.scheme.name(),
                self.axis.label(),
                l.n,
                l.h,
                l.error,
                l.max_norm_error
            );
        }
        s
    }
}

/// Least-squares slope of `ln e` against `ln h`.
pub fn fit_order(points: &[(f64, f64)]) -> Option<f64> {
    if points.len() < 2 || points.iter().any(|&(h, e)| !(h > 0.0 && e > 0.0)) {
        return None;
    }
    let n = points.len() as f64;
    let xs: Vec<f64> = points.iter().map(|p| p.0.ln()).collect();
    let ys: Vec<f64> = points.iter().map(|p| p.1.ln()).collect();
    let mx = xs.iter().sum::<f64>() / n;
    let my = ys.iter().sum::<f64>() / n;
    let sxy: f64 = xs.iter().zip(&ys).map(|(x, y)| (x - mx) * (y - my)).sum();
    let sxx: f64 = xs.iter().map(|x| (x - mx) * (x - mx)).sum();
    Some(sxy / sxx)
}

/// What stays fixed while the other axis is refined.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Fixed {
    /// Spatial counts for a temporal study.
    Counts([usize; 3]),
    /// Number of time steps for a spatial study.
    Steps(usize),
}

/// Runs every level (up to `jobs` at once) and fits the order.
pub fn convergence_study(
    case: &ManufacturedCase,
    scheme: StepperKind,
    axis: Axis,
    levels: &[usize],
    fixed: Fixed,
    jobs: usize,
) -> Result<ConvergenceReport> {
    let run_level = |n: usize| -> Result<Level> {
        let (grid, nt, h) = match (axis, fixed) {
            (Axis::Time, Fixed::Counts(c)) => (case.grid(c)?, n, case.t_final / n as f64),
            (Axis::Space, Fixed::Steps(nt)) => (case.uniform_grid(n)?, nt, case.extent[0] / n as f64),
            _ => {
                return Err(Error::Config(
                    "temporal studies fix the counts, spatial studies fix the step count".into(),
                ))
            }
        };
        let r = run_case(case, scheme, &grid, nt)?;
        Ok(Level { n, h, error: r.error, max_norm_error: r.max_norm_error })
    };

    let jobs = jobs.max(1);
    let mut out: Vec<Option<Result<Level>>> = (0..levels.len()).map(|_| None).collect();
    for (chunk_levels, chunk_out) in levels.chunks(jobs).zip(out.chunks_mut(jobs)) {
        std::thread::scope(|s| {
            let handles: Vec<_> = chunk_levels.iter().map(|&n| s.spawn(move || run_level(n))).collect();
            for (h, slot) in handles.into_iter().zip(chunk_out.iter_mut()) {
                *slot = Some(h.join().unwrap_or_else(|_| Err(Error::Diagnostic("level panicked".into()))));
            }
        });
    }
    let levels = out.into_iter().map(|r| r.expect("every level ran")).collect::<Result<Vec<_>>>()?;
    Ok(ConvergenceReport::from_levels(scheme, axis, levels))
}

/// The refinement sequences used for the four standard studies.
pub mod presets {
    use super::*;

    pub const TIME_1D_LEVELS: [usize; 4] = [1000, 2000, 4000, 8000];
    pub const TIME_1D_CELLS: usize = 1000;
    pub const SPACE_1D_LEVELS: [usize; 4] = [10, 20, 40, 80];
    /// `Δt = 1e-6` up to `T = 1e-2`.
    pub const SPACE_1D_STEPS: usize = 10_000;
    pub const TIME_3D_LEVELS: [usize; 4] = [10, 20, 40, 80];
    pub const TIME_3D_CELLS: [usize; 3] = [128, 64, 10];
    pub const SPACE_3D_LEVELS: [usize; 4] = [6, 8, 10, 12];
    /// `Δt = 1e-9` up to `T = 1e-5`.
    pub const SPACE_3D_STEPS: usize = 10_000;

    /// The four published studies.
    #[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
    pub enum Preset {
        #[serde(rename = "time_1d")]
        Time1d,
        #[serde(rename = "space_1d")]
        Space1d,
        #[serde(rename = "time_3d")]
        Time3d,
        #[serde(rename = "space_3d")]
        Space3d,
    }

    impl Preset {
        pub const ALL: [Preset; 4] = [Preset::Time1d, Preset::Space1d, Preset::Time3d, Preset::Space3d];

        pub fn name(self) -> &'static str {
            match self {
                Preset::Time1d => "time_1d",
                Preset::Space1d => "space_1d",
                Preset::Time3d => "time_3d",
                Preset::Space3d => "space_3d",
            }
        }

        pub fn run(self, scheme: StepperKind, jobs: usize) -> Result<ConvergenceReport> {
            match self {
                Preset::Time1d => time_1d(scheme, jobs),
                Preset::Space1d => space_1d(scheme, jobs),
                Preset::Time3d => time_3d(scheme, jobs),
                Preset::Space3d => space_3d(scheme, jobs),
            }
        }

        /// Compares a report with the expected order of accuracy.
        pub fn check(self, report: &ConvergenceReport) -> std::result::Result<(), String> {
            let Some(p) = report.order else {
                return Err(format!("{}: errors do not decrease monotonically, no order fitted", self.name()));
            };
            let ok = match self {
                Preset::Time1d => (0.9..=1.1).contains(&p),
                Preset::Space1d => p >= 1.5,
                Preset::Time3d => {
                    let halving = report.levels.windows(2).all(|w| (w[0].error / w[1].error / 2.0 - 1.0).abs() <= 0.02);
                    (p - 1.0).abs() <= 0.05 && halving
                }
                Preset::Space3d => p >= 1.7,
            };
            let want = match self {
                Preset::Time1d => "in [0.9, 1.1]",
                Preset::Space1d => ">= 1.5",
                Preset::Time3d => "1.00 +- 0.05 with errors halving within 2%",
                Preset::Space3d => ">= 1.7",
            };
            if ok { Ok(()) } else { Err(format!("{}: order {p:.3}, expected {want}", self.name())) }
        }
    }

    pub fn time_1d(scheme: StepperKind, jobs: usize) -> Result<ConvergenceReport> {
        convergence_study(
            &ManufacturedCase::one_d(),
            scheme,
            Axis::Time,
            &TIME_1D_LEVELS,
            Fixed::Counts([TIME_1D_CELLS, 1, 1]),
            jobs,
        )
    }

    pub fn space_1d(scheme: StepperKind, jobs: usize) -> Result<ConvergenceReport> {
        convergence_study(
            &ManufacturedCase::one_d(),
            scheme,
            Axis::Space,
            &SPACE_1D_LEVELS,
            Fixed::Steps(SPACE_1D_STEPS),
            jobs,
        )
    }

    pub fn time_3d(scheme: StepperKind, jobs: usize) -> Result<ConvergenceReport> {
        convergence_study(
            &ManufacturedCase::three_d_time(),
            scheme,
            Axis::Time,
            &TIME_3D_LEVELS,
            Fixed::Counts(TIME_3D_CELLS),
            jobs,
        )
    }

    pub fn space_3d(scheme: StepperKind, jobs: usize) -> Result<ConvergenceReport> {
        convergence_study(
            &ManufacturedCase::three_d_space(),
            scheme,
            Axis::Space,
            &SPACE_3D_LEVELS,
            Fixed::Steps(SPACE_3D_STEPS),
            jobs,
        )
    }
}
