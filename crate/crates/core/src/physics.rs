//! Material parameters, nondimensionalisation, the local field `f(m)` and
//! the Landau-Lifshitz energy.
//!
//! Lengths are measured in units of `L`, fields in units of `Ms`. The
//! exchange term `ε Δm` never appears in `f`; the steppers treat it
//! implicitly through `(I - ε Δt Δ_h)^{-1}`.

use std::f64::consts::PI;
use std::fmt;
use std::sync::Arc;

use serde::{Deserialize, Serialize};

use crate::demag::{stray_field_into, DemagKernel, DemagWorkspace};
use crate::error::{Error, Result};
use crate::grid::{cross, pairwise_sum, Grid, VectorField};

pub const MU0: f64 = 4.0e-7 * PI;

/// Physical constants in SI units. The easy axis is fixed to x.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct MaterialConfig {
    /// Exchange constant `A` (J/m).
    pub exchange: f64,
    /// Saturation magnetization `Ms` (A/m).
    pub ms: f64,
    /// Uniaxial anisotropy constant `Ku` (J/m³).
    pub ku: f64,
    pub alpha: f64,
    /// Gyromagnetic ratio in m/(A·s), i.e. the `μ0 γ_e` product.
    pub gamma: f64,
    pub mu0: f64,
    /// Characteristic length `L` (m).
    pub length: f64,
}

impl MaterialConfig {
    /// Permalloy-like defaults with `γ = 2.211e5 m/(A·s)`.
    pub fn permalloy(alpha: f64, length: f64) -> Self {
        MaterialConfig {
            exchange: 1.3e-11,
            ms: 8.0e5,
            ku: 0.0,
            alpha,
            gamma: 2.211e5,
            mu0: MU0,
            length,
        }
    }

    pub fn validate(&self) -> Result<()> {
        let positive = [
            ("exchange", self.exchange),
            ("ms", self.ms),
            ("gamma", self.gamma),
            ("mu0", self.mu0),
            ("length", self.length),
        ];
        for (key, v) in positive {
            if !(v > 0.0 && v.is_finite()) {
                return Err(Error::InvalidKey {
                    key: key.into(),
                    message: format!("must be positive, got {v}"),
                });
            }
        }
        for (key, v) in [("ku", self.ku), ("alpha", self.alpha)] {
            if !(v >= 0.0 && v.is_finite()) {
                return Err(Error::InvalidKey {
                    key: key.into(),
                    message: format!("must be non-negative, got {v}"),
                });
            }
        }
        Ok(())
    }
}

/// Which time rescaling is in force.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum EquationForm {
    /// Landau-Lifshitz form: `t -> t / (γ Ms)`.
    Ll,
    /// Gilbert form with spin-transfer torque: `t -> (1 + α²) t / (γ Ms)`.
    LlgStt,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct NondimScaling {
    pub epsilon: f64,
    pub q: f64,
    /// Seconds per dimensionless time unit.
    pub time_unit: f64,
    pub alpha: f64,
    pub form: EquationForm,
    ms: f64,
    mu0: f64,
    length: f64,
    gamma: f64,
}

pub fn nondimensionalize(mat: &MaterialConfig, form: EquationForm) -> NondimScaling {
    let base = 1.0 / (mat.gamma * mat.ms);
    let time_unit = match form {
        EquationForm::Ll => base,
        EquationForm::LlgStt => (1.0 + mat.alpha * mat.alpha) * base,
    };
    NondimScaling {
        epsilon: mat.exchange / (mat.mu0 * mat.ms * mat.ms * mat.length * mat.length),
        q: mat.ku / (mat.mu0 * mat.ms * mat.ms),
        time_unit,
        alpha: mat.alpha,
        form,
        ms: mat.ms,
        mu0: mat.mu0,
        length: mat.length,
        gamma: mat.gamma,
    }
}

impl NondimScaling {
    /// Scaling with every physical unit set to one.
    pub fn dimensionless(epsilon: f64, q: f64, alpha: f64) -> Self {
        NondimScaling {
            epsilon,
            q,
            time_unit: 1.0,
            alpha,
            form: EquationForm::Ll,
            ms: 1.0,
            mu0: 1.0,
            length: 1.0,
            gamma: 1.0,
        }
    }

    pub fn ms(&self) -> f64 {
        self.ms
    }

    pub fn length(&self) -> f64 {
        self.length
    }

    pub fn seconds_to_time(&self, s: f64) -> f64 {
        s / self.time_unit
    }

    pub fn time_to_seconds(&self, t: f64) -> f64 {
        t * self.time_unit
    }

    pub fn ns_to_time(&self, ns: f64) -> f64 {
        self.seconds_to_time(ns * 1e-9)
    }

    pub fn time_to_ns(&self, t: f64) -> f64 {
        self.time_to_seconds(t) * 1e9
    }

    /// Dimensionless field from an induction in mT (`H = B / μ0`).
    pub fn field_from_mt(&self, b_mt: f64) -> f64 {
        b_mt * 1e-3 / self.mu0 / self.ms
    }

    pub fn field_from_a_per_m(&self, h: f64) -> f64 {
        h / self.ms
    }

    /// Length in metres to units of `L`.
    pub fn metres_to_length(&self, x: f64) -> f64 {
        x / self.length
    }

    /// Dimensionless drift `u = bJ / (γ Ms L)` for an STT magnitude `bJ` in m/s.
    pub fn stt_drift(&self, bj: f64) -> f64 {
        bj / (self.gamma * self.ms * self.length)
    }
}

/// Applied field `h_e`, dimensionless.
#[derive(Debug, Clone, PartialEq)]
pub enum AppliedField {
    Constant([f64; 3]),
    /// Piecewise constant: `(start_time, value)` pairs sorted by start time.
    Steps(Vec<(f64, [f64; 3])>),
}

impl AppliedField {
    pub fn at(&self, t: f64) -> [f64; 3] {
        match self {
            AppliedField::Constant(h) => *h,
            AppliedField::Steps(steps) => steps
                .iter()
                .rev()
                .find(|(start, _)| t >= *start)
                .or_else(|| steps.first())
                .map(|(_, h)| *h)
                .unwrap_or([0.0; 3]),
        }
    }
}

/// In-plane current along x: dimensionless drift `u` and non-adiabaticity `ξ`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SpinTorque {
    pub u: f64,
    pub xi: f64,
}

/// Manufactured forcing `f̂(x, t)` added on the right-hand side of the
/// equation (not inside `f`).
#[derive(Clone)]
pub struct Forcing(pub Arc<dyn Fn([f64; 3], f64) -> [f64; 3] + Send + Sync>);

impl fmt::Debug for Forcing {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str("Forcing(..)")
    }
}

#[derive(Debug, Clone)]
pub struct FieldConfig {
    pub applied: AppliedField,
    pub stt: Option<SpinTorque>,
    pub forcing: Option<Forcing>,
    pub demag: bool,
}

impl Default for FieldConfig {
    fn default() -> Self {
        FieldConfig {
            applied: AppliedField::Constant([0.0; 3]),
            stt: None,
            forcing: None,
            demag: true,
        }
    }
}

/// `f = -Q (m2 e2 + m3 e3) + h_e + h_s` on the interior of `out`.
pub fn local_field(
    m: &VectorField,
    cfg: &FieldConfig,
    scaling: &NondimScaling,
    h_s: &VectorField,
    t: f64,
    grid: &Grid,
) -> VectorField {
    let mut out = VectorField::zeros(grid);
    local_field_into(m, scaling.q, cfg.applied.at(t), h_s, grid, &mut out);
    out
}

pub fn local_field_into(
    m: &VectorField,
    q: f64,
    h_e: [f64; 3],
    h_s: &VectorField,
    grid: &Grid,
    out: &mut VectorField,
) {
    grid.for_each_cell(|i, j, k| {
        let id = grid.idx(i, j, k);
        let v = m.get(id);
        let s = h_s.get(id);
        out.set(id, [h_e[0] + s[0], -q * v[1] + h_e[1] + s[1], -q * v[2] + h_e[2] + s[2]]);
    });
}

/// [`local_field`] plus the current-driven terms `u (m × m_x) + u ξ m_x`.
/// Needs ghosts of `m`.
pub fn local_field_stt(
    m: &VectorField,
    cfg: &FieldConfig,
    scaling: &NondimScaling,
    h_s: &VectorField,
    t: f64,
    grid: &Grid,
) -> Result<VectorField> {
    let stt = cfg
        .stt
        .ok_or_else(|| Error::Config("spin-transfer torque parameters missing".into()))?;
    let mut out = local_field(m, cfg, scaling, h_s, t, grid);
    add_stt(m, stt, grid, &mut out);
    Ok(out)
}

pub fn add_stt(m: &VectorField, stt: SpinTorque, grid: &Grid, out: &mut VectorField) {
    if grid.nx < 2 || stt.u == 0.0 {
        return;
    }
    let inv = 0.5 / grid.dx;
    grid.for_each_cell(|i, j, k| {
        let id = grid.idx(i, j, k);
        let a = m.get(id + 1);
        let b = m.get(id - 1);
        let mx = [(a[0] - b[0]) * inv, (a[1] - b[1]) * inv, (a[2] - b[2]) * inv];
        let c = cross(m.get(id), mx);
        let mut f = out.get(id);
        for d in 0..3 {
            f[d] += stt.u * (c[d] + stt.xi * mx[d]);
        }
        out.set(id, f);
    });
}

/// Evaluates `f(m)` for the steppers, owning the demag scratch space.
pub struct LocalField {
    grid: Grid,
    q: f64,
    pub cfg: FieldConfig,
    kernel: Option<Arc<DemagKernel>>,
    ws: Option<DemagWorkspace>,
    h_s: VectorField,
}

impl fmt::Debug for LocalField {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("LocalField")
            .field("q", &self.q)
            .field("cfg", &self.cfg)
            .field("demag", &self.kernel.is_some())
            .finish()
    }
}

impl LocalField {
    /// `kernel` must be supplied when `cfg.demag` is set.
    pub fn new(
        grid: &Grid,
        scaling: &NondimScaling,
        cfg: FieldConfig,
        kernel: Option<Arc<DemagKernel>>,
    ) -> Result<Self> {
        let kernel = if cfg.demag {
            let k = kernel.ok_or_else(|| Error::Config("demag enabled but no kernel supplied".into()))?;
            if k.grid() != grid {
                return Err(Error::ShapeMismatch {
                    expected: grid.counts(),
                    found: k.grid().counts(),
                });
            }
            Some(k)
        } else {
            None
        };
        let ws = kernel.as_deref().map(DemagWorkspace::new);
        Ok(LocalField {
            grid: *grid,
            q: scaling.q,
            cfg,
            kernel,
            ws,
            h_s: VectorField::zeros(grid),
        })
    }

    pub fn grid(&self) -> &Grid {
        &self.grid
    }

    pub fn kernel(&self) -> Option<&Arc<DemagKernel>> {
        self.kernel.as_ref()
    }

    pub fn has_forcing(&self) -> bool {
        self.cfg.forcing.is_some()
    }

    /// Stray field of `m` into the internal buffer (zero when demag is off).
    pub fn update_stray_field(&mut self, m: &VectorField) -> Result<&VectorField> {
        if let (Some(k), Some(ws)) = (&self.kernel, &mut self.ws) {
            stray_field_into(m, k, &self.grid, ws, &mut self.h_s)?;
        }
        Ok(&self.h_s)
    }

    /// Full local field at `m`, recomputing the stray field. `m` needs ghosts.
    pub fn evaluate(&mut self, m: &VectorField, t: f64, out: &mut VectorField) -> Result<()> {
        self.update_stray_field(m)?;
        local_field_into(m, self.q, self.cfg.applied.at(t), &self.h_s, &self.grid, out);
        if let Some(stt) = self.cfg.stt {
            add_stt(m, stt, &self.grid, out);
        }
        Ok(())
    }

    /// Samples the manufactured forcing at cell centres, if configured.
    pub fn forcing_into(&self, t: f64, out: &mut VectorField) -> bool {
        let Some(Forcing(f)) = &self.cfg.forcing else {
            return false;
        };
        let g = self.grid;
        g.for_each_cell(|i, j, k| out.set(g.idx(i, j, k), f(g.center(i, j, k), t)));
        true
    }
}

/// Dimensionless energy
/// `½ Σ [ε |∇_h m|² + Q (m2² + m3²) - 2 h_e·m - h_s·m] V`,
/// with exchange from forward differences across interior faces.
pub fn ll_energy(
    m: &VectorField,
    cfg: &FieldConfig,
    scaling: &NondimScaling,
    kernel: Option<&DemagKernel>,
    grid: &Grid,
    t: f64,
) -> Result<f64> {
    let h_s = match (cfg.demag, kernel) {
        (true, Some(k)) => {
            let mut ws = DemagWorkspace::new(k);
            let mut h = VectorField::zeros(grid);
            stray_field_into(m, k, grid, &mut ws, &mut h)?;
            Some(h)
        }
        (true, None) => return Err(Error::Config("demag enabled but no kernel supplied".into())),
        (false, _) => None,
    };
    Ok(energy_with_field(m, scaling, cfg.applied.at(t), h_s.as_ref(), grid))
}

pub fn energy_with_field(
    m: &VectorField,
    scaling: &NondimScaling,
    h_e: [f64; 3],
    h_s: Option<&VectorField>,
    grid: &Grid,
) -> f64 {
    let eps = scaling.epsilon;
    let q = scaling.q;
    let steps = grid.spacings();
    let strides = [1, grid.nx + 2, (grid.nx + 2) * (grid.ny + 2)];
    let counts = grid.counts();
    let mut terms = Vec::with_capacity(grid.n_cells());
    grid.for_each_cell(|i, j, k| {
        let id = grid.idx(i, j, k);
        let v = m.get(id);
        let mut e = q * (v[1] * v[1] + v[2] * v[2]) - 2.0 * (h_e[0] * v[0] + h_e[1] * v[1] + h_e[2] * v[2]);
        if let Some(h) = h_s {
            let s = h.get(id);
            e -= s[0] * v[0] + s[1] * v[1] + s[2] * v[2];
        }
        let pos = [i, j, k];
        for axis in 0..3 {
            if pos[axis] < counts[axis] {
                let w = m.get(id + strides[axis]);
                let d2 = (w[0] - v[0]).powi(2) + (w[1] - v[1]).powi(2) + (w[2] - v[2]).powi(2);
                e += eps * d2 / (steps[axis] * steps[axis]);
            }
        }
        terms.push(e);
    });
    0.5 * pairwise_sum(&terms) * grid.cell_volume()
}
