//! Run configuration files.
//!
//! Configs are TOML. Keys carry their unit as a suffix (`_nm`, `_ps`, `_ns`,
//! `_mT`) and unknown keys are rejected with a spelling suggestion.
//!
//! ```toml
//! command = "std4"
//! stepper = "gspm-bdf2"
//! out_dir = "out/std4"
//!
//! [std4]
//! field_case = "25mT_170deg"
//! ```

use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::mms::presets::Preset;
use crate::physics::MaterialConfig;
use crate::problems::{
    stability_spec, std4_spec, std5_spec, ProblemSpec, Scale, Std4Field, NM, S_STATE_SEED, STD4_COARSE_NM,
};
use crate::steppers::StepperKind;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Command {
    Converge,
    Stability,
    Std4,
    Std5,
    Relax,
    Custom,
}

impl Command {
    pub fn name(self) -> &'static str {
        match self {
            Command::Converge => "converge",
            Command::Stability => "stability",
            Command::Std4 => "std4",
            Command::Std5 => "std5",
            Command::Relax => "relax",
            Command::Custom => "custom",
        }
    }
}

impl std::fmt::Display for Command {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(self.name())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct MeshConfig {
    pub geometry_nm: [f64; 3],
    pub cell_size_nm: [f64; 3],
}

#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TimeConfig {
    pub dt_ps: Option<f64>,
    pub duration_ns: Option<f64>,
}

/// Overrides on top of the Permalloy defaults.
#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct MaterialOverrides {
    #[serde(rename = "exchange_J_per_m")]
    pub exchange_j_per_m: Option<f64>,
    #[serde(rename = "ms_A_per_m")]
    pub ms_a_per_m: Option<f64>,
    #[serde(rename = "ku_J_per_m3")]
    pub ku_j_per_m3: Option<f64>,
    pub alpha: Option<f64>,
    #[serde(rename = "gamma_m_per_A_s")]
    pub gamma_m_per_a_s: Option<f64>,
}

impl MaterialOverrides {
    fn apply(&self, m: &mut MaterialConfig) {
        let set = |dst: &mut f64, v: Option<f64>| {
            if let Some(v) = v {
                *dst = v;
            }
        };
        set(&mut m.exchange, self.exchange_j_per_m);
        set(&mut m.ms, self.ms_a_per_m);
        set(&mut m.ku, self.ku_j_per_m3);
        set(&mut m.alpha, self.alpha);
        set(&mut m.gamma, self.gamma_m_per_a_s);
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ConvergeConfig {
    #[serde(default = "all_cases")]
    pub cases: Vec<Preset>,
    /// Fail with a non-zero status when a fitted order misses its target.
    #[serde(default = "yes")]
    pub check: bool,
}

impl Default for ConvergeConfig {
    fn default() -> Self {
        ConvergeConfig { cases: all_cases(), check: true }
    }
}

fn all_cases() -> Vec<Preset> {
    Preset::ALL.to_vec()
}

fn yes() -> bool {
    true
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct StabilityConfig {
    #[serde(default = "desk")]
    pub scale: Scale,
}

impl Default for StabilityConfig {
    fn default() -> Self {
        StabilityConfig { scale: Scale::Desk }
    }
}

fn desk() -> Scale {
    Scale::Desk
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Std4Config {
    #[serde(default = "field1")]
    pub field_case: Std4Field,
    /// Relaxation stages of the s-state staircase.
    #[serde(default = "eight")]
    pub stages: usize,
    #[serde(default = "one")]
    pub after_crossing_ns: f64,
}

impl Default for Std4Config {
    fn default() -> Self {
        Std4Config { field_case: Std4Field::Field1, stages: 8, after_crossing_ns: 1.0 }
    }
}

fn field1() -> Std4Field {
    Std4Field::Field1
}

fn eight() -> usize {
    8
}

fn one() -> f64 {
    1.0
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Std5Config {
    /// Case numbers 1 to 4, and 5 for the (72.45, 0.5) comparison run.
    #[serde(default = "case1")]
    pub cases: Vec<usize>,
    /// Explicit drive, replacing `cases`.
    pub bj_m_per_s: Option<f64>,
    pub xi: Option<f64>,
    #[serde(default = "core_radius")]
    pub core_radius_nm: f64,
}

impl Default for Std5Config {
    fn default() -> Self {
        Std5Config { cases: case1(), bj_m_per_s: None, xi: None, core_radius_nm: core_radius() }
    }
}

fn case1() -> Vec<usize> {
    vec![1]
}

fn core_radius() -> f64 {
    crate::problems::VORTEX_CORE_NM
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum InitialState {
    Uniform { direction: [f64; 3] },
    Random,
    Vortex { core_radius_nm: f64 },
    /// A snapshot written by an earlier run.
    Snapshot { path: PathBuf },
}

impl Default for InitialState {
    fn default() -> Self {
        InitialState::Uniform { direction: [1.0, 0.0, 0.0] }
    }
}

/// Applied field, spin torque and start state for `relax` and `custom`.
#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DriveConfig {
    #[serde(default, rename = "field_mT")]
    pub field_mt: [f64; 3],
    pub bj_m_per_s: Option<f64>,
    #[serde(default)]
    pub xi: f64,
    #[serde(default)]
    pub initial: InitialState,
    /// Convergence threshold of `relax` on `max |Δm| / Δt`.
    pub tolerance: Option<f64>,
    pub max_steps: Option<usize>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunConfig {
    pub command: Command,
    /// Defaults to GSPM for `relax` and GSPM-BDF2 otherwise.
    pub stepper: Option<StepperKind>,
    #[serde(default = "out_dir")]
    pub out_dir: PathBuf,
    #[serde(default = "seed")]
    pub seed: u64,
    #[serde(default = "one")]
    pub sample_every_ps: f64,
    /// Periodic snapshots; must be a multiple of `sample_every_ps`.
    pub snapshot_every_ps: Option<f64>,
    pub mesh: Option<MeshConfig>,
    #[serde(default)]
    pub time: TimeConfig,
    #[serde(default)]
    pub material: MaterialOverrides,
    #[serde(default)]
    pub converge: ConvergeConfig,
    #[serde(default)]
    pub stability: StabilityConfig,
    #[serde(default)]
    pub std4: Std4Config,
    #[serde(default)]
    pub std5: Std5Config,
    #[serde(default)]
    pub drive: DriveConfig,
}

fn out_dir() -> PathBuf {
    PathBuf::from("out")
}

fn seed() -> u64 {
    S_STATE_SEED
}

/// Every accepted key, by table.
const KEYS: &[(&str, &[&str])] = &[
    (
        "",
        &[
            "command",
            "stepper",
            "out_dir",
            "seed",
            "sample_every_ps",
            "snapshot_every_ps",
            "mesh",
            "time",
            "material",
            "converge",
            "stability",
            "std4",
            "std5",
            "drive",
        ],
    ),
    ("mesh", &["geometry_nm", "cell_size_nm"]),
    ("time", &["dt_ps", "duration_ns"]),
    ("material", &["exchange_J_per_m", "ms_A_per_m", "ku_J_per_m3", "alpha", "gamma_m_per_A_s"]),
    ("converge", &["cases", "check"]),
    ("stability", &["scale"]),
    ("std4", &["field_case", "stages", "after_crossing_ns"]),
    ("std5", &["cases", "bj_m_per_s", "xi", "core_radius_nm"]),
    ("drive", &["field_mT", "bj_m_per_s", "xi", "initial", "tolerance", "max_steps"]),
    ("drive.initial", &["kind", "direction", "core_radius_nm", "path"]),
];

/// Closest known key, looking in the same table first and then everywhere.
fn suggest(table: &str, key: &str) -> Option<String> {
    let best = |cands: &mut dyn Iterator<Item = String>| {
        cands
            .map(|c| (strsim::jaro_winkler(key, c.rsplit('.').next().unwrap_or(&c)), c))
            .filter(|(s, _)| *s > 0.8)
            .max_by(|a, b| a.0.total_cmp(&b.0))
            .map(|(_, c)| c)
    };
    let local = KEYS.iter().find(|(t, _)| *t == table).map(|(_, k)| *k).unwrap_or(&[]);
    best(&mut local.iter().map(|k| k.to_string())).or_else(|| {
        best(&mut KEYS.iter().flat_map(|(t, ks)| {
            ks.iter().map(move |k| if t.is_empty() { k.to_string() } else { format!("{t}.{k}") })
        }))
    })
}

fn check_keys(table: &toml::Table, prefix: &str) -> Result<()> {
    let known = KEYS.iter().find(|(t, _)| *t == prefix).map(|(_, k)| *k);
    for (k, v) in table {
        let path = if prefix.is_empty() { k.clone() } else { format!("{prefix}.{k}") };
        match known {
            Some(ks) if ks.contains(&k.as_str()) => {}
            Some(_) => return Err(Error::UnknownKey { key: path, suggestion: suggest(prefix, k) }),
            None => continue,
        }
        if let toml::Value::Table(t) = v {
            check_keys(t, &path)?;
        }
    }
    Ok(())
}

impl RunConfig {
    pub fn load(path: &Path) -> Result<Self> {
        let text =
            std::fs::read_to_string(path).map_err(|source| Error::Io { path: path.to_path_buf(), source })?;
        Self::parse(&text).map_err(|e| match e {
            Error::Parse { message, .. } => Error::Parse { path: path.to_path_buf(), message },
            other => other,
        })
    }

    /// Parses and validates a config document.
    pub fn parse(text: &str) -> Result<Self> {
        let table: toml::Table =
            text.parse().map_err(|e: toml::de::Error| Error::Parse { path: "<config>".into(), message: e.to_string() })?;
        check_keys(&table, "")?;
        let cfg: RunConfig = toml::Value::Table(table)
            .try_into()
            .map_err(|e: toml::de::Error| Error::Parse { path: "<config>".into(), message: e.message().to_string() })?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn to_toml(&self) -> String {
        toml::to_string(self).expect("config serializes")
    }

    /// A config with every default, for `command`.
    pub fn defaults(command: Command) -> Self {
        Self::parse(&format!("command = \"{command}\"")).expect("defaults are valid")
    }

    pub fn validate(&self) -> Result<()> {
        let positive = |key: &str, v: f64| {
            if v > 0.0 && v.is_finite() {
                Ok(())
            } else {
                Err(Error::InvalidKey { key: key.into(), message: format!("must be positive, got {v}") })
            }
        };
        positive("sample_every_ps", self.sample_every_ps)?;
        if let Some(s) = self.snapshot_every_ps {
            positive("snapshot_every_ps", s)?;
            let r = s / self.sample_every_ps;
            if (r - r.round()).abs() > 1e-9 * r {
                return Err(Error::InvalidKey {
                    key: "snapshot_every_ps".into(),
                    message: format!("must be a multiple of sample_every_ps = {}", self.sample_every_ps),
                });
            }
        }
        if self.command == Command::Std5 && self.std5.bj_m_per_s.is_none() {
            if self.std5.cases.is_empty() {
                return Err(Error::InvalidKey { key: "std5.cases".into(), message: "no cases selected".into() });
            }
            if let Some(c) = self.std5.cases.iter().find(|c| !(1..=5).contains(*c)) {
                return Err(Error::InvalidKey {
                    key: "std5.cases".into(),
                    message: format!("case {c} is not one of 1 to 5"),
                });
            }
        }
        positive("std5.core_radius_nm", self.std5.core_radius_nm)?;
        if self.std4.stages == 0 {
            return Err(Error::InvalidKey { key: "std4.stages".into(), message: "must be at least 1".into() });
        }
        if let InitialState::Uniform { direction } = self.drive.initial {
            if crate::grid::norm(direction) == 0.0 {
                return Err(Error::InvalidKey {
                    key: "drive.initial.direction".into(),
                    message: "must be a non-zero vector".into(),
                });
            }
        }
        if self.command == Command::Custom && self.mesh.is_none() {
            return Err(Error::InvalidKey { key: "mesh".into(), message: "custom runs need a [mesh] table".into() });
        }
        if self.command != Command::Converge {
            self.problem_spec()?.validate()?;
        }
        Ok(())
    }

    pub fn stepper(&self) -> StepperKind {
        self.stepper.unwrap_or(match self.command {
            Command::Relax => StepperKind::Gspm,
            _ => StepperKind::GspmBdf2,
        })
    }

    /// The preset of the selected command with the config's overrides applied.
    pub fn problem_spec(&self) -> Result<ProblemSpec> {
        let dt = self.time.dt_ps.unwrap_or(1.0);
        let stepper = self.stepper();
        let mut spec = match self.command {
            Command::Stability => stability_spec(self.stability.scale, stepper, dt),
            Command::Std4 => std4_spec(STD4_COARSE_NM, stepper, dt),
            Command::Std5 => std5_spec(stepper, dt),
            Command::Relax | Command::Custom | Command::Converge => ProblemSpec {
                geometry_m: [100.0 * NM, 100.0 * NM, 10.0 * NM],
                cell_m: [5.0 * NM; 3],
                material: MaterialConfig::permalloy(0.5, NM),
                dt_s: dt * 1e-12,
                duration_s: 1e-9,
                stepper,
            },
        };
        if let Some(mesh) = &self.mesh {
            spec.geometry_m = mesh.geometry_nm.map(|v| v * NM);
            spec.cell_m = mesh.cell_size_nm.map(|v| v * NM);
        }
        if let Some(t) = self.time.duration_ns {
            spec.duration_s = t * 1e-9;
        }
        self.material.apply(&mut spec.material);
        Ok(spec)
    }

    /// Steps between recorded samples.
    pub fn sample_every_steps(&self) -> Result<usize> {
        let dt = self.time.dt_ps.unwrap_or(1.0);
        steps_per(self.sample_every_ps, dt, "sample_every_ps")
    }

    /// Samples between periodic snapshots.
    pub fn snapshot_every_samples(&self) -> Option<usize> {
        self.snapshot_every_ps.map(|s| (s / self.sample_every_ps).round() as usize)
    }
}

fn steps_per(interval_ps: f64, dt_ps: f64, key: &str) -> Result<usize> {
    let r = interval_ps / dt_ps;
    let n = r.round();
    if n < 1.0 || (r - n).abs() > 1e-9 * r {
        return Err(Error::InvalidKey {
            key: key.into(),
            message: format!("{interval_ps} ps is not a whole number of {dt_ps} ps steps"),
        });
    }
    Ok(n as usize)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn minimal_std4() {
        let cfg = RunConfig::parse("command = \"std4\"\n[std4]\nfield_case = \"25mT_170deg\"\n").unwrap();
        assert_eq!(cfg.std4.field_case, Std4Field::Field1);
        assert_eq!(cfg.stepper(), StepperKind::GspmBdf2);
        assert_eq!(RunConfig::defaults(Command::Relax).stepper(), StepperKind::Gspm);
        assert_eq!(cfg.problem_spec().unwrap().counts().unwrap(), [100, 25, 1]);
    }

    #[test]
    fn negative_cell_names_key() {
        let text = "command = \"custom\"\n[mesh]\ngeometry_nm = [10, 10, 10]\ncell_size_nm = [-1, 1, 1]\n";
        let err = RunConfig::parse(text).unwrap_err();
        assert!(err.is_config());
        assert!(err.to_string().contains("cell_size_nm"), "{err}");
    }

    #[test]
    fn misspelt_key_suggests() {
        let err = RunConfig::parse("command = \"custom\"\n[material]\nalpa = 0.1\n").unwrap_err();
        match err {
            Error::UnknownKey { key, suggestion } => {
                assert_eq!(key, "material.alpa");
                assert_eq!(suggestion.as_deref(), Some("alpha"));
            }
            other => panic!("{other}"),
        }
        let err = RunConfig::parse("command = \"std4\"\nalpa = 0.1\n").unwrap_err();
        assert!(err.to_string().contains("material.alpha"), "{err}");
    }

    #[test]
    fn bad_field_case() {
        let err = RunConfig::parse("command = \"std4\"\n[std4]\nfield_case = \"25mT\"\n").unwrap_err();
        assert!(err.is_config(), "{err}");
    }

    #[test]
    fn toml_roundtrip() {
        let cfg = RunConfig::defaults(Command::Std5);
        assert_eq!(RunConfig::parse(&cfg.to_toml()).unwrap(), cfg);
    }

    #[test]
    fn snapshot_interval_must_align() {
        let err = RunConfig::parse("command = \"stability\"\nsample_every_ps = 2\nsnapshot_every_ps = 3\n");
        assert!(err.unwrap_err().to_string().contains("snapshot_every_ps"));
    }
}
