//! CSV time series, text snapshots and run manifests.
//!
//! Floats are written with 17 significant digits so every file reads back to
//! the same bits.

use std::collections::BTreeMap;
use std::fmt::Write as _;
use std::path::{Path, PathBuf};
use std::time::Duration;

use serde::{Deserialize, Serialize};

use crate::config::RunConfig;
use crate::error::{Error, Result};
use crate::grid::{Grid, VectorField};
use crate::physics::NondimScaling;
use crate::steppers::{Counters, Sample};

pub const TIMESERIES_HEADER: &str = "t_ns,mx,my,mz,Mx_A_per_m,My_A_per_m,Mz_A_per_m,energy";
const SNAPSHOT_MAGIC: &str = "# micromag snapshot v1";

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TimeSeriesRecord {
    pub t_ns: f64,
    pub m: [f64; 3],
    /// `m · Ms` in A/m.
    pub m_si: [f64; 3],
    pub energy: f64,
}

impl TimeSeriesRecord {
    pub fn from_sample(s: &Sample, scaling: &NondimScaling) -> Self {
        let ms = scaling.ms();
        TimeSeriesRecord { t_ns: scaling.time_to_ns(s.t), m: s.m_avg, m_si: s.m_avg.map(|c| c * ms), energy: s.energy }
    }
}

pub fn records(samples: &[Sample], scaling: &NondimScaling) -> Vec<TimeSeriesRecord> {
    samples.iter().map(|s| TimeSeriesRecord::from_sample(s, scaling)).collect()
}

fn io(path: &Path) -> impl FnOnce(std::io::Error) -> Error + '_ {
    move |source| Error::Io { path: path.to_path_buf(), source }
}

fn parse_err(path: &Path, line: usize, message: impl std::fmt::Display) -> Error {
    Error::Parse { path: path.to_path_buf(), message: format!("line {line}: {message}") }
}

/// Formats the CSV in memory.
pub fn timeseries_csv(records: &[TimeSeriesRecord]) -> String {
    let mut out = String::with_capacity(200 * (records.len() + 1));
    out.push_str(TIMESERIES_HEADER);
    out.push('\n');
    for r in records {
        let vals = [r.t_ns, r.m[0], r.m[1], r.m[2], r.m_si[0], r.m_si[1], r.m_si[2], r.energy];
        for (n, v) in vals.iter().enumerate() {
            if n > 0 {
                out.push(',');
            }
            write!(out, "{v:.16e}").unwrap();
        }
        out.push('\n');
    }
    out
}

pub fn write_timeseries(records: &[TimeSeriesRecord], path: &Path) -> Result<()> {
    std::fs::write(path, timeseries_csv(records)).map_err(io(path))
}

pub fn read_timeseries(path: &Path) -> Result<Vec<TimeSeriesRecord>> {
    let text = std::fs::read_to_string(path).map_err(io(path))?;
    let mut lines = text.lines();
    if lines.next() != Some(TIMESERIES_HEADER) {
        return Err(parse_err(path, 1, "missing time-series header"));
    }
    let mut out = Vec::new();
    for (n, line) in lines.enumerate() {
        let v: Vec<f64> = line
            .split(',')
            .map(|s| s.parse::<f64>())
            .collect::<std::result::Result<_, _>>()
            .map_err(|e| parse_err(path, n + 2, e))?;
        if v.len() != 8 {
            return Err(parse_err(path, n + 2, format!("expected 8 columns, found {}", v.len())));
        }
        out.push(TimeSeriesRecord { t_ns: v[0], m: [v[1], v[2], v[3]], m_si: [v[4], v[5], v[6]], energy: v[7] });
    }
    Ok(out)
}

/// A field on a grid plus free-form metadata.
#[derive(Debug, Clone, PartialEq)]
pub struct Snapshot {
    pub grid: Grid,
    pub time_ns: f64,
    pub metadata: BTreeMap<String, String>,
    pub field: VectorField,
}

pub fn snapshot_text(
    field: &VectorField,
    grid: &Grid,
    time_ns: f64,
    metadata: &BTreeMap<String, String>,
) -> Result<String> {
    field.check_shape(grid)?;
    let [nx, ny, nz] = grid.counts();
    let [dx, dy, dz] = grid.spacings();
    let mut out = String::with_capacity(80 * (grid.n_cells() + 8));
    writeln!(out, "{SNAPSHOT_MAGIC}").unwrap();
    writeln!(out, "# dims {nx} {ny} {nz}").unwrap();
    writeln!(out, "# spacing_nm {dx:.16e} {dy:.16e} {dz:.16e}").unwrap();
    writeln!(out, "# time_ns {time_ns:.16e}").unwrap();
    for (k, v) in metadata {
        if k.contains(['=', '\n']) || v.contains('\n') {
            return Err(Error::InvalidKey { key: k.clone(), message: "metadata must be single-line key=value".into() });
        }
        writeln!(out, "# meta {k}={v}").unwrap();
    }
    writeln!(out, "# i j k mx my mz").unwrap();
    grid.for_each_cell(|i, j, k| {
        let v = field.get(grid.idx(i, j, k));
        writeln!(out, "{i} {j} {k} {:.16e} {:.16e} {:.16e}", v[0], v[1], v[2]).unwrap();
    });
    Ok(out)
}

/// Writes one line per interior cell, `i` fastest and `k` slowest.
pub fn write_snapshot(
    field: &VectorField,
    grid: &Grid,
    time_ns: f64,
    metadata: &BTreeMap<String, String>,
    path: &Path,
) -> Result<()> {
    let text = snapshot_text(field, grid, time_ns, metadata)?;
    std::fs::write(path, text).map_err(io(path))
}

pub fn read_snapshot(path: &Path) -> Result<Snapshot> {
    let text = std::fs::read_to_string(path).map_err(io(path))?;
    let mut lines = text.lines().enumerate().peekable();
    if lines.next().map(|(_, l)| l) != Some(SNAPSHOT_MAGIC) {
        return Err(parse_err(path, 1, "not a snapshot file"));
    }
    let mut dims: Option<[usize; 3]> = None;
    let mut spacing: Option<[f64; 3]> = None;
    let mut time_ns = None;
    let mut metadata = BTreeMap::new();
    while let Some((n, line)) = lines.next_if(|(_, l)| l.starts_with('#')) {
        let body = line.trim_start_matches('#').trim();
        let (tag, rest) = body.split_once(' ').unwrap_or((body, ""));
        let triple = |s: &str| -> Result<Vec<f64>> {
            let v: Vec<f64> = s.split_whitespace().map(|x| x.parse::<f64>()).collect::<std::result::Result<_, _>>()
                .map_err(|e| parse_err(path, n + 1, e))?;
            if v.len() != 3 {
                return Err(parse_err(path, n + 1, "expected three values"));
            }
            Ok(v)
        };
        match tag {
            "dims" => {
                let v = triple(rest)?;
                dims = Some([v[0] as usize, v[1] as usize, v[2] as usize]);
            }
            "spacing_nm" => {
                let v = triple(rest)?;
                spacing = Some([v[0], v[1], v[2]]);
            }
            "time_ns" => time_ns = Some(rest.trim().parse::<f64>().map_err(|e| parse_err(path, n + 1, e))?),
            "meta" => {
                let (k, v) = rest.split_once('=').ok_or_else(|| parse_err(path, n + 1, "meta without `=`"))?;
                metadata.insert(k.to_string(), v.to_string());
            }
            _ => {}
        }
    }
    let (Some(dims), Some(spacing), Some(time_ns)) = (dims, spacing, time_ns) else {
        return Err(parse_err(path, 1, "incomplete header (need dims, spacing_nm, time_ns)"));
    };
    let grid = Grid::new(dims, spacing)?;
    let mut field = VectorField::zeros(&grid);
    let mut seen = 0usize;
    for (n, line) in lines {
        let t: Vec<&str> = line.split_whitespace().collect();
        if t.len() != 6 {
            return Err(parse_err(path, n + 1, "expected `i j k mx my mz`"));
        }
        let ix: Vec<usize> =
            t[..3].iter().map(|s| s.parse()).collect::<std::result::Result<_, _>>().map_err(|e| parse_err(path, n + 1, e))?;
        let v: Vec<f64> =
            t[3..].iter().map(|s| s.parse()).collect::<std::result::Result<_, _>>().map_err(|e| parse_err(path, n + 1, e))?;
        if !(1..=dims[0]).contains(&ix[0]) || !(1..=dims[1]).contains(&ix[1]) || !(1..=dims[2]).contains(&ix[2]) {
            return Err(parse_err(path, n + 1, format!("cell {ix:?} outside {dims:?}")));
        }
        field.set(grid.idx(ix[0], ix[1], ix[2]), [v[0], v[1], v[2]]);
        seen += 1;
    }
    if seen != grid.n_cells() {
        return Err(parse_err(path, 0, format!("expected {} cells, found {seen}", grid.n_cells())));
    }
    crate::grid::apply_neumann_ghosts(&mut field, &grid);
    Ok(Snapshot { grid, time_ns, metadata, field })
}

/// Record of one run: resolved config, seed, work counters and results.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Manifest {
    pub command: String,
    pub seed: u64,
    pub wall_time_s: f64,
    pub counters: Counters,
    pub results: BTreeMap<String, f64>,
    pub files: Vec<String>,
    pub config: RunConfig,
}

impl Manifest {
    /// Records `config` with its defaults filled in.
    pub fn new(config: &RunConfig) -> Self {
        let mut resolved = config.clone();
        resolved.stepper = Some(config.stepper());
        resolved.time.dt_ps.get_or_insert(1.0);
        Manifest {
            command: config.command.name().to_string(),
            seed: config.seed,
            wall_time_s: 0.0,
            counters: Counters::default(),
            results: BTreeMap::new(),
            files: Vec::new(),
            config: resolved,
        }
    }

    pub fn finish(&mut self, wall: Duration) {
        self.wall_time_s = wall.as_secs_f64();
    }

    pub fn write(&self, dir: &Path) -> Result<PathBuf> {
        let path = dir.join("manifest.toml");
        let text = toml::to_string(self).map_err(|e| Error::Parse { path: path.clone(), message: e.to_string() })?;
        std::fs::write(&path, text).map_err(io(&path))?;
        Ok(path)
    }

    pub fn read(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(io(path))?;
        toml::from_str(&text).map_err(|e| Error::Parse { path: path.to_path_buf(), message: e.to_string() })
    }
}

/// Creates `dir` and checks that a file can be written in it.
pub fn ensure_writable(dir: &Path) -> Result<()> {
    std::fs::create_dir_all(dir).map_err(io(dir))?;
    let probe = dir.join(".write-test");
    std::fs::write(&probe, b"").map_err(io(&probe))?;
    std::fs::remove_file(&probe).map_err(io(&probe))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn empty_series_is_header_only() {
        assert_eq!(timeseries_csv(&[]), format!("{TIMESERIES_HEADER}\n"));
    }

    #[test]
    fn one_record_two_lines() {
        let r = TimeSeriesRecord { t_ns: 0.1, m: [1.0, 0.0, -0.0], m_si: [8e5, 0.0, 0.0], energy: f64::NAN };
        let csv = timeseries_csv(&[r]);
        assert_eq!(csv.lines().count(), 2);
        assert!(!csv.contains('\r'));
        assert!(csv.lines().nth(1).unwrap().starts_with("1.0000000000000001e-1,"));
    }

    #[test]
    fn metadata_rejects_newlines() {
        let g = Grid::new([1, 1, 1], [1.0; 3]).unwrap();
        let m = VectorField::uniform(&g, [1.0, 0.0, 0.0]);
        let meta = BTreeMap::from([("a".to_string(), "x\ny".to_string())]);
        assert!(snapshot_text(&m, &g, 0.0, &meta).is_err());
    }
}
