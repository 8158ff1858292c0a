//! File formats.
//!
//! Markers: `t,x1,y1,x2,y2,x3,y3,x4,y4,x5,y5` at 100 Hz, metres.
//! Forces: `t,Rx,Ry,C` at 1000 Hz, newtons and newton-metres.
//! Floats are written with the shortest representation that parses back to
//! the same value, so ingest then emit reproduces a file byte for byte.
//! Error line numbers are 1-based with the header on line 1.

use std::fs;
use std::io::{Read, Write};
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::geom::Vec2;
use crate::model::{AnthropometricTable, MarkerRecord, LANDMARKS};
use crate::pipeline::Trial;
use crate::sync::{Events, ForceRecord};
use crate::synth::Scenario;

pub const MARKER_RATE: f64 = 100.0;
pub const FORCE_RATE: f64 = 1000.0;
/// Allowed deviation of a time stamp from the uniform grid (s).
pub const TIME_TOLERANCE: f64 = 1e-6;

pub const MARKER_HEADER: [&str; 11] = ["t", "x1", "y1", "x2", "y2", "x3", "y3", "x4", "y4", "x5", "y5"];
pub const FORCE_HEADER: [&str; 4] = ["t", "Rx", "Ry", "C"];

pub const MARKERS_FILE: &str = "markers.csv";
pub const FORCES_FILE: &str = "forces.csv";
pub const TRIAL_FILE: &str = "trial.toml";

/// Parses a numeric CSV with an exact header into rows, checking the time
/// column against a uniform grid at `rate`.
fn read_table(path: &Path, reader: impl Read, header: &[&str], rate: f64) -> Result<Vec<Vec<f64>>> {
    let perr = |line: u64, message: String| Error::Parse { path: path.to_path_buf(), line: line as usize, message };
    let mut rdr = csv::ReaderBuilder::new().has_headers(false).flexible(true).from_reader(reader);
    let mut records = rdr.records();
    let head = match records.next() {
        Some(r) => r.map_err(|e| perr(1, e.to_string()))?,
        None => return Err(perr(1, "empty file".into())),
    };
    let got: Vec<&str> = head.iter().map(str::trim).collect();
    if got != header {
        return Err(perr(1, format!("expected header {}, found {}", header.join(","), got.join(","))));
    }
    let mut rows: Vec<Vec<f64>> = Vec::new();
    for rec in records {
        let rec = rec.map_err(|e| perr(e.position().map_or(0, |p| p.line()), e.to_string()))?;
        let line = rec.position().map_or(0, |p| p.line());
        if rec.len() != header.len() {
            return Err(perr(line, format!("{} fields, expected {}", rec.len(), header.len())));
        }
        let mut row = Vec::with_capacity(header.len());
        for (field, name) in rec.iter().zip(header) {
            let v: f64 =
                field.trim().parse().map_err(|_| perr(line, format!("column {name}: cannot parse {field:?}")))?;
            if !v.is_finite() {
                return Err(perr(line, format!("column {name}: non-finite value {field:?}")));
            }
            row.push(v);
        }
        if let Some(prev) = rows.last() {
            if !(row[0] > prev[0]) {
                return Err(perr(line, format!("time {} does not increase", row[0])));
            }
        }
        let k = rows.len();
        if let Some(first) = rows.first() {
            let expected = first[0] + k as f64 / rate;
            if (row[0] - expected).abs() > TIME_TOLERANCE {
                return Err(perr(line, format!("time {} off the {rate} Hz grid (expected {expected})", row[0])));
            }
        }
        rows.push(row);
    }
    if rows.len() < 2 {
        return Err(perr(rows.len() as u64 + 1, "need at least 2 samples".into()));
    }
    Ok(rows)
}

fn open(path: &Path) -> Result<fs::File> {
    fs::File::open(path).map_err(|e| Error::io(path, e))
}

pub fn ingest_markers(path: impl AsRef<Path>) -> Result<MarkerRecord> {
    let path = path.as_ref();
    read_markers(path, open(path)?)
}

/// `path` only labels errors.
pub fn read_markers(path: &Path, reader: impl Read) -> Result<MarkerRecord> {
    let rows = read_table(path, reader, &MARKER_HEADER, MARKER_RATE)?;
    let frames = rows
        .iter()
        .map(|r| std::array::from_fn::<Vec2, LANDMARKS, _>(|j| Vec2::new(r[1 + 2 * j], r[2 + 2 * j])))
        .collect();
    MarkerRecord::new(rows[0][0], MARKER_RATE, frames)
}

pub fn ingest_forces(path: impl AsRef<Path>) -> Result<ForceRecord> {
    let path = path.as_ref();
    read_forces(path, open(path)?)
}

pub fn read_forces(path: &Path, reader: impl Read) -> Result<ForceRecord> {
    let rows = read_table(path, reader, &FORCE_HEADER, FORCE_RATE)?;
    let col = |k: usize| rows.iter().map(|r| r[k]).collect();
    ForceRecord::new(rows[0][0], FORCE_RATE, col(1), col(2), col(3))
}

/// Comma-separated table with a one-line header.
pub fn write_csv(path: &Path, header: &[&str], rows: impl IntoIterator<Item = Vec<String>>) -> Result<()> {
    let mut out = String::new();
    out.push_str(&header.join(","));
    out.push('\n');
    for r in rows {
        out.push_str(&r.join(","));
        out.push('\n');
    }
    write_file(path, out.as_bytes())
}

pub fn write_file(path: &Path, bytes: &[u8]) -> Result<()> {
    if let Some(dir) = path.parent() {
        if !dir.as_os_str().is_empty() {
            fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
        }
    }
    let mut f = fs::File::create(path).map_err(|e| Error::io(path, e))?;
    f.write_all(bytes).map_err(|e| Error::io(path, e))
}

pub fn fmt(v: f64) -> String {
    format!("{v}")
}

pub fn write_markers(path: &Path, markers: &MarkerRecord) -> Result<()> {
    let rows = markers.frames.iter().enumerate().map(|(i, f)| {
        let mut r = vec![fmt(markers.time(i))];
        for p in f {
            r.push(fmt(p.x));
            r.push(fmt(p.y));
        }
        r
    });
    write_csv(path, &MARKER_HEADER, rows)
}

pub fn write_forces(path: &Path, force: &ForceRecord) -> Result<()> {
    let rows = (0..force.len()).map(|i| vec![fmt(force.time(i)), fmt(force.rx[i]), fmt(force.ry[i]), fmt(force.c[i])]);
    write_csv(path, &FORCE_HEADER, rows)
}

/// Sidecar of a trial directory.
#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TrialMeta {
    pub t0: Option<f64>,
    pub tf: Option<f64>,
    pub mass: Option<f64>,
}

impl TrialMeta {
    pub fn events(&self) -> Result<Option<Events>> {
        match (self.t0, self.tf) {
            (Some(t0), Some(tf)) => Ok(Some(Events { t0, tf })),
            (None, None) => Ok(None),
            _ => Err(Error::Input("t0 and tf must be given together".into())),
        }
    }
}

fn read_to_string(path: &Path) -> Result<String> {
    fs::read_to_string(path).map_err(|e| Error::io(path, e))
}

fn toml_error(path: &Path, e: impl std::fmt::Display) -> Error {
    Error::Parse { path: path.to_path_buf(), line: 0, message: e.to_string() }
}

pub fn load_trial_meta(path: &Path) -> Result<TrialMeta> {
    toml::from_str(&read_to_string(path)?).map_err(|e| toml_error(path, e))
}

pub fn load_anthropometric_table(path: impl AsRef<Path>) -> Result<AnthropometricTable> {
    let path = path.as_ref();
    let s = read_to_string(path)?;
    AnthropometricTable::from_toml_str(&s).map_err(|e| match e {
        Error::InvalidTable(m) => toml_error(path, m),
        other => other,
    })
}

pub fn load_scenario(path: impl AsRef<Path>) -> Result<Scenario> {
    let path = path.as_ref();
    Scenario::from_toml_str(&read_to_string(path)?)
}

/// Loads `markers.csv`, `forces.csv` and the optional `trial.toml` of `dir`.
/// The sidecar mass wins over `default_mass`.
pub fn load_trial_dir(dir: &Path, default_mass: Option<f64>) -> Result<Trial> {
    let markers = ingest_markers(dir.join(MARKERS_FILE))?;
    let force = ingest_forces(dir.join(FORCES_FILE))?;
    let meta_path = dir.join(TRIAL_FILE);
    let meta = if meta_path.exists() { load_trial_meta(&meta_path)? } else { TrialMeta::default() };
    let mass =
        meta.mass.or(default_mass).ok_or_else(|| Error::Input(format!("{}: no subject mass given", dir.display())))?;
    Ok(Trial { markers, force, events: meta.events()?, mass })
}

/// Writes a trial directory in the layout [`load_trial_dir`] reads.
pub fn write_trial_dir(dir: &Path, trial: &Trial) -> Result<()> {
    write_markers(&dir.join(MARKERS_FILE), &trial.markers)?;
    write_forces(&dir.join(FORCES_FILE), &trial.force)?;
    let meta = TrialMeta { t0: trial.events.map(|e| e.t0), tf: trial.events.map(|e| e.tf), mass: Some(trial.mass) };
    let s = toml::to_string(&meta).map_err(|e| Error::Input(e.to_string()))?;
    write_file(&dir.join(TRIAL_FILE), s.as_bytes())
}

/// Subdirectories of `dir` in name order.
pub fn trial_dirs(dir: &Path) -> Result<Vec<PathBuf>> {
    let mut out: Vec<PathBuf> = fs::read_dir(dir)
        .map_err(|e| Error::io(dir, e))?
        .filter_map(|e| e.ok().map(|e| e.path()))
        .filter(|p| p.is_dir())
        .collect();
    out.sort();
    Ok(out)
}
