//! Configuration parsing, run manifests and text outputs.
//!
//! Snapshot format, one particle per row:
//!
//! ```text
//! # splinempm-snapshot v1
//! id,x,y,z,vx,vy,vz,hydrostatic_stress,von_mises,eps_plastic,volume
//! 0,1.2500000000000000e-1,...
//! ```

use std::fmt::Write as _;
use std::fs;
use std::io::Write as _;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::fbar::ProjectionMode;
use crate::particles::MaterialPoint;
use crate::scenes::{evaluate_metrics, scene_by_name, SceneConfig, SCENE_NAMES};
use crate::solver::{run, RunSummary, SimState};
use crate::tensor::{hydrostatic, von_mises};
use crate::{Error, Result};

pub const SNAPSHOT_VERSION: &str = "# splinempm-snapshot v1";
pub const SNAPSHOT_COLUMNS: [&str; 11] = [
    "id",
    "x",
    "y",
    "z",
    "vx",
    "vy",
    "vz",
    "hydrostatic_stress",
    "von_mises",
    "eps_plastic",
    "volume",
];

fn line_of(text: &str, offset: usize) -> usize {
    text[..offset.min(text.len())].matches('\n').count() + 1
}

fn offending_key(message: &str) -> Option<String> {
    let start = message.find('`')? + 1;
    let len = message[start..].find('`')?;
    Some(message[start..start + len].to_string())
}

/// Parses and validates a TOML scene description.
///
/// Malformed text yields [`Error::Syntax`] with the line number; unknown or
/// invalid keys yield [`Error::Config`] naming the key.
pub fn parse_config(text: &str) -> Result<SceneConfig> {
    let value: toml::Table = text.parse().map_err(|e: toml::de::Error| Error::Syntax {
        line: e.span().map(|s| line_of(text, s.start)).unwrap_or(0),
        message: e.message().to_string(),
    })?;
    let cfg = SceneConfig::deserialize(value).map_err(|e| {
        let message = e.message().to_string();
        Error::Config {
            key: offending_key(&message).unwrap_or_else(|| "config".into()),
            message,
        }
    })?;
    cfg.validate()?;
    Ok(cfg)
}

pub fn config_to_string(cfg: &SceneConfig) -> String {
    toml::to_string(cfg).expect("scene configs serialize")
}

pub fn read_config(path: &Path) -> Result<SceneConfig> {
    let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    parse_config(&text)
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum SceneSource {
    Named { name: String },
    File { path: PathBuf },
}

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Overrides {
    #[serde(skip_serializing_if = "Option::is_none")]
    pub degree: Option<usize>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub projection: Option<ProjectionMode>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub level: Option<u32>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub dt: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub t_end: Option<f64>,
}

/// Everything needed to reproduce a run.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct RunManifest {
    pub scene: SceneSource,
    pub overrides: Overrides,
    pub out_dir: PathBuf,
    pub cadence: Option<u64>,
    /// Always true: the solver has no random or parallel nondeterminism.
    pub deterministic: bool,
}

impl RunManifest {
    pub fn new(scene: SceneSource, out_dir: impl Into<PathBuf>) -> Self {
        Self {
            scene,
            overrides: Overrides::default(),
            out_dir: out_dir.into(),
            cadence: None,
            deterministic: true,
        }
    }

    /// Builds the scene configuration with all overrides applied.
    pub fn resolve(&self) -> Result<SceneConfig> {
        let o = &self.overrides;
        let mut cfg = match &self.scene {
            SceneSource::Named { name } => scene_by_name(name, o.level, o.degree, o.projection)?,
            SceneSource::File { path } => {
                if o.level.is_some() {
                    return Err(Error::config("level", "only applies to named scenes"));
                }
                let mut cfg = read_config(path)?;
                if let Some(p) = o.degree {
                    cfg.grid.degree = p;
                }
                if let Some(m) = o.projection {
                    cfg.grid.projection = m;
                }
                cfg
            }
        };
        if let Some(dt) = o.dt {
            cfg.time.dt = dt;
        }
        if let Some(t) = o.t_end {
            cfg.time.t_end = t;
        }
        if let Some(c) = self.cadence {
            cfg.time.cadence = c;
        }
        cfg.time.validate()?;
        cfg.basis()?;
        Ok(cfg)
    }
}

/// Result of [`execute`].
#[derive(Debug)]
pub struct RunOutcome {
    pub config: SceneConfig,
    pub summary: RunSummary,
    pub metrics: Vec<(String, f64)>,
    pub state: SimState,
    pub warnings: Vec<String>,
}

/// Runs a manifest, writing `manifest.toml`, `scene.toml`, one snapshot per
/// cadence step, `series.csv` and `final.csv` into the output directory.
pub fn execute(manifest: &RunManifest) -> Result<RunOutcome> {
    let config = manifest.resolve()?;
    let mut state = config.build()?;
    let warnings = config.warnings();
    let out = &manifest.out_dir;
    fs::create_dir_all(out).map_err(|e| Error::io(out, e))?;
    write_text(
        &out.join("manifest.toml"),
        &toml::to_string(manifest).expect("manifest serializes"),
    )?;
    write_text(&out.join("scene.toml"), &config_to_string(&config))?;

    let names: Vec<String> = config.metric_names().into_iter().map(String::from).collect();
    let mut series = MetricSeries::new(names.clone());
    series.push(&state, evaluate_metrics(&config, &state));
    let mut observer = |s: &SimState| -> Result<()> {
        write_snapshot(&s.particles, &out.join(format!("snapshot_{:08}.csv", s.step_count())))?;
        series.push(s, evaluate_metrics(&config, s));
        Ok(())
    };
    let summary = run(&mut state, &config.time, &mut [&mut observer])?;
    write_series(&series, &out.join("series.csv"))?;
    write_snapshot(&state.particles, &out.join("final.csv"))?;
    let metrics = names.into_iter().zip(evaluate_metrics(&config, &state)).collect();
    Ok(RunOutcome {
        config,
        summary,
        metrics,
        state,
        warnings,
    })
}

fn write_text(path: &Path, text: &str) -> Result<()> {
    fs::write(path, text).map_err(|e| Error::io(path, e))
}

fn fmt_f64(x: f64) -> String {
    format!("{x:.16e}")
}

pub fn snapshot_to_string(particles: &[MaterialPoint]) -> String {
    let mut s = String::with_capacity(64 + particles.len() * 256);
    s.push_str(SNAPSHOT_VERSION);
    s.push('\n');
    s.push_str(&SNAPSHOT_COLUMNS.join(","));
    s.push('\n');
    for (id, p) in particles.iter().enumerate() {
        let vals = [
            p.position[0],
            p.position[1],
            p.position[2],
            p.velocity[0],
            p.velocity[1],
            p.velocity[2],
            hydrostatic(&p.stress),
            von_mises(&p.stress),
            p.eps_plastic,
            p.volume,
        ];
        let _ = write!(s, "{id}");
        for v in vals {
            s.push(',');
            s.push_str(&fmt_f64(v));
        }
        s.push('\n');
    }
    s
}

pub fn write_snapshot(particles: &[MaterialPoint], path: &Path) -> Result<()> {
    let mut f = fs::File::create(path).map_err(|e| Error::io(path, e))?;
    f.write_all(snapshot_to_string(particles).as_bytes())
        .map_err(|e| Error::io(path, e))
}

/// One parsed snapshot row.
#[derive(Clone, Debug, PartialEq)]
pub struct SnapshotRow {
    pub id: usize,
    pub position: [f64; 3],
    pub velocity: [f64; 3],
    pub hydrostatic_stress: f64,
    pub von_mises: f64,
    pub eps_plastic: f64,
    pub volume: f64,
}

pub fn parse_snapshot(text: &str) -> Result<Vec<SnapshotRow>> {
    let mut lines = text.lines();
    match lines.next() {
        Some(v) if v == SNAPSHOT_VERSION => {}
        Some(v) => return Err(Error::Snapshot(format!("unsupported version line `{v}`"))),
        None => return Err(Error::Snapshot("empty file".into())),
    }
    if lines.next() != Some(SNAPSHOT_COLUMNS.join(",").as_str()) {
        return Err(Error::Snapshot("unexpected column header".into()));
    }
    let mut rows = Vec::new();
    for (n, line) in lines.enumerate() {
        let bad = |m: &str| Error::Snapshot(format!("row {}: {m}", n + 1));
        let fields: Vec<&str> = line.split(',').collect();
        if fields.len() != SNAPSHOT_COLUMNS.len() {
            return Err(bad("wrong number of columns"));
        }
        let id = fields[0].parse().map_err(|_| bad("bad id"))?;
        let mut v = [0.0; 10];
        for (slot, f) in v.iter_mut().zip(&fields[1..]) {
            *slot = f.parse().map_err(|_| bad("bad number"))?;
        }
        rows.push(SnapshotRow {
            id,
            position: [v[0], v[1], v[2]],
            velocity: [v[3], v[4], v[5]],
            hydrostatic_stress: v[6],
            von_mises: v[7],
            eps_plastic: v[8],
            volume: v[9],
        });
    }
    Ok(rows)
}

pub fn read_snapshot(path: &Path) -> Result<Vec<SnapshotRow>> {
    let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    parse_snapshot(&text)
}

/// Named metrics sampled over time.
#[derive(Clone, Debug, Default, PartialEq)]
pub struct MetricSeries {
    pub names: Vec<String>,
    pub rows: Vec<(u64, f64, Vec<f64>)>,
}

impl MetricSeries {
    pub fn new(names: Vec<String>) -> Self {
        Self {
            names,
            rows: Vec::new(),
        }
    }

    pub fn push(&mut self, state: &SimState, values: Vec<f64>) {
        self.rows.push((state.step_count(), state.time(), values));
    }

    pub fn to_csv(&self) -> String {
        let mut s = String::from("step,time");
        for n in &self.names {
            s.push(',');
            s.push_str(n);
        }
        s.push('\n');
        for (step, t, vals) in &self.rows {
            let _ = write!(s, "{step},{}", fmt_f64(*t));
            for v in vals {
                s.push(',');
                s.push_str(&fmt_f64(*v));
            }
            s.push('\n');
        }
        s
    }
}

pub fn write_series(series: &MetricSeries, path: &Path) -> Result<()> {
    write_text(path, &series.to_csv())
}

#[derive(Clone, Debug, PartialEq)]
pub struct ConvergenceRow {
    pub level: u32,
    pub h: f64,
    pub error: f64,
    /// `log(e_{N-1}/e_N) / log(h_{N-1}/h_N)`; `None` on the first row.
    pub order: Option<f64>,
}

/// Observed convergence orders between successive runs, given as `(level, h,
/// error)` in refinement order. Non-monotone errors give negative orders.
pub fn convergence_report(runs: &[(u32, f64, f64)]) -> Vec<ConvergenceRow> {
    runs.iter()
        .enumerate()
        .map(|(i, &(level, h, error))| ConvergenceRow {
            level,
            h,
            error,
            order: (i > 0).then(|| {
                let (_, h0, e0) = runs[i - 1];
                (e0 / error).ln() / (h0 / h).ln()
            }),
        })
        .collect()
}

pub fn convergence_csv(rows: &[ConvergenceRow]) -> String {
    let mut s = String::from("level,h,error,observed_order\n");
    for r in rows {
        let order = r.order.map(fmt_f64).unwrap_or_default();
        let _ = writeln!(s, "{},{},{},{}", r.level, fmt_f64(r.h), fmt_f64(r.error), order);
    }
    s
}

pub fn list_scenes() -> &'static [&'static str] {
    &SCENE_NAMES
}
