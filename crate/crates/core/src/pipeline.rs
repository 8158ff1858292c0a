//! Per-trial and batch orchestration.
//!
//! A trial runs: near-interpolating fit, lag and `alpha4` scan, smoothing
//! selection against the residual ground reaction at that lag, a second
//! scan on the selected fit, inverse dynamics, then every requested
//! `(method, degree)` estimate. Errors carry the stage they came from.

use std::collections::BTreeSet;
use std::path::{Path, PathBuf};

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result, Stage, StageExt};
use crate::estimate::{
    aggregate, estimate, gyration_filter, method_b_scatter, BatchSummary, EstimationResult, Method, TrialOutcome,
};
use crate::invdyn::{intersegment_moments, joint_forces, joint_torques, residual_torque, Degree, PushOff};
use crate::io;
use crate::model::{segment_lengths, AnthropometricTable, BodyModel, MarkerRecord, LANDMARKS, SEGMENTS};
use crate::spline::{select_parameters, SmoothedKinematics, PROVISIONAL_SMOOTHING};
use crate::sync::{
    alpha4_least_squares, detect_events, residual_force_norm, synchronize, ycom_three_ways, ComHeights, EtaPoint,
    Events, ForceRecord, LagScan, PushOffWindow, SyncResult, LAG_RANGE,
};

pub const REPORT_SCHEMA: u32 = 1;

/// One squat jump: camera landmarks, plate record and subject mass.
#[derive(Debug, Clone, PartialEq)]
pub struct Trial {
    pub markers: MarkerRecord,
    pub force: ForceRecord,
    /// Push-off events in the force clock; detected from `R_y` when absent.
    pub events: Option<Events>,
    pub mass: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct RunConfig {
    pub methods: BTreeSet<Method>,
    pub degrees: BTreeSet<Degree>,
    /// Skip smoothing selection and keep the near-interpolating fit.
    pub fixed_smoothing: Option<[f64; LANDMARKS]>,
}

impl Default for RunConfig {
    fn default() -> Self {
        RunConfig {
            methods: Method::ALL.into_iter().collect(),
            degrees: Degree::ALL.into_iter().collect(),
            fixed_smoothing: None,
        }
    }
}

impl RunConfig {
    pub fn new(methods: impl IntoIterator<Item = Method>, degrees: impl IntoIterator<Item = Degree>) -> Result<Self> {
        let cfg = RunConfig {
            methods: methods.into_iter().collect(),
            degrees: degrees.into_iter().collect(),
            fixed_smoothing: None,
        };
        if cfg.methods.is_empty() || cfg.degrees.is_empty() {
            return Err(Error::Input("select at least one method and one degree".into()));
        }
        Ok(cfg)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SyncSummary {
    pub nu: i64,
    pub alpha4: f64,
    pub eta: f64,
}

impl From<&SyncResult> for SyncSummary {
    fn from(s: &SyncResult) -> Self {
        SyncSummary { nu: s.nu, alpha4: s.alpha4, eta: s.eta }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ResultEntry {
    #[serde(flatten)]
    pub result: EstimationResult,
    pub alpha4: f64,
    pub nu: i64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrialReport {
    pub schema: u32,
    pub mass: f64,
    pub events: Events,
    pub window_samples: usize,
    pub nu: i64,
    pub alpha4: f64,
    pub eta: f64,
    /// Trunk ratio of the supplied table, for comparison.
    pub alpha4_reference: f64,
    pub alpha4_least_squares: Option<f64>,
    pub provisional: SyncSummary,
    pub smoothing: [f64; LANDMARKS],
    pub residual_force_before: f64,
    pub residual_force_after: f64,
    pub lengths: [f64; SEGMENTS],
    pub segment_masses: [f64; SEGMENTS],
    pub reference_inertias: [f64; SEGMENTS],
    pub results: Vec<ResultEntry>,
    /// Trunk gyration ratio used by the population filter.
    pub r4_tilde: f64,
    pub valid: bool,
    pub warnings: Vec<String>,
}

/// Joint loads for one `(method, degree)` inertia set.
#[derive(Debug, Clone, PartialEq)]
pub struct LoadTable {
    pub method: Method,
    pub degree: Degree,
    pub t: Vec<f64>,
    pub forces: Vec<[crate::geom::Vec2; LANDMARKS]>,
    pub torques: Vec<[f64; LANDMARKS]>,
    pub residuals: [Vec<f64>; 3],
}

#[derive(Debug, Clone)]
pub struct TrialRun {
    pub report: TrialReport,
    pub eta_curve: Vec<EtaPoint>,
    pub ycom: ComHeights,
    pub loads: Vec<LoadTable>,
    pub scatter: Vec<(Degree, Vec<(f64, f64)>)>,
}

fn scan(
    kin: &SmoothedKinematics,
    force: &ForceRecord,
    window: PushOffWindow,
    model: &BodyModel,
) -> Result<(LagScan, SyncResult)> {
    let scan = LagScan::new(kin, force, window, model, LAG_RANGE)?;
    let sync = synchronize(&scan)?;
    Ok((scan, sync))
}

pub fn run_trial(trial: &Trial, table: &AnthropometricTable, config: &RunConfig) -> Result<TrialRun> {
    let mut warnings = Vec::new();
    let lengths = segment_lengths(&trial.markers.frames).stage(Stage::Ingest)?;
    warnings.extend(lengths.warnings());
    let lengths = lengths.lengths;
    let model = BodyModel::new(table, trial.mass).stage(Stage::Ingest)?;
    let reference = table.inertias(trial.mass, &lengths).stage(Stage::Ingest)?;

    let events = match trial.events {
        Some(e) => e,
        None => detect_events(&trial.force).stage(Stage::Events)?,
    };
    let window = PushOffWindow::new(&trial.force, events).stage(Stage::Synchronization)?;

    let provisional_params = config.fixed_smoothing.unwrap_or([PROVISIONAL_SMOOTHING; LANDMARKS]);
    let kin = SmoothedKinematics::fit(&trial.markers, provisional_params).stage(Stage::Smoothing)?;
    let (_, first) = scan(&kin, &trial.force, window, &model).stage(Stage::Synchronization)?;

    let synced = model.with_trunk_alpha(first.alpha4);
    let objective = |k: &SmoothedKinematics| residual_force_norm(k, &trial.force, window, &synced, first.nu);
    let before = objective(&kin).stage(Stage::Selection)?;
    let kin = match config.fixed_smoothing {
        Some(_) => kin,
        None => select_parameters(&trial.markers, kin, objective).stage(Stage::Selection)?.0,
    };

    let (lag_scan, sync) = scan(&kin, &trial.force, window, &model).stage(Stage::Synchronization)?;
    let model = model.with_trunk_alpha(sync.alpha4);
    let after = residual_force_norm(&kin, &trial.force, window, &model, sync.nu).stage(Stage::Selection)?;
    let alpha4_ls = match alpha4_least_squares(&lag_scan, sync.nu) {
        Ok(fit) => {
            if fit.clamped {
                warnings.push(format!("least-squares alpha4 {} clamped to [0, 1]", fit.unclamped));
            }
            Some(fit.alpha4)
        }
        Err(e) => {
            warnings.push(format!("least-squares alpha4 unavailable: {e}"));
            None
        }
    };
    let ycom = ycom_three_ways(&lag_scan, &trial.force, window, &sync).stage(Stage::Synchronization)?;

    let push = PushOff::assemble(&kin, &trial.force, window, sync.nu, model).stage(Stage::InverseDynamics)?;
    let forces = joint_forces(&push);
    let moments = intersegment_moments(&push, &forces);

    let mut results = Vec::new();
    let mut loads = Vec::new();
    for &method in &config.methods {
        for &degree in &config.degrees {
            let r = estimate(method, degree, &push, &moments, &reference, lengths[3]).stage(Stage::Estimation)?;
            if r.inertias.iter().any(|i| *i < 0.0) {
                warnings.push(format!("method {method} degree {degree}: negative inertia"));
            }
            loads.push(LoadTable {
                method,
                degree,
                t: push.times.clone(),
                forces: forces.clone(),
                torques: joint_torques(&push, &moments, &r.inertias),
                residuals: Degree::ALL.map(|d| residual_torque(&push, &moments, &r.inertias, d)),
            });
            results.push(ResultEntry { result: r, alpha4: sync.alpha4, nu: sync.nu });
        }
    }
    let mut scatter = Vec::new();
    if config.methods.contains(&Method::B) {
        for &degree in &config.degrees {
            scatter.push((degree, method_b_scatter(&push, &moments, degree, &reference).stage(Stage::Estimation)?));
        }
    }

    let r4_tilde = filter_ratio(&results);
    let report = TrialReport {
        schema: REPORT_SCHEMA,
        mass: trial.mass,
        events,
        window_samples: window.len(),
        nu: sync.nu,
        alpha4: sync.alpha4,
        eta: sync.eta,
        alpha4_reference: table.segments()[3].alpha,
        alpha4_least_squares: alpha4_ls,
        provisional: SyncSummary::from(&first),
        smoothing: kin.params(),
        residual_force_before: before,
        residual_force_after: after,
        lengths,
        segment_masses: model.masses,
        reference_inertias: reference,
        results,
        r4_tilde,
        valid: crate::estimate::gyration_ratio_valid(r4_tilde),
        warnings,
    };
    Ok(TrialRun { report, eta_curve: sync.curve, ycom, loads, scatter })
}

/// Trunk gyration ratio from Method B at the highest degree run, else
/// Method A, else Method C.
fn filter_ratio(results: &[ResultEntry]) -> f64 {
    [Method::B, Method::A, Method::C]
        .iter()
        .find_map(|m| {
            results.iter().filter(|r| r.result.method == *m).max_by_key(|r| r.result.degree).map(|r| r.result.r4_tilde)
        })
        .unwrap_or(f64::NAN)
}

pub fn report_json(report: &TrialReport) -> String {
    serde_json::to_string_pretty(report).expect("report serializes") + "\n"
}

/// Writes `report.json`, `eta.csv`, `ycom.csv`, `loads_<M><d>.csv` and
/// `scatter_B<d>.csv` into `dir`.
pub fn write_trial_outputs(run: &TrialRun, dir: &Path) -> Result<()> {
    let f = io::fmt;
    io::write_file(&dir.join("report.json"), report_json(&run.report).as_bytes())?;
    io::write_csv(
        &dir.join("eta.csv"),
        &["alpha4", "eta", "nu"],
        run.eta_curve.iter().map(|p| vec![f(p.alpha4), f(p.eta), p.nu.to_string()]),
    )?;
    let y = &run.ycom;
    io::write_csv(
        &dir.join("ycom.csv"),
        &["t", "from_force", "synchronized", "unsynchronized"],
        (0..y.t.len()).map(|i| vec![f(y.t[i]), f(y.from_force[i]), f(y.synchronized[i]), f(y.unsynchronized[i])]),
    )?;
    let mut header = vec!["t".to_string()];
    header.extend((1..=5).map(|k| format!("R_x{k}")));
    header.extend((1..=5).map(|k| format!("R_y{k}")));
    header.extend((1..=5).map(|k| format!("C_{k}")));
    header.extend(["Ctilde0", "Ctilde1", "Ctilde2"].map(String::from));
    let header: Vec<&str> = header.iter().map(String::as_str).collect();
    for l in &run.loads {
        let rows = (0..l.t.len()).map(|i| {
            let mut r = vec![f(l.t[i])];
            r.extend(l.forces[i].iter().map(|v| f(v.x)));
            r.extend(l.forces[i].iter().map(|v| f(v.y)));
            r.extend(l.torques[i].iter().map(|v| f(*v)));
            r.extend(l.residuals.iter().map(|c| f(c[i])));
            r
        });
        io::write_csv(&dir.join(format!("loads_{}{}.csv", l.method, l.degree)), &header, rows)?;
    }
    for (d, pts) in &run.scatter {
        io::write_csv(
            &dir.join(format!("scatter_B{d}.csv")),
            &["x", "y"],
            pts.iter().map(|(x, y)| vec![f(*x), f(*y)]),
        )?;
    }
    Ok(())
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrialFailure {
    pub trial: String,
    pub stage: Option<String>,
    pub message: String,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BatchReport {
    pub schema: u32,
    pub trials_total: usize,
    pub failed: Vec<TrialFailure>,
    pub retained: Vec<String>,
    pub removed: Vec<String>,
    pub summary: BatchSummary,
}

/// Runs every trial subdirectory of `dir` and writes per-trial outputs
/// under `out/<trial>/` plus `summary.json`, `alpha4.csv`, `r4_tilde.csv`
/// and `log10.csv`. Failed trials are listed and skipped.
pub fn run_batch(
    dir: &Path,
    table: &AnthropometricTable,
    default_mass: Option<f64>,
    config: &RunConfig,
    out: &Path,
) -> Result<BatchReport> {
    let dirs = io::trial_dirs(dir).stage(Stage::Ingest)?;
    if dirs.is_empty() {
        return Err(Error::Input(format!("{}: no trial directories", dir.display())));
    }
    let name = |p: &PathBuf| p.file_name().map(|n| n.to_string_lossy().into_owned()).unwrap_or_default();
    let runs: Vec<(String, Result<TrialRun>)> = dirs
        .par_iter()
        .map(|d| {
            let run =
                io::load_trial_dir(d, default_mass).stage(Stage::Ingest).and_then(|t| run_trial(&t, table, config));
            (name(d), run)
        })
        .collect();

    let mut failed = Vec::new();
    let mut outcomes = Vec::new();
    for (trial, run) in runs {
        match run {
            Ok(run) => {
                write_trial_outputs(&run, &out.join(&trial)).stage(Stage::Output)?;
                outcomes.push(TrialOutcome {
                    name: trial,
                    alpha4: run.report.alpha4,
                    r4_tilde: run.report.r4_tilde,
                    results: run.report.results.into_iter().map(|r| r.result).collect(),
                });
            }
            Err(e) => failed.push(TrialFailure {
                trial,
                stage: e.stage().map(|s| s.to_string()),
                message: e.root().to_string(),
            }),
        }
    }
    let trials_total = dirs.len();
    let names: Vec<String> = outcomes.iter().map(|o| o.name.clone()).collect();
    let filtered = gyration_filter(outcomes, |o| o.r4_tilde);
    let retained: Vec<String> = filtered.retained.iter().map(|o| o.name.clone()).collect();
    let removed = names.into_iter().filter(|n| !retained.contains(n)).collect();
    let summary = aggregate(&filtered.retained)?;

    let f = io::fmt;
    io::write_csv(
        &out.join("alpha4.csv"),
        &["trial", "alpha4"],
        filtered.retained.iter().map(|o| vec![o.name.clone(), f(o.alpha4)]),
    )?;
    io::write_csv(
        &out.join("r4_tilde.csv"),
        &["trial", "r4_tilde"],
        filtered.retained.iter().map(|o| vec![o.name.clone(), f(o.r4_tilde)]),
    )?;
    io::write_csv(
        &out.join("log10.csv"),
        &["trial", "method", "degree", "log10_epsilon", "log10_one_minus_r2"],
        filtered.retained.iter().flat_map(|o| {
            o.results.iter().map(move |r| {
                vec![
                    o.name.clone(),
                    r.method.to_string(),
                    r.degree.to_string(),
                    f(r.epsilon.log10()),
                    f((1.0 - r.r2).log10()),
                ]
            })
        }),
    )?;
    let report = BatchReport { schema: REPORT_SCHEMA, trials_total, failed, retained, removed, summary };
    let json = serde_json::to_string_pretty(&report).expect("summary serializes") + "\n";
    io::write_file(&out.join("summary.json"), json.as_bytes())?;
    Ok(report)
}
