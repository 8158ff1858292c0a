use std::path::{Path, PathBuf};
use std::process::ExitCode;

use anyhow::{bail, Context, Result};
use bsip::estimate::Method;
use bsip::invdyn::Degree;
use bsip::io;
use bsip::model::AnthropometricTable;
use bsip::pipeline::{run_batch, run_trial, write_trial_outputs, RunConfig, Trial, TrialReport};
use bsip::sync::Events;
use bsip::synth::{generate, Scenario};
use clap::{Args, Parser, Subcommand};

/// Squat-jump inverse dynamics and segment inertia estimation.
#[derive(Parser)]
#[command(name = "bsip", version)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Process one trial.
    Run(RunArgs),
    /// Process every trial subdirectory of a directory.
    Batch(BatchArgs),
    /// Write synthetic trials with known inertias.
    Synth(SynthArgs),
}

#[derive(Args)]
struct Selection {
    /// Anthropometric table (TOML); Winter's coefficients when omitted.
    #[arg(long)]
    anthro: Option<PathBuf>,
    #[arg(long, value_delimiter = ',', default_value = "A,B,C")]
    methods: Vec<Method>,
    #[arg(long, value_delimiter = ',', default_value = "0,1,2")]
    degrees: Vec<u8>,
}

impl Selection {
    fn table(&self) -> Result<AnthropometricTable> {
        match &self.anthro {
            Some(p) => Ok(io::load_anthropometric_table(p)?),
            None => Ok(AnthropometricTable::winter()),
        }
    }

    fn config(&self) -> Result<RunConfig> {
        let degrees = self.degrees.iter().map(|&d| Degree::try_from(d)).collect::<bsip::Result<Vec<_>>>()?;
        Ok(RunConfig::new(self.methods.iter().copied(), degrees)?)
    }
}

#[derive(Args)]
struct RunArgs {
    #[arg(long)]
    markers: PathBuf,
    #[arg(long)]
    forces: PathBuf,
    /// Subject mass (kg).
    #[arg(long)]
    mass: f64,
    #[command(flatten)]
    selection: Selection,
    /// Push-off onset in the plate clock (s).
    #[arg(long, requires = "tf", conflicts_with = "events")]
    t0: Option<f64>,
    /// Take-off in the plate clock (s).
    #[arg(long, requires = "t0")]
    tf: Option<f64>,
    /// TOML file with `t0` and `tf`; events are detected when neither is given.
    #[arg(long)]
    events: Option<PathBuf>,
    #[arg(long)]
    out: PathBuf,
}

#[derive(Args)]
struct BatchArgs {
    #[arg(long)]
    dir: PathBuf,
    /// Mass for trials whose `trial.toml` does not give one (kg).
    #[arg(long)]
    mass: Option<f64>,
    #[command(flatten)]
    selection: Selection,
    #[arg(long)]
    out: PathBuf,
}

#[derive(Args)]
struct SynthArgs {
    /// Scenario (TOML); built-in defaults when omitted.
    #[arg(long)]
    scenario: Option<PathBuf>,
    #[arg(long)]
    out: PathBuf,
    /// Overrides the scenario seed; trial `k` uses `seed + k`.
    #[arg(long)]
    seed: Option<u64>,
    #[arg(long, default_value_t = 1)]
    count: u64,
}

fn main() -> ExitCode {
    match Cli::parse().command.execute() {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::FAILURE
        }
    }
}

impl Command {
    fn execute(self) -> Result<()> {
        match self {
            Command::Run(a) => run(a),
            Command::Batch(a) => batch(a),
            Command::Synth(a) => synth(a),
        }
    }
}

fn run(a: RunArgs) -> Result<()> {
    let events = match (a.t0, a.tf, &a.events) {
        (Some(t0), Some(tf), _) => Some(Events { t0, tf }),
        (_, _, Some(p)) => match io::load_trial_meta(p)?.events()? {
            Some(e) => Some(e),
            None => bail!("{}: no t0/tf given", p.display()),
        },
        _ => None,
    };
    let trial =
        Trial { markers: io::ingest_markers(&a.markers)?, force: io::ingest_forces(&a.forces)?, events, mass: a.mass };
    let run = run_trial(&trial, &a.selection.table()?, &a.selection.config()?)?;
    write_trial_outputs(&run, &a.out)?;
    print_report(&run.report);
    Ok(())
}

fn print_report(r: &TrialReport) {
    println!("lag {} samples  alpha4 {:.4}  eta {:.4e}  window {} samples", r.nu, r.alpha4, r.eta, r.window_samples);
    println!("cell  epsilon     R2          I1          I2          I3          I4");
    for e in &r.results {
        let x = &e.result;
        println!(
            "{}{}    {:<11.4e} {:<11.6} {:<11.4e} {:<11.4e} {:<11.4e} {:<11.4e}",
            x.method, x.degree, x.epsilon, x.r2, x.inertias[0], x.inertias[1], x.inertias[2], x.inertias[3]
        );
    }
    let status = if r.valid { "valid" } else { "INVALID" };
    println!("trunk gyration ratio {:.4} ({status})", r.r4_tilde);
    for w in &r.warnings {
        println!("warning: {w}");
    }
}

fn batch(a: BatchArgs) -> Result<()> {
    let report = run_batch(&a.dir, &a.selection.table()?, a.mass, &a.selection.config()?, &a.out)?;
    println!(
        "{} trials: {} retained, {} removed by the gyration filter, {} failed",
        report.trials_total,
        report.retained.len(),
        report.removed.len(),
        report.failed.len()
    );
    for f in &report.failed {
        println!("failed {} [{}]: {}", f.trial, f.stage.as_deref().unwrap_or("-"), f.message);
    }
    println!("cell  log10 eps mean (sd)   log10(1 - R2) mean (sd)");
    for c in &report.summary.cells {
        println!(
            "{}{}    {:>6.2} ({:.2})          {:>6.2} ({:.2})",
            c.method,
            c.degree,
            c.log10_epsilon_mean,
            c.log10_epsilon_sd,
            c.log10_one_minus_r2_mean,
            c.log10_one_minus_r2_sd
        );
    }
    for r in &report.summary.ratios {
        println!("{}/{} at {}: {:.3}", r.numerator, r.denominator, r.at, r.value);
    }
    println!("summary written to {}", a.out.join("summary.json").display());
    Ok(())
}

fn synth(a: SynthArgs) -> Result<()> {
    let mut scenario = match &a.scenario {
        Some(p) => io::load_scenario(p)?,
        None => Scenario::default(),
    };
    if let Some(s) = a.seed {
        scenario.seed = s;
    }
    if a.count == 0 {
        bail!("--count must be at least 1");
    }
    let base = scenario.seed;
    for k in 0..a.count {
        scenario.seed = base + k;
        let dir = a.out.join(format!("trial_{k:03}"));
        write_synthetic(&scenario, &dir).with_context(|| format!("trial {k}"))?;
    }
    println!("wrote {} trial(s) under {}", a.count, a.out.display());
    Ok(())
}

fn write_synthetic(scenario: &Scenario, dir: &Path) -> Result<()> {
    let (trial, truth) = generate(scenario)?;
    io::write_trial_dir(dir, &trial)?;
    io::write_file(&dir.join("scenario.toml"), scenario.to_toml_string().as_bytes())?;
    let truth = serde_json::json!({
        "inertias": truth.inertias,
        "alpha4": truth.alpha4,
        "nu": truth.nu,
        "segment_masses": truth.model.masses,
        "events": truth.events,
    });
    io::write_file(&dir.join("truth.json"), (serde_json::to_string_pretty(&truth)? + "\n").as_bytes())?;
    Ok(())
}
