use bsip::estimate::Method;
use bsip::invdyn::Degree;
use bsip::lls::norm;
use bsip::pipeline::{report_json, run_trial, write_trial_outputs, RunConfig, TrialReport};
use bsip::sync::ForceRecord;
use bsip::synth::{generate, Scenario};
use bsip::{Error, Stage};

fn noisy(seed: u64, nu: i64) -> Scenario {
    Scenario { seed, nu, sigma_marker: 0.001, sigma_force: 2.0, ..Scenario::default() }
}

fn cell(report: &TrialReport, m: Method, d: Degree) -> f64 {
    report.results.iter().find(|e| e.result.method == m && e.result.degree == d).unwrap().result.epsilon
}

#[test]
fn noisy_trial_end_to_end() {
    let (trial, truth) = generate(&noisy(42, 137)).unwrap();
    let run = run_trial(&trial, &truth.table, &RunConfig::default()).unwrap();
    let r = &run.report;
    assert!((r.nu - 137).abs() <= 1, "nu {}", r.nu);
    assert!((r.alpha4 - 0.45).abs() < 0.02, "alpha4 {}", r.alpha4);
    assert_eq!(r.results.len(), 9);
    assert!(r.residual_force_after <= r.residual_force_before * 1.001);
    assert!(r.valid && r.r4_tilde > 0.0 && r.r4_tilde <= 1.0);
    for e in &r.results {
        assert!((0.0..=1.0).contains(&e.result.epsilon));
        assert_eq!(e.nu, r.nu);
    }
    assert!(cell(r, Method::A, Degree::Two) < cell(r, Method::A, Degree::Zero));

    let dir = tempfile::tempdir().unwrap();
    write_trial_outputs(&run, dir.path()).unwrap();
    for f in ["report.json", "eta.csv", "ycom.csv", "loads_A2.csv", "scatter_B0.csv"] {
        assert!(dir.path().join(f).is_file(), "{f} missing");
    }
    let back: TrialReport =
        serde_json::from_str(&std::fs::read_to_string(dir.path().join("report.json")).unwrap()).unwrap();
    assert_eq!(report_json(&back), report_json(r));
}

#[test]
fn detected_onset_matches_the_true_push_off() {
    let (mut trial, truth) = generate(&noisy(5, -60)).unwrap();
    trial.events = None;
    let run = run_trial(&trial, &truth.table, &RunConfig::default()).unwrap();
    let e = run.report.events;
    assert!((e.t0 - truth.events.t0).abs() < 0.05, "t0 {} vs {}", e.t0, truth.events.t0);
    // The generated motion decelerates faster than g instead of leaving the
    // plate, so the first unloading is found before the true end.
    assert!(e.tf > e.t0 + 0.1 && e.tf <= truth.events.tf, "tf {} vs {}", e.tf, truth.events.tf);
}

#[test]
fn method_c_alone_runs_without_a_solve() {
    let (trial, truth) = generate(&noisy(3, 0)).unwrap();
    let cfg = RunConfig::new([Method::C], [Degree::One]).unwrap();
    let run = run_trial(&trial, &truth.table, &cfg).unwrap();
    let e = &run.report.results[0].result;
    assert_eq!(e.fixed, [true; 4]);
    assert_eq!(e.inertias, run.report.reference_inertias);
    assert!(run.scatter.is_empty());
}

#[test]
fn force_record_shorter_than_the_window() {
    let (mut trial, truth) = generate(&noisy(8, 0)).unwrap();
    let keep = (truth.events.tf * 1000.0) as usize - 50;
    let f = &trial.force;
    trial.force =
        ForceRecord::new(f.start, f.rate, f.rx[..keep].to_vec(), f.ry[..keep].to_vec(), f.c[..keep].to_vec()).unwrap();
    let err = run_trial(&trial, &truth.table, &RunConfig::default()).unwrap_err();
    assert_eq!(err.stage(), Some(Stage::Synchronization));
    assert!(matches!(err.root(), Error::Range(_)), "{err}");
}

#[test]
fn synchronized_com_height_tracks_the_force_integral() {
    let (trial, truth) = generate(&noisy(11, 250)).unwrap();
    let run = run_trial(&trial, &truth.table, &RunConfig::default()).unwrap();
    let y = &run.ycom;
    let rmse = |a: &[f64], b: &[f64]| {
        let d: Vec<f64> = a.iter().zip(b).map(|(p, q)| p - q).collect();
        norm(&d) / (d.len() as f64).sqrt()
    };
    let synced = rmse(&y.from_force, &y.synchronized);
    let unsynced = rmse(&y.from_force, &y.unsynchronized);
    assert!(synced < 0.2 * unsynced, "{synced} vs {unsynced}");
}

#[test]
fn eta_curve_has_a_single_valley() {
    let (trial, truth) = generate(&Scenario { nu: -120, ..Scenario::default() }.noiseless()).unwrap();
    let run = run_trial(&trial, &truth.table, &RunConfig::default()).unwrap();
    let eta: Vec<f64> = run.eta_curve.iter().map(|p| p.eta).collect();
    let k = (0..eta.len()).min_by(|&a, &b| eta[a].total_cmp(&eta[b])).unwrap();
    assert!((run.eta_curve[k].alpha4 - truth.alpha4).abs() < 0.01);
    let tol = 1e-9 * eta[0].max(eta[eta.len() - 1]);
    assert!(eta[..=k].windows(2).all(|w| w[1] <= w[0] + tol));
    assert!(eta[k..].windows(2).all(|w| w[1] >= w[0] - tol));
}
