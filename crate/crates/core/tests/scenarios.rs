use std::path::Path;

use ipmsm_hfi::harness::{load_experiment, ExperimentKind};
use ipmsm_hfi::sim::{FeedbackSource, Mode, ScenarioConfig};

fn scenarios() -> std::path::PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR")).join("../../scenarios")
}

#[test]
fn every_shipped_scenario_loads() {
    let mut n = 0;
    for entry in std::fs::read_dir(scenarios()).unwrap() {
        let path = entry.unwrap().path();
        if path.extension().is_some_and(|e| e == "scenario") {
            let spec = load_experiment(&path, None).unwrap_or_else(|e| panic!("{}: {e}", path.display()));
            spec.scenario.validate().unwrap();
            n += 1;
        }
    }
    assert!(n >= 9, "{n}");
}

#[test]
fn closed_loop_file_matches_default_scenario() {
    let spec = load_experiment(&scenarios().join("closed_loop.scenario"), None).unwrap();
    assert_eq!(spec.kind, ExperimentKind::CompareRmsd);
    let d = ScenarioConfig::default();
    let s = &spec.scenario;
    assert_eq!(s.ts, d.ts);
    assert_eq!(s.duration, d.duration);
    assert_eq!(s.injection.epsilon, d.injection.epsilon);
    assert_eq!(s.proposed.gamma_alpha, d.proposed.gamma_alpha);
    assert_eq!(s.controller.omega_ref, d.controller.omega_ref);
    assert_eq!(s.feedback, FeedbackSource::Proposed);
    assert!(matches!(s.mode, Mode::ClosedLoop));
    assert_eq!(spec.window, (5.0, 10.0));
    assert_eq!(spec.bands.proposed_rmsd, Some((0.06, 0.12)));
}

#[test]
fn includes_inherit_and_override() {
    let spec = load_experiment(&scenarios().join("injection_off.scenario"), None).unwrap();
    assert!(!spec.scenario.injection_enabled);
    assert_eq!(spec.scenario.feedback, FeedbackSource::Sensor);
    assert!(!spec.bands.require_ordering);
    assert_eq!(spec.scenario.duration, 10.0);
}

#[test]
fn reversal_scenario_crosses_zero_speed() {
    let spec = load_experiment(&scenarios().join("reversal.scenario"), None).unwrap();
    let Mode::DrivenSpeed(profile) = &spec.scenario.mode else { panic!("not driven") };
    let w = 20.0 * std::f64::consts::TAU / 60.0;
    assert!((profile.speed(1.0) - w).abs() < 1e-12);
    assert!((profile.speed(3.5)).abs() < 1e-12);
    assert!((profile.speed(6.0) + w).abs() < 1e-12);
}
