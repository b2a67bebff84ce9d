use std::fs;
use std::path::Path;
use std::process::{Command, Output};

use ipmsm_hfi::harness::trace_csv::{header, read_trace};

const BIN: &str = env!("CARGO_BIN_EXE_ipmsm-hfi");

fn scenarios() -> std::path::PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR")).join("../../scenarios")
}

fn cli(args: &[&str]) -> Output {
    Command::new(BIN)
        .args(args)
        .env_remove("IPMSM_HFI_CONFIG")
        .env_remove("IPMSM_HFI_OUT")
        .env_remove("IPMSM_HFI_SEED")
        .env_remove("IPMSM_HFI_WORKERS")
        .output()
        .unwrap()
}

fn short_run(noise: f64) -> String {
    format!(
        "[motor]\npreset = simulation\n\n[injection]\nv_h = 1\nepsilon = 1e-3\n\n\
         [estimator]\nset = both\nfeedback = proposed\n\n\
         [scenario]\nmode = closed-loop\nduration = 0.2\nsteps_per_period = 50\nnoise_std = {noise}\n\n\
         [experiment]\nkind = run\nwindow = 0.1, 0.2\n"
    )
}

fn write(dir: &Path, name: &str, text: &str) -> String {
    let p = dir.join(name);
    fs::write(&p, text).unwrap();
    p.to_str().unwrap().to_string()
}

#[test]
fn missing_config_is_a_config_error() {
    let o = cli(&["run"]);
    assert_eq!(o.status.code(), Some(2));
}

#[test]
fn unknown_key_reports_line_and_exits_2() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write(dir.path(), "bad.scenario", "[motor]\npreset = simulation\nwobble = 3\n");
    let o = cli(&["--config", &cfg, "run"]);
    assert_eq!(o.status.code(), Some(2));
    let err = String::from_utf8_lossy(&o.stderr);
    assert!(err.contains(":3"), "{err}");
    assert!(err.contains("motor.wobble"), "{err}");
}

#[test]
fn misaligned_step_exits_2() {
    let dir = tempfile::tempdir().unwrap();
    let text = short_run(0.0).replace("steps_per_period = 50", "ts = 3e-5");
    let cfg = write(dir.path(), "mis.scenario", &text);
    let o = cli(&["--config", &cfg, "run"]);
    assert_eq!(o.status.code(), Some(2));
}

#[test]
fn run_writes_a_readable_trace() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write(dir.path(), "run.scenario", &short_run(0.0));
    let out = dir.path().join("out");
    let o = cli(&["--config", &cfg, "--out", out.to_str().unwrap(), "run"]);
    assert_eq!(o.status.code(), Some(0), "{}", String::from_utf8_lossy(&o.stderr));
    let text = fs::read_to_string(out.join("trace.csv")).unwrap();
    assert_eq!(text.lines().next().unwrap(), header().join(","));
    let trace = read_trace(text.as_bytes()).unwrap();
    assert!(trace.records.len() > 100);
    assert!(trace.records.iter().all(|r| r.proposed.is_some() && r.conventional.is_some() && r.equivalent.is_none()));
    let summary: serde_json::Value = serde_json::from_str(&fs::read_to_string(out.join("summary.json")).unwrap()).unwrap();
    assert_eq!(summary["passed"], true);
}

#[test]
fn env_config_and_seed_override() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write(dir.path(), "noisy.scenario", &short_run(0.01));
    let run_with = |seed: &str, out: &str| {
        let o = Command::new(BIN)
            .arg("run")
            .env("IPMSM_HFI_CONFIG", &cfg)
            .env("IPMSM_HFI_OUT", dir.path().join(out))
            .env("IPMSM_HFI_SEED", seed)
            .output()
            .unwrap();
        assert_eq!(o.status.code(), Some(0), "{}", String::from_utf8_lossy(&o.stderr));
        fs::read_to_string(dir.path().join(out).join("trace.csv")).unwrap()
    };
    let a = run_with("1", "a");
    let b = run_with("1", "b");
    let c = run_with("2", "c");
    assert_eq!(a, b);
    assert_ne!(a, c);
}

#[test]
fn failed_band_exits_1_and_prints_measured_values() {
    let dir = tempfile::tempdir().unwrap();
    let text = short_run(0.0).replace(
        "kind = run\n",
        "kind = compare-rmsd\nproposed_rmsd = 0, 1e-9\n",
    );
    let cfg = write(dir.path(), "tight.scenario", &text);
    let out = dir.path().join("out");
    let o = cli(&["--config", &cfg, "--out", out.to_str().unwrap(), "compare-rmsd"]);
    assert_eq!(o.status.code(), Some(1));
    let stdout = String::from_utf8_lossy(&o.stdout);
    assert!(stdout.contains("[FAIL] rmsd_proposed: measured"), "{stdout}");
}

#[test]
fn bode_verb_passes_on_shipped_scenario() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = scenarios().join("bode.scenario");
    let o = cli(&["--config", cfg.to_str().unwrap(), "--out", dir.path().to_str().unwrap(), "bode"]);
    assert_eq!(o.status.code(), Some(0), "{}", String::from_utf8_lossy(&o.stdout));
    assert!(dir.path().join("summary.json").exists());
}

#[test]
fn help_lists_every_verb() {
    let o = cli(&["--help"]);
    let text = String::from_utf8_lossy(&o.stdout);
    for verb in ["run", "compare-rmsd", "sweep-frequency", "residual-order", "bode", "calibrate", "equivalence"] {
        assert!(text.contains(verb), "{verb}");
    }
}
