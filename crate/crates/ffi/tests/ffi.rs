use std::ffi::CStr;
use std::ptr;

use ipmsm_hfi::estimator::{ProposedConfig, ProposedEstimator};
use ipmsm_hfi::signal::InjectionConfig;
use ipmsm_hfi::{MotorParams, Vec2};
use ipmsm_hfi_ffi::*;

fn sim_params() -> IpmsmMotorParams {
    let mut p = unsafe { std::mem::zeroed() };
    assert_eq!(unsafe { ipmsm_motor_params_simulation(&mut p) }, IpmsmStatus::Ok);
    p
}

fn inj() -> IpmsmInjection {
    IpmsmInjection {
        v_h: 1.0,
        freq_hz: 500.0,
        phi: 0.0,
        phi_p: 0.0,
    }
}

fn last_error() -> String {
    let mut buf = [0 as std::ffi::c_char; 256];
    unsafe { ipmsm_last_error(buf.as_mut_ptr(), buf.len()) };
    unsafe { CStr::from_ptr(buf.as_ptr()) }.to_string_lossy().into_owned()
}

/// Synthetic currents from the linear model at standstill: the HF part of
/// `L(θ)⁻¹ ∫v`, with `v = (V_h sin ω_h t, 0)`.
fn current(theta: f64, t: f64, p: &MotorParams, omega_h: f64) -> Vec2 {
    let flux = -(omega_h * t).cos() / omega_h;
    let (s, c) = (2.0 * theta).sin_cos();
    let (l0, l1) = (p.l0(), p.l1());
    let det = p.l_d * p.l_q;
    Vec2::new((l0 - l1 * c) * flux / det, (-l1 * s) * flux / det)
}

#[test]
fn presets_match_core() {
    let p = sim_params();
    let core = MotorParams::simulation();
    assert_eq!(p.l_d, core.l_d);
    assert_eq!(p.pole_pairs, core.pole_pairs);
    let mut e = unsafe { std::mem::zeroed() };
    assert_eq!(unsafe { ipmsm_motor_params_experimental(&mut e) }, IpmsmStatus::Ok);
    assert_eq!(e.flux, MotorParams::experimental().flux);
}

#[test]
fn null_pointers_are_reported() {
    assert_eq!(unsafe { ipmsm_motor_params_simulation(ptr::null_mut()) }, IpmsmStatus::NullPointer);
    assert!(last_error().contains("out"));
    let mut h = ptr::null_mut();
    let st = unsafe { ipmsm_proposed_new(ptr::null(), &inj(), 1e4, 1e4, 0.0, 2e-4, &mut h) };
    assert_eq!(st, IpmsmStatus::NullPointer);
    assert!(h.is_null());
    let mut out = IpmsmEstimate::default();
    assert_eq!(
        unsafe { ipmsm_proposed_step(ptr::null_mut(), 0.0, 0.0, 0.0, &mut out) },
        IpmsmStatus::NullPointer
    );
    unsafe { ipmsm_proposed_free(ptr::null_mut()) };
}

#[test]
fn misaligned_step_is_rejected() {
    let p = sim_params();
    let mut h = ptr::null_mut();
    let st = unsafe { ipmsm_proposed_new(&p, &inj(), 1e4, 1e4, 0.0, 3e-4, &mut h) };
    assert_eq!(st, IpmsmStatus::Misaligned);
    assert!(h.is_null());
    assert!(!last_error().is_empty());
}

#[test]
fn invalid_parameters_are_rejected() {
    let mut p = sim_params();
    p.l_d = -1.0;
    let mut h = ptr::null_mut();
    let st = unsafe { ipmsm_conventional_new(&p, &inj(), 0.5, 0.0, 2e-4, &mut h) };
    assert_eq!(st, IpmsmStatus::InvalidParameter);
    let bad = IpmsmInjection { freq_hz: 0.0, ..inj() };
    let st = unsafe { ipmsm_conventional_new(&sim_params(), &bad, 0.5, 0.0, 2e-4, &mut h) };
    assert_eq!(st, IpmsmStatus::InvalidParameter);
    let mut pll = ptr::null_mut();
    assert_eq!(unsafe { ipmsm_pll_new(5.0, 0.01, 0, 0.0, &mut pll) }, IpmsmStatus::InvalidParameter);
}

#[test]
fn proposed_matches_core_bit_for_bit() {
    let p = sim_params();
    let core_p = MotorParams::simulation();
    let ts = 4e-5;
    let mut h = ptr::null_mut();
    assert_eq!(unsafe { ipmsm_proposed_new(&p, &inj(), 1e4, 1e4, 0.3, ts, &mut h) }, IpmsmStatus::Ok);
    let mut core = ProposedEstimator::new(
        core_p,
        InjectionConfig::from_hz(1.0, 500.0),
        ProposedConfig {
            initial_theta: 0.3,
            ..Default::default()
        },
        ts,
    )
    .unwrap();
    let omega_h = 2.0 * std::f64::consts::PI * 500.0;
    let mut out = IpmsmEstimate::default();
    for k in 0..20_000 {
        let t = k as f64 * ts;
        let i = current(0.3, t, &core_p, omega_h);
        assert_eq!(unsafe { ipmsm_proposed_step(h, i.x, i.y, t, &mut out) }, IpmsmStatus::Ok);
        let s = core.step(i, t);
        assert_eq!(out.theta_hat.to_bits(), s.theta_hat.to_bits());
        assert_eq!(out.validity, s.validity.code());
    }
    assert_eq!(out.validity, 2);
    // averaged model holds to O(ε); ε = 2 ms here
    assert!((out.theta_hat - 0.3).abs() <= 3.0 * 2e-3, "{}", out.theta_hat);
    unsafe { ipmsm_proposed_free(h) };
}

#[test]
fn conventional_tracks_standstill_angle() {
    let p = sim_params();
    let core_p = MotorParams::simulation();
    let ts = 4e-5;
    let mut h = ptr::null_mut();
    assert_eq!(unsafe { ipmsm_conventional_new(&p, &inj(), 0.5, 0.0, ts, &mut h) }, IpmsmStatus::Ok);
    let omega_h = 2.0 * std::f64::consts::PI * 500.0;
    let mut out = IpmsmEstimate::default();
    for k in 0..100_000 {
        let t = k as f64 * ts;
        let i = current(-0.4, t, &core_p, omega_h);
        assert_eq!(unsafe { ipmsm_conventional_step(h, i.x, i.y, t, &mut out) }, IpmsmStatus::Ok);
    }
    assert!((out.theta_hat + 0.4).abs() <= 5.0 * 2e-3, "{}", out.theta_hat);
    assert_eq!(
        unsafe { ipmsm_conventional_step(h, f64::NAN, 0.0, 0.0, &mut out) },
        IpmsmStatus::NonFinite
    );
    unsafe { ipmsm_conventional_free(h) };
}

#[test]
fn pll_converges_to_ramp_speed() {
    let mut h = ptr::null_mut();
    assert_eq!(unsafe { ipmsm_pll_new(5.0, 0.01, 3, 0.0, &mut h) }, IpmsmStatus::Ok);
    let ts = 4e-5;
    let omega_e = 1.5;
    let mut w = 0.0;
    for k in 0..200_000 {
        let th = omega_e * k as f64 * ts;
        assert_eq!(unsafe { ipmsm_pll_step(h, th, ts, &mut w) }, IpmsmStatus::Ok);
    }
    assert!((w - omega_e / 3.0).abs() < 1e-3, "{w}");
    assert_eq!(unsafe { ipmsm_pll_step(h, 0.0, -1.0, &mut w) }, IpmsmStatus::InvalidParameter);
    unsafe { ipmsm_pll_free(h) };
}

#[test]
fn compensation_validation() {
    let mut h = ptr::null_mut();
    assert_eq!(unsafe { ipmsm_proposed_new(&sim_params(), &inj(), 1e4, 1e4, 0.0, 2e-4, &mut h) }, IpmsmStatus::Ok);
    assert_eq!(unsafe { ipmsm_proposed_set_compensation(h, 1.0, 0.0, 1.02) }, IpmsmStatus::Ok);
    assert_eq!(unsafe { ipmsm_proposed_set_compensation(h, 0.0, 0.0, 1.0) }, IpmsmStatus::InvalidParameter);
    unsafe { ipmsm_proposed_free(h) };
}

#[test]
fn last_error_truncates_and_reports_length() {
    unsafe { ipmsm_motor_params_simulation(ptr::null_mut()) };
    let full = unsafe { ipmsm_last_error(ptr::null_mut(), 0) };
    let mut buf = [1 as std::ffi::c_char; 4];
    let n = unsafe { ipmsm_last_error(buf.as_mut_ptr(), buf.len()) };
    assert_eq!(n, full);
    assert_eq!(buf[3], 0);
}

#[test]
fn status_strings_and_version() {
    let s = unsafe { CStr::from_ptr(ipmsm_status_str(IpmsmStatus::Misaligned)) };
    assert!(s.to_str().unwrap().contains("period"));
    let v = unsafe { CStr::from_ptr(ipmsm_version()) };
    assert_eq!(v.to_str().unwrap(), env!("CARGO_PKG_VERSION"));
}

#[test]
fn header_declares_every_entry_point() {
    let header = std::fs::read_to_string(concat!(env!("CARGO_MANIFEST_DIR"), "/include/ipmsm_hfi.h")).unwrap();
    for f in [
        "ipmsm_motor_params_simulation",
        "ipmsm_motor_params_experimental",
        "ipmsm_proposed_new",
        "ipmsm_proposed_set_compensation",
        "ipmsm_proposed_step",
        "ipmsm_proposed_free",
        "ipmsm_conventional_new",
        "ipmsm_conventional_step",
        "ipmsm_conventional_free",
        "ipmsm_pll_new",
        "ipmsm_pll_step",
        "ipmsm_pll_free",
        "ipmsm_last_error",
        "ipmsm_status_str",
        "ipmsm_version",
    ] {
        assert!(header.contains(&format!("{f}(")), "missing {f}");
    }
}

#[test]
fn header_compiles_as_c() {
    let Ok(cc) = which_cc() else { return };
    let dir = tempfile::tempdir().unwrap();
    let src = dir.path().join("probe.c");
    std::fs::write(&src, "#include \"ipmsm_hfi.h\"\nint main(void){IpmsmEstimate e; (void)e; return IPMSM_STATUS_OK;}\n").unwrap();
    let status = std::process::Command::new(cc)
        .args(["-std=c99", "-Wall", "-Werror", "-fsyntax-only", "-I"])
        .arg(concat!(env!("CARGO_MANIFEST_DIR"), "/include"))
        .arg(&src)
        .status()
        .unwrap();
    assert!(status.success());
}

fn which_cc() -> Result<&'static str, ()> {
    for cc in ["cc", "gcc", "clang"] {
        if std::process::Command::new(cc).arg("--version").output().is_ok() {
            return Ok(cc);
        }
    }
    Err(())
}
