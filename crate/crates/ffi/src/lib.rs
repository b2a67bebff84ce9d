//! C ABI over the position estimators and the speed PLL.
//!
//! Handles are opaque and owned by the caller; every constructor has a
//! matching `_free`. Functions return an [`IpmsmStatus`]; on failure the
//! message is kept per thread and readable via [`ipmsm_last_error`].

use std::cell::RefCell;
use std::ffi::{c_char, CStr};
use std::panic::{catch_unwind, AssertUnwindSafe};
use std::ptr;

use ipmsm_hfi::estimator::{
    Compensation, ConventionalEstimator, PllGains, ProposedConfig, ProposedEstimator, SpeedPll,
};
use ipmsm_hfi::signal::{InjectionConfig, LtiChainConfig};
use ipmsm_hfi::{Error, MotorParams, Vec2};

#[repr(C)]
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum IpmsmStatus {
    Ok = 0,
    NullPointer = 1,
    InvalidParameter = 2,
    Misaligned = 3,
    NonFinite = 4,
    Internal = 5,
}

#[repr(C)]
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct IpmsmMotorParams {
    pub pole_pairs: u32,
    pub r_s: f64,
    pub l_d: f64,
    pub l_q: f64,
    pub flux: f64,
    pub inertia: f64,
    pub friction: f64,
}

#[repr(C)]
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct IpmsmInjection {
    /// Amplitude (V).
    pub v_h: f64,
    /// Frequency (Hz).
    pub freq_hz: f64,
    /// Demodulation phase of the conventional chain (rad).
    pub phi: f64,
    /// Phase applied to the proposed estimator's probe copy (rad).
    pub phi_p: f64,
}

/// Validity codes: 0 warming up, 1 low confidence (angle held), 2 valid.
#[repr(C)]
#[derive(Clone, Copy, Debug, Default, PartialEq)]
pub struct IpmsmEstimate {
    pub theta_hat: f64,
    pub y_v1: f64,
    pub y_v2: f64,
    pub validity: u8,
}

pub struct IpmsmProposed(ProposedEstimator);
pub struct IpmsmConventional(ConventionalEstimator);
pub struct IpmsmPll(SpeedPll);

thread_local! {
    static LAST_ERROR: RefCell<Vec<u8>> = const { RefCell::new(Vec::new()) };
}

fn set_error(msg: &str) {
    LAST_ERROR.with(|e| {
        let mut buf = e.borrow_mut();
        buf.clear();
        buf.extend(msg.bytes().filter(|&b| b != 0));
    });
}

fn status_of(e: &Error) -> IpmsmStatus {
    match e {
        Error::Misaligned { .. } => IpmsmStatus::Misaligned,
        Error::NonFinite(_) => IpmsmStatus::NonFinite,
        Error::InvalidParameter { .. } | Error::DegenerateSignal { .. } => IpmsmStatus::InvalidParameter,
        _ => IpmsmStatus::Internal,
    }
}

fn guard(f: impl FnOnce() -> Result<(), (IpmsmStatus, String)>) -> IpmsmStatus {
    match catch_unwind(AssertUnwindSafe(f)) {
        Ok(Ok(())) => IpmsmStatus::Ok,
        Ok(Err((status, msg))) => {
            set_error(&msg);
            status
        }
        Err(_) => {
            set_error("internal panic");
            IpmsmStatus::Internal
        }
    }
}

fn lift<T>(r: ipmsm_hfi::Result<T>) -> Result<T, (IpmsmStatus, String)> {
    r.map_err(|e| (status_of(&e), e.to_string()))
}

fn null(what: &str) -> (IpmsmStatus, String) {
    (IpmsmStatus::NullPointer, format!("{what} is null"))
}

fn motor(p: &IpmsmMotorParams) -> MotorParams {
    MotorParams {
        pole_pairs: p.pole_pairs,
        r_s: p.r_s,
        l_d: p.l_d,
        l_q: p.l_q,
        flux: p.flux,
        inertia: p.inertia,
        friction: p.friction,
    }
}

fn export_motor(p: MotorParams) -> IpmsmMotorParams {
    IpmsmMotorParams {
        pole_pairs: p.pole_pairs,
        r_s: p.r_s,
        l_d: p.l_d,
        l_q: p.l_q,
        flux: p.flux,
        inertia: p.inertia,
        friction: p.friction,
    }
}

fn injection(i: &IpmsmInjection) -> Result<InjectionConfig, (IpmsmStatus, String)> {
    if !(i.freq_hz > 0.0 && i.freq_hz.is_finite()) {
        return Err((IpmsmStatus::InvalidParameter, "freq_hz must be positive".into()));
    }
    let mut cfg = InjectionConfig::from_hz(i.v_h, i.freq_hz);
    cfg.phi = i.phi;
    cfg.phi_p = i.phi_p;
    lift(cfg.validate())?;
    Ok(cfg)
}

/// Simulation-machine parameter set.
///
/// # Safety
/// `out` must be null or point to writable memory for one `IpmsmMotorParams`.
#[no_mangle]
pub unsafe extern "C" fn ipmsm_motor_params_simulation(out: *mut IpmsmMotorParams) -> IpmsmStatus {
    guard(|| {
        let out = unsafe { out.as_mut() }.ok_or_else(|| null("out"))?;
        *out = export_motor(MotorParams::simulation());
        Ok(())
    })
}

/// Experimental-machine parameter set.
///
/// # Safety
/// As [`ipmsm_motor_params_simulation`].
#[no_mangle]
pub unsafe extern "C" fn ipmsm_motor_params_experimental(out: *mut IpmsmMotorParams) -> IpmsmStatus {
    guard(|| {
        let out = unsafe { out.as_mut() }.ok_or_else(|| null("out"))?;
        *out = export_motor(MotorParams::experimental());
        Ok(())
    })
}

/// Creates a proposed (delayed-difference / gradient) estimator. `ts` must
/// divide the probe period. Compensation starts at `(1, 0, 1)`.
///
/// # Safety
/// `params`, `inj` must be valid for reads; `out` valid for one pointer write.
#[no_mangle]
pub unsafe extern "C" fn ipmsm_proposed_new(
    params: *const IpmsmMotorParams,
    inj: *const IpmsmInjection,
    gamma_alpha: f64,
    gamma_beta: f64,
    initial_theta: f64,
    ts: f64,
    out: *mut *mut IpmsmProposed,
) -> IpmsmStatus {
    guard(|| {
        let out = unsafe { out.as_mut() }.ok_or_else(|| null("out"))?;
        *out = ptr::null_mut();
        let params = unsafe { params.as_ref() }.ok_or_else(|| null("params"))?;
        let inj = unsafe { inj.as_ref() }.ok_or_else(|| null("inj"))?;
        let cfg = ProposedConfig {
            gamma_alpha,
            gamma_beta,
            initial_theta,
            ..Default::default()
        };
        let est = lift(ProposedEstimator::new(motor(params), injection(inj)?, cfg, ts))?;
        *out = Box::into_raw(Box::new(IpmsmProposed(est)));
        Ok(())
    })
}

/// # Safety
/// `h` must be a live handle from [`ipmsm_proposed_new`].
#[no_mangle]
pub unsafe extern "C" fn ipmsm_proposed_set_compensation(
    h: *mut IpmsmProposed,
    ell1: f64,
    ell2: f64,
    ell3: f64,
) -> IpmsmStatus {
    guard(|| {
        let h = unsafe { h.as_mut() }.ok_or_else(|| null("handle"))?;
        lift(h.0.set_compensation(Compensation { ell1, ell2, ell3 }))
    })
}

/// Feeds the current sample taken at `t`.
///
/// # Safety
/// `h` must be a live handle; `out` valid for one write.
#[no_mangle]
pub unsafe extern "C" fn ipmsm_proposed_step(
    h: *mut IpmsmProposed,
    i_alpha: f64,
    i_beta: f64,
    t: f64,
    out: *mut IpmsmEstimate,
) -> IpmsmStatus {
    guard(|| {
        let h = unsafe { h.as_mut() }.ok_or_else(|| null("handle"))?;
        let out = unsafe { out.as_mut() }.ok_or_else(|| null("out"))?;
        if !(i_alpha.is_finite() && i_beta.is_finite() && t.is_finite()) {
            return Err((IpmsmStatus::NonFinite, "non-finite input sample".into()));
        }
        let s = h.0.step(Vec2::new(i_alpha, i_beta), t);
        *out = IpmsmEstimate {
            theta_hat: s.theta_hat,
            y_v1: s.y_v.y1,
            y_v2: s.y_v.y2,
            validity: s.validity.code(),
        };
        Ok(())
    })
}

/// # Safety
/// `h` must be null or a handle from [`ipmsm_proposed_new`] not yet freed.
#[no_mangle]
pub unsafe extern "C" fn ipmsm_proposed_free(h: *mut IpmsmProposed) {
    if !h.is_null() {
        drop(unsafe { Box::from_raw(h) });
    }
}

/// Creates a conventional HPF / demodulation / LPF estimator with corners
/// `λ_h = ω_h`, `λ_ℓ = max(√(ω_h·omega_star), 1)`.
///
/// # Safety
/// As [`ipmsm_proposed_new`].
#[no_mangle]
pub unsafe extern "C" fn ipmsm_conventional_new(
    params: *const IpmsmMotorParams,
    inj: *const IpmsmInjection,
    omega_star: f64,
    initial_theta: f64,
    ts: f64,
    out: *mut *mut IpmsmConventional,
) -> IpmsmStatus {
    guard(|| {
        let out = unsafe { out.as_mut() }.ok_or_else(|| null("out"))?;
        *out = ptr::null_mut();
        let params = unsafe { params.as_ref() }.ok_or_else(|| null("params"))?;
        let inj = injection(unsafe { inj.as_ref() }.ok_or_else(|| null("inj"))?)?;
        if !(ts > 0.0 && ts.is_finite()) {
            return Err((IpmsmStatus::InvalidParameter, "ts must be positive".into()));
        }
        let chain = LtiChainConfig::tuned(inj.omega_h, omega_star);
        let est = lift(ConventionalEstimator::new(motor(params), inj, chain, initial_theta, ts))?;
        *out = Box::into_raw(Box::new(IpmsmConventional(est)));
        Ok(())
    })
}

/// `out.validity` is always 2; the chain has no warm-up.
///
/// # Safety
/// As [`ipmsm_proposed_step`].
#[no_mangle]
pub unsafe extern "C" fn ipmsm_conventional_step(
    h: *mut IpmsmConventional,
    i_alpha: f64,
    i_beta: f64,
    t: f64,
    out: *mut IpmsmEstimate,
) -> IpmsmStatus {
    guard(|| {
        let h = unsafe { h.as_mut() }.ok_or_else(|| null("handle"))?;
        let out = unsafe { out.as_mut() }.ok_or_else(|| null("out"))?;
        if !(i_alpha.is_finite() && i_beta.is_finite() && t.is_finite()) {
            return Err((IpmsmStatus::NonFinite, "non-finite input sample".into()));
        }
        let s = h.0.step(Vec2::new(i_alpha, i_beta), t);
        *out = IpmsmEstimate {
            theta_hat: s.theta_hat,
            y_v1: s.y.x,
            y_v2: s.y.y,
            validity: 2,
        };
        Ok(())
    })
}

/// # Safety
/// `h` must be null or a live handle from [`ipmsm_conventional_new`].
#[no_mangle]
pub unsafe extern "C" fn ipmsm_conventional_free(h: *mut IpmsmConventional) {
    if !h.is_null() {
        drop(unsafe { Box::from_raw(h) });
    }
}

/// # Safety
/// `out` valid for one pointer write.
#[no_mangle]
pub unsafe extern "C" fn ipmsm_pll_new(
    kp: f64,
    ki: f64,
    pole_pairs: u32,
    initial_angle: f64,
    out: *mut *mut IpmsmPll,
) -> IpmsmStatus {
    guard(|| {
        let out = unsafe { out.as_mut() }.ok_or_else(|| null("out"))?;
        *out = ptr::null_mut();
        if pole_pairs == 0 {
            return Err((IpmsmStatus::InvalidParameter, "pole_pairs must be at least 1".into()));
        }
        let pll = lift(SpeedPll::new(PllGains { kp, ki }, pole_pairs, initial_angle))?;
        *out = Box::into_raw(Box::new(IpmsmPll(pll)));
        Ok(())
    })
}

/// Writes the mechanical speed estimate for this sample, then advances the
/// loop by `ts` with `theta_hat` held.
///
/// # Safety
/// `h` must be a live handle; `omega_hat` valid for one write.
#[no_mangle]
pub unsafe extern "C" fn ipmsm_pll_step(
    h: *mut IpmsmPll,
    theta_hat: f64,
    ts: f64,
    omega_hat: *mut f64,
) -> IpmsmStatus {
    guard(|| {
        let h = unsafe { h.as_mut() }.ok_or_else(|| null("handle"))?;
        let out = unsafe { omega_hat.as_mut() }.ok_or_else(|| null("omega_hat"))?;
        if !(theta_hat.is_finite() && ts > 0.0 && ts.is_finite()) {
            return Err((IpmsmStatus::InvalidParameter, "theta_hat must be finite and ts positive".into()));
        }
        *out = h.0.step(theta_hat, ts);
        Ok(())
    })
}

/// # Safety
/// `h` must be null or a live handle from [`ipmsm_pll_new`].
#[no_mangle]
pub unsafe extern "C" fn ipmsm_pll_free(h: *mut IpmsmPll) {
    if !h.is_null() {
        drop(unsafe { Box::from_raw(h) });
    }
}

/// Copies the calling thread's last error message into `buf` (NUL
/// terminated, truncated to `len`). Returns the full message length.
///
/// # Safety
/// `buf` must be null or valid for `len` bytes.
#[no_mangle]
pub unsafe extern "C" fn ipmsm_last_error(buf: *mut c_char, len: usize) -> usize {
    LAST_ERROR.with(|e| {
        let msg = e.borrow();
        if !buf.is_null() && len > 0 {
            let n = msg.len().min(len - 1);
            unsafe {
                ptr::copy_nonoverlapping(msg.as_ptr(), buf.cast::<u8>(), n);
                *buf.add(n) = 0;
            }
        }
        msg.len()
    })
}

/// Static description of a status code.
#[no_mangle]
pub extern "C" fn ipmsm_status_str(status: IpmsmStatus) -> *const c_char {
    let s: &'static CStr = match status {
        IpmsmStatus::Ok => c"ok",
        IpmsmStatus::NullPointer => c"null pointer",
        IpmsmStatus::InvalidParameter => c"invalid parameter",
        IpmsmStatus::Misaligned => c"step does not divide the probe period",
        IpmsmStatus::NonFinite => c"non-finite value",
        IpmsmStatus::Internal => c"internal error",
    };
    s.as_ptr()
}

/// Library version string.
#[no_mangle]
pub extern "C" fn ipmsm_version() -> *const c_char {
    const V: &CStr = match CStr::from_bytes_with_nul(concat!(env!("CARGO_PKG_VERSION"), "\0").as_bytes()) {
        Ok(v) => v,
        Err(_) => c"unknown",
    };
    V.as_ptr()
}
