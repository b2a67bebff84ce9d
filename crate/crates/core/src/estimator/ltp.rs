//! Low-pass behavior of the periodic flow `ẏ = −cos²(ω_h t)·y + u`.
//!
//! Under `r = exp(sin(2ω_h t)/(4ω_h))·y` the flow becomes
//! `ṙ = −r/2 + P(t)u` with `P` within `e^{±1/(4ω_h)}` of one, so the
//! system behaves like `1/(s + ½)`.

use std::f64::consts::TAU;

use crate::error::{Error, Result};

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct GainPoint {
    /// Input angular frequency (rad/s).
    pub omega: f64,
    /// Amplitude gain of the fundamental.
    pub gain: f64,
}

#[derive(Clone, Debug, PartialEq)]
pub struct LtpReport {
    pub omega_h: f64,
    pub points: Vec<GainPoint>,
    /// `max |P(t) − 1|` sampled over one probe period.
    pub p_deviation: f64,
    /// `e^{1/(4ω_h)} − 1`.
    pub p_bound: f64,
    /// Final value of the response to a unit step.
    pub step_final: f64,
    /// Largest mismatch between the integrated `r` and `P·y` along the step run.
    pub transform_residual: f64,
}

impl LtpReport {
    pub fn gain_at(&self, omega: f64) -> Option<f64> {
        self.points
            .iter()
            .find(|p| (p.omega - omega).abs() <= 1e-12 * omega.max(1.0))
            .map(|p| p.gain)
    }
}

/// `exp(sin(2ω_h t)/(4ω_h))`, the coordinate change to the averaged flow.
pub fn coordinate_change(omega_h: f64, t: f64) -> f64 {
    ((2.0 * omega_h * t).sin() / (4.0 * omega_h)).exp()
}

fn rk4<F: Fn(f64, f64) -> f64>(f: &F, t: f64, y: f64, h: f64) -> f64 {
    let k1 = f(t, y);
    let k2 = f(t + 0.5 * h, y + 0.5 * h * k1);
    let k3 = f(t + 0.5 * h, y + 0.5 * h * k2);
    let k4 = f(t + h, y + h * k3);
    y + h / 6.0 * (k1 + 2.0 * k2 + 2.0 * k3 + k4)
}

/// Fundamental amplitude of `ẏ = −cos²(ω_h t)y + sin(Ωt)`.
///
/// Settles for `settle` seconds, then projects onto sin/cos over an integer
/// number of input periods covering at least `min_window` seconds.
fn sinusoid_gain(omega_h: f64, omega: f64, ts: f64, settle: f64, min_window: f64) -> f64 {
    let f = |t: f64, y: f64| -(omega_h * t).cos().powi(2) * y + (omega * t).sin();
    let period = TAU / omega;
    let periods = (min_window / period).ceil().max(1.0);
    let window = periods * period;
    let n_settle = (settle / ts).ceil() as usize;
    let n_window = (window / ts).round() as usize;
    let h = window / n_window as f64;
    let mut y = 0.0;
    let mut t = 0.0;
    for _ in 0..n_settle {
        y = rk4(&f, t, y, ts);
        t += ts;
    }
    let t0 = t;
    // trapezoidal projection onto the input's sin/cos
    let (mut ps, mut pc) = (0.0, 0.0);
    for k in 0..=n_window {
        let tk = t0 + k as f64 * h;
        let w = if k == 0 || k == n_window { 0.5 } else { 1.0 };
        ps += w * y * (omega * tk).sin();
        pc += w * y * (omega * tk).cos();
        if k < n_window {
            y = rk4(&f, tk, y, h);
        }
    }
    let scale = 2.0 * h / window;
    (ps * scale).hypot(pc * scale)
}

/// Simulates the periodic flow directly and reports its gain at each
/// frequency in `omegas` together with the coordinate-change checks.
pub fn ltp_lowpass_check(omega_h: f64, omegas: &[f64]) -> Result<LtpReport> {
    if !(omega_h >= 100.0 && omega_h.is_finite()) {
        return Err(Error::invalid("omega_h", "must be at least 100 rad/s"));
    }
    let ts = TAU / omega_h / 40.0;
    let points = omegas
        .iter()
        .map(|&omega| {
            if !(omega > 0.0) {
                return Err(Error::invalid("omega", "input frequencies must be positive"));
            }
            // the averaged pole sits at −½: 30 s settles it to e^{-15}
            let gain = sinusoid_gain(omega_h, omega, ts, 30.0, 5.0);
            Ok(GainPoint { omega, gain })
        })
        .collect::<Result<Vec<_>>>()?;

    let p_deviation = (0..4000)
        .map(|k| {
            let t = TAU / omega_h * k as f64 / 4000.0;
            (coordinate_change(omega_h, t) - 1.0).abs()
        })
        .fold(0.0, f64::max);
    let p_bound = (1.0 / (4.0 * omega_h)).exp() - 1.0;

    // step response, integrated in both coordinates
    let fy = |t: f64, y: f64| -(omega_h * t).cos().powi(2) * y + 1.0;
    let fr = |t: f64, r: f64| -0.5 * r + coordinate_change(omega_h, t);
    let (mut y, mut r, mut t) = (0.0, 0.0, 0.0);
    let mut transform_residual: f64 = 0.0;
    let steps = (30.0 / ts) as usize;
    for _ in 0..steps {
        y = rk4(&fy, t, y, ts);
        r = rk4(&fr, t, r, ts);
        t += ts;
        transform_residual = transform_residual.max((r - coordinate_change(omega_h, t) * y).abs());
    }
    Ok(LtpReport {
        omega_h,
        points,
        p_deviation,
        p_bound,
        step_final: y,
        transform_residual,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn coordinate_change_bound() {
        let r = ltp_lowpass_check(500.0, &[]).unwrap();
        assert!(r.p_deviation <= r.p_bound);
        assert!(r.p_bound <= 5.1e-4);
        assert!((r.step_final - 2.0).abs() < 0.01, "{}", r.step_final);
        assert!(r.transform_residual < 1e-8, "{}", r.transform_residual);
    }

    #[test]
    fn rejects_low_probe_frequency() {
        assert!(ltp_lowpass_check(10.0, &[1.0]).is_err());
    }
}
