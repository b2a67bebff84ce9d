use std::f64::consts::{PI, TAU};

use crate::error::{Error, Result};
use crate::math::Vec2;

/// High-frequency probe settings.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct InjectionConfig {
    /// Probe amplitude `V_h` (V).
    pub v_h: f64,
    /// Probe angular frequency `ω_h` (rad/s).
    pub omega_h: f64,
    /// Probe period `ε = 2π/ω_h` (s).
    pub epsilon: f64,
    /// Demodulation phase of the LTI chain (rad).
    pub phi: f64,
    /// Phase-loss compensation applied to the estimator's copy of the probe (rad).
    pub phi_p: f64,
}

impl InjectionConfig {
    pub fn from_hz(v_h: f64, freq_hz: f64) -> Self {
        Self {
            v_h,
            omega_h: TAU * freq_hz,
            epsilon: 1.0 / freq_hz,
            phi: 0.0,
            phi_p: 0.0,
        }
    }

    pub fn from_period(v_h: f64, epsilon: f64) -> Self {
        Self {
            v_h,
            omega_h: TAU / epsilon,
            epsilon,
            phi: 0.0,
            phi_p: 0.0,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.v_h > 0.0 && self.v_h.is_finite()) {
            return Err(Error::invalid("v_h", "must be positive"));
        }
        if !(self.omega_h > 0.0 && self.omega_h.is_finite()) {
            return Err(Error::invalid("omega_h", "must be positive"));
        }
        if ((self.epsilon * self.omega_h - TAU) / TAU).abs() > 1e-12 {
            return Err(Error::invalid(
                "epsilon",
                format!(
                    "epsilon·omega_h = {} differs from 2π",
                    self.epsilon * self.omega_h
                ),
            ));
        }
        for (name, v) in [("phi", self.phi), ("phi_p", self.phi_p)] {
            if !(0.0..TAU).contains(&v) {
                return Err(Error::invalid(name, "must lie in [0, 2π)"));
            }
        }
        Ok(())
    }

    pub fn freq_hz(&self) -> f64 {
        1.0 / self.epsilon
    }

    /// Mean of `S²` over a period: `(V_h/2π)²/2`.
    pub fn probe_power(&self) -> f64 {
        0.5 * (self.v_h / TAU).powi(2)
    }
}

/// `S(t) = −(V_h/2π)·cos(ω_h t + φ_p)`.
pub fn probe_signal(cfg: &InjectionConfig, t: f64) -> f64 {
    -(cfg.v_h / (2.0 * PI)) * (cfg.omega_h * t + cfg.phi_p).cos()
}

/// Voltage superposed on the α axis: `(V_h sin ω_h t, 0)`.
pub fn injection_voltage(cfg: &InjectionConfig, t: f64) -> Vec2 {
    Vec2::new(cfg.v_h * (cfg.omega_h * t).sin(), 0.0)
}

/// Number of `ts` steps in `span`, rejecting spans that are not sample-aligned.
pub fn aligned_samples(what: &'static str, span: f64, ts: f64) -> Result<usize> {
    if !(ts > 0.0 && ts.is_finite()) {
        return Err(Error::invalid("ts", "step must be positive"));
    }
    if !(span >= 0.0 && span.is_finite()) {
        return Err(Error::invalid(what, "must be non-negative"));
    }
    let n = (span / ts).round();
    if (n * ts - span).abs() > 1e-9 * span.max(ts) {
        return Err(Error::Misaligned {
            what,
            value: span,
            step: ts,
        });
    }
    Ok(n as usize)
}
