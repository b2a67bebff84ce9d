//! LTI filters of the conventional chain, discretized with the bilinear
//! transform (no prewarping).
//!
//! * `HPF(s) = 2s²/(λ_h + s)²`
//! * `LPF(s) = λ_ℓ/(λ_ℓ + s)`

use crate::error::{Error, Result};

/// One first-order section `y[k] = b0 u[k] + b1 u[k−1] − a1 y[k−1]`.
#[derive(Clone, Copy, Debug, Default)]
struct Section {
    b0: f64,
    b1: f64,
    a1: f64,
    u1: f64,
    y1: f64,
}

impl Section {
    /// Bilinear image of `s/(s + λ)`.
    fn highpass(lambda: f64, ts: f64) -> Self {
        let k = 2.0 / ts;
        let den = k + lambda;
        Self {
            b0: k / den,
            b1: -k / den,
            a1: (lambda - k) / den,
            ..Default::default()
        }
    }

    /// Bilinear image of `λ/(s + λ)`.
    fn lowpass(lambda: f64, ts: f64) -> Self {
        let k = 2.0 / ts;
        let den = k + lambda;
        Self {
            b0: lambda / den,
            b1: lambda / den,
            a1: (lambda - k) / den,
            ..Default::default()
        }
    }

    fn step(&mut self, u: f64) -> f64 {
        let y = self.b0 * u + self.b1 * self.u1 - self.a1 * self.y1;
        self.u1 = u;
        self.y1 = y;
        y
    }

    fn dc_gain(&self) -> f64 {
        (self.b0 + self.b1) / (1.0 + self.a1)
    }

    /// Primes the section as if `u` had been applied forever.
    fn settle(&mut self, u: f64) {
        self.u1 = u;
        self.y1 = self.dc_gain() * u;
    }
}

/// Corner settings of the conventional chain.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct LtiChainConfig {
    /// HPF corner `λ_h` (rad/s).
    pub lambda_h: f64,
    /// LPF corner `λ_ℓ` (rad/s).
    pub lambda_ell: f64,
    /// Speed scale `ω_*` used to derive `λ_ℓ` (rad/s).
    pub omega_star: f64,
}

impl LtiChainConfig {
    /// `λ_h = ω_h`, `λ_ℓ = max{√(ω_h ω_*), 1}`.
    pub fn tuned(omega_h: f64, omega_star: f64) -> Self {
        Self {
            lambda_h: omega_h,
            lambda_ell: (omega_h * omega_star.abs()).sqrt().max(1.0),
            omega_star,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.lambda_h > 0.0 && self.lambda_h.is_finite()) {
            return Err(Error::invalid("lambda_h", "must be positive"));
        }
        if !(self.lambda_ell >= 1.0 && self.lambda_ell.is_finite()) {
            return Err(Error::invalid("lambda_ell", "must be at least 1"));
        }
        Ok(())
    }
}

#[derive(Clone, Debug)]
pub struct HighPass {
    a: Section,
    b: Section,
}

impl HighPass {
    pub fn new(lambda_h: f64, ts: f64) -> Self {
        Self {
            a: Section::highpass(lambda_h, ts),
            b: Section::highpass(lambda_h, ts),
        }
    }

    pub fn step(&mut self, u: f64) -> f64 {
        2.0 * self.b.step(self.a.step(u))
    }

    pub fn dc_gain(&self) -> f64 {
        2.0 * self.a.dc_gain() * self.b.dc_gain()
    }
}

#[derive(Clone, Debug)]
pub struct LowPass {
    s: Section,
}

impl LowPass {
    pub fn new(lambda: f64, ts: f64) -> Self {
        Self {
            s: Section::lowpass(lambda, ts),
        }
    }

    pub fn step(&mut self, u: f64) -> f64 {
        self.s.step(u)
    }

    pub fn output(&self) -> f64 {
        self.s.y1
    }

    pub fn dc_gain(&self) -> f64 {
        self.s.dc_gain()
    }

    pub fn settle(&mut self, u: f64) {
        self.s.settle(u);
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::f64::consts::TAU;

    #[test]
    fn hpf_rejects_constants() {
        let lambda = 500.0;
        let ts = TAU / lambda / 50.0;
        let mut f = HighPass::new(lambda, ts);
        assert_eq!(f.dc_gain(), 0.0);
        let steps = (20.0 / lambda / ts).ceil() as usize;
        let mut y = 0.0;
        for _ in 0..steps {
            y = f.step(3.0);
        }
        assert!(y.abs() < 1e-6 * 3.0, "{y}");
    }

    #[test]
    fn lpf_passes_constants() {
        let mut f = LowPass::new(40.0, 1e-4);
        assert!((f.dc_gain() - 1.0).abs() < 1e-12);
        let mut y = 0.0;
        for _ in 0..200_000 {
            y = f.step(-2.0);
        }
        assert!((y + 2.0).abs() < 2e-10);
    }

    #[test]
    fn tuned_corners() {
        let c = LtiChainConfig::tuned(500.0, 1.0);
        assert_eq!(c.lambda_h, 500.0);
        assert!((c.lambda_ell - 500f64.sqrt()).abs() < 1e-12);
        assert_eq!(LtiChainConfig::tuned(500.0, 0.0).lambda_ell, 1.0);
        assert!(c.validate().is_ok());
    }
}
