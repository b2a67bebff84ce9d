//! PLL-type speed estimator:
//!
//! ```text
//! η̇₁ = K_p(θ̂ − η₁) + K_i η₂
//! η̇₂ = θ̂ − η₁
//! ω̂_p = K_p(θ̂ − η₁) + K_i η₂,   ω̂ = ω̂_p / n_p
//! ```

use crate::error::{Error, Result};

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct PllGains {
    pub kp: f64,
    pub ki: f64,
}

impl Default for PllGains {
    fn default() -> Self {
        Self { kp: 5.0, ki: 0.01 }
    }
}

#[derive(Clone, Copy, Debug)]
pub struct SpeedPll {
    gains: PllGains,
    n_p: f64,
    eta1: f64,
    eta2: f64,
    omega_hat_p: f64,
}

impl SpeedPll {
    pub fn new(gains: PllGains, pole_pairs: u32, initial_angle: f64) -> Result<Self> {
        if !(gains.kp > 0.0 && gains.ki > 0.0) {
            return Err(Error::invalid("pll gains", "K_p and K_i must be positive"));
        }
        Ok(Self {
            gains,
            n_p: f64::from(pole_pairs.max(1)),
            eta1: initial_angle,
            eta2: 0.0,
            omega_hat_p: 0.0,
        })
    }

    pub fn eta(&self) -> (f64, f64) {
        (self.eta1, self.eta2)
    }

    /// Electrical speed estimate (rad/s).
    pub fn omega_hat_p(&self) -> f64 {
        self.omega_hat_p
    }

    /// Mechanical speed estimate (rad/s).
    pub fn omega_hat(&self) -> f64 {
        self.omega_hat_p / self.n_p
    }

    /// Reports the estimate for the current sample, then advances the loop
    /// over one step with `theta_hat` held.
    pub fn step(&mut self, theta_hat: f64, ts: f64) -> f64 {
        let PllGains { kp, ki } = self.gains;
        let rate = |e1: f64, e2: f64| (kp * (theta_hat - e1) + ki * e2, theta_hat - e1);
        self.omega_hat_p = rate(self.eta1, self.eta2).0;
        let (a1, a2) = rate(self.eta1, self.eta2);
        let (b1, b2) = rate(self.eta1 + 0.5 * ts * a1, self.eta2 + 0.5 * ts * a2);
        let (c1, c2) = rate(self.eta1 + 0.5 * ts * b1, self.eta2 + 0.5 * ts * b2);
        let (d1, d2) = rate(self.eta1 + ts * c1, self.eta2 + ts * c2);
        self.eta1 += ts / 6.0 * (a1 + 2.0 * b1 + 2.0 * c1 + d1);
        self.eta2 += ts / 6.0 * (a2 + 2.0 * b2 + 2.0 * c2 + d2);
        self.omega_hat()
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn constant_angle_is_an_equilibrium() {
        let mut pll = SpeedPll::new(PllGains::default(), 6, 0.0).unwrap();
        let mut w = 1.0;
        for _ in 0..200_000 {
            w = pll.step(0.7, 1e-4);
        }
        let (e1, _) = pll.eta();
        assert!((e1 - 0.7).abs() < 1e-3, "{e1}");
        assert!(w.abs() < 1e-4, "{w}");
    }

    #[test]
    fn tracks_a_ramp() {
        // θ̂ = ω_e t is tracked with zero steady error on ω̂_p;
        // the slow integrator pole means the residual decays on ~1/K_p.
        let n_p = 6;
        let we = 3.0;
        let ts = 1e-3;
        let mut pll = SpeedPll::new(PllGains::default(), n_p, 0.0).unwrap();
        let mut w = 0.0;
        for k in 0..20_000 {
            w = pll.step(we * k as f64 * ts, ts);
        }
        assert!((w - we / n_p as f64).abs() < 1e-3 * we, "{w}");
    }

    #[test]
    fn rejects_bad_gains() {
        assert!(SpeedPll::new(PllGains { kp: 0.0, ki: 1.0 }, 3, 0.0).is_err());
    }
}
