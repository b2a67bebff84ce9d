//! Scalar linear time-varying flows driven by the probe.
//!
//! Both the gradient estimator `ẋ = −γS²x + γS·u` (output `x/ε`) and the
//! low-pass `ż = −γS²z + γ·u` share the same form `ẋ = −γS²x + γ·w(t)·u`,
//! differing only in the input weighting `w`. Each sample advances the state
//! by one classical RK4 step over the previous sampling interval; `S` and
//! `w` are evaluated analytically at the stages and `u` at the midpoint is
//! reconstructed by causal cubic interpolation of the last four samples.

use std::collections::VecDeque;
use std::f64::consts::TAU;

use crate::error::{Error, Result};
use crate::signal::probe::{probe_signal, InjectionConfig};

/// Input weighting `w(t)` of the flow.
#[derive(Clone, Copy, Debug, PartialEq)]
pub enum Weighting {
    /// `w = S(t)`, the gradient estimator.
    Probe,
    /// `w = sin(ω_h t + φ)`.
    Demodulate { phi: f64 },
    /// `w = 1`.
    Unit,
}

/// Lagrange weights for nodes −3, −2, −1, 0 evaluated at −½.
const MID_CUBIC: [f64; 4] = [0.0625, -0.3125, 0.9375, 0.3125];

#[derive(Clone, Debug)]
pub struct LtvFlow {
    probe: InjectionConfig,
    gamma: f64,
    weighting: Weighting,
    x: f64,
    /// (t, u) of the most recent samples, oldest first.
    history: VecDeque<(f64, f64)>,
}

impl LtvFlow {
    pub fn new(probe: InjectionConfig, gamma: f64, weighting: Weighting) -> Result<Self> {
        if !(gamma > 0.0 && gamma.is_finite()) {
            return Err(Error::invalid("gamma", "must be positive"));
        }
        Ok(Self {
            probe,
            gamma,
            weighting,
            x: 0.0,
            history: VecDeque::with_capacity(4),
        })
    }

    pub fn gradient(probe: InjectionConfig, gamma: f64) -> Result<Self> {
        Self::new(probe, gamma, Weighting::Probe)
    }

    pub fn state(&self) -> f64 {
        self.x
    }

    pub fn set_state(&mut self, x: f64) {
        self.x = x;
    }

    pub fn gamma(&self) -> f64 {
        self.gamma
    }

    /// Gradient estimator output `x/ε`.
    pub fn estimate(&self) -> f64 {
        self.x / self.probe.epsilon
    }

    fn weight(&self, t: f64) -> f64 {
        match self.weighting {
            Weighting::Probe => probe_signal(&self.probe, t),
            Weighting::Demodulate { phi } => (self.probe.omega_h * t + phi).sin(),
            Weighting::Unit => 1.0,
        }
    }

    fn rate(&self, t: f64, x: f64, u: f64) -> f64 {
        let s = probe_signal(&self.probe, t);
        self.gamma * (self.weight(t) * u - s * s * x)
    }

    /// Feeds the sample `u` taken at time `t` and integrates up to `t`.
    pub fn step(&mut self, t: f64, u: f64) -> f64 {
        if let Some(&(t0, u0)) = self.history.back() {
            let h = t - t0;
            let u_mid = if self.history.len() >= 3 {
                let n = self.history.len();
                MID_CUBIC[0] * self.history[n - 3].1
                    + MID_CUBIC[1] * self.history[n - 2].1
                    + MID_CUBIC[2] * u0
                    + MID_CUBIC[3] * u
            } else {
                0.5 * (u0 + u)
            };
            let tm = t0 + 0.5 * h;
            let x = self.x;
            let k1 = self.rate(t0, x, u0);
            let k2 = self.rate(tm, x + 0.5 * h * k1, u_mid);
            let k3 = self.rate(tm, x + 0.5 * h * k2, u_mid);
            let k4 = self.rate(t, x + h * k3, u);
            self.x = x + h / 6.0 * (k1 + 2.0 * k2 + 2.0 * k3 + k4);
        }
        self.history.push_back((t, u));
        if self.history.len() > 3 {
            self.history.pop_front();
        }
        self.x
    }

    pub fn reset(&mut self) {
        self.x = 0.0;
        self.history.clear();
    }
}

/// `γ` giving a requested averaged convergence rate `γ⟨S²⟩`.
pub fn gain_for_rate(probe: &InjectionConfig, rate: f64) -> f64 {
    rate / probe.probe_power()
}

/// Averaged convergence rate of the gradient flow, `γ (V_h/2π)²/2`.
pub fn averaged_rate(probe: &InjectionConfig, gamma: f64) -> f64 {
    gamma * 0.5 * (probe.v_h / TAU).powi(2)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn zero_input_stays_zero() {
        let p = InjectionConfig::from_period(1.0, 1e-3);
        let mut g = LtvFlow::gradient(p, 1e4).unwrap();
        let ts = p.epsilon / 50.0;
        for k in 0..5000 {
            g.step(k as f64 * ts, 0.0);
        }
        assert_eq!(g.estimate(), 0.0);
    }

    #[test]
    fn rejects_non_positive_gain() {
        let p = InjectionConfig::from_period(1.0, 1e-3);
        assert!(LtvFlow::gradient(p, 0.0).is_err());
        assert!(LtvFlow::gradient(p, -1.0).is_err());
    }

    #[test]
    fn linear_in_input() {
        let p = InjectionConfig::from_period(1.0, 1e-3);
        let ts = p.epsilon / 50.0;
        let mut ga = LtvFlow::gradient(p, 1e4).unwrap();
        let mut gb = LtvFlow::gradient(p, 1e4).unwrap();
        let mut gab = LtvFlow::gradient(p, 1e4).unwrap();
        let (alpha, beta) = (0.7, -1.9);
        for k in 0..3000 {
            let t = k as f64 * ts;
            let u = (t * 377.0).sin() + 0.2;
            let v = (t * 9000.0).cos() * t;
            ga.step(t, u);
            gb.step(t, v);
            gab.step(t, alpha * u + beta * v);
        }
        let lhs = gab.state();
        let rhs = alpha * ga.state() + beta * gb.state();
        assert!((lhs - rhs).abs() <= 1e-12 * lhs.abs().max(rhs.abs()));
    }
}
