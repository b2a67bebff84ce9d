//! Sensorless field-oriented controller: frame rotation by the estimated
//! angle, speed PI, decoupled current PIs, and probe superposition.

use crate::error::{Error, Result};
use crate::math::{Mat2, Vec2};
use crate::motor::MotorParams;
use crate::signal::{injection_voltage, InjectionConfig, LowPass};

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Direction {
    ToDq,
    ToAlphaBeta,
}

/// `i_dq = e^{−Jθ} i_αβ` or `v_αβ = e^{Jθ} v_dq`.
pub fn frame_rotate(theta: f64, v: Vec2, direction: Direction) -> Vec2 {
    let angle = match direction {
        Direction::ToDq => -theta,
        Direction::ToAlphaBeta => theta,
    };
    Mat2::rotation(angle).mul_vec(v)
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct PiGains {
    pub kp: f64,
    pub ki: f64,
}

/// Discrete PI with backward-Euler integral and a clamped accumulator.
#[derive(Clone, Copy, Debug)]
pub struct PiState {
    pub gains: PiGains,
    integral: f64,
    lo: f64,
    hi: f64,
}

impl PiState {
    pub fn new(gains: PiGains, limit: f64) -> Result<Self> {
        Self::with_limits(gains, -limit, limit)
    }

    pub fn with_limits(gains: PiGains, lo: f64, hi: f64) -> Result<Self> {
        if !(lo < hi) {
            return Err(Error::invalid("pi limits", "need lo < hi"));
        }
        if !(gains.kp >= 0.0 && gains.ki >= 0.0) {
            return Err(Error::invalid("pi gains", "must be non-negative"));
        }
        Ok(Self {
            gains,
            integral: 0.0,
            lo,
            hi,
        })
    }

    pub fn integral(&self) -> f64 {
        self.integral
    }

    pub fn step(&mut self, error: f64, ts: f64) -> f64 {
        self.integral = (self.integral + self.gains.ki * ts * error).clamp(self.lo, self.hi);
        (self.gains.kp * error + self.integral).clamp(self.lo, self.hi)
    }
}

/// Inductance used in the cross-coupling terms.
#[derive(Clone, Copy, Debug, PartialEq)]
pub enum DecouplingInductance {
    Average,
    DAxis,
    QAxis,
    Custom(f64),
}

impl DecouplingInductance {
    pub fn value(&self, params: &MotorParams) -> f64 {
        match *self {
            DecouplingInductance::Average => params.l0(),
            DecouplingInductance::DAxis => params.l_d,
            DecouplingInductance::QAxis => params.l_q,
            DecouplingInductance::Custom(l) => l,
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct ControllerConfig {
    pub speed: PiGains,
    pub current: PiGains,
    /// Cutoff of the first-order filter on measured dq currents; `None` selects `ω_h/10`.
    pub current_filter_cutoff: Option<f64>,
    pub decoupling: DecouplingInductance,
    /// Mechanical speed reference (rad/s).
    pub omega_ref: f64,
    pub i_d_ref: f64,
    /// q-axis reference when the speed loop is disabled.
    pub i_q_ref: f64,
    pub speed_loop: bool,
    /// Speed PI output clamp (A).
    pub current_limit: f64,
    /// Current PI output clamp (V).
    pub voltage_limit: f64,
}

impl Default for ControllerConfig {
    fn default() -> Self {
        Self {
            speed: PiGains { kp: 1.0, ki: 5.0 },
            current: PiGains { kp: 5.0, ki: 5.0 },
            current_filter_cutoff: None,
            decoupling: DecouplingInductance::Average,
            omega_ref: 0.5,
            i_d_ref: 0.0,
            i_q_ref: 0.0,
            speed_loop: true,
            current_limit: 20.0,
            voltage_limit: 400.0,
        }
    }
}

impl ControllerConfig {
    pub fn validate(&self) -> Result<()> {
        for (name, v) in [
            ("speed.kp", self.speed.kp),
            ("speed.ki", self.speed.ki),
            ("current.kp", self.current.kp),
            ("current.ki", self.current.ki),
        ] {
            if !(v >= 0.0 && v.is_finite()) {
                return Err(Error::invalid("controller gains", format!("{name} must be non-negative")));
            }
        }
        if let Some(c) = self.current_filter_cutoff {
            if !(c > 0.0) {
                return Err(Error::invalid("current_filter_cutoff", "must be positive"));
            }
        }
        if !(self.current_limit > 0.0 && self.voltage_limit > 0.0) {
            return Err(Error::invalid("limits", "must be positive"));
        }
        Ok(())
    }
}

/// Angle and speed fed to the controller (estimated or measured).
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Feedback {
    /// Electrical angle (rad).
    pub theta: f64,
    /// Mechanical speed (rad/s).
    pub omega: f64,
}

#[derive(Clone, Copy, Debug, Default, PartialEq)]
pub struct ControllerOutput {
    /// Control voltage `v^C_αβ`, held over the step.
    pub v_control: Vec2,
    /// `v^C_αβ` plus the probe at the sample instant.
    pub v_total: Vec2,
    pub i_dq_ref: Vec2,
    pub i_dq_filtered: Vec2,
}

#[derive(Clone, Debug)]
pub struct Controller {
    cfg: ControllerConfig,
    params: MotorParams,
    injection: Option<InjectionConfig>,
    speed_pi: PiState,
    d_pi: PiState,
    q_pi: PiState,
    filters: [LowPass; 2],
    last: ControllerOutput,
}

impl Controller {
    /// `injection = None` disables the probe.
    pub fn new(
        cfg: ControllerConfig,
        params: MotorParams,
        injection: Option<InjectionConfig>,
        probe_omega: f64,
        ts: f64,
    ) -> Result<Self> {
        cfg.validate()?;
        let cutoff = cfg.current_filter_cutoff.unwrap_or(probe_omega / 10.0);
        Ok(Self {
            cfg,
            params,
            injection,
            speed_pi: PiState::new(cfg.speed, cfg.current_limit)?,
            d_pi: PiState::new(cfg.current, cfg.voltage_limit)?,
            q_pi: PiState::new(cfg.current, cfg.voltage_limit)?,
            filters: [LowPass::new(cutoff, ts), LowPass::new(cutoff, ts)],
            last: ControllerOutput::default(),
        })
    }

    pub fn config(&self) -> &ControllerConfig {
        &self.cfg
    }

    pub fn last(&self) -> &ControllerOutput {
        &self.last
    }

    fn probe(&self, t: f64) -> Vec2 {
        self.injection
            .as_ref()
            .map_or(Vec2::ZERO, |inj| injection_voltage(inj, t))
    }

    /// One control update. `feedback = None` (estimator still warming up)
    /// holds the previous control voltage.
    pub fn step(&mut self, i_ab: Vec2, t: f64, feedback: Option<Feedback>, ts: f64) -> ControllerOutput {
        let Some(fb) = feedback else {
            self.last.v_total = self.last.v_control + self.probe(t);
            return self.last;
        };
        let i_q_ref = if self.cfg.speed_loop {
            self.speed_pi.step(self.cfg.omega_ref - fb.omega, ts)
        } else {
            self.cfg.i_q_ref
        };
        let refs = Vec2::new(self.cfg.i_d_ref, i_q_ref);
        let i_dq = frame_rotate(fb.theta, i_ab, Direction::ToDq);
        let filt = Vec2::new(self.filters[0].step(i_dq.x), self.filters[1].step(i_dq.y));
        let we = self.params.n_p() * fb.omega;
        let l = self.cfg.decoupling.value(&self.params);
        let v_d = self.d_pi.step(refs.x - filt.x, ts) - l * we * filt.y;
        let v_q = self.q_pi.step(refs.y - filt.y, ts) + l * we * filt.x + we * self.params.flux;
        let v_control = frame_rotate(fb.theta, Vec2::new(v_d, v_q), Direction::ToAlphaBeta);
        self.last = ControllerOutput {
            v_control,
            v_total: v_control + self.probe(t),
            i_dq_ref: refs,
            i_dq_filtered: filt,
        };
        self.last
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;
    use std::f64::consts::FRAC_PI_2;

    #[test]
    fn rotation_examples() {
        let v = Vec2::new(0.3, -1.2);
        assert_eq!(frame_rotate(0.0, v, Direction::ToDq), v);
        let r = frame_rotate(FRAC_PI_2, Vec2::new(1.0, 0.0), Direction::ToDq);
        assert!(r.x.abs() < 1e-15 && (r.y + 1.0).abs() < 1e-15);
    }

    #[test]
    fn pi_examples() {
        let mut pi = PiState::new(PiGains { kp: 2.0, ki: 0.0 }, 100.0).unwrap();
        assert_eq!(pi.step(1.5, 1e-3), 3.0);
        let mut pi = PiState::new(PiGains { kp: 2.0, ki: 10.0 }, 100.0).unwrap();
        pi.step(1.0, 0.1);
        let i = pi.integral();
        assert_eq!(pi.step(0.0, 0.1), i);
    }

    #[test]
    fn anti_windup_bounds_integral() {
        let mut pi = PiState::new(PiGains { kp: 1.0, ki: 1000.0 }, 5.0).unwrap();
        for _ in 0..10_000 {
            let u = pi.step(50.0, 1e-3);
            assert!(u <= 5.0 && pi.integral() <= 5.0);
        }
        // recovers immediately once the error flips
        assert!(pi.step(-50.0, 1e-3) < 0.0);
    }

    fn zero_gain_cfg() -> ControllerConfig {
        ControllerConfig {
            speed: PiGains { kp: 0.0, ki: 0.0 },
            current: PiGains { kp: 0.0, ki: 0.0 },
            ..Default::default()
        }
    }

    #[test]
    fn no_injection_zero_gains_gives_zero_voltage() {
        let p = MotorParams::simulation();
        let mut c = Controller::new(zero_gain_cfg(), p, None, 6283.0, 2e-5).unwrap();
        let out = c.step(Vec2::new(0.5, 0.1), 0.3, Some(Feedback { theta: 0.2, omega: 0.0 }), 2e-5);
        assert!(out.v_total.norm() < 1e-15);
    }

    #[test]
    fn zero_gains_leave_only_the_probe() {
        let p = MotorParams::simulation();
        let inj = InjectionConfig::from_hz(1.0, 1000.0);
        let mut c = Controller::new(zero_gain_cfg(), p, Some(inj), inj.omega_h, 2e-5).unwrap();
        let t = 0.25e-3;
        let out = c.step(Vec2::new(0.5, 0.1), t, Some(Feedback { theta: 0.7, omega: 0.0 }), 2e-5);
        assert!((out.v_total.x - (inj.omega_h * t).sin()).abs() < 1e-15);
        assert_eq!(out.v_total.y, 0.0);
    }

    #[test]
    fn back_emf_feedforward() {
        let p = MotorParams::simulation();
        let cfg = ControllerConfig {
            speed_loop: false,
            ..Default::default()
        };
        let mut c = Controller::new(cfg, p, None, 6283.0, 2e-5).unwrap();
        let out = c.step(Vec2::ZERO, 0.0, Some(Feedback { theta: 0.0, omega: 10.0 }), 2e-5);
        assert!((out.v_control.y - 6.6).abs() < 1e-12, "{:?}", out.v_control);
        assert!(out.v_control.x.abs() < 1e-12);
    }

    #[test]
    fn holds_voltage_without_feedback() {
        let p = MotorParams::simulation();
        let mut c = Controller::new(ControllerConfig::default(), p, None, 6283.0, 2e-5).unwrap();
        let a = c.step(Vec2::new(0.2, 0.0), 0.0, Some(Feedback { theta: 0.1, omega: 0.0 }), 2e-5);
        let b = c.step(Vec2::new(9.0, 9.0), 2e-5, None, 2e-5);
        assert_eq!(a.v_control, b.v_control);
    }

    proptest! {
        #[test]
        fn rotation_is_an_isometry_and_round_trips(th in -50.0f64..50.0, x in -100.0f64..100.0, y in -100.0f64..100.0) {
            let v = Vec2::new(x, y);
            let dq = frame_rotate(th, v, Direction::ToDq);
            prop_assert!((dq.norm() - v.norm()).abs() <= 1e-14 * v.norm().max(1.0));
            let back = frame_rotate(th, dq, Direction::ToAlphaBeta);
            prop_assert!((back - v).norm() <= 1e-14 * v.norm().max(1.0));
        }
    }
}
