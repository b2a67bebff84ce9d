//! Fixed-step closed-loop simulator.
//!
//! At each sample `t_k = k·T_s` the (optionally noisy) current is measured,
//! the active estimators and their PLLs are updated, the controller computes
//! `v^C`, and the plant is advanced to `t_{k+1}` by one RK4 step with `v^C`
//! held and the probe evaluated at the RK4 stage times.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};

use crate::control::{Controller, ControllerConfig, Feedback};
use crate::error::{Error, Result};
use crate::estimator::virtual_output::is_confident;
use crate::estimator::{
    ConventionalEstimator, EquivalentEstimator, PllGains, ProposedConfig, ProposedEstimator,
    SpeedPll, Validity, VirtualOutput,
};
use crate::math::Vec2;
use crate::motor::{current_derivative, state_derivative, MotorInputs, MotorParams, MotorState};
use crate::signal::{aligned_samples, injection_voltage, probe_signal, InjectionConfig, LtiChainConfig};

/// One classical RK4 step of `ẏ = f(t, y)`; fails on non-finite results.
pub fn rk4_step<const N: usize, F>(mut f: F, t: f64, y: &[f64; N], h: f64) -> Result<[f64; N]>
where
    F: FnMut(f64, &[f64; N]) -> Result<[f64; N]>,
{
    let axpy = |a: &[f64; N], k: &[f64; N], s: f64| {
        let mut out = *a;
        for (o, ki) in out.iter_mut().zip(k) {
            *o += s * ki;
        }
        out
    };
    let k1 = f(t, y)?;
    let k2 = f(t + 0.5 * h, &axpy(y, &k1, 0.5 * h))?;
    let k3 = f(t + 0.5 * h, &axpy(y, &k2, 0.5 * h))?;
    let k4 = f(t + h, &axpy(y, &k3, h))?;
    let mut out = *y;
    for n in 0..N {
        out[n] += h / 6.0 * (k1[n] + 2.0 * k2[n] + 2.0 * k3[n] + k4[n]);
    }
    if out.iter().all(|v| v.is_finite()) {
        Ok(out)
    } else {
        Err(Error::NonFinite("rk4 step"))
    }
}

#[derive(Clone, Debug, PartialEq)]
pub enum LoadProfile {
    Constant(f64),
    /// `(t_start, torque)` steps, sorted by time; zero before the first.
    Piecewise(Vec<(f64, f64)>),
    Sinusoidal {
        offset: f64,
        amplitude: f64,
        freq_hz: f64,
    },
}

impl LoadProfile {
    pub fn torque(&self, t: f64) -> f64 {
        match self {
            LoadProfile::Constant(v) => *v,
            LoadProfile::Piecewise(steps) => steps
                .iter()
                .take_while(|(ts, _)| *ts <= t)
                .last()
                .map_or(0.0, |(_, v)| *v),
            LoadProfile::Sinusoidal {
                offset,
                amplitude,
                freq_hz,
            } => offset + amplitude * (std::f64::consts::TAU * freq_hz * t).sin(),
        }
    }

    fn validate(&self) -> Result<()> {
        match self {
            LoadProfile::Constant(v) if !v.is_finite() => Err(Error::NonFinite("load torque")),
            LoadProfile::Piecewise(steps) => {
                if steps.windows(2).any(|w| w[1].0 < w[0].0) {
                    return Err(Error::invalid("load", "steps must be sorted by time"));
                }
                if steps.iter().any(|(t, v)| !t.is_finite() || !v.is_finite()) {
                    return Err(Error::NonFinite("load steps"));
                }
                Ok(())
            }
            LoadProfile::Sinusoidal { freq_hz, .. } if !(*freq_hz >= 0.0) => {
                Err(Error::invalid("load.freq_hz", "must be non-negative"))
            }
            _ => Ok(()),
        }
    }
}

/// Piecewise-linear mechanical speed `(t, ω)`, held constant outside the knots.
#[derive(Clone, Debug, PartialEq)]
pub struct SpeedProfile {
    points: Vec<(f64, f64)>,
}

impl SpeedProfile {
    pub fn new(points: Vec<(f64, f64)>) -> Result<Self> {
        if points.is_empty() {
            return Err(Error::invalid("speed profile", "needs at least one point"));
        }
        if points.windows(2).any(|w| !(w[1].0 > w[0].0)) {
            return Err(Error::invalid("speed profile", "times must be strictly increasing"));
        }
        if points.iter().any(|(t, w)| !t.is_finite() || !w.is_finite()) {
            return Err(Error::NonFinite("speed profile"));
        }
        Ok(Self { points })
    }

    pub fn constant(omega: f64) -> Self {
        Self {
            points: vec![(0.0, omega)],
        }
    }

    /// `+ω` until `t_start`, linear ramp to `−ω` over `ramp` seconds, then held.
    pub fn reversal(omega: f64, t_start: f64, ramp: f64) -> Result<Self> {
        Self::new(vec![(t_start, omega), (t_start + ramp, -omega)])
    }

    pub fn points(&self) -> &[(f64, f64)] {
        &self.points
    }

    pub fn speed(&self, t: f64) -> f64 {
        let p = &self.points;
        if t <= p[0].0 {
            return p[0].1;
        }
        for w in p.windows(2) {
            let ((t0, w0), (t1, w1)) = (w[0], w[1]);
            if t <= t1 {
                return w0 + (w1 - w0) * (t - t0) / (t1 - t0);
            }
        }
        p[p.len() - 1].1
    }

    /// Mechanical angle travelled over `[0, t]` (`t ≥ 0`).
    pub fn travel(&self, t: f64) -> f64 {
        let p = &self.points;
        let first = p[0].0.max(0.0);
        if t <= first {
            return p[0].1 * t;
        }
        let mut acc = p[0].1 * first;
        for w in p.windows(2) {
            let ((t0, w0), (t1, w1)) = (w[0], w[1]);
            if t1 <= first {
                continue;
            }
            let a = t0.max(first);
            let b = t.min(t1);
            let slope = (w1 - w0) / (t1 - t0);
            let at = |x: f64| w0 * (x - t0) + 0.5 * slope * (x - t0).powi(2);
            acc += at(b) - at(a);
            if t <= t1 {
                return acc;
            }
        }
        let (tl, wl) = p[p.len() - 1];
        acc + wl * (t - tl.max(first))
    }
}

#[derive(Clone, Debug, PartialEq)]
pub enum Mode {
    ClosedLoop,
    /// Mechanics prescribed by the profile; the currents are regulated with
    /// the true angle and the estimates are only observed.
    DrivenSpeed(SpeedProfile),
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq)]
pub struct EstimatorSet {
    pub proposed: bool,
    pub conventional: bool,
    pub equivalent: bool,
}

impl EstimatorSet {
    pub const NONE: EstimatorSet = EstimatorSet {
        proposed: false,
        conventional: false,
        equivalent: false,
    };
    pub const BOTH: EstimatorSet = EstimatorSet {
        proposed: true,
        conventional: true,
        equivalent: false,
    };
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum FeedbackSource {
    Proposed,
    Conventional,
    Equivalent,
    Sensor,
}

#[derive(Clone, Debug, PartialEq)]
pub struct ScenarioConfig {
    pub motor: MotorParams,
    pub injection: InjectionConfig,
    pub injection_enabled: bool,
    pub estimators: EstimatorSet,
    pub feedback: FeedbackSource,
    pub proposed: ProposedConfig,
    /// Corners of the conventional chain; `None` derives them from `ω_h` and `omega_star`.
    pub lti: Option<LtiChainConfig>,
    /// Speed scale `ω_*` of the conventional chain (rad/s).
    pub omega_star: f64,
    pub pll: PllGains,
    pub controller: ControllerConfig,
    pub mode: Mode,
    pub load: LoadProfile,
    pub ts: f64,
    pub duration: f64,
    /// Standard deviation of additive current-measurement noise (A).
    pub noise_std: f64,
    pub seed: u64,
    pub initial: MotorState,
    /// Every `decimation`-th sample is kept in the trace.
    pub decimation: usize,
    /// Current magnitude treated as divergence (A).
    pub divergence_current: f64,
}

impl Default for ScenarioConfig {
    /// Constant-speed closed loop on the simulation machine.
    fn default() -> Self {
        let injection = InjectionConfig::from_period(1.0, 1e-3);
        Self {
            motor: MotorParams::simulation(),
            injection,
            injection_enabled: true,
            estimators: EstimatorSet::BOTH,
            feedback: FeedbackSource::Proposed,
            proposed: ProposedConfig::default(),
            lti: None,
            omega_star: 0.5,
            pll: PllGains::default(),
            controller: ControllerConfig::default(),
            mode: Mode::ClosedLoop,
            load: LoadProfile::Constant(0.5),
            ts: 1e-3 / 50.0,
            duration: 10.0,
            noise_std: 0.0,
            seed: 0,
            initial: MotorState::default(),
            decimation: 10,
            divergence_current: 500.0,
        }
    }
}

impl ScenarioConfig {
    pub fn validate(&self) -> Result<()> {
        self.motor.validate()?;
        self.injection.validate()?;
        self.controller.validate()?;
        self.lti_chain().validate()?;
        self.load.validate()?;
        aligned_samples("epsilon", self.injection.epsilon, self.ts)?;
        if !(self.duration > 0.0 && self.duration.is_finite()) {
            return Err(Error::invalid("duration", "must be positive"));
        }
        if !(self.noise_std >= 0.0 && self.noise_std.is_finite()) {
            return Err(Error::invalid("noise_std", "must be non-negative"));
        }
        if self.decimation == 0 {
            return Err(Error::invalid("decimation", "must be at least 1"));
        }
        if !(self.divergence_current > 0.0) {
            return Err(Error::invalid("divergence_current", "must be positive"));
        }
        if !self.initial.is_finite() {
            return Err(Error::NonFinite("initial state"));
        }
        let active = match self.feedback {
            FeedbackSource::Proposed => self.estimators.proposed,
            FeedbackSource::Conventional => self.estimators.conventional,
            FeedbackSource::Equivalent => self.estimators.equivalent,
            FeedbackSource::Sensor => true,
        };
        if !active {
            return Err(Error::invalid("feedback", "feedback estimator is not enabled"));
        }
        if matches!(self.mode, Mode::ClosedLoop) && self.feedback != FeedbackSource::Sensor && !self.injection_enabled {
            return Err(Error::invalid("injection", "sensorless feedback requires the probe"));
        }
        Ok(())
    }

    pub fn lti_chain(&self) -> LtiChainConfig {
        self.lti
            .unwrap_or_else(|| LtiChainConfig::tuned(self.injection.omega_h, self.omega_star))
    }

    /// Number of steps covering `duration` (the final sample lands at `duration`).
    pub fn steps(&self) -> usize {
        (self.duration / self.ts).round() as usize
    }
}

/// Snapshot of one estimator at a sample.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct EstimatorRecord {
    pub theta_hat: f64,
    /// Mechanical speed estimate from the estimator's PLL (rad/s).
    pub omega_hat: f64,
    pub y_v: VirtualOutput,
    pub validity: Validity,
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct TraceRecord {
    pub t: f64,
    /// True electrical angle, unwrapped.
    pub theta: f64,
    /// True mechanical speed.
    pub omega: f64,
    pub i: Vec2,
    /// Applied voltage at the sample (control plus probe).
    pub v: Vec2,
    pub load_torque: f64,
    pub proposed: Option<EstimatorRecord>,
    pub conventional: Option<EstimatorRecord>,
    pub equivalent: Option<EstimatorRecord>,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum EstimatorKind {
    Proposed,
    Conventional,
    Equivalent,
}

impl TraceRecord {
    pub fn estimator(&self, kind: EstimatorKind) -> Option<&EstimatorRecord> {
        match kind {
            EstimatorKind::Proposed => self.proposed.as_ref(),
            EstimatorKind::Conventional => self.conventional.as_ref(),
            EstimatorKind::Equivalent => self.equivalent.as_ref(),
        }
    }
}

#[derive(Clone, Debug, Default, PartialEq)]
pub struct Trace {
    pub records: Vec<TraceRecord>,
}

impl Trace {
    pub fn times(&self) -> Vec<f64> {
        self.records.iter().map(|r| r.t).collect()
    }

    pub fn theta(&self) -> Vec<f64> {
        self.records.iter().map(|r| r.theta).collect()
    }

    pub fn estimates(&self, kind: EstimatorKind) -> Option<Vec<f64>> {
        self.records
            .iter()
            .map(|r| r.estimator(kind).map(|e| e.theta_hat))
            .collect()
    }

    /// Angle RMSD (mod π) of one estimator over `[t1, t2]`.
    pub fn rmsd(&self, kind: EstimatorKind, t1: f64, t2: f64) -> Result<f64> {
        let est = self
            .estimates(kind)
            .ok_or_else(|| Error::invalid("rmsd", "estimator absent from trace"))?;
        crate::estimator::rmsd(&self.times(), &self.theta(), &est, t1, t2)
    }
}

struct Tracked<E> {
    est: E,
    pll: SpeedPll,
    last: Option<EstimatorRecord>,
}

/// Step-wise simulator; [`run`] drives it to completion.
pub struct Simulation {
    cfg: ScenarioConfig,
    k: usize,
    state: MotorState,
    rng: ChaCha8Rng,
    noise: Option<Normal<f64>>,
    proposed: Option<Tracked<ProposedEstimator>>,
    conventional: Option<Tracked<ConventionalEstimator>>,
    equivalent: Option<Tracked<EquivalentEstimator>>,
    controller: Controller,
}

impl Simulation {
    pub fn new(cfg: ScenarioConfig) -> Result<Self> {
        cfg.validate()?;
        let ts = cfg.ts;
        let theta0 = cfg.proposed.initial_theta;
        let pll = || SpeedPll::new(cfg.pll, cfg.motor.pole_pairs, theta0);
        let proposed = if cfg.estimators.proposed {
            Some(Tracked {
                est: ProposedEstimator::new(cfg.motor, cfg.injection, cfg.proposed, ts)?,
                pll: pll()?,
                last: None,
            })
        } else {
            None
        };
        let conventional = if cfg.estimators.conventional {
            Some(Tracked {
                est: ConventionalEstimator::new(cfg.motor, cfg.injection, cfg.lti_chain(), theta0, ts)?,
                pll: pll()?,
                last: None,
            })
        } else {
            None
        };
        let equivalent = if cfg.estimators.equivalent {
            Some(Tracked {
                est: EquivalentEstimator::new(cfg.motor, cfg.injection, cfg.proposed, ts)?,
                pll: pll()?,
                last: None,
            })
        } else {
            None
        };
        let mut ctrl_cfg = cfg.controller;
        let mut state = cfg.initial;
        if let Mode::DrivenSpeed(profile) = &cfg.mode {
            ctrl_cfg.speed_loop = false;
            state.omega = profile.speed(0.0);
        }
        let injection = cfg.injection_enabled.then_some(cfg.injection);
        let controller = Controller::new(ctrl_cfg, cfg.motor, injection, cfg.injection.omega_h, ts)?;
        let noise = if cfg.noise_std > 0.0 {
            Some(Normal::new(0.0, cfg.noise_std).map_err(|e| Error::invalid("noise_std", e.to_string()))?)
        } else {
            None
        };
        Ok(Self {
            rng: ChaCha8Rng::seed_from_u64(cfg.seed),
            cfg,
            k: 0,
            state,
            noise,
            proposed,
            conventional,
            equivalent,
            controller,
        })
    }

    pub fn config(&self) -> &ScenarioConfig {
        &self.cfg
    }

    pub fn time(&self) -> f64 {
        self.k as f64 * self.cfg.ts
    }

    pub fn state(&self) -> &MotorState {
        &self.state
    }

    fn measure(&mut self) -> Vec2 {
        let i = self.state.current();
        match &self.noise {
            Some(n) => Vec2::new(i.x + n.sample(&mut self.rng), i.y + n.sample(&mut self.rng)),
            None => i,
        }
    }

    /// Processes the sample at the current time, advances the plant one
    /// step, and returns the record of the processed sample.
    pub fn step(&mut self) -> Result<TraceRecord> {
        let t = self.time();
        let ts = self.cfg.ts;
        let params = self.cfg.motor;
        let band = self.cfg.proposed.confidence_band;
        let i_meas = self.measure();

        if let Some(tr) = &mut self.proposed {
            let s = tr.est.step(i_meas, t);
            let omega_hat = tr.pll.step(s.theta_hat, ts);
            tr.last = Some(EstimatorRecord {
                theta_hat: s.theta_hat,
                omega_hat,
                y_v: s.y_v,
                validity: s.validity,
            });
        }
        if let Some(tr) = &mut self.conventional {
            let s = tr.est.step(i_meas, t);
            let omega_hat = tr.pll.step(s.theta_hat, ts);
            let y_v = VirtualOutput::new(s.y.x / params.ldlq(), s.y.y / params.ldlq());
            tr.last = Some(EstimatorRecord {
                theta_hat: s.theta_hat,
                omega_hat,
                y_v,
                validity: if is_confident(&y_v, &params, band) {
                    Validity::Valid
                } else {
                    Validity::LowConfidence
                },
            });
        }
        if let Some(tr) = &mut self.equivalent {
            let s = tr.est.step(i_meas, t);
            let omega_hat = tr.pll.step(s.theta_hat, ts);
            tr.last = Some(EstimatorRecord {
                theta_hat: s.theta_hat,
                omega_hat,
                y_v: s.y_v,
                validity: s.validity,
            });
        }

        let sensor = Feedback {
            theta: self.state.theta,
            omega: self.state.omega,
        };
        let from = |r: &Option<EstimatorRecord>, gate: bool| {
            r.filter(|e| !(gate && e.validity == Validity::WarmingUp))
                .map(|e| Feedback {
                    theta: e.theta_hat,
                    omega: e.omega_hat,
                })
        };
        let feedback = match (&self.cfg.mode, self.cfg.feedback) {
            (Mode::DrivenSpeed(_), _) | (_, FeedbackSource::Sensor) => Some(sensor),
            (_, FeedbackSource::Proposed) => from(&self.proposed.as_ref().and_then(|x| x.last), true),
            (_, FeedbackSource::Conventional) => {
                from(&self.conventional.as_ref().and_then(|x| x.last), false)
            }
            (_, FeedbackSource::Equivalent) => from(&self.equivalent.as_ref().and_then(|x| x.last), true),
        };
        let out = self.controller.step(i_meas, t, feedback, ts);

        let record = TraceRecord {
            t,
            theta: self.state.theta,
            omega: self.state.omega,
            i: self.state.current(),
            v: out.v_total,
            load_torque: self.cfg.load.torque(t),
            proposed: self.proposed.as_ref().and_then(|x| x.last),
            conventional: self.conventional.as_ref().and_then(|x| x.last),
            equivalent: self.equivalent.as_ref().and_then(|x| x.last),
        };

        self.advance(t, out.v_control)?;
        self.k += 1;
        Ok(record)
    }

    fn advance(&mut self, t: f64, v_control: Vec2) -> Result<()> {
        let ts = self.cfg.ts;
        let params = self.cfg.motor;
        let injection = self.cfg.injection_enabled.then_some(self.cfg.injection);
        let v_at = |tau: f64| match &injection {
            Some(inj) => v_control + injection_voltage(inj, tau),
            None => v_control,
        };
        match &self.cfg.mode {
            Mode::ClosedLoop => {
                let load = &self.cfg.load;
                let s = &self.state;
                let y = [s.i_alpha, s.i_beta, s.theta, s.omega];
                let next = rk4_step(
                    |tau, y: &[f64; 4]| {
                        let v = v_at(tau);
                        let st = MotorState {
                            i_alpha: y[0],
                            i_beta: y[1],
                            theta: y[2],
                            omega: y[3],
                        };
                        let inputs = MotorInputs {
                            v_alpha: v.x,
                            v_beta: v.y,
                            load_torque: load.torque(tau),
                        };
                        let d = state_derivative(&params, &st, &inputs)?;
                        Ok([d.i_alpha, d.i_beta, d.theta, d.omega])
                    },
                    t,
                    &y,
                    ts,
                )
                .map_err(|e| self.diverged(t, e))?;
                self.state = MotorState {
                    i_alpha: next[0],
                    i_beta: next[1],
                    theta: next[2],
                    omega: next[3],
                };
            }
            Mode::DrivenSpeed(profile) => {
                let theta0 = self.cfg.initial.theta;
                let n_p = params.n_p();
                let y = [self.state.i_alpha, self.state.i_beta];
                let next = rk4_step(
                    |tau, y: &[f64; 2]| {
                        let th = theta0 + n_p * profile.travel(tau);
                        let di = current_derivative(
                            &params,
                            Vec2::new(y[0], y[1]),
                            th,
                            profile.speed(tau),
                            v_at(tau),
                        );
                        Ok([di.x, di.y])
                    },
                    t,
                    &y,
                    ts,
                )
                .map_err(|e| self.diverged(t, e))?;
                let t1 = t + ts;
                self.state = MotorState {
                    i_alpha: next[0],
                    i_beta: next[1],
                    theta: theta0 + n_p * profile.travel(t1),
                    omega: profile.speed(t1),
                };
            }
        }
        let mag = self.state.current().norm();
        if mag > self.cfg.divergence_current {
            return Err(Error::Divergence {
                t: t + ts,
                detail: format!("|i| = {mag:.3} A exceeds {} A", self.cfg.divergence_current),
            });
        }
        Ok(())
    }

    fn diverged(&self, t: f64, e: Error) -> Error {
        Error::Divergence {
            t,
            detail: e.to_string(),
        }
    }
}

/// Runs the scenario to `duration`, keeping every `decimation`-th sample.
pub fn run(cfg: &ScenarioConfig) -> Result<Trace> {
    let mut sim = Simulation::new(cfg.clone())?;
    let n = cfg.steps();
    let mut records = Vec::with_capacity(n / cfg.decimation + 2);
    for k in 0..=n {
        let r = sim.step()?;
        if k % cfg.decimation == 0 {
            records.push(r);
        }
    }
    Ok(Trace { records })
}

/// Closed-loop run; rejects driven-speed configurations.
pub fn run_closed_loop(cfg: &ScenarioConfig) -> Result<Trace> {
    if !matches!(cfg.mode, Mode::ClosedLoop) {
        return Err(Error::invalid("mode", "expected closed-loop mode"));
    }
    run(cfg)
}

/// Run with prescribed mechanics.
pub fn run_driven_speed(cfg: &ScenarioConfig) -> Result<Trace> {
    if !matches!(cfg.mode, Mode::DrivenSpeed(_)) {
        return Err(Error::invalid("mode", "expected driven-speed mode"));
    }
    run(cfg)
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct ResidualReport {
    pub epsilon: f64,
    /// `max ‖i − ī − ε·y_v(θ)·S‖` over the window (A).
    pub max_residual: f64,
    /// Largest ripple magnitude `‖i − ī‖` over the window, for scale.
    pub max_ripple: f64,
}

/// Runs the scenario twice with sensor feedback, with and without the
/// probe, and compares the difference with the first-order ripple model.
pub fn averaging_residual(cfg: &ScenarioConfig, t1: f64, t2: f64) -> Result<ResidualReport> {
    if !(t2 > t1 && t1 >= 0.0 && t2 <= cfg.duration + 0.5 * cfg.ts) {
        return Err(Error::WindowOutOfRange {
            t1,
            t2,
            start: 0.0,
            end: cfg.duration,
        });
    }
    let mut on = cfg.clone();
    on.feedback = FeedbackSource::Sensor;
    on.estimators = EstimatorSet::NONE;
    on.noise_std = 0.0;
    on.injection_enabled = true;
    on.injection.phi_p = 0.0;
    let mut off = on.clone();
    off.injection_enabled = false;

    let mut a = Simulation::new(on)?;
    let mut b = Simulation::new(off)?;
    let inj = cfg.injection;
    let params = cfg.motor;
    let (mut max_residual, mut max_ripple) = (0.0f64, 0.0f64);
    for _ in 0..=cfg.steps() {
        let ra = a.step()?;
        let rb = b.step()?;
        if (ra.t - rb.t).abs() > 1e-12 {
            return Err(Error::PairMismatch(format!("time {} vs {}", ra.t, rb.t)));
        }
        if ra.t < t1 - 1e-12 || ra.t > t2 + 1e-12 {
            continue;
        }
        let y = VirtualOutput::exact(&params, ra.theta);
        let model = Vec2::new(y.y1, y.y2) * (inj.epsilon * probe_signal(&inj, ra.t));
        let ripple = ra.i - rb.i;
        max_ripple = max_ripple.max(ripple.norm());
        max_residual = max_residual.max((ripple - model).norm());
    }
    Ok(ResidualReport {
        epsilon: inj.epsilon,
        max_residual,
        max_ripple,
    })
}
