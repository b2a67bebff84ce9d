//! Delay / zero-order-hold / gradient position estimator.
//!
//! The regressor `Y_f = (D_ε − Z_{2ε})[i_αβ]` is approximately `S(t)·ε y_v`;
//! a probe-driven gradient flow per axis demodulates it into `ŷ_v`, which
//! is compensated and mapped to an angle.

use crate::error::{Error, Result};
use crate::estimator::virtual_output::{is_confident, raw_angle, BranchTracker, VirtualOutput};
use crate::estimator::{settle_samples, EstimateSample, Validity};
use crate::math::Vec2;
use crate::motor::MotorParams;
use crate::signal::{DelayedDifference, InjectionConfig, LtvFlow};

/// Port compensation `ŷᵖ₁ = ℓ₁ŷ₁ + ℓ₂`, `ŷᵖ₂ = ℓ₃ŷ₂`.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Compensation {
    pub ell1: f64,
    pub ell2: f64,
    pub ell3: f64,
}

impl Default for Compensation {
    fn default() -> Self {
        Self {
            ell1: 1.0,
            ell2: 0.0,
            ell3: 1.0,
        }
    }
}

impl Compensation {
    pub fn apply(&self, y: VirtualOutput) -> VirtualOutput {
        VirtualOutput::new(self.ell1 * y.y1 + self.ell2, self.ell3 * y.y2)
    }

    pub fn validate(&self) -> Result<()> {
        if self.ell1 == 0.0 || !self.ell1.is_finite() {
            return Err(Error::invalid("ell1", "must be finite and non-zero"));
        }
        if self.ell3 == 0.0 || !self.ell3.is_finite() {
            return Err(Error::invalid("ell3", "must be finite and non-zero"));
        }
        if !self.ell2.is_finite() {
            return Err(Error::NonFinite("ell2"));
        }
        Ok(())
    }
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct ProposedConfig {
    pub gamma_alpha: f64,
    pub gamma_beta: f64,
    pub compensation: Compensation,
    /// Confidence band, as a fraction of the nominal circle radius.
    pub confidence_band: f64,
    /// Angle reported until the first confident estimate (selects the branch).
    pub initial_theta: f64,
}

impl Default for ProposedConfig {
    fn default() -> Self {
        Self {
            gamma_alpha: 1e4,
            gamma_beta: 1e4,
            compensation: Compensation::default(),
            confidence_band: 0.1,
            initial_theta: 0.0,
        }
    }
}

#[derive(Clone, Debug)]
pub struct ProposedEstimator {
    params: MotorParams,
    cfg: ProposedConfig,
    regressor: [DelayedDifference; 2],
    flows: [LtvFlow; 2],
    tracker: BranchTracker,
    last: EstimateSample,
    settle: usize,
    flowed: usize,
}

impl ProposedEstimator {
    /// `ts` must divide the probe period exactly.
    pub fn new(
        params: MotorParams,
        injection: InjectionConfig,
        cfg: ProposedConfig,
        ts: f64,
    ) -> Result<Self> {
        params.validate()?;
        injection.validate()?;
        cfg.compensation.validate()?;
        let d = injection.epsilon;
        Ok(Self {
            params,
            cfg,
            regressor: [DelayedDifference::new(d, ts)?, DelayedDifference::new(d, ts)?],
            flows: [
                LtvFlow::gradient(injection, cfg.gamma_alpha)?,
                LtvFlow::gradient(injection, cfg.gamma_beta)?,
            ],
            tracker: BranchTracker::new(cfg.initial_theta),
            last: EstimateSample::initial(cfg.initial_theta),
            settle: settle_samples(&injection, &cfg, ts),
            flowed: 0,
        })
    }

    pub fn config(&self) -> &ProposedConfig {
        &self.cfg
    }

    pub fn set_compensation(&mut self, c: Compensation) -> Result<()> {
        c.validate()?;
        self.cfg.compensation = c;
        Ok(())
    }

    pub fn last(&self) -> &EstimateSample {
        &self.last
    }

    /// Consumes one current sample taken at `t`.
    pub fn step(&mut self, i_ab: Vec2, t: f64) -> EstimateSample {
        let ya = self.regressor[0].step(i_ab.x);
        let yb = self.regressor[1].step(i_ab.y);
        let (Some(ya), Some(yb)) = (ya, yb) else {
            self.last.validity = Validity::WarmingUp;
            return self.last;
        };
        self.flows[0].step(t, ya);
        self.flows[1].step(t, yb);
        let raw = VirtualOutput::new(self.flows[0].estimate(), self.flows[1].estimate());
        let y_v = self.cfg.compensation.apply(raw);
        self.flowed += 1;
        let settled = self.flowed > self.settle;
        let confident = is_confident(&y_v, &self.params, self.cfg.confidence_band);
        let theta_hat = if settled && confident {
            self.tracker.update(raw_angle(&y_v, &self.params))
        } else {
            self.tracker.theta()
        };
        self.last = EstimateSample {
            theta_hat,
            y_v,
            y_v_raw: raw,
            regressor: Vec2::new(ya, yb),
            validity: if !settled {
                Validity::WarmingUp
            } else if confident {
                Validity::Valid
            } else {
                Validity::LowConfidence
            },
        };
        self.last
    }
}
