//! The delay/gradient estimator rewritten as an HPF / demodulate / LPF chain:
//! `HPF = D_ε − Z_{2ε}`, carrier phase `3π/2`, and `LPF = ½(V_h/2π)²·H`
//! where `H` is `ż = −γS²z + γu`.

use std::f64::consts::{FRAC_PI_2, TAU};

use crate::error::Result;
use crate::estimator::conventional::inductance_angle;
use crate::estimator::proposed::ProposedConfig;
use crate::estimator::virtual_output::{is_confident, BranchTracker, VirtualOutput};
use crate::estimator::{settle_samples, EstimateSample, Validity};
use crate::math::Vec2;
use crate::motor::MotorParams;
use crate::signal::{DelayedDifference, InjectionConfig, LtvFlow, Weighting};

/// Carrier phase under which the gradient estimator matches the LTI chain layout.
pub const EQUIVALENT_PHASE: f64 = 3.0 * FRAC_PI_2;

#[derive(Clone, Debug)]
pub struct EquivalentEstimator {
    params: MotorParams,
    cfg: ProposedConfig,
    hpf: [DelayedDifference; 2],
    lpf: [LtvFlow; 2],
    /// `2(ω_h/V_h)L_dL_q · ½(V_h/2π)²`
    scale: f64,
    tracker: BranchTracker,
    last: EstimateSample,
    settle: usize,
    flowed: usize,
}

impl EquivalentEstimator {
    /// Compensation in `cfg` is ignored; this form exists for the uncompensated comparison.
    pub fn new(
        params: MotorParams,
        injection: InjectionConfig,
        cfg: ProposedConfig,
        ts: f64,
    ) -> Result<Self> {
        params.validate()?;
        injection.validate()?;
        let d = injection.epsilon;
        let demod = Weighting::Demodulate {
            phi: EQUIVALENT_PHASE,
        };
        let lpf_gain = 0.5 * (injection.v_h / TAU).powi(2);
        Ok(Self {
            params,
            cfg,
            hpf: [DelayedDifference::new(d, ts)?, DelayedDifference::new(d, ts)?],
            lpf: [
                LtvFlow::new(injection, cfg.gamma_alpha, demod)?,
                LtvFlow::new(injection, cfg.gamma_beta, demod)?,
            ],
            scale: 2.0 * injection.omega_h / injection.v_h * params.ldlq() * lpf_gain,
            tracker: BranchTracker::new(cfg.initial_theta),
            last: EstimateSample::initial(cfg.initial_theta),
            settle: settle_samples(&injection, &cfg, ts),
            flowed: 0,
        })
    }

    pub fn step(&mut self, i_ab: Vec2, t: f64) -> EstimateSample {
        let ha = self.hpf[0].step(i_ab.x);
        let hb = self.hpf[1].step(i_ab.y);
        let (Some(ha), Some(hb)) = (ha, hb) else {
            self.last.validity = Validity::WarmingUp;
            return self.last;
        };
        let y = Vec2::new(self.lpf[0].step(t, ha), self.lpf[1].step(t, hb)) * self.scale;
        let y_v = VirtualOutput::new(y.x / self.params.ldlq(), y.y / self.params.ldlq());
        self.flowed += 1;
        let settled = self.flowed > self.settle;
        let confident = is_confident(&y_v, &self.params, self.cfg.confidence_band);
        let theta_hat = if settled && confident {
            self.tracker.update(inductance_angle(y, &self.params))
        } else {
            self.tracker.theta()
        };
        self.last = EstimateSample {
            theta_hat,
            y_v,
            y_v_raw: y_v,
            regressor: Vec2::new(ha, hb),
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
