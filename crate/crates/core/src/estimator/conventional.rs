//! Conventional HPF / demodulate / LPF chain.
//!
//! ```text
//! y_h = HPF[i_αβ]
//! Y   = 2(ω_h/V_h)·L_dL_q·LPF[y_h sin(ω_h t + φ)]
//! θ̂   = ½·atan2(Y_β, Y_α − L₀)
//! ```

use crate::error::Result;
use crate::estimator::virtual_output::BranchTracker;
use crate::math::Vec2;
use crate::motor::MotorParams;
use crate::signal::{HighPass, InjectionConfig, LowPass, LtiChainConfig};

/// `½·atan2(Y_β, Y_α − L₀)` for inductance-scaled outputs (sign-corrected when `L_d > L_q`).
pub fn inductance_angle(y: Vec2, params: &MotorParams) -> f64 {
    let sign = if params.l1() < 0.0 { 1.0 } else { -1.0 };
    0.5 * (sign * y.y).atan2(sign * (y.x - params.l0()))
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct ConventionalSample {
    /// Estimate in `(−π/2, π/2]`.
    pub theta_raw: f64,
    /// Branch-tracked estimate.
    pub theta_hat: f64,
    /// Scaled LPF outputs `(Y_α, Y_β)` (H).
    pub y: Vec2,
}

#[derive(Clone, Debug)]
pub struct ConventionalEstimator {
    params: MotorParams,
    injection: InjectionConfig,
    chain: LtiChainConfig,
    hpf: [HighPass; 2],
    lpf: [LowPass; 2],
    scale: f64,
    tracker: BranchTracker,
    last: ConventionalSample,
}

impl ConventionalEstimator {
    /// The demodulation phase is `injection.phi`.
    pub fn new(
        params: MotorParams,
        injection: InjectionConfig,
        chain: LtiChainConfig,
        initial_theta: f64,
        ts: f64,
    ) -> Result<Self> {
        params.validate()?;
        injection.validate()?;
        chain.validate()?;
        let theta0 = inductance_angle(Vec2::ZERO, &params);
        Ok(Self {
            params,
            injection,
            chain,
            hpf: [HighPass::new(chain.lambda_h, ts), HighPass::new(chain.lambda_h, ts)],
            lpf: [LowPass::new(chain.lambda_ell, ts), LowPass::new(chain.lambda_ell, ts)],
            scale: 2.0 * injection.omega_h / injection.v_h * params.ldlq(),
            tracker: BranchTracker::new(initial_theta),
            last: ConventionalSample {
                theta_raw: theta0,
                theta_hat: initial_theta,
                y: Vec2::ZERO,
            },
        })
    }

    pub fn chain(&self) -> &LtiChainConfig {
        &self.chain
    }

    pub fn last(&self) -> &ConventionalSample {
        &self.last
    }

    pub fn step(&mut self, i_ab: Vec2, t: f64) -> ConventionalSample {
        let carrier = (self.injection.omega_h * t + self.injection.phi).sin();
        let ya = self.lpf[0].step(self.hpf[0].step(i_ab.x) * carrier);
        let yb = self.lpf[1].step(self.hpf[1].step(i_ab.y) * carrier);
        let y = Vec2::new(ya, yb) * self.scale;
        let theta_raw = inductance_angle(y, &self.params);
        self.last = ConventionalSample {
            theta_raw,
            theta_hat: self.tracker.update(theta_raw),
            y,
        };
        self.last
    }
}
