//! Position estimators, angle recovery, speed PLL and error metrics.

pub mod calibrate;
pub mod conventional;
pub mod equivalent;
pub mod ltp;
pub mod metrics;
pub mod pll;
pub mod proposed;
pub mod virtual_output;

pub use calibrate::fit_compensation;
pub use conventional::{ConventionalEstimator, ConventionalSample};
pub use equivalent::EquivalentEstimator;
pub use ltp::{ltp_lowpass_check, LtpReport};
pub use metrics::{angle_error_mod_pi, rmsd};
pub use pll::{PllGains, SpeedPll};
pub use proposed::{Compensation, ProposedConfig, ProposedEstimator};
pub use virtual_output::{virtual_output_to_angle, BranchTracker, VirtualOutput};

use crate::math::Vec2;
use crate::signal::gradient::averaged_rate;
use crate::signal::InjectionConfig;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum Validity {
    /// Delay / hold windows not yet filled.
    WarmingUp,
    /// Estimate too far from the nominal circle; the angle is held.
    LowConfidence,
    Valid,
}

impl Validity {
    pub fn code(self) -> u8 {
        match self {
            Validity::WarmingUp => 0,
            Validity::LowConfidence => 1,
            Validity::Valid => 2,
        }
    }

    pub fn from_code(code: u8) -> Option<Self> {
        match code {
            0 => Some(Validity::WarmingUp),
            1 => Some(Validity::LowConfidence),
            2 => Some(Validity::Valid),
            _ => None,
        }
    }
}

/// One output sample of the gradient-type estimators.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct EstimateSample {
    /// Branch-tracked angle estimate (held while not valid).
    pub theta_hat: f64,
    /// Compensated virtual-output estimate.
    pub y_v: VirtualOutput,
    /// Uncompensated estimate.
    pub y_v_raw: VirtualOutput,
    /// Regressor `Y_f`.
    pub regressor: Vec2,
    pub validity: Validity,
}

/// Flow time constants waited out before a gradient-type estimate is reported.
pub const SETTLE_TIME_CONSTANTS: f64 = 5.0;

/// Samples the flows need, once the regressor windows are full, to forget
/// their zero initial state: `SETTLE_TIME_CONSTANTS / (γ_min⟨S²⟩)`. Until
/// then the output stays `WarmingUp` and the branch is not updated.
pub fn settle_samples(injection: &InjectionConfig, cfg: &ProposedConfig, ts: f64) -> usize {
    let rate = averaged_rate(injection, cfg.gamma_alpha.min(cfg.gamma_beta));
    (SETTLE_TIME_CONSTANTS / rate / ts).ceil() as usize
}

impl EstimateSample {
    pub(crate) fn initial(theta: f64) -> Self {
        Self {
            theta_hat: theta,
            y_v: VirtualOutput::default(),
            y_v_raw: VirtualOutput::default(),
            regressor: Vec2::ZERO,
            validity: Validity::WarmingUp,
        }
    }
}
