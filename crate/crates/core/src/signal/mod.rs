//! Discrete-time realizations of the signal operators: probe, delay,
//! weighted zero-order hold, probe-driven LTV flows, LTI filters, and
//! continuous frequency responses.

pub mod delay;
pub mod freq;
pub mod gradient;
pub mod lti;
pub mod probe;
pub mod zoh;

pub use delay::DelayLine;
pub use freq::{
    bode_table, gd_frequency_response, gd_phase_unwrapped, hpf_frequency_response,
    lpf_frequency_response, log_grid, write_bode_csv, BodePoint,
};
pub use gradient::{LtvFlow, Weighting};
pub use lti::{HighPass, LowPass, LtiChainConfig};
pub use probe::{aligned_samples, injection_voltage, probe_signal, InjectionConfig};
pub use zoh::ZeroOrderHold;

use crate::error::Result;

/// `(D_d − Z_{2d})[u]`: the delayed-difference high-pass that produces the regressor.
#[derive(Clone, Debug)]
pub struct DelayedDifference {
    delay: DelayLine,
    zoh: ZeroOrderHold,
}

impl DelayedDifference {
    pub fn new(d: f64, ts: f64) -> Result<Self> {
        Ok(Self {
            delay: DelayLine::new(d, ts)?,
            zoh: ZeroOrderHold::new(2.0 * d, ts)?,
        })
    }

    pub fn step(&mut self, u: f64) -> Option<f64> {
        let delayed = self.delay.step(u);
        let mean = self.zoh.step(u);
        match (delayed, mean) {
            (Some(a), Some(b)) => Some(a - b),
            _ => None,
        }
    }

    pub fn is_warm(&self) -> bool {
        self.delay.is_warm() && self.zoh.is_warm()
    }
}
