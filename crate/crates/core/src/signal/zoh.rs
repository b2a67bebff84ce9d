use std::collections::VecDeque;

use crate::error::{Error, Result};
use crate::signal::probe::aligned_samples;

/// Weighted zero-order hold `Z_w[u](t) = (χ(t) − χ(t − w))/w` with `χ̇ = u`.
///
/// `χ` is accumulated by the trapezoidal rule in units of samples, so the
/// output is the trailing trapezoidal mean of `u` over `w`. The stored
/// integrals are re-baselined once per window to keep them small.
#[derive(Clone, Debug)]
pub struct ZeroOrderHold {
    window: f64,
    len: usize,
    /// χ/Ts for the last `len + 1` samples.
    chi: VecDeque<f64>,
    prev: Option<f64>,
    since_rebase: usize,
}

impl ZeroOrderHold {
    pub fn new(window: f64, ts: f64) -> Result<Self> {
        let len = aligned_samples("window", window, ts)?;
        if len == 0 {
            return Err(Error::invalid("window", "must span at least one step"));
        }
        Ok(Self {
            window,
            len,
            chi: VecDeque::with_capacity(len + 2),
            prev: None,
            since_rebase: 0,
        })
    }

    pub fn window(&self) -> f64 {
        self.window
    }

    pub fn is_warm(&self) -> bool {
        self.chi.len() > self.len
    }

    pub fn step(&mut self, u: f64) -> Option<f64> {
        let chi = match (self.prev, self.chi.back()) {
            (Some(p), Some(&last)) => last + 0.5 * (p + u),
            _ => 0.0,
        };
        self.prev = Some(u);
        self.chi.push_back(chi);
        if self.chi.len() > self.len + 1 {
            self.chi.pop_front();
        }
        self.since_rebase += 1;
        if self.since_rebase >= self.len {
            self.since_rebase = 0;
            let base = self.chi[0];
            for c in self.chi.iter_mut() {
                *c -= base;
            }
        }
        if self.is_warm() {
            Some((self.chi[self.len] - self.chi[0]) / self.len as f64)
        } else {
            None
        }
    }

    pub fn reset(&mut self) {
        self.chi.clear();
        self.prev = None;
        self.since_rebase = 0;
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::f64::consts::TAU;

    #[test]
    fn constant_is_preserved() {
        let mut z = ZeroOrderHold::new(2e-3, 2e-5).unwrap();
        for k in 0..1000 {
            let out = z.step(1.75);
            if k < 100 {
                assert!(out.is_none());
            } else {
                assert_eq!(out, Some(1.75));
            }
        }
    }

    #[test]
    fn whole_periods_of_sine_average_to_zero() {
        let eps = 1e-3;
        let ts = eps / 50.0;
        let mut z = ZeroOrderHold::new(2.0 * eps, ts).unwrap();
        let w = TAU / eps;
        for k in 0..20_000 {
            if let Some(y) = z.step((w * k as f64 * ts).sin()) {
                assert!(y.abs() < 1e-12, "{y}");
            }
        }
    }

    #[test]
    fn ramp_mean_lags_by_half_window() {
        let ts = 1e-5;
        let w = 2e-3;
        let mut z = ZeroOrderHold::new(w, ts).unwrap();
        for k in 0..100_000 {
            let t = k as f64 * ts;
            if let Some(y) = z.step(t) {
                assert!((y - (t - w / 2.0)).abs() < 1e-10, "{y} at {t}");
            }
        }
    }
}
