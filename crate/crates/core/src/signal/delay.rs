use std::collections::VecDeque;

use crate::error::Result;
use crate::signal::probe::aligned_samples;

/// Sample-aligned pure delay `u(t) ↦ u(t − d)`.
#[derive(Clone, Debug)]
pub struct DelayLine {
    delay: f64,
    len: usize,
    ring: VecDeque<f64>,
}

impl DelayLine {
    /// `delay` must be an integer multiple of `ts`.
    pub fn new(delay: f64, ts: f64) -> Result<Self> {
        let len = aligned_samples("delay", delay, ts)?;
        Ok(Self {
            delay,
            len,
            ring: VecDeque::with_capacity(len + 1),
        })
    }

    pub fn delay(&self) -> f64 {
        self.delay
    }

    pub fn len_samples(&self) -> usize {
        self.len
    }

    /// True once `d/Ts` samples have been absorbed.
    pub fn is_warm(&self) -> bool {
        self.ring.len() >= self.len
    }

    /// Pushes `u` and returns the sample from exactly `d` seconds ago, if any.
    pub fn step(&mut self, u: f64) -> Option<f64> {
        self.ring.push_back(u);
        if self.ring.len() > self.len {
            self.ring.pop_front()
        } else {
            None
        }
    }

    pub fn reset(&mut self) {
        self.ring.clear();
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn constant_after_warmup() {
        let mut d = DelayLine::new(1e-3, 1e-4).unwrap();
        for k in 0..30 {
            let out = d.step(2.5);
            if k < 10 {
                assert!(out.is_none());
            } else {
                assert_eq!(out, Some(2.5));
            }
        }
        assert!(d.is_warm());
    }

    #[test]
    fn ramp_shifts_by_delay() {
        let ts = 1e-5;
        let mut d = DelayLine::new(1e-3, ts).unwrap();
        for k in 0..1000 {
            let t = k as f64 * ts;
            if let Some(y) = d.step(t) {
                assert!((y - (t - 1e-3)).abs() < 1e-15);
            }
        }
    }

    #[test]
    fn sine_shift_is_exact() {
        let d_s = std::f64::consts::TAU / 5000.0;
        let ts = d_s / 40.0;
        let mut d = DelayLine::new(d_s, ts).unwrap();
        let mut worst: f64 = 0.0;
        for k in 0..20_000 {
            if let Some(y) = d.step((500.0 * k as f64 * ts).sin()) {
                let want = (500.0 * (k - 40) as f64 * ts).sin();
                worst = worst.max((y - want).abs());
            }
        }
        assert!(worst <= 1e-12, "{worst}");
    }

    #[test]
    fn composition_adds_delays() {
        let ts = 1e-4;
        let mut a = DelayLine::new(3e-4, ts).unwrap();
        let mut b = DelayLine::new(5e-4, ts).unwrap();
        let mut ab = DelayLine::new(8e-4, ts).unwrap();
        for k in 0..200 {
            let u = (k as f64 * 0.37).sin() + 0.01 * k as f64;
            let chained = a.step(u).and_then(|v| b.step(v));
            let direct = ab.step(u);
            if let Some(c) = chained {
                assert_eq!(Some(c), direct);
            }
        }
    }

    #[test]
    fn rejects_misaligned() {
        assert!(DelayLine::new(1.05e-4, 1e-5).is_err());
    }
}
