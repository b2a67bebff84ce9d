//! Offline fitting of the port compensation gains from a constant-speed run.
//!
//! The fit matches the extremes of the raw estimate to those of the exact
//! virtual output: `y₁ ∈ [c − r, c + r]`, `y₂ ∈ [−r, r]`.

use std::f64::consts::TAU;

use crate::error::{Error, Result};
use crate::estimator::proposed::Compensation;
use crate::estimator::virtual_output::{circle_center, circle_radius, VirtualOutput};
use crate::motor::MotorParams;

/// Minimum electrical travel covered by a calibration trace.
pub const MIN_REVOLUTIONS: f64 = 2.0;

/// Fits `(ℓ₁, ℓ₂, ℓ₃)` from raw estimates `y_v` recorded while the electrical
/// angle swept `theta` (unwrapped).
pub fn fit_compensation(
    params: &MotorParams,
    theta: &[f64],
    y_v: &[VirtualOutput],
) -> Result<Compensation> {
    if theta.len() != y_v.len() || theta.is_empty() {
        return Err(Error::invalid("calibration", "angle and estimate series must match"));
    }
    let travel = (theta[theta.len() - 1] - theta[0]).abs();
    if travel < MIN_REVOLUTIONS * TAU {
        return Err(Error::TraceTooShort(format!(
            "calibration needs {MIN_REVOLUTIONS} electrical revolutions, trace covers {:.3}",
            travel / TAU
        )));
    }
    let extremes = |f: fn(&VirtualOutput) -> f64| {
        y_v.iter()
            .map(f)
            .fold((f64::INFINITY, f64::NEG_INFINITY), |(lo, hi), v| (lo.min(v), hi.max(v)))
    };
    let (lo1, hi1) = extremes(|y| y.y1);
    let (lo2, hi2) = extremes(|y| y.y2);
    let (amp1, mean1) = (0.5 * (hi1 - lo1), 0.5 * (hi1 + lo1));
    let amp2 = 0.5 * (hi2 - lo2);
    if !(amp1 > 0.0 && amp2 > 0.0) {
        return Err(Error::DegenerateSignal { distance: amp1.min(amp2) });
    }
    let (c, r) = (circle_center(params), circle_radius(params));
    let ell1 = r / amp1;
    let comp = Compensation {
        ell1,
        ell2: c - ell1 * mean1,
        ell3: r / amp2,
    };
    comp.validate()?;
    Ok(comp)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn synth(params: &MotorParams, scale: f64, bias: f64) -> (Vec<f64>, Vec<VirtualOutput>) {
        let theta: Vec<f64> = (0..2000).map(|k| k as f64 * 0.01).collect();
        let y = theta
            .iter()
            .map(|&th| {
                let y = VirtualOutput::exact(params, th);
                VirtualOutput::new(scale * y.y1 + bias, scale * y.y2)
            })
            .collect();
        (theta, y)
    }

    #[test]
    fn undistorted_trace_is_identity() {
        let p = MotorParams::simulation();
        let (th, y) = synth(&p, 1.0, 0.0);
        let c = fit_compensation(&p, &th, &y).unwrap();
        assert!((c.ell1 - 1.0).abs() < 0.02 && (c.ell3 - 1.0).abs() < 0.02);
        assert!(c.ell2.abs() < 0.02 * circle_center(&p));
    }

    #[test]
    fn scaled_trace_is_inverted() {
        let p = MotorParams::simulation();
        let (th, y) = synth(&p, 0.8, 0.0);
        let c = fit_compensation(&p, &th, &y).unwrap();
        assert!((c.ell1 - 1.25).abs() < 0.01 && (c.ell3 - 1.25).abs() < 0.01);
        let fixed = c.apply(y[123]);
        let want = VirtualOutput::exact(&p, th[123]);
        assert!((fixed.y1 - want.y1).abs() < 0.01 * want.y1.abs());
    }

    #[test]
    fn short_trace_is_rejected() {
        let p = MotorParams::simulation();
        let (th, y) = synth(&p, 1.0, 0.0);
        assert!(matches!(
            fit_compensation(&p, &th[..500], &y[..500]),
            Err(Error::TraceTooShort(_))
        ));
    }
}
