use std::f64::consts::PI;

use crate::error::{Error, Result};
use crate::motor::MotorParams;

/// Position-bearing vector `y_v` (1/H).
#[derive(Clone, Copy, Debug, Default, PartialEq)]
pub struct VirtualOutput {
    pub y1: f64,
    pub y2: f64,
}

impl VirtualOutput {
    pub const fn new(y1: f64, y2: f64) -> Self {
        Self { y1, y2 }
    }

    /// `y_v(θ) = (L₀ − L₁ cos 2θ, −L₁ sin 2θ)/(L_d L_q)`.
    pub fn exact(params: &MotorParams, theta: f64) -> Self {
        let (s, c) = (2.0 * theta).sin_cos();
        let k = 1.0 / params.ldlq();
        Self::new(k * (params.l0() - params.l1() * c), -k * params.l1() * s)
    }

    /// Distance from the circle center `(L₀/(L_dL_q), 0)`.
    pub fn distance_from_center(&self, params: &MotorParams) -> f64 {
        (self.y1 - circle_center(params)).hypot(self.y2)
    }
}

pub fn circle_center(params: &MotorParams) -> f64 {
    params.l0() / params.ldlq()
}

pub fn circle_radius(params: &MotorParams) -> f64 {
    params.l1().abs() / params.ldlq()
}

/// `½·atan2(y₂, y₁ − L₀/(L_dL_q))` in `(−π/2, π/2]`.
///
/// Written for `L_d < L_q`; both coordinates are sign-flipped when `L₁ > 0`
/// so the same θ comes back.
pub fn raw_angle(y: &VirtualOutput, params: &MotorParams) -> f64 {
    let sign = if params.l1() < 0.0 { 1.0 } else { -1.0 };
    0.5 * (sign * y.y2).atan2(sign * (y.y1 - circle_center(params)))
}

/// `raw + kπ`, with `k` chosen to land nearest `reference`.
pub fn nearest_branch(raw: f64, reference: f64) -> f64 {
    raw + ((reference - raw) / PI).round() * PI
}

/// Recovers the unwrapped angle from a virtual output, tracking the branch of `prev_theta`.
pub fn virtual_output_to_angle(
    y: &VirtualOutput,
    params: &MotorParams,
    prev_theta: f64,
    tolerance: f64,
) -> Result<f64> {
    let distance = y.distance_from_center(params);
    if !(distance > tolerance) {
        return Err(Error::DegenerateSignal { distance });
    }
    Ok(nearest_branch(raw_angle(y, params), prev_theta))
}

/// Continuity of the unwrapped estimate across samples.
#[derive(Clone, Copy, Debug)]
pub struct BranchTracker {
    theta: f64,
}

impl BranchTracker {
    pub fn new(initial: f64) -> Self {
        Self { theta: initial }
    }

    pub fn update(&mut self, raw: f64) -> f64 {
        self.theta = nearest_branch(raw, self.theta);
        self.theta
    }

    pub fn theta(&self) -> f64 {
        self.theta
    }
}

/// Circle-band confidence test on an estimated virtual output.
///
/// Confident when the distance from the circle center is within
/// `[band·r, (2 − band)·r]` of the nominal radius `r`.
pub fn is_confident(y: &VirtualOutput, params: &MotorParams, band: f64) -> bool {
    let r = circle_radius(params);
    let dist = y.distance_from_center(params);
    dist >= band * r && dist <= (2.0 - band) * r
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::math::wrap_half_pi;
    use std::f64::consts::FRAC_PI_4;

    #[test]
    fn angle_zero() {
        let p = MotorParams::simulation();
        let y = VirtualOutput::exact(&p, 0.0);
        assert!((y.y1 - 1.0 / p.l_d).abs() < 1e-9);
        assert_eq!(virtual_output_to_angle(&y, &p, 0.0, 1e-9).unwrap(), 0.0);
    }

    #[test]
    fn angle_quarter_pi() {
        let p = MotorParams::simulation();
        let y = VirtualOutput::exact(&p, FRAC_PI_4);
        // (L₀, −L₁)/(L_dL_q)
        assert!((y.y1 - 144.712).abs() < 1e-3, "{}", y.y1);
        assert!((y.y2 - 29.504).abs() < 1e-3, "{}", y.y2);
        let th = virtual_output_to_angle(&y, &p, 0.0, 1e-9).unwrap();
        assert!((th - FRAC_PI_4).abs() < 1e-12);
    }

    #[test]
    fn pi_periodicity_and_branch() {
        let p = MotorParams::simulation();
        let th = 0.8;
        let a = VirtualOutput::exact(&p, th);
        let b = VirtualOutput::exact(&p, th + PI);
        assert!((raw_angle(&a, &p) - raw_angle(&b, &p)).abs() < 1e-12);
        let got = virtual_output_to_angle(&b, &p, th + PI, 1e-9).unwrap();
        assert!((got - (th + PI)).abs() < 1e-12);
    }

    #[test]
    fn degenerate_signal() {
        let p = MotorParams::simulation();
        let y = VirtualOutput::new(circle_center(&p), 0.0);
        assert!(matches!(
            virtual_output_to_angle(&y, &p, 0.0, 1e-6),
            Err(Error::DegenerateSignal { .. })
        ));
    }

    #[test]
    fn grid_round_trip() {
        let p = MotorParams::simulation();
        let mut worst: f64 = 0.0;
        for k in 0..1000 {
            let th = -PI + 2.0 * PI * k as f64 / 1000.0;
            let y = VirtualOutput::exact(&p, th);
            let got = virtual_output_to_angle(&y, &p, th, 1e-9).unwrap();
            worst = worst.max(wrap_half_pi(got - th).abs());
        }
        assert!(worst <= 1e-12, "{worst}");
    }

    #[test]
    fn exact_outputs_lie_on_circle() {
        let p = MotorParams::experimental();
        for k in 0..64 {
            let y = VirtualOutput::exact(&p, k as f64 * 0.1);
            let d = y.distance_from_center(&p);
            assert!((d - circle_radius(&p)).abs() < 1e-9 * circle_radius(&p));
            assert!(is_confident(&y, &p, 0.1));
        }
        assert!(!is_confident(&VirtualOutput::default(), &p, 0.1));
    }

    #[test]
    fn flipped_saliency_recovers_angle() {
        let mut p = MotorParams::simulation();
        std::mem::swap(&mut p.l_d, &mut p.l_q);
        let y = VirtualOutput::exact(&p, 0.4);
        assert!((raw_angle(&y, &p) - 0.4).abs() < 1e-12);
    }
}
