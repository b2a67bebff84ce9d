//! Interior PMSM dynamics in the stationary αβ frame.
//!
//! The stator inductance is `L(θ) = L₀·I + L₁·Q(θ)` with
//! `L₀ = (L_d + L_q)/2`, `L₁ = (L_d − L_q)/2` and
//! `Q(θ) = [[cos 2θ, sin 2θ], [sin 2θ, −cos 2θ]]`. The state evolves as
//!
//! ```text
//! L(θ) di/dt = F(i, θ, ω) + v
//! dθ/dt      = n_p ω
//! J dω/dt    = n_p Φ (i_β cos θ − i_α sin θ) − f ω − T_L
//! ```
//!
//! with `F = (2 n_p ω L₁ Q(θ) J − R_s I) i + n_p ω Φ (sin θ, −cos θ)`.

use crate::error::{Error, Result};
use crate::math::{Mat2, Vec2};

/// Physical constants of the machine. Angles are electrical, `omega` is mechanical.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct MotorParams {
    pub pole_pairs: u32,
    /// Stator resistance (Ω).
    pub r_s: f64,
    /// d-axis inductance (H).
    pub l_d: f64,
    /// q-axis inductance (H).
    pub l_q: f64,
    /// Permanent-magnet flux linkage (Wb).
    pub flux: f64,
    /// Inertia (kg·m²).
    pub inertia: f64,
    /// Viscous friction (N·m·s/rad).
    pub friction: f64,
}

/// Friction used when a parameter set does not specify one.
pub const DEFAULT_FRICTION: f64 = 0.001;

impl MotorParams {
    /// Machine used for the closed-loop simulations.
    pub fn simulation() -> Self {
        Self {
            pole_pairs: 6,
            r_s: 0.43,
            l_d: 5.74e-3,
            l_q: 8.68e-3,
            flux: 0.11,
            inertia: 0.01,
            friction: DEFAULT_FRICTION,
        }
    }

    /// Test-bench machine (inertia taken at its stated lower bound).
    pub fn experimental() -> Self {
        Self {
            pole_pairs: 3,
            r_s: 0.47,
            l_d: 3.38e-3,
            l_q: 5.07e-3,
            flux: 0.39,
            inertia: 0.01,
            friction: DEFAULT_FRICTION,
        }
    }

    pub fn validate(&self) -> Result<()> {
        let all = [
            self.r_s,
            self.l_d,
            self.l_q,
            self.flux,
            self.inertia,
            self.friction,
        ];
        if all.iter().any(|v| !v.is_finite()) {
            return Err(Error::NonFinite("motor parameters"));
        }
        if self.pole_pairs < 1 {
            return Err(Error::invalid("n_p", "must be at least 1"));
        }
        if self.l_d <= 0.0 {
            return Err(Error::invalid("l_d", "must be positive"));
        }
        if self.l_q <= 0.0 {
            return Err(Error::invalid("l_q", "must be positive"));
        }
        if self.l_d == self.l_q {
            return Err(Error::invalid("l_q", "saliency required: L_d must differ from L_q"));
        }
        if self.r_s < 0.0 {
            return Err(Error::invalid("r_s", "must be non-negative"));
        }
        if self.inertia <= 0.0 {
            return Err(Error::invalid("inertia", "must be positive"));
        }
        if self.friction < 0.0 {
            return Err(Error::invalid("friction", "must be non-negative"));
        }
        Ok(())
    }

    pub fn n_p(&self) -> f64 {
        f64::from(self.pole_pairs)
    }

    /// Average inductance `L₀`.
    pub fn l0(&self) -> f64 {
        0.5 * (self.l_d + self.l_q)
    }

    /// Half inductance difference `L₁` (negative when `L_d < L_q`).
    pub fn l1(&self) -> f64 {
        0.5 * (self.l_d - self.l_q)
    }

    /// `L_d·L_q`, the determinant of `L(θ)` for every θ.
    pub fn ldlq(&self) -> f64 {
        self.l_d * self.l_q
    }
}

/// Continuous state of the machine.
#[derive(Clone, Copy, Debug, Default, PartialEq)]
pub struct MotorState {
    pub i_alpha: f64,
    pub i_beta: f64,
    /// Electrical angle, unwrapped.
    pub theta: f64,
    /// Mechanical speed (rad/s).
    pub omega: f64,
}

impl MotorState {
    pub fn current(&self) -> Vec2 {
        Vec2::new(self.i_alpha, self.i_beta)
    }

    /// Electrical angle in `[0, 2π)`.
    pub fn theta_wrapped(&self) -> f64 {
        crate::math::wrap_2pi(self.theta)
    }

    pub fn is_finite(&self) -> bool {
        self.i_alpha.is_finite()
            && self.i_beta.is_finite()
            && self.theta.is_finite()
            && self.omega.is_finite()
    }
}

#[derive(Clone, Copy, Debug, Default, PartialEq)]
pub struct MotorInputs {
    pub v_alpha: f64,
    pub v_beta: f64,
    /// Load torque (N·m).
    pub load_torque: f64,
}

impl MotorInputs {
    pub fn voltage(&self) -> Vec2 {
        Vec2::new(self.v_alpha, self.v_beta)
    }
}

pub fn saliency_matrix(theta: f64) -> Mat2 {
    let (s, c) = (2.0 * theta).sin_cos();
    Mat2::new(c, s, s, -c)
}

pub fn inductance_matrix(params: &MotorParams, theta: f64) -> Mat2 {
    let q = saliency_matrix(theta);
    let (l0, l1) = (params.l0(), params.l1());
    Mat2::new(
        l0 + l1 * q.m[0][0],
        l1 * q.m[0][1],
        l1 * q.m[1][0],
        l0 + l1 * q.m[1][1],
    )
}

/// `L(θ)⁻¹` through the adjugate; the determinant is `L_d·L_q` identically.
pub fn inverse_inductance(params: &MotorParams, theta: f64) -> Mat2 {
    inductance_matrix(params, theta)
        .adjugate()
        .scale(1.0 / params.ldlq())
}

/// The mapping `F(i, θ, ω)` of the electrical subsystem.
pub fn electrical_forcing(params: &MotorParams, i: Vec2, theta: f64, omega: f64) -> Vec2 {
    let we = params.n_p() * omega;
    let qj = saliency_matrix(theta).matmul(&Mat2::J);
    let coupling = qj.mul_vec(i) * (2.0 * we * params.l1());
    let (s, c) = theta.sin_cos();
    coupling - i * params.r_s + Vec2::new(s, -c) * (we * params.flux)
}

/// `di/dt` for given angle and speed (used directly when the mechanics are prescribed).
pub fn current_derivative(
    params: &MotorParams,
    i: Vec2,
    theta: f64,
    omega: f64,
    v: Vec2,
) -> Vec2 {
    inverse_inductance(params, theta).mul_vec(electrical_forcing(params, i, theta, omega) + v)
}

pub fn electromagnetic_torque(params: &MotorParams, state: &MotorState) -> f64 {
    let (s, c) = state.theta.sin_cos();
    params.n_p() * params.flux * (state.i_beta * c - state.i_alpha * s)
}

/// Time derivative of the full state; the returned struct holds rates.
pub fn state_derivative(
    params: &MotorParams,
    state: &MotorState,
    inputs: &MotorInputs,
) -> Result<MotorState> {
    if !state.is_finite() {
        return Err(Error::NonFinite("motor state"));
    }
    if !(inputs.v_alpha.is_finite() && inputs.v_beta.is_finite() && inputs.load_torque.is_finite())
    {
        return Err(Error::NonFinite("motor inputs"));
    }
    let di = current_derivative(
        params,
        state.current(),
        state.theta,
        state.omega,
        inputs.voltage(),
    );
    let torque = electromagnetic_torque(params, state);
    Ok(MotorState {
        i_alpha: di.x,
        i_beta: di.y,
        theta: params.n_p() * state.omega,
        omega: (torque - params.friction * state.omega - inputs.load_torque) / params.inertia,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;
    use std::f64::consts::{FRAC_PI_2, FRAC_PI_4, FRAC_PI_8, PI};

    fn close(a: f64, b: f64, tol: f64) -> bool {
        (a - b).abs() <= tol * b.abs().max(1.0)
    }

    #[test]
    fn saliency_examples() {
        let q0 = saliency_matrix(0.0);
        assert_eq!(q0, Mat2::new(1.0, 0.0, 0.0, -1.0));
        let q = saliency_matrix(FRAC_PI_2);
        assert!(close(q.m[0][0], -1.0, 1e-15) && q.m[0][1].abs() < 1e-15 && close(q.m[1][1], 1.0, 1e-15));
        let h = std::f64::consts::FRAC_1_SQRT_2;
        let q = saliency_matrix(FRAC_PI_8);
        assert!(close(q.m[0][0], h, 1e-15) && close(q.m[0][1], h, 1e-15));
        assert!(close(q.m[1][0], h, 1e-15) && close(q.m[1][1], -h, 1e-15));
    }

    #[test]
    fn inductance_examples() {
        let p = MotorParams::simulation();
        let l = inductance_matrix(&p, 0.0);
        assert!(close(l.m[0][0], p.l_d, 1e-15) && close(l.m[1][1], p.l_q, 1e-15));
        assert_eq!(l.m[0][1], 0.0);
        let l = inductance_matrix(&p, FRAC_PI_4);
        assert!(close(l.m[0][0], p.l0(), 1e-12) && close(l.m[1][1], p.l0(), 1e-12));
        assert!(close(l.m[0][1], p.l1(), 1e-12));
        for th in [0.3, 1.7, 2.9] {
            let det = inductance_matrix(&p, th).det();
            assert!((det - 4.98232e-5).abs() < 1e-9, "det {det}");
            assert!(close(det, p.ldlq(), 1e-12));
        }
    }

    #[test]
    fn equilibrium_and_simple_derivatives() {
        let p = MotorParams::simulation();
        let d = state_derivative(&p, &MotorState::default(), &MotorInputs::default()).unwrap();
        assert_eq!(d, MotorState::default());

        let inputs = MotorInputs {
            v_alpha: 1.0,
            v_beta: 0.0,
            load_torque: 0.5,
        };
        let d = state_derivative(&p, &MotorState::default(), &inputs).unwrap();
        assert!(close(d.i_alpha, 1.0 / p.l_d, 1e-12));
        assert!(d.i_beta.abs() < 1e-12);
        assert_eq!(d.theta, 0.0);
        assert!(close(d.omega, -0.5 / p.inertia, 1e-12));
    }

    #[test]
    fn derivative_matches_expanded_closed_form() {
        // Independent expansion: L⁻¹ = (L₀I − L₁Q)/(L_dL_q), QJ = [[s2, −c2], [−c2, −s2]].
        let p = MotorParams::simulation();
        let (th, w) = (PI / 6.0, 2.0);
        let st = MotorState {
            i_alpha: 1.0,
            i_beta: 0.0,
            theta: th,
            omega: w,
        };
        let (c2, s2) = ((2.0 * th).cos(), (2.0 * th).sin());
        let we = 6.0 * w;
        let (l0, l1) = ((5.74e-3 + 8.68e-3) / 2.0, (5.74e-3 - 8.68e-3) / 2.0);
        let (ia, ib) = (1.0, 0.0);
        let fa = 2.0 * we * l1 * (s2 * ia - c2 * ib) - 0.43 * ia + we * 0.11 * th.sin();
        let fb = 2.0 * we * l1 * (-c2 * ia - s2 * ib) - 0.43 * ib - we * 0.11 * th.cos();
        let det = 5.74e-3 * 8.68e-3;
        let dia = ((l0 - l1 * c2) * fa - l1 * s2 * fb) / det;
        let dib = (-l1 * s2 * fa + (l0 + l1 * c2) * fb) / det;
        let dw = (6.0 * 0.11 * (ib * th.cos() - ia * th.sin()) - 0.001 * w) / 0.01;

        let d = state_derivative(&p, &st, &MotorInputs::default()).unwrap();
        for (got, want) in [(d.i_alpha, dia), (d.i_beta, dib), (d.theta, we), (d.omega, dw)] {
            assert!((got - want).abs() <= 1e-12 * want.abs(), "{got} vs {want}");
        }
    }

    #[test]
    fn torque_examples() {
        let p = MotorParams::simulation();
        let mut s = MotorState::default();
        assert_eq!(electromagnetic_torque(&p, &s), 0.0);
        s.i_beta = 1.0;
        assert!(close(electromagnetic_torque(&p, &s), 0.66, 1e-12));
        s = MotorState {
            i_alpha: -1.0,
            theta: FRAC_PI_2,
            ..Default::default()
        };
        assert!(close(electromagnetic_torque(&p, &s), 0.66, 1e-12));
    }

    #[test]
    fn rejects_bad_inputs() {
        let p = MotorParams::simulation();
        let s = MotorState {
            omega: f64::NAN,
            ..Default::default()
        };
        assert!(state_derivative(&p, &s, &MotorInputs::default()).is_err());
        let mut bad = p;
        bad.l_q = bad.l_d;
        assert!(bad.validate().is_err());
        bad = p;
        bad.inertia = 0.0;
        assert!(bad.validate().is_err());
        assert!(p.validate().is_ok());
        assert!((p.l0().powi(2) - p.l1().powi(2) - p.ldlq()).abs() < 1e-18);
    }

    #[test]
    fn energy_is_non_increasing_without_magnet() {
        let mut p = MotorParams::simulation();
        p.flux = 0.0;
        let mut s = MotorState {
            i_alpha: 3.0,
            i_beta: -2.0,
            theta: 0.4,
            omega: 5.0,
        };
        let energy = |s: &MotorState| {
            let i = s.current();
            0.5 * i.dot(inductance_matrix(&p, s.theta).mul_vec(i)) + 0.5 * p.inertia * s.omega.powi(2)
        };
        let h = 1e-5;
        let mut e_prev = energy(&s);
        let add = |a: &MotorState, k: f64, d: &MotorState| MotorState {
            i_alpha: a.i_alpha + k * d.i_alpha,
            i_beta: a.i_beta + k * d.i_beta,
            theta: a.theta + k * d.theta,
            omega: a.omega + k * d.omega,
        };
        let u = MotorInputs::default();
        for _ in 0..20_000 {
            let k1 = state_derivative(&p, &s, &u).unwrap();
            let k2 = state_derivative(&p, &add(&s, h / 2.0, &k1), &u).unwrap();
            let k3 = state_derivative(&p, &add(&s, h / 2.0, &k2), &u).unwrap();
            let k4 = state_derivative(&p, &add(&s, h, &k3), &u).unwrap();
            let mut n = add(&s, h / 6.0, &k1);
            n = add(&n, h / 3.0, &k2);
            n = add(&n, h / 3.0, &k3);
            s = add(&n, h / 6.0, &k4);
            let e = energy(&s);
            assert!(e <= e_prev * (1.0 + 1e-12), "energy rose {e_prev} -> {e}");
            e_prev = e;
        }
    }

    proptest! {
        #[test]
        fn inductance_is_spd_with_constant_det(th in -20.0f64..20.0) {
            let p = MotorParams::simulation();
            let l = inductance_matrix(&p, th);
            prop_assert!(l.is_symmetric());
            prop_assert!(l.m[0][0] > 0.0 && l.det() > 0.0);
            prop_assert!((l.det() - p.ldlq()).abs() <= 1e-12 * p.ldlq());
            let q = saliency_matrix(th);
            prop_assert!(q.trace().abs() < 1e-15);
            prop_assert!((q.det() + 1.0).abs() < 1e-14);
            let qp = saliency_matrix(th + PI);
            for r in 0..2 { for c in 0..2 {
                prop_assert!((q.m[r][c] - qp.m[r][c]).abs() < 1e-12);
            }}
        }

        #[test]
        fn forcing_is_2pi_periodic(th in -5.0f64..5.0, w in -10.0f64..10.0, a in -5.0f64..5.0, b in -5.0f64..5.0) {
            let p = MotorParams::simulation();
            let i = Vec2::new(a, b);
            let f1 = electrical_forcing(&p, i, th, w);
            let f2 = electrical_forcing(&p, i, th + 2.0 * PI, w);
            prop_assert!((f1 - f2).norm() <= 1e-12 * (1.0 + f1.norm()));
        }
    }
}
