//! Rotor-angle estimation for salient permanent-magnet machines by
//! high-frequency voltage injection, with a closed-loop simulator.

// `!(x > 0.0)` is the NaN-rejecting form used throughout.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod control;
pub mod error;
pub mod estimator;
pub mod harness;
pub mod math;
pub mod motor;
pub mod signal;
pub mod sim;

pub use error::{Error, Result};
pub use math::{Mat2, Vec2};
pub use motor::{MotorParams, MotorState};
