//! Continuous-time frequency responses and Bode export.

use std::f64::consts::PI;
use std::io::Write;

use num_complex::Complex64;

use crate::error::{Error, Result};

/// `G_d(jω) = e^{−jdω} + (e^{−2jdω} − 1)/(2jdω)`, with `G_d(0) = 0`.
///
/// Evaluated as `e^{−jdω}(1 − sin(dω)/(dω))`; the bracket uses a series near
/// zero, where the direct sum cancels.
pub fn gd_frequency_response(d: f64, omega: f64) -> Complex64 {
    let x = d * omega;
    if x == 0.0 {
        return Complex64::new(0.0, 0.0);
    }
    let bracket = if x.abs() < 1e-2 {
        let x2 = x * x;
        x2 / 6.0 * (1.0 - x2 / 20.0 * (1.0 - x2 / 42.0))
    } else {
        1.0 - x.sin() / x
    };
    Complex64::from_polar(bracket, -x)
}

/// Continuous phase of `G_d(jω)`. The response equals `e^{−jdω}(1 − sin(dω)/(dω))`
/// and the bracket is non-negative, so the phase is the delay line.
pub fn gd_phase_unwrapped(d: f64, omega: f64) -> f64 {
    -d * omega
}

pub fn hpf_frequency_response(lambda_h: f64, omega: f64) -> Complex64 {
    let s = Complex64::new(0.0, omega);
    2.0 * s * s / ((lambda_h + s) * (lambda_h + s))
}

pub fn lpf_frequency_response(lambda_ell: f64, omega: f64) -> Complex64 {
    let s = Complex64::new(0.0, omega);
    lambda_ell / (lambda_ell + s)
}

/// Unwraps a phase sequence so consecutive points differ by at most π.
pub fn unwrap_phase(phases: &[f64]) -> Vec<f64> {
    let mut out = Vec::with_capacity(phases.len());
    let mut offset = 0.0;
    let mut prev: Option<f64> = None;
    for &p in phases {
        if let Some(q) = prev {
            let mut delta = p - q;
            while delta > PI {
                offset -= 2.0 * PI;
                delta -= 2.0 * PI;
            }
            while delta < -PI {
                offset += 2.0 * PI;
                delta += 2.0 * PI;
            }
        }
        out.push(p + offset);
        prev = Some(p);
    }
    out
}

/// One row of a Bode table.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct BodePoint {
    pub omega: f64,
    pub mag_db: f64,
    pub phase_deg: f64,
}

/// Logarithmic grid of `n` points between `lo` and `hi` inclusive.
pub fn log_grid(lo: f64, hi: f64, n: usize) -> Result<Vec<f64>> {
    if !(lo > 0.0 && hi > lo && n >= 2) {
        return Err(Error::invalid("grid", "need 0 < lo < hi and at least 2 points"));
    }
    let (a, b) = (lo.ln(), hi.ln());
    Ok((0..n)
        .map(|k| (a + (b - a) * k as f64 / (n - 1) as f64).exp())
        .collect())
}

/// Bode table of `response` over `grid`, phase unwrapped from the first point.
/// `start_phase` seeds the branch of the first point.
pub fn bode_table(
    grid: &[f64],
    start_phase: f64,
    response: impl Fn(f64) -> Complex64,
) -> Vec<BodePoint> {
    let values: Vec<Complex64> = grid.iter().map(|&w| response(w)).collect();
    let raw: Vec<f64> = values.iter().map(|z| z.arg()).collect();
    let mut unwrapped = unwrap_phase(&raw);
    if let Some(&first) = unwrapped.first() {
        let shift = ((start_phase - first) / (2.0 * PI)).round() * 2.0 * PI;
        for p in unwrapped.iter_mut() {
            *p += shift;
        }
    }
    grid.iter()
        .zip(values.iter().zip(unwrapped))
        .map(|(&omega, (z, ph))| BodePoint {
            omega,
            mag_db: 20.0 * z.norm().log10(),
            phase_deg: ph.to_degrees(),
        })
        .collect()
}

pub const BODE_HEADER: &str = "omega_rad_s,mag_db,phase_deg_unwrapped";

pub fn write_bode_csv<W: Write>(out: W, table: &[BodePoint]) -> Result<()> {
    let mut w = csv::Writer::from_writer(out);
    w.write_record(BODE_HEADER.split(','))?;
    for p in table {
        w.write_record(&[
            format!("{:e}", p.omega),
            format!("{:e}", p.mag_db),
            format!("{:e}", p.phase_deg),
        ])?;
    }
    w.flush()?;
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::f64::consts::TAU;

    #[test]
    fn gd_examples() {
        let eps = 1e-3;
        let wh = TAU / eps;
        assert_eq!(gd_frequency_response(eps, 0.0), Complex64::new(0.0, 0.0));
        let g = gd_frequency_response(eps, wh);
        assert!((g - 1.0).norm() < 1e-9, "{g}");
        assert!((gd_phase_unwrapped(eps, wh) + TAU).abs() < 1e-12);
        let g = gd_frequency_response(eps, wh / 2.0);
        assert!((g + 1.0).norm() < 1e-12, "{g}");
    }

    #[test]
    fn gd_has_second_order_zero() {
        let d = 1e-3;
        for x in [1e-4, 1e-3, 1e-2, 0.05, 0.1] {
            let g = gd_frequency_response(d, x / d);
            // |G| = 1 − sinc x ≈ x²/6
            assert!(g.norm() <= 0.2 * x * x, "{x}: {}", g.norm());
        }
    }

    #[test]
    fn gd_factorized_form() {
        let d = 2e-3;
        for w in [10.0, 333.0, 1234.5, 9000.0] {
            // delay minus the 2d-window mean of e^{−jωτ}, by Simpson quadrature
            let n = 2000;
            let h = 2.0 * d / n as f64;
            let mut mean = Complex64::new(0.0, 0.0);
            for k in 0..=n {
                let wk = if k == 0 || k == n { 1.0 } else if k % 2 == 1 { 4.0 } else { 2.0 };
                mean += wk * Complex64::from_polar(1.0, -w * k as f64 * h);
            }
            mean *= h / 3.0 / (2.0 * d);
            let want = Complex64::from_polar(1.0, -w * d) - mean;
            assert!((gd_frequency_response(d, w) - want).norm() < 1e-10);
        }
    }

    #[test]
    fn hpf_at_corner() {
        let h = hpf_frequency_response(500.0, 500.0);
        assert!((h.norm() - 1.0).abs() < 1e-12);
        assert!((h.arg() - PI / 2.0).abs() < 1e-12);
        assert_eq!(hpf_frequency_response(500.0, 0.0).norm(), 0.0);
        assert!((lpf_frequency_response(30.0, 0.0) - 1.0).norm() < 1e-15);
    }

    #[test]
    fn bode_unwraps_gd_to_delay_phase() {
        let eps = 1e-3;
        let wh = TAU / eps;
        let grid = log_grid(1.0, wh, 4000).unwrap();
        let table = bode_table(&grid, 0.0, |w| gd_frequency_response(eps, w));
        let last = table.last().unwrap();
        assert!((last.phase_deg.to_radians() + TAU).abs() < 1e-9);
        for p in &table {
            assert!((p.phase_deg.to_radians() - gd_phase_unwrapped(eps, p.omega)).abs() < 1e-9);
        }
    }

    #[test]
    fn unwrap_simple() {
        let u = unwrap_phase(&[3.0, -3.0, -2.0]);
        assert!((u[1] - (-3.0 + TAU)).abs() < 1e-15);
    }
}
