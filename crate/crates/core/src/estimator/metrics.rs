use crate::error::{Error, Result};
use crate::math::wrap_half_pi;

/// Angle error modulo π, in `(−π/2, π/2]`.
pub fn angle_error_mod_pi(theta_hat: f64, theta: f64) -> f64 {
    wrap_half_pi(theta_hat - theta)
}

/// Root-mean-square deviation of `theta_hat` from `theta` over `[t1, t2]`,
/// modulo π, by trapezoidal quadrature over the samples inside the window.
pub fn rmsd(t: &[f64], theta: &[f64], theta_hat: &[f64], t1: f64, t2: f64) -> Result<f64> {
    if t.len() != theta.len() || t.len() != theta_hat.len() {
        return Err(Error::invalid("rmsd", "series lengths differ"));
    }
    if !(t2 > t1) {
        return Err(Error::invalid("rmsd", "need t2 > t1"));
    }
    let (Some(&start), Some(&end)) = (t.first(), t.last()) else {
        return Err(Error::TraceTooShort("empty series".into()));
    };
    let dt = if t.len() > 1 { t[1] - t[0] } else { 0.0 };
    let slack = 1e-9 + 0.5 * dt.abs();
    if t1 < start - slack || t2 > end + slack {
        return Err(Error::WindowOutOfRange { t1, t2, start, end });
    }
    let mut acc = 0.0;
    let mut span = 0.0;
    let mut prev: Option<(f64, f64)> = None;
    for k in 0..t.len() {
        if t[k] < t1 - 1e-12 || t[k] > t2 + 1e-12 {
            continue;
        }
        let e2 = angle_error_mod_pi(theta_hat[k], theta[k]).powi(2);
        if let Some((tp, ep)) = prev {
            acc += 0.5 * (t[k] - tp) * (e2 + ep);
            span += t[k] - tp;
        }
        prev = Some((t[k], e2));
    }
    if span <= 0.0 {
        return Err(Error::TraceTooShort("fewer than two samples in window".into()));
    }
    Ok((acc / span).sqrt())
}

#[cfg(test)]
mod tests {
    use super::*;

    fn series(n: usize, dt: f64) -> Vec<f64> {
        (0..n).map(|k| k as f64 * dt).collect()
    }

    #[test]
    fn identical_is_zero() {
        let t = series(1001, 0.01);
        let th: Vec<f64> = t.iter().map(|x| 3.0 * x).collect();
        assert_eq!(rmsd(&t, &th, &th, 5.0, 10.0).unwrap(), 0.0);
    }

    #[test]
    fn constant_offset() {
        let t = series(1001, 0.01);
        let th: Vec<f64> = t.iter().map(|x| 3.0 * x).collect();
        let hat: Vec<f64> = th.iter().map(|x| x + 0.1).collect();
        assert!((rmsd(&t, &th, &hat, 5.0, 10.0).unwrap() - 0.1).abs() < 1e-12);
        // a π flip is invisible
        let flipped: Vec<f64> = hat.iter().map(|x| x + std::f64::consts::PI).collect();
        assert!((rmsd(&t, &th, &flipped, 5.0, 10.0).unwrap() - 0.1).abs() < 1e-9);
    }

    #[test]
    fn window_outside_trace() {
        let t = series(101, 0.01);
        let th = vec![0.0; 101];
        assert!(matches!(
            rmsd(&t, &th, &th, 0.5, 2.0),
            Err(Error::WindowOutOfRange { .. })
        ));
        assert!(rmsd(&t, &th, &th, 0.6, 0.5).is_err());
    }
}
