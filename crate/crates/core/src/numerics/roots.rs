//! Bracketed scalar root finding.

use crate::error::{Error, Result};

/// Bisection on `[lo, hi]`; requires a sign change over the bracket.
///
/// Runs until the bracket width falls below `xtol` or `max_iter` halvings,
/// then returns the midpoint.
pub fn bisect<F: Fn(f64) -> f64>(f: F, lo: f64, hi: f64, xtol: f64, max_iter: usize) -> Result<f64> {
    let (mut lo, mut hi) = (lo, hi);
    let mut flo = f(lo);
    let fhi = f(hi);
    if flo == 0.0 {
        return Ok(lo);
    }
    if fhi == 0.0 {
        return Ok(hi);
    }
    if flo.is_nan() || fhi.is_nan() {
        return Err(Error::Solver(format!(
            "bisection endpoints not finite: f({lo}) = {flo}, f({hi}) = {fhi}"
        )));
    }
    if flo.signum() == fhi.signum() {
        return Err(Error::Solver(format!(
            "no sign change over [{lo}, {hi}]: f = ({flo}, {fhi})"
        )));
    }
    for _ in 0..max_iter {
        let mid = 0.5 * (lo + hi);
        let fmid = f(mid);
        if fmid == 0.0 {
            return Ok(mid);
        }
        if fmid.signum() == flo.signum() {
            lo = mid;
            flo = fmid;
        } else {
            hi = mid;
        }
        if hi - lo < xtol {
            break;
        }
    }
    Ok(0.5 * (lo + hi))
}
