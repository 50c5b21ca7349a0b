//! Bracketed root finding for strictly increasing functions.
//!
//! The solver keeps an open bracket `(lo, hi)` with `f < 0` left of the root
//! and `f > 0` right of it. Newton steps are taken from the current iterate
//! whenever they land inside the bracket and shrink it quickly enough;
//! otherwise the step falls back to bisection. The endpoints themselves are
//! never evaluated, so a bracket may end at a pole of `f`.

use crate::error::{Error, Result};

pub const DEFAULT_MAX_ITER: usize = 500;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Root {
    pub x: f64,
    pub residual: f64,
    pub iterations: usize,
}

/// Find the root of an increasing function inside `(lo, hi)`.
///
/// `eval` returns `(f(x), f'(x))`. `converged(x, f)` decides when the residual
/// is small enough; the solver also stops once the bracket has collapsed to
/// adjacent floats, in which case the best residual is checked with
/// `converged` and reported as [`Error::NoConvergence`] if it fails.
pub fn solve_increasing<F, C>(
    eval: F,
    lo: f64,
    hi: f64,
    start: Option<f64>,
    converged: C,
    max_iter: usize,
) -> Result<Root>
where
    F: Fn(f64) -> (f64, f64),
    C: Fn(f64, f64) -> bool,
{
    debug_assert!(lo < hi);
    let (mut lo, mut hi) = (lo, hi);
    let mut x = match start {
        Some(s) if s > lo && s < hi => s,
        _ => 0.5 * (lo + hi),
    };
    let mut best = (x, f64::INFINITY);
    let mut step = hi - lo;
    let mut prev_step = step;

    for it in 1..=max_iter {
        let (f, df) = eval(x);
        if !f.is_finite() {
            return Err(Error::NoConvergence {
                x,
                residual: f,
                iterations: it,
            });
        }
        if f.abs() < best.1.abs() {
            best = (x, f);
        }
        if converged(x, f) {
            return Ok(Root {
                x,
                residual: f,
                iterations: it,
            });
        }
        if f < 0.0 {
            lo = x;
        } else {
            hi = x;
        }

        let mid = 0.5 * (lo + hi);
        if mid <= lo || mid >= hi {
            // bracket exhausted at floating-point resolution
            let (bx, bf) = best;
            return if converged(bx, bf) {
                Ok(Root {
                    x: bx,
                    residual: bf,
                    iterations: it,
                })
            } else {
                Err(Error::NoConvergence {
                    x: bx,
                    residual: bf,
                    iterations: it,
                })
            };
        }

        let newton = x - f / df;
        let newton_ok = df > 0.0
            && newton.is_finite()
            && newton > lo
            && newton < hi
            && (2.0 * f).abs() <= (prev_step * df).abs();
        let next = if newton_ok { newton } else { mid };
        prev_step = step;
        step = next - x;
        x = next;
    }

    let (bx, bf) = best;
    Err(Error::NoConvergence {
        x: bx,
        residual: bf,
        iterations: max_iter,
    })
}

/// Bisection only; used as an independent check in tests and for functions
/// without a usable derivative.
pub fn bisect_increasing<F>(f: F, mut lo: f64, mut hi: f64, max_iter: usize) -> f64
where
    F: Fn(f64) -> f64,
{
    for _ in 0..max_iter {
        let mid = 0.5 * (lo + hi);
        if mid <= lo || mid >= hi {
            break;
        }
        if f(mid) < 0.0 {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    0.5 * (lo + hi)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn cubic_root() {
        let r = solve_increasing(
            |x| (x * x * x - 2.0, 3.0 * x * x),
            0.0,
            4.0,
            None,
            |_, f| f.abs() < 1e-14,
            DEFAULT_MAX_ITER,
        )
        .unwrap();
        assert!((r.x - 2f64.cbrt()).abs() < 1e-13);
    }

    #[test]
    fn falls_back_to_bisection_on_bad_derivative() {
        // derivative deliberately wrong by a large factor
        let r = solve_increasing(
            |x| (x - 0.3, 1e-9),
            0.0,
            1.0,
            Some(0.9),
            |_, f| f.abs() < 1e-15,
            DEFAULT_MAX_ITER,
        )
        .unwrap();
        assert!((r.x - 0.3).abs() < 1e-15);
    }

    #[test]
    fn open_bracket_at_pole() {
        // f(x) = -1/x + 2 on (0, 10): pole at the lower endpoint
        let r = solve_increasing(
            |x| (2.0 - 1.0 / x, 1.0 / (x * x)),
            0.0,
            10.0,
            None,
            |_, f| f.abs() < 1e-14,
            DEFAULT_MAX_ITER,
        )
        .unwrap();
        assert!((r.x - 0.5).abs() < 1e-14);
    }

    #[test]
    fn unattainable_tolerance_reports_residual() {
        let err = solve_increasing(
            |x| (x - 0.1, 1.0),
            0.0,
            1.0,
            None,
            |_, f| f == -1.0,
            DEFAULT_MAX_ITER,
        )
        .unwrap_err();
        assert!(matches!(err, Error::NoConvergence { .. }));
    }

    #[test]
    fn bisection_agrees() {
        let x = bisect_increasing(|x| x.exp() - 3.0, 0.0, 3.0, 200);
        assert!((x - 3f64.ln()).abs() < 1e-14);
    }
}
