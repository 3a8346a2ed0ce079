//! Bracketing scalar root finder.
//!
//! Regula falsi with the Illinois weight update, falling back to bisection
//! whenever the secant estimate leaves the bracket or the bracket fails to
//! halve. Only continuity and a sign change are required, so piecewise-linear
//! residuals with kinks are handled without derivatives.

use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RootOptions {
    /// Stop once the bracket is narrower than this.
    pub x_tol: f64,
    /// Stop once |f(x)| falls to this value or below.
    pub f_tol: f64,
    pub max_iter: usize,
}

impl Default for RootOptions {
    fn default() -> Self {
        Self {
            x_tol: 1e-12,
            f_tol: 1e-12,
            max_iter: 200,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Root {
    pub x: f64,
    pub residual: f64,
    pub iterations: usize,
}

/// Finds a root of `f` in `[lo, hi]`. `f(lo)` and `f(hi)` must differ in sign
/// (or one of them must be exactly zero).
pub fn find_root<F>(mut f: F, lo: f64, hi: f64, opts: RootOptions) -> Result<Root>
where
    F: FnMut(f64) -> f64,
{
    if !(lo.is_finite() && hi.is_finite()) || lo > hi {
        return Err(Error::Domain(format!("invalid bracket [{lo}, {hi}]")));
    }
    let (mut a, mut b) = (lo, hi);
    let (mut fa, mut fb) = (f(a), f(b));
    if fa.is_nan() || fb.is_nan() {
        return Err(Error::Domain("residual is NaN at bracket endpoint".into()));
    }
    if fa == 0.0 {
        return Ok(Root { x: a, residual: fa, iterations: 0 });
    }
    if fb == 0.0 {
        return Ok(Root { x: b, residual: fb, iterations: 0 });
    }
    if fa.signum() == fb.signum() {
        return Err(Error::NoRoot { lo, hi, f_lo: fa, f_hi: fb });
    }

    // which endpoint was retained on the previous step (-1 = a, 1 = b)
    let mut side = 0i8;
    let mut width_before = b - a;
    for iter in 1..=opts.max_iter {
        let width = b - a;
        let mut x = (a * fb - b * fa) / (fb - fa);
        let margin = 1e-3 * width;
        // every second iteration, insist on progress
        let stalled = iter % 2 == 0 && width > 0.5 * width_before;
        if stalled || !x.is_finite() || x <= a + margin || x >= b - margin {
            x = 0.5 * (a + b);
        }
        if iter % 2 == 0 {
            width_before = width;
        }
        let fx = f(x);
        if fx.is_nan() {
            return Err(Error::Domain(format!("residual is NaN at {x}")));
        }
        if fx == 0.0 || fx.abs() <= opts.f_tol {
            return Ok(Root { x, residual: fx, iterations: iter });
        }
        if fx.signum() == fa.signum() {
            a = x;
            fa = fx;
            if side == -1 {
                fb *= 0.5;
            }
            side = -1;
        } else {
            b = x;
            fb = fx;
            if side == 1 {
                fa *= 0.5;
            }
            side = 1;
        }
        if b - a <= opts.x_tol {
            let (x, r) = best_endpoint(&mut f, a, b);
            return Ok(Root { x, residual: r, iterations: iter });
        }
    }
    let (x, r) = best_endpoint(&mut f, a, b);
    Ok(Root { x, residual: r, iterations: opts.max_iter })
}

// The Illinois update scales stored residuals, so re-evaluate before choosing.
fn best_endpoint<F: FnMut(f64) -> f64>(f: &mut F, a: f64, b: f64) -> (f64, f64) {
    let (ra, rb) = (f(a), f(b));
    if ra.abs() <= rb.abs() {
        (a, ra)
    } else {
        (b, rb)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn finds_sqrt_two() {
        let r = find_root(|x| x * x - 2.0, 0.0, 2.0, RootOptions::default()).unwrap();
        assert!((r.x - 2f64.sqrt()).abs() < 1e-12);
    }

    #[test]
    fn handles_kinked_monotone_function() {
        let f = |x: f64| if x < 0.3 { 10.0 * (x - 0.3) } else { 0.1 * (x - 0.3) } - 0.01;
        let r = find_root(f, 0.0, 1.0, RootOptions::default()).unwrap();
        assert!((r.x - 0.4).abs() < 1e-10, "{r:?}");
    }

    #[test]
    fn reports_missing_sign_change() {
        let err = find_root(|x| x * x + 1.0, -1.0, 1.0, RootOptions::default()).unwrap_err();
        assert!(matches!(err, Error::NoRoot { .. }));
    }

    #[test]
    fn endpoint_root_returned_immediately() {
        let r = find_root(|x| x - 1.0, 1.0, 3.0, RootOptions::default()).unwrap();
        assert_eq!(r.x, 1.0);
        assert_eq!(r.iterations, 0);
    }

    #[test]
    fn flat_then_steep_converges() {
        // exponential-like residual that defeats plain regula falsi
        let f = |x: f64| x.powi(9) - 1e-3;
        let r = find_root(f, 0.0, 4.0, RootOptions::default()).unwrap();
        assert!((r.x - 1e-3f64.powf(1.0 / 9.0)).abs() < 1e-10);
        assert!(r.iterations < 120);
    }
}
