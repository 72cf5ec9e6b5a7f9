//! Bracketed scalar root finding: bisection down to a coarse bracket, then an
//! Illinois-safeguarded secant polish that never leaves the bracket.

use crate::error::{Error, Result};
use crate::scalar::Scalar;

#[derive(Debug, Clone, Copy)]
pub struct RootOptions<S> {
    /// Bisection stops once the bracket is narrower than this fraction of the
    /// starting width.
    pub coarse_fraction: S,
    /// Absolute width at which the bracket is considered collapsed.
    pub x_tol: S,
    pub max_iter: usize,
}

impl<S: Scalar> Default for RootOptions<S> {
    fn default() -> Self {
        Self { coarse_fraction: S::lit(1e-3), x_tol: S::zero(), max_iter: 400 }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Root<S> {
    pub x: S,
    pub residual: S,
    pub iterations: usize,
}

/// Finds a root of `f` on `[lo, hi]`. `accept(x, f(x))` lets the caller stop
/// early on its own residual criterion.
pub fn find_root<S, F, A>(mut f: F, lo: S, hi: S, opts: &RootOptions<S>, mut accept: A) -> Result<Root<S>>
where
    S: Scalar,
    F: FnMut(S) -> S,
    A: FnMut(S, S) -> bool,
{
    let (mut a, mut b) = if lo <= hi { (lo, hi) } else { (hi, lo) };
    let mut fa = f(a);
    let mut fb = f(b);
    if fa.is_nan() || fb.is_nan() {
        return Err(Error::NonFinite(format!("residual at bracket ends: {fa}, {fb}")));
    }
    if fa == S::zero() {
        return Ok(Root { x: a, residual: fa, iterations: 0 });
    }
    if fb == S::zero() {
        return Ok(Root { x: b, residual: fb, iterations: 0 });
    }
    if fa.signum() == fb.signum() {
        return Err(Error::NoBracket { lo: a.as_f64(), hi: b.as_f64(), f_lo: fa.as_f64(), f_hi: fb.as_f64() });
    }
    let coarse = (b - a) * opts.coarse_fraction;
    let half = S::lit(0.5);
    let mut best = if fa.abs() < fb.abs() { (a, fa) } else { (b, fb) };
    let mut side = 0i8;
    for it in 1..=opts.max_iter {
        let width = b - a;
        let bisecting = width > coarse || !fa.is_finite() || !fb.is_finite();
        let mut x = if bisecting { a + half * width } else { (a * fb - b * fa) / (fb - fa) };
        if !(x > a && x < b) {
            x = a + half * width;
        }
        if x <= a || x >= b {
            // bracket collapsed to adjacent floats
            return Ok(Root { x: best.0, residual: best.1, iterations: it });
        }
        let fx = f(x);
        if fx.is_nan() {
            return Err(Error::NonFinite(format!("residual NaN at {x}")));
        }
        if fx.abs() < best.1.abs() {
            best = (x, fx);
        }
        if fx == S::zero() || accept(x, fx) {
            return Ok(Root { x, residual: fx, iterations: it });
        }
        if fx.signum() == fa.signum() {
            a = x;
            fa = fx;
            if !bisecting && side == -1 {
                fb = fb * half;
            }
            side = -1;
        } else {
            b = x;
            fb = fx;
            if !bisecting && side == 1 {
                fa = fa * half;
            }
            side = 1;
        }
        if b - a <= opts.x_tol {
            return Ok(Root { x: best.0, residual: best.1, iterations: it });
        }
    }
    Ok(Root { x: best.0, residual: best.1, iterations: opts.max_iter })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn cubic_root() {
        let r = find_root(|x: f64| x * x * x - 2.0, 0.0, 3.0, &RootOptions::default(), |_, fx| fx.abs() < 1e-15).unwrap();
        assert!((r.x - 2f64.cbrt()).abs() < 1e-14);
    }

    #[test]
    fn steep_root_reaches_machine_precision() {
        let r = find_root(|x: f64| 1.0 / (x - 0.2) - 1e5, 0.2 + 1e-12, 0.9, &RootOptions::default(), |_, _| false).unwrap();
        assert!((r.x - (0.2 + 1e-5)).abs() < 1e-15);
    }

    #[test]
    fn infinite_end_is_bisected() {
        let r = find_root(|x: f64| if x == 0.0 { f64::INFINITY } else { 1.0 / x - 4.0 }, 0.0, 1.0, &RootOptions::default(), |_, _| false).unwrap();
        assert!((r.x - 0.25).abs() < 1e-14);
    }

    #[test]
    fn missing_sign_change() {
        let e = find_root(|x: f64| x * x + 1.0, -1.0, 1.0, &RootOptions::default(), |_, _| false).unwrap_err();
        assert!(matches!(e, Error::NoBracket { .. }));
    }
}
