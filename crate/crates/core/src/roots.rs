//! Bracketed scalar root finding.
//!
//! Both solvers keep a sign-changing bracket at all times, so they cannot
//! wander off a monotone branch. [`newton_bisect`] takes Newton steps when
//! they stay inside the bracket and shrink the residual, and falls back to
//! bisection otherwise. [`illinois`] is derivative-free regula falsi.

use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RootOptions {
    /// Accept `x` once `|f(x)| <= tol_f`.
    pub tol_f: f64,
    /// Accept once the bracket (or the last Newton step) is narrower than this.
    pub tol_x: f64,
    pub max_iter: usize,
}

impl RootOptions {
    pub const fn new(tol_f: f64, tol_x: f64, max_iter: usize) -> Self {
        Self {
            tol_f,
            tol_x,
            max_iter,
        }
    }
}

impl Default for RootOptions {
    fn default() -> Self {
        Self::new(0.0, 1e-13, 100)
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Root {
    pub x: f64,
    pub fx: f64,
    /// Derivative at the accepted point (NaN for derivative-free solves).
    pub dfx: f64,
    pub iterations: usize,
    /// Number of iterations that used bisection instead of Newton.
    pub bisections: usize,
}

/// Safeguarded Newton iteration on `[lo, hi]` starting from `x0`.
///
/// `f` returns `(value, derivative)`. The endpoint values must differ in
/// sign (a zero at either endpoint is returned immediately).
pub fn newton_bisect<F>(mut f: F, lo: f64, hi: f64, x0: f64, opts: RootOptions) -> Result<Root>
where
    F: FnMut(f64) -> (f64, f64),
{
    let (mut a, mut b) = if lo <= hi { (lo, hi) } else { (hi, lo) };
    let (fa, dfa) = f(a);
    if fa == 0.0 {
        return Ok(Root {
            x: a,
            fx: fa,
            dfx: dfa,
            iterations: 0,
            bisections: 0,
        });
    }
    let (fb, dfb) = f(b);
    if fb == 0.0 {
        return Ok(Root {
            x: b,
            fx: fb,
            dfx: dfb,
            iterations: 0,
            bisections: 0,
        });
    }
    if fa.signum() == fb.signum() || !fa.is_finite() || !fb.is_finite() {
        return Err(Error::NotBracketed {
            lo: a,
            hi: b,
            flo: fa,
            fhi: fb,
        });
    }
    // Orient so that f(a) < 0 < f(b) in the bookkeeping below.
    let increasing = fa < 0.0;

    let mut x = if x0 > a && x0 < b { x0 } else { 0.5 * (a + b) };
    let (mut fx, mut dfx) = f(x);
    let mut bisections = 0;
    for it in 1..=opts.max_iter {
        if fx.abs() <= opts.tol_f || fx == 0.0 {
            return Ok(Root {
                x,
                fx,
                dfx,
                iterations: it - 1,
                bisections,
            });
        }
        if (fx < 0.0) == increasing {
            a = x;
        } else {
            b = x;
        }

        let newton = x - fx / dfx;
        let use_newton = dfx != 0.0 && newton.is_finite() && newton > a && newton < b;
        let candidate = if use_newton { newton } else { 0.5 * (a + b) };
        let (fc, dfc) = f(candidate);
        let step = (candidate - x).abs();

        if use_newton && fc.abs() > 0.5 * fx.abs() && step > opts.tol_x {
            // Newton is not contracting; take a bisection step instead.
            if (fc < 0.0) == increasing {
                a = candidate;
            } else {
                b = candidate;
            }
            let mid = 0.5 * (a + b);
            let (fm, dfm) = f(mid);
            bisections += 1;
            x = mid;
            fx = fm;
            dfx = dfm;
        } else {
            if !use_newton {
                bisections += 1;
            }
            x = candidate;
            fx = fc;
            dfx = dfc;
            if use_newton && step <= opts.tol_x {
                return Ok(Root {
                    x,
                    fx,
                    dfx,
                    iterations: it,
                    bisections,
                });
            }
        }
        if (b - a) <= opts.tol_x {
            return Ok(Root {
                x,
                fx,
                dfx,
                iterations: it,
                bisections,
            });
        }
    }
    Err(Error::NoConvergence {
        iterations: opts.max_iter,
        x,
    })
}

/// Illinois-modified regula falsi on `[lo, hi]`.
pub fn illinois<F>(mut f: F, lo: f64, hi: f64, opts: RootOptions) -> Result<Root>
where
    F: FnMut(f64) -> Result<f64>,
{
    let (mut a, mut b) = (lo, hi);
    let mut fa = f(a)?;
    if fa == 0.0 {
        return Ok(Root {
            x: a,
            fx: 0.0,
            dfx: f64::NAN,
            iterations: 0,
            bisections: 0,
        });
    }
    let mut fb = f(b)?;
    if fb == 0.0 {
        return Ok(Root {
            x: b,
            fx: 0.0,
            dfx: f64::NAN,
            iterations: 0,
            bisections: 0,
        });
    }
    if fa.signum() == fb.signum() {
        return Err(Error::NotBracketed {
            lo: a,
            hi: b,
            flo: fa,
            fhi: fb,
        });
    }
    let mut side = 0i8;
    let mut best = if fa.abs() < fb.abs() {
        (a, fa)
    } else {
        (b, fb)
    };
    for it in 1..=opts.max_iter {
        let c = (a * fb - b * fa) / (fb - fa);
        let c = if c.is_finite() && c > a.min(b) && c < a.max(b) {
            c
        } else {
            0.5 * (a + b)
        };
        let fc = f(c)?;
        if fc.abs() < best.1.abs() {
            best = (c, fc);
        }
        if fc.abs() <= opts.tol_f || fc == 0.0 || (b - a).abs() <= opts.tol_x {
            return Ok(Root {
                x: best.0,
                fx: best.1,
                dfx: f64::NAN,
                iterations: it,
                bisections: 0,
            });
        }
        if fc.signum() == fb.signum() {
            b = c;
            fb = fc;
            if side == -1 {
                fa *= 0.5;
            }
            side = -1;
        } else {
            a = c;
            fa = fc;
            if side == 1 {
                fb *= 0.5;
            }
            side = 1;
        }
    }
    Err(Error::NoConvergence {
        iterations: opts.max_iter,
        x: best.0,
    })
}
