//! Bracketed root finding for secular functions.
//!
//! The principal functions handled here are strictly monotone between
//! consecutive poles, so every bracket holds exactly one root. The strategy
//! follows the solver design used throughout the crate: bisect the bracket
//! down to 1e−3 of its width, then polish with Newton steps (safeguarded by
//! the bracket) or secant steps when no derivative is available.

use crate::error::{Result, SolverError};

/// Outcome of a successful root refinement.
#[derive(Debug, Clone, Copy)]
pub struct Root {
    pub value: f64,
    pub residual: f64,
    pub iterations: usize,
}

/// Find the root of `f` inside `[lo, hi]`, requiring a sign change.
///
/// `df` optionally supplies the derivative for Newton polishing.
/// Convergence: |ΔE| ≤ tol·max(1, |E|).
pub fn bracketed_root<F, D>(f: F, df: Option<D>, lo: f64, hi: f64, tol: f64) -> Result<Root>
where
    F: Fn(f64) -> Result<f64>,
    D: Fn(f64) -> Result<f64>,
{
    let mut a = lo;
    let mut b = hi;
    let mut fa = f(a)?;
    let fb = f(b)?;
    let mut iterations = 2;
    if fa == 0.0 {
        return Ok(Root { value: a, residual: 0.0, iterations });
    }
    if fb == 0.0 {
        return Ok(Root { value: b, residual: 0.0, iterations });
    }
    if fa.signum() == fb.signum() {
        return Err(SolverError::RootFailure {
            lo,
            hi,
            reason: format!("no sign change: f(lo)={fa:.3e}, f(hi)={fb:.3e}"),
        });
    }

    // Phase 1: bisection down to 1e-3 of the original width.
    let coarse = 1e-3 * (b - a);
    while b - a > coarse {
        let mid = 0.5 * (a + b);
        let fm = f(mid)?;
        iterations += 1;
        if fm == 0.0 {
            return Ok(Root { value: mid, residual: 0.0, iterations });
        }
        if fm.signum() == fa.signum() {
            a = mid;
            fa = fm;
        } else {
            b = mid;
        }
    }

    // Phase 2: safeguarded Newton / secant inside [a, b].
    let mut x = 0.5 * (a + b);
    let mut fx = f(x)?;
    let mut x_prev = a;
    let mut f_prev = fa;
    for _ in 0..200 {
        iterations += 1;
        if fx == 0.0 {
            return Ok(Root { value: x, residual: 0.0, iterations });
        }
        if fx.signum() == fa.signum() {
            a = x;
            fa = fx;
        } else {
            b = x;
        }
        let newton_step = match &df {
            Some(d) => {
                let dv = d(x)?;
                if dv != 0.0 && dv.is_finite() {
                    Some(x - fx / dv)
                } else {
                    None
                }
            }
            None => {
                let denom = fx - f_prev;
                if denom != 0.0 {
                    Some(x - fx * (x - x_prev) / denom)
                } else {
                    None
                }
            }
        };
        let x_new = match newton_step {
            Some(v) if v > a && v < b => v,
            _ => 0.5 * (a + b),
        };
        let dx = (x_new - x).abs();
        x_prev = x;
        f_prev = fx;
        x = x_new;
        fx = f(x)?;
        if dx <= tol * x.abs().max(1.0) || (b - a) <= tol * x.abs().max(1.0) {
            return Ok(Root { value: x, residual: fx.abs(), iterations });
        }
    }
    Ok(Root { value: x, residual: fx.abs(), iterations })
}

/// Descend geometrically below `start` until `f` changes sign relative to
/// `f(start)`, doubling the distance each step. Returns the bracket.
pub fn descend_to_sign_change<F>(f: F, start: f64, initial_step: f64, max_doublings: usize) -> Result<(f64, f64)>
where
    F: Fn(f64) -> Result<f64>,
{
    let f0 = f(start)?;
    let mut step = initial_step.abs().max(1e-12);
    let mut hi = start;
    for _ in 0..max_doublings {
        let lo = start - step;
        let fl = f(lo)?;
        if fl.signum() != f0.signum() || fl == 0.0 {
            return Ok((lo, hi));
        }
        hi = lo;
        step *= 2.0;
    }
    Err(SolverError::RootFailure {
        lo: start - step,
        hi: start,
        reason: "no sign change found during downward search".into(),
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;

    #[test]
    fn finds_simple_root_with_derivative() {
        let f = |x: f64| Ok(x * x - 2.0);
        let df = |x: f64| Ok(2.0 * x);
        let r = bracketed_root(f, Some(df), 0.0, 2.0, 1e-14).unwrap();
        assert_relative_eq!(r.value, 2.0_f64.sqrt(), epsilon = 1e-13);
    }

    #[test]
    fn finds_root_without_derivative() {
        let f = |x: f64| Ok(x.cos() - x);
        let r = bracketed_root(f, None::<fn(f64) -> Result<f64>>, 0.0, 1.0, 1e-13).unwrap();
        assert_relative_eq!(r.value, 0.739_085_133_215_160_6, epsilon = 1e-12);
    }

    #[test]
    fn rejects_bracket_without_sign_change() {
        let f = |x: f64| Ok(x * x + 1.0);
        assert!(bracketed_root(f, None::<fn(f64) -> Result<f64>>, -1.0, 1.0, 1e-12).is_err());
    }

    #[test]
    fn descend_finds_bracket() {
        // f > 0 for x < -3, f < 0 above
        let f = |x: f64| Ok(-3.0 - x);
        let (lo, hi) = descend_to_sign_change(f, 0.0, 0.5, 60).unwrap();
        assert!(lo < -3.0 && hi >= -3.0);
    }
}
