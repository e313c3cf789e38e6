//! Adaptive Simpson quadrature with an absolute error target.

use alloc::format;

use crate::error::{Error, Result};
use crate::math::abs;

const MAX_DEPTH: u32 = 48;

#[derive(Debug, Clone, Copy)]
pub struct QuadResult {
    pub value: f64,
    /// Sum of the local Richardson error estimates.
    pub error: f64,
    pub evaluations: usize,
}

struct Ctx<'a, F> {
    f: &'a mut F,
    evals: usize,
    failed_at: Option<(f64, f64)>,
}

/// `∫_a^b f` to absolute tolerance `tol`.
pub fn adaptive_simpson<F: FnMut(f64) -> f64>(mut f: F, a: f64, b: f64, tol: f64) -> Result<QuadResult> {
    if !(tol > 0.0) {
        return Err(Error::Precondition(format!("tolerance must be positive, got {tol}")));
    }
    if a == b {
        return Ok(QuadResult { value: 0.0, error: 0.0, evaluations: 0 });
    }
    let fa = f(a);
    let fb = f(b);
    let m = 0.5 * (a + b);
    let fm = f(m);
    let whole = (b - a) / 6.0 * (fa + 4.0 * fm + fb);
    let mut ctx = Ctx { f: &mut f, evals: 3, failed_at: None };
    let (value, error) = recurse(&mut ctx, a, b, fa, fm, fb, whole, tol, MAX_DEPTH);
    if !value.is_finite() {
        return Err(Error::Numerical(format!("non-finite integrand on [{a}, {b}]")));
    }
    if let Some((l, r)) = ctx.failed_at {
        return Err(Error::Numerical(format!(
            "adaptive Simpson hit depth {MAX_DEPTH} on [{l}, {r}] (estimate {value}, error {error:e}, {} evaluations)",
            ctx.evals
        )));
    }
    Ok(QuadResult { value, error, evaluations: ctx.evals })
}

#[allow(clippy::too_many_arguments)]
fn recurse<F: FnMut(f64) -> f64>(
    ctx: &mut Ctx<'_, F>,
    a: f64,
    b: f64,
    fa: f64,
    fm: f64,
    fb: f64,
    whole: f64,
    tol: f64,
    depth: u32,
) -> (f64, f64) {
    let m = 0.5 * (a + b);
    let lm = 0.5 * (a + m);
    let rm = 0.5 * (m + b);
    let flm = (ctx.f)(lm);
    let frm = (ctx.f)(rm);
    ctx.evals += 2;
    let left = (m - a) / 6.0 * (fa + 4.0 * flm + fm);
    let right = (b - m) / 6.0 * (fm + 4.0 * frm + fb);
    let delta = left + right - whole;
    if abs(delta) <= 15.0 * tol || depth == 0 || !(delta.is_finite()) {
        if depth == 0 && abs(delta) > 15.0 * tol && ctx.failed_at.is_none() {
            ctx.failed_at = Some((a, b));
        }
        return (left + right + delta / 15.0, abs(delta) / 15.0);
    }
    let (l, el) = recurse(ctx, a, m, fa, flm, fm, left, 0.5 * tol, depth - 1);
    let (r, er) = recurse(ctx, m, b, fm, frm, fb, right, 0.5 * tol, depth - 1);
    (l + r, el + er)
}
