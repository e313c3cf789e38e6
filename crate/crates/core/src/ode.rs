//! Adaptive Dormand–Prince 5(4) integrator with event location.

use alloc::format;
use alloc::vec::Vec;

use crate::error::{Error, Result};
use crate::math::{abs, powf, sqrt};

#[derive(Debug, Clone, Copy)]
pub struct OdeOptions {
    pub rtol: f64,
    pub atol: f64,
    pub h_init: f64,
    pub h_min: f64,
    pub h_max: f64,
    pub max_steps: usize,
}

impl Default for OdeOptions {
    fn default() -> Self {
        Self { rtol: 1e-10, atol: 1e-12, h_init: 1e-3, h_min: 1e-14, h_max: 0.05, max_steps: 2_000_000 }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Stop {
    /// Reached `t_end`.
    End,
    /// The event function changed sign in the requested direction.
    Event,
    /// The halt predicate fired.
    Halted,
}

#[derive(Debug, Clone)]
pub struct Solution<const N: usize> {
    pub t: Vec<f64>,
    pub y: Vec<[f64; N]>,
    pub stop: Stop,
}

impl<const N: usize> Solution<N> {
    pub fn last(&self) -> (f64, [f64; N]) {
        (*self.t.last().unwrap(), *self.y.last().unwrap())
    }
}

/// Sign-change event: `g(t, y)` crossing zero. `direction` > 0 only accepts
/// rising crossings, < 0 only falling ones, 0 both.
pub struct Event<G> {
    pub g: G,
    pub direction: i8,
}

const C: [f64; 7] = [0.0, 1.0 / 5.0, 3.0 / 10.0, 4.0 / 5.0, 8.0 / 9.0, 1.0, 1.0];
const A: [[f64; 6]; 7] = [
    [0.0; 6],
    [1.0 / 5.0, 0.0, 0.0, 0.0, 0.0, 0.0],
    [3.0 / 40.0, 9.0 / 40.0, 0.0, 0.0, 0.0, 0.0],
    [44.0 / 45.0, -56.0 / 15.0, 32.0 / 9.0, 0.0, 0.0, 0.0],
    [19372.0 / 6561.0, -25360.0 / 2187.0, 64448.0 / 6561.0, -212.0 / 729.0, 0.0, 0.0],
    [9017.0 / 3168.0, -355.0 / 33.0, 46732.0 / 5247.0, 49.0 / 176.0, -5103.0 / 18656.0, 0.0],
    [35.0 / 384.0, 0.0, 500.0 / 1113.0, 125.0 / 192.0, -2187.0 / 6784.0, 11.0 / 84.0],
];
const B5: [f64; 7] = [35.0 / 384.0, 0.0, 500.0 / 1113.0, 125.0 / 192.0, -2187.0 / 6784.0, 11.0 / 84.0, 0.0];
const B4: [f64; 7] =
    [5179.0 / 57600.0, 0.0, 7571.0 / 16695.0, 393.0 / 640.0, -92097.0 / 339200.0, 187.0 / 2100.0, 1.0 / 40.0];

/// One Dormand–Prince step; returns the fifth-order solution and the
/// embedded error estimate.
fn step<const N: usize, F>(f: &mut F, t: f64, y: &[f64; N], h: f64) -> Result<([f64; N], [f64; N])>
where
    F: FnMut(f64, &[f64; N]) -> Result<[f64; N]>,
{
    let mut k = [[0.0; N]; 7];
    k[0] = f(t, y)?;
    for s in 1..7 {
        let mut ys = *y;
        for (j, kj) in k.iter().enumerate().take(s) {
            let a = A[s][j];
            if a != 0.0 {
                for i in 0..N {
                    ys[i] += h * a * kj[i];
                }
            }
        }
        k[s] = f(t + C[s] * h, &ys)?;
    }
    let mut y5 = *y;
    let mut err = [0.0; N];
    for s in 0..7 {
        for i in 0..N {
            y5[i] += h * B5[s] * k[s][i];
            err[i] += h * (B5[s] - B4[s]) * k[s][i];
        }
    }
    Ok((y5, err))
}

/// Integrates `y' = f(t, y)` from `t0` towards `t_end`, stopping early at the
/// first qualifying event (located by secant refinement) or when `halt`
/// returns true after an accepted step.
pub fn integrate<const N: usize, F, G, H>(
    mut f: F,
    t0: f64,
    y0: [f64; N],
    t_end: f64,
    opts: &OdeOptions,
    mut event: Option<Event<G>>,
    mut halt: H,
) -> Result<Solution<N>>
where
    F: FnMut(f64, &[f64; N]) -> Result<[f64; N]>,
    G: FnMut(f64, &[f64; N]) -> f64,
    H: FnMut(f64, &[f64; N]) -> bool,
{
    let dir = if t_end >= t0 { 1.0 } else { -1.0 };
    let mut t = t0;
    let mut y = y0;
    let mut h = opts.h_init.min(opts.h_max).min(abs(t_end - t0)) * dir;
    let mut ts = alloc::vec![t0];
    let mut ys = alloc::vec![y0];
    let mut g_prev = event.as_mut().map(|e| (e.g)(t, &y));

    for _ in 0..opts.max_steps {
        if (t_end - t) * dir <= 0.0 {
            return Ok(Solution { t: ts, y: ys, stop: Stop::End });
        }
        if (t + h - t_end) * dir > 0.0 {
            h = t_end - t;
        }
        let (y_new, err) = match step(&mut f, t, &y, h) {
            Ok(r) => r,
            Err(e @ Error::Domain { .. }) => {
                // Stage left the domain: shrink and retry.
                if abs(h) <= opts.h_min {
                    return Err(e);
                }
                h *= 0.25;
                continue;
            }
            Err(e) => return Err(e),
        };
        let mut e2 = 0.0;
        for i in 0..N {
            let sc = opts.atol + opts.rtol * abs(y[i]).max(abs(y_new[i]));
            e2 += (err[i] / sc) * (err[i] / sc);
        }
        let enorm = sqrt(e2 / N as f64);
        if !enorm.is_finite() || enorm > 1.0 {
            let fac = if enorm.is_finite() { (0.9 * powf(enorm, -0.2)).max(0.1) } else { 0.1 };
            h *= fac;
            if abs(h) < opts.h_min {
                return Err(Error::Numerical(format!("step size underflow at t = {t}")));
            }
            continue;
        }

        // Accepted step.
        let t_new = t + h;
        if let Some(ev) = event.as_mut() {
            let g0 = g_prev.unwrap();
            let g1 = (ev.g)(t_new, &y_new);
            let rising = g0 < 0.0 && g1 >= 0.0;
            let falling = g0 > 0.0 && g1 <= 0.0;
            let hit = match ev.direction {
                d if d > 0 => rising,
                d if d < 0 => falling,
                _ => rising || falling,
            };
            if hit {
                let (te, ye) = locate(&mut f, &mut ev.g, t, &y, g0, h, g1)?;
                ts.push(te);
                ys.push(ye);
                return Ok(Solution { t: ts, y: ys, stop: Stop::Event });
            }
            g_prev = Some(g1);
        }
        t = t_new;
        y = y_new;
        ts.push(t);
        ys.push(y);
        if halt(t, &y) {
            return Ok(Solution { t: ts, y: ys, stop: Stop::Halted });
        }
        let fac = if enorm == 0.0 { 5.0 } else { (0.9 * powf(enorm, -0.2)).clamp(0.2, 5.0) };
        h = (h * fac).clamp(-opts.h_max, opts.h_max);
        if abs(h) < opts.h_min {
            h = opts.h_min * dir;
        }
    }
    Err(Error::Numerical(format!("no convergence within {} steps", opts.max_steps)))
}

/// Illinois-modified secant on the step `[t, t + h]`; interior states come
/// from a single fifth-order step out of the accepted left end.
fn locate<const N: usize, F, G>(
    f: &mut F,
    g: &mut G,
    t: f64,
    y: &[f64; N],
    g0: f64,
    h: f64,
    g1: f64,
) -> Result<(f64, [f64; N])>
where
    F: FnMut(f64, &[f64; N]) -> Result<[f64; N]>,
    G: FnMut(f64, &[f64; N]) -> f64,
{
    let (mut a, mut ga) = (0.0, g0);
    let (mut b, mut gb) = (h, g1);
    let mut best = (t + h, step(f, t, y, h)?.0);
    let mut side = 0i8;
    for _ in 0..100 {
        let s = (a * gb - b * ga) / (gb - ga);
        let ys = step(f, t, y, s)?.0;
        let gs = g(t + s, &ys);
        best = (t + s, ys);
        if gs == 0.0 || abs(b - a) < 1e-15 * (1.0 + abs(t)) {
            break;
        }
        if (gs > 0.0) == (gb > 0.0) {
            b = s;
            gb = gs;
            if side == -1 {
                ga *= 0.5;
            }
            side = -1;
        } else {
            a = s;
            ga = gs;
            if side == 1 {
                gb *= 0.5;
            }
            side = 1;
        }
        if abs(gs) < 1e-15 {
            break;
        }
    }
    Ok(best)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::math::{cos, sin, PI};

    fn never(_: f64, _: &[f64; 2]) -> bool {
        false
    }

    #[test]
    fn harmonic_oscillator_to_tolerance() {
        let sol = integrate(
            |_, y: &[f64; 2]| Ok([y[1], -y[0]]),
            0.0,
            [1.0, 0.0],
            10.0,
            &OdeOptions::default(),
            None::<Event<fn(f64, &[f64; 2]) -> f64>>,
            never,
        )
        .unwrap();
        let (t, y) = sol.last();
        assert_eq!(t, 10.0);
        assert!((y[0] - cos(10.0)).abs() < 1e-8 && (y[1] + sin(10.0)).abs() < 1e-8);
    }

    #[test]
    fn event_locates_first_zero() {
        let sol = integrate(
            |_, y: &[f64; 2]| Ok([y[1], -y[0]]),
            0.0,
            [0.0, 1.0],
            10.0,
            &OdeOptions::default(),
            Some(Event { g: |_, y: &[f64; 2]| y[0], direction: -1 }),
            never,
        )
        .unwrap();
        assert_eq!(sol.stop, Stop::Event);
        assert!((sol.last().0 - PI).abs() < 1e-10);
    }
}
