//! Spherical catenoids: rotationally symmetric minimal hypersurfaces of
//! `S^n × R` whose profile `x = u(y)` has a neck at `u(0) = C`.
//!
//! Along the profile `u_y² = (sin u / sin C)^{2(n-1)} − 1`, so the inverse
//! graph `y = v(x)` has `v_x = ((sin x / sin C)^{2(n-1)} − 1)^{-1/2}` and the
//! half-period is `Y_C = 2 ∫_C^{π/2} v_x`. The `(z − C)^{-1/2}` singularity
//! at the neck is removed with `z = C + w²`.

use alloc::format;
use alloc::vec::Vec;

use crate::conformal::{ParametricCurve, Point};
use crate::error::{Error, Result};
use crate::math::{abs, cos, exp_m1, ln_1p, powi, sin, sqrt, tan, FRAC_PI_2, PI};
use crate::quadrature::adaptive_simpson;

/// Half-period evaluations clamp the neck parameter to at most this.
pub const C_MAX: f64 = FRAC_PI_2 - 1e-6;

#[derive(Debug, Clone, PartialEq)]
pub struct CatenoidProfile {
    pub c: f64,
    pub n: u32,
    /// `(sin C)^{-(n-1)}`.
    pub lambda_c: f64,
    /// Half-period in the `y` direction.
    pub y_c: f64,
    /// `(x, v(x))` on `[C, π − C]`, strictly increasing in both coordinates.
    pub samples: Vec<Point>,
}

impl CatenoidProfile {
    /// The part inside `D = [0, π/2] × [0, 1]`: from `(C, 0)` to `(π/2, Y_C/2)`.
    pub fn barrier_segment(&self) -> ParametricCurve {
        let half = self.samples.len() / 2 + 1;
        ParametricCurve::new(self.samples[..half].to_vec(), false).expect("catenoid samples are distinct")
    }

    /// Linear interpolation of `v` on the sampled profile.
    pub fn v_at(&self, x: f64) -> Option<f64> {
        let s = &self.samples;
        if x < s[0].0 || x > s[s.len() - 1].0 {
            return None;
        }
        let k = s.partition_point(|p| p.0 < x).max(1).min(s.len() - 1);
        let (a, b) = (s[k - 1], s[k]);
        Some(a.1 + (b.1 - a.1) * (x - a.0) / (b.0 - a.0))
    }
}

/// `(sin u / sin C)^{2(n-1)} − 1`, accurate when `u` is close to `C`.
fn excess(u: f64, c: f64, n: u32) -> f64 {
    excess_offset(u - c, c, n)
}

/// [`excess`] at `u = C + e` with the offset given exactly.
fn excess_offset(e: f64, c: f64, n: u32) -> f64 {
    let d = 2.0 * cos(c + 0.5 * e) * sin(0.5 * e);
    exp_m1(2.0 * (n as f64 - 1.0) * ln_1p(d / sin(c)))
}

fn check_neck(c: f64, n: u32) -> Result<()> {
    if n < 2 {
        return Err(Error::Precondition(format!("dimension n must be at least 2, got {n}")));
    }
    if !(c > 0.0 && c < FRAC_PI_2) {
        return Err(Error::Precondition(format!("neck parameter C must lie in (0, π/2), got {c}")));
    }
    Ok(())
}

/// `u_y` along the catenoid as a function of `u ∈ [C, π − C]`.
pub fn catenoid_slope(u: f64, c: f64, n: u32) -> Result<f64> {
    check_neck(c, n)?;
    let w = u.min(PI - u);
    if !(u >= c - 1e-12 && u <= PI - c + 1e-12) {
        return Err(Error::Domain { what: "u (catenoid slope needs C ≤ u ≤ π − C)", value: u });
    }
    if w <= c {
        return Ok(0.0);
    }
    Ok(sqrt(excess(w, c, n).max(0.0)))
}

/// Integrand of `∫ v_x dz` after `z = C + w²`.
fn substituted_integrand(w: f64, c: f64, n: u32) -> f64 {
    if w == 0.0 {
        // (z − C)^{-1/2} coefficient: excess ≈ 2(n-1) cot C · w².
        return 2.0 / sqrt(2.0 * (n as f64 - 1.0) / tan(c));
    }
    2.0 * w / sqrt(excess_offset(w * w, c, n))
}

/// `Y_C` to absolute accuracy `tol`. `C` above [`C_MAX`] is clamped.
pub fn half_period(c: f64, n: u32, tol: f64) -> Result<f64> {
    check_neck(c, n)?;
    let c = c.min(C_MAX);
    let w_end = sqrt(FRAC_PI_2 - c);
    let q = adaptive_simpson(|w| substituted_integrand(w, c, n), 0.0, w_end, 0.5 * tol)
        .map_err(|e| Error::Numerical(format!("half period for C = {c}, n = {n}: {e}")))?;
    Ok(2.0 * q.value)
}

/// Samples the catenoid on `[C, π − C]` with `m` nodes on each half; nodes are
/// uniform in `w = sqrt(x − C)`, which keeps the arclength spacing even
/// through the vertical tangent at the neck.
pub fn sample_catenoid(c: f64, n: u32, m: usize) -> Result<CatenoidProfile> {
    check_neck(c, n)?;
    if m < 16 {
        return Err(Error::Precondition(format!("need at least 16 samples per half, got {m}")));
    }
    let tol = 1e-13;
    let w_end = sqrt(FRAC_PI_2 - c);
    let mut half: Vec<Point> = Vec::with_capacity(m);
    half.push((c, 0.0));
    let mut v = 0.0;
    for k in 1..m {
        let w0 = w_end * (k - 1) as f64 / (m - 1) as f64;
        let w1 = w_end * k as f64 / (m - 1) as f64;
        v += adaptive_simpson(|w| substituted_integrand(w, c, n), w0, w1, tol / m as f64)?.value;
        let x = if k == m - 1 { FRAC_PI_2 } else { c + w1 * w1 };
        half.push((x, v));
    }
    let mid = v;
    let mut samples = half.clone();
    for &(x, vx) in half.iter().rev().skip(1) {
        samples.push((PI - x, 2.0 * mid - vx));
    }
    Ok(CatenoidProfile { c, n, lambda_c: powi(sin(c), -(n as i32 - 1)), y_c: 2.0 * mid, samples })
}

#[derive(Debug, Clone, PartialEq)]
pub struct C1Search {
    pub c1: f64,
    pub y_c1: f64,
    /// Final bisection bracket.
    pub bracket: (f64, f64),
    /// `(C, Y_C)` on the coarse scan grid.
    pub scan: Vec<(f64, f64)>,
    /// More than one sign change of `Y_C − 2/n` on the scan grid.
    pub multiple_roots: bool,
}

pub const C1_SCAN_POINTS: usize = 200;
pub const C1_SCAN_RANGE: (f64, f64) = (0.02, FRAC_PI_2 - 0.02);

/// Finds `C₁` with `Y_{C₁} = 2/n`: coarse scan for the first sign change,
/// then bisection until `|Y_{C₁} − 2/n| < tol`.
pub fn find_c1(n: u32, tol: f64) -> Result<C1Search> {
    if !(tol > 0.0) {
        return Err(Error::Precondition(format!("tolerance must be positive, got {tol}")));
    }
    let target = 2.0 / n as f64;
    let qtol = (tol * 1e-3).max(1e-14);
    let (lo, hi) = C1_SCAN_RANGE;
    let mut scan = Vec::with_capacity(C1_SCAN_POINTS);
    for k in 0..C1_SCAN_POINTS {
        let c = lo + (hi - lo) * k as f64 / (C1_SCAN_POINTS - 1) as f64;
        scan.push((c, half_period(c, n, qtol)?));
    }
    let crossings: Vec<usize> =
        (1..scan.len()).filter(|&k| (scan[k - 1].1 - target) * (scan[k].1 - target) <= 0.0).collect();
    let Some(&k) = crossings.first() else {
        return Err(Error::Search { what: format!("no C with Y_C = 2/{n} on the scan grid"), table: scan });
    };
    let (mut a, mut b) = (scan[k - 1].0, scan[k].0);
    let mut fa = scan[k - 1].1 - target;
    let mut mid = 0.5 * (a + b);
    let mut y_mid = half_period(mid, n, qtol)?;
    for _ in 0..200 {
        mid = 0.5 * (a + b);
        y_mid = half_period(mid, n, qtol)?;
        let fm = y_mid - target;
        if abs(fm) < 0.01 * tol || b - a < 1e-15 {
            break;
        }
        if fm * fa <= 0.0 {
            b = mid;
        } else {
            a = mid;
            fa = fm;
        }
    }
    Ok(C1Search { c1: mid, y_c1: y_mid, bracket: (a, b), scan, multiple_roots: crossings.len() > 1 })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::conformal::{geodesic_curvature, ConformalProfile};
    use crate::ode::{integrate, Event, OdeOptions};

    /// Shoots `u'' = (n-1) cot u (1 + u'²)` from `u(0) = C, u'(0) = 0` and
    /// returns the `y` where `u'` next vanishes (the turning point `π − C`).
    fn ode_half_period(c: f64, n: u32) -> f64 {
        let k = n as f64 - 1.0;
        let opts = OdeOptions { rtol: 1e-13, atol: 1e-14, h_max: 0.01, ..OdeOptions::default() };
        let sol = integrate(
            |_, s: &[f64; 2]| Ok([s[1], k * cos(s[0]) / sin(s[0]) * (1.0 + s[1] * s[1])]),
            0.0,
            [c, 0.0],
            50.0,
            &opts,
            Some(Event { g: |_, s: &[f64; 2]| s[1], direction: -1 }),
            |_, _| false,
        )
        .unwrap();
        let (y, s) = sol.last();
        assert!((s[0] - (PI - c)).abs() < 1e-6);
        y
    }

    #[test]
    fn slope_examples() {
        assert_eq!(catenoid_slope(0.4, 0.4, 2).unwrap(), 0.0);
        assert_eq!(catenoid_slope(PI - 0.4, 0.4, 3).unwrap(), 0.0);
        let n = 3;
        let c = libm::asin(libm::pow(2.0, -1.0 / (2.0 * (n as f64 - 1.0))));
        assert!((catenoid_slope(FRAC_PI_2, c, n).unwrap() - 1.0).abs() < 1e-14);
        assert!((catenoid_slope(FRAC_PI_2, PI / 6.0, 2).unwrap() - sqrt(3.0)).abs() < 1e-14);
        assert!(matches!(catenoid_slope(0.1, 0.4, 2), Err(Error::Domain { .. })));
    }

    #[test]
    fn slope_first_integral_identity() {
        for &(c, n) in &[(0.3, 2), (0.7, 3), (1.2, 4)] {
            for k in 0..20 {
                let u = c + (PI - 2.0 * c) * k as f64 / 19.0;
                let s = catenoid_slope(u, c, n).unwrap();
                let rhs = powi(sin(u) / sin(c), 2 * (n as i32 - 1));
                assert!((s * s + 1.0 - rhs).abs() < 1e-12 * rhs, "{c} {n} {u}");
            }
        }
    }

    #[test]
    fn half_period_agrees_with_ode_shooting() {
        for &n in &[2u32, 3] {
            for &c in &[0.3, 0.7, 1.2] {
                let tol = 1e-9;
                let q = half_period(c, n, tol).unwrap();
                let o = ode_half_period(c, n);
                assert!((q - o).abs() < 10.0 * tol.max(1e-8), "n={n} C={c}: {q} vs {o}");
            }
        }
    }

    #[test]
    fn half_period_small_neck_bound() {
        let c = 0.01;
        let y = half_period(c, 2, 1e-12).unwrap();
        let bound = 2.0 * (2.0 * sin(c) * sqrt(PI - 2.0 * c) / sqrt(sin(2.0 * c)));
        assert!(y < bound, "{y} >= {bound}");
    }

    #[test]
    fn half_period_decreases_towards_zero() {
        let mut prev = f64::INFINITY;
        for &c in &[0.4, 0.2, 0.1, 0.05, 0.02, 0.01, 0.005] {
            let y = half_period(c, 2, 1e-12).unwrap();
            assert!(y < prev);
            prev = y;
        }
        assert!(prev < 0.07);
    }

    #[test]
    fn samples_are_monotone_and_symmetric() {
        let p = sample_catenoid(0.5, 2, 64).unwrap();
        assert_eq!(p.samples[0], (0.5, 0.0));
        assert!(p.samples.windows(2).all(|w| w[1].0 > w[0].0 && w[1].1 > w[0].1));
        let y_c = half_period(0.5, 2, 1e-12).unwrap();
        assert!((p.y_c - y_c).abs() < 1e-10);
        assert!((p.samples.last().unwrap().1 - y_c).abs() < 1e-10);
        let mid = p.v_at(FRAC_PI_2).unwrap();
        assert!((mid - 0.5 * y_c).abs() < 1e-10);
        for &(x, v) in &p.samples {
            let mirrored = p.v_at(PI - x).unwrap();
            assert!((v + mirrored - 2.0 * mid).abs() < 1e-9);
        }
        assert!((p.lambda_c - 1.0 / sin(0.5)).abs() < 1e-14);
    }

    #[test]
    fn sampled_catenoid_is_a_rotation_geodesic_at_second_order() {
        let prof = ConformalProfile::Rotation { n: 2 };
        let resid = |m: usize| {
            let s = sample_catenoid(0.5, 2, m).unwrap();
            let k = geodesic_curvature(&s.barrier_segment(), &prof).unwrap();
            k.iter().fold(0.0f64, |a, v| a.max(v.abs()))
        };
        let (r1, r2) = (resid(64), resid(128));
        assert!(r1 / r2 > 3.0, "{r1} {r2}");
        assert!(r2 < 1e-2);
    }

    #[test]
    fn inverse_function_identity() {
        let (c, n) = (0.6, 3);
        let s = sample_catenoid(c, n, 400).unwrap();
        for w in s.samples.windows(3).skip(20).take(300) {
            let vx = (w[2].1 - w[0].1) / (w[2].0 - w[0].0);
            let uy = catenoid_slope(w[1].0, c, n).unwrap();
            assert!((vx * uy - 1.0).abs() < 1e-3, "{}", vx * uy);
        }
    }

    #[test]
    fn c1_for_two_and_three() {
        for n in [2u32, 3] {
            let r = find_c1(n, 1e-10).unwrap();
            assert!((r.y_c1 - 2.0 / n as f64).abs() < 1e-10);
            let ya = half_period(r.bracket.0, n, 1e-13).unwrap() - 2.0 / n as f64;
            let yb = half_period(r.bracket.1, n, 1e-13).unwrap() - 2.0 / n as f64;
            assert!(ya * yb <= 0.0);
        }
    }

    #[test]
    fn c1_matches_dense_scan() {
        let r = find_c1(2, 1e-10).unwrap();
        // Brute force: step 1e-4 around the coarse scan's bracket.
        let mut best = (f64::INFINITY, 0.0);
        let mut c = 0.02;
        while c < 0.5 {
            let d = (half_period(c, 2, 1e-12).unwrap() - 1.0).abs();
            if d < best.0 {
                best = (d, c);
            }
            c += 1e-4;
        }
        assert!((best.1 - r.c1).abs() < 1e-4, "{} vs {}", best.1, r.c1);
    }

    #[test]
    fn c1_endpoint_of_barrier_segment() {
        let r = find_c1(2, 1e-11).unwrap();
        let s = sample_catenoid(r.c1, 2, 128).unwrap();
        let end = *s.barrier_segment().nodes().last().unwrap();
        assert_eq!(end.0, FRAC_PI_2);
        assert!((end.1 - 0.5).abs() < 1e-9);
    }
}
