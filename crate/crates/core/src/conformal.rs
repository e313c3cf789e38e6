//! Curves in a plane carrying a conformal metric `e^{2φ}(dx² + dy²)`.
//!
//! Two weights matter here: the rotation weight `φ = (n-1) log sin x`, whose
//! length functional is the area of the rotated hypersurface in `S^n × R`,
//! and the shrinker weight `φ = λ log x − (x² + y²)/4`, whose closed
//! geodesics are the λ-Angenent curves. A flat weight is kept for tests.

use alloc::vec::Vec;

use crate::error::{Error, Result};
use crate::math::{cos, exp, hypot, ln, sin, PI};

/// Evaluations closer than this to the edge of a weight's domain are rejected.
pub const DOMAIN_EPS: f64 = 1e-12;

pub type Point = (f64, f64);

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum ConformalProfile {
    /// `φ = (n-1) log sin x` on `0 < x < π`.
    Rotation { n: u32 },
    /// `φ = λ log x − (x² + y²)/4` on `x > 0`.
    AngenentWeight { lambda: f64 },
    /// `φ ≡ 0`; isolates discretisation error from geometry.
    Flat,
}

impl ConformalProfile {
    fn check(&self, x: f64) -> Result<()> {
        match *self {
            ConformalProfile::Rotation { .. } => {
                if !(x > DOMAIN_EPS && x < PI - DOMAIN_EPS) {
                    return Err(Error::Domain { what: "x (rotation weight needs 0 < x < π)", value: x });
                }
            }
            ConformalProfile::AngenentWeight { .. } => {
                if !(x > DOMAIN_EPS) {
                    return Err(Error::Domain { what: "x (shrinker weight needs x > 0)", value: x });
                }
            }
            ConformalProfile::Flat => {
                if !x.is_finite() {
                    return Err(Error::Domain { what: "x", value: x });
                }
            }
        }
        Ok(())
    }

    pub fn phi(&self, x: f64, y: f64) -> Result<f64> {
        self.check(x)?;
        Ok(match *self {
            ConformalProfile::Rotation { n } => (n as f64 - 1.0) * ln(sin(x)),
            ConformalProfile::AngenentWeight { lambda } => lambda * ln(x) - 0.25 * (x * x + y * y),
            ConformalProfile::Flat => 0.0,
        })
    }

    /// `(∂ₓφ, ∂ᵧφ)`.
    pub fn grad(&self, x: f64, y: f64) -> Result<(f64, f64)> {
        self.check(x)?;
        Ok(match *self {
            ConformalProfile::Rotation { n } => ((n as f64 - 1.0) * cos(x) / sin(x), 0.0),
            ConformalProfile::AngenentWeight { lambda } => (lambda / x - 0.5 * x, -0.5 * y),
            ConformalProfile::Flat => (0.0, 0.0),
        })
    }
}

/// An ordered polyline, optionally closed.
#[derive(Debug, Clone, PartialEq)]
pub struct ParametricCurve {
    nodes: Vec<Point>,
    closed: bool,
}

impl ParametricCurve {
    pub fn new(nodes: Vec<Point>, closed: bool) -> Result<Self> {
        if nodes.len() < 3 {
            return Err(Error::Precondition(alloc::format!("a curve needs at least 3 nodes, got {}", nodes.len())));
        }
        if let Some(i) = nodes.iter().position(|p| !(p.0.is_finite() && p.1.is_finite())) {
            return Err(Error::Precondition(alloc::format!("node {i} is not finite")));
        }
        if let Some(i) = nodes.windows(2).position(|w| w[0] == w[1]) {
            return Err(Error::Precondition(alloc::format!("nodes {i} and {} coincide", i + 1)));
        }
        Ok(Self { nodes, closed })
    }

    pub fn nodes(&self) -> &[Point] {
        &self.nodes
    }

    pub fn is_closed(&self) -> bool {
        self.closed
    }

    pub fn len(&self) -> usize {
        self.nodes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.nodes.is_empty()
    }

    pub fn into_nodes(self) -> Vec<Point> {
        self.nodes
    }

    /// Largest distance between consecutive nodes.
    pub fn max_spacing(&self) -> f64 {
        let mut h: f64 = 0.0;
        for w in self.nodes.windows(2) {
            h = h.max(hypot(w[1].0 - w[0].0, w[1].1 - w[0].1));
        }
        h
    }

    /// Swaps the two coordinates of every node.
    pub fn swapped(&self) -> Self {
        Self { nodes: self.nodes.iter().map(|&(x, y)| (y, x)).collect(), closed: self.closed }
    }

    /// Multiplies every coordinate by `c`.
    pub fn scaled(&self, c: f64) -> Self {
        Self { nodes: self.nodes.iter().map(|&(x, y)| (c * x, c * y)).collect(), closed: self.closed }
    }

    pub fn bbox(&self) -> (f64, f64, f64, f64) {
        let mut b = (f64::INFINITY, f64::NEG_INFINITY, f64::INFINITY, f64::NEG_INFINITY);
        for &(x, y) in &self.nodes {
            b.0 = b.0.min(x);
            b.1 = b.1.max(x);
            b.2 = b.2.min(y);
            b.3 = b.3.max(y);
        }
        b
    }
}

/// Signed geodesic curvature `κ_φ = e^{-φ}(κ − ⟨∇φ, n⟩)` at each interior
/// node (every node for closed curves), with `κ` the Euclidean curvature
/// and `n` the Euclidean unit normal to the left of the tangent.
///
/// Derivatives come from the three-point stencil on chord-length spacing,
/// which is second order for smoothly graded nodes.
pub fn geodesic_curvature(curve: &ParametricCurve, profile: &ConformalProfile) -> Result<Vec<f64>> {
    let p = curve.nodes();
    let m = p.len();
    let idx: Vec<usize> = if curve.is_closed() { (0..m).collect() } else { (1..m - 1).collect() };
    let mut out = Vec::with_capacity(idx.len());
    for i in idx {
        let a = p[(i + m - 1) % m];
        let b = p[i];
        let c = p[(i + 1) % m];
        let hm = hypot(b.0 - a.0, b.1 - a.1);
        let hp = hypot(c.0 - b.0, c.1 - b.1);
        if hm == 0.0 || hp == 0.0 {
            return Err(Error::Precondition(alloc::format!("zero node spacing at node {i}")));
        }
        let denom = hm * hp * (hm + hp);
        let d1 = |fa: f64, fb: f64, fc: f64| (hm * hm * (fc - fb) + hp * hp * (fb - fa)) / denom;
        let d2 = |fa: f64, fb: f64, fc: f64| 2.0 * (hm * (fc - fb) - hp * (fb - fa)) / denom;
        let (xs, ys) = (d1(a.0, b.0, c.0), d1(a.1, b.1, c.1));
        let (xss, yss) = (d2(a.0, b.0, c.0), d2(a.1, b.1, c.1));
        let speed = hypot(xs, ys);
        let kappa = (xs * yss - xss * ys) / (speed * speed * speed);
        let (nx, ny) = (-ys / speed, xs / speed);
        let (gx, gy) = profile.grad(b.0, b.1)?;
        let phi = profile.phi(b.0, b.1)?;
        out.push(exp(-phi) * (kappa - (gx * nx + gy * ny)));
    }
    Ok(out)
}

/// Right-hand side of the geodesic equation of `e^{2φ}(dx² + dy²)`.
///
/// `state = (x, y, x', y')`; returns `(x', y', x'', y'')`.
pub fn geodesic_ode_rhs(state: [f64; 4], profile: &ConformalProfile) -> Result<[f64; 4]> {
    let [x, y, xp, yp] = state;
    let (px, py) = profile.grad(x, y)?;
    // Γˣₓₓ = φₓ, Γˣₓᵧ = φᵧ, Γˣᵧᵧ = −φₓ; Γʸₓₓ = −φᵧ, Γʸₓᵧ = φₓ, Γʸᵧᵧ = φᵧ.
    let xpp = -(px * xp * xp + 2.0 * py * xp * yp - px * yp * yp);
    let ypp = -(-py * xp * xp + 2.0 * px * xp * yp + py * yp * yp);
    Ok([xp, yp, xpp, ypp])
}

/// Trapezoidal `∫ e^φ ds` along the polyline (including the closing segment
/// for closed curves).
pub fn weighted_length(curve: &ParametricCurve, profile: &ConformalProfile) -> Result<f64> {
    let p = curve.nodes();
    let w: Vec<f64> = p.iter().map(|&(x, y)| profile.phi(x, y).map(exp)).collect::<Result<_>>()?;
    let mut total = 0.0;
    let segs = if curve.is_closed() { p.len() } else { p.len() - 1 };
    for i in 0..segs {
        let j = (i + 1) % p.len();
        total += 0.5 * (w[i] + w[j]) * hypot(p[j].0 - p[i].0, p[j].1 - p[i].1);
    }
    Ok(total)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::math::{sqrt, FRAC_PI_2};

    fn segment(from: Point, to: Point, m: usize) -> ParametricCurve {
        let nodes = (0..m)
            .map(|i| {
                let s = i as f64 / (m - 1) as f64;
                (from.0 + s * (to.0 - from.0), from.1 + s * (to.1 - from.1))
            })
            .collect();
        ParametricCurve::new(nodes, false).unwrap()
    }

    #[test]
    fn cylinder_line_is_a_shrinker_geodesic() {
        let r = sqrt(2.0);
        let k =
            geodesic_curvature(&segment((r, -1.0), (r, 1.0), 41), &ConformalProfile::AngenentWeight { lambda: 1.0 })
                .unwrap();
        assert!(k.iter().all(|v| v.abs() < 1e-12), "{k:?}");
    }

    #[test]
    fn horizontal_line_is_a_rotation_geodesic() {
        let k = geodesic_curvature(&segment((0.2, 0.3), (2.9, 0.3), 64), &ConformalProfile::Rotation { n: 2 }).unwrap();
        assert!(k.iter().all(|v| v.abs() < 1e-12));
    }

    #[test]
    fn mirror_curves_have_equal_curvature_magnitude() {
        let prof = ConformalProfile::Rotation { n: 3 };
        let c =
            ParametricCurve::new((0..30).map(|i| (0.3 + 0.02 * i as f64, 0.1 * sin(i as f64 * 0.2))).collect(), false)
                .unwrap();
        let mirror = ParametricCurve::new(c.nodes().iter().map(|&(x, y)| (PI - x, y)).collect(), false).unwrap();
        let a = geodesic_curvature(&c, &prof).unwrap();
        let b = geodesic_curvature(&mirror, &prof).unwrap();
        for (u, v) in a.iter().zip(&b) {
            assert!((u.abs() - v.abs()).abs() < 1e-10);
        }
    }

    #[test]
    fn domain_guard_rejects_axis() {
        let prof = ConformalProfile::Rotation { n: 2 };
        assert!(matches!(prof.phi(0.0, 0.0), Err(Error::Domain { .. })));
        assert!(matches!(prof.phi(PI, 0.0), Err(Error::Domain { .. })));
        assert!(prof.phi(1e-11, 0.0).is_ok());
        let ang = ConformalProfile::AngenentWeight { lambda: 0.5 };
        assert!(ang.grad(-1.0, 0.0).is_err());
        let c = segment((0.0, 0.0), (1.0, 0.0), 5);
        assert!(weighted_length(&c, &prof).is_err());
        let c = segment((-0.5, 0.0), (1.0, 0.0), 5);
        assert!(geodesic_curvature(&c, &prof).is_err());
    }

    #[test]
    fn weighted_length_of_vertical_segments() {
        let prof = ConformalProfile::Rotation { n: 2 };
        let l = weighted_length(&segment((FRAC_PI_2, 0.0), (FRAC_PI_2, 1.0), 11), &prof).unwrap();
        assert!((l - 1.0).abs() < 1e-14);
        let l = weighted_length(&segment((PI / 6.0, 0.0), (PI / 6.0, 1.0), 11), &prof).unwrap();
        assert!((l - 0.5).abs() < 1e-14);
    }

    #[test]
    fn weighted_length_refines_at_second_order() {
        let prof = ConformalProfile::AngenentWeight { lambda: 1.0 };
        let arc = |m: usize| {
            ParametricCurve::new(
                (0..m)
                    .map(|i| {
                        let s = i as f64 / (m - 1) as f64 * 2.5;
                        (1.5 + cos(s), sin(s))
                    })
                    .collect(),
                false,
            )
            .unwrap()
        };
        let l = [33, 65, 129].map(|m| weighted_length(&arc(m), &prof).unwrap());
        let ratio = (l[0] - l[1]) / (l[1] - l[2]);
        assert!((ratio - 4.0).abs() < 0.2, "ratio {ratio}");
    }

    #[test]
    fn flat_geodesics_are_straight() {
        let r = geodesic_ode_rhs([0.3, -2.0, 0.6, 0.8], &ConformalProfile::Flat).unwrap();
        assert_eq!(r, [0.6, 0.8, 0.0, 0.0]);
    }

    #[test]
    fn geodesic_rhs_keeps_cylinder_line() {
        let r =
            geodesic_ode_rhs([sqrt(2.0), 0.4, 0.0, 1.0], &ConformalProfile::AngenentWeight { lambda: 1.0 }).unwrap();
        assert!(r[2].abs() < 1e-15);
    }

    #[test]
    fn geodesic_rhs_matches_euler_lagrange_by_finite_differences() {
        // Lagrangian ½ e^{2φ}(x'² + y'²); its Euler–Lagrange equations solved
        // for (x'', y'') with ∇φ from centred differences of φ alone.
        let prof = ConformalProfile::AngenentWeight { lambda: 1.0 };
        let h = 1e-5;
        for &(x, y, xp, yp) in &[(1.0, 0.0, 0.0, 1.0), (0.7, 0.4, 0.3, -0.9), (2.2, -1.1, -0.5, 0.2)] {
            let px = (prof.phi(x + h, y).unwrap() - prof.phi(x - h, y).unwrap()) / (2.0 * h);
            let py = (prof.phi(x, y + h).unwrap() - prof.phi(x, y - h).unwrap()) / (2.0 * h);
            let v2 = xp * xp + yp * yp;
            let dot = px * xp + py * yp;
            let xpp = px * v2 - 2.0 * dot * xp;
            let ypp = py * v2 - 2.0 * dot * yp;
            let r = geodesic_ode_rhs([x, y, xp, yp], &prof).unwrap();
            assert!((r[2] - xpp).abs() < 1e-8 && (r[3] - ypp).abs() < 1e-8, "{r:?} vs {xpp} {ypp}");
        }
        let r = geodesic_ode_rhs([1.0, 0.0, 0.0, 1.0], &prof).unwrap();
        assert!((r[2] - 0.5).abs() < 1e-15);
    }
}
