//! λ-Angenent curves: closed embedded geodesics of
//! `x^{2λ} e^{-(x² + y²)/2} (dx² + dy²)` on `x > 0`, found by shooting from
//! the symmetry line `{y = 0}`, plus their shrinking evolution
//! `X_t = κ N − (λ / x) ⟨e_x, N⟩ N`.
//!
//! Curves are stored with `x` the distance to the rotation axis and `y` the
//! axial coordinate, the same layout as the section plane `D`.
//! [`AngenentCurve::upper_half_plane`] gives the transposed layout with the
//! axis horizontal.

use alloc::format;
use alloc::vec::Vec;

use crate::conformal::{geodesic_curvature, geodesic_ode_rhs, ConformalProfile, ParametricCurve, Point};
use crate::error::{Error, Result};
use crate::geometry::{first_self_intersection, hausdorff};
use crate::interp::linspace;
use crate::math::{abs, exp, hypot, sqrt};
use crate::ode::{integrate, Event, OdeOptions, Stop};

/// Shooting stops as "hit the axis" once `x` drops below this.
pub const AXIS_X: f64 = 1e-6;
/// Points per side of the cylinder radius in the bracket scan.
pub const SCAN_POINTS_PER_SIDE: usize = 32;
pub const DEFAULT_NODES: usize = 401;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ShootingOutcome {
    /// Came back to `{y = 0}` moving downwards.
    Returned,
    /// Euclidean arclength exceeded the budget.
    Escaped,
    HitAxis,
}

#[derive(Debug, Clone)]
pub struct ShootingResult {
    pub r0: f64,
    pub outcome: ShootingOutcome,
    /// Horizontal component of the Euclidean unit tangent at the end point.
    pub closure_defect: f64,
    pub end: Point,
    /// Euclidean arclength travelled.
    pub length: f64,
    /// Largest `|e^φ |γ'| − 1|` over accepted steps.
    pub speed_drift: f64,
    pub trajectory: Vec<Point>,
}

fn shooting_options() -> OdeOptions {
    OdeOptions { rtol: 1e-12, atol: 1e-13, h_init: 1e-4, h_min: 1e-15, h_max: 0.02, max_steps: 2_000_000 }
}

/// Geodesic flow reparametrised by Euclidean arclength `σ`: the state is
/// `(x, y, x', y')` with `'` the affine derivative.
fn arclength_rhs(profile: ConformalProfile) -> impl FnMut(f64, &[f64; 4]) -> Result<[f64; 4]> {
    move |_, s: &[f64; 4]| {
        let d = geodesic_ode_rhs(*s, &profile)?;
        let v = hypot(s[2], s[3]);
        Ok([d[0] / v, d[1] / v, d[2] / v, d[3] / v])
    }
}

fn initial_state(r0: f64, profile: &ConformalProfile) -> Result<[f64; 4]> {
    let phi = profile.phi(r0, 0.0)?;
    Ok([r0, 0.0, 0.0, exp(-phi)])
}

fn check_lambda(lambda: f64) -> Result<()> {
    if !(lambda > 0.0 && lambda.is_finite()) {
        return Err(Error::Precondition(format!("λ must be positive, got {lambda}")));
    }
    Ok(())
}

/// Shoots the geodesic leaving `(r0, 0)` straight up and follows it to its
/// first downward crossing of `{y = 0}`.
pub fn shoot_geodesic(r0: f64, lambda: f64, max_len: f64) -> Result<ShootingResult> {
    check_lambda(lambda)?;
    let cyl = sqrt(2.0 * lambda);
    if !(r0 > 0.0) || !(max_len > 0.0) {
        return Err(Error::Precondition(format!("need r0 > 0 and max_len > 0, got {r0} and {max_len}")));
    }
    if abs(r0 - cyl) <= 1e-12 * cyl {
        return Err(Error::Precondition(format!(
            "r0 = {r0} is the cylinder radius √(2λ); that geodesic is a straight line and never returns"
        )));
    }
    let profile = ConformalProfile::AngenentWeight { lambda };
    let y0 = initial_state(r0, &profile)?;
    let sol = integrate(
        arclength_rhs(profile),
        0.0,
        y0,
        max_len,
        &shooting_options(),
        Some(Event { g: |_: f64, s: &[f64; 4]| s[1], direction: -1 }),
        |_, s: &[f64; 4]| s[0] < AXIS_X,
    )?;
    let mut speed_drift: f64 = 0.0;
    for s in &sol.y {
        if let Ok(phi) = profile.phi(s[0], s[1]) {
            speed_drift = speed_drift.max(abs(exp(phi) * hypot(s[2], s[3]) - 1.0));
        }
    }
    let (length, end) = sol.last();
    let outcome = match sol.stop {
        Stop::Event => ShootingOutcome::Returned,
        Stop::Halted => ShootingOutcome::HitAxis,
        Stop::End => ShootingOutcome::Escaped,
    };
    Ok(ShootingResult {
        r0,
        outcome,
        closure_defect: end[2] / hypot(end[2], end[3]),
        end: (end[0], end[1]),
        length,
        speed_drift,
        trajectory: sol.y.iter().map(|s| (s[0], s[1])).collect(),
    })
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ScanRow {
    pub r0: f64,
    pub outcome: ShootingOutcome,
    pub closure_defect: f64,
}

/// Arclength budget used by the bracket scan.
pub fn default_max_len(lambda: f64) -> f64 {
    40.0 * sqrt(2.0 * lambda).max(1.0)
}

/// Shoots from 32 radii in `[0.1, 0.99]·√(2λ)` and 32 in `[1.01, 3]·√(2λ)`.
pub fn scan_shooting(lambda: f64) -> Result<Vec<ScanRow>> {
    check_lambda(lambda)?;
    let cyl = sqrt(2.0 * lambda);
    let max_len = default_max_len(lambda);
    let mut radii = linspace(0.1 * cyl, 0.99 * cyl, SCAN_POINTS_PER_SIDE);
    radii.extend(linspace(1.01 * cyl, 3.0 * cyl, SCAN_POINTS_PER_SIDE));
    radii
        .into_iter()
        .map(|r0| {
            let s = shoot_geodesic(r0, lambda, max_len)?;
            Ok(ScanRow { r0, outcome: s.outcome, closure_defect: s.closure_defect })
        })
        .collect()
}

/// Adjacent pairs of returned shots whose closure defects change sign,
/// in increasing `r0`.
pub fn sign_change_brackets(scan: &[ScanRow]) -> Vec<(f64, f64)> {
    scan.windows(2)
        .filter(|w| {
            w[0].outcome == ShootingOutcome::Returned
                && w[1].outcome == ShootingOutcome::Returned
                && w[0].closure_defect * w[1].closure_defect <= 0.0
        })
        .map(|w| (w[0].r0, w[1].r0))
        .collect()
}

#[derive(Debug, Clone)]
pub struct AngenentCurve {
    pub lambda: f64,
    /// Shooting radius of the closed geodesic (before any dilation).
    pub r_star: f64,
    /// Return radius `s` of the undilated curve.
    pub s_return: f64,
    pub closure_defect: f64,
    /// Upper half from `(r*, 0)` to `(s, 0)`, equally spaced in arclength,
    /// already multiplied by `dilation`.
    pub half_curve: ParametricCurve,
    pub dilation: f64,
    /// `(x_min, x_max, y_min, y_max)` of `half_curve`.
    pub bbox: (f64, f64, f64, f64),
    /// Final bisection bracket on `r0`.
    pub bracket: (f64, f64),
    /// Number of bisection shots.
    pub bisection_steps: usize,
}

impl AngenentCurve {
    /// The closed curve: upper half followed by its mirror image.
    pub fn closed_curve(&self) -> ParametricCurve {
        let h = self.half_curve.nodes();
        let mut nodes = h.to_vec();
        nodes.extend(h[1..h.len() - 1].iter().rev().map(|&(x, y)| (x, -y)));
        ParametricCurve::new(nodes, true).expect("mirrored half curve has distinct nodes")
    }

    /// The closed curve with the rotation axis horizontal: `(axial, radial)`.
    pub fn upper_half_plane(&self) -> ParametricCurve {
        self.closed_curve().swapped()
    }

    /// Multiplies the curve by `c` (on top of any earlier dilation).
    pub fn dilated(&self, c: f64) -> Self {
        let half_curve = self.half_curve.scaled(c);
        let bbox = half_curve.bbox();
        Self { half_curve, bbox, dilation: self.dilation * c, ..self.clone() }
    }

    /// Extinction time of the shrinking curve: the undilated geodesic is
    /// the time `−1` slice of `√(−t) Σ`, so `c Σ` disappears after `c²`.
    pub fn collapse_time(&self) -> f64 {
        self.dilation * self.dilation
    }

    /// The curve `√(1 − t / T₀)` times this one, i.e. the self-similar
    /// solution at time `t`, as an upper half.
    pub fn shrunk_half(&self, t: f64) -> Option<ParametricCurve> {
        let t0 = self.collapse_time();
        if !(t < t0) {
            return None;
        }
        Some(self.half_curve.scaled(sqrt(1.0 - t / t0)))
    }

    pub fn is_embedded(&self) -> bool {
        first_self_intersection(self.closed_curve().nodes(), true).is_none()
    }

    /// `max |κ_φ|` of the undilated closed curve.
    pub fn max_curvature_residual(&self) -> Result<f64> {
        let c = self.closed_curve().scaled(1.0 / self.dilation);
        let k = geodesic_curvature(&c, &ConformalProfile::AngenentWeight { lambda: self.lambda })?;
        Ok(k.iter().fold(0.0, |m, v| m.max(abs(*v))))
    }
}

/// Bisects the closure defect on `bracket` until `|defect| < tol` and samples
/// the closed geodesic with `nodes` points on the upper half.
pub fn find_closed_curve_with(lambda: f64, bracket: (f64, f64), tol: f64, nodes: usize) -> Result<AngenentCurve> {
    check_lambda(lambda)?;
    if !(tol > 0.0) || nodes < 8 {
        return Err(Error::Precondition(format!("need tol > 0 and at least 8 nodes, got {tol} and {nodes}")));
    }
    let max_len = default_max_len(lambda);
    let (mut a, mut b) = if bracket.0 < bracket.1 { bracket } else { (bracket.1, bracket.0) };
    let sa = shoot_geodesic(a, lambda, max_len)?;
    let sb = shoot_geodesic(b, lambda, max_len)?;
    let table =
        |a: &ShootingResult, b: &ShootingResult| alloc::vec![(a.r0, a.closure_defect), (b.r0, b.closure_defect)];
    if sa.outcome != ShootingOutcome::Returned
        || sb.outcome != ShootingOutcome::Returned
        || sa.closure_defect * sb.closure_defect > 0.0
    {
        return Err(Error::Search {
            what: format!("bracket ({a}, {b}) does not straddle a closed geodesic for λ = {lambda}"),
            table: table(&sa, &sb),
        });
    }
    let mut fa = sa.closure_defect;
    let mut best = if abs(sa.closure_defect) < abs(sb.closure_defect) { sa } else { sb };
    let mut steps = 0;
    while abs(best.closure_defect) >= 1e-3 * tol && b - a > 4.0 * f64::EPSILON * b {
        let m = 0.5 * (a + b);
        let s = shoot_geodesic(m, lambda, max_len)?;
        steps += 1;
        if s.outcome != ShootingOutcome::Returned {
            return Err(Error::Search {
                what: format!("shot from r0 = {m} inside the bracket did not return ({:?})", s.outcome),
                table: alloc::vec![(a, fa), (m, s.closure_defect), (b, f64::NAN)],
            });
        }
        if s.closure_defect * fa <= 0.0 {
            b = m;
        } else {
            a = m;
            fa = s.closure_defect;
        }
        let better = abs(s.closure_defect) < abs(best.closure_defect);
        if better {
            best = s;
        }
    }
    if !(abs(best.closure_defect) < tol) {
        return Err(Error::Search {
            what: format!(
                "closure defect stalled at {:e} on ({a}, {b}); the sign change is a jump, not a root",
                best.closure_defect
            ),
            table: alloc::vec![(a, fa), (best.r0, best.closure_defect)],
        });
    }
    let half = sample_geodesic(best.r0, lambda, best.length, nodes)?;
    let s_return = half.nodes()[half.len() - 1].0;
    let bbox = half.bbox();
    Ok(AngenentCurve {
        lambda,
        r_star: best.r0,
        s_return,
        closure_defect: best.closure_defect,
        half_curve: half,
        dilation: 1.0,
        bbox,
        bracket: (a, b),
        bisection_steps: steps,
    })
}

/// [`find_closed_curve_with`] at the default resolution.
pub fn find_closed_curve(lambda: f64, bracket: (f64, f64), tol: f64) -> Result<AngenentCurve> {
    find_closed_curve_with(lambda, bracket, tol, DEFAULT_NODES)
}

/// Scans for brackets and returns the closed curve from the first one that
/// converges, together with the scan table.
pub fn find_angenent(lambda: f64, tol: f64, nodes: usize) -> Result<(AngenentCurve, Vec<ScanRow>)> {
    let scan = scan_shooting(lambda)?;
    let brackets = sign_change_brackets(&scan);
    let mut last_err = None;
    for br in brackets {
        match find_closed_curve_with(lambda, br, tol, nodes) {
            Ok(c) if c.is_embedded() => return Ok((c, scan)),
            Ok(c) => {
                last_err = Some(Error::Geometry(format!("closed geodesic from r* = {} is not embedded", c.r_star)))
            }
            Err(e) => last_err = Some(e),
        }
    }
    Err(last_err.unwrap_or_else(|| Error::Search {
        what: format!("no sign change of the closure defect among returned shots for λ = {lambda}"),
        table: scan.iter().map(|r| (r.r0, r.closure_defect)).collect(),
    }))
}

/// Re-integrates the geodesic from `(r0, 0)` to Euclidean arclength
/// `length`, recording `nodes` equally spaced points.
fn sample_geodesic(r0: f64, lambda: f64, length: f64, nodes: usize) -> Result<ParametricCurve> {
    let profile = ConformalProfile::AngenentWeight { lambda };
    let mut state = initial_state(r0, &profile)?;
    let stations = linspace(0.0, length, nodes);
    let mut pts = Vec::with_capacity(nodes);
    pts.push((r0, 0.0));
    let never = |_: f64, _: &[f64; 4]| false;
    for w in stations.windows(2) {
        let sol = integrate(
            arclength_rhs(profile),
            w[0],
            state,
            w[1],
            &shooting_options(),
            None::<Event<fn(f64, &[f64; 4]) -> f64>>,
            never,
        )?;
        state = sol.last().1;
        pts.push((state[0], state[1]));
    }
    let last = pts.len() - 1;
    pts[last].1 = 0.0;
    ParametricCurve::new(pts, false)
}

/// Largest dilation `c` with `c · curve` inside `(x_lo, x_hi) × [0, y_hi]`
/// leaving 5% margins.
pub fn dilate_to_box(curve: &AngenentCurve, bx: (f64, f64, f64)) -> Result<AngenentCurve> {
    let (x_lo, x_hi, y_hi) = bx;
    if !(x_lo >= 0.0 && x_hi > x_lo && y_hi > 0.0) {
        return Err(Error::Precondition(format!("empty box ({x_lo}, {x_hi}) × [0, {y_hi}]")));
    }
    let (x_min, x_max, _, y_max) = curve.bbox;
    let c = (0.95 * x_hi / x_max).min(0.95 * y_hi / y_max);
    if c * x_min < 1.05 * x_lo {
        return Err(Error::Geometry(format!(
            "Angenent curve with x-extent ratio {:.3} cannot fit in ({x_lo}, {x_hi}) × [0, {y_hi}] with 5% margins",
            x_max / x_min
        )));
    }
    Ok(curve.dilated(c))
}

#[derive(Debug, Clone, Copy)]
pub struct LambdaFlowOptions {
    /// `dt = cfl · h²` with `h` the smallest node spacing.
    pub cfl: f64,
    /// The run stops (pinch) once `min x` falls below this.
    pub pinch_x: f64,
    /// The run also stops once the bounding box of the curve is smaller
    /// than this in both directions (extinction away from the axis).
    pub extinct_size: f64,
    pub max_steps: usize,
}

impl Default for LambdaFlowOptions {
    fn default() -> Self {
        Self { cfl: 0.25, pinch_x: 1e-3, extinct_size: 0.0, max_steps: 50_000_000 }
    }
}

#[derive(Debug, Clone)]
pub struct LambdaFlowTrace {
    /// Curves at the requested snapshot times that were reached.
    pub snapshots: Vec<(f64, Vec<Point>)>,
    pub pinch_time: Option<f64>,
    pub end_time: f64,
    pub steps: usize,
    /// Number of monotone pieces stayed constant on every step.
    pub monotone_pieces_preserved: bool,
    pub final_curve: Vec<Point>,
}

/// Sign changes of `dy` along the curve: the number of horizontal-tangent
/// splits between monotone pieces.
fn monotone_pieces(p: &[Point], closed: bool) -> usize {
    let n = p.len();
    let m = if closed { n } else { n - 1 };
    let mut signs = (0..m).map(|k| p[(k + 1) % n].1 - p[k].1).filter(|d| *d != 0.0).map(|d| d > 0.0);
    let Some(first) = signs.next() else { return 0 };
    let (mut prev, mut changes) = (first, 0);
    for s in signs {
        if s != prev {
            changes += 1;
        }
        prev = s;
    }
    if closed && prev != first {
        changes += 1;
    }
    changes
}

/// Node `k` of the curve, continued periodically (closed) or by mirror images
/// across the horizontal lines through the end nodes (open).
fn node(p: &[Point], closed: bool, k: isize) -> Point {
    let n = p.len() as isize;
    if closed {
        p[k.rem_euclid(n) as usize]
    } else if k < 0 {
        let (x, y) = p[(-k) as usize];
        (x, 2.0 * p[0].1 - y)
    } else if k >= n {
        let (x, y) = p[(2 * (n - 1) - k) as usize];
        (x, 2.0 * p[(n - 1) as usize].1 - y)
    } else {
        p[k as usize]
    }
}

/// Nodal velocity `X_uu / |X_u|² − (λ / x) ⟨e_x, N⟩ N` from fourth-order
/// central differences; returns the smallest `|X_u|²` (squared spacing).
fn lambda_velocity(p: &[Point], closed: bool, lambda: f64, out: &mut [Point]) -> f64 {
    let mut h2 = f64::INFINITY;
    for (k, o) in out.iter_mut().enumerate() {
        let k = k as isize;
        let (m2, m1, c, p1, p2) = (
            node(p, closed, k - 2),
            node(p, closed, k - 1),
            p[k as usize],
            node(p, closed, k + 1),
            node(p, closed, k + 2),
        );
        let xu = (-p2.0 + 8.0 * p1.0 - 8.0 * m1.0 + m2.0) / 12.0;
        let yu = (-p2.1 + 8.0 * p1.1 - 8.0 * m1.1 + m2.1) / 12.0;
        let xuu = (-p2.0 + 16.0 * p1.0 - 30.0 * c.0 + 16.0 * m1.0 - m2.0) / 12.0;
        let yuu = (-p2.1 + 16.0 * p1.1 - 30.0 * c.1 + 16.0 * m1.1 - m2.1) / 12.0;
        let q = xu * xu + yu * yu;
        h2 = h2.min(q);
        let l = sqrt(q);
        let (nx, ny) = (-yu / l, xu / l);
        let s = -lambda / c.0 * nx;
        *o = (xuu / q + s * nx, yuu / q + s * ny);
    }
    if !closed {
        out[0].1 = 0.0;
        let last = out.len() - 1;
        out[last].1 = 0.0;
    }
    h2
}

/// Evolution of `X_t = X_uu / |X_u|² − (λ / x) ⟨e_x, N⟩ N`, whose graph
/// form is `u_t = u_yy / (1 + u_y²) − λ / u`: fourth-order differences in
/// space, classical Runge–Kutta in time with `dt = cfl · min |X_u|²`.
///
/// Closed curves are periodic. Open curves are graphs whose end nodes sit on
/// horizontal symmetry lines: the ends keep their `y` and ghost nodes are the
/// mirror images of their neighbours.
pub fn evolve_lambda_flow(
    initial: &ParametricCurve,
    lambda: f64,
    opts: &LambdaFlowOptions,
    horizon: f64,
    snapshot_times: &[f64],
) -> Result<LambdaFlowTrace> {
    check_lambda(lambda)?;
    if let Some(p) = initial.nodes().iter().find(|p| !(p.0 > 0.0)) {
        return Err(Error::Precondition(format!("initial curve must lie in x > 0, found node {p:?}")));
    }
    if initial.len() < 5 {
        return Err(Error::Precondition(format!("λ-flow needs at least 5 nodes, got {}", initial.len())));
    }
    let closed = initial.is_closed();
    let mut p = initial.nodes().to_vec();
    let n = p.len();
    let pieces0 = monotone_pieces(&p, closed);
    let mut preserved = true;
    let mut snaps = Vec::new();
    let mut pending: Vec<f64> = snapshot_times.iter().copied().filter(|&s| s >= 0.0 && s <= horizon).collect();
    pending.sort_by(f64::total_cmp);
    let mut pending = pending.into_iter().peekable();
    let mut t = 0.0;
    let mut steps = 0;
    while pending.peek() == Some(&0.0) {
        snaps.push((0.0, p.clone()));
        pending.next();
    }
    let zero = alloc::vec![(0.0, 0.0); n];
    let (mut k1, mut k2, mut k3, mut k4) = (zero.clone(), zero.clone(), zero.clone(), zero);
    let mut stage = p.clone();
    let mut pinch_time = None;
    while t < horizon {
        if steps >= opts.max_steps {
            return Err(Error::Numerical(format!("λ-flow did not finish within {} steps (t = {t})", opts.max_steps)));
        }
        let (mut x_min, mut x_max) = (f64::INFINITY, f64::NEG_INFINITY);
        let (mut y_min, mut y_max) = (f64::INFINITY, f64::NEG_INFINITY);
        for q in &p {
            x_min = x_min.min(q.0);
            x_max = x_max.max(q.0);
            y_min = y_min.min(q.1);
            y_max = y_max.max(q.1);
        }
        if x_min < opts.pinch_x || (x_max - x_min < opts.extinct_size && y_max - y_min < opts.extinct_size) {
            pinch_time = Some(t);
            break;
        }
        let h2 = lambda_velocity(&p, closed, lambda, &mut k1);
        let mut dt = (opts.cfl * h2).min(0.05 * x_min * x_min / lambda).min(horizon - t);
        let target = pending.peek().copied();
        if let Some(s) = target {
            dt = dt.min(s - t);
        }
        let mut axis_hit = false;
        for st in 0..3 {
            let (ks, w) = match st {
                0 => (&k1, 0.5),
                1 => (&k2, 0.5),
                _ => (&k3, 1.0),
            };
            for ((s, q), v) in stage.iter_mut().zip(&p).zip(ks.iter()) {
                *s = (q.0 + w * dt * v.0, q.1 + w * dt * v.1);
            }
            if stage.iter().any(|q| !(q.0 > 0.0)) {
                axis_hit = true;
                break;
            }
            let kn = match st {
                0 => &mut k2,
                1 => &mut k3,
                _ => &mut k4,
            };
            lambda_velocity(&stage, closed, lambda, kn);
        }
        if axis_hit {
            pinch_time = Some(t);
            break;
        }
        for k in 0..n {
            let (a, b, c, d) = (k1[k], k2[k], k3[k], k4[k]);
            p[k].0 += dt / 6.0 * (a.0 + 2.0 * b.0 + 2.0 * c.0 + d.0);
            p[k].1 += dt / 6.0 * (a.1 + 2.0 * b.1 + 2.0 * c.1 + d.1);
        }
        if p.iter().any(|q| !(q.0.is_finite() && q.1.is_finite())) {
            return Err(Error::Numerical(format!("λ-flow produced a non-finite node at t = {t}")));
        }
        t = if target == Some(t + dt) { target.unwrap() } else { t + dt };
        steps += 1;
        if monotone_pieces(&p, closed) != pieces0 {
            preserved = false;
        }
        if p.iter().any(|q| q.0 <= 0.0) {
            pinch_time = Some(t);
            break;
        }
        while pending.peek().is_some_and(|&s| s <= t) {
            snaps.push((t, p.clone()));
            pending.next();
        }
    }
    Ok(LambdaFlowTrace {
        snapshots: snaps,
        pinch_time,
        end_time: t,
        steps,
        monotone_pieces_preserved: preserved,
        final_curve: p,
    })
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SelfSimilarityCheck {
    pub dt: f64,
    pub hausdorff: f64,
    /// Largest node spacing of the initial closed curve.
    pub grid_spacing: f64,
}

impl SelfSimilarityCheck {
    pub fn passes(&self) -> bool {
        self.hausdorff < 5.0 * self.grid_spacing
    }
}

/// Evolves the closed curve for `fraction · T₀` and measures its distance to
/// the exact rescaling `√(1 − fraction)` of the initial curve.
pub fn self_similarity_check(curve: &AngenentCurve, fraction: f64) -> Result<SelfSimilarityCheck> {
    if !(fraction > 0.0 && fraction < 1.0) {
        return Err(Error::Precondition(format!("fraction must lie in (0, 1), got {fraction}")));
    }
    let t0 = curve.collapse_time();
    let dt = fraction * t0;
    let closed = curve.closed_curve();
    let opts = LambdaFlowOptions { pinch_x: 1e-3 * curve.bbox.0, ..Default::default() };
    let tr = evolve_lambda_flow(&closed, curve.lambda, &opts, dt, &[dt])?;
    let Some((_, evolved)) = tr.snapshots.last() else {
        return Err(Error::Numerical(format!("λ-flow stopped at t = {} before {dt}", tr.end_time)));
    };
    let exact = closed.scaled(sqrt(1.0 - fraction));
    Ok(SelfSimilarityCheck {
        dt,
        hausdorff: hausdorff(evolved, true, exact.nodes(), true),
        grid_spacing: closed.max_spacing(),
    })
}

/// Numerical extinction time: the closed curve is evolved until its inner
/// radius falls to `1%` of the initial one or it fits in a box of `1%` of its
/// outer radius. The shrinker is unstable, so late on the curve drifts off
/// the self-similar path and disappears away from the axis.
pub fn numerical_collapse_time(curve: &AngenentCurve) -> Result<f64> {
    let closed = curve.closed_curve();
    let opts =
        LambdaFlowOptions { pinch_x: 0.01 * curve.bbox.0, extinct_size: 0.01 * curve.bbox.1, ..Default::default() };
    let tr = evolve_lambda_flow(&closed, curve.lambda, &opts, 2.0 * curve.collapse_time(), &[])?;
    tr.pinch_time.ok_or_else(|| Error::Numerical(format!("closed λ-curve did not collapse by t = {}", tr.end_time)))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn cylinder_radius_is_rejected() {
        assert!(matches!(shoot_geodesic(sqrt(2.0), 1.0, 10.0), Err(Error::Precondition(_))));
    }

    #[test]
    fn lambda_one_bracket_from_coarse_shots() {
        let a = shoot_geodesic(0.3 * sqrt(2.0), 1.0, default_max_len(1.0)).unwrap();
        let b = shoot_geodesic(0.9 * sqrt(2.0), 1.0, default_max_len(1.0)).unwrap();
        assert_eq!(a.outcome, ShootingOutcome::Returned);
        assert_eq!(b.outcome, ShootingOutcome::Returned);
        assert!(a.closure_defect * b.closure_defect < 0.0);
        assert!(a.speed_drift < 1e-8 && b.speed_drift < 1e-8);
    }

    #[test]
    fn monotone_piece_count() {
        let sq = [(1.0, -1.0), (2.0, 0.0), (1.0, 1.0), (0.5, 0.0)];
        assert_eq!(monotone_pieces(&sq, true), 2);
        assert_eq!(monotone_pieces(&[(1.0, 0.0), (1.0, 0.5), (1.0, 1.0)], false), 0);
    }

    #[test]
    fn constant_graph_follows_the_ode() {
        let nodes: Vec<Point> = linspace(0.0, 1.0, 41).into_iter().map(|y| (1.0, y)).collect();
        let c = ParametricCurve::new(nodes, false).unwrap();
        let tr = evolve_lambda_flow(&c, 1.0, &LambdaFlowOptions::default(), 0.25, &[0.25]).unwrap();
        let (_, snap) = &tr.snapshots[0];
        for q in snap {
            assert!((q.0 * q.0 - 0.5).abs() < 1e-3, "{q:?}");
        }
    }
}
