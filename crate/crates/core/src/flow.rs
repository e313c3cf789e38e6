//! Rotationally symmetric mean curvature flow of an ascending section curve
//! in `D = [0, π/2] × [0, 1]`, written as a vertical graph `x = u(y)` near
//! the head and a horizontal graph `y = v(x)` near `x = π/2`:
//!
//! ```text
//! u_t = u_yy / (1 + u_y²) − (n − 1) cot u,        u_y(0) = 0,
//! v_t = v_xx / (1 + v_x²) + (n − 1) cot x · v_x,  v_x(π/2) = 0.
//! ```
//!
//! The two charts overlap; each one's free end is refreshed from the other
//! after every step, and the curve is re-split when the end slopes drift.

use alloc::format;
use alloc::string::String;
use alloc::vec::Vec;

use crate::conformal::Point;
use crate::error::{Error, Result};
use crate::interp::{linspace, Pchip};
use crate::math::{atan, atan2, cos, exp, floor, hypot, sin, tan, FRAC_PI_2, PI};

/// Nodes each chart keeps inside the overlap band after a re-split.
pub const OVERLAP_NODES: usize = 10;
/// `|dy/dx|` at the free end of the horizontal chart after a re-split; the
/// vertical chart ends where `|dy/dx|` is the reciprocal.
const SPLIT_SLOPE: f64 = 2.0;
/// `u_y` the vertical chart reaches for at its top after a re-split; a
/// longer vertical chart has a coarser grid and allows larger steps.
const VERTICAL_TARGET_SLOPE: f64 = 6.0;
/// Largest `u_y` allowed at the top of the vertical chart after a re-split.
const MAX_VERTICAL_SLOPE: f64 = 60.0;
/// Largest tangent turn per grid cell allowed at a free end after a re-split.
const MAX_TURN: f64 = 0.1;
/// Free ends steeper than this in their own chart force a re-split.
const MAX_END_SLOPE: (f64, f64) = (80.0, 6.0);
/// Free ends turning more than this per cell force a re-split.
const MAX_END_TURN: f64 = 0.2;
/// Vertical-chart nodes kept between the head and the horizontal chart.
const HEAD_CLEARANCE: f64 = 8.0;
/// The vertical chart stops this many of its cells below the height.
const TOP_CLEARANCE: f64 = 2.0;
/// Steps between stitch checks.
const STITCH_STRIDE: u64 = 16;

/// Values on a uniform grid from `lo` to `hi` inclusive.
#[derive(Debug, Clone, PartialEq)]
pub struct Chart {
    pub lo: f64,
    pub hi: f64,
    pub values: Vec<f64>,
}

impl Chart {
    pub fn new(lo: f64, hi: f64, values: Vec<f64>) -> Result<Self> {
        if values.len() < 5 {
            return Err(Error::Precondition(format!("a chart needs at least 5 nodes, got {}", values.len())));
        }
        if !(hi > lo) || !lo.is_finite() || !hi.is_finite() {
            return Err(Error::Precondition(format!("chart interval [{lo}, {hi}] is empty")));
        }
        if let Some(v) = values.iter().find(|v| !v.is_finite()) {
            return Err(Error::Precondition(format!("chart value {v} is not finite")));
        }
        Ok(Self { lo, hi, values })
    }

    /// Samples `f` on `m` uniform nodes.
    pub fn sample(lo: f64, hi: f64, m: usize, f: impl Fn(f64) -> f64) -> Result<Self> {
        Self::new(lo, hi, linspace(lo, hi, m).into_iter().map(f).collect())
    }

    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }

    pub fn spacing(&self) -> f64 {
        (self.hi - self.lo) / (self.values.len() - 1) as f64
    }

    /// Abscissa of node `i`; the last node is exactly `hi`.
    pub fn abscissa(&self, i: usize) -> f64 {
        if i + 1 == self.values.len() {
            self.hi
        } else {
            self.lo + i as f64 * self.spacing()
        }
    }

    pub fn first(&self) -> f64 {
        self.values[0]
    }

    pub fn last(&self) -> f64 {
        self.values[self.values.len() - 1]
    }

    /// Monotone cubic through the nodes around `s`.
    fn local(&self, s: f64) -> Pchip {
        let m = self.values.len();
        let h = self.spacing();
        let i = (floor((s - self.lo) / h).max(0.0) as usize).min(m - 2);
        let a = i.saturating_sub(2);
        let b = (i + 4).min(m);
        let xs: Vec<f64> = (a..b).map(|k| self.abscissa(k)).collect();
        Pchip::new(&xs, &self.values[a..b]).expect("uniform abscissae increase")
    }

    /// Interpolated value at `s`.
    pub fn eval(&self, s: f64) -> f64 {
        self.local(s).eval(s)
    }

    /// Abscissa where the (increasing) chart reaches `target`, if it does.
    pub fn invert(&self, target: f64) -> Option<f64> {
        let v = &self.values;
        let k = v.partition_point(|&w| w < target);
        if k == 0 {
            return (v[0] == target).then_some(self.lo);
        }
        if k == v.len() {
            return None;
        }
        let (mut a, mut b) = (self.abscissa(k - 1), self.abscissa(k));
        let p = self.local(0.5 * (a + b));
        // Newton from the secant guess, falling back to bisection.
        let mut s = a + (target - v[k - 1]) / (v[k] - v[k - 1]) * (b - a);
        for _ in 0..40 {
            let f = p.eval(s) - target;
            if f == 0.0 {
                break;
            }
            if f < 0.0 {
                a = s;
            } else {
                b = s;
            }
            let d = p.derivative(s);
            let next = s - f / d;
            let prev = s;
            s = if d > 0.0 && next > a && next < b { next } else { 0.5 * (a + b) };
            if (s - prev).abs() <= 1e-15 * (1.0 + s.abs()) || b - a <= 1e-15 * (1.0 + s.abs()) {
                break;
            }
        }
        Some(s)
    }

    /// Forward-difference slopes.
    fn slopes(&self) -> impl Iterator<Item = f64> + '_ {
        let h = self.spacing();
        self.values.windows(2).map(move |w| (w[1] - w[0]) / h)
    }
}

/// An ascending section curve as one or two graphs.
#[derive(Debug, Clone, PartialEq)]
pub enum SectionCurve {
    /// `u` on `[0, y_top]` and `v` on `[x_left, π/2]`, with
    /// `x_left < u(y_top)` so the charts overlap.
    Split { vertical: Chart, horizontal: Chart },
    /// `u` on `[0, y_top]` with a symmetry line at `y_top`.
    Vertical(Chart),
    /// `v` on `[0, π/2]`, meeting the rotation axis.
    Horizontal(Chart),
}

impl SectionCurve {
    pub fn vertical(chart: Chart) -> Result<Self> {
        if chart.lo != 0.0 {
            return Err(Error::Precondition(format!("vertical chart must start at y = 0, got {}", chart.lo)));
        }
        Ok(Self::Vertical(chart))
    }

    pub fn horizontal(chart: Chart) -> Result<Self> {
        if chart.lo != 0.0 || chart.hi != FRAC_PI_2 {
            return Err(Error::Precondition(format!(
                "a lone horizontal chart must cover [0, π/2], got [{}, {}]",
                chart.lo, chart.hi
            )));
        }
        Ok(Self::Horizontal(chart))
    }

    pub fn split(vertical: Chart, horizontal: Chart) -> Result<Self> {
        if vertical.lo != 0.0 || horizontal.hi != FRAC_PI_2 {
            return Err(Error::Precondition(format!(
                "split charts must span y from 0 and x to π/2, got [{}, {}] and [{}, {}]",
                vertical.lo, vertical.hi, horizontal.lo, horizontal.hi
            )));
        }
        if !(horizontal.lo < vertical.last() && horizontal.first() < vertical.hi) {
            return Err(Error::Precondition(format!(
                "charts do not overlap: x_left = {}, u(y_top) = {}, v(x_left) = {}, y_top = {}",
                horizontal.lo,
                vertical.last(),
                horizontal.first(),
                vertical.hi
            )));
        }
        Ok(Self::Split { vertical, horizontal })
    }

    /// Splits an ascending polyline running from `(head, 0)` to
    /// `(π/2, height)` into two overlapping charts of `m` nodes each.
    pub fn from_polyline(points: &[Point], m: usize) -> Result<Self> {
        split_polyline(points, m)
    }

    /// Head point `u(0)`, where the curve meets `{y = 0}`.
    pub fn head(&self) -> Option<f64> {
        match self {
            Self::Split { vertical, .. } | Self::Vertical(vertical) => Some(vertical.first()),
            Self::Horizontal(_) => None,
        }
    }

    /// Height `v(π/2)`.
    pub fn height(&self) -> Option<f64> {
        match self {
            Self::Split { horizontal, .. } | Self::Horizontal(horizontal) => Some(horizontal.last()),
            Self::Vertical(_) => None,
        }
    }

    /// Smallest grid spacing over both charts.
    pub fn min_spacing(&self) -> f64 {
        match self {
            Self::Split { vertical, horizontal } => vertical.spacing().min(horizontal.spacing()),
            Self::Vertical(c) | Self::Horizontal(c) => c.spacing(),
        }
    }

    /// Largest forward-difference slope of the vertical (`u_y`) and
    /// horizontal (`v_x`) charts.
    pub fn max_slopes(&self) -> (Option<f64>, Option<f64>) {
        let max = |c: &Chart| c.slopes().fold(f64::NEG_INFINITY, f64::max);
        match self {
            Self::Split { vertical, horizontal } => (Some(max(vertical)), Some(max(horizontal))),
            Self::Vertical(c) => (Some(max(c)), None),
            Self::Horizontal(c) => (None, Some(max(c))),
        }
    }

    /// The curve as one polyline from the head (or the axis) to `x = π/2`.
    /// Split curves switch charts in the middle of the overlap.
    pub fn polyline(&self) -> Vec<Point> {
        match self {
            Self::Vertical(c) => (0..c.len()).map(|j| (c.values[j], c.abscissa(j))).collect(),
            Self::Horizontal(c) => (0..c.len()).map(|i| (c.abscissa(i), c.values[i])).collect(),
            Self::Split { vertical, horizontal } => {
                let y_cut = 0.5 * (horizontal.first() + vertical.hi);
                let x_cut = vertical.eval(y_cut);
                // Nodes right next to the cut would leave a tiny segment whose
                // direction is mostly stitch error.
                let (k, h) = (0.5 * vertical.spacing(), 0.5 * horizontal.spacing());
                let vert = (0..vertical.len())
                    .map(|j| (vertical.values[j], vertical.abscissa(j)))
                    .take_while(|q| q.1 < y_cut - k);
                let hor = (0..horizontal.len())
                    .map(|i| (horizontal.abscissa(i), horizontal.values[i]))
                    .filter(|q| q.0 > x_cut + h);
                // Drop points that round-off would make descend.
                let mut p: Vec<Point> = Vec::with_capacity(vertical.len() + horizontal.len());
                for q in vert.chain(core::iter::once((x_cut, y_cut))).chain(hor) {
                    if p.last().is_none_or(|l: &Point| q.0 >= l.0 && q.1 >= l.1 && q != *l) {
                        p.push(q);
                    }
                }
                p
            }
        }
    }

    /// Largest `|v(x) − y|` over the horizontal nodes `x` inside the overlap,
    /// where `y = u⁻¹(x)` comes from the (finer) vertical chart.
    pub fn stitch_error(&self) -> f64 {
        let Self::Split { vertical, horizontal } = self else {
            return 0.0;
        };
        let mut err: f64 = 0.0;
        for i in 1..horizontal.len() {
            let x = horizontal.abscissa(i);
            if x >= vertical.last() {
                break;
            }
            if let Some(y) = vertical.invert(x) {
                err = err.max((horizontal.values[i] - y).abs());
            }
        }
        err
    }

    /// Why the free ends no longer sit where they should, if they don't:
    /// an end too steep or turning too fast for its chart, too little
    /// overlap, or the horizontal chart too close to the head.
    pub fn resplit_reason(&self) -> Option<&'static str> {
        let Self::Split { vertical: u, horizontal: v } = self else {
            return None;
        };
        let (m, k, h) = (u.len(), u.spacing(), v.spacing());
        let uv = &u.values;
        let vv = &v.values;
        let su = |j: usize| (uv[j + 1] - uv[j]) / k;
        let sv = |i: usize| (vv[i + 1] - vv[i]) / h;
        let top_turn = (atan(1.0 / su(m - 2)) - atan(1.0 / su(m - 3))).abs();
        let left_turn = (atan(sv(1)) - atan(sv(0))).abs();
        if !(su(m - 2) <= MAX_END_SLOPE.0) {
            Some("vertical end too flat")
        } else if !(sv(0) <= MAX_END_SLOPE.1) {
            Some("horizontal end too steep")
        } else if !(top_turn <= MAX_END_TURN) {
            Some("vertical end under-resolved")
        } else if !(left_turn <= MAX_END_TURN) {
            Some("horizontal end under-resolved")
        } else if (u.hi - v.first()) / k < 4.0 {
            Some("vertical overlap")
        } else if (u.last() - v.lo) / h < 4.0 {
            Some("horizontal overlap")
        } else if v.first() < HEAD_CLEARANCE * k {
            Some("horizontal chart too close to the head")
        } else if v.last() - u.hi < TOP_CLEARANCE * k {
            Some("height too close to y_top")
        } else {
            None
        }
    }

    fn needs_resplit(&self) -> bool {
        self.resplit_reason().is_some()
    }

    fn is_ascending(&self, slope_tol: f64) -> bool {
        let ok = |c: &Chart| c.slopes().all(|s| s > -slope_tol);
        match self {
            Self::Split { vertical, horizontal } => ok(vertical) && ok(horizontal),
            Self::Vertical(c) | Self::Horizontal(c) => ok(c),
        }
    }
}

fn split_polyline(points: &[Point], m: usize) -> Result<SectionCurve> {
    if m < 2 * OVERLAP_NODES {
        return Err(Error::Precondition(format!("charts need at least {} nodes, got {m}", 2 * OVERLAP_NODES)));
    }
    if points.len() < 4 {
        return Err(Error::Precondition(format!("polyline has only {} points", points.len())));
    }
    let (head, last) = (points[0], points[points.len() - 1]);
    if head.1 != 0.0 || last.0 != FRAC_PI_2 || !(head.0 > 0.0) {
        return Err(Error::Precondition(format!(
            "polyline must run from (head > 0, 0) to (π/2, height), got {head:?} .. {last:?}"
        )));
    }
    if let Some(w) = points.windows(2).find(|w| w[1].0 < w[0].0 || w[1].1 < w[0].1 || w[0] == w[1]) {
        return Err(Error::Precondition(format!("polyline is not ascending between {:?} and {:?}", w[0], w[1])));
    }
    let n = points.len();
    let angle: Vec<f64> = points.windows(2).map(|w| atan2(w[1].1 - w[0].1, w[1].0 - w[0].0)).collect();
    // Discrete curvature at the interior vertices.
    let ds: Vec<f64> = points.windows(2).map(|w| hypot(w[1].0 - w[0].0, w[1].1 - w[0].1)).collect();
    let kappa = |i: usize| (angle[i] - angle[i - 1]).abs() / (0.5 * (ds[i - 1] + ds[i]));
    let c = OVERLAP_NODES as f64 / (m - 1) as f64;

    // The horizontal chart reaches left until the curve gets steeper than
    // SPLIT_SLOPE or turns too fast for its grid.
    let steep = atan(SPLIT_SLOPE);
    let mut il = n - 2;
    for i in (1..n - 1).rev() {
        let x = points[i].0;
        let h = (FRAC_PI_2 - x) / (m - 1) as f64;
        if angle[i - 1] > steep || kappa(i) * h / cos(angle[i - 1]) > MAX_TURN {
            break;
        }
        il = i;
    }
    let (x_left, y_left) = points[il];
    if !(x_left > head.0) {
        return Err(Error::Geometry("curve never steepens; it has no vertical part".into()));
    }

    // The vertical chart reaches up past the flat point with enough overlap,
    // as long as it stays resolved and not too flat.
    let flat = atan(1.0 / VERTICAL_TARGET_SLOPE);
    let flattest = atan(1.0 / MAX_VERTICAL_SLOPE);
    let x_need = x_left + c * (FRAC_PI_2 - x_left);
    let y_need = y_left / (1.0 - c);
    let mut it = None;
    let mut fallback = None;
    let mut stop = None;
    for j in il + 1..n - 1 {
        let (x, y) = points[j];
        let k = y / (m - 1) as f64;
        let turn = kappa(j) * k / sin(angle[j]);
        if angle[j] < flattest || turn > MAX_TURN {
            stop = Some((points[j], angle[j], turn));
            break;
        }
        let overlaps = x >= x_need && y >= y_need;
        if last.1 - y < 2.0 * TOP_CLEARANCE * k {
            // Too close to the top for the flat target; settle for the
            // steepest point so far that still overlaps.
            stop = Some((points[j], angle[j], turn));
            break;
        }
        if overlaps {
            fallback = Some(j);
        }
        if angle[j] <= flat && overlaps {
            it = Some(j);
            break;
        }
    }
    let it = it.or(fallback);
    let Some(it) = it else {
        return Err(Error::Geometry(format!(
            "no resolved overlap for the charts (head {}, x_left {x_left}, y_left {y_left}, need x ≥ {x_need} and y ≥ {y_need}, stopped at {stop:?})",
            head.0
        )));
    };
    let y_top = points[it].1;

    // Points usable as graphs over y and over x respectively.
    let mut by_y: Vec<Point> = Vec::with_capacity(points.len());
    let mut by_x: Vec<Point> = Vec::with_capacity(points.len());
    for &p in points {
        if by_y.last().is_none_or(|q: &Point| p.1 > q.1) {
            by_y.push(p);
        }
        if by_x.last().is_none_or(|q: &Point| p.0 > q.0) {
            by_x.push(p);
        }
    }
    let uy = Pchip::new(&by_y.iter().map(|p| p.1).collect::<Vec<_>>(), &by_y.iter().map(|p| p.0).collect::<Vec<_>>())?;
    let vx = Pchip::new(&by_x.iter().map(|p| p.0).collect::<Vec<_>>(), &by_x.iter().map(|p| p.1).collect::<Vec<_>>())?;
    let mut u: Vec<f64> = linspace(0.0, y_top, m).into_iter().map(|y| uy.eval(y)).collect();
    u[0] = head.0;
    let mut v: Vec<f64> = linspace(x_left, FRAC_PI_2, m).into_iter().map(|x| vx.eval(x)).collect();
    v[m - 1] = last.1;
    SectionCurve::split(Chart::new(0.0, y_top, u)?, Chart::new(x_left, FRAC_PI_2, v)?)
}

/// Knobs of the integrator.
#[derive(Debug, Clone, PartialEq)]
pub struct FlowParams {
    pub n: u32,
    /// Nodes per chart.
    pub nodes: usize,
    /// `dt = cfl · (min grid spacing)²`.
    pub cfl: f64,
    pub theta_pinch: f64,
    pub theta_collapse: f64,
    pub stitch_tol: f64,
    /// Slopes above `−slope_tol` count as ascending.
    pub slope_tol: f64,
    /// Spacing of trace samples; steps land exactly on sample times.
    pub monitor_interval: f64,
    /// Spacing of stored polylines, a multiple of `monitor_interval`.
    pub snapshot_interval: Option<f64>,
    pub max_steps: u64,
}

impl Default for FlowParams {
    fn default() -> Self {
        Self {
            n: 2,
            nodes: 256,
            cfl: 0.25,
            theta_pinch: 0.02,
            theta_collapse: 0.02,
            stitch_tol: 1e-3,
            slope_tol: 1e-9,
            monitor_interval: 1e-2,
            snapshot_interval: None,
            max_steps: 200_000_000,
        }
    }
}

impl FlowParams {
    fn validate(&self) -> Result<()> {
        let positive = [
            ("cfl", self.cfl),
            ("theta_pinch", self.theta_pinch),
            ("theta_collapse", self.theta_collapse),
            ("stitch_tol", self.stitch_tol),
            ("slope_tol", self.slope_tol),
            ("monitor_interval", self.monitor_interval),
        ];
        if let Some((k, v)) = positive.iter().find(|(_, v)| !(*v > 0.0)) {
            return Err(Error::Precondition(format!("{k} must be positive, got {v}")));
        }
        if self.n < 2 {
            return Err(Error::Precondition(format!("dimension n must be at least 2, got {}", self.n)));
        }
        if self.cfl > 0.5 {
            return Err(Error::Precondition(format!("cfl {} exceeds the explicit stability limit 0.5", self.cfl)));
        }
        if let Some(s) = self.snapshot_interval {
            if !(s > 0.0) {
                return Err(Error::Precondition(format!("snapshot_interval must be positive, got {s}")));
            }
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct FlowState {
    pub t: f64,
    pub curve: SectionCurve,
}

impl FlowState {
    pub fn new(curve: SectionCurve) -> Self {
        Self { t: 0.0, curve }
    }

    pub fn head(&self) -> Option<f64> {
        self.curve.head()
    }

    pub fn height(&self) -> Option<f64> {
        self.curve.height()
    }
}

/// True iff every finite-difference slope of both charts exceeds `−slope_tol`.
pub fn monitor_ascending(state: &FlowState, slope_tol: f64) -> bool {
    state.curve.is_ascending(slope_tol)
}

fn cot(x: f64) -> f64 {
    cos(x) / sin(x)
}

fn vertical_rates(u: &Chart, nm1: f64, neumann_top: bool, out: &mut Vec<f64>) {
    let m = u.len();
    let k = u.spacing();
    let v = &u.values;
    out.clear();
    let end = if neumann_top { m } else { m - 1 };
    for j in 0..end {
        let um = if j == 0 { v[1] } else { v[j - 1] };
        let up = if j == m - 1 { v[m - 2] } else { v[j + 1] };
        let uy = (up - um) / (2.0 * k);
        let uyy = (up - 2.0 * v[j] + um) / (k * k);
        out.push(uyy / (1.0 + uy * uy) - nm1 / tan(v[j]));
    }
}

/// Buffers reused across steps; `cot_x` caches `cot` on the horizontal grid.
#[derive(Default)]
struct Scratch {
    ru: Vec<f64>,
    rv: Vec<f64>,
    grid: Option<(f64, usize)>,
    cot_x: Vec<f64>,
}

impl Scratch {
    fn cot_for(&mut self, c: &Chart) {
        let key = (c.lo, c.len());
        if self.grid != Some(key) {
            self.cot_x = (0..c.len()).map(|i| cot(c.abscissa(i))).collect();
            self.grid = Some(key);
        }
    }
}

fn horizontal_rates(c: &Chart, n: u32, cot_x: &[f64], out: &mut Vec<f64>) {
    let m = c.len();
    let h = c.spacing();
    let v = &c.values;
    let nm1 = n as f64 - 1.0;
    let pole = c.lo == 0.0;
    out.clear();
    if pole {
        out.push(n as f64 * 2.0 * (v[1] - v[0]) / (h * h));
    }
    for i in 1..m {
        let vp = if i == m - 1 { v[m - 2] } else { v[i + 1] };
        let vx = (vp - v[i - 1]) / (2.0 * h);
        let vxx = (vp - 2.0 * v[i] + v[i - 1]) / (h * h);
        out.push(vxx / (1.0 + vx * vx) + nm1 * cot_x[i] * vx);
    }
}

/// Largest stable step for the current curve.
fn stable_dt(curve: &SectionCurve, p: &FlowParams) -> f64 {
    let nm1 = p.n as f64 - 1.0;
    let s = curve.min_spacing();
    let mut dt = p.cfl * s * s;
    let source = |u: &Chart| {
        let m = u.values.iter().fold(f64::INFINITY, |a, &b| a.min(b));
        0.1 * sin(m) * sin(m) / nm1
    };
    let advection = |v: &Chart| {
        if v.lo == 0.0 {
            return p.cfl * v.spacing() * v.spacing() / p.n as f64;
        }
        let smax = v.slopes().fold(0.0, |a: f64, b| a.max(b.abs()));
        let a = nm1 * cot(v.lo);
        2.0 / (1.0 + smax * smax) / (a * a)
    };
    match curve {
        SectionCurve::Split { vertical, horizontal } => {
            dt = dt.min(source(vertical)).min(advection(horizontal));
        }
        SectionCurve::Vertical(u) => dt = dt.min(source(u)),
        SectionCurve::Horizontal(v) => dt = dt.min(advection(v)),
    }
    dt
}

/// Advances `state` by one explicit Euler step of at most `dt_max`, after
/// re-splitting if the charts have drifted. Returns the step taken.
pub fn step(state: &mut FlowState, params: &FlowParams, dt_max: f64) -> Result<f64> {
    step_with(state, params, dt_max, &mut Scratch::default()).map(|(dt, _)| dt)
}

fn step_with(state: &mut FlowState, p: &FlowParams, dt_max: f64, sc: &mut Scratch) -> Result<(f64, bool)> {
    let mut resplit = false;
    if state.curve.needs_resplit() {
        let m = match &state.curve {
            SectionCurve::Split { vertical, .. } => vertical.len(),
            _ => unreachable!(),
        };
        state.curve = split_polyline(&state.curve.polyline(), m)
            .map_err(|e| Error::Consistency { t: state.t, detail: format!("re-split failed: {e}") })?;
        resplit = true;
    }
    let dt = stable_dt(&state.curve, p).min(dt_max);
    let nm1 = p.n as f64 - 1.0;
    let t = state.t + dt;
    match &mut state.curve {
        SectionCurve::Vertical(u) => {
            vertical_rates(u, nm1, true, &mut sc.ru);
            u.values.iter_mut().zip(sc.ru.iter()).for_each(|(a, r)| *a += dt * r);
        }
        SectionCurve::Horizontal(v) => {
            sc.cot_for(v);
            horizontal_rates(v, p.n, &sc.cot_x, &mut sc.rv);
            v.values.iter_mut().zip(sc.rv.iter()).for_each(|(a, r)| *a += dt * r);
        }
        SectionCurve::Split { vertical: u, horizontal: v } => {
            vertical_rates(u, nm1, false, &mut sc.ru);
            sc.cot_for(v);
            horizontal_rates(v, p.n, &sc.cot_x, &mut sc.rv);
            u.values.iter_mut().zip(sc.ru.iter()).for_each(|(a, r)| *a += dt * r);
            v.values[1..].iter_mut().zip(sc.rv.iter()).for_each(|(a, r)| *a += dt * r);
            let m = u.len();
            u.values[m - 1] = v.invert(u.hi).ok_or_else(|| Error::Consistency {
                t,
                detail: format!("horizontal chart no longer reaches y_top = {} (height {})", u.hi, v.last()),
            })?;
            v.values[0] = u.invert(v.lo).ok_or_else(|| Error::Consistency {
                t,
                detail: format!("vertical chart no longer reaches x_left = {} (u(y_top) = {})", v.lo, u.last()),
            })?;
        }
    }
    state.t = t;
    Ok((dt, resplit))
}

/// How a run ended.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Outcome {
    /// The head reached the rotation axis.
    Pinched {
        t: f64,
    },
    /// The head reached the geodesic hypersphere `x = π/2`.
    Collapsed {
        t: f64,
    },
    Survived {
        horizon: f64,
    },
}

impl Outcome {
    pub fn time(&self) -> f64 {
        match *self {
            Self::Pinched { t } | Self::Collapsed { t } => t,
            Self::Survived { horizon } => horizon,
        }
    }

    pub fn label(&self) -> &'static str {
        match self {
            Self::Pinched { .. } => "Pinched",
            Self::Collapsed { .. } => "Collapsed",
            Self::Survived { .. } => "Survived",
        }
    }

    pub fn is_pinched(&self) -> bool {
        matches!(self, Self::Pinched { .. })
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TraceSample {
    pub t: f64,
    pub head: Option<f64>,
    pub height: Option<f64>,
    pub max_slope_vertical: Option<f64>,
    pub max_slope_horizontal: Option<f64>,
}

impl TraceSample {
    fn of(state: &FlowState) -> Self {
        let (sv, sh) = state.curve.max_slopes();
        Self {
            t: state.t,
            head: state.head(),
            height: state.height(),
            max_slope_vertical: sv,
            max_slope_horizontal: sh,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Snapshot {
    pub t: f64,
    pub polyline: Vec<Point>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct FlowTrace {
    pub samples: Vec<TraceSample>,
    pub snapshots: Vec<Snapshot>,
    pub outcome: Outcome,
    pub final_state: FlowState,
    pub steps: u64,
    pub resplits: u64,
    /// Sample times at which some chart slope fell below `−slope_tol`.
    pub ascending_violations: Vec<f64>,
    /// Largest stitch error seen.
    pub max_stitch_error: f64,
    /// Smallest grid spacing used, for truncation-order tolerances.
    pub min_spacing: f64,
}

impl FlowTrace {
    /// Largest increase of the height between consecutive samples.
    pub fn max_height_increase(&self) -> f64 {
        let h: Vec<f64> = self.samples.iter().filter_map(|s| s.height).collect();
        h.windows(2).map(|w| w[1] - w[0]).fold(0.0, f64::max)
    }
}

/// A failed run with everything recorded up to the failure.
#[derive(Debug, Clone)]
pub struct RunFailure {
    pub error: Error,
    pub partial: FlowTrace,
}

fn classify_state(state: &FlowState, p: &FlowParams) -> Option<Outcome> {
    let head = state.head()?;
    if head < p.theta_pinch {
        Some(Outcome::Pinched { t: state.t })
    } else if head > FRAC_PI_2 - p.theta_collapse {
        Some(Outcome::Collapsed { t: state.t })
    } else {
        None
    }
}

/// [`run_observed`] without an observer.
pub fn run(initial: SectionCurve, horizon: f64, params: &FlowParams) -> core::result::Result<FlowTrace, RunFailure> {
    run_observed(initial, horizon, params, &mut |_| {})
}

/// Evolves `initial` until it pinches, collapses or reaches `horizon`.
/// `observer` sees the state at `t = 0` and at every sample time.
pub fn run_observed(
    initial: SectionCurve,
    horizon: f64,
    params: &FlowParams,
    observer: &mut dyn FnMut(&FlowState),
) -> core::result::Result<FlowTrace, RunFailure> {
    let mut state = FlowState::new(initial);
    let mut trace = FlowTrace {
        samples: Vec::new(),
        snapshots: Vec::new(),
        outcome: Outcome::Survived { horizon },
        final_state: state.clone(),
        steps: 0,
        resplits: 0,
        ascending_violations: Vec::new(),
        max_stitch_error: 0.0,
        min_spacing: state.curve.min_spacing(),
    };
    let fail = |error: Error, mut trace: FlowTrace, state: FlowState| {
        trace.final_state = state;
        Err(RunFailure { error, partial: trace })
    };
    if let Err(e) = params.validate() {
        return fail(e, trace, state);
    }
    if !(horizon >= 0.0) {
        return fail(Error::Precondition(format!("horizon must be non-negative, got {horizon}")), trace, state);
    }
    let record = |state: &FlowState, trace: &mut FlowTrace, observer: &mut dyn FnMut(&FlowState)| {
        trace.samples.push(TraceSample::of(state));
        if !monitor_ascending(state, params.slope_tol) {
            trace.ascending_violations.push(state.t);
        }
        observer(state);
    };
    record(&state, &mut trace, observer);
    if params.snapshot_interval.is_some() {
        trace.snapshots.push(Snapshot { t: 0.0, polyline: state.curve.polyline() });
    }
    if let Some(o) = classify_state(&state, params) {
        trace.outcome = o;
        trace.final_state = state;
        return Ok(trace);
    }
    let mut scratch = Scratch::default();
    let mut sample_no = 1u64;
    let mut snap_no = 1u64;
    while state.t < horizon {
        if trace.steps >= params.max_steps {
            let e = Error::Numerical(format!("no outcome after {} steps (t = {})", params.max_steps, state.t));
            return fail(e, trace, state);
        }
        let next_sample = (sample_no as f64 * params.monitor_interval).min(horizon);
        let next_snap = params.snapshot_interval.map(|s| (snap_no as f64 * s).min(horizon));
        let target = next_snap.map_or(next_sample, |s| s.min(next_sample));
        let dt_max = target - state.t;
        match step_with(&mut state, params, dt_max, &mut scratch) {
            Ok((_, resplit)) => trace.resplits += resplit as u64,
            Err(e) => return fail(e, trace, state),
        }
        trace.steps += 1;
        if state.t >= target - 1e-12 * target.max(1.0) {
            state.t = target;
        }
        trace.min_spacing = trace.min_spacing.min(state.curve.min_spacing());
        let values_ok = match &state.curve {
            SectionCurve::Split { vertical, horizontal } => {
                vertical.values.iter().chain(&horizontal.values).all(|v| v.is_finite())
            }
            SectionCurve::Vertical(c) | SectionCurve::Horizontal(c) => c.values.iter().all(|v| v.is_finite()),
        };
        if !values_ok {
            return fail(Error::Numerical(format!("non-finite chart value at t = {}", state.t)), trace, state);
        }
        if trace.steps.is_multiple_of(STITCH_STRIDE) {
            let err = state.curve.stitch_error();
            trace.max_stitch_error = trace.max_stitch_error.max(err);
            if err > params.stitch_tol {
                let e = Error::Consistency {
                    t: state.t,
                    detail: format!("stitch error {err:e} exceeds {:e}", params.stitch_tol),
                };
                return fail(e, trace, state);
            }
        }
        let outcome = classify_state(&state, params);
        if state.t == next_sample || outcome.is_some() {
            if state.t == next_sample {
                sample_no += 1;
            }
            record(&state, &mut trace, observer);
        }
        if next_snap == Some(state.t) {
            snap_no += 1;
            trace.snapshots.push(Snapshot { t: state.t, polyline: state.curve.polyline() });
        }
        if let Some(o) = outcome {
            trace.outcome = o;
            break;
        }
    }
    if params.snapshot_interval.is_some() && trace.snapshots.last().map(|s| s.t) != Some(state.t) {
        trace.snapshots.push(Snapshot { t: state.t, polyline: state.curve.polyline() });
    }
    trace.final_state = state;
    Ok(trace)
}

/// Result of a check whose preconditions may not hold on a given trace.
#[derive(Debug, Clone, PartialEq)]
pub enum CheckResult {
    Pass,
    Fail { t: f64, at: f64, value: f64, bound: f64 },
    Inapplicable(String),
}

impl CheckResult {
    pub fn passed(&self) -> bool {
        matches!(self, Self::Pass)
    }
}

/// Lower bound `u_y(y, t) ≥ ε e^{−λ̄² t} sin(λ̄ (y − a))` on `[a, h]`, with
/// `h` the smallest height over the snapshots, `λ̄ = π / (h − a)` and `ε`
/// the smallest `arctan u_y` on `[a, h]` at `t = 0`. Slopes come from the
/// snapshot polylines.
pub fn gradient_lower_bound_check(trace: &FlowTrace, a: f64, tol: f64) -> CheckResult {
    let snaps = &trace.snapshots;
    if snaps.first().map(|s| s.t) != Some(0.0) {
        return CheckResult::Inapplicable("trace has no snapshot at t = 0".into());
    }
    let h = snaps.iter().map(|s| s.polyline.last().map_or(0.0, |p| p.1)).fold(f64::INFINITY, f64::min);
    if !(h > a) {
        return CheckResult::Inapplicable(format!("height {h} does not stay above a = {a}"));
    }
    let segments = |poly: &[Point]| -> Vec<(f64, f64)> {
        poly.windows(2)
            .filter_map(|w| {
                let ym = 0.5 * (w[0].1 + w[1].1);
                (ym >= a && ym <= h).then(|| {
                    let dy = w[1].1 - w[0].1;
                    let dx = w[1].0 - w[0].0;
                    let slope = if dy > 0.0 {
                        dx / dy
                    } else if dy == 0.0 && dx > 0.0 {
                        f64::INFINITY
                    } else {
                        f64::NEG_INFINITY
                    };
                    (ym, slope)
                })
            })
            .collect()
    };
    let first = segments(&snaps[0].polyline);
    if first.is_empty() {
        return CheckResult::Inapplicable(format!("no samples in [{a}, {h}]"));
    }
    let eps = first.iter().map(|s| atan(s.1)).fold(f64::INFINITY, f64::min);
    let lam = PI / (h - a);
    for s in snaps {
        for (y, slope) in segments(&s.polyline) {
            let bound = eps * exp(-lam * lam * s.t) * sin(lam * (y - a));
            if slope < bound - tol {
                return CheckResult::Fail { t: s.t, at: y, value: slope, bound };
            }
        }
    }
    CheckResult::Pass
}

/// Human-readable name of a curve shape, for logs and manifests.
pub fn shape_label(curve: &SectionCurve) -> String {
    match curve {
        SectionCurve::Split { .. } => "split".into(),
        SectionCurve::Vertical(_) => "vertical".into(),
        SectionCurve::Horizontal(_) => "horizontal".into(),
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::math::{acos, sqrt};

    fn ellipse(delta: f64, height: f64, k: usize) -> Vec<Point> {
        let a = FRAC_PI_2 - delta;
        linspace(0.0, FRAC_PI_2, k)
            .into_iter()
            .enumerate()
            .map(|(i, th)| {
                if i == k - 1 {
                    (FRAC_PI_2, height)
                } else if i == 0 {
                    (delta, 0.0)
                } else {
                    (delta + a * (1.0 - cos(th)), height * sin(th))
                }
            })
            .collect()
    }

    #[test]
    fn ellipse_splits_into_consistent_charts() {
        let c = SectionCurve::from_polyline(&ellipse(0.3, 0.25, 4000), 256).unwrap();
        assert!(c.stitch_error() < 2e-4, "{}", c.stitch_error());
        assert!(!c.needs_resplit());
        assert_eq!(c.head(), Some(0.3));
        assert_eq!(c.height(), Some(0.25));
        let SectionCurve::Split { vertical, horizontal } = &c else { panic!() };
        // u(y) = δ + A (1 − √(1 − (y/H)²)) on the ellipse.
        for j in 0..vertical.len() {
            let y = vertical.abscissa(j);
            let exact = 0.3 + (FRAC_PI_2 - 0.3) * (1.0 - sqrt(1.0 - (y / 0.25) * (y / 0.25)));
            assert!((vertical.values[j] - exact).abs() < 1e-6);
        }
        assert!(horizontal.lo < vertical.last());
    }

    #[test]
    fn chart_inversion_round_trips() {
        let c = Chart::sample(0.0, 1.0, 50, |y| y * y + y).unwrap();
        let s = c.invert(0.75).unwrap();
        assert!((s - 0.5).abs() < 1e-5);
        assert_eq!(c.invert(3.0), None);
    }

    #[test]
    fn homogeneous_vertical_line_follows_the_ode() {
        let u0 = 1.0;
        let curve = SectionCurve::vertical(Chart::sample(0.0, 1.0, 64, |_| u0).unwrap()).unwrap();
        let p = FlowParams { n: 3, ..Default::default() };
        let tr = run(curve, 0.1, &p).unwrap();
        let u = tr.final_state.head().unwrap();
        let exact = acos(cos(u0) * exp(2.0 * 0.1));
        assert!((u - exact).abs() < 1e-4);
    }

    #[test]
    fn ascending_monitor_flags_an_inverted_node() {
        let mut c = Chart::sample(0.0, 1.0, 20, |y| 0.5 + 0.1 * y).unwrap();
        let s = FlowState::new(SectionCurve::Vertical(c.clone()));
        assert!(monitor_ascending(&s, 1e-9));
        c.values[7] = c.values[9];
        assert!(!monitor_ascending(&FlowState::new(SectionCurve::Vertical(c)), 1e-9));
    }
}
