//! The "on top of" order on curves in `D`, barrier monitors and the choice
//! of the constants `α`, `β` together with the Angenent barrier.

use alloc::format;
use alloc::string::String;
use alloc::vec::Vec;

use crate::angenent::{dilate_to_box, AngenentCurve};
use crate::conformal::Point;
use crate::error::{Error, Result};
use crate::family::family_polyline;
use crate::flow::FlowTrace;
use crate::interp::linspace;
use crate::math::{FRAC_PI_2, FRAC_PI_4};

/// Uniform columns added to the breakpoints of both curves.
pub const UNIFORM_COLUMNS: usize = 512;
/// Margin required when choosing `α` and `β`.
pub const CHOICE_MARGIN: f64 = 1e-3;
/// Step of the upward scan for `β`.
pub const BETA_STEP: f64 = 1e-3;

/// `(min y, max y)` of the polyline over the column `x = c`.
fn column(poly: &[Point], c: f64) -> Option<(f64, f64)> {
    let mut lo = f64::INFINITY;
    let mut hi = f64::NEG_INFINITY;
    let mut hit = |y: f64| {
        lo = lo.min(y);
        hi = hi.max(y);
    };
    if poly.len() == 1 && poly[0].0 == c {
        hit(poly[0].1);
    }
    for w in poly.windows(2) {
        let (p, q) = (w[0], w[1]);
        if c < p.0.min(q.0) || c > p.0.max(q.0) {
            continue;
        }
        if p.0 == q.0 {
            hit(p.1);
            hit(q.1);
        } else {
            hit(p.1 + (q.1 - p.1) * (c - p.0) / (q.0 - p.0));
        }
    }
    (lo <= hi).then_some((lo, hi))
}

fn x_range(poly: &[Point]) -> (f64, f64) {
    poly.iter().fold((f64::INFINITY, f64::NEG_INFINITY), |(a, b), p| (a.min(p.0), b.max(p.0)))
}

/// Smallest `min y(upper) − max y(lower)` over the shared columns, with
/// the column where it occurs. `None` when the curves share no column.
///
/// Columns are the breakpoints of both polylines plus a uniform grid, which
/// makes the check exact for polylines.
pub fn column_gap(upper: &[Point], lower: &[Point]) -> Option<(f64, f64)> {
    if upper.is_empty() || lower.is_empty() {
        return None;
    }
    let (a0, a1) = x_range(upper);
    let (b0, b1) = x_range(lower);
    let (lo, hi) = (a0.max(b0), a1.min(b1));
    if lo > hi {
        return None;
    }
    let mut cols: Vec<f64> = upper.iter().chain(lower).map(|p| p.0).filter(|&x| x >= lo && x <= hi).collect();
    cols.extend(linspace(lo, hi, UNIFORM_COLUMNS));
    let mut worst: Option<(f64, f64)> = None;
    for c in cols {
        let (Some((u, _)), Some((_, l))) = (column(upper, c), column(lower, c)) else {
            continue;
        };
        let g = u - l;
        if worst.is_none_or(|w| g < w.0) {
            worst = Some((g, c));
        }
    }
    worst
}

/// `upper` is on top of `lower`: on every shared column the lowest point of
/// `upper` is at least `margin` above the highest point of `lower`. With
/// `margin = 0` this is the non-strict order; any positive margin makes it
/// strict.
pub fn on_top_of(upper: &[Point], lower: &[Point], margin: f64) -> bool {
    column_gap(upper, lower).is_none_or(|(g, _)| if margin > 0.0 { g >= margin } else { g >= 0.0 })
}

#[derive(Debug, Clone)]
pub enum BarrierKind {
    Static(Vec<Point>),
    /// The Angenent curve shrinking to the origin, `√(1 − t/T₀)` times
    /// the given (dilated) curve; valid for `t < T₀`.
    SelfSimilar(AngenentCurve),
}

/// Which side of the evolving curve the barrier is on.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Side {
    Above,
    Below,
}

#[derive(Debug, Clone)]
pub struct BarrierSpec {
    pub kind: BarrierKind,
    pub side: Side,
}

impl BarrierSpec {
    /// Barrier curve at time `t`, or `None` once a shrinking barrier is gone.
    pub fn at(&self, t: f64) -> Option<Vec<Point>> {
        match &self.kind {
            BarrierKind::Static(c) => Some(c.clone()),
            BarrierKind::SelfSimilar(a) => a.shrunk_half(t).map(|c| c.into_nodes()),
        }
    }

    /// Signed distance to violation at time `t`; negative means crossed.
    /// A shrinking barrier below the curve also traps the head between the
    /// axis and its inner point.
    fn gap(&self, t: f64, curve: &[Point], head: Option<f64>) -> Option<(f64, f64)> {
        let b = self.at(t)?;
        let g = match self.side {
            Side::Above => column_gap(&b, curve),
            Side::Below => column_gap(curve, &b),
        };
        let trap = match (&self.kind, self.side, head) {
            (BarrierKind::SelfSimilar(_), Side::Below, Some(h)) => Some((b[0].0 - h, h)),
            _ => None,
        };
        match (g, trap) {
            (Some(g), Some(tr)) => Some(if tr.0 < g.0 { tr } else { g }),
            (g, tr) => g.or(tr),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Violation {
    pub t: f64,
    /// Negative gap: how far the curves cross.
    pub gap: f64,
    pub x: f64,
}

#[derive(Debug, Clone, PartialEq, Default)]
pub struct ComparisonReport {
    pub checks: usize,
    /// Crossings within the warning tolerance.
    pub warnings: Vec<Violation>,
    pub first_violation: Option<Violation>,
    /// Smallest gap seen.
    pub min_gap: Option<f64>,
    /// Time after which a shrinking barrier no longer exists.
    pub expired_at: Option<f64>,
}

impl ComparisonReport {
    pub fn clean(&self) -> bool {
        self.first_violation.is_none()
    }
}

/// Checks a barrier against a running flow. Crossings up to `warn_tol`
/// (twice the squared grid spacing) are warnings; larger ones are failures.
#[derive(Debug, Clone)]
pub struct ComparisonMonitor {
    pub spec: BarrierSpec,
    pub warn_tol: f64,
    pub report: ComparisonReport,
}

impl ComparisonMonitor {
    /// Fails if the barrier is not on its declared side of `initial`.
    pub fn new(spec: BarrierSpec, initial: &[Point], head: Option<f64>, grid_spacing: f64) -> Result<Self> {
        if let Some((g, x)) = spec.gap(0.0, initial, head) {
            if g < 0.0 {
                return Err(Error::Precondition(format!("barrier starts on the wrong side (gap {g:e} at x = {x})")));
            }
        }
        Ok(Self { spec, warn_tol: 2.0 * grid_spacing * grid_spacing, report: ComparisonReport::default() })
    }

    pub fn observe(&mut self, t: f64, curve: &[Point], head: Option<f64>) {
        let Some((g, x)) = self.spec.gap(t, curve, head) else {
            if self.spec.at(t).is_none() && self.report.expired_at.is_none() {
                self.report.expired_at = Some(t);
            }
            return;
        };
        let r = &mut self.report;
        r.checks += 1;
        r.min_gap = Some(r.min_gap.map_or(g, |m| m.min(g)));
        if g < 0.0 {
            let v = Violation { t, gap: g, x };
            if -g <= self.warn_tol {
                r.warnings.push(v);
            } else if r.first_violation.is_none() {
                r.first_violation = Some(v);
            }
        }
    }
}

/// Runs a [`ComparisonMonitor`] over the stored snapshots of a trace.
pub fn comparison_monitor(trace: &FlowTrace, barrier: BarrierSpec) -> Result<ComparisonReport> {
    let snaps = &trace.snapshots;
    let Some(first) = snaps.first() else {
        return Err(Error::Precondition("trace has no snapshots".into()));
    };
    let head_at = |t: f64| trace.samples.iter().find(|s| s.t == t).and_then(|s| s.head);
    let mut m = ComparisonMonitor::new(barrier, &first.polyline, head_at(first.t), trace.min_spacing)?;
    for s in snaps {
        m.observe(s.t, &s.polyline, head_at(s.t));
    }
    Ok(m.report)
}

/// Mutual nesting of two runs at their common snapshot times.
pub fn nesting_monitor(upper: &FlowTrace, lower: &FlowTrace) -> ComparisonReport {
    let h = upper.min_spacing.min(lower.min_spacing);
    let warn = 2.0 * h * h;
    let mut r = ComparisonReport::default();
    for s in &upper.snapshots {
        let Some(o) = lower.snapshots.iter().find(|o| o.t == s.t) else {
            continue;
        };
        let Some((g, x)) = column_gap(&s.polyline, &o.polyline) else {
            continue;
        };
        r.checks += 1;
        r.min_gap = Some(r.min_gap.map_or(g, |m| m.min(g)));
        if g < 0.0 {
            let v = Violation { t: s.t, gap: g, x };
            if -g <= warn {
                r.warnings.push(v);
            } else if r.first_violation.is_none() {
                r.first_violation = Some(v);
            }
        }
    }
    r
}

/// `head(t) ≤ β + slack` at every sample.
pub fn away_from_boundary_check(trace: &FlowTrace, beta: f64, slack: f64) -> bool {
    trace.samples.iter().filter_map(|s| s.head).all(|h| h <= beta + slack)
}

/// The corner path `{x = β, 0 ≤ y ≤ y₀} ∪ {y = y₀, β ≤ x ≤ π/2}`.
pub fn corner_path(beta: f64, y0: f64) -> Vec<Point> {
    alloc::vec![(beta, 0.0), (beta, y0), (FRAC_PI_2, y0)]
}

#[derive(Debug, Clone)]
pub struct BarrierChoice {
    pub alpha: f64,
    pub beta: f64,
    /// The Angenent curve dilated into `(2α, π/4) × [0, 1/(2n)]`, below the
    /// family curve at `δ = α`.
    pub angenent: AngenentCurve,
    /// `α` values tried before one admitted a dilation, largest first.
    pub alpha_trials: Vec<f64>,
    /// Human-readable notes on what had to be adjusted.
    pub notes: Vec<String>,
}

/// Picks `α` (starting from `C₁/8`), dilates the Angenent curve into
/// `(2α, π/4) × [0, 1/(2n)]` so that the family curve at `δ = α` is on top
/// of it, and scans `β` upward from `C₁` until the catenoid segment is on
/// top of the corner path at `β`.
///
/// When the box is too narrow for the curve, or the largest dilation pokes
/// through the family curve, the dilation is reduced; when no dilation
/// works, `α` is reduced by 10% and the search repeats.
pub fn choose_alpha_beta(n: u32, c1: f64, catenoid: &[Point], angenent: &AngenentCurve) -> Result<BarrierChoice> {
    if n < 2 {
        return Err(Error::Precondition(format!("dimension n must be at least 2, got {n}")));
    }
    if !(c1 > 0.0 && c1 < FRAC_PI_2) {
        return Err(Error::Precondition(format!("C1 must lie in (0, π/2), got {c1}")));
    }
    let y0 = 0.5 / n as f64;
    let mut notes = Vec::new();
    let mut trials = Vec::new();
    let mut alpha = c1 / 8.0;
    let mut found = None;
    'alpha: for _ in 0..60 {
        trials.push(alpha);
        let rho = family_polyline(alpha, alpha, n, 2048);
        let x_lo = 2.0 * alpha;
        let top = match dilate_to_box(angenent, (x_lo, FRAC_PI_4, y0)) {
            Ok(a) => a,
            Err(Error::Geometry(_)) => {
                alpha *= 0.9;
                continue;
            }
            Err(e) => return Err(e),
        };
        let mut a = top;
        while a.bbox.0 >= 1.05 * x_lo {
            if on_top_of(&rho, a.half_curve.nodes(), CHOICE_MARGIN) && alpha < a.bbox.0 {
                found = Some(a);
                break 'alpha;
            }
            a = a.dilated(0.97);
        }
        alpha *= 0.9;
    }
    let Some(angenent) = found else {
        return Err(Error::Geometry(format!(
            "no α ≤ C1/8 admits an Angenent barrier below the family curve (tried down to {alpha})"
        )));
    };
    if trials.len() > 1 {
        notes.push(format!("α reduced from C1/8 = {} to {} ({} trials)", trials[0], alpha, trials.len()));
    }
    let mut beta = c1;
    loop {
        beta += BETA_STEP;
        if beta >= FRAC_PI_2 {
            return Err(Error::Geometry(format!(
                "no β < π/2 puts the catenoid segment on top of the corner path at height {y0}"
            )));
        }
        if on_top_of(catenoid, &corner_path(beta, y0), CHOICE_MARGIN) {
            break;
        }
    }
    Ok(BarrierChoice { alpha, beta, angenent, alpha_trials: trials, notes })
}
