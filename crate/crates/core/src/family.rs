//! The family of initial curves `ρ_δ` (quarter ellipses through `(δ, 0)`
//! and `(π/2, H(δ))`), classification of their flows, bisection for the
//! critical parameter `η` and diagnostics of the near-critical flow.

use alloc::format;
use alloc::string::String;
use alloc::vec::Vec;

use crate::angenent::{find_angenent, AngenentCurve};
use crate::barriers::{
    choose_alpha_beta, on_top_of, BarrierChoice, BarrierKind, BarrierSpec, ComparisonMonitor, ComparisonReport, Side,
};
use crate::catenoid::{find_c1, sample_catenoid, C1Search};
use crate::conformal::Point;
use crate::error::{Error, Result};
use crate::flow::{run_observed, FlowParams, FlowTrace, Outcome, SectionCurve};
use crate::interp::linspace;
use crate::math::{atan, cos, floor, ln, sin, tan, FRAC_PI_2, FRAC_PI_4, PI};

/// Points on the dense polyline a family curve is split from.
pub const FAMILY_POLYLINE_POINTS: usize = 8192;

/// `H(δ) = (1/(2n)) (π/2 − δ) / (π/2 − α)`.
pub fn family_height(delta: f64, alpha: f64, n: u32) -> f64 {
    0.5 / n as f64 * (FRAC_PI_2 - delta) / (FRAC_PI_2 - alpha)
}

/// `(δ + (π/2 − δ)(1 − cos θ), H(δ) sin θ)` for `k` values of `θ` in
/// `[0, π/2]`, with exact end points.
pub fn family_polyline(delta: f64, alpha: f64, n: u32, k: usize) -> Vec<Point> {
    let a = FRAC_PI_2 - delta;
    let h = family_height(delta, alpha, n);
    linspace(0.0, FRAC_PI_2, k)
        .into_iter()
        .enumerate()
        .map(|(i, th)| {
            if i == 0 {
                (delta, 0.0)
            } else if i == k - 1 {
                (FRAC_PI_2, h)
            } else {
                (delta + a * (1.0 - cos(th)), h * sin(th))
            }
        })
        .collect()
}

/// The barriers used while classifying.
#[derive(Debug, Clone)]
pub struct Barriers {
    pub c1: f64,
    /// Catenoid segment from `(C₁, 0)` to `(π/2, 1/n)`.
    pub catenoid: Vec<Point>,
    /// Dilated Angenent curve below `ρ_α`.
    pub angenent: AngenentCurve,
}

#[derive(Debug, Clone)]
pub struct FamilyParams {
    pub n: u32,
    pub alpha: f64,
    pub beta: f64,
    /// `H(α)`, equal to `1/(2n)`.
    pub height_at_alpha: f64,
    /// Horizon of each classification run.
    pub horizon: f64,
    pub flow: FlowParams,
    /// Time between barrier checks during classification.
    pub barrier_interval: f64,
    pub barriers: Option<Barriers>,
}

impl FamilyParams {
    pub fn new(n: u32, alpha: f64, beta: f64, horizon: f64, flow: FlowParams) -> Result<Self> {
        if !(alpha > 0.0 && alpha < beta && beta < FRAC_PI_2) {
            return Err(Error::Precondition(format!("need 0 < α < β < π/2, got α = {alpha}, β = {beta}")));
        }
        if flow.n != n {
            return Err(Error::Precondition(format!("flow dimension {} differs from family dimension {n}", flow.n)));
        }
        if !(horizon > 0.0) {
            return Err(Error::Precondition(format!("horizon must be positive, got {horizon}")));
        }
        Ok(Self {
            n,
            alpha,
            beta,
            height_at_alpha: family_height(alpha, alpha, n),
            horizon,
            flow,
            barrier_interval: 0.05,
            barriers: None,
        })
    }

    /// Attaches barriers after checking that `ρ_α` is on top of the
    /// Angenent curve.
    pub fn with_barriers(mut self, barriers: Barriers) -> Result<Self> {
        let rho = family_polyline(self.alpha, self.alpha, self.n, FAMILY_POLYLINE_POINTS);
        let a = barriers.angenent.half_curve.nodes();
        if !on_top_of(&rho, a, 0.0) || !(self.alpha < barriers.angenent.bbox.0) {
            return Err(Error::Geometry(format!(
                "the family curve at δ = α = {} is not on top of the Angenent barrier",
                self.alpha
            )));
        }
        self.barriers = Some(barriers);
        Ok(self)
    }

    fn grid_spacing(&self) -> f64 {
        FRAC_PI_2 / (self.flow.nodes - 1) as f64
    }
}

/// Resolution of the barrier constructions in [`setup`].
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SetupOptions {
    pub c1_tol: f64,
    pub catenoid_nodes: usize,
    pub closure_tol: f64,
    pub angenent_nodes: usize,
}

impl Default for SetupOptions {
    fn default() -> Self {
        Self { c1_tol: 1e-10, catenoid_nodes: 801, closure_tol: 1e-9, angenent_nodes: 401 }
    }
}

/// Everything `setup` computed on the way to the family parameters.
#[derive(Debug, Clone)]
pub struct Setup {
    pub params: FamilyParams,
    pub choice: BarrierChoice,
    pub lambda: f64,
    pub c1: C1Search,
}

/// Computes `C₁`, the catenoid segment, the Angenent curve for `lambda`
/// and the constants `α`, `β`, and returns family parameters with barriers.
pub fn setup(n: u32, lambda: f64, horizon: f64, flow: FlowParams, opts: &SetupOptions) -> Result<Setup> {
    let c1 = find_c1(n, opts.c1_tol)?;
    let catenoid = sample_catenoid(c1.c1, n, opts.catenoid_nodes)?.barrier_segment().into_nodes();
    let (angenent, _) = find_angenent(lambda, opts.closure_tol, opts.angenent_nodes)?;
    let choice = choose_alpha_beta(n, c1.c1, &catenoid, &angenent)?;
    let params = FamilyParams::new(n, choice.alpha, choice.beta, horizon, flow)?.with_barriers(Barriers {
        c1: c1.c1,
        catenoid,
        angenent: choice.angenent.clone(),
    })?;
    Ok(Setup { params, choice, lambda, c1 })
}

/// `ρ_δ` as a two-chart section curve.
pub fn build_family_curve(delta: f64, params: &FamilyParams) -> Result<SectionCurve> {
    if !(delta > 0.0 && delta < FRAC_PI_2 - 10.0 * params.grid_spacing()) {
        return Err(Error::Precondition(format!("δ = {delta} outside (0, π/2 − 10·{})", params.grid_spacing())));
    }
    let p = family_polyline(delta, params.alpha, params.n, FAMILY_POLYLINE_POINTS);
    SectionCurve::from_polyline(&p, params.flow.nodes)
}

#[derive(Debug, Clone)]
pub struct Classification {
    pub delta: f64,
    pub outcome: Outcome,
    pub trace: FlowTrace,
    /// Which barrier was monitored, if any.
    pub barrier: Option<&'static str>,
    pub barrier_report: Option<ComparisonReport>,
}

/// Runs the flow from `ρ_δ`, watching the Angenent barrier for `δ ≤ α` and
/// the catenoid barrier for `δ ≥ β`.
pub fn classify(delta: f64, params: &FamilyParams) -> Result<Classification> {
    let initial = build_family_curve(delta, params)?;
    let spec = params.barriers.as_ref().and_then(|b| {
        if delta <= params.alpha {
            Some(("angenent", BarrierSpec { kind: BarrierKind::SelfSimilar(b.angenent.clone()), side: Side::Below }))
        } else if delta >= params.beta {
            Some(("catenoid", BarrierSpec { kind: BarrierKind::Static(b.catenoid.clone()), side: Side::Above }))
        } else {
            None
        }
    });
    let mut monitor = match &spec {
        Some((_, s)) => {
            Some(ComparisonMonitor::new(s.clone(), &initial.polyline(), initial.head(), initial.min_spacing())?)
        }
        None => None,
    };
    let every = params.barrier_interval;
    let mut next = 0.0;
    let mut observe = |s: &crate::flow::FlowState| {
        if let Some(m) = monitor.as_mut() {
            if s.t >= next {
                m.observe(s.t, &s.curve.polyline(), s.head());
                next = (floor(s.t / every) + 1.0) * every;
            }
        }
    };
    let trace = run_observed(initial, params.horizon, &params.flow, &mut observe).map_err(|f| f.error)?;
    Ok(Classification {
        delta,
        outcome: trace.outcome,
        trace,
        barrier: spec.as_ref().map(|s| s.0),
        barrier_report: monitor.map(|m| m.report),
    })
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TranscriptEntry {
    pub delta: f64,
    pub outcome: Outcome,
}

#[derive(Debug, Clone)]
pub struct EtaResult {
    /// Largest `δ` seen to pinch.
    pub eta_lo: f64,
    /// Smallest `δ` seen not to pinch.
    pub eta_hi: f64,
    /// Every classification in the order it was made.
    pub transcript: Vec<TranscriptEntry>,
    /// The flow from `ρ_{eta_lo}`.
    pub near_critical_trace: FlowTrace,
    /// The flow from `ρ_{eta_hi}`.
    pub upper_trace: FlowTrace,
}

/// No `δ` that does not pinch may lie below one that does.
pub fn check_monotone(transcript: &[TranscriptEntry]) -> Result<()> {
    let max_pinched =
        transcript.iter().filter(|e| e.outcome.is_pinched()).map(|e| e.delta).fold(f64::NEG_INFINITY, f64::max);
    if let Some(bad) = transcript.iter().find(|e| !e.outcome.is_pinched() && e.delta < max_pinched) {
        let mut detail =
            format!("δ = {} is {} below the pinched δ = {max_pinched}; transcript:", bad.delta, bad.outcome.label());
        for e in transcript {
            detail.push_str(&format!(" ({}, {})", e.delta, e.outcome.label()));
        }
        return Err(Error::Monotonicity { detail });
    }
    Ok(())
}

/// Sequential bisection for `η` on `[α, β]`.
pub fn bisect_eta(params: &FamilyParams, bracket_tol: f64) -> Result<EtaResult> {
    bisect_eta_with(params, bracket_tol, &[], &|ds: &[f64]| ds.iter().map(|&d| classify(d, params)).collect())
}

/// Bisection for `η`: `α` must pinch and `β` must not. The `coarse` points
/// are classified first through `runner` (which may run them concurrently)
/// and narrow the starting bracket; the bisection itself is sequential.
///
/// Flows that collapse count as not pinching, like flows that survive.
pub fn bisect_eta_with(
    params: &FamilyParams,
    bracket_tol: f64,
    coarse: &[f64],
    runner: &dyn Fn(&[f64]) -> Vec<Result<Classification>>,
) -> Result<EtaResult> {
    if !(bracket_tol > 0.0) {
        return Err(Error::Precondition(format!("bracket tolerance must be positive, got {bracket_tol}")));
    }
    let mut transcript = Vec::new();
    let mut first: Vec<f64> = alloc::vec![params.alpha, params.beta];
    first.extend(coarse.iter().copied().filter(|&d| d > params.alpha && d < params.beta));
    let mut results = Vec::with_capacity(first.len());
    for (d, r) in first.iter().zip(runner(&first)) {
        let c = r?;
        transcript.push(TranscriptEntry { delta: *d, outcome: c.outcome });
        results.push(c);
    }
    if !results[0].outcome.is_pinched() {
        return Err(Error::Precondition(format!("the flow from δ = α = {} does not pinch", params.alpha)));
    }
    if results[1].outcome.is_pinched() {
        return Err(Error::Precondition(format!("the flow from δ = β = {} pinches", params.beta)));
    }
    check_monotone(&transcript)?;
    let mut lo: Option<Classification> = None;
    let mut hi: Option<Classification> = None;
    for c in results {
        if c.outcome.is_pinched() {
            if lo.as_ref().is_none_or(|l| c.delta > l.delta) {
                lo = Some(c);
            }
        } else if hi.as_ref().is_none_or(|h| c.delta < h.delta) {
            hi = Some(c);
        }
    }
    let (mut lo, mut hi) = (lo.expect("α pinches"), hi.expect("β does not pinch"));
    while hi.delta - lo.delta >= bracket_tol {
        let mid = 0.5 * (lo.delta + hi.delta);
        if mid <= lo.delta || mid >= hi.delta {
            break;
        }
        let c = runner(&[mid]).pop().expect("one result per point")?;
        transcript.push(TranscriptEntry { delta: mid, outcome: c.outcome });
        check_monotone(&transcript)?;
        if c.outcome.is_pinched() {
            lo = c;
        } else {
            hi = c;
        }
    }
    Ok(EtaResult {
        eta_lo: lo.delta,
        eta_hi: hi.delta,
        transcript,
        near_critical_trace: lo.trace,
        upper_trace: hi.trace,
    })
}

#[derive(Debug, Clone, PartialEq)]
pub struct Multiplicity2Report {
    pub survived: bool,
    pub end_time: f64,
    pub height_end: Option<f64>,
    /// Largest `v_x` over `[b, π/2]` at the end of the trace (last snapshot).
    pub sup_slope: f64,
    /// `f(x, t) < x / (4nα)` on `(head(t), 4α]` at every snapshot.
    pub linear_bound_holds: bool,
    /// Largest `f · 4nα / x` seen on those windows.
    pub linear_bound_worst_ratio: f64,
    pub head_series: Vec<(f64, f64)>,
    pub head_nonincreasing: bool,
}

/// Diagnostics of convergence to the doubled minimal sphere.
pub fn multiplicity2_diagnostics(trace: &FlowTrace, b: f64, alpha: f64, n: u32) -> Multiplicity2Report {
    let end = match trace.snapshots.last() {
        Some(s) if s.t == trace.final_state.t => s.polyline.clone(),
        _ => trace.final_state.curve.polyline(),
    };
    let sup_slope = end
        .windows(2)
        .filter(|w| w[1].0 > w[0].0 && 0.5 * (w[0].0 + w[1].0) >= b)
        .map(|w| (w[1].1 - w[0].1) / (w[1].0 - w[0].0))
        .fold(0.0, f64::max);
    let k = 4.0 * n as f64 * alpha;
    let mut worst: f64 = 0.0;
    for s in &trace.snapshots {
        let head = s.polyline.first().map_or(0.0, |p| p.0);
        for &(x, y) in &s.polyline {
            if x > head && x <= 4.0 * alpha {
                worst = worst.max(y * k / x);
            }
        }
    }
    let head_series: Vec<(f64, f64)> = trace.samples.iter().filter_map(|s| s.head.map(|h| (s.t, h))).collect();
    Multiplicity2Report {
        survived: matches!(trace.outcome, Outcome::Survived { .. }),
        end_time: trace.final_state.t,
        height_end: trace.final_state.height(),
        sup_slope,
        linear_bound_holds: worst < 1.0,
        linear_bound_worst_ratio: worst,
        head_nonincreasing: head_series.windows(2).all(|w| w[1].1 <= w[0].1),
        head_series,
    }
}

/// Constants built while checking the long-time gradient estimate.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct GradientConstants {
    /// `T = max(10, first time after which head < a/2)`.
    pub t: f64,
    /// Largest `δ′ < π/4` with `arctan f_x < ε₁` on `[π/2 − δ′, π/2]` at `T`.
    pub delta_prime: f64,
    /// `ω = π ln T / (2 sin δ′)`.
    pub omega: f64,
    /// First snapshot time `≥ T` at which the bound's argument is `< π/2`.
    pub t1: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub enum GradientEstimate {
    Pass(GradientConstants),
    Fail { constants: GradientConstants, t: f64, slope: f64, bound: f64 },
    Inapplicable(String),
}

impl GradientEstimate {
    pub fn passed(&self) -> bool {
        matches!(self, Self::Pass(_))
    }
}

/// `π ln tan(b/2) / (2 ln tan(a/2)) + ω cos b / ln t + ε₁`.
pub fn gradient_bound_argument(a: f64, b: f64, eps1: f64, omega: f64, t: f64) -> f64 {
    PI * ln(tan(0.5 * b)) / (2.0 * ln(tan(0.5 * a))) + omega * cos(b) / ln(t) + eps1
}

/// Checks `f_x ≤ tan(π ln tan(b/2) / (2 ln tan(a/2)) + ω cos b / ln t + ε₁)`
/// on `[b, π/2]` for snapshot times `t ≥ T₁`, building `T`, `δ′`, `ω` and
/// `T₁` from the trace.
pub fn gradient_estimate_check(trace: &FlowTrace, a: f64, b: f64, eps1: f64) -> GradientEstimate {
    if !(a > 0.0 && a < b && b < FRAC_PI_4) {
        return GradientEstimate::Inapplicable(format!("need 0 < a < b < π/4, got a = {a}, b = {b}"));
    }
    let cap = 1.0 - ln(tan(0.5 * b)) / ln(tan(0.5 * a));
    if !(eps1 > 0.0 && eps1 < cap) {
        return GradientEstimate::Inapplicable(format!("need 0 < ε₁ < {cap}, got {eps1}"));
    }
    let samples = &trace.samples;
    let last_high = samples.iter().rposition(|s| s.head.is_none_or(|h| h >= 0.5 * a));
    let start = match last_high {
        None => samples.first().map(|s| s.t),
        Some(i) => samples.get(i + 1).map(|s| s.t),
    };
    let Some(t_first) = start else {
        return GradientEstimate::Inapplicable(format!("head never stays below a/2 = {}", 0.5 * a));
    };
    let t = t_first.max(10.0);
    let Some(at_t) = trace.snapshots.iter().find(|s| s.t >= t) else {
        return GradientEstimate::Inapplicable(format!("trace ends at t = {} before T = {t}", trace.final_state.t));
    };
    let slopes = |poly: &[Point]| -> Vec<(f64, f64)> {
        poly.windows(2)
            .filter(|w| w[1].0 > w[0].0)
            .map(|w| (0.5 * (w[0].0 + w[1].0), (w[1].1 - w[0].1) / (w[1].0 - w[0].0)))
            .collect()
    };
    // δ′: walk left from π/2 while arctan f_x stays below ε₁.
    let mut delta_prime = 0.0;
    for &(x, s) in slopes(&at_t.polyline).iter().rev() {
        if atan(s) >= eps1 || FRAC_PI_2 - x >= FRAC_PI_4 {
            break;
        }
        delta_prime = FRAC_PI_2 - x;
    }
    if !(delta_prime > 0.0) {
        return GradientEstimate::Inapplicable(format!("no interval near π/2 with arctan f_x < ε₁ at T = {}", at_t.t));
    }
    let omega = PI * ln(at_t.t) / (2.0 * sin(delta_prime));
    let Some(t1) = trace
        .snapshots
        .iter()
        .map(|s| s.t)
        .find(|&s| s >= at_t.t && gradient_bound_argument(a, b, eps1, omega, s) < FRAC_PI_2)
    else {
        return GradientEstimate::Inapplicable("the bound does not become finite before the trace ends".into());
    };
    let constants = GradientConstants { t: at_t.t, delta_prime, omega, t1 };
    for s in trace.snapshots.iter().filter(|s| s.t >= t1) {
        let bound = tan(gradient_bound_argument(a, b, eps1, omega, s.t));
        for (x, slope) in slopes(&s.polyline) {
            if x >= b && slope > bound {
                return GradientEstimate::Fail { constants, t: s.t, slope, bound };
            }
        }
    }
    GradientEstimate::Pass(constants)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn rho_alpha_ends_at_the_stated_height() {
        let p = family_polyline(0.1, 0.1, 2, 64);
        assert_eq!(p[63], (FRAC_PI_2, 0.25));
        assert_eq!(p[0], (0.1, 0.0));
    }

    #[test]
    fn bound_argument_tends_to_its_limit() {
        let lim = PI * ln(tan(0.15)) / (2.0 * ln(tan(0.025))) + 0.1;
        let far = gradient_bound_argument(0.05, 0.3, 0.1, 3.0, 1e300);
        assert!((far - lim).abs() < 1e-2);
    }

    #[test]
    fn monotonicity_violation_is_reported() {
        let t = [
            TranscriptEntry { delta: 0.1, outcome: Outcome::Collapsed { t: 1.0 } },
            TranscriptEntry { delta: 0.2, outcome: Outcome::Pinched { t: 1.0 } },
        ];
        assert!(matches!(check_monotone(&t), Err(Error::Monotonicity { .. })));
        assert!(check_monotone(&t[..1]).is_ok());
    }
}
