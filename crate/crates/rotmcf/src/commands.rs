//! The experiments behind each subcommand. Every command writes into its
//! own subdirectory of the configured output directory and finishes with a
//! manifest.

use std::f64::consts::FRAC_PI_2;
use std::path::PathBuf;

use rotmcf_core::angenent::{find_angenent, self_similarity_check, ShootingOutcome};
use rotmcf_core::barriers::away_from_boundary_check;
use rotmcf_core::catenoid::{find_c1, half_period, sample_catenoid};
use rotmcf_core::family::{
    bisect_eta_with, build_family_curve, classify, gradient_estimate_check, multiplicity2_diagnostics, setup,
    Classification, EtaResult, GradientEstimate, Multiplicity2Report, Setup, SetupOptions,
};
use rotmcf_core::flow::{run, Chart, FlowTrace, Outcome, SectionCurve};
use serde_json::{json, Value};

use crate::config::ExperimentConfig;
use crate::error::CliError;
use crate::output::{jnum, num, opt, Outputs};
use crate::plots;
use crate::scan::par_map;

/// Constants of the long-time gradient check: `(a, b, ε₁)`.
pub const GRADIENT_CONSTANTS: (f64, f64, f64) = (0.05, 0.3, 0.1);
/// Left end of the interval on which the terminal slope is measured.
pub const SLOPE_WINDOW_START: f64 = 0.3;

fn subdir(cfg: &ExperimentConfig, name: &str) -> PathBuf {
    cfg.output_dir.join(name)
}

fn outcome_json(o: &Outcome) -> Value {
    json!({ "kind": o.label(), "time": jnum(o.time()) })
}

pub fn setup_options(cfg: &ExperimentConfig) -> SetupOptions {
    SetupOptions {
        c1_tol: cfg.c1_tol,
        catenoid_nodes: cfg.catenoid_nodes,
        closure_tol: cfg.closure_tol,
        angenent_nodes: cfg.angenent_nodes,
    }
}

/// Family constants and barriers for `cfg`, with flows run to `t_max`.
pub fn family_setup(cfg: &ExperimentConfig) -> Result<Setup, CliError> {
    let mut s = setup(cfg.n, cfg.lambda(), cfg.t_max, cfg.flow_params(), &setup_options(cfg))?;
    s.params.barrier_interval = cfg.barrier_interval;
    Ok(s)
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ScanSpec {
    pub from: f64,
    pub to: f64,
    pub count: usize,
}

impl std::str::FromStr for ScanSpec {
    type Err = String;

    /// `from:to:count`
    fn from_str(s: &str) -> Result<Self, String> {
        let parts: Vec<&str> = s.split(':').collect();
        let [a, b, k] = parts[..] else {
            return Err(format!("expected from:to:count, got {s:?}"));
        };
        let f = |t: &str| t.trim().parse::<f64>().map_err(|e| format!("{t:?}: {e}"));
        let count = k.trim().parse::<usize>().map_err(|e| format!("{k:?}: {e}"))?;
        let spec = ScanSpec { from: f(a)?, to: f(b)?, count };
        if !(spec.from > 0.0 && spec.from < spec.to && spec.to < FRAC_PI_2 && count >= 2) {
            return Err(format!("need 0 < from < to < π/2 and count ≥ 2, got {s:?}"));
        }
        Ok(spec)
    }
}

/// `Y_C` over a range of `C` and/or the root `C₁` of `Y_C = 2/n`, with the
/// barrier segment of the catenoid through `C₁`.
pub fn cmd_catenoid(cfg: &ExperimentConfig, find: bool, scan: Option<ScanSpec>) -> Result<Value, CliError> {
    let mut out = Outputs::create(&subdir(cfg, "catenoid"))?;
    let n = cfg.n;
    let mut summary = json!({ "n": n });
    if let Some(s) = scan {
        let mut rows = Vec::with_capacity(s.count);
        let mut prev: Option<f64> = None;
        for k in 0..s.count {
            let c = s.from + (s.to - s.from) * k as f64 / (s.count - 1) as f64;
            let y = half_period(c, n, cfg.c1_tol)?;
            let flag = prev.map(|p| if y < p { "1" } else { "0" }).unwrap_or("");
            rows.push(vec![num(c), num(y), flag.to_string()]);
            prev = Some(y);
        }
        summary["scan_rows"] = json!(rows.len());
        out.csv("catenoid_scan.csv", &["c", "y_c", "decreasing"], rows)?;
        out.stage("scan");
    }
    if find || scan.is_none() {
        let r = find_c1(n, cfg.c1_tol)?;
        out.csv("c1_search.csv", &["c", "y_c"], r.scan.iter().map(|&(c, y)| vec![num(c), num(y)]))?;
        let profile = sample_catenoid(r.c1, n, cfg.catenoid_nodes)?;
        out.csv("catenoid_profile.csv", &["x", "y"], profile.samples.iter().map(|&(x, y)| vec![num(x), num(y)]))?;
        out.csv(
            "catenoid_barrier.csv",
            &["x", "y"],
            profile.barrier_segment().nodes().iter().map(|&(x, y)| vec![num(x), num(y)]),
        )?;
        let c1 = json!({
            "C1": r.c1,
            "Y_C1": r.y_c1,
            "target": 2.0 / n as f64,
            "residual": r.y_c1 - 2.0 / n as f64,
            "bracket": [r.bracket.0, r.bracket.1],
            "multiple_roots": r.multiple_roots,
            "n": n,
        });
        out.json("c1.json", &c1)?;
        summary["C1"] = json!(r.c1);
        summary["Y_C1"] = json!(r.y_c1);
        if scan.is_none() {
            // Plot the search table in place of a scan.
            out.csv(
                "catenoid_scan.csv",
                &["c", "y_c", "decreasing"],
                r.scan.iter().map(|&(c, y)| vec![num(c), num(y), String::new()]),
            )?;
        }
        out.stage("c1");
    }
    out.text("catenoid.gp", &plots::catenoid(n))?;
    out.finish("catenoid", cfg, summary.clone())?;
    Ok(summary)
}

/// The closed λ-geodesic: curve (axis horizontal), shooting transcript and
/// checks.
pub fn cmd_angenent(cfg: &ExperimentConfig, lambda: Option<f64>) -> Result<Value, CliError> {
    let lambda = lambda.unwrap_or_else(|| cfg.lambda());
    let mut out = Outputs::create(&subdir(cfg, "angenent"))?;
    let (curve, scan) = find_angenent(lambda, cfg.closure_tol, cfg.angenent_nodes)?;
    out.stage("shooting");
    let label = |o: ShootingOutcome| match o {
        ShootingOutcome::Returned => "returned",
        ShootingOutcome::Escaped => "escaped",
        ShootingOutcome::HitAxis => "hit_axis",
    };
    out.csv(
        "shooting.csv",
        &["r0", "outcome", "closure_defect"],
        scan.iter().map(|r| vec![num(r.r0), label(r.outcome).into(), num(r.closure_defect)]),
    )?;
    out.csv(
        "angenent_curve.csv",
        &["axial", "radial"],
        curve.upper_half_plane().nodes().iter().map(|&(a, r)| vec![num(a), num(r)]),
    )?;
    let residual = curve.max_curvature_residual()?;
    let ss = self_similarity_check(&curve, 0.1)?;
    out.stage("checks");
    let summary = json!({
        "lambda": lambda,
        "r_star": curve.r_star,
        "s_return": curve.s_return,
        "closure_defect": curve.closure_defect,
        "closure_tol": cfg.closure_tol,
        "embedded": curve.is_embedded(),
        "max_curvature_residual": residual,
        "bracket": [curve.bracket.0, curve.bracket.1],
        "bisection_steps": curve.bisection_steps,
        "collapse_time": curve.collapse_time(),
        "radial_range": [curve.bbox.0, curve.bbox.1],
        "axial_half_width": curve.bbox.3,
        "self_similarity": {
            "dt": ss.dt,
            "hausdorff": ss.hausdorff,
            "grid_spacing": ss.grid_spacing,
            "passes": ss.passes(),
        },
    });
    out.json("angenent.json", &summary)?;
    out.text("angenent.gp", &plots::angenent(lambda))?;
    out.finish("angenent", cfg, summary.clone())?;
    Ok(summary)
}

/// Initial data for `flow`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum InitialSpec {
    /// `ρ_δ` of the interpolation family, with its barrier monitors.
    Family(f64),
    /// Quarter ellipse through `(δ, 0)` and `(π/2, H)`.
    Ellipse(f64, f64),
    /// `u ≡ u₀` on `0 ≤ y ≤ 1`.
    Constant(f64),
    /// `v ≡ c` on `0 ≤ x ≤ π/2`.
    Slice(f64),
}

impl std::str::FromStr for InitialSpec {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, String> {
        let parts: Vec<&str> = s.split(':').collect();
        let f = |t: &str| t.trim().parse::<f64>().map_err(|e| format!("{t:?}: {e}"));
        match parts[..] {
            ["family", d] => Ok(Self::Family(f(d)?)),
            ["ellipse", d, h] => Ok(Self::Ellipse(f(d)?, f(h)?)),
            ["constant", u] => Ok(Self::Constant(f(u)?)),
            ["slice", c] => Ok(Self::Slice(f(c)?)),
            ["sphere"] => Ok(Self::Slice(0.0)),
            _ => Err(format!("unknown initial curve {s:?}; use family:δ, ellipse:δ:H, constant:u0, slice:c or sphere")),
        }
    }
}

/// `(δ + (π/2 − δ)(1 − cos θ), H sin θ)` at `k` angles.
pub fn ellipse(delta: f64, height: f64, k: usize) -> Vec<(f64, f64)> {
    (0..k)
        .map(|i| {
            let th = FRAC_PI_2 * i as f64 / (k - 1) as f64;
            if i == 0 {
                (delta, 0.0)
            } else if i == k - 1 {
                (FRAC_PI_2, height)
            } else {
                (delta + (FRAC_PI_2 - delta) * (1.0 - th.cos()), height * th.sin())
            }
        })
        .collect()
}

pub fn trace_rows(tr: &FlowTrace) -> Vec<Vec<String>> {
    tr.samples
        .iter()
        .map(|s| vec![num(s.t), opt(s.head), opt(s.height), opt(s.max_slope_vertical), opt(s.max_slope_horizontal)])
        .collect()
}

pub const TRACE_HEADER: [&str; 5] = ["t", "head", "height", "max_slope_vertical", "max_slope_horizontal"];
pub const SNAPSHOT_HEADER: [&str; 4] = ["snapshot", "t", "x", "y"];

pub fn snapshot_rows(tr: &FlowTrace) -> Vec<Vec<String>> {
    let mut rows = Vec::new();
    for (i, s) in tr.snapshots.iter().enumerate() {
        for &(x, y) in &s.polyline {
            rows.push(vec![i.to_string(), num(s.t), num(x), num(y)]);
        }
    }
    rows
}

fn write_trace(out: &mut Outputs, prefix: &str, tr: &FlowTrace) -> Result<(), CliError> {
    out.csv(&format!("{prefix}_trace.csv"), &TRACE_HEADER, trace_rows(tr))?;
    out.csv(&format!("{prefix}_snapshots.csv"), &SNAPSHOT_HEADER, snapshot_rows(tr))
}

fn trace_json(tr: &FlowTrace) -> Value {
    json!({
        "outcome": outcome_json(&tr.outcome),
        "steps": tr.steps,
        "resplits": tr.resplits,
        "ascending_violations": tr.ascending_violations.len(),
        "max_stitch_error": tr.max_stitch_error,
        "max_height_increase": tr.max_height_increase(),
        "final_head": tr.final_state.head().map(jnum),
        "final_height": tr.final_state.height().map(jnum),
        "min_head": tr.samples.iter().filter_map(|s| s.head).reduce(f64::min).map(jnum),
    })
}

/// Evolves one initial curve to `horizon` (default `t_max`).
pub fn cmd_flow(cfg: &ExperimentConfig, initial: InitialSpec, horizon: Option<f64>) -> Result<Value, CliError> {
    let horizon = horizon.unwrap_or(cfg.t_max);
    let mut out = Outputs::create(&subdir(cfg, "flow"))?;
    let params = cfg.flow_params();
    let m = cfg.flow_nodes;
    let mut extra = json!({});
    let result = match initial {
        InitialSpec::Family(delta) => {
            let mut s = family_setup(cfg)?;
            s.params.horizon = horizon;
            out.stage("setup");
            let c = classify(delta, &s.params)?;
            extra["alpha"] = json!(s.params.alpha);
            extra["beta"] = json!(s.params.beta);
            extra["barrier"] = json!(c.barrier);
            extra["barrier_clean"] = json!(c.barrier_report.as_ref().map(|r| r.clean()));
            Ok(c.trace)
        }
        InitialSpec::Ellipse(d, h) => {
            let c = SectionCurve::from_polyline(&ellipse(d, h, 8192), m)?;
            run(c, horizon, &params)
        }
        InitialSpec::Constant(u0) => {
            let c = SectionCurve::vertical(Chart::sample(0.0, 1.0, m, |_| u0)?)?;
            run(c, horizon, &params)
        }
        InitialSpec::Slice(c0) => {
            let c = SectionCurve::horizontal(Chart::sample(0.0, FRAC_PI_2, m, |_| c0)?)?;
            run(c, horizon, &params)
        }
    };
    out.stage("flow");
    let tr = match result {
        Ok(tr) => tr,
        Err(f) => {
            write_trace(&mut out, "flow", &f.partial)?;
            out.finish("flow", cfg, json!({ "error": f.error.to_string() }))?;
            return Err(f.error.into());
        }
    };
    if let InitialSpec::Constant(u0) = initial {
        // cos u = cos u₀ e^{(n−1)t}, up to half the exact pinch time.
        let k = (cfg.n - 1) as f64;
        let t_star = -u0.cos().ln() / k;
        let err = tr
            .samples
            .iter()
            .filter(|s| s.t <= 0.5 * t_star)
            .filter_map(|s| s.head.map(|h| (h - (u0.cos() * (k * s.t).exp()).acos()).abs()))
            .fold(0.0, f64::max);
        extra["homogeneous_oracle_error"] = json!(err);
        extra["exact_pinch_time"] = jnum(t_star);
    }
    write_trace(&mut out, "flow", &tr)?;
    let mut summary = trace_json(&tr);
    summary["initial"] = json!(format!("{initial:?}"));
    summary["horizon"] = json!(horizon);
    summary["details"] = extra;
    out.json("flow.json", &summary)?;
    out.text("flow.gp", &plots::flow("flow"))?;
    out.finish("flow", cfg, summary.clone())?;
    Ok(summary)
}

/// Interior points of `(α, β)` classified concurrently before bisecting.
pub fn coarse_points(alpha: f64, beta: f64, k: usize) -> Vec<f64> {
    (1..=k).map(|i| alpha + (beta - alpha) * i as f64 / (k + 1) as f64).collect()
}

/// Bisection result with the checks run on the near-critical flow.
#[derive(Debug, Clone)]
pub struct BisectReport {
    pub setup: Setup,
    pub eta: EtaResult,
    pub multiplicity2: Multiplicity2Report,
    pub gradient: GradientEstimate,
    pub away_from_boundary: bool,
    /// Pinch time of the near-critical run exceeds every other pinch time.
    pub pinch_times_increase: bool,
}

pub fn bisect(cfg: &ExperimentConfig, s: Setup) -> Result<BisectReport, CliError> {
    let p = &s.params;
    let coarse = coarse_points(p.alpha, p.beta, cfg.coarse_points);
    let runner =
        |ds: &[f64]| -> Vec<rotmcf_core::Result<Classification>> { par_map(ds, cfg.workers, |&d| classify(d, p)) };
    let eta = bisect_eta_with(p, cfg.bracket_tol, &coarse, &runner)?;
    let multiplicity2 = multiplicity2_diagnostics(&eta.near_critical_trace, SLOPE_WINDOW_START, p.alpha, p.n);
    let (a, b, e) = GRADIENT_CONSTANTS;
    let gradient = gradient_estimate_check(&eta.near_critical_trace, a, b, e);
    let away_from_boundary = away_from_boundary_check(&eta.near_critical_trace, p.beta, 0.0);
    let t_lo = eta.near_critical_trace.outcome.time();
    let pinch_times_increase = eta
        .transcript
        .iter()
        .filter(|e| e.outcome.is_pinched() && e.delta != eta.eta_lo)
        .all(|e| e.outcome.time() < t_lo);
    Ok(BisectReport { setup: s, eta, multiplicity2, gradient, away_from_boundary, pinch_times_increase })
}

fn gradient_json(g: &GradientEstimate) -> Value {
    let consts = |c: &rotmcf_core::family::GradientConstants| json!({ "T": c.t, "delta_prime": c.delta_prime, "omega": c.omega, "T1": c.t1 });
    match g {
        GradientEstimate::Pass(c) => json!({ "result": "pass", "constants": consts(c) }),
        GradientEstimate::Fail { constants, t, slope, bound } => {
            json!({ "result": "fail", "constants": consts(constants), "t": t, "slope": slope, "bound": jnum(*bound) })
        }
        GradientEstimate::Inapplicable(why) => json!({ "result": "inapplicable", "reason": why }),
    }
}

/// Bisection for the critical parameter and diagnostics of the
/// near-critical flow.
pub fn cmd_bisect(cfg: &ExperimentConfig) -> Result<Value, CliError> {
    let mut out = Outputs::create(&subdir(cfg, "bisect"))?;
    let s = family_setup(cfg)?;
    out.stage("setup");
    let r = bisect(cfg, s)?;
    out.stage("bisection");
    let p = &r.setup.params;
    let a = &p.barriers.as_ref().expect("setup attaches barriers").angenent;
    let eta = &r.eta;
    out.csv(
        "transcript.csv",
        &["index", "delta", "time", "pinched", "outcome"],
        eta.transcript.iter().enumerate().map(|(i, e)| {
            vec![
                i.to_string(),
                num(e.delta),
                num(e.outcome.time()),
                (e.outcome.is_pinched() as u8).to_string(),
                e.outcome.label().into(),
            ]
        }),
    )?;
    write_trace(&mut out, "near_critical", &eta.near_critical_trace)?;
    write_trace(&mut out, "upper", &eta.upper_trace)?;
    let eta_json = json!({
        "n": p.n,
        "lambda": r.setup.lambda,
        "alpha": p.alpha,
        "beta": p.beta,
        "C1": r.setup.c1.c1,
        "dilation": a.dilation,
        "T0": a.collapse_time(),
        "angenent_box": [a.bbox.0, a.bbox.1, a.bbox.2, a.bbox.3],
        "alpha_trials": r.setup.choice.alpha_trials,
        "notes": r.setup.choice.notes,
        "eta_lo": eta.eta_lo,
        "eta_hi": eta.eta_hi,
        "bracket_width": eta.eta_hi - eta.eta_lo,
        "bracket_tol": cfg.bracket_tol,
        "transcript": eta.transcript.iter().map(|e| json!({
            "delta": e.delta,
            "outcome": outcome_json(&e.outcome),
        })).collect::<Vec<_>>(),
        "near_critical": trace_json(&eta.near_critical_trace),
        "upper": trace_json(&eta.upper_trace),
    });
    out.json("eta.json", &eta_json)?;
    let m = &r.multiplicity2;
    let upper_height = eta.upper_trace.final_state.height();
    let diagnostics = json!({
        "multiplicity2": {
            "survived": m.survived,
            "end_time": m.end_time,
            "height_end": m.height_end.map(jnum),
            "sup_slope": m.sup_slope,
            "slope_window_start": SLOPE_WINDOW_START,
            "linear_bound_holds": m.linear_bound_holds,
            "linear_bound_worst_ratio": m.linear_bound_worst_ratio,
            "head_nonincreasing": m.head_nonincreasing,
        },
        "terminal_height_below_upper_run": match (m.height_end, upper_height) {
            (Some(a), Some(b)) => json!(a < b),
            _ => Value::Null,
        },
        "gradient_estimate": gradient_json(&r.gradient),
        "gradient_constants": { "a": GRADIENT_CONSTANTS.0, "b": GRADIENT_CONSTANTS.1, "eps1": GRADIENT_CONSTANTS.2 },
        "away_from_boundary": r.away_from_boundary,
        "pinch_times_increase": r.pinch_times_increase,
    });
    out.json("diagnostics.json", &diagnostics)?;
    out.text("bisect.gp", &plots::bisect())?;
    let summary = json!({
        "eta_lo": eta.eta_lo,
        "eta_hi": eta.eta_hi,
        "classifications": eta.transcript.len(),
        "near_critical_outcome": outcome_json(&eta.near_critical_trace.outcome),
    });
    out.finish("bisect", cfg, summary.clone())?;
    Ok(summary)
}

/// Runs the acceptance criteria `ids`, printing one line per criterion as it
/// finishes. Fails with the number of failed criteria.
pub fn cmd_verify(cfg: &ExperimentConfig, ids: &[usize]) -> Result<Value, CliError> {
    let mut out = Outputs::create(&subdir(cfg, "verify"))?;
    let work = out.path("determinism");
    let mut results = Vec::new();
    for &id in ids {
        let r = crate::acceptance::run_criterion(id, cfg, &work);
        println!("{}", r.line());
        out.stage(&format!("criterion {id}"));
        results.push(r);
    }
    out.csv(
        "verify.csv",
        &["criterion", "name", "passed", "detail"],
        results.iter().map(|r| vec![r.id.to_string(), r.name().into(), r.passed.to_string(), r.detail.clone()]),
    )?;
    let failed = results.iter().filter(|r| !r.passed).count();
    let summary = json!({
        "criteria": results.iter().map(|r| json!({
            "criterion": r.id,
            "name": r.name(),
            "passed": r.passed,
            "detail": r.detail,
        })).collect::<Vec<_>>(),
        "failed": failed,
        "passed": results.len() - failed,
    });
    out.json("verify.json", &summary)?;
    out.finish("verify", cfg, summary.clone())?;
    if failed > 0 {
        return Err(CliError::Verify(failed));
    }
    Ok(summary)
}

/// `ρ_δ` for the configured family; used by tests and the acceptance run.
pub fn family_curve(cfg: &ExperimentConfig, s: &Setup, delta: f64) -> Result<SectionCurve, CliError> {
    let _ = cfg;
    Ok(build_family_curve(delta, &s.params)?)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn scan_specs() {
        let s: ScanSpec = "0.1:1.4:50".parse().unwrap();
        assert_eq!((s.from, s.to, s.count), (0.1, 1.4, 50));
        assert!("0.1:1.4".parse::<ScanSpec>().is_err());
        assert!("1.4:0.1:5".parse::<ScanSpec>().is_err());
        assert!("0.1:2:5".parse::<ScanSpec>().is_err());
    }

    #[test]
    fn initial_specs() {
        assert_eq!("family:0.2".parse(), Ok(InitialSpec::Family(0.2)));
        assert_eq!("ellipse:0.2:0.1".parse(), Ok(InitialSpec::Ellipse(0.2, 0.1)));
        assert_eq!("sphere".parse(), Ok(InitialSpec::Slice(0.0)));
        assert!("circle:1".parse::<InitialSpec>().is_err());
    }

    #[test]
    fn coarse_points_are_interior_and_even() {
        let c = coarse_points(0.1, 0.5, 3);
        assert_eq!(c.len(), 3);
        assert!((c[0] - 0.2).abs() < 1e-15 && (c[2] - 0.4).abs() < 1e-15);
    }
}
