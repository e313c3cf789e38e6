use std::f64::consts::FRAC_PI_2;

use proptest::prelude::*;
use rotmcf_core::barriers::column_gap;
use rotmcf_core::family::*;
use rotmcf_core::flow::*;
use rotmcf_core::Error;

fn light(n: u32) -> FlowParams {
    FlowParams { n, nodes: 64, ..Default::default() }
}

fn bare_params(alpha: f64, beta: f64) -> FamilyParams {
    FamilyParams::new(2, alpha, beta, 1.0, light(2)).unwrap()
}

/// A trace with the given head and polyline at integer times `0..=t_end`.
fn synthetic_trace(t_end: usize, head: impl Fn(f64) -> f64, poly: impl Fn(f64) -> Vec<(f64, f64)>) -> FlowTrace {
    let curve = SectionCurve::horizontal(Chart::sample(0.0, FRAC_PI_2, 16, |_| 0.0).unwrap()).unwrap();
    let times: Vec<f64> = (0..=t_end).map(|t| t as f64).collect();
    FlowTrace {
        samples: times
            .iter()
            .map(|&t| TraceSample {
                t,
                head: Some(head(t)),
                height: poly(t).last().map(|p| p.1),
                max_slope_vertical: None,
                max_slope_horizontal: None,
            })
            .collect(),
        snapshots: times.iter().map(|&t| Snapshot { t, polyline: poly(t) }).collect(),
        outcome: Outcome::Survived { horizon: t_end as f64 },
        final_state: FlowState { t: t_end as f64, curve },
        steps: 0,
        resplits: 0,
        ascending_violations: vec![],
        max_stitch_error: 0.0,
        min_spacing: 0.01,
    }
}

/// A line from `(head, 0)` to `(π/2, slope (π/2 − head))`.
fn ramp(head: f64, slope: f64) -> Vec<(f64, f64)> {
    (0..=50)
        .map(|i| {
            let x = head + (FRAC_PI_2 - head) * i as f64 / 50.0;
            (x, slope * (x - head))
        })
        .collect()
}

#[test]
fn rho_alpha_ends_at_half_over_n() {
    for n in [2u32, 3, 5] {
        let p = family_polyline(0.07, 0.07, n, 200);
        assert_eq!(*p.last().unwrap(), (FRAC_PI_2, 0.5 / n as f64));
        assert_eq!(p[0], (0.07, 0.0));
    }
    let params = bare_params(0.05, 0.5);
    assert_eq!(params.height_at_alpha, 0.25);
    let c = build_family_curve(0.05, &params).unwrap();
    assert_eq!(c.head(), Some(0.05));
    assert_eq!(c.height(), Some(0.25));
}

#[test]
fn family_params_reject_bad_constants() {
    assert!(FamilyParams::new(2, 0.5, 0.4, 1.0, light(2)).is_err());
    assert!(FamilyParams::new(2, 0.1, FRAC_PI_2, 1.0, light(2)).is_err());
    assert!(FamilyParams::new(3, 0.1, 0.4, 1.0, light(2)).is_err());
    let p = bare_params(0.05, 0.5);
    assert!(matches!(build_family_curve(0.0, &p), Err(Error::Precondition(_))));
    assert!(matches!(build_family_curve(FRAC_PI_2 - 0.1, &p), Err(Error::Precondition(_))));
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(20))]

    #[test]
    fn family_curves_are_strictly_nested(d1 in 0.01..1.2f64, step in 1e-3..0.3f64) {
        let alpha = 0.01;
        let d2 = d1 + step;
        let (a, b) = (family_polyline(d1, alpha, 2, 1024), family_polyline(d2, alpha, 2, 1024));
        let (g, _) = column_gap(&a, &b).unwrap();
        prop_assert!(g > 0.0, "gap {g} for δ = {d1}, {d2}");
        prop_assert!(family_height(d2, alpha, 2) < family_height(d1, alpha, 2));
    }
}

#[test]
fn barriers_are_checked_when_attached() {
    let s = setup(2, 0.5, 1.0, FlowParams { n: 2, ..Default::default() }, &SetupOptions::default()).unwrap();
    let b = s.params.barriers.clone().unwrap();
    assert!(s.params.alpha < b.angenent.bbox.0);
    // A family whose ρ_α starts right of the Angenent curve cannot sit on top of it.
    let bad = FamilyParams::new(2, 0.3, s.params.beta, 1.0, light(2)).unwrap().with_barriers(b);
    assert!(matches!(bad, Err(Error::Geometry(_))));
}

#[test]
fn half_alpha_pinches_with_the_angenent_barrier_clean() {
    let s = setup(2, 0.5, 1.0, FlowParams { n: 2, ..Default::default() }, &SetupOptions::default()).unwrap();
    let c = classify(0.5 * s.params.alpha, &s.params).unwrap();
    let t0 = s.params.barriers.as_ref().unwrap().angenent.collapse_time();
    assert!(matches!(c.outcome, Outcome::Pinched { t } if t < t0), "{:?}", c.outcome);
    assert_eq!(c.barrier, Some("angenent"));
    assert!(c.barrier_report.unwrap().clean());
}

fn fake(delta: f64, outcome: Outcome) -> Classification {
    Classification {
        delta,
        outcome,
        trace: synthetic_trace(0, |_| delta, |_| ramp(delta, 0.1)),
        barrier: None,
        barrier_report: None,
    }
}

fn threshold_runner(eta: f64) -> impl Fn(&[f64]) -> Vec<rotmcf_core::Result<Classification>> {
    move |ds: &[f64]| {
        ds.iter()
            .map(|&d| {
                Ok(if d < eta {
                    fake(d, Outcome::Pinched { t: 1.0 / (eta - d) })
                } else {
                    fake(d, Outcome::Collapsed { t: 1.0 })
                })
            })
            .collect()
    }
}

#[test]
fn bisection_brackets_a_sharp_threshold() {
    let p = bare_params(0.02, 0.6);
    let runner = threshold_runner(0.123);
    let r = bisect_eta_with(&p, 1e-4, &[0.1, 0.2, 0.3], &runner).unwrap();
    assert!(r.eta_lo < 0.123 && 0.123 <= r.eta_hi);
    assert!(r.eta_hi - r.eta_lo < 1e-4);
    assert!(p.alpha < r.eta_lo && r.eta_hi <= p.beta);
    assert_eq!(r.transcript[0].delta, p.alpha);
    assert_eq!(r.transcript[1].delta, p.beta);
    // Pinch times grow toward the threshold, so the last bracket end is the latest.
    let last = r.transcript.iter().filter(|e| e.outcome.is_pinched()).map(|e| e.outcome.time()).fold(0.0, f64::max);
    let lo = r.transcript.iter().find(|e| e.delta == r.eta_lo).unwrap();
    assert_eq!(lo.outcome.time(), last);
    check_monotone(&r.transcript).unwrap();
}

#[test]
fn bisection_is_independent_of_the_coarse_scan() {
    let p = bare_params(0.02, 0.6);
    let runner = threshold_runner(0.31);
    let a = bisect_eta_with(&p, 1e-3, &[], &runner).unwrap();
    let b = bisect_eta_with(&p, 1e-3, &[0.05, 0.25, 0.35, 0.5], &runner).unwrap();
    assert!(a.eta_lo < 0.31 && b.eta_lo < 0.31 && 0.31 <= a.eta_hi && 0.31 <= b.eta_hi);
}

#[test]
fn bisection_reports_non_monotone_classifications() {
    let p = bare_params(0.02, 0.6);
    let runner = |ds: &[f64]| -> Vec<rotmcf_core::Result<Classification>> {
        ds.iter()
            .map(|&d| {
                let pinched = d < 0.1 || (0.3..0.35).contains(&d);
                Ok(fake(d, if pinched { Outcome::Pinched { t: 1.0 } } else { Outcome::Survived { horizon: 5.0 } }))
            })
            .collect()
    };
    let e = bisect_eta_with(&p, 1e-4, &[0.2, 0.32], &runner).unwrap_err();
    let Error::Monotonicity { detail } = e else { panic!("{e:?}") };
    assert!(detail.contains("0.32"), "{detail}");
}

#[test]
fn bisection_checks_its_end_points() {
    let p = bare_params(0.02, 0.6);
    assert!(matches!(bisect_eta_with(&p, 1e-3, &[], &threshold_runner(0.01)), Err(Error::Precondition(_))));
    assert!(matches!(bisect_eta_with(&p, 1e-3, &[], &threshold_runner(0.7)), Err(Error::Precondition(_))));
}

#[test]
fn gradient_estimate_passes_on_a_flat_late_trace() {
    // The bound only becomes finite once ln t outgrows ω, near t ≈ 2000.
    let tr = synthetic_trace(3000, |_| 0.01, |t| ramp(0.01, 0.01 / (1.0 + t)));
    let r = gradient_estimate_check(&tr, 0.05, 0.3, 0.1);
    let GradientEstimate::Pass(c) = r else { panic!("{r:?}") };
    assert_eq!(c.t, 10.0);
    assert!(c.delta_prime > 0.7 && c.delta_prime < std::f64::consts::FRAC_PI_4);
    assert!((c.omega - std::f64::consts::PI * 10f64.ln() / (2.0 * c.delta_prime.sin())).abs() < 1e-12);
    assert!(c.t1 > 1000.0 && c.t1 < 3000.0, "{}", c.t1);
    assert!(gradient_bound_argument(0.05, 0.3, 0.1, c.omega, c.t1) < FRAC_PI_2);
}

#[test]
fn gradient_estimate_fails_on_a_steep_late_trace() {
    // Flat near π/2 at T = 10, steep in between afterwards.
    let poly = |t: f64| {
        if t <= 10.0 {
            ramp(0.01, 0.01)
        } else {
            vec![(0.01, 0.0), (0.3, 0.0), (0.31, 2.0), (FRAC_PI_2, 2.0)]
        }
    };
    let r = gradient_estimate_check(&synthetic_trace(3000, |_| 0.01, poly), 0.05, 0.3, 0.1);
    assert!(matches!(r, GradientEstimate::Fail { .. }), "{r:?}");
}

#[test]
fn gradient_estimate_needs_its_preconditions() {
    let short = synthetic_trace(5, |_| 0.01, |_| ramp(0.01, 0.01));
    assert!(matches!(gradient_estimate_check(&short, 0.05, 0.3, 0.1), GradientEstimate::Inapplicable(_)));
    let high = synthetic_trace(30, |_| 0.2, |_| ramp(0.2, 0.01));
    assert!(matches!(gradient_estimate_check(&high, 0.05, 0.3, 0.1), GradientEstimate::Inapplicable(_)));
    assert!(matches!(gradient_estimate_check(&high, 0.3, 0.2, 0.1), GradientEstimate::Inapplicable(_)));
    assert!(matches!(gradient_estimate_check(&high, 0.05, 0.3, 0.9), GradientEstimate::Inapplicable(_)));
}

#[test]
fn multiplicity2_report_reads_the_trace() {
    let alpha = 0.02;
    // y = s (x − head) with 4nα s ≤ 1/2 stays under x/(4nα).
    let tr = synthetic_trace(20, |t| 0.05 / (1.0 + t), |t| ramp(0.05 / (1.0 + t), 0.5 / (8.0 * alpha) / (1.0 + t)));
    let r = multiplicity2_diagnostics(&tr, 0.3, alpha, 2);
    assert!(r.survived);
    assert!(r.linear_bound_holds, "{}", r.linear_bound_worst_ratio);
    assert!(r.head_nonincreasing);
    assert_eq!(r.head_series.len(), 21);
    assert!((r.sup_slope - 0.5 / (8.0 * alpha) / 21.0).abs() < 1e-9);
    let steep = synthetic_trace(3, |_| 0.01, |_| ramp(0.01, 2.0 / (8.0 * alpha)));
    assert!(!multiplicity2_diagnostics(&steep, 0.3, alpha, 2).linear_bound_holds);
}
