use std::f64::consts::FRAC_PI_2;

use proptest::prelude::*;
use rotmcf_core::barriers::*;
use rotmcf_core::catenoid::{find_c1, sample_catenoid};
use rotmcf_core::flow::{run, Chart, FlowParams, SectionCurve};

/// A polyline over `[0, 1]` with increasing x and arbitrary y.
fn graph(xs: &[f64], ys: &[f64]) -> Vec<(f64, f64)> {
    xs.iter().copied().zip(ys.iter().copied()).collect()
}

fn abscissae(k: usize) -> Vec<f64> {
    (0..k).map(|i| i as f64 / (k - 1) as f64).collect()
}

fn lifted(p: &[(f64, f64)], by: f64) -> Vec<(f64, f64)> {
    p.iter().map(|&(x, y)| (x, y + by)).collect()
}

fn monotone_ys() -> impl Strategy<Value = Vec<f64>> {
    prop::collection::vec(0.0..0.2f64, 8).prop_map(|steps| {
        steps
            .iter()
            .scan(0.0, |acc, s| {
                *acc += s;
                Some(*acc)
            })
            .collect()
    })
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn reflexive(ys in monotone_ys()) {
        let p = graph(&abscissae(8), &ys);
        prop_assert!(on_top_of(&p, &p, 0.0));
        prop_assert!(!on_top_of(&p, &p, 1e-6));
    }

    #[test]
    fn antisymmetric_up_to_equality(ys in monotone_ys(), zs in monotone_ys()) {
        let xs = abscissae(8);
        let (a, b) = (graph(&xs, &ys), graph(&xs, &zs));
        if on_top_of(&a, &b, 0.0) && on_top_of(&b, &a, 0.0) {
            for (p, q) in a.iter().zip(&b) {
                prop_assert!((p.1 - q.1).abs() < 1e-12);
            }
        }
    }

    #[test]
    fn transitive(ys in monotone_ys(), d1 in 0.0..0.1f64, d2 in 0.0..0.1f64, wobble in prop::collection::vec(-1.0..1.0f64, 8)) {
        let xs = abscissae(8);
        let c = graph(&xs, &ys);
        // b sits between c and c + d1, a above b by at least d2.
        let b: Vec<_> = c.iter().zip(&wobble).map(|(&(x, y), w)| (x, y + 0.5 * d1 * (1.0 + w))).collect();
        let a = lifted(&b, d2 + d1);
        prop_assert!(on_top_of(&a, &b, 0.0));
        prop_assert!(on_top_of(&b, &c, 0.0));
        prop_assert!(on_top_of(&a, &c, 0.0));
    }

    #[test]
    fn lifting_adds_exactly_the_shift_to_the_gap(ys in monotone_ys(), by in 0.0..0.3f64) {
        let p = graph(&abscissae(8), &ys);
        let (g, _) = column_gap(&lifted(&p, by), &p).unwrap();
        prop_assert!((g - by).abs() < 1e-12);
    }

    // Two slices at different heights are static solutions; the monitor
    // must stay clean whatever the resolution.
    #[test]
    fn two_slices_stay_nested(m in 16usize..160, lo in 0.0..0.4f64, gap in 0.01..0.4f64) {
        let p = FlowParams { nodes: m, snapshot_interval: Some(0.05), ..Default::default() };
        let slice = |c: f64| SectionCurve::horizontal(Chart::sample(0.0, FRAC_PI_2, m, |_| c).unwrap()).unwrap();
        let upper = run(slice(lo + gap), 0.2, &p).unwrap();
        let lower = run(slice(lo), 0.2, &p).unwrap();
        let r = nesting_monitor(&upper, &lower);
        prop_assert!(r.clean() && r.warnings.is_empty());
        prop_assert!(r.checks >= 5);
        prop_assert!((r.min_gap.unwrap() - gap).abs() < 1e-12);
    }
}

#[test]
fn horizontal_lines_compare_by_height() {
    let upper = [(0.0, 0.5), (1.0, 0.5)];
    let lower = [(0.0, 0.2), (1.0, 0.2)];
    assert!(on_top_of(&upper, &lower, 0.0));
    assert!(on_top_of(&upper, &lower, 0.25));
    assert!(!on_top_of(&lower, &upper, 0.0));
}

#[test]
fn disjoint_columns_are_vacuously_ordered() {
    let a = [(0.0, 0.0), (0.4, 0.1)];
    let b = [(0.6, 1.0), (1.0, 2.0)];
    assert!(on_top_of(&a, &b, 0.0) && on_top_of(&b, &a, 0.0));
}

#[test]
fn catenoid_sits_on_top_of_the_corner_path_at_the_chosen_beta() {
    for n in [2u32, 3] {
        let c1 = find_c1(n, 1e-10).unwrap().c1;
        let cat = sample_catenoid(c1, n, 801).unwrap().barrier_segment().into_nodes();
        let angenent = rotmcf_core::angenent::find_angenent(0.5 * (n - 1) as f64, 1e-9, 401).unwrap().0;
        let choice = choose_alpha_beta(n, c1, &cat, &angenent).unwrap();
        let y0 = 0.5 / n as f64;
        assert!(choice.alpha > 0.0 && choice.alpha < c1 / 4.0, "α = {}", choice.alpha);
        assert!(choice.beta > c1 && choice.beta < FRAC_PI_2, "β = {}", choice.beta);
        assert!(on_top_of(&cat, &corner_path(choice.beta, y0), 1e-3));
        // One step further down no longer clears the margin.
        assert!(!on_top_of(&cat, &corner_path(choice.beta - BETA_STEP, y0), 1e-3));
        let (x0, x1, y_lo, y_hi) = choice.angenent.bbox;
        assert!(x0 > 2.0 * choice.alpha && x1 < std::f64::consts::FRAC_PI_4, "{:?}", choice.angenent.bbox);
        assert!(y_lo >= 0.0 && y_hi <= y0);
    }
}

#[test]
fn away_from_boundary_flags_a_head_beyond_beta() {
    let p = FlowParams { nodes: 32, ..Default::default() };
    let tr = run(SectionCurve::vertical(Chart::sample(0.0, 1.0, 32, |_| 0.8).unwrap()).unwrap(), 0.02, &p).unwrap();
    assert!(away_from_boundary_check(&tr, 0.9, 0.0));
    let mut bad = tr.clone();
    bad.samples[1].head = Some(1.0);
    assert!(!away_from_boundary_check(&bad, 0.9, 0.0));
}
