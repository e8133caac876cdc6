use hklab_core::graph::{EdgeSpec, VertexCondition::*, VertexSpec};
use hklab_core::kernel::AdaptiveKernel;
use hklab_core::math::log_grid;
use hklab_core::spectral::eigen;
use hklab_core::two_particle::*;
use hklab_core::MetricGraph;

#[test]
fn star_quadrature_trace_matches_eigen_pairs() {
    let g = MetricGraph::star(&[1.0, 1.0, 1.0], Kirchhoff).unwrap();
    let k = AdaptiveKernel::new(g.clone(), 1e-12, 0.02).unwrap();
    let tp = trace_two_particle(&k, 0.02, 2e-3).unwrap();
    let lambdas: Vec<f64> = eigen(&g, 60.0).unwrap().iter().map(|m| m.lambda()).collect();
    let oracle = eigen_pair_trace(&lambdas, 0.02);
    assert!((tp.z - oracle).abs() < 5e-4 * oracle, "{} vs {oracle}", tp.z);
}

#[test]
fn star_constant_term_matches_formula() {
    let g = MetricGraph::star(&[1.0, 1.0, 1.0], Kirchhoff).unwrap();
    let (series, _) = trace_series_eigen(&g, &log_grid(0.002, 0.02, 8), 1e-12).unwrap();
    let fit = asymptotic_fit(&series).unwrap();
    let want = predicted_coefficients(&g).unwrap();
    assert!(((fit.a_0 - want.a_0) / want.a_0).abs() < 0.02, "{fit:?} {want:?}");
    assert!(fit.max_rel_error(&want) < 1e-4);
}

#[test]
fn degree_two_vertex_invisible_in_fits() {
    let line = MetricGraph::interval(1.0, Kirchhoff, Kirchhoff).unwrap();
    let vs = ["a", "m", "b"].iter().map(|id| VertexSpec { id: id.to_string(), condition: Kirchhoff }).collect();
    let es = vec![
        EdgeSpec { id: "e1".into(), u: "a".into(), v: "m".into(), length: 0.375 },
        EdgeSpec { id: "e2".into(), u: "m".into(), v: "b".into(), length: 0.625 },
    ];
    let split = MetricGraph::new(vs, es).unwrap();
    let grid = log_grid(0.002, 0.02, 8);
    let a = asymptotic_fit(&trace_series_eigen(&line, &grid, 1e-12).unwrap().0).unwrap();
    let b = asymptotic_fit(&trace_series_eigen(&split, &grid, 1e-12).unwrap().0).unwrap();
    assert!(a.max_rel_error(&b) < 1e-6);
    assert_eq!(predicted_exact(&line).unwrap(), predicted_exact(&split).unwrap());
}

#[test]
fn trace_tends_to_one() {
    let g = MetricGraph::interval(1.0, Kirchhoff, Kirchhoff).unwrap();
    let lambdas: Vec<f64> = eigen(&g, 40.0).unwrap().iter().map(|m| m.lambda()).collect();
    assert!((eigen_pair_trace(&lambdas, 5.0) - 1.0).abs() < 1e-12);
}

#[test]
fn ordered_pairs_would_break_the_interval_check() {
    // With Σ over ordered pairs the interval constant would be 7/16.
    let g = MetricGraph::interval(1.0, Kirchhoff, Kirchhoff).unwrap();
    let (series, _) = trace_series_eigen(&g, &log_grid(0.002, 0.02, 8), 1e-12).unwrap();
    let fit = asymptotic_fit(&series).unwrap();
    assert!((fit.a_0 - 0.375).abs() < 1e-6);
    assert!((fit.a_0 - 7.0 / 16.0).abs() > 0.05);
}
