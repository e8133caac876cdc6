use hklab_core::graph::VertexCondition::*;
use hklab_core::kernel::{kernel_interval, kernel_star, HeatKernel, PathSumKernel};
use hklab_core::spectral::{eigen, gram, weyl_estimate, SpectralKernel};
use hklab_core::{EdgeIx, GraphPoint, MetricGraph, VertexIx};

fn graphs() -> Vec<(&'static str, MetricGraph)> {
    vec![
        ("interval", MetricGraph::interval(1.0, Kirchhoff, Kirchhoff).unwrap()),
        ("star", MetricGraph::star(&[1.0, 1.0, 1.0], Kirchhoff).unwrap()),
        ("triangle", MetricGraph::cycle(&[1.0, 1.0, 1.0]).unwrap()),
    ]
}

fn grid(g: &MetricGraph) -> Vec<GraphPoint> {
    let mut pts = Vec::new();
    for k in 0..5 {
        let e = EdgeIx(k % g.edge_count());
        pts.push(GraphPoint::new(e, g.length(e) * (0.1 + 0.2 * k as f64)));
    }
    pts
}

#[test]
fn pathsum_and_spectral_agree() {
    for (name, g) in graphs() {
        let ps = PathSumKernel::new(&g, 1e-10).unwrap();
        let sp = SpectralKernel::for_time(&g, 0.01, 1e-10).unwrap();
        for t in [0.01, 0.05, 0.2] {
            for &x in &grid(&g) {
                for &y in &grid(&g) {
                    let a = ps.eval(t, x, y).unwrap();
                    let b = sp.eval(t, x, y).unwrap();
                    let tol = (a.tail_bound + b.tail_bound).max(1e-8);
                    assert!((a.value - b.value).abs() <= tol, "{name} t={t}: {} vs {}", a.value, b.value);
                }
            }
        }
    }
}

#[test]
fn star_centre_spectral_matches_pathsum() {
    let g = MetricGraph::star(&[1.0, 1.0, 1.0], Kirchhoff).unwrap();
    let c = GraphPoint::new(EdgeIx(0), 0.0);
    let a = PathSumKernel::new(&g, 1e-12).unwrap().eval(0.02, c, c).unwrap();
    let b = SpectralKernel::for_time(&g, 0.02, 1e-12).unwrap().eval(0.02, c, c).unwrap();
    assert!((a.value - b.value).abs() < 1e-8);
}

#[test]
fn interval_value_from_both_oracles() {
    let g = MetricGraph::interval(1.0, Kirchhoff, Kirchhoff).unwrap();
    let x = GraphPoint::new(EdgeIx(0), 0.5);
    let sp = SpectralKernel::for_time(&g, 0.05, 1e-12).unwrap().eval(0.05, x, x).unwrap();
    let im = kernel_interval(1.0, Kirchhoff, Kirchhoff, 0.05, 0.5, 0.5).unwrap();
    assert!((sp.value - im.value).abs() < 1e-10);
    assert!((im.value - 1.278566).abs() < 1e-6);
}

#[test]
fn modes_are_orthonormal() {
    for (name, g) in graphs() {
        let modes = eigen(&g, 30.0).unwrap();
        let m = gram(&g, &modes);
        for i in 0..modes.len() {
            for j in 0..modes.len() {
                let want = if i == j { 1.0 } else { 0.0 };
                assert!((m[(i, j)] - want).abs() < 1e-8, "{name} ({i},{j}) = {}", m[(i, j)]);
            }
        }
    }
}

#[test]
fn finite_difference_derivatives_agree() {
    let g = MetricGraph::star(&[1.0, 0.7, 1.3], Kirchhoff).unwrap();
    for m in eigen(&g, 20.0).unwrap() {
        for v in g.vertices() {
            for &h in g.incident(v) {
                let a = m.outward_derivative(&g, h);
                let f1 = m.outward_derivative_fd(&g, h, 1e-3);
                let f2 = m.outward_derivative_fd(&g, h, 5e-4);
                let (e1, e2) = ((f1 - a).abs(), (f2 - a).abs());
                // Central differences: error drops ~4x when h halves.
                assert!(e1 < 1e-12 || e2 < 0.3 * e1, "k={} {e1} {e2}", m.k);
            }
        }
    }
}

#[test]
fn weyl_law_within_two() {
    let shapes = [
        MetricGraph::interval(1.0, Kirchhoff, Dirichlet).unwrap(),
        MetricGraph::star(&[1.0, 0.8, 1.3], Kirchhoff).unwrap(),
        MetricGraph::star(&[0.5, 0.9, 1.1, 0.7, 1.6, 1.0], Dirichlet).unwrap(),
        MetricGraph::cycle(&[1.0, 0.6, 1.4, 0.9]).unwrap(),
    ];
    for g in &shapes {
        for k in [10.0, 25.0, 50.0] {
            let n = eigen(g, k).unwrap().len() as f64;
            assert!((n - weyl_estimate(g, k)).abs() <= 2.0, "k={k}: {n} vs {}", weyl_estimate(g, k));
        }
    }
}

#[test]
fn compact_star_near_centre_matches_infinite_star() {
    // At short times the leaves are invisible.
    let g = MetricGraph::star(&[1.0, 1.0, 1.0], Kirchhoff).unwrap();
    let sigma = g.scattering_matrix(VertexIx(0)).unwrap();
    let ps = PathSumKernel::new(&g, 1e-14).unwrap();
    let a = ps.value(0.002, GraphPoint::new(EdgeIx(0), 0.1), GraphPoint::new(EdgeIx(1), 0.05)).unwrap();
    let b = kernel_star(&sigma, 0.002, (0, 0.1), (1, 0.05)).unwrap();
    assert!((a - b).abs() < 1e-12);
}
