use hklab_core::graph::{EdgeSpec, VertexCondition, VertexSpec};
use hklab_core::kernel::{HeatKernel, PathSumKernel};
use hklab_core::walks::enumerate_walks;
use hklab_core::{EdgeIx, GraphPoint, MetricGraph};
use proptest::prelude::*;

// Random connected graph: a spanning tree plus extra edges.
fn arb_graph() -> impl Strategy<Value = MetricGraph> {
    (2usize..6)
        .prop_flat_map(|n| {
            (
                Just(n),
                proptest::collection::vec(0usize..100, n - 1),
                proptest::collection::vec((0usize..n, 0usize..n), 0..3),
                proptest::collection::vec(0.3f64..2.0, n + 3),
            )
        })
        .prop_map(|(n, parents, extra, lens)| {
            let vs = (0..n).map(|i| VertexSpec { id: format!("v{i}"), condition: VertexCondition::Kirchhoff }).collect();
            let mut es = Vec::new();
            for i in 1..n {
                es.push((parents[i - 1] % i, i));
            }
            es.extend(extra);
            let es = es
                .into_iter()
                .enumerate()
                .map(|(k, (u, v))| EdgeSpec { id: format!("e{k}"), u: format!("v{u}"), v: format!("v{v}"), length: lens[k % lens.len()] })
                .collect();
            MetricGraph::new(vs, es).unwrap()
        })
}

fn arb_point(g: &MetricGraph, pick: (usize, f64)) -> GraphPoint {
    let e = EdgeIx(pick.0 % g.edge_count());
    GraphPoint::new(e, pick.1 * g.length(e))
}

// Shortest route by exhaustive search over simple vertex paths.
fn brute_distance(g: &MetricGraph, x: GraphPoint, y: GraphPoint) -> f64 {
    fn dfs(g: &MetricGraph, v: usize, target: usize, seen: &mut Vec<bool>, acc: f64, best: &mut f64) {
        if v == target {
            *best = best.min(acc);
            return;
        }
        seen[v] = true;
        for e in g.edges() {
            let (a, b) = g.endpoints(e);
            for (p, q) in [(a.0, b.0), (b.0, a.0)] {
                if p == v && !seen[q] {
                    dfs(g, q, target, seen, acc + g.length(e), best);
                }
            }
        }
        seen[v] = false;
    }
    let mut best = if x.edge == y.edge { (x.s - y.s).abs() } else { f64::INFINITY };
    for (a, da) in g.end_distances(x) {
        for (b, db) in g.end_distances(y) {
            let mut d = f64::INFINITY;
            dfs(g, a.0, b.0, &mut vec![false; g.vertex_count()], 0.0, &mut d);
            best = best.min(da + d + db);
        }
    }
    best
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(48))]

    #[test]
    fn distance_is_shortest_simple_path(g in arb_graph(), a in (0usize..20, 0.0f64..=1.0), b in (0usize..20, 0.0f64..=1.0)) {
        let (x, y) = (arb_point(&g, a), arb_point(&g, b));
        let d = g.distance(x, y).unwrap();
        prop_assert!((d - brute_distance(&g, x, y)).abs() < 1e-12);
    }

    #[test]
    fn distance_is_a_metric(g in arb_graph(), a in (0usize..20, 0.0f64..=1.0), b in (0usize..20, 0.0f64..=1.0), c in (0usize..20, 0.0f64..=1.0)) {
        let (x, y, z) = (arb_point(&g, a), arb_point(&g, b), arb_point(&g, c));
        let dxy = g.distance(x, y).unwrap();
        prop_assert!(dxy >= 0.0);
        prop_assert_eq!(dxy, g.distance(y, x).unwrap());
        prop_assert_eq!(g.distance(x, x).unwrap(), 0.0);
        prop_assert!(dxy <= g.distance(x, z).unwrap() + g.distance(z, y).unwrap() + 1e-12);
    }

    #[test]
    fn walk_lists_are_prefix_consistent(g in arb_graph(), a in (0usize..20, 0.0f64..=1.0), b in (0usize..20, 0.0f64..=1.0), cut in 0.5f64..2.5) {
        let (x, y) = (arb_point(&g, a), arb_point(&g, b));
        let short = enumerate_walks(&g, x, y, cut).unwrap();
        let long = enumerate_walks(&g, x, y, cut + 1.0).unwrap();
        let head: Vec<_> = long.iter().filter(|w| w.length <= cut).cloned().collect();
        prop_assert_eq!(short, head);
    }

    #[test]
    fn kernel_is_symmetric_and_positive(g in arb_graph(), a in (0usize..20, 0.0f64..=1.0), b in (0usize..20, 0.0f64..=1.0), t in 0.01f64..0.1) {
        let (x, y) = (arb_point(&g, a), arb_point(&g, b));
        let k = PathSumKernel::new(&g, 1e-10).unwrap();
        let (p, q) = (k.eval(t, x, y).unwrap(), k.eval(t, y, x).unwrap());
        prop_assert!((p.value - q.value).abs() <= 1e-12 * p.value.abs().max(1.0));
        prop_assert!(p.value >= -p.tail_bound);
    }
}
