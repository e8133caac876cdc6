//! Composite Simpson rules on intervals and over whole graphs.

use crate::error::{invalid, Result};
use crate::graph::{EdgeIx, GraphPoint, MetricGraph};
use crate::math::ceil;
use alloc::vec::Vec;

/// Nodes and weights of composite Simpson on `[a, b]` with an even number of
/// panels no wider than `step`.
pub fn simpson_rule(a: f64, b: f64, step: f64) -> (Vec<f64>, Vec<f64>) {
    let mut n = ceil((b - a) / step).max(2.0) as usize;
    if n % 2 == 1 {
        n += 1;
    }
    let h = (b - a) / n as f64;
    let nodes = (0..=n).map(|i| if i == n { b } else { a + h * i as f64 }).collect();
    let weights = (0..=n)
        .map(|i| {
            let c = if i == 0 || i == n {
                1.0
            } else if i % 2 == 1 {
                4.0
            } else {
                2.0
            };
            c * h / 3.0
        })
        .collect();
    (nodes, weights)
}

pub fn simpson<F: FnMut(f64) -> f64>(mut f: F, a: f64, b: f64, step: f64) -> f64 {
    let (x, w) = simpson_rule(a, b, step);
    x.iter().zip(&w).map(|(&x, &w)| w * f(x)).sum()
}

/// Quadrature nodes covering every edge of a graph.
#[derive(Debug, Clone)]
pub struct GraphRule {
    pub points: Vec<GraphPoint>,
    pub weights: Vec<f64>,
}

impl GraphRule {
    /// Per-edge Simpson with panel width at most `step`.
    pub fn new(g: &MetricGraph, step: f64) -> Result<Self> {
        if !(step > 0.0) {
            return Err(invalid("quadrature_step", "must be positive"));
        }
        let mut points = Vec::new();
        let mut weights = Vec::new();
        for e in g.edges() {
            let (x, w) = simpson_rule(0.0, g.length(e), step);
            points.extend(x.into_iter().map(|s| GraphPoint::new(e, s)));
            weights.extend(w);
        }
        Ok(Self { points, weights })
    }

    /// Default rule: panels of `1e-3 × edge length` on every edge.
    pub fn relative(g: &MetricGraph, fraction: f64) -> Self {
        let mut points = Vec::new();
        let mut weights = Vec::new();
        for e in g.edges() {
            let l = g.length(e);
            let (x, w) = simpson_rule(0.0, l, fraction * l);
            points.extend(x.into_iter().map(|s| GraphPoint::new(e, s)));
            weights.extend(w);
        }
        Self { points, weights }
    }

    pub fn integrate<F: FnMut(GraphPoint) -> f64>(&self, mut f: F) -> f64 {
        self.points.iter().zip(&self.weights).map(|(&p, &w)| w * f(p)).sum()
    }

    pub fn on_edge(&self, e: EdgeIx) -> impl Iterator<Item = (GraphPoint, f64)> + '_ {
        self.points.iter().zip(&self.weights).filter(move |(p, _)| p.edge == e).map(|(&p, &w)| (p, w))
    }
}
