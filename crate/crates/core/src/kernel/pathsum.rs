use super::closed::gauss;
use super::{HeatKernel, KernelEval};
use crate::error::{invalid, Error, Result};
use crate::graph::{GraphPoint, MetricGraph};
use crate::math::{ln, sqrt, PI};
use crate::walks::{traverse, WalkTables};

pub const DEFAULT_MAX_WALKS: usize = 5_000_000;

/// Heat kernel of a compact graph as a sum over scattering walks,
/// `p_t(x,y) = Σ_w weight(w) · exp(-len(w)²/4t) / sqrt(4πt)`, truncated at a
/// length where the remaining walks are certified below `tol`.
#[derive(Debug, Clone)]
pub struct PathSumKernel<'g> {
    graph: &'g MetricGraph,
    tables: WalkTables,
    tol: f64,
    max_walks: usize,
}

impl<'g> PathSumKernel<'g> {
    pub fn new(graph: &'g MetricGraph, tol: f64) -> Result<Self> {
        if !(tol > 0.0) {
            return Err(invalid("tol", "must be positive"));
        }
        Ok(Self { graph, tables: WalkTables::new(graph), tol, max_walks: DEFAULT_MAX_WALKS })
    }

    pub fn with_max_walks(mut self, max_walks: usize) -> Self {
        self.max_walks = max_walks;
        self
    }

    pub fn tol(&self) -> f64 {
        self.tol
    }

    /// Bound on the contribution of all walks longer than `cutoff`.
    ///
    /// Walks with length in `(cutoff + j·m, cutoff + (j+1)·m]`, `m` the shortest
    /// edge, number at most the weight bound at the upper end and each
    /// contributes at most the Gaussian at the lower end.
    pub fn tail_bound(&self, t: f64, cutoff: f64) -> f64 {
        let m = self.graph.min_length();
        let mut sum = 0.0;
        for j in 0.. {
            let lo = cutoff + j as f64 * m;
            let ln_term = ln_weight_bound(self.tables.branching(), self.graph, lo + m)
                - lo * lo / (4.0 * t)
                - 0.5 * ln(4.0 * PI * t);
            let term = crate::math::exp(ln_term);
            sum += term;
            if (j > 2 && term <= 1e-6 * sum) || j > 100_000 || !sum.is_finite() {
                break;
            }
        }
        sum
    }

    /// Truncation length for distance `d`: the first length at least
    /// `max(d, sqrt(4t ln(1/(tol sqrt(4πt)))))` whose tail bound is below tol.
    pub fn truncation(&self, t: f64, d: f64) -> Result<(f64, f64)> {
        let base = ln(1.0 / (self.tol * sqrt(4.0 * PI * t)));
        let mut cutoff = d.max(if base > 0.0 { sqrt(4.0 * t * base) } else { 0.0 });
        let step = 0.25 * self.graph.min_length();
        for _ in 0..100_000 {
            let tail = self.tail_bound(t, cutoff);
            if tail <= self.tol {
                return Ok((cutoff, tail));
            }
            cutoff += step;
        }
        Err(Error::TruncationUnreachable { walks: 0, tail_bound: self.tail_bound(t, cutoff) })
    }
}

fn ln_weight_bound(b: f64, g: &MetricGraph, ell: f64) -> f64 {
    let k = crate::math::floor(ell / g.min_length()) + 1.0;
    let ln_geom = if b <= 1.0 + 1e-12 {
        ln(k + 1.0)
    } else {
        // ln((b^(k+1) - 1)/(b - 1)) ≤ (k+1) ln b - ln(b - 1)
        (k + 1.0) * ln(b) - ln(b - 1.0)
    };
    // ln(1 + 2 G) ≤ ln 3 + ln G for G ≥ 1.
    ln(3.0) + ln_geom.max(0.0)
}

impl HeatKernel for PathSumKernel<'_> {
    fn graph(&self) -> &MetricGraph {
        self.graph
    }

    fn eval(&self, t: f64, x: GraphPoint, y: GraphPoint) -> Result<KernelEval> {
        if !(t > 0.0 && t.is_finite()) {
            return Err(invalid("t", "time must be positive"));
        }
        let d = self.graph.distance(x, y)?;
        let (cutoff, tail) = self.truncation(t, d)?;
        let mut value = 0.0;
        let result = traverse(self.graph, &self.tables, x, y, cutoff, self.max_walks, |_, _, len, w| {
            value += w * gauss(t, len);
        });
        match result {
            Ok(_) => Ok(KernelEval { t, x, y, value, tail_bound: tail }),
            Err(Error::TruncationUnreachable { walks, .. }) => {
                Err(Error::TruncationUnreachable { walks, tail_bound: tail })
            }
            Err(e) => Err(e),
        }
    }
}

/// One-shot path-sum evaluation.
pub fn kernel_pathsum(g: &MetricGraph, t: f64, x: GraphPoint, y: GraphPoint, tol: f64) -> Result<KernelEval> {
    PathSumKernel::new(g, tol)?.eval(t, x, y)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::graph::{EdgeIx, VertexCondition::*};
    use crate::kernel::kernel_interval;

    #[test]
    fn interval_pathsum_matches_images() {
        let g = MetricGraph::interval(1.0, Kirchhoff, Kirchhoff).unwrap();
        let x = GraphPoint::new(EdgeIx(0), 0.5);
        let p = kernel_pathsum(&g, 0.05, x, x, 1e-12).unwrap();
        let i = kernel_interval(1.0, Kirchhoff, Kirchhoff, 0.05, 0.5, 0.5).unwrap();
        assert!((p.value - i.value).abs() <= p.tail_bound + i.tail_bound + 1e-15);
        let g = MetricGraph::interval(1.0, Dirichlet, Kirchhoff).unwrap();
        for (a, b) in [(0.1, 0.7), (0.0, 0.3), (0.9, 1.0)] {
            let p = kernel_pathsum(&g, 0.2, GraphPoint::new(EdgeIx(0), a), GraphPoint::new(EdgeIx(0), b), 1e-12).unwrap();
            let i = kernel_interval(1.0, Dirichlet, Kirchhoff, 0.2, a, b).unwrap();
            assert!((p.value - i.value).abs() < 1e-11, "{a} {b}: {} vs {}", p.value, i.value);
        }
    }

    #[test]
    fn symmetric_in_arguments() {
        let g = MetricGraph::star(&[1.0, 0.7, 1.3], Kirchhoff).unwrap();
        let x = GraphPoint::new(EdgeIx(0), 0.2);
        let y = GraphPoint::new(EdgeIx(2), 0.9);
        let a = kernel_pathsum(&g, 0.1, x, y, 1e-12).unwrap().value;
        let b = kernel_pathsum(&g, 0.1, y, x, 1e-12).unwrap().value;
        assert!((a - b).abs() < 1e-12);
    }

    #[test]
    fn tail_bound_is_reported_and_certified() {
        let g = MetricGraph::star(&[1.0, 1.0, 1.0], Kirchhoff).unwrap();
        let x = GraphPoint::new(EdgeIx(0), 0.5);
        let e = kernel_pathsum(&g, 0.2, x, x, 1e-10).unwrap();
        assert!(e.tail_bound <= 1e-10 && e.tail_bound > 0.0);
        assert!(e.value >= -e.tail_bound);
    }

    #[test]
    fn truncation_unreachable_is_reported() {
        let g = MetricGraph::star(&[0.05, 0.05, 0.05, 0.05], Kirchhoff).unwrap();
        let k = PathSumKernel::new(&g, 1e-12).unwrap().with_max_walks(1000);
        let x = GraphPoint::new(EdgeIx(0), 0.02);
        assert!(matches!(k.eval(5.0, x, x), Err(Error::TruncationUnreachable { .. })));
        assert!(PathSumKernel::new(&g, 0.0).is_err());
    }
}
