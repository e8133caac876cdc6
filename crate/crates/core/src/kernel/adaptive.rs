use super::{HeatKernel, KernelEval, PathSumKernel};
use crate::error::{Error, Result};
use crate::graph::{EdgeIx, GraphPoint, MetricGraph};
use crate::spectral::{eigen, required_k, EigenMode, SpectralKernel};
use alloc::vec::Vec;

const PROBE_WALKS: usize = 200_000;

/// Owns a graph and evaluates its kernel by path sum at short times and by
/// eigenfunction expansion once the walk count gets large.
#[derive(Debug, Clone)]
pub struct AdaptiveKernel {
    graph: MetricGraph,
    tol: f64,
    modes: Option<(Vec<EigenMode>, f64)>,
}

impl AdaptiveKernel {
    /// `t_max` is the longest time that will be requested.
    pub fn new(graph: MetricGraph, tol: f64, t_max: f64) -> Result<Self> {
        let mut out = Self { graph, tol, modes: None };
        let probe = |t: f64| {
            let g = &out.graph;
            let x = GraphPoint::new(EdgeIx(0), 0.5 * g.length(EdgeIx(0)));
            let far = (0..g.edge_count())
                .map(|e| GraphPoint::new(EdgeIx(e), 0.5 * g.length(EdgeIx(e))))
                .max_by(|a, b| g.distance_unchecked(x, *a).total_cmp(&g.distance_unchecked(x, *b)))
                .unwrap_or(x);
            PathSumKernel::new(g, tol).map(|k| k.with_max_walks(PROBE_WALKS)).and_then(|k| k.eval(t, x, far))
        };
        match probe(t_max) {
            Ok(_) => {}
            Err(Error::TruncationUnreachable { .. }) => {
                let mut t = t_max;
                while t > 1e-8 {
                    t *= 0.5;
                    if probe(t).is_ok() {
                        break;
                    }
                }
                let k_max = required_k(t, tol);
                out.modes = Some((eigen(&out.graph, k_max)?, k_max));
            }
            Err(e) => return Err(e),
        }
        Ok(out)
    }

    pub fn tol(&self) -> f64 {
        self.tol
    }

    pub fn into_graph(self) -> MetricGraph {
        self.graph
    }
}

impl HeatKernel for AdaptiveKernel {
    fn graph(&self) -> &MetricGraph {
        &self.graph
    }

    fn eval(&self, t: f64, x: GraphPoint, y: GraphPoint) -> Result<KernelEval> {
        match &self.modes {
            Some((m, k)) if t > 0.0 => {
                let s = SpectralKernel::from_modes(&self.graph, Vec::new(), *k, self.tol);
                if s.tail(t) <= self.tol {
                    self.graph.check_point(x)?;
                    self.graph.check_point(y)?;
                    let value = m.iter().map(|md| crate::math::exp(-md.lambda() * t) * md.value(x) * md.value(y)).sum();
                    return Ok(KernelEval { t, x, y, value, tail_bound: s.tail(t) });
                }
                PathSumKernel::new(&self.graph, self.tol)?.eval(t, x, y)
            }
            _ => PathSumKernel::new(&self.graph, self.tol)?.eval(t, x, y),
        }
    }
}
