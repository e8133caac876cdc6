//! Heat kernels: the free Gaussian, the infinite star, the interval by
//! images, and arbitrary compact graphs by scattering-walk sums.

mod adaptive;
mod axioms;
mod closed;
mod pathsum;

pub use adaptive::AdaptiveKernel;
pub use axioms::{identity_error, mass, semigroup_residual};
pub use closed::{gauss_free, kernel_interval, kernel_star};
pub use pathsum::{kernel_pathsum, PathSumKernel, DEFAULT_MAX_WALKS};

use crate::error::Result;
use crate::graph::{GraphPoint, MetricGraph};

/// One kernel value with a rigorous bound on its truncation error.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct KernelEval {
    pub t: f64,
    pub x: GraphPoint,
    pub y: GraphPoint,
    pub value: f64,
    pub tail_bound: f64,
}

/// Anything that evaluates `p_t(x, y)` on a fixed graph.
pub trait HeatKernel {
    fn graph(&self) -> &MetricGraph;
    fn eval(&self, t: f64, x: GraphPoint, y: GraphPoint) -> Result<KernelEval>;

    fn value(&self, t: f64, x: GraphPoint, y: GraphPoint) -> Result<f64> {
        self.eval(t, x, y).map(|e| e.value)
    }
}

impl<K: HeatKernel + ?Sized> HeatKernel for &K {
    fn graph(&self) -> &MetricGraph {
        (**self).graph()
    }
    fn eval(&self, t: f64, x: GraphPoint, y: GraphPoint) -> Result<KernelEval> {
        (**self).eval(t, x, y)
    }
}
