//! Numerical checks of the heat-kernel axioms on a graph.

use super::HeatKernel;
use crate::error::{invalid, Result};
use crate::graph::GraphPoint;
use crate::quadrature::{simpson, GraphRule};

/// `|p_{t+s}(x,y) - ∫ p_t(x,z) p_s(z,y) dz|` with per-edge Simpson of panel
/// width `step`.
pub fn semigroup_residual<K: HeatKernel>(k: &K, t: f64, s: f64, x: GraphPoint, y: GraphPoint, step: f64) -> Result<f64> {
    if !(step > 0.0) {
        return Err(invalid("quadrature_step", "must be positive"));
    }
    if !(t > 0.0 && s > 0.0) {
        return Err(invalid("t", "times must be positive"));
    }
    let rule = GraphRule::new(k.graph(), step)?;
    let mut err = None;
    let conv = rule.integrate(|z| match (k.value(t, x, z), k.value(s, z, y)) {
        (Ok(a), Ok(b)) => a * b,
        (Err(e), _) | (_, Err(e)) => {
            err.get_or_insert(e);
            0.0
        }
    });
    if let Some(e) = err {
        return Err(e);
    }
    Ok((k.value(t + s, x, y)? - conv).abs())
}

/// `∫ p_t(x, z) dz` over the graph.
pub fn mass<K: HeatKernel>(k: &K, t: f64, x: GraphPoint, rule: &GraphRule) -> Result<f64> {
    let mut total = 0.0;
    for (&z, &w) in rule.points.iter().zip(&rule.weights) {
        total += w * k.value(t, x, z)?;
    }
    Ok(total)
}

/// `|∫_edge p_t(x, y) f(y) dy - f(x)|` for `f` supported on the edge of `x`.
pub fn identity_error<K: HeatKernel, F: Fn(f64) -> f64>(k: &K, t: f64, x: GraphPoint, f: F, step: f64) -> Result<f64> {
    let l = k.graph().length(x.edge);
    let mut err = None;
    let v = simpson(
        |s| match k.value(t, x, GraphPoint::new(x.edge, s)) {
            Ok(p) => p * f(s),
            Err(e) => {
                err.get_or_insert(e);
                0.0
            }
        },
        0.0,
        l,
        step,
    );
    match err {
        Some(e) => Err(e),
        None => Ok((v - f(x.s)).abs()),
    }
}
