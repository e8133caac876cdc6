//! Path ensembles spread over the rayon pool. Each path owns its random
//! streams, so results are collected in path order and do not depend on the
//! number of threads.

use hklab_core::locality::SubdomainSpec;
use hklab_core::mc::{direct_path, CutSites, Lattice, PathOutcome, SpliceConfig, SplicePlan};
use hklab_core::{GraphPoint, MetricGraph, Result};
use rayon::prelude::*;

pub fn ensemble(
    g: &MetricGraph,
    x0: GraphPoint,
    horizon: f64,
    h: f64,
    paths: u64,
    seed: u64,
    watch: Option<&SubdomainSpec>,
) -> Result<Vec<PathOutcome>> {
    let lat = Lattice::new(g, h, horizon)?;
    let cuts = watch.map(|u| CutSites::new(&lat, u));
    let w = watch.zip(cuts.as_ref());
    (0..paths).into_par_iter().map(|i| direct_path(&lat, x0, seed, i, w)).collect()
}

pub fn splice(cfg: &SpliceConfig) -> Result<Vec<PathOutcome>> {
    let plan = SplicePlan::new(cfg)?;
    (0..cfg.paths).into_par_iter().map(|i| plan.path(i)).collect()
}

/// Runs `f` on a pool of `threads` workers; 0 picks the rayon default.
pub fn with_threads<T: Send>(threads: usize, f: impl FnOnce() -> T + Send) -> T {
    match rayon::ThreadPoolBuilder::new().num_threads(threads).build() {
        Ok(pool) => pool.install(f),
        Err(_) => f(),
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use hklab_core::graph::VertexCondition::*;
    use hklab_core::EdgeIx;

    #[test]
    fn matches_the_sequential_ensemble() {
        let g = MetricGraph::star(&[1.0, 0.5, 0.8], Dirichlet).unwrap();
        let x0 = GraphPoint::new(EdgeIx(1), 0.25);
        let u = SubdomainSpec::ball(&g, GraphPoint::new(EdgeIx(0), 0.0), 0.3).unwrap();
        let seq = hklab_core::mc::ensemble(&g, x0, 0.05, 1e-2, 500, 9, Some(&u)).unwrap();
        let one = with_threads(1, || ensemble(&g, x0, 0.05, 1e-2, 500, 9, Some(&u)).unwrap());
        let four = with_threads(4, || ensemble(&g, x0, 0.05, 1e-2, 500, 9, Some(&u)).unwrap());
        assert_eq!(seq, one);
        assert_eq!(one, four);
    }
}
