use hklab_core::dirichlet::*;
use hklab_core::graph::VertexCondition::*;
use hklab_core::math::{cos, exp, sin, PI};
use hklab_core::MetricGraph;
use rand_chacha::ChaCha8Rng;
use rand_core::{RngCore, SeedableRng};

const RADII: [f64; 4] = [1e-2, 5e-3, 2.5e-3, 1.25e-3];

fn uniform(rng: &mut ChaCha8Rng) -> f64 {
    (rng.next_u64() >> 11) as f64 / (1u64 << 53) as f64
}

#[test]
fn kappa_is_function_independent() {
    let g = MetricGraph::cycle(&[1.0]).unwrap();
    let fs: [fn(f64) -> f64; 3] = [
        |s| sin(2.0 * PI * s),
        |s| sin(2.0 * PI * s) + 0.5 * cos(4.0 * PI * s),
        |s| exp(sin(2.0 * PI * s)),
    ];
    let mut kappas = Vec::new();
    for f in fs {
        let sf = SampledFunction::from_fn(&g, 6.25e-5, |p| f(p.s)).unwrap();
        let study = convergence_study(&g, &sf, &RADII).unwrap();
        assert!(study.converges(), "{:?}", study.differences());
        kappas.push(study.kappa);
    }
    for k in &kappas {
        assert!((k - kappas[0]).abs() < 1e-4 && (k - 2.0).abs() < 1e-3, "{kappas:?}");
    }
}

// Random piecewise-linear function through `knots` values on a circle.
fn random_circle_function(g: &MetricGraph, rng: &mut ChaCha8Rng, knots: usize, step: f64) -> SampledFunction {
    let mut v: Vec<f64> = (0..knots).map(|_| 2.0 * uniform(rng) - 0.5).collect();
    v.push(v[0]);
    SampledFunction::from_fn(g, step, |p| {
        let x = p.s * knots as f64;
        let i = (x.floor() as usize).min(knots - 1);
        v[i] + (x - i as f64) * (v[i + 1] - v[i])
    })
    .unwrap()
}

#[test]
fn unit_contraction_lowers_energy() {
    let g = MetricGraph::cycle(&[1.0]).unwrap();
    let mut rng = ChaCha8Rng::seed_from_u64(2024);
    for _ in 0..100 {
        let f = random_circle_function(&g, &mut rng, 12, 5e-4);
        let e = energy_er(&g, &f, 1e-2).unwrap();
        let e_sharp = energy_er(&g, &f.unit_contraction(), 1e-2).unwrap();
        assert!(e_sharp <= e);
    }
}

#[test]
fn parallelogram_bound() {
    let g = MetricGraph::cycle(&[1.0]).unwrap();
    let mut rng = ChaCha8Rng::seed_from_u64(7);
    let f = random_circle_function(&g, &mut rng, 9, 5e-4);
    let h = random_circle_function(&g, &mut rng, 5, 5e-4);
    let r = 1e-2;
    let lhs = energy_er(&g, &f.add(&h).unwrap(), r).unwrap();
    assert!(lhs <= 2.0 * energy_er(&g, &f, r).unwrap() + 2.0 * energy_er(&g, &h, r).unwrap());
}

#[test]
fn star_energy_monotone_over_dyadic_radii() {
    let g = MetricGraph::star(&[1.0, 1.0, 1.0], Kirchhoff).unwrap();
    let mut rng = ChaCha8Rng::seed_from_u64(99);
    let slopes: Vec<(f64, f64)> = (0..3).map(|_| (uniform(&mut rng) - 0.5, uniform(&mut rng) - 0.5)).collect();
    // Continuous at the centre, one kink per leg.
    let f = SampledFunction::from_fn(&g, 1e-4, |p| {
        let (a, b) = slopes[p.edge.0];
        if p.s < 0.5 { a * p.s } else { a * 0.5 + b * (p.s - 0.5) }
    })
    .unwrap();
    for r in [0.016, 0.008, 0.004] {
        assert!(subpartition_check(&g, &f, r, 1e-9).unwrap(), "r={r}");
    }
}

#[test]
fn kinked_function_on_interval_converges() {
    let g = MetricGraph::interval(1.0, Kirchhoff, Kirchhoff).unwrap();
    let f = SampledFunction::from_fn(&g, 6.25e-5, |p| (p.s - 0.5).abs()).unwrap();
    let study = convergence_study(&g, &f, &RADII).unwrap();
    let d = study.differences();
    assert!(d.windows(2).all(|w| w[1] < 0.55 * w[0]), "{d:?}");
    assert!((study.kappa - 2.0).abs() < 1e-3, "{}", study.kappa);
}
