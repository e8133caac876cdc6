//! Independent spectral oracle: eigenpairs of the graph Laplacian from the
//! secular (vertex-condition) matrix, the spectral heat kernel, and vertex
//! residual checks.
//!
//! On edge `e` a mode is `A cos(ks) + B sin(ks)` (affine `a + b s` when
//! `k = 0`). Stacking continuity, Kirchhoff and Dirichlet rows at every
//! vertex gives a square `2|E| × 2|E|` matrix `S(k)`; eigenvalues are the
//! `k` where `S(k)` is singular and the multiplicity is its nullity.

use crate::error::{invalid, Error, Result};
use crate::graph::{GraphPoint, HalfEdge, MetricGraph, Side, VertexCondition, VertexIx};
use crate::kernel::{HeatKernel, KernelEval};
use crate::linalg::{det, svd, Matrix};
use crate::math::{cos, erfc, exp, floor, ln, sin, sqrt, PI};
use alloc::vec::Vec;

/// Singular values below this fraction of the largest count as zero.
pub const RANK_TOL: f64 = 1e-8;

/// An L²-normalized eigenfunction with `λ = k²`.
#[derive(Debug, Clone, PartialEq)]
pub struct EigenMode {
    pub k: f64,
    /// Per-edge `(A, B)`; for `k = 0` these are the affine `(a, b)`.
    pub coeffs: Vec<(f64, f64)>,
}

impl EigenMode {
    pub fn lambda(&self) -> f64 {
        self.k * self.k
    }

    /// Value on edge `e` at arclength `s`; `s` may lie slightly outside the
    /// edge (the formula extends analytically).
    pub fn value_at(&self, e: usize, s: f64) -> f64 {
        let (a, b) = self.coeffs[e];
        if self.k == 0.0 {
            a + b * s
        } else {
            a * cos(self.k * s) + b * sin(self.k * s)
        }
    }

    pub fn derivative_at(&self, e: usize, s: f64) -> f64 {
        let (a, b) = self.coeffs[e];
        if self.k == 0.0 {
            b
        } else {
            self.k * (-a * sin(self.k * s) + b * cos(self.k * s))
        }
    }

    pub fn value(&self, p: GraphPoint) -> f64 {
        self.value_at(p.edge.0, p.s)
    }

    fn end_s(g: &MetricGraph, h: HalfEdge) -> f64 {
        match h.side {
            Side::U => 0.0,
            Side::V => g.length(h.edge),
        }
    }

    /// Derivative pointing from the vertex into the edge.
    pub fn outward_derivative(&self, g: &MetricGraph, h: HalfEdge) -> f64 {
        let d = self.derivative_at(h.edge.0, Self::end_s(g, h));
        match h.side {
            Side::U => d,
            Side::V => -d,
        }
    }

    /// Same as [`EigenMode::outward_derivative`] by a central difference of
    /// step `h` on the analytic continuation of the edge formula.
    pub fn outward_derivative_fd(&self, g: &MetricGraph, he: HalfEdge, h: f64) -> f64 {
        let s = Self::end_s(g, he);
        let d = (self.value_at(he.edge.0, s + h) - self.value_at(he.edge.0, s - h)) / (2.0 * h);
        match he.side {
            Side::U => d,
            Side::V => -d,
        }
    }
}

fn value_row(g: &MetricGraph, k: f64, h: HalfEdge) -> [f64; 2] {
    let l = g.length(h.edge);
    match (h.side, k == 0.0) {
        (Side::U, _) => [1.0, 0.0],
        (Side::V, true) => [1.0, l],
        (Side::V, false) => [cos(k * l), sin(k * l)],
    }
}

// Outward derivative divided by k (k > 0) so entries stay bounded.
fn flux_row(g: &MetricGraph, k: f64, h: HalfEdge) -> [f64; 2] {
    let l = g.length(h.edge);
    match (h.side, k == 0.0) {
        (Side::U, _) => [0.0, 1.0],
        (Side::V, true) => [0.0, -1.0],
        (Side::V, false) => [sin(k * l), -cos(k * l)],
    }
}

/// The secular matrix `S(k)`.
pub fn secular_matrix(g: &MetricGraph, k: f64) -> Matrix {
    let n = 2 * g.edge_count();
    let mut m = Matrix::zeros(n, n);
    let mut row = 0;
    let put = |m: &mut Matrix, row: usize, h: HalfEdge, c: [f64; 2], sign: f64| {
        m[(row, 2 * h.edge.0)] += sign * c[0];
        m[(row, 2 * h.edge.0 + 1)] += sign * c[1];
    };
    for v in g.vertices() {
        let ends = g.incident(v);
        match g.condition(v) {
            VertexCondition::Dirichlet => {
                for &h in ends {
                    put(&mut m, row, h, value_row(g, k, h), 1.0);
                    row += 1;
                }
            }
            VertexCondition::Kirchhoff => {
                for &h in &ends[1..] {
                    put(&mut m, row, ends[0], value_row(g, k, ends[0]), 1.0);
                    put(&mut m, row, h, value_row(g, k, h), -1.0);
                    row += 1;
                }
                for &h in ends {
                    put(&mut m, row, h, flux_row(g, k, h), 1.0);
                }
                row += 1;
            }
        }
    }
    debug_assert_eq!(row, n);
    m
}

fn sigma_min(g: &MetricGraph, k: f64) -> f64 {
    let s = svd(&secular_matrix(g, k));
    s.smallest() / s.largest()
}

fn inner_product(g: &MetricGraph, k: f64, f: &[(f64, f64)], h: &[(f64, f64)]) -> f64 {
    g.edges()
        .map(|e| {
            let l = g.length(e);
            let ((a, b), (c, d)) = (f[e.0], h[e.0]);
            if k == 0.0 {
                a * c * l + (a * d + b * c) * l * l / 2.0 + b * d * l * l * l / 3.0
            } else {
                let s2 = sin(2.0 * k * l) / (4.0 * k);
                let cc = l / 2.0 + s2;
                let ss = l / 2.0 - s2;
                let sc = sin(k * l) * sin(k * l) / (2.0 * k);
                a * c * cc + b * d * ss + (a * d + b * c) * sc
            }
        })
        .sum()
}

fn modes_at(g: &MetricGraph, k: f64) -> Vec<EigenMode> {
    let dec = svd(&secular_matrix(g, k));
    let null = dec.null_space(RANK_TOL);
    let mut out: Vec<Vec<(f64, f64)>> = Vec::new();
    for v in null {
        let mut c: Vec<(f64, f64)> = (0..g.edge_count()).map(|e| (v[2 * e], v[2 * e + 1])).collect();
        for prev in &out {
            let p = inner_product(g, k, &c, prev);
            for (ci, pi) in c.iter_mut().zip(prev) {
                ci.0 -= p * pi.0;
                ci.1 -= p * pi.1;
            }
        }
        let norm = sqrt(inner_product(g, k, &c, &c));
        if norm > 1e-12 {
            for ci in c.iter_mut() {
                ci.0 /= norm;
                ci.1 /= norm;
            }
            // Fix the sign so results are reproducible.
            if let Some(first) = c.iter().flat_map(|&(a, b)| [a, b]).find(|x| x.abs() > 1e-9) {
                if first < 0.0 {
                    for ci in c.iter_mut() {
                        ci.0 = -ci.0;
                        ci.1 = -ci.1;
                    }
                }
            }
            out.push(c);
        }
    }
    out.into_iter().map(|coeffs| EigenMode { k, coeffs }).collect()
}

// Golden-section minimization of a V-shaped function.
fn refine_min(g: &MetricGraph, mut lo: f64, mut hi: f64) -> f64 {
    let r = 0.5 * (sqrt(5.0) - 1.0);
    let mut a = hi - r * (hi - lo);
    let mut b = lo + r * (hi - lo);
    let (mut fa, mut fb) = (sigma_min(g, a), sigma_min(g, b));
    while hi - lo > 1e-13 * hi.max(1.0) {
        if fa <= fb {
            hi = b;
            b = a;
            fb = fa;
            a = hi - r * (hi - lo);
            fa = sigma_min(g, a);
        } else {
            lo = a;
            a = b;
            fa = fb;
            b = lo + r * (hi - lo);
            fb = sigma_min(g, b);
        }
    }
    if fa <= fb { a } else { b }
}

fn bisect_det(g: &MetricGraph, mut lo: f64, mut hi: f64) -> Result<f64> {
    let mut flo = det(&secular_matrix(g, lo));
    let fhi = det(&secular_matrix(g, hi));
    if flo.signum() == fhi.signum() {
        return Err(Error::BracketFailure { lo, hi });
    }
    while hi - lo > 1e-13 * hi.max(1.0) {
        let mid = 0.5 * (lo + hi);
        let fm = det(&secular_matrix(g, mid));
        if fm == 0.0 {
            return Ok(mid);
        }
        if fm.signum() == flo.signum() {
            lo = mid;
            flo = fm;
        } else {
            hi = mid;
        }
    }
    Ok(0.5 * (lo + hi))
}

/// Rigorous bracket for the number of eigenvalues `k ≤ k_max`, from
/// decoupling every edge with Dirichlet (lower) or Neumann (upper) ends and
/// the codimension of the decoupled Dirichlet form domain.
pub fn count_bounds(g: &MetricGraph, k_max: f64) -> (usize, usize) {
    let kk = k_max * (1.0 + 1e-12);
    let lower: usize = g.edges().map(|e| floor(kk * g.length(e) / PI) as usize).sum();
    let kirchhoff = g.vertices().filter(|&v| g.condition(v) == VertexCondition::Kirchhoff).count();
    let neumann: usize = g.edges().map(|e| floor(kk * g.length(e) / PI) as usize + 1).sum();
    (lower, neumann.min(lower + kirchhoff))
}

/// Weyl estimate `N(k) ≈ L k / π + Σ_v tr σ^v / 4`.
pub fn weyl_estimate(g: &MetricGraph, k: f64) -> f64 {
    let traces: f64 = g.vertices().map(|v| g.scattering_matrix(v).map(|s| s.trace()).unwrap_or(0.0)).sum();
    g.total_length() * k / PI + traces / 4.0
}

/// All eigenmodes with `k ≤ k_max`, sorted by `k`.
pub fn eigen(g: &MetricGraph, k_max: f64) -> Result<Vec<EigenMode>> {
    if !(k_max > 0.0 && k_max.is_finite()) {
        return Err(invalid("k_max", "must be positive"));
    }
    let mut modes = modes_at(g, 0.0);

    let step = (PI / (8.0 * g.max_length())).min(PI / (8.0 * g.total_length()));
    let n = crate::math::ceil(k_max / step) as usize + 2;
    let ks: Vec<f64> = (0..=n).map(|i| if i == 0 { 1e-6 * step } else { i as f64 * step }).collect();
    let mins: Vec<f64> = ks.iter().map(|&k| sigma_min(g, k)).collect();
    let dets: Vec<f64> = ks.iter().map(|&k| det(&secular_matrix(g, k))).collect();

    let mut roots: Vec<f64> = Vec::new();
    for i in 1..n {
        if mins[i] <= mins[i - 1] && mins[i] <= mins[i + 1] {
            let k = refine_min(g, ks[i - 1], ks[i + 1]);
            if sigma_min(g, k) <= RANK_TOL {
                roots.push(k);
            }
        }
    }
    // Odd-multiplicity roots that the minimum scan merged with a neighbour.
    for i in 1..n {
        if dets[i].signum() != dets[i + 1].signum() {
            let covered = roots.iter().any(|&r| r >= ks[i] - 1e-12 && r <= ks[i + 1] + 1e-12);
            if !covered {
                let k = bisect_det(g, ks[i], ks[i + 1])?;
                if sigma_min(g, k) <= RANK_TOL {
                    roots.push(k);
                }
            }
        }
    }
    roots.sort_by(f64::total_cmp);
    roots.dedup_by(|a, b| (*a - *b).abs() < 1e-9);
    for k in roots.into_iter().filter(|&k| k <= k_max * (1.0 + 1e-12)) {
        modes.extend(modes_at(g, k));
    }

    let (lower, upper) = count_bounds(g, k_max);
    if modes.len() < lower || modes.len() > upper {
        return Err(Error::MissedEigenvalue { k_max, found: modes.len(), lower, upper });
    }
    Ok(modes)
}

/// Largest continuity jump of a mode at vertex `v`.
pub fn continuity_residual(g: &MetricGraph, mode: &EigenMode, v: VertexIx) -> f64 {
    let vals: Vec<f64> = g
        .incident(v)
        .iter()
        .map(|&h| mode.value_at(h.edge.0, EigenMode::end_s(g, h)))
        .collect();
    match g.condition(v) {
        VertexCondition::Dirichlet => vals.iter().map(|x| x.abs()).fold(0.0, f64::max),
        VertexCondition::Kirchhoff => vals.iter().map(|x| (x - vals[0]).abs()).fold(0.0, f64::max),
    }
}

/// Kirchhoff residual `|Σ outward derivatives|` at a vertex, analytic and by
/// central differences.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct KirchhoffResidual {
    pub analytic: f64,
    pub finite_difference: f64,
}

pub fn kirchhoff_residual(g: &MetricGraph, mode: &EigenMode, v: VertexIx, h: f64) -> KirchhoffResidual {
    let ends = g.incident(v);
    let analytic: f64 = ends.iter().map(|&he| mode.outward_derivative(g, he)).sum();
    let fd: f64 = ends.iter().map(|&he| mode.outward_derivative_fd(g, he, h)).sum();
    KirchhoffResidual { analytic: analytic.abs(), finite_difference: fd.abs() }
}

/// One row of the eigen report: a distinct eigenvalue and its residuals.
#[derive(Debug, Clone, PartialEq)]
pub struct EigenRow {
    pub k: f64,
    pub lambda: f64,
    pub multiplicity: usize,
    pub continuity: f64,
    pub kirchhoff: f64,
}

pub fn eigen_report(g: &MetricGraph, modes: &[EigenMode]) -> Vec<EigenRow> {
    let mut rows: Vec<EigenRow> = Vec::new();
    for m in modes {
        let cont = g.vertices().map(|v| continuity_residual(g, m, v)).fold(0.0, f64::max);
        let kir = g
            .vertices()
            .filter(|&v| g.condition(v) == VertexCondition::Kirchhoff)
            .map(|v| kirchhoff_residual(g, m, v, 1e-6).analytic)
            .fold(0.0, f64::max);
        match rows.last_mut() {
            Some(r) if r.k == m.k => {
                r.multiplicity += 1;
                r.continuity = r.continuity.max(cont);
                r.kirchhoff = r.kirchhoff.max(kir);
            }
            _ => rows.push(EigenRow { k: m.k, lambda: m.lambda(), multiplicity: 1, continuity: cont, kirchhoff: kir }),
        }
    }
    rows
}

/// Frequency cutoff needed for a spectral sum at time `t` to reach `tol`.
pub fn required_k(t: f64, tol: f64) -> f64 {
    sqrt(ln(1.0 / tol).max(1.0) / t) * 1.2
}

/// Bound on `Σ_{k_n > k_max} exp(-k_n² t)` from the eigenvalue counting
/// bounds.
pub fn heat_trace_tail(g: &MetricGraph, k_max: f64, t: f64) -> f64 {
    let e = g.edge_count() as f64;
    2.0 * e * exp(-k_max * k_max * t) + g.total_length() / PI * 0.5 * sqrt(PI / t) * erfc(k_max * sqrt(t))
}

/// Heat kernel `Σ_n exp(-k_n² t) φ_n(x) φ_n(y)` over precomputed modes.
#[derive(Debug, Clone)]
pub struct SpectralKernel<'g> {
    graph: &'g MetricGraph,
    modes: Vec<EigenMode>,
    k_max: f64,
    tol: f64,
}

impl<'g> SpectralKernel<'g> {
    pub fn new(graph: &'g MetricGraph, k_max: f64, tol: f64) -> Result<Self> {
        let modes = eigen(graph, k_max)?;
        Ok(Self { graph, modes, k_max, tol })
    }

    /// Enough modes for tolerance `tol` at every time `t ≥ t_min`.
    pub fn for_time(graph: &'g MetricGraph, t_min: f64, tol: f64) -> Result<Self> {
        Self::new(graph, required_k(t_min, tol), tol)
    }

    pub fn from_modes(graph: &'g MetricGraph, modes: Vec<EigenMode>, k_max: f64, tol: f64) -> Self {
        Self { graph, modes, k_max, tol }
    }

    pub fn modes(&self) -> &[EigenMode] {
        &self.modes
    }

    pub fn k_max(&self) -> f64 {
        self.k_max
    }

    /// Rigorous bound on the omitted modes `k > k_max` at time `t`.
    pub fn tail(&self, t: f64) -> f64 {
        let g = self.graph;
        let kmax = self.k_max;
        let lmin = g.min_length();
        // Amplitude bound of a normalized mode on its shortest edge.
        let amp2 = if kmax * lmin > 2.0 { 2.0 / (lmin - 1.0 / kmax) } else { f64::INFINITY };
        let e = g.edge_count() as f64;
        let f = exp(-kmax * kmax * t);
        let integral = 0.5 * sqrt(PI / t) * erfc(kmax * sqrt(t));
        amp2 * (2.0 * e * f + g.total_length() / PI * integral)
    }

    /// Sum `Σ e^{-λ t} φ(x) φ(y)` without tolerance checks.
    pub fn sum(&self, t: f64, x: GraphPoint, y: GraphPoint) -> f64 {
        self.modes.iter().map(|m| exp(-m.lambda() * t) * m.value(x) * m.value(y)).sum()
    }

    /// Heat trace `Σ e^{-λ t}` over the computed modes.
    pub fn trace(&self, t: f64) -> f64 {
        self.modes.iter().map(|m| exp(-m.lambda() * t)).sum()
    }
}

impl HeatKernel for SpectralKernel<'_> {
    fn graph(&self) -> &MetricGraph {
        self.graph
    }

    fn eval(&self, t: f64, x: GraphPoint, y: GraphPoint) -> Result<KernelEval> {
        if !(t > 0.0) {
            return Err(invalid("t", "time must be positive"));
        }
        self.graph.check_point(x)?;
        self.graph.check_point(y)?;
        let tail = self.tail(t);
        if tail > self.tol {
            return Err(Error::InsufficientModes { k_max: self.k_max, needed: required_k(t, self.tol) });
        }
        Ok(KernelEval { t, x, y, value: self.sum(t, x, y), tail_bound: tail })
    }
}

/// One-shot spectral evaluation over given modes.
pub fn kernel_spectral(
    g: &MetricGraph,
    t: f64,
    x: GraphPoint,
    y: GraphPoint,
    modes: &[EigenMode],
    k_max: f64,
    tol: f64,
) -> Result<KernelEval> {
    SpectralKernel::from_modes(g, modes.to_vec(), k_max, tol).eval(t, x, y)
}

/// Gram matrix of the modes under the exact L² inner product.
pub fn gram(g: &MetricGraph, modes: &[EigenMode]) -> Matrix {
    let n = modes.len();
    let mut m = Matrix::zeros(n, n);
    for i in 0..n {
        for j in 0..n {
            m[(i, j)] = if modes[i].k == modes[j].k {
                inner_product(g, modes[i].k, &modes[i].coeffs, &modes[j].coeffs)
            } else {
                mixed_inner(g, &modes[i], &modes[j])
            };
        }
    }
    m
}

// ∫ f g for modes of different frequency, by Simpson on each edge.
fn mixed_inner(g: &MetricGraph, a: &EigenMode, b: &EigenMode) -> f64 {
    g.edges()
        .map(|e| {
            let l = g.length(e);
            let step = l / (64.0 * (1.0 + (a.k + b.k) * l)).max(1.0);
            crate::quadrature::simpson(|s| a.value_at(e.0, s) * b.value_at(e.0, s), 0.0, l, step)
        })
        .sum()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::graph::{EdgeIx, VertexCondition::*};

    fn ks(modes: &[EigenMode]) -> Vec<f64> {
        modes.iter().map(|m| m.k).collect()
    }

    #[test]
    fn neumann_interval_spectrum() {
        let g = MetricGraph::interval(1.0, Kirchhoff, Kirchhoff).unwrap();
        let m = eigen(&g, 10.0).unwrap();
        let k = ks(&m);
        assert_eq!(k.len(), 4);
        assert_eq!(k[0], 0.0);
        for n in 1..4 {
            assert!((k[n] - n as f64 * PI).abs() < 1e-11);
        }
        assert!((m[1].lambda() - PI * PI).abs() < 1e-9);
    }

    #[test]
    fn dirichlet_interval_has_no_zero_mode() {
        let g = MetricGraph::interval(1.0, Dirichlet, Dirichlet).unwrap();
        let k = ks(&eigen(&g, 10.0).unwrap());
        assert_eq!(k.len(), 3);
        assert!((k[0] - PI).abs() < 1e-11);
    }

    #[test]
    fn equilateral_star_multiplicities() {
        let g = MetricGraph::star(&[1.0, 1.0, 1.0], Kirchhoff).unwrap();
        let m = eigen(&g, 10.0).unwrap();
        assert!((m.len() as f64 - (30.0 / PI + 1.0)).abs() <= 1.0);
        let rows = eigen_report(&g, &m);
        let double = rows.iter().find(|r| (r.k - PI / 2.0).abs() < 1e-10).unwrap();
        assert_eq!(double.multiplicity, 2);
        for r in &rows {
            assert!(r.continuity < 1e-10 && r.kirchhoff < 1e-8, "{r:?}");
        }
    }

    #[test]
    fn perturbed_mode_violates_kirchhoff() {
        let g = MetricGraph::star(&[1.0, 1.0, 1.0], Kirchhoff).unwrap();
        let m = eigen(&g, 5.0).unwrap();
        let mut bad = m[2].clone();
        let r0 = kirchhoff_residual(&g, &bad, VertexIx(0), 1e-6);
        assert!(r0.analytic < 1e-8);
        bad.coeffs[0].1 += 0.01;
        assert!(kirchhoff_residual(&g, &bad, VertexIx(0), 1e-6).analytic > 1e-3);
    }

    #[test]
    fn neumann_end_has_zero_derivative() {
        let g = MetricGraph::interval(1.0, Kirchhoff, Kirchhoff).unwrap();
        for m in eigen(&g, 12.0).unwrap() {
            let r = kirchhoff_residual(&g, &m, VertexIx(0), 1e-6);
            assert!(r.analytic < 1e-12);
        }
    }

    #[test]
    fn spectral_kernel_limits() {
        let g = MetricGraph::interval(1.0, Kirchhoff, Kirchhoff).unwrap();
        let k = SpectralKernel::for_time(&g, 0.05, 1e-12).unwrap();
        let x = GraphPoint::new(EdgeIx(0), 0.5);
        let v = k.eval(0.05, x, x).unwrap();
        assert!((v.value - 1.278566).abs() < 1e-6);
        assert!((k.eval(10.0, x, x).unwrap().value - 1.0).abs() < 1e-12);
        assert!(matches!(k.eval(1e-4, x, x), Err(Error::InsufficientModes { .. })));
    }
}
