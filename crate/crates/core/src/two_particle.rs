//! Two indistinguishable particles on a graph: the symmetric product
//! `M = G × G / (x, y) ~ (y, x)`, its heat kernel and heat trace, and the
//! small-time expansion `Z_M(t) ≈ a₋₁/t + a₋½/√t + a₀`.
//!
//! Region contributions are exact: coefficients live in `Q(√2)` with an
//! extra `1/π` part for the constant term.

use crate::error::{invalid, Error, Result};
use crate::graph::{EdgeIx, GraphPoint, MetricGraph, VertexCondition, VertexIx};
use crate::kernel::HeatKernel;
use crate::linalg::{lstsq, Matrix};
use crate::math::{exp, sqrt, PI};
use crate::quadrature::GraphRule;
use crate::spectral::{eigen, heat_trace_tail, EigenMode};
use alloc::vec;
use alloc::vec::Vec;
use core::ops::{Add, Mul, Neg, Sub};
use num_rational::Ratio;
use num_traits::Zero;

/// Unordered pair of points, stored with the smaller `(edge, s)` first.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SymPoint {
    a: GraphPoint,
    b: GraphPoint,
}

impl SymPoint {
    pub fn new(x1: GraphPoint, x2: GraphPoint) -> Self {
        if (x2.edge.0, x2.s) < (x1.edge.0, x1.s) {
            Self { a: x2, b: x1 }
        } else {
            Self { a: x1, b: x2 }
        }
    }

    pub fn first(&self) -> GraphPoint {
        self.a
    }

    pub fn second(&self) -> GraphPoint {
        self.b
    }
}

/// `p(x1,y1) p(x2,y2) + p(x2,y1) p(x1,y2)`.
pub fn kernel_two_particle<K: HeatKernel>(k: &K, t: f64, p: SymPoint, q: SymPoint) -> Result<f64> {
    let (x1, x2, y1, y2) = (p.a, p.b, q.a, q.b);
    Ok(k.value(t, x1, y1)? * k.value(t, x2, y2)? + k.value(t, x2, y1)? * k.value(t, x1, y2)?)
}

/// One heat-trace value with its estimated error.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TracePoint {
    pub t: f64,
    pub z: f64,
    pub error: f64,
}

fn trace_on_rule<K: HeatKernel>(k: &K, t: f64, rule: &GraphRule) -> Result<f64> {
    let n = rule.points.len();
    let w = &rule.weights;
    let mut diag = 0.0;
    let mut cross = 0.0;
    for i in 0..n {
        let pii = k.value(t, rule.points[i], rule.points[i])?;
        diag += w[i] * pii;
        cross += w[i] * w[i] * pii * pii;
        for j in i + 1..n {
            let pij = k.value(t, rule.points[i], rule.points[j])?;
            cross += 2.0 * w[i] * w[j] * pij * pij;
        }
    }
    Ok(0.5 * (diag * diag + cross))
}

/// `∫_M p_M(t, z, z) dz` by the tensor Simpson rule on `G × G` (halved for
/// the quotient). The error estimate compares against twice the step.
pub fn trace_two_particle<K: HeatKernel>(k: &K, t: f64, step: f64) -> Result<TracePoint> {
    if !(t > 0.0) {
        return Err(invalid("t", "time must be positive"));
    }
    let fine = GraphRule::new(k.graph(), step)?;
    let coarse = GraphRule::new(k.graph(), 2.0 * step)?;
    let z = trace_on_rule(k, t, &fine)?;
    let error = (z - trace_on_rule(k, t, &coarse)?).abs();
    if error > 0.01 * z {
        return Err(Error::StepTooCoarse { error, value: z });
    }
    Ok(TracePoint { t, z, error })
}

/// `Σ_{m ≤ n} exp(-(λ_m + λ_n) t)`.
pub fn eigen_pair_trace(lambdas: &[f64], t: f64) -> f64 {
    let mut sum = 0.0;
    for (i, &a) in lambdas.iter().enumerate() {
        for &b in &lambdas[i..] {
            sum += exp(-(a + b) * t);
        }
    }
    sum
}

/// `(Z(t)² + Z(2t)) / 2`.
pub fn symmetrized_trace(lambdas: &[f64], t: f64) -> f64 {
    let z1: f64 = lambdas.iter().map(|l| exp(-l * t)).sum();
    let z2: f64 = lambdas.iter().map(|l| exp(-2.0 * l * t)).sum();
    0.5 * (z1 * z1 + z2)
}

/// Heat traces of `M` sampled on a time grid.
#[derive(Debug, Clone, PartialEq)]
pub struct TraceSeries {
    pub t: Vec<f64>,
    pub z: Vec<f64>,
    /// Quadrature step, zero for eigenvalue sums.
    pub step: f64,
    pub error: Vec<f64>,
}

/// Trace series from eigenvalue pair sums, with enough modes that the
/// truncation error at the smallest time is below `tol` relative.
pub fn trace_series_eigen(g: &MetricGraph, t_grid: &[f64], tol: f64) -> Result<(TraceSeries, Vec<EigenMode>)> {
    let t_min = t_grid.iter().cloned().fold(f64::INFINITY, f64::min);
    if !(t_min > 0.0) {
        return Err(invalid("t_grid", "times must be positive"));
    }
    let mut k_max = sqrt(-crate::math::ln(tol * 1e-3) / t_min);
    let modes = loop {
        let modes = eigen(g, k_max)?;
        let z: f64 = modes.iter().map(|m| exp(-m.lambda() * t_min)).sum();
        if heat_trace_tail(g, k_max, t_min) <= tol * 1e-2 * z {
            break modes;
        }
        k_max *= 1.25;
    };
    let lambdas: Vec<f64> = modes.iter().map(|m| m.lambda()).collect();
    let mut series = TraceSeries { t: t_grid.to_vec(), z: Vec::new(), step: 0.0, error: Vec::new() };
    for &t in t_grid {
        let z1: f64 = lambdas.iter().map(|l| exp(-l * t)).sum();
        let tail = heat_trace_tail(g, k_max, t);
        let tail2 = heat_trace_tail(g, k_max, 2.0 * t);
        series.z.push(eigen_pair_trace(&lambdas, t));
        series.error.push(2.0 * z1 * tail + tail * tail + tail2);
    }
    Ok((series, modes))
}

/// Coefficients of `a₋₁/t + a₋½/√t + a₀`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct AsymptoticFit {
    pub a_minus1: f64,
    pub a_half: f64,
    pub a_0: f64,
    /// Root-mean-square relative residual; zero for predictions.
    pub residual: f64,
}

impl AsymptoticFit {
    pub fn eval(&self, t: f64) -> f64 {
        self.a_minus1 / t + self.a_half / sqrt(t) + self.a_0
    }

    /// Largest relative deviation of the three coefficients from `other`.
    pub fn max_rel_error(&self, other: &AsymptoticFit) -> f64 {
        [
            (self.a_minus1, other.a_minus1),
            (self.a_half, other.a_half),
            (self.a_0, other.a_0),
        ]
        .iter()
        .map(|&(a, b)| if b == 0.0 { a.abs() } else { ((a - b) / b).abs() })
        .fold(0.0, f64::max)
    }
}

/// Least squares of `Z(t)` against `{1/t, 1/√t, 1}`, weighted by `1/Z`.
pub fn asymptotic_fit(series: &TraceSeries) -> Result<AsymptoticFit> {
    let n = series.t.len();
    if n < 6 {
        return Err(invalid("series", "needs at least 6 times"));
    }
    for (z, e) in series.z.iter().zip(&series.error) {
        if !(*z > 0.0) || *e > 1e-3 * z {
            return Err(invalid("series", "quadrature error above 0.1% of Z"));
        }
    }
    let mut a = Matrix::zeros(n, 3);
    let mut b = vec![0.0; n];
    for i in 0..n {
        let (t, z) = (series.t[i], series.z[i]);
        a[(i, 0)] = 1.0 / (t * z);
        a[(i, 1)] = 1.0 / (sqrt(t) * z);
        a[(i, 2)] = 1.0 / z;
        b[i] = 1.0;
    }
    let (x, cond) = lstsq(&a, &b);
    if !(cond < 1e12) {
        return Err(Error::IllConditioned(alloc::format!("fit condition number {cond:e}")));
    }
    let fit = AsymptoticFit { a_minus1: x[0], a_half: x[1], a_0: x[2], residual: 0.0 };
    let rms = sqrt(series.t.iter().zip(&series.z).map(|(&t, &z)| {
        let r = (fit.eval(t) - z) / z;
        r * r
    }).sum::<f64>() / n as f64);
    Ok(AsymptoticFit { residual: rms, ..fit })
}

fn require_kirchhoff(g: &MetricGraph) -> Result<()> {
    match g.vertices().find(|&v| g.condition(v) != VertexCondition::Kirchhoff) {
        Some(v) => Err(invalid("graph", alloc::format!("vertex {} is not Kirchhoff", g.vertex_id(v)))),
        None => Ok(()),
    }
}

/// The expansion claimed for `M`, evaluated in floating point.
pub fn predicted_coefficients(g: &MetricGraph) -> Result<AsymptoticFit> {
    Ok(predicted_exact(g)?.to_fit())
}

// ---------------------------------------------------------------------------
// Exact arithmetic

pub type Q = Ratio<i128>;

/// `r + s√2` with rational `r, s`.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Q2 {
    pub r: Q,
    pub s: Q,
}

impl Q2 {
    pub fn rational(r: Q) -> Self {
        Self { r, s: Q::zero() }
    }

    pub fn zero() -> Self {
        Self::rational(Q::zero())
    }

    pub fn to_f64(self) -> f64 {
        to_f64(self.r) + to_f64(self.s) * core::f64::consts::SQRT_2
    }
}

impl Add for Q2 {
    type Output = Q2;
    fn add(self, o: Q2) -> Q2 {
        Q2 { r: self.r + o.r, s: self.s + o.s }
    }
}

impl Sub for Q2 {
    type Output = Q2;
    fn sub(self, o: Q2) -> Q2 {
        Q2 { r: self.r - o.r, s: self.s - o.s }
    }
}

impl Neg for Q2 {
    type Output = Q2;
    fn neg(self) -> Q2 {
        Q2 { r: -self.r, s: -self.s }
    }
}

impl Mul for Q2 {
    type Output = Q2;
    fn mul(self, o: Q2) -> Q2 {
        let two = Q::from_integer(2);
        Q2 { r: self.r * o.r + two * self.s * o.s, s: self.r * o.s + self.s * o.r }
    }
}

impl Mul<Q> for Q2 {
    type Output = Q2;
    fn mul(self, o: Q) -> Q2 {
        Q2 { r: self.r * o, s: self.s * o }
    }
}

fn to_f64(x: Q) -> f64 {
    *x.numer() as f64 / *x.denom() as f64
}

fn q(n: i128, d: i128) -> Q {
    Q::new(n, d)
}

fn sqrt2() -> Q2 {
    Q2 { r: Q::zero(), s: Q::from_integer(1) }
}

/// The simplest rational that rounds to `x`.
pub fn exact(x: f64) -> Result<Q> {
    let r: Option<Q> = Ratio::approximate_float(x);
    match r {
        Some(r) if to_f64(r) == x => Ok(r),
        _ => Err(invalid("length", alloc::format!("{x} has no small exact rational form"))),
    }
}

/// Exact coefficients: `a₋₁ = vol/(4π)`, `a₋½ = half/(8√π)`,
/// `a₀ = rational + inv_pi/π`.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct ExactCoefficients {
    pub vol: Q2,
    pub half: Q2,
    pub rational: Q2,
    pub inv_pi: Q2,
}

impl ExactCoefficients {
    pub fn zero() -> Self {
        Self { vol: Q2::zero(), half: Q2::zero(), rational: Q2::zero(), inv_pi: Q2::zero() }
    }

    pub fn to_fit(&self) -> AsymptoticFit {
        AsymptoticFit {
            a_minus1: self.vol.to_f64() / (4.0 * PI),
            a_half: self.half.to_f64() / (8.0 * sqrt(PI)),
            a_0: self.rational.to_f64() + self.inv_pi.to_f64() / PI,
            residual: 0.0,
        }
    }

    /// The truncated expansion at time `t`.
    pub fn eval(&self, t: f64) -> f64 {
        self.to_fit().eval(t)
    }
}

impl Add for ExactCoefficients {
    type Output = ExactCoefficients;
    fn add(self, o: Self) -> Self {
        Self { vol: self.vol + o.vol, half: self.half + o.half, rational: self.rational + o.rational, inv_pi: self.inv_pi + o.inv_pi }
    }
}

/// Exact form of [`predicted_coefficients`], with `Σ_{v≠v′}` over unordered
/// pairs.
pub fn predicted_exact(g: &MetricGraph) -> Result<ExactCoefficients> {
    require_kirchhoff(g)?;
    let mut l = Q::zero();
    for e in g.edges() {
        l += exact(g.length(e))?;
    }
    let chi = Q::from_integer(g.vertex_count() as i128 - g.edge_count() as i128);
    let degs: Vec<i128> = g.vertices().map(|v| g.degree(v) as i128).collect();
    let mut a0 = Q::zero();
    for (i, &d) in degs.iter().enumerate() {
        for &d2 in &degs[i + 1..] {
            a0 += q((2 - d) * (2 - d2), 16);
        }
        a0 += q(3, 8) - q(d, 4) + q(d * d, 32);
    }
    Ok(ExactCoefficients {
        vol: Q2::rational(l * l / 2),
        half: Q2::rational(l * chi * 2) + sqrt2() * l,
        rational: Q2::rational(a0),
        inv_pi: Q2::zero(),
    })
}

/// Pieces of the ε-decomposition of `M`. `N(v)` is the ε-star around `v`
/// and the middle of edge `e` has length `l_e − 2ε`.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Region {
    /// Particles on the middles of two distinct edges.
    A(EdgeIx, EdgeIx),
    /// Both particles on one edge, away from its ends except near each other.
    B(EdgeIx),
    /// One particle in `N(v)`, the other on the middle of an edge.
    C(VertexIx, EdgeIx),
    /// Particles near two distinct vertices.
    D(VertexIx, VertexIx),
    /// Both particles near the same vertex.
    E(VertexIx),
}

/// Diagonal scattering entries of a Kirchhoff vertex of degree `d`.
fn sigma_diag(d: i128) -> Q {
    q(2 - d, d)
}

/// Exact contribution of one region to the expansion; terms that decay
/// like `exp(−c/t)` are dropped.
pub fn region_contributions(g: &MetricGraph, region: Region, eps: f64) -> Result<ExactCoefficients> {
    require_kirchhoff(g)?;
    if !(eps > 0.0 && eps < g.min_length() / 4.0) {
        return Err(invalid("eps", "must lie in (0, min length / 4)"));
    }
    let e = exact(eps)?;
    let e2 = e * e;
    let middle = |x: EdgeIx| -> Result<Q> { Ok(exact(g.length(x))? - e * 2) };
    let zero = Q2::zero();
    let r = Q2::rational;
    let out = match region {
        Region::A(a, b) => {
            if a == b {
                return Err(invalid("region", "A needs two distinct edges"));
            }
            ExactCoefficients { vol: r(middle(a)? * middle(b)?), half: zero, rational: zero, inv_pi: zero }
        }
        Region::B(x) => {
            let m = middle(x)?;
            let l = exact(g.length(x))?;
            ExactCoefficients {
                vol: r(m * m / 2) + (r(Q::from_integer(3)) - sqrt2() * Q::from_integer(2)) * e2,
                half: sqrt2() * l - r(e * 2),
                rational: zero,
                inv_pi: r(q(-1, 2)),
            }
        }
        Region::C(v, x) => {
            let d = g.degree(v) as i128;
            let m = middle(x)?;
            let legs = g.incident(v).iter().filter(|h| h.edge == x).count() as i128;
            ExactCoefficients {
                vol: r(Q::from_integer(d) * e * m),
                half: r(m * sigma_diag(d) * d),
                rational: zero,
                inv_pi: r(q(legs, 4)),
            }
        }
        Region::D(v, w) => {
            if v == w {
                return Err(invalid("region", "D needs two distinct vertices"));
            }
            let (d, d2) = (g.degree(v) as i128, g.degree(w) as i128);
            let (s, s2) = (sigma_diag(d) * d, sigma_diag(d2) * d2);
            ExactCoefficients {
                vol: r(Q::from_integer(d * d2) * e2),
                half: r(e * (s * d2 + s2 * d)),
                rational: r(s * s2 / 16),
                inv_pi: zero,
            }
        }
        Region::E(v) => {
            let d = g.degree(v) as i128;
            let sd = sigma_diag(d);
            let off = q(2, d);
            let pairs = d * (d - 1) / 2;
            let dq = Q::from_integer(d);
            let pq = Q::from_integer(pairs);
            let one = Q::from_integer(1);
            ExactCoefficients {
                vol: (sqrt2() - r(one)) * (dq * e2) + r(pq * e2),
                half: r(e * ((sd + one) * dq + sd * 2 * pq)),
                rational: r((sd / 8 + sd * sd / 32) * dq + sd * sd * pq / 16),
                inv_pi: r((q(-1, 8) + sd * sd / 8) * dq + off * off * pq / 4),
            }
        }
    };
    Ok(out)
}

/// Every region of the ε-decomposition, each unordered pair once.
pub fn decomposition(g: &MetricGraph) -> Vec<Region> {
    let edges: Vec<EdgeIx> = g.edges().collect();
    let verts: Vec<VertexIx> = g.vertices().collect();
    let mut out = Vec::new();
    for (i, &a) in edges.iter().enumerate() {
        for &b in &edges[i + 1..] {
            out.push(Region::A(a, b));
        }
        out.push(Region::B(a));
    }
    for &v in &verts {
        for &x in &edges {
            out.push(Region::C(v, x));
        }
    }
    for (i, &v) in verts.iter().enumerate() {
        for &w in &verts[i + 1..] {
            out.push(Region::D(v, w));
        }
        out.push(Region::E(v));
    }
    out
}

/// Sum of [`region_contributions`] over the whole decomposition.
pub fn region_total(g: &MetricGraph, eps: f64) -> Result<ExactCoefficients> {
    decomposition(g)
        .into_iter()
        .try_fold(ExactCoefficients::zero(), |acc, r| Ok(acc + region_contributions(g, r, eps)?))
}
