//! Killed kernels on subdomains, the first-exit decomposition of the heat
//! kernel, exponential decay bounds, and locality certificates comparing
//! two graphs that agree on an open set.

use crate::error::{invalid, Error, Result};
use crate::graph::{EdgeIx, EdgeSpec, GraphPoint, MetricGraph, Side, VertexCondition, VertexIx, VertexSpec};
use crate::kernel::{AdaptiveKernel, HeatKernel, KernelEval};
use crate::math::{exp, ln, powf};
use crate::quadrature::simpson_rule;
use alloc::format;
use alloc::string::String;
use alloc::vec;
use alloc::vec::Vec;

const SNAP: f64 = 1e-12;

/// An arclength interval `[lo, hi]` of one edge. As a piece of an open set it
/// contains its ends only where they sit on a vertex.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Piece {
    pub edge: EdgeIx,
    pub lo: f64,
    pub hi: f64,
}

impl Piece {
    pub fn len(&self) -> f64 {
        self.hi - self.lo
    }
}

/// An open subset `U` of a graph given as finitely many edge pieces.
#[derive(Debug, Clone)]
pub struct SubdomainSpec {
    parent: MetricGraph,
    pieces: Vec<Piece>,
    cuts: Vec<GraphPoint>,
}

impl SubdomainSpec {
    pub fn new(parent: &MetricGraph, mut pieces: Vec<Piece>) -> Result<Self> {
        if pieces.is_empty() {
            return Err(invalid("U", "needs at least one piece"));
        }
        for p in pieces.iter_mut() {
            if p.edge.0 >= parent.edge_count() {
                return Err(Error::UnknownEdge(format!("#{}", p.edge.0)));
            }
            let l = parent.length(p.edge);
            if p.lo.abs() < SNAP {
                p.lo = 0.0;
            }
            if (p.hi - l).abs() < SNAP {
                p.hi = l;
            }
            if !(p.lo >= 0.0 && p.hi <= l && p.lo < p.hi) {
                return Err(invalid("U", format!("piece [{}, {}] not inside edge {}", p.lo, p.hi, parent.edge_id(p.edge))));
            }
        }
        pieces.sort_by(|a, b| (a.edge.0, a.lo).partial_cmp(&(b.edge.0, b.lo)).unwrap());
        for w in pieces.windows(2) {
            if w[0].edge == w[1].edge && w[1].lo <= w[0].hi {
                return Err(invalid("U", "pieces overlap or touch"));
            }
        }
        let mut spec = Self { parent: parent.clone(), pieces, cuts: Vec::new() };
        // A vertex reached by one piece must be reached along every edge.
        for v in parent.vertices() {
            let touching = parent.incident(v).iter().filter(|&&h| spec.touches(h)).count();
            if touching != 0 && touching != parent.degree(v) {
                return Err(invalid("U", format!("not open at vertex {}", parent.vertex_id(v))));
            }
        }
        let mut cuts = Vec::new();
        for p in &spec.pieces {
            if p.lo > 0.0 {
                cuts.push(GraphPoint::new(p.edge, p.lo));
            }
            if p.hi < parent.length(p.edge) {
                cuts.push(GraphPoint::new(p.edge, p.hi));
            }
        }
        spec.cuts = cuts;
        Ok(spec)
    }

    /// `U = (lo, hi)` inside one edge.
    pub fn interval(parent: &MetricGraph, edge: EdgeIx, lo: f64, hi: f64) -> Result<Self> {
        Self::new(parent, vec![Piece { edge, lo, hi }])
    }

    /// Open ball of `radius` around `center`.
    pub fn ball(parent: &MetricGraph, center: GraphPoint, radius: f64) -> Result<Self> {
        parent.check_point(center)?;
        if !(radius > 0.0) {
            return Err(invalid("radius", "must be positive"));
        }
        let mut pieces = Vec::new();
        for e in parent.edges() {
            let l = parent.length(e);
            let (u, v) = parent.endpoints(e);
            let mut iv: Vec<(f64, f64)> = Vec::new();
            let ru = radius - parent.distance_to_vertex(center, u);
            if ru > 0.0 {
                iv.push((0.0, ru.min(l)));
            }
            let rv = radius - parent.distance_to_vertex(center, v);
            if rv > 0.0 {
                iv.push(((l - rv).max(0.0), l));
            }
            if center.edge == e {
                iv.push(((center.s - radius).max(0.0), (center.s + radius).min(l)));
            }
            iv.sort_by(|a, b| a.0.total_cmp(&b.0));
            let mut merged: Vec<(f64, f64)> = Vec::new();
            for (a, b) in iv {
                match merged.last_mut() {
                    Some(m) if a <= m.1 + SNAP => m.1 = m.1.max(b),
                    _ => merged.push((a, b)),
                }
            }
            pieces.extend(merged.into_iter().map(|(lo, hi)| Piece { edge: e, lo, hi }));
        }
        Self::new(parent, pieces)
    }

    pub fn parent(&self) -> &MetricGraph {
        &self.parent
    }

    pub fn pieces(&self) -> &[Piece] {
        &self.pieces
    }

    /// Points where `∂U` meets edge interiors.
    pub fn cut_points(&self) -> &[GraphPoint] {
        &self.cuts
    }

    fn touches(&self, h: crate::graph::HalfEdge) -> bool {
        let l = self.parent.length(h.edge);
        self.pieces.iter().any(|p| {
            p.edge == h.edge
                && match h.side {
                    Side::U => p.lo == 0.0,
                    Side::V => p.hi == l,
                }
        })
    }

    fn vertex_inside(&self, v: VertexIx) -> bool {
        self.parent.incident(v).iter().any(|&h| self.touches(h))
    }

    // Piece index and whether the point is in the closure only.
    fn locate(&self, p: GraphPoint) -> Option<(usize, bool)> {
        if let Some(v) = self.parent.point_vertex(p) {
            if self.vertex_inside(v) {
                for &h in self.parent.incident(v) {
                    let s = if h.side == Side::U { 0.0 } else { self.parent.length(h.edge) };
                    if let Some(i) = self.pieces.iter().position(|q| q.edge == h.edge && q.lo <= s && s <= q.hi) {
                        return Some((i, false));
                    }
                }
            }
        }
        let l = self.parent.length(p.edge);
        self.pieces.iter().position(|q| q.edge == p.edge && q.lo <= p.s && p.s <= q.hi).map(|i| {
            let q = self.pieces[i];
            let boundary = (p.s == q.lo && q.lo > 0.0) || (p.s == q.hi && q.hi < l);
            (i, boundary)
        })
    }

    pub fn contains(&self, p: GraphPoint) -> bool {
        matches!(self.locate(p), Some((_, false)))
    }

    pub fn contains_closure(&self, p: GraphPoint) -> bool {
        self.locate(p).is_some()
    }

    pub fn is_cut(&self, p: GraphPoint) -> bool {
        self.cuts.iter().any(|c| c.edge == p.edge && (c.s - p.s).abs() <= SNAP)
    }

    /// True when the closure of `self` lies inside the open set `outer`.
    pub fn compactly_inside(&self, outer: &SubdomainSpec) -> bool {
        self.pieces.iter().all(|p| {
            let a = outer.locate(GraphPoint::new(p.edge, p.lo));
            let b = outer.locate(GraphPoint::new(p.edge, p.hi));
            matches!((a, b), (Some((i, false)), Some((j, false))) if i == j || self.parent.point_vertex(GraphPoint::new(p.edge, p.lo)).is_some() || self.parent.point_vertex(GraphPoint::new(p.edge, p.hi)).is_some())
        })
    }

    /// `inf { d(v, b) : v ∈ closure(self), b ∈ ∂outer }`.
    pub fn boundary_gap(&self, outer: &SubdomainSpec) -> f64 {
        let g = &self.parent;
        let mut best = f64::INFINITY;
        for &b in &outer.cuts {
            for p in &self.pieces {
                let (u, v) = g.endpoints(p.edge);
                let mut d = p.lo + g.distance_to_vertex(b, u);
                d = d.min(g.length(p.edge) - p.hi + g.distance_to_vertex(b, v));
                if b.edge == p.edge {
                    d = d.min((p.lo - b.s).max(b.s - p.hi).max(0.0));
                }
                best = best.min(d);
            }
        }
        best
    }

    /// Uniform grid of `per_piece` points on the closure of each piece.
    pub fn grid(&self, per_piece: usize) -> Vec<GraphPoint> {
        let n = per_piece.max(2);
        let mut out = Vec::new();
        for p in &self.pieces {
            for i in 0..n {
                out.push(GraphPoint::new(p.edge, p.lo + p.len() * i as f64 / (n - 1) as f64));
            }
        }
        out
    }

    /// The graph `U` with every cut point turned into a Dirichlet vertex.
    pub fn cut_graph(&self) -> Result<MetricGraph> {
        let g = &self.parent;
        let mut vs = Vec::new();
        for v in g.vertices().filter(|&v| self.vertex_inside(v)) {
            vs.push(VertexSpec { id: g.vertex_id(v).into(), condition: g.condition(v) });
        }
        let mut es = Vec::new();
        let mut k = 0;
        for (i, p) in self.pieces.iter().enumerate() {
            let (u, v) = g.endpoints(p.edge);
            let mut end = |at_vertex: bool, w: VertexIx| -> String {
                if at_vertex {
                    g.vertex_id(w).into()
                } else {
                    k += 1;
                    let id = format!("cut{k}");
                    vs.push(VertexSpec { id: id.clone(), condition: VertexCondition::Dirichlet });
                    id
                }
            };
            let a = end(p.lo == 0.0, u);
            let b = end(p.hi == g.length(p.edge), v);
            es.push(EdgeSpec { id: format!("{}#{i}", g.edge_id(p.edge)), u: a, v: b, length: p.len() });
        }
        MetricGraph::new(vs, es)
    }

    /// Parent point in the closure of `U` to a point of the cut graph.
    pub fn to_cut(&self, p: GraphPoint) -> Result<GraphPoint> {
        self.parent.check_point(p)?;
        let (i, _) = self.locate(p).ok_or_else(|| Error::OutsideSubdomain(format!("{}:{}", self.parent.edge_id(p.edge), p.s)))?;
        let q = self.pieces[i];
        let s = if q.edge == p.edge {
            p.s - q.lo
        } else {
            let v = self.parent.point_vertex(p).unwrap();
            if self.parent.endpoints(q.edge).0 == v && q.lo == 0.0 { 0.0 } else { q.len() }
        };
        Ok(GraphPoint::new(EdgeIx(i), s.clamp(0.0, q.len())))
    }

    pub fn from_cut(&self, p: GraphPoint) -> GraphPoint {
        let q = self.pieces[p.edge.0];
        GraphPoint::new(q.edge, q.lo + p.s)
    }
}

/// Length-preserving map from `U ⊂ A` onto `U' ⊂ B`, affine on each piece.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct MapPiece {
    pub source: Piece,
    pub target_edge: EdgeIx,
    /// `+1` or `-1`.
    pub sign: f64,
    pub offset: f64,
}

#[derive(Debug, Clone)]
pub struct IsometryMap {
    source: SubdomainSpec,
    target: SubdomainSpec,
    pieces: Vec<MapPiece>,
}

impl IsometryMap {
    pub fn new(source: SubdomainSpec, target: SubdomainSpec, pieces: Vec<MapPiece>) -> Result<Self> {
        if pieces.len() != source.pieces.len() {
            return Err(invalid("map", "needs one affine piece per source piece"));
        }
        for m in &pieces {
            if !source.pieces.iter().any(|p| p == &m.source) {
                return Err(invalid("map", "piece is not a piece of the source set"));
            }
            if m.sign.abs() != 1.0 {
                return Err(invalid("map", "orientation must be +1 or -1"));
            }
            let a = m.offset + m.sign * m.source.lo;
            let b = m.offset + m.sign * m.source.hi;
            let (lo, hi) = if a < b { (a, b) } else { (b, a) };
            let hit = target
                .pieces
                .iter()
                .any(|q| q.edge == m.target_edge && (q.lo - lo).abs() < 1e-9 && (q.hi - hi).abs() < 1e-9);
            if !hit {
                return Err(invalid("map", format!("image of piece on edge #{} is not a target piece", m.source.edge.0)));
            }
        }
        Ok(Self { source, target, pieces })
    }

    /// Map between sets that share edge numbering and arclengths.
    pub fn aligned(source: SubdomainSpec, target: SubdomainSpec) -> Result<Self> {
        let pieces = source
            .pieces
            .iter()
            .map(|&p| MapPiece { source: p, target_edge: p.edge, sign: 1.0, offset: 0.0 })
            .collect();
        Self::new(source, target, pieces)
    }

    pub fn identity(u: SubdomainSpec) -> Result<Self> {
        Self::aligned(u.clone(), u)
    }

    pub fn source(&self) -> &SubdomainSpec {
        &self.source
    }

    pub fn target(&self) -> &SubdomainSpec {
        &self.target
    }

    pub fn pieces(&self) -> &[MapPiece] {
        &self.pieces
    }

    /// Image of a point in the closure of the source set.
    pub fn map(&self, p: GraphPoint) -> Result<GraphPoint> {
        let (i, _) = self
            .source
            .locate(p)
            .ok_or_else(|| Error::NoImage(format!("{}:{}", self.source.parent.edge_id(p.edge), p.s)))?;
        let piece = self.source.pieces[i];
        let s = if piece.edge == p.edge {
            p.s
        } else {
            // A vertex point given on another edge.
            let v = self.source.parent.point_vertex(p).unwrap();
            if self.source.parent.endpoints(piece.edge).0 == v && piece.lo == 0.0 { 0.0 } else { piece.hi }
        };
        let m = self.pieces.iter().find(|m| m.source == piece).unwrap();
        let t = m.offset + m.sign * s;
        let l = self.target.parent.length(m.target_edge);
        Ok(GraphPoint::new(m.target_edge, t.clamp(0.0, l)))
    }
}

/// Heat kernel of `U` with absorbing cut points, in parent coordinates.
#[derive(Debug, Clone)]
pub struct KilledKernel {
    spec: SubdomainSpec,
    kernel: AdaptiveKernel,
}

impl KilledKernel {
    pub fn new(spec: SubdomainSpec, tol: f64, t_max: f64) -> Result<Self> {
        let kernel = AdaptiveKernel::new(spec.cut_graph()?, tol, t_max)?;
        Ok(Self { spec, kernel })
    }

    pub fn spec(&self) -> &SubdomainSpec {
        &self.spec
    }

    pub fn cut_kernel(&self) -> &AdaptiveKernel {
        &self.kernel
    }

    /// `p^U_t(x, y)`; points may lie on the boundary, where the value is 0.
    pub fn eval(&self, t: f64, x: GraphPoint, y: GraphPoint) -> Result<KernelEval> {
        if self.spec.is_cut(x) || self.spec.is_cut(y) {
            self.spec.to_cut(x)?;
            self.spec.to_cut(y)?;
            return Ok(KernelEval { t, x, y, value: 0.0, tail_bound: 0.0 });
        }
        let e = self.kernel.eval(t, self.spec.to_cut(x)?, self.spec.to_cut(y)?)?;
        Ok(KernelEval { x, y, ..e })
    }

    pub fn value(&self, t: f64, x: GraphPoint, y: GraphPoint) -> Result<f64> {
        self.eval(t, x, y).map(|e| e.value)
    }

    /// Density in `s` of the first exit through the cut point `b`, the
    /// inward derivative of `p^U_s(x, ·)` at `b`.
    pub fn exit_density(&self, x: GraphPoint, b: GraphPoint, s: f64) -> Result<f64> {
        if !self.spec.is_cut(b) {
            return Err(invalid("b", "not a cut point of U"));
        }
        if !self.spec.contains(x) {
            return Err(Error::OutsideSubdomain(format!("{}:{}", self.spec.parent.edge_id(x.edge), x.s)));
        }
        if !(s > 0.0) {
            return Err(invalid("s", "time must be positive"));
        }
        let inward = if self.spec.pieces.iter().any(|p| p.edge == b.edge && (p.lo - b.s).abs() <= SNAP) { 1.0 } else { -1.0 };
        let quotient = |h: f64| -> Result<f64> {
            let y = GraphPoint::new(b.edge, b.s + inward * h);
            Ok(self.value(s, x, y)? / h)
        };
        let (h1, h2) = (1e-4, 5e-5);
        Ok(2.0 * quotient(h2)? - quotient(h1)?)
    }
}

/// One-shot `p^U_t(x, y)`.
pub fn kernel_killed(spec: &SubdomainSpec, t: f64, x: GraphPoint, y: GraphPoint, tol: f64) -> Result<KernelEval> {
    KilledKernel::new(spec.clone(), tol, t)?.eval(t, x, y)
}

/// `|p_t(x,y) − p^U_t(x,y) − Σ_b ∫₀ᵗ f_b(s) p_{t−s}(b,y) ds|` by Simpson's
/// rule in `s` with the given step.
pub fn decomposition_residual<K: HeatKernel>(
    parent: &K,
    killed: &KilledKernel,
    t: f64,
    x: GraphPoint,
    y: GraphPoint,
    time_step: f64,
) -> Result<f64> {
    if !(time_step > 0.0) {
        return Err(invalid("time_step", "must be positive"));
    }
    if !(t > 0.0) {
        return Err(invalid("t", "time must be positive"));
    }
    for p in [x, y] {
        if !killed.spec.contains(p) {
            return Err(Error::OutsideSubdomain(format!("{}:{}", killed.spec.parent.edge_id(p.edge), p.s)));
        }
    }
    let full = parent.value(t, x, y)?;
    let inner = killed.value(t, x, y)?;
    let (nodes, weights) = simpson_rule(0.0, t, time_step.min(t / 2.0));
    let mut flux = 0.0;
    for &b in killed.spec.cut_points() {
        for (&s, &w) in nodes.iter().zip(&weights) {
            if s <= 0.0 || s >= t {
                continue;
            }
            flux += w * killed.exit_density(x, b, s)? * parent.value(t - s, b, y)?;
        }
    }
    Ok((full - inner - flux).abs())
}

/// `p_t(x,y) ≤ C t^{−n/2} exp(−d²/(c t))` for `0 < t ≤ horizon`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct DecayBoundParams {
    pub big_c: f64,
    pub c: f64,
    pub n: f64,
    pub horizon: f64,
}

impl DecayBoundParams {
    pub fn new(big_c: f64, c: f64, n: f64, horizon: f64) -> Result<Self> {
        if !(big_c > 0.0 && c > 0.0 && n >= 0.0 && horizon > 0.0) {
            return Err(invalid("decay bound", "C, c, T must be positive and n nonnegative"));
        }
        Ok(Self { big_c, c, n, horizon })
    }

    pub fn bound(&self, d: f64, t: f64) -> f64 {
        self.big_c * powf(t, -self.n / 2.0) * exp(-d * d / (self.c * t))
    }
}

/// `C t^{−n/2} e^{−ρ²/(ct)}`.
pub fn nonlocal_bound(params: &DecayBoundParams, rho: f64, t: f64) -> Result<f64> {
    if !(rho > 0.0) {
        return Err(invalid("rho", "must be positive"));
    }
    if !(t > 0.0 && t <= params.horizon) {
        return Err(invalid("t", format!("must lie in (0, {}]", params.horizon)));
    }
    Ok(params.bound(rho, t))
}

/// Candidate spreads tried by [`fit_decay_params`].
pub const DECAY_SPREADS: [f64; 6] = [4.2, 5.0, 6.0, 8.0, 12.0, 16.0];

/// Smallest `C` making the bound hold on every sampled `(x, y, t)` for each
/// candidate `c`, keeping the candidate with the least total log slack.
pub fn fit_decay_params<K: HeatKernel>(kernels: &[K], points: &[GraphPoint], t_grid: &[f64], n: f64) -> Result<DecayBoundParams> {
    let mut samples = Vec::new();
    for k in kernels {
        for &t in t_grid {
            for &x in points {
                for &y in points {
                    let e = k.eval(t, x, y)?;
                    if e.value > 10.0 * e.tail_bound && e.value > 0.0 {
                        samples.push((k.graph().distance(x, y)?, t, e.value));
                    }
                }
            }
        }
    }
    if samples.is_empty() {
        return Err(invalid("samples", "no resolvable kernel values"));
    }
    let horizon = t_grid.iter().cloned().fold(0.0, f64::max);
    let mut best: Option<(f64, DecayBoundParams)> = None;
    for &c in &DECAY_SPREADS {
        let shape = |d: f64, t: f64| powf(t, -n / 2.0) * exp(-d * d / (c * t));
        let big_c = samples.iter().map(|&(d, t, p)| p / shape(d, t)).fold(0.0, f64::max);
        let slack: f64 = samples.iter().map(|&(d, t, p)| ln(big_c * shape(d, t) / p)).sum();
        if best.as_ref().is_none_or(|(s, _)| slack < *s) {
            best = Some((slack, DecayBoundParams::new(big_c, c, n, horizon)?));
        }
    }
    Ok(best.unwrap().1)
}

/// Result of comparing two kernels on `V × V` over a time grid.
#[derive(Debug, Clone, PartialEq)]
pub struct LocalityCertificate {
    pub v: Vec<Piece>,
    pub u: Vec<Piece>,
    pub horizon: f64,
    pub t_grid: Vec<f64>,
    pub sup_diffs: Vec<f64>,
    /// Where each supremum was attained.
    pub argmax: Vec<(GraphPoint, GraphPoint)>,
    /// Combined truncation bounds of the two kernels at each time.
    pub tails: Vec<f64>,
    pub big_c: f64,
    pub eps: f64,
    pub r2: f64,
    /// `inf d(V, ∂U)`.
    pub gap: f64,
}

impl LocalityCertificate {
    /// Every difference lies below `C e^{−ε/t}` up to `1 + slack`.
    pub fn within_envelope(&self, slack: f64) -> bool {
        self.t_grid
            .iter()
            .zip(&self.sup_diffs)
            .all(|(&t, &d)| d <= self.big_c * exp(-self.eps / t) * (1.0 + slack) + self.tails_at(t))
    }

    fn tails_at(&self, t: f64) -> f64 {
        self.t_grid.iter().position(|&s| s == t).map_or(0.0, |i| self.tails[i])
    }

    pub fn is_trivial(&self) -> bool {
        self.sup_diffs.iter().all(|&d| d == 0.0)
    }
}

/// Least-squares fit of `ln y = a + b x`; returns `(a, b, r²)`.
pub fn linear_fit(xs: &[f64], ys: &[f64]) -> (f64, f64, f64) {
    let n = xs.len() as f64;
    let mx = xs.iter().sum::<f64>() / n;
    let my = ys.iter().sum::<f64>() / n;
    let sxy: f64 = xs.iter().zip(ys).map(|(x, y)| (x - mx) * (y - my)).sum();
    let sxx: f64 = xs.iter().map(|x| (x - mx) * (x - mx)).sum();
    let syy: f64 = ys.iter().map(|y| (y - my) * (y - my)).sum();
    let b = sxy / sxx;
    let a = my - b * mx;
    let r2 = if syy == 0.0 { 1.0 } else { (sxy * sxy) / (sxx * syy) };
    (a, b, r2)
}

/// Minimum acceptable coefficient of determination.
pub const MIN_R2: f64 = 0.99;

/// Sup over a 9-point-per-piece grid of `|p^A_t(x,y) − p^B_t(ψx,ψy)|` on
/// `closure(V)` for every `t`, fitted to `C e^{−ε/t}`.
pub fn locality_compare<KA: HeatKernel, KB: HeatKernel>(
    ka: &KA,
    kb: &KB,
    map: &IsometryMap,
    v: &SubdomainSpec,
    t_grid: &[f64],
) -> Result<LocalityCertificate> {
    if !v.compactly_inside(map.source()) {
        return Err(invalid("V", "closure of V is not inside U"));
    }
    if t_grid.is_empty() || t_grid.iter().any(|&t| !(t > 0.0)) {
        return Err(invalid("t_grid", "times must be positive"));
    }
    let grid = v.grid(9);
    let images: Vec<GraphPoint> = grid.iter().map(|&p| map.map(p)).collect::<Result<_>>()?;
    let mut sup_diffs = Vec::with_capacity(t_grid.len());
    let mut argmax = Vec::with_capacity(t_grid.len());
    let mut tails = Vec::with_capacity(t_grid.len());
    for &t in t_grid {
        let mut best = (0.0, grid[0], grid[0], 0.0);
        for (i, &x) in grid.iter().enumerate() {
            for (j, &y) in grid.iter().enumerate().skip(i) {
                let a = ka.eval(t, x, y)?;
                let b = kb.eval(t, images[i], images[j])?;
                let d = (a.value - b.value).abs();
                if d > best.0 || (i == 0 && j == 0) {
                    best = (d, x, y, a.tail_bound + b.tail_bound);
                }
            }
        }
        sup_diffs.push(best.0);
        argmax.push((best.1, best.2));
        tails.push(best.3);
    }
    let horizon = t_grid.iter().cloned().fold(0.0, f64::max);
    let gap = v.boundary_gap(map.source());
    let mut cert = LocalityCertificate {
        v: v.pieces.clone(),
        u: map.source().pieces.clone(),
        horizon,
        t_grid: t_grid.to_vec(),
        sup_diffs,
        argmax,
        tails,
        big_c: 0.0,
        eps: f64::INFINITY,
        r2: 1.0,
        gap,
    };
    if cert.is_trivial() {
        return Ok(cert);
    }
    let (xs, ys): (Vec<f64>, Vec<f64>) = t_grid
        .iter()
        .zip(&cert.sup_diffs)
        .zip(&cert.tails)
        .filter(|((_, &d), &tail)| d > 10.0 * tail && d > 0.0)
        .map(|((&t, &d), _)| (1.0 / t, ln(d)))
        .unzip();
    if xs.len() < 3 {
        return Err(Error::NoCertificate { r2: 0.0, eps: 0.0 });
    }
    let (a, b, r2) = linear_fit(&xs, &ys);
    cert.big_c = exp(a);
    cert.eps = -b;
    cert.r2 = r2;
    if r2 < MIN_R2 || !(cert.eps > 0.0) {
        return Err(Error::NoCertificate { r2, eps: cert.eps });
    }
    Ok(cert)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::graph::VertexCondition::*;
    use crate::kernel::kernel_interval;

    fn pt(s: f64) -> GraphPoint {
        GraphPoint::new(EdgeIx(0), s)
    }

    #[test]
    fn killed_interval_matches_dirichlet_images() {
        let line = MetricGraph::interval(6.0, Kirchhoff, Kirchhoff).unwrap();
        let u = SubdomainSpec::interval(&line, EdgeIx(0), 2.5, 3.5).unwrap();
        assert_eq!(u.cut_points().len(), 2);
        let v = kernel_killed(&u, 0.05, pt(3.0), pt(3.0), 1e-12).unwrap();
        assert!((v.value - 1.244566).abs() < 1e-6, "{}", v.value);
        assert_eq!(kernel_killed(&u, 0.05, pt(2.5), pt(3.0), 1e-12).unwrap().value, 0.0);
        assert!(matches!(kernel_killed(&u, 0.05, pt(1.0), pt(3.0), 1e-12), Err(Error::OutsideSubdomain(_))));
    }

    #[test]
    fn killed_below_full_kernel() {
        let g = MetricGraph::interval(1.0, Kirchhoff, Kirchhoff).unwrap();
        let u = SubdomainSpec::interval(&g, EdgeIx(0), 0.25, 0.75).unwrap();
        let k = KilledKernel::new(u, 1e-12, 0.05).unwrap();
        for i in 0..5 {
            for j in 0..5 {
                let (x, y) = (0.3 + 0.1 * i as f64, 0.3 + 0.1 * j as f64);
                let pu = k.value(0.05, pt(x), pt(y)).unwrap();
                let p = kernel_interval(1.0, Kirchhoff, Kirchhoff, 0.05, x, y).unwrap().value;
                assert!(pu >= -1e-12 && pu <= p + 1e-12);
            }
        }
    }

    #[test]
    fn ball_on_star_cuts_every_leg() {
        let g = MetricGraph::star(&[1.0, 1.0, 1.0], Kirchhoff).unwrap();
        let c = GraphPoint::new(EdgeIx(0), 0.0);
        let u = SubdomainSpec::ball(&g, c, 0.4).unwrap();
        assert_eq!(u.cut_points().len(), 3);
        assert!(u.contains(c) && u.contains(GraphPoint::new(EdgeIx(2), 0.0)));
        let cg = u.cut_graph().unwrap();
        assert_eq!(cg.edge_count(), 3);
        assert!((cg.total_length() - 1.2).abs() < 1e-12);
        let inner = SubdomainSpec::ball(&g, c, 0.1).unwrap();
        assert!(inner.compactly_inside(&u));
        assert!((inner.boundary_gap(&u) - 0.3).abs() < 1e-12);
        assert!(!u.compactly_inside(&inner));
    }

    #[test]
    fn open_at_vertex_required() {
        let g = MetricGraph::star(&[1.0, 1.0], Kirchhoff).unwrap();
        let bad = SubdomainSpec::new(&g, vec![Piece { edge: EdgeIx(0), lo: 0.0, hi: 0.5 }]);
        assert!(bad.is_err());
    }

    #[test]
    fn exit_densities_symmetric_and_conserve_mass() {
        let g = MetricGraph::interval(1.0, Kirchhoff, Kirchhoff).unwrap();
        let u = SubdomainSpec::interval(&g, EdgeIx(0), 0.0 + 0.25, 0.75).unwrap();
        let k = KilledKernel::new(u, 1e-12, 2.0).unwrap();
        let (a, b) = (pt(0.25), pt(0.75));
        let fa = k.exit_density(pt(0.5), a, 0.02).unwrap();
        let fb = k.exit_density(pt(0.5), b, 0.02).unwrap();
        assert!(fa > 0.0 && (fa - fb).abs() < 1e-8);
        let (nodes, w) = simpson_rule(0.0, 1.0, 1e-3);
        let total: f64 = nodes
            .iter()
            .zip(&w)
            .filter(|(s, _)| **s > 0.0)
            .map(|(&s, &w)| w * (k.exit_density(pt(0.5), a, s).unwrap() + k.exit_density(pt(0.5), b, s).unwrap()))
            .sum();
        assert!((total - 1.0).abs() < 1e-4, "{total}");
        assert!(k.exit_density(pt(0.5), pt(0.5), 0.1).is_err());
    }

    #[test]
    fn decomposition_on_interval() {
        let g = MetricGraph::interval(1.0, Kirchhoff, Kirchhoff).unwrap();
        let u = SubdomainSpec::interval(&g, EdgeIx(0), 0.25, 0.75).unwrap();
        let killed = KilledKernel::new(u, 1e-12, 0.05).unwrap();
        let parent = AdaptiveKernel::new(g, 1e-12, 0.05).unwrap();
        let r = decomposition_residual(&parent, &killed, 0.05, pt(0.5), pt(0.5), 1e-4).unwrap();
        assert!(r < 1e-4, "{r}");
        assert!(decomposition_residual(&parent, &killed, 0.05, pt(0.5), pt(0.5), 0.0).is_err());
    }

    #[test]
    fn nonlocal_bound_formula() {
        let p = DecayBoundParams::new(1.0, 1.0, 1.0, 10.0).unwrap();
        let v = nonlocal_bound(&p, 1.0, 0.1).unwrap();
        assert!((v - 1.4357e-4).abs() < 1e-7);
        assert!(nonlocal_bound(&p, 1.0, 20.0).is_err());
        let mut prev = 0.0;
        for i in 1..20 {
            let b = nonlocal_bound(&p, 1.0, i as f64 * 0.1).unwrap();
            assert!(b > prev);
            prev = b;
        }
    }

    #[test]
    fn neumann_dirichlet_certificate() {
        let gn = MetricGraph::interval(1.0, Kirchhoff, Kirchhoff).unwrap();
        let gd = MetricGraph::interval(1.0, Dirichlet, Dirichlet).unwrap();
        let un = SubdomainSpec::interval(&gn, EdgeIx(0), 0.25, 0.75).unwrap();
        let ud = SubdomainSpec::interval(&gd, EdgeIx(0), 0.25, 0.75).unwrap();
        let map = IsometryMap::aligned(un, ud).unwrap();
        let v = SubdomainSpec::interval(&gn, EdgeIx(0), 0.4, 0.6).unwrap();
        let ka = AdaptiveKernel::new(gn.clone(), 1e-14, 0.05).unwrap();
        let kb = AdaptiveKernel::new(gd.clone(), 1e-14, 0.05).unwrap();
        let grid = crate::math::log_grid(0.01, 0.05, 8);
        let cert = locality_compare(&ka, &kb, &map, &v, &grid).unwrap();
        assert!(cert.eps > 0.0 && cert.r2 >= 0.999, "{cert:?}");
        assert!((cert.eps - 0.16).abs() < 0.03);
        assert!((cert.gap - 0.15).abs() < 1e-12);

        let same = locality_compare(&ka, &ka, &IsometryMap::identity(map.source().clone()).unwrap(), &v, &grid).unwrap();
        assert!(same.is_trivial());
    }
}
