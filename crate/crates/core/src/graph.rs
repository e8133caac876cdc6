//! Metric graph model: vertices with Kirchhoff or Dirichlet conditions,
//! edges with positive lengths, points in arclength coordinates, the
//! shortest-path metric and the vertex scattering matrices.

use crate::error::{Error, Result};
use crate::linalg::Matrix;
use alloc::format;
use alloc::string::{String, ToString};
use alloc::vec;
use alloc::vec::Vec;

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct VertexIx(pub usize);

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct EdgeIx(pub usize);

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum VertexCondition {
    /// Continuity plus vanishing sum of outward derivatives.
    Kirchhoff,
    /// Absorbing: functions vanish at the vertex.
    Dirichlet,
}

/// Which end of an edge: `U` is arclength 0, `V` is arclength `length`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum Side {
    U,
    V,
}

impl Side {
    pub fn opposite(self) -> Side {
        match self {
            Side::U => Side::V,
            Side::V => Side::U,
        }
    }
}

/// One end of an edge as seen from the vertex it is attached to. A loop
/// contributes two half-edges to its vertex.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct HalfEdge {
    pub edge: EdgeIx,
    pub side: Side,
}

/// A point on a metric graph: an edge and the arclength from its `U` end.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct GraphPoint {
    pub edge: EdgeIx,
    pub s: f64,
}

impl GraphPoint {
    pub fn new(edge: EdgeIx, s: f64) -> Self {
        Self { edge, s }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct VertexSpec {
    pub id: String,
    pub condition: VertexCondition,
}

#[derive(Debug, Clone, PartialEq)]
pub struct EdgeSpec {
    pub id: String,
    pub u: String,
    pub v: String,
    pub length: f64,
}

/// A validated compact metric graph. Immutable after construction.
#[derive(Debug, Clone)]
pub struct MetricGraph {
    vertex_ids: Vec<String>,
    conditions: Vec<VertexCondition>,
    edge_ids: Vec<String>,
    endpoints: Vec<(VertexIx, VertexIx)>,
    lengths: Vec<f64>,
    incident: Vec<Vec<HalfEdge>>,
    vertex_dist: Vec<f64>,
}

impl MetricGraph {
    pub fn new(vertices: Vec<VertexSpec>, edges: Vec<EdgeSpec>) -> Result<Self> {
        let bad = |field: String, reason: &str| Error::InvalidGraph { field, reason: reason.to_string() };
        if edges.is_empty() {
            return Err(bad("edges".into(), "at least one edge is required"));
        }
        let mut vertex_ids = Vec::with_capacity(vertices.len());
        let mut conditions = Vec::with_capacity(vertices.len());
        for (i, v) in vertices.iter().enumerate() {
            if vertex_ids.contains(&v.id) {
                return Err(bad(format!("vertices[{i}].id"), "duplicate vertex id"));
            }
            vertex_ids.push(v.id.clone());
            conditions.push(v.condition);
        }
        let lookup = |id: &str| vertex_ids.iter().position(|x| x == id).map(VertexIx);
        let mut edge_ids = Vec::with_capacity(edges.len());
        let mut endpoints = Vec::with_capacity(edges.len());
        let mut lengths = Vec::with_capacity(edges.len());
        let mut incident = vec![Vec::new(); vertex_ids.len()];
        for (i, e) in edges.iter().enumerate() {
            if edge_ids.contains(&e.id) {
                return Err(bad(format!("edges[{i}].id"), "duplicate edge id"));
            }
            if !e.length.is_finite() || e.length <= 0.0 {
                return Err(bad(format!("edges[{i}].length (edge {})", e.id), "nonpositive length"));
            }
            let u = lookup(&e.u)
                .ok_or_else(|| bad(format!("edges[{i}].u (edge {})", e.id), "dangling endpoint reference"))?;
            let v = lookup(&e.v)
                .ok_or_else(|| bad(format!("edges[{i}].v (edge {})", e.id), "dangling endpoint reference"))?;
            edge_ids.push(e.id.clone());
            endpoints.push((u, v));
            lengths.push(e.length);
            incident[u.0].push(HalfEdge { edge: EdgeIx(i), side: Side::U });
            incident[v.0].push(HalfEdge { edge: EdgeIx(i), side: Side::V });
        }
        for (i, inc) in incident.iter().enumerate() {
            if inc.is_empty() {
                return Err(bad(format!("vertices[{i}] (vertex {})", vertex_ids[i]), "isolated vertex"));
            }
        }
        let n = vertex_ids.len();
        let mut vertex_dist = vec![f64::INFINITY; n * n];
        for i in 0..n {
            vertex_dist[i * n + i] = 0.0;
        }
        for (k, &(u, v)) in endpoints.iter().enumerate() {
            let l = lengths[k];
            for (a, b) in [(u.0, v.0), (v.0, u.0)] {
                if l < vertex_dist[a * n + b] {
                    vertex_dist[a * n + b] = l;
                }
            }
        }
        for k in 0..n {
            for i in 0..n {
                for j in 0..n {
                    let via = vertex_dist[i * n + k] + vertex_dist[k * n + j];
                    if via < vertex_dist[i * n + j] {
                        vertex_dist[i * n + j] = via;
                    }
                }
            }
        }
        Ok(Self { vertex_ids, conditions, edge_ids, endpoints, lengths, incident, vertex_dist })
    }

    /// Single edge `a`–`b` of the given length.
    pub fn interval(length: f64, left: VertexCondition, right: VertexCondition) -> Result<Self> {
        Self::new(
            vec![VertexSpec { id: "a".into(), condition: left }, VertexSpec { id: "b".into(), condition: right }],
            vec![EdgeSpec { id: "e".into(), u: "a".into(), v: "b".into(), length }],
        )
    }

    /// Star with Kirchhoff center `c` (the `U` end of every leg) and leaves
    /// `l1..ln` carrying `leaf` conditions. Legs are named `e1..en`.
    pub fn star(legs: &[f64], leaf: VertexCondition) -> Result<Self> {
        let mut vs = vec![VertexSpec { id: "c".into(), condition: VertexCondition::Kirchhoff }];
        let mut es = Vec::new();
        for (i, &l) in legs.iter().enumerate() {
            vs.push(VertexSpec { id: format!("l{}", i + 1), condition: leaf });
            es.push(EdgeSpec { id: format!("e{}", i + 1), u: "c".into(), v: format!("l{}", i + 1), length: l });
        }
        Self::new(vs, es)
    }

    /// Cycle of `n` Kirchhoff vertices; `n = 1` gives a single loop.
    pub fn cycle(lengths: &[f64]) -> Result<Self> {
        let n = lengths.len();
        let vs = (0..n)
            .map(|i| VertexSpec { id: format!("v{}", i + 1), condition: VertexCondition::Kirchhoff })
            .collect();
        let es = (0..n)
            .map(|i| EdgeSpec {
                id: format!("e{}", i + 1),
                u: format!("v{}", i + 1),
                v: format!("v{}", (i + 1) % n + 1),
                length: lengths[i],
            })
            .collect();
        Self::new(vs, es)
    }

    pub fn vertex_count(&self) -> usize {
        self.vertex_ids.len()
    }

    pub fn edge_count(&self) -> usize {
        self.edge_ids.len()
    }

    pub fn vertices(&self) -> impl Iterator<Item = VertexIx> + '_ {
        (0..self.vertex_ids.len()).map(VertexIx)
    }

    pub fn edges(&self) -> impl Iterator<Item = EdgeIx> + '_ {
        (0..self.edge_ids.len()).map(EdgeIx)
    }

    pub fn vertex_id(&self, v: VertexIx) -> &str {
        &self.vertex_ids[v.0]
    }

    pub fn edge_id(&self, e: EdgeIx) -> &str {
        &self.edge_ids[e.0]
    }

    pub fn vertex_by_id(&self, id: &str) -> Result<VertexIx> {
        self.vertex_ids
            .iter()
            .position(|x| x == id)
            .map(VertexIx)
            .ok_or_else(|| Error::UnknownVertex(id.to_string()))
    }

    pub fn edge_by_id(&self, id: &str) -> Result<EdgeIx> {
        self.edge_ids
            .iter()
            .position(|x| x == id)
            .map(EdgeIx)
            .ok_or_else(|| Error::UnknownEdge(id.to_string()))
    }

    pub fn condition(&self, v: VertexIx) -> VertexCondition {
        self.conditions[v.0]
    }

    pub fn length(&self, e: EdgeIx) -> f64 {
        self.lengths[e.0]
    }

    pub fn endpoints(&self, e: EdgeIx) -> (VertexIx, VertexIx) {
        self.endpoints[e.0]
    }

    /// The vertex at the given end of an edge.
    pub fn end_vertex(&self, h: HalfEdge) -> VertexIx {
        let (u, v) = self.endpoints[h.edge.0];
        match h.side {
            Side::U => u,
            Side::V => v,
        }
    }

    /// Half-edges at `v`, ordered by edge index with `U` before `V`.
    pub fn incident(&self, v: VertexIx) -> &[HalfEdge] {
        &self.incident[v.0]
    }

    pub fn degree(&self, v: VertexIx) -> usize {
        self.incident[v.0].len()
    }

    pub fn total_length(&self) -> f64 {
        self.lengths.iter().sum()
    }

    pub fn min_length(&self) -> f64 {
        self.lengths.iter().copied().fold(f64::INFINITY, f64::min)
    }

    pub fn max_length(&self) -> f64 {
        self.lengths.iter().copied().fold(0.0, f64::max)
    }

    pub fn is_all_kirchhoff(&self) -> bool {
        self.conditions.iter().all(|&c| c == VertexCondition::Kirchhoff)
    }

    /// Specs that rebuild this graph, in original order.
    pub fn specs(&self) -> (Vec<VertexSpec>, Vec<EdgeSpec>) {
        let vs = self
            .vertex_ids
            .iter()
            .zip(&self.conditions)
            .map(|(id, &condition)| VertexSpec { id: id.clone(), condition })
            .collect();
        let es = self
            .edges()
            .map(|e| {
                let (u, v) = self.endpoints(e);
                EdgeSpec {
                    id: self.edge_ids[e.0].clone(),
                    u: self.vertex_ids[u.0].clone(),
                    v: self.vertex_ids[v.0].clone(),
                    length: self.lengths[e.0],
                }
            })
            .collect();
        (vs, es)
    }

    pub fn check_point(&self, p: GraphPoint) -> Result<()> {
        if p.edge.0 >= self.edge_count() {
            return Err(Error::UnknownEdge(format!("#{}", p.edge.0)));
        }
        let l = self.length(p.edge);
        if !(p.s >= 0.0 && p.s <= l) {
            return Err(Error::PointOffEdge { edge: self.edge_ids[p.edge.0].clone(), s: p.s, length: l });
        }
        Ok(())
    }

    pub fn point(&self, edge_id: &str, s: f64) -> Result<GraphPoint> {
        let p = GraphPoint::new(self.edge_by_id(edge_id)?, s);
        self.check_point(p)?;
        Ok(p)
    }

    /// The vertex a point sits on, if it is an edge endpoint.
    pub fn point_vertex(&self, p: GraphPoint) -> Option<VertexIx> {
        let (u, v) = self.endpoints(p.edge);
        if p.s == 0.0 {
            Some(u)
        } else if p.s == self.length(p.edge) {
            Some(v)
        } else {
            None
        }
    }

    /// Point equality up to the identification of edge endpoints at vertices.
    pub fn same_point(&self, a: GraphPoint, b: GraphPoint) -> bool {
        if a.edge == b.edge && a.s == b.s {
            return true;
        }
        matches!((self.point_vertex(a), self.point_vertex(b)), (Some(x), Some(y)) if x == y)
    }

    pub fn vertex_distance(&self, a: VertexIx, b: VertexIx) -> f64 {
        self.vertex_dist[a.0 * self.vertex_count() + b.0]
    }

    /// Distances from a point to the two endpoints of its edge.
    pub fn end_distances(&self, p: GraphPoint) -> [(VertexIx, f64); 2] {
        let (u, v) = self.endpoints(p.edge);
        [(u, p.s), (v, self.length(p.edge) - p.s)]
    }

    /// Distance from a point to a vertex.
    pub fn distance_to_vertex(&self, p: GraphPoint, w: VertexIx) -> f64 {
        self.end_distances(p)
            .iter()
            .map(|&(a, da)| da + self.vertex_distance(a, w))
            .fold(f64::INFINITY, f64::min)
    }

    /// Shortest-path distance between two points.
    pub fn distance(&self, x: GraphPoint, y: GraphPoint) -> Result<f64> {
        self.check_point(x)?;
        self.check_point(y)?;
        Ok(self.distance_unchecked(x, y))
    }

    pub(crate) fn distance_unchecked(&self, x: GraphPoint, y: GraphPoint) -> f64 {
        // Fixed argument order keeps the result exactly symmetric.
        let (x, y) = if (y.edge.0, y.s) < (x.edge.0, x.s) { (y, x) } else { (x, y) };
        let mut best = if x.edge == y.edge { (x.s - y.s).abs() } else { f64::INFINITY };
        for (a, da) in self.end_distances(x) {
            for (b, db) in self.end_distances(y) {
                let d = da + self.vertex_distance(a, b) + db;
                if d < best {
                    best = d;
                }
            }
        }
        best
    }

    /// Vertex scattering matrix indexed by [`MetricGraph::incident`] order.
    pub fn scattering_matrix(&self, v: VertexIx) -> Result<ScatteringMatrix> {
        if v.0 >= self.vertex_count() {
            return Err(Error::UnknownVertex(format!("#{}", v.0)));
        }
        let ends = self.incident[v.0].clone();
        let d = ends.len();
        let mut entries = Matrix::zeros(d, d);
        match self.conditions[v.0] {
            VertexCondition::Kirchhoff => {
                let off = 2.0 / d as f64;
                for a in 0..d {
                    for b in 0..d {
                        entries[(a, b)] = if a == b { off - 1.0 } else { off };
                    }
                }
                #[cfg(feature = "fault-injection")]
                if fault::sigma_broken() {
                    for a in 0..d {
                        entries[(a, a)] += 0.05;
                    }
                }
            }
            VertexCondition::Dirichlet => {
                for a in 0..d {
                    entries[(a, a)] = -1.0;
                }
            }
        }
        Ok(ScatteringMatrix { vertex: v, ends, entries })
    }
}

/// Reflection/transmission amplitudes of heat paths at one vertex.
#[derive(Debug, Clone, PartialEq)]
pub struct ScatteringMatrix {
    pub vertex: VertexIx,
    /// Row/column labels.
    pub ends: Vec<HalfEdge>,
    pub entries: Matrix,
}

impl ScatteringMatrix {
    pub fn degree(&self) -> usize {
        self.ends.len()
    }

    pub fn get(&self, a: usize, b: usize) -> f64 {
        self.entries[(a, b)]
    }

    pub fn trace(&self) -> f64 {
        (0..self.degree()).map(|a| self.entries[(a, a)]).sum()
    }

    pub fn row_sum(&self, a: usize) -> f64 {
        (0..self.degree()).map(|b| self.entries[(a, b)]).sum()
    }
}

/// Process-wide switch that corrupts Kirchhoff scattering matrices. Only a
/// negative control for the self-test; never set it in normal runs.
#[cfg(feature = "fault-injection")]
pub mod fault {
    use core::sync::atomic::{AtomicBool, Ordering};

    static BROKEN_SIGMA: AtomicBool = AtomicBool::new(false);

    pub fn set_sigma_broken(on: bool) {
        BROKEN_SIGMA.store(on, Ordering::SeqCst);
    }

    pub fn sigma_broken() -> bool {
        BROKEN_SIGMA.load(Ordering::SeqCst)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use VertexCondition::*;

    fn triangle() -> MetricGraph {
        MetricGraph::cycle(&[1.0, 1.0, 1.0]).unwrap()
    }

    #[test]
    fn minimal_and_star_graphs() {
        let g = MetricGraph::interval(1.0, Kirchhoff, Kirchhoff).unwrap();
        assert_eq!(g.total_length(), 1.0);
        let s = MetricGraph::star(&[1.0, 1.0, 1.0], Kirchhoff).unwrap();
        assert_eq!(s.degree(s.vertex_by_id("c").unwrap()), 3);
        assert_eq!(s.total_length(), 3.0);
    }

    #[test]
    fn validation_names_the_offending_field() {
        let err = MetricGraph::interval(-0.5, Kirchhoff, Kirchhoff).unwrap_err();
        match err {
            Error::InvalidGraph { field, reason } => {
                assert!(field.contains("edges[0].length"));
                assert_eq!(reason, "nonpositive length");
            }
            other => panic!("unexpected {other:?}"),
        }
        let dangling = MetricGraph::new(
            vec![VertexSpec { id: "a".into(), condition: Kirchhoff }],
            vec![EdgeSpec { id: "e".into(), u: "a".into(), v: "zz".into(), length: 1.0 }],
        )
        .unwrap_err();
        assert!(matches!(dangling, Error::InvalidGraph { ref reason, .. } if reason == "dangling endpoint reference"));
        let isolated = MetricGraph::new(
            vec![
                VertexSpec { id: "a".into(), condition: Kirchhoff },
                VertexSpec { id: "b".into(), condition: Kirchhoff },
                VertexSpec { id: "c".into(), condition: Kirchhoff },
            ],
            vec![EdgeSpec { id: "e".into(), u: "a".into(), v: "b".into(), length: 1.0 }],
        );
        assert!(isolated.is_err());
        assert!(MetricGraph::new(vec![], vec![]).is_err());
    }

    #[test]
    fn scattering_matrices() {
        let s = MetricGraph::star(&[1.0, 1.0, 1.0], Dirichlet).unwrap();
        let c = s.scattering_matrix(s.vertex_by_id("c").unwrap()).unwrap();
        assert_eq!(c.get(0, 0), 2.0 / 3.0 - 1.0);
        assert_eq!(c.get(0, 1), 2.0 / 3.0);
        for a in 0..3 {
            assert!((c.row_sum(a) - 1.0).abs() < 1e-15);
        }
        let leaf = s.scattering_matrix(s.vertex_by_id("l1").unwrap()).unwrap();
        assert_eq!(leaf.entries, Matrix::from_rows(1, 1, vec![-1.0]));
        let path = MetricGraph::star(&[1.0, 1.0], Kirchhoff).unwrap();
        let m = path.scattering_matrix(VertexIx(0)).unwrap();
        assert_eq!((m.get(0, 0), m.get(0, 1)), (0.0, 1.0));
        assert!(s.scattering_matrix(VertexIx(17)).is_err());
    }

    #[test]
    fn distances() {
        let g = MetricGraph::interval(1.0, Kirchhoff, Kirchhoff).unwrap();
        let e = EdgeIx(0);
        assert!((g.distance(GraphPoint::new(e, 0.2), GraphPoint::new(e, 0.7)).unwrap() - 0.5).abs() < 1e-15);
        let s = MetricGraph::star(&[1.0, 1.0, 1.0], Kirchhoff).unwrap();
        let d = s.distance(GraphPoint::new(EdgeIx(0), 0.3), GraphPoint::new(EdgeIx(1), 0.3)).unwrap();
        assert!((d - 0.6).abs() < 1e-15);
        let t = triangle();
        let d = t.distance(GraphPoint::new(EdgeIx(0), 0.5), GraphPoint::new(EdgeIx(1), 0.5)).unwrap();
        assert!((d - 1.0).abs() < 1e-15);
        // Going around the loop is shorter on a circle.
        let c = MetricGraph::cycle(&[1.0]).unwrap();
        let d = c.distance(GraphPoint::new(EdgeIx(0), 0.1), GraphPoint::new(EdgeIx(0), 0.9)).unwrap();
        assert!((d - 0.2).abs() < 1e-15);
        assert!(g.distance(GraphPoint::new(e, 1.5), GraphPoint::new(e, 0.0)).is_err());
    }

    #[test]
    fn vertex_identification() {
        let s = MetricGraph::star(&[1.0, 2.0], Kirchhoff).unwrap();
        assert!(s.same_point(GraphPoint::new(EdgeIx(0), 0.0), GraphPoint::new(EdgeIx(1), 0.0)));
        assert!(!s.same_point(GraphPoint::new(EdgeIx(0), 1.0), GraphPoint::new(EdgeIx(1), 0.0)));
    }
}
