//! Scattering walks between two points of a metric graph.
//!
//! A walk leaves `x` along its edge (or goes straight to `y` when both sit on
//! the same edge), bounces at vertices, and ends at `y`. At each bounce it
//! picks up the scattering amplitude `σ[in][out]`; walks whose weight falls
//! below [`WEIGHT_FLOOR`] in magnitude (including exact zeros, e.g. reflection
//! at a degree-2 Kirchhoff vertex) are dropped.

use crate::error::{invalid, Error, Result};
use crate::graph::{GraphPoint, HalfEdge, MetricGraph, ScatteringMatrix, Side, VertexIx};
use alloc::vec::Vec;

pub const WEIGHT_FLOOR: f64 = 1e-300;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Bounce {
    pub vertex: VertexIx,
    pub incoming: HalfEdge,
    pub outgoing: HalfEdge,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ScatteringWalk {
    /// Direction taken when leaving `x`: towards the `U` or `V` end of its
    /// edge, or `None` for the direct walk along a shared edge.
    pub start: Option<Side>,
    pub bounces: Vec<Bounce>,
    pub length: f64,
    pub weight: f64,
}

/// Precomputed scattering tables of a graph.
#[derive(Debug, Clone)]
pub struct WalkTables {
    sigma: Vec<ScatteringMatrix>,
    // (edge, side) -> position in the incident list of the end vertex.
    slot: Vec<[usize; 2]>,
    // Nonzero outgoing amplitudes per vertex and incoming slot.
    out: Vec<Vec<Vec<(usize, f64)>>>,
    branching: f64,
}

impl WalkTables {
    pub fn new(g: &MetricGraph) -> Self {
        let sigma: Vec<ScatteringMatrix> =
            g.vertices().map(|v| g.scattering_matrix(v).expect("vertex exists")).collect();
        let mut slot = alloc::vec![[0usize; 2]; g.edge_count()];
        for v in g.vertices() {
            for (i, h) in g.incident(v).iter().enumerate() {
                slot[h.edge.0][side_ix(h.side)] = i;
            }
        }
        let mut branching: f64 = 1.0;
        let out = sigma
            .iter()
            .map(|m| {
                (0..m.degree())
                    .map(|a| {
                        let row: Vec<(usize, f64)> = (0..m.degree())
                            .map(|b| (b, m.get(a, b)))
                            .filter(|&(_, w)| w.abs() >= WEIGHT_FLOOR)
                            .collect();
                        let amp = row.iter().map(|&(_, w)| w.abs()).fold(1.0, f64::max);
                        branching = branching.max(row.len() as f64 * amp);
                        row
                    })
                    .collect()
            })
            .collect();
        Self { sigma, slot, out, branching }
    }

    pub fn sigma(&self, v: VertexIx) -> &ScatteringMatrix {
        &self.sigma[v.0]
    }

    /// Upper bound on the growth factor per bounce of Σ|weight|.
    pub fn branching(&self) -> f64 {
        self.branching
    }

    /// Rigorous upper bound on Σ|w| over walks of length at most `ell`.
    ///
    /// Every full edge traversed is at least `min_length` long, so such a walk
    /// has at most `floor(ell / min_length) + 1` bounces.
    pub fn weight_bound(&self, g: &MetricGraph, ell: f64) -> f64 {
        let k = crate::math::floor(ell / g.min_length()) as i32 + 1;
        let b = self.branching;
        let geometric = if b == 1.0 { (k + 1) as f64 } else { (crate::math::powf(b, (k + 1) as f64) - 1.0) / (b - 1.0) };
        1.0 + 2.0 * geometric
    }

    fn slot_of(&self, h: HalfEdge) -> usize {
        self.slot[h.edge.0][side_ix(h.side)]
    }
}

fn side_ix(s: Side) -> usize {
    match s {
        Side::U => 0,
        Side::V => 1,
    }
}

/// Depth-first traversal of all walks from `x` to `y` with length at most
/// `max_length`. Calls `emit(start, bounces, length, weight)` for each walk and
/// returns the number of walks, failing once more than `cap` are produced.
pub(crate) fn traverse<F>(
    g: &MetricGraph,
    tables: &WalkTables,
    x: GraphPoint,
    y: GraphPoint,
    max_length: f64,
    cap: usize,
    mut emit: F,
) -> Result<usize>
where
    F: FnMut(Option<Side>, &[Bounce], f64, f64),
{
    struct Ctx<'a, F> {
        g: &'a MetricGraph,
        t: &'a WalkTables,
        y: GraphPoint,
        max: f64,
        cap: usize,
        count: usize,
        stack: Vec<Bounce>,
        emit: F,
    }

    impl<F: FnMut(Option<Side>, &[Bounce], f64, f64)> Ctx<'_, F> {
        fn push(&mut self, start: Option<Side>, length: f64, weight: f64) -> Result<()> {
            self.count += 1;
            if self.count > self.cap {
                return Err(Error::TruncationUnreachable { walks: self.count, tail_bound: f64::NAN });
            }
            (self.emit)(start, &self.stack, length, weight);
            Ok(())
        }

        // Arrived at the vertex at `arrival` having walked `length`.
        fn visit(&mut self, start: Side, arrival: HalfEdge, length: f64, weight: f64) -> Result<()> {
            let v = self.g.end_vertex(arrival);
            let slot = self.t.slot_of(arrival);
            let outs = &self.t.out[v.0][slot];
            for idx in 0..outs.len() {
                let (j, sigma) = self.t.out[v.0][slot][idx];
                let w = weight * sigma;
                if w.abs() < WEIGHT_FLOOR {
                    continue;
                }
                let outgoing = self.g.incident(v)[j];
                let e = outgoing.edge;
                let l = self.g.length(e);
                self.stack.push(Bounce { vertex: v, incoming: arrival, outgoing });
                if self.y.edge == e {
                    let partial = match outgoing.side {
                        Side::U => self.y.s,
                        Side::V => l - self.y.s,
                    };
                    if length + partial <= self.max {
                        self.push(Some(start), length + partial, w)?;
                    }
                }
                let through = length + l;
                if through <= self.max {
                    let next = HalfEdge { edge: e, side: outgoing.side.opposite() };
                    self.visit(start, next, through, w)?;
                }
                self.stack.pop();
            }
            Ok(())
        }
    }

    let mut ctx = Ctx { g, t: tables, y, max: max_length, cap, count: 0, stack: Vec::new(), emit: &mut emit };
    if x.edge == y.edge {
        let d = (x.s - y.s).abs();
        if d <= max_length {
            ctx.push(None, d, 1.0)?;
        }
    }
    let l = g.length(x.edge);
    for (side, d) in [(Side::U, x.s), (Side::V, l - x.s)] {
        if d <= max_length {
            ctx.visit(side, HalfEdge { edge: x.edge, side }, d, 1.0)?;
        }
    }
    Ok(ctx.count)
}

/// All walks from `x` to `y` of length at most `max_length`, sorted by length
/// with ties broken by the sequence of (outgoing edge, vertex) pairs.
pub fn enumerate_walks(g: &MetricGraph, x: GraphPoint, y: GraphPoint, max_length: f64) -> Result<Vec<ScatteringWalk>> {
    if !(max_length >= 0.0) {
        return Err(invalid("max_length", "must be nonnegative"));
    }
    g.check_point(x)?;
    g.check_point(y)?;
    let tables = WalkTables::new(g);
    let mut walks = Vec::new();
    traverse(g, &tables, x, y, max_length, usize::MAX, |start, bounces, length, weight| {
        walks.push(ScatteringWalk { start, bounces: bounces.to_vec(), length, weight });
    })?;
    walks.sort_by(|a, b| {
        a.length
            .total_cmp(&b.length)
            .then_with(|| {
                let ka = a.bounces.iter().map(|b| (b.outgoing.edge, b.vertex));
                let kb = b.bounces.iter().map(|b| (b.outgoing.edge, b.vertex));
                ka.cmp(kb)
            })
            .then_with(|| a.start.cmp(&b.start))
    });
    Ok(walks)
}
