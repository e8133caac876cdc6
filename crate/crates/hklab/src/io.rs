//! Input documents and flag-value syntax.

use crate::error::{CliError, CliResult};
use hklab_core::graph::{EdgeSpec, VertexSpec};
use hklab_core::locality::{IsometryMap, MapPiece, Piece, SubdomainSpec};
use hklab_core::math::log_grid;
use hklab_core::{GraphPoint, MetricGraph, VertexCondition};
use serde::{Deserialize, Serialize};
use std::path::Path;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ConditionDoc {
    Kirchhoff,
    Dirichlet,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct VertexDoc {
    pub id: String,
    pub condition: ConditionDoc,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct EdgeDoc {
    pub id: String,
    pub u: String,
    pub v: String,
    pub length: f64,
}

/// `{"vertices":[{"id","condition"}], "edges":[{"id","u","v","length"}]}`
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GraphDoc {
    pub vertices: Vec<VertexDoc>,
    pub edges: Vec<EdgeDoc>,
}

impl GraphDoc {
    pub fn build(&self) -> CliResult<MetricGraph> {
        let vertices = self
            .vertices
            .iter()
            .map(|v| VertexSpec {
                id: v.id.clone(),
                condition: match v.condition {
                    ConditionDoc::Kirchhoff => VertexCondition::Kirchhoff,
                    ConditionDoc::Dirichlet => VertexCondition::Dirichlet,
                },
            })
            .collect();
        let edges = self
            .edges
            .iter()
            .map(|e| EdgeSpec { id: e.id.clone(), u: e.u.clone(), v: e.v.clone(), length: e.length })
            .collect();
        Ok(MetricGraph::new(vertices, edges)?)
    }

    pub fn from_graph(g: &MetricGraph) -> Self {
        let (vs, es) = g.specs();
        GraphDoc {
            vertices: vs
                .into_iter()
                .map(|v| VertexDoc {
                    id: v.id,
                    condition: match v.condition {
                        VertexCondition::Kirchhoff => ConditionDoc::Kirchhoff,
                        VertexCondition::Dirichlet => ConditionDoc::Dirichlet,
                    },
                })
                .collect(),
            edges: es.into_iter().map(|e| EdgeDoc { id: e.id, u: e.u, v: e.v, length: e.length }).collect(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PieceDoc {
    pub edge: String,
    pub lo: f64,
    pub hi: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct MapPieceDoc {
    /// Index into `source`.
    pub source: usize,
    pub target_edge: String,
    pub sign: f64,
    pub offset: f64,
}

/// Isometry between `U ⊂ A` and `U' ⊂ B`. Without `pieces`, each source
/// piece maps to the same arclengths on the edge of the same id in `B`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct MapDoc {
    pub source: Vec<PieceDoc>,
    pub target: Vec<PieceDoc>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub pieces: Option<Vec<MapPieceDoc>>,
}

impl MapDoc {
    pub fn build(&self, a: &MetricGraph, b: &MetricGraph) -> CliResult<IsometryMap> {
        let src = subdomain(a, &self.source)?;
        let dst = subdomain(b, &self.target)?;
        let pieces = match &self.pieces {
            Some(ps) => ps
                .iter()
                .map(|m| {
                    let p = self
                        .source
                        .get(m.source)
                        .ok_or_else(|| CliError::usage(format!("map piece refers to missing source piece {}", m.source)))?;
                    Ok(MapPiece {
                        source: piece(a, p)?,
                        target_edge: b.edge_by_id(&m.target_edge)?,
                        sign: m.sign,
                        offset: m.offset,
                    })
                })
                .collect::<CliResult<Vec<_>>>()?,
            None => self
                .source
                .iter()
                .map(|p| {
                    Ok(MapPiece { source: piece(a, p)?, target_edge: b.edge_by_id(&p.edge)?, sign: 1.0, offset: 0.0 })
                })
                .collect::<CliResult<Vec<_>>>()?,
        };
        // The subdomain sorts its pieces and snaps ends onto vertices.
        let close = |a: &Piece, b: &Piece| a.edge == b.edge && (a.lo - b.lo).abs() < 1e-9 && (a.hi - b.hi).abs() < 1e-9;
        let pieces = src
            .pieces()
            .iter()
            .map(|sp| {
                pieces
                    .iter()
                    .find(|m| close(&m.source, sp))
                    .map(|m| MapPiece { source: *sp, ..*m })
                    .ok_or_else(|| CliError::usage("map does not cover every source piece"))
            })
            .collect::<CliResult<Vec<_>>>()?;
        Ok(IsometryMap::new(src, dst, pieces)?)
    }
}

fn piece(g: &MetricGraph, p: &PieceDoc) -> CliResult<Piece> {
    Ok(Piece { edge: g.edge_by_id(&p.edge)?, lo: p.lo, hi: p.hi })
}

pub fn subdomain(g: &MetricGraph, pieces: &[PieceDoc]) -> CliResult<SubdomainSpec> {
    Ok(SubdomainSpec::new(g, pieces.iter().map(|p| piece(g, p)).collect::<CliResult<_>>()?)?)
}

pub fn read_text(path: &Path) -> CliResult<String> {
    std::fs::read_to_string(path).map_err(|e| CliError::Io { path: path.display().to_string(), message: e.to_string() })
}

pub fn read_json<T: for<'de> Deserialize<'de>>(path: &Path) -> CliResult<T> {
    let text = read_text(path)?;
    serde_json::from_str(&text).map_err(|e| CliError::Parse { path: path.display().to_string(), message: e.to_string() })
}

/// Parses and validates a graph document.
pub fn load_graph(path: &Path) -> CliResult<(GraphDoc, MetricGraph)> {
    let doc: GraphDoc = read_json(path)?;
    let g = doc.build()?;
    Ok((doc, g))
}

fn number(s: &str, what: &str) -> CliResult<f64> {
    s.trim().parse::<f64>().map_err(|_| CliError::usage(format!("{what}: cannot read number from '{s}'")))
}

/// `EDGE:S`, or just `S` on a single-edge graph.
pub fn parse_point(g: &MetricGraph, s: &str) -> CliResult<GraphPoint> {
    let p = match s.rsplit_once(':') {
        Some((edge, at)) => g.point(edge, number(at, "point")?)?,
        None if g.edge_count() == 1 => g.point(g.edge_id(hklab_core::EdgeIx(0)), number(s, "point")?)?,
        None => return Err(CliError::usage(format!("point '{s}' needs an edge: EDGE:S"))),
    };
    Ok(p)
}

/// Comma-separated open pieces `EDGE:LO:HI`; `LO:HI` on a single-edge graph.
pub fn parse_pieces(g: &MetricGraph, s: &str) -> CliResult<Vec<PieceDoc>> {
    s.split(',')
        .map(|part| {
            let fields: Vec<&str> = part.split(':').collect();
            match fields.as_slice() {
                [edge, lo, hi] => Ok(PieceDoc { edge: edge.to_string(), lo: number(lo, "piece")?, hi: number(hi, "piece")? }),
                [lo, hi] if g.edge_count() == 1 => Ok(PieceDoc {
                    edge: g.edge_id(hklab_core::EdgeIx(0)).to_string(),
                    lo: number(lo, "piece")?,
                    hi: number(hi, "piece")?,
                }),
                _ => Err(CliError::usage(format!("piece '{part}' must be EDGE:LO:HI"))),
            }
        })
        .collect()
}

/// `LO:HI:N` log-spaced, or a single time.
pub fn parse_tgrid(s: &str) -> CliResult<Vec<f64>> {
    let fields: Vec<&str> = s.split(':').collect();
    let grid = match fields.as_slice() {
        [t] => vec![number(t, "time")?],
        [lo, hi, n] => {
            let (lo, hi) = (number(lo, "t-grid")?, number(hi, "t-grid")?);
            let n: usize = n.trim().parse().map_err(|_| CliError::usage(format!("t-grid: bad count '{n}'")))?;
            if n == 0 || !(lo > 0.0 && hi >= lo) {
                return Err(CliError::usage(format!("t-grid '{s}' needs 0 < lo <= hi and n >= 1")));
            }
            log_grid(lo, hi, n)
        }
        _ => return Err(CliError::usage(format!("t-grid '{s}' must be LO:HI:N"))),
    };
    if grid.iter().any(|&t| !(t > 0.0 && t.is_finite())) {
        return Err(CliError::usage("times must be positive"));
    }
    Ok(grid)
}

#[cfg(test)]
mod tests {
    use super::*;

    const STAR: &str = r#"{"vertices":[{"id":"c","condition":"kirchhoff"},{"id":"l1","condition":"kirchhoff"},
        {"id":"l2","condition":"dirichlet"}],"edges":[{"id":"e1","u":"c","v":"l1","length":1.0},
        {"id":"e2","u":"c","v":"l2","length":0.5}]}"#;

    #[test]
    fn graph_round_trip() {
        let doc: GraphDoc = serde_json::from_str(STAR).unwrap();
        let g = doc.build().unwrap();
        assert_eq!(g.edge_count(), 2);
        assert_eq!(GraphDoc::from_graph(&g), doc);
    }

    #[test]
    fn unknown_condition_is_rejected() {
        let bad = STAR.replace("dirichlet", "robin");
        assert!(serde_json::from_str::<GraphDoc>(&bad).is_err());
    }

    #[test]
    fn point_and_piece_syntax() {
        let g: MetricGraph = serde_json::from_str::<GraphDoc>(STAR).unwrap().build().unwrap();
        assert_eq!(parse_point(&g, "e2:0.25").unwrap().s, 0.25);
        assert!(parse_point(&g, "0.25").is_err());
        assert!(parse_point(&g, "e2:0.75").is_err());
        let ps = parse_pieces(&g, "e1:0:0.4,e2:0:0.4").unwrap();
        assert_eq!(ps.len(), 2);
    }

    #[test]
    fn tgrid_is_log_spaced() {
        let g = parse_tgrid("0.01:1:3").unwrap();
        assert!((g[1] - 0.1).abs() < 1e-15);
        assert_eq!(parse_tgrid("0.05").unwrap(), vec![0.05]);
        assert!(parse_tgrid("0:1:3").is_err());
        assert!(parse_tgrid("1:2").is_err());
    }
}
