//! The approximate energy
//! `E_r(f) = ∫ (1/r) ∫_{B*_r(x)} ((f(y) − f(x)) / d(x, y))² dy dx`
//! on graph-sampled functions, and its comparison with `∫ (f′)²`.

use crate::error::{invalid, Error, Result};
use crate::graph::{EdgeIx, GraphPoint, HalfEdge, MetricGraph, Side};
use crate::math::round;
use alloc::vec::Vec;

/// Values on a uniform grid of each edge (`n_e + 1` nodes, `n_e = round(l / step)`).
#[derive(Debug, Clone, PartialEq)]
pub struct SampledFunction {
    values: Vec<Vec<f64>>,
    spacing: Vec<f64>,
}

impl SampledFunction {
    pub fn from_fn<F: FnMut(GraphPoint) -> f64>(g: &MetricGraph, step: f64, mut f: F) -> Result<Self> {
        if !(step > 0.0) {
            return Err(invalid("step", "must be positive"));
        }
        let mut values = Vec::new();
        let mut spacing = Vec::new();
        for e in g.edges() {
            let l = g.length(e);
            let n = (round(l / step) as usize).max(1);
            let h = l / n as f64;
            values.push((0..=n).map(|i| f(GraphPoint::new(e, if i == n { l } else { i as f64 * h }))).collect());
            spacing.push(h);
        }
        Self::from_values(g, values)
    }

    /// Per-edge node values; each edge's grid is uniform from `U` to `V`.
    pub fn from_values(g: &MetricGraph, values: Vec<Vec<f64>>) -> Result<Self> {
        if values.len() != g.edge_count() {
            return Err(invalid("values", "one array per edge"));
        }
        let mut spacing = Vec::new();
        for (e, v) in values.iter().enumerate() {
            if v.len() < 2 || v.iter().any(|x| !x.is_finite()) {
                return Err(invalid("values", "need at least two finite values per edge"));
            }
            spacing.push(g.length(EdgeIx(e)) / (v.len() - 1) as f64);
        }
        let f = Self { values, spacing };
        for v in g.vertices() {
            let ends: Vec<f64> = g.incident(v).iter().map(|&h| f.end_value(h)).collect();
            let jump = ends.iter().map(|x| (x - ends[0]).abs()).fold(0.0, f64::max);
            if jump > 1e-9 {
                return Err(Error::Discontinuous { vertex: g.vertex_id(v).into(), jump });
            }
        }
        Ok(f)
    }

    pub fn edge_values(&self, e: EdgeIx) -> &[f64] {
        &self.values[e.0]
    }

    pub fn spacing(&self, e: EdgeIx) -> f64 {
        self.spacing[e.0]
    }

    pub fn max_spacing(&self) -> f64 {
        self.spacing.iter().cloned().fold(0.0, f64::max)
    }

    fn end_value(&self, h: HalfEdge) -> f64 {
        let v = &self.values[h.edge.0];
        match h.side {
            Side::U => v[0],
            Side::V => v[v.len() - 1],
        }
    }

    /// Pointwise image under `φ`.
    pub fn map<F: Fn(f64) -> f64>(&self, phi: F) -> Self {
        Self { values: self.values.iter().map(|v| v.iter().map(|&x| phi(x)).collect()).collect(), spacing: self.spacing.clone() }
    }

    /// The unit contraction `min(max(f, 0), 1)`.
    pub fn unit_contraction(&self) -> Self {
        self.map(|x| x.clamp(0.0, 1.0))
    }

    pub fn scale(&self, c: f64) -> Self {
        self.map(|x| c * x)
    }

    pub fn add(&self, other: &Self) -> Result<Self> {
        if self.spacing != other.spacing {
            return Err(invalid("f", "grids differ"));
        }
        Ok(Self {
            values: self.values.iter().zip(&other.values).map(|(a, b)| a.iter().zip(b).map(|(x, y)| x + y).collect()).collect(),
            spacing: self.spacing.clone(),
        })
    }
}

// Quotient samples `(distance, q)` along rays leaving node `i` of edge `e`.
struct Ray {
    from_centre: bool,
    samples: Vec<(f64, f64)>,
    /// Where the ray stops, beyond its last node.
    end: f64,
}

fn quotient(fx: f64, fy: f64, d: f64) -> f64 {
    let q = (fy - fx) / d;
    q * q
}

// Walk from node `i` of `edge` in direction `dir` (±1) out to `radius`,
// branching at vertices.
#[allow(clippy::too_many_arguments)]
fn collect_rays(g: &MetricGraph, f: &SampledFunction, fx: f64, edge: usize, i: usize, dir: i64, d0: f64, radius: f64, out: &mut Vec<Ray>) {
    let vals = &f.values[edge];
    let h = f.spacing[edge];
    let n = vals.len() - 1;
    let mut samples = Vec::new();
    if d0 > 0.0 {
        samples.push((d0, quotient(fx, vals[i], d0)));
    }
    let mut j = i as i64;
    let mut d = d0;
    for k in 1.. {
        let next = j + dir;
        let dn = d0 + k as f64 * h;
        if next < 0 || next > n as i64 || dn > radius * (1.0 + 1e-12) {
            break;
        }
        j = next;
        d = dn;
        samples.push((d, quotient(fx, vals[j as usize], d)));
    }
    let at_end = j == 0 || j == n as i64;
    let reached_vertex = at_end && (j != i as i64 || d0 > 0.0);
    out.push(Ray { from_centre: d0 == 0.0, samples, end: if reached_vertex && d < radius { d } else { radius } });
    if reached_vertex && d < radius {
        let arrived = HalfEdge { edge: EdgeIx(edge), side: if j == 0 { Side::U } else { Side::V } };
        let v = g.end_vertex(arrived);
        for &h2 in g.incident(v) {
            if h2 == arrived {
                continue;
            }
            let (start, dir2) = match h2.side {
                Side::U => (0usize, 1i64),
                Side::V => (f.values[h2.edge.0].len() - 1, -1i64),
            };
            collect_rays(g, f, fx, h2.edge.0, start, dir2, d, radius, out);
        }
    }
}

fn check_radius(g: &MetricGraph, f: &SampledFunction, r: f64) -> Result<()> {
    if !(r > 0.0 && r < g.min_length() / 2.0) {
        return Err(invalid("r", "must lie in (0, min edge length / 2)"));
    }
    if f.max_spacing() > r / 20.0 * (1.0 + 1e-9) {
        return Err(invalid("f", "grid step must be at most r / 20"));
    }
    Ok(())
}

// Inner integral over the punctured ball at node `i` of edge `e`.
fn inner(g: &MetricGraph, f: &SampledFunction, e: usize, i: usize, r: f64) -> f64 {
    let vals = &f.values[e];
    let n = vals.len() - 1;
    let fx = vals[i];
    let mut rays = Vec::new();
    if i == 0 || i == n {
        // A vertex node: rays along every incident edge.
        let v = g.end_vertex(HalfEdge { edge: EdgeIx(e), side: if i == 0 { Side::U } else { Side::V } });
        for &h in g.incident(v) {
            let (start, dir) = match h.side {
                Side::U => (0usize, 1i64),
                Side::V => (f.values[h.edge.0].len() - 1, -1i64),
            };
            collect_rays(g, f, fx, h.edge.0, start, dir, 0.0, r, &mut rays);
        }
    } else {
        collect_rays(g, f, fx, e, i, 1, 0.0, r, &mut rays);
        collect_rays(g, f, fx, e, i, -1, 0.0, r, &mut rays);
    }
    // Rays starting at x carry the punctured centre; fill it with the mean
    // of their first quotients.
    let firsts: Vec<f64> = rays.iter().filter(|r| r.from_centre).filter_map(|r| r.samples.first().map(|s| s.1)).collect();
    let centre = if firsts.is_empty() { 0.0 } else { firsts.iter().sum::<f64>() / firsts.len() as f64 };
    let mut total = 0.0;
    for ray in &rays {
        let (mut pu, mut pq, skip) = if ray.from_centre {
            (0.0, centre, 0)
        } else {
            match ray.samples.first() {
                Some(&s) => (s.0, s.1, 1),
                None => continue,
            }
        };
        for &(u, q) in &ray.samples[skip..] {
            total += 0.5 * (u - pu) * (q + pq);
            pu = u;
            pq = q;
        }
        total += (ray.end - pu).max(0.0) * pq;
    }
    total
}

/// `E_r(f)` by trapezoid rules in both variables.
pub fn energy_er(g: &MetricGraph, f: &SampledFunction, r: f64) -> Result<f64> {
    check_radius(g, f, r)?;
    let mut total = 0.0;
    for e in 0..g.edge_count() {
        let n = f.values[e].len() - 1;
        let h = f.spacing[e];
        for i in 0..=n {
            let w = if i == 0 || i == n { 0.5 * h } else { h };
            total += w * inner(g, f, e, i, r);
        }
    }
    Ok(total / r)
}

/// `Σ_e ∫ (f′)²` with second-order differences and the trapezoid rule.
pub fn energy_classical(g: &MetricGraph, f: &SampledFunction) -> Result<f64> {
    let mut total = 0.0;
    for e in 0..g.edge_count() {
        let v = &f.values[e];
        let n = v.len() - 1;
        if n < 8 {
            return Err(invalid("f", "needs at least 8 grid points per edge"));
        }
        let h = f.spacing[e];
        for i in 0..=n {
            let d = if i == 0 {
                (-3.0 * v[0] + 4.0 * v[1] - v[2]) / (2.0 * h)
            } else if i == n {
                (3.0 * v[n] - 4.0 * v[n - 1] + v[n - 2]) / (2.0 * h)
            } else {
                (v[i + 1] - v[i - 1]) / (2.0 * h)
            };
            let w = if i == 0 || i == n { 0.5 * h } else { h };
            total += w * d * d;
        }
    }
    Ok(total)
}

/// One row of a convergence study.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct StudyRow {
    pub r: f64,
    pub energy: f64,
    pub ratio: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Study {
    pub rows: Vec<StudyRow>,
    pub classical: f64,
    /// Limit of the ratio, extrapolated with the observed geometric rate of
    /// the last two differences (an `r²` rate with only two rows).
    pub kappa: f64,
}

impl Study {
    /// `|ratio(r_{k+1}) − ratio(r_k)|` for consecutive rows.
    pub fn differences(&self) -> Vec<f64> {
        self.rows.windows(2).map(|w| (w[1].ratio - w[0].ratio).abs()).collect()
    }

    /// Each difference at most half the previous one.
    pub fn converges(&self) -> bool {
        let d = self.differences();
        d.len() >= 2 && d.windows(2).all(|w| w[1] <= 0.5 * w[0])
    }
}

pub fn convergence_study(g: &MetricGraph, f: &SampledFunction, r_grid: &[f64]) -> Result<Study> {
    if r_grid.len() < 2 || r_grid.windows(2).any(|w| !(w[1] < w[0])) {
        return Err(invalid("r_grid", "needs at least two strictly decreasing radii"));
    }
    let classical = energy_classical(g, f)?;
    if !(classical > 0.0) {
        return Err(invalid("f", "classical energy vanishes"));
    }
    let mut rows = Vec::new();
    for &r in r_grid {
        let energy = energy_er(g, f, r)?;
        rows.push(StudyRow { r, energy, ratio: energy / classical });
    }
    let n = rows.len();
    let (a, b) = (rows[n - 2], rows[n - 1]);
    let rate = if n >= 3 && a.ratio != rows[n - 3].ratio {
        ((b.ratio - a.ratio) / (a.ratio - rows[n - 3].ratio)).clamp(0.0, 0.9)
    } else {
        (b.r / a.r) * (b.r / a.r)
    };
    let kappa = b.ratio + (b.ratio - a.ratio) * rate / (1.0 - rate);
    Ok(Study { rows, classical, kappa })
}

/// `E_r(f) ≤ E_{r/2}(f)` up to `tol`.
pub fn subpartition_check(g: &MetricGraph, f: &SampledFunction, r: f64, tol: f64) -> Result<bool> {
    Ok(energy_er(g, f, r)? <= energy_er(g, f, r / 2.0)? + tol)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::graph::VertexCondition::*;
    use crate::math::{sin, PI};

    fn circle_sin(step: f64) -> (MetricGraph, SampledFunction) {
        let g = MetricGraph::cycle(&[1.0]).unwrap();
        let f = SampledFunction::from_fn(&g, step, |p| sin(2.0 * PI * p.s)).unwrap();
        (g, f)
    }

    #[test]
    fn constants_have_zero_energy() {
        let g = MetricGraph::star(&[1.0, 1.0, 1.0], Kirchhoff).unwrap();
        let f = SampledFunction::from_fn(&g, 1e-3, |_| 3.0).unwrap();
        assert_eq!(energy_er(&g, &f, 0.05).unwrap(), 0.0);
        assert_eq!(energy_classical(&g, &f).unwrap(), 0.0);
        assert!(subpartition_check(&g, &f, 0.05, 0.0).unwrap());
    }

    #[test]
    fn classical_energies() {
        let (g, f) = circle_sin(1e-4);
        assert!((energy_classical(&g, &f).unwrap() - 2.0 * PI * PI).abs() < 1e-5);
        let g = MetricGraph::interval(1.0, Kirchhoff, Kirchhoff).unwrap();
        let f = SampledFunction::from_fn(&g, 0.01, |p| p.s).unwrap();
        assert!((energy_classical(&g, &f).unwrap() - 1.0).abs() < 1e-12);
        let coarse = SampledFunction::from_fn(&g, 0.2, |p| p.s).unwrap();
        assert!(energy_classical(&g, &coarse).is_err());
    }

    #[test]
    fn seam_discontinuity_rejected() {
        let g = MetricGraph::cycle(&[1.0]).unwrap();
        assert!(matches!(SampledFunction::from_fn(&g, 0.01, |p| p.s), Err(Error::Discontinuous { .. })));
    }

    #[test]
    fn circle_ratio_near_two() {
        let (g, f) = circle_sin(1e-3 / 20.0);
        let e = energy_er(&g, &f, 1e-3).unwrap();
        let ratio = e / (2.0 * PI * PI);
        assert!((ratio - 2.0).abs() < 1e-3, "{ratio}");
        assert!(energy_er(&g, &f, 0.6).is_err());
        assert!(energy_er(&g, &f, 1e-4).is_err());
    }

    #[test]
    fn study_converges_to_two() {
        let (g, f) = circle_sin(6.25e-5);
        let s = convergence_study(&g, &f, &[1e-2, 5e-3, 2.5e-3, 1.25e-3]).unwrap();
        assert!(s.converges(), "{:?}", s.differences());
        assert!((s.kappa - 2.0).abs() < 1e-4, "{}", s.kappa);
        assert!(subpartition_check(&g, &f, 1e-2, 1e-6).unwrap());
    }

    #[test]
    fn quadratic_form_scaling() {
        let (g, f) = circle_sin(2.5e-4);
        let e = energy_er(&g, &f, 5e-3).unwrap();
        let e3 = energy_er(&g, &f.scale(3.0), 5e-3).unwrap();
        assert!((e3 - 9.0 * e).abs() < 1e-9 * e3);
    }

    #[test]
    fn star_vertex_balls_cover_all_legs() {
        let g = MetricGraph::star(&[1.0, 1.0, 1.0], Kirchhoff).unwrap();
        // Linear in distance from the centre on one leg, zero elsewhere.
        let f = SampledFunction::from_fn(&g, 1e-3, |p| if p.edge == EdgeIx(0) { p.s } else { 0.0 }).unwrap();
        let e = energy_er(&g, &f, 0.05).unwrap();
        // Points on leg 0 see quotient 1 towards other legs and along leg 0.
        assert!(e > 0.0 && e < 2.0 * energy_classical(&g, &f).unwrap() + 0.1);
    }
}
