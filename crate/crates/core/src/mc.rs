//! Brownian motion on metric graphs by lattice random walks: single paths,
//! first exits from subdomains, spliced ensembles, and two-sample
//! histogram comparisons.
//!
//! Each edge carries a lattice of spacing `h_e = l / round(l / h)`. A step
//! moves `±h_e` with probability 1/2 and lasts `h² / 2`, so the walk has
//! variance `2t` and matches kernels of the form `exp(−d²/4t)`. At a
//! Kirchhoff vertex the walker leaves along a uniformly chosen incident
//! edge; Dirichlet vertices kill it.
//!
//! Ensembles advance through edge interiors in exact blocks: `m` steps with
//! no possible event are one `Binomial(m, 1/2)` draw.

use crate::error::{invalid, Error, Result};
use crate::graph::{EdgeIx, GraphPoint, MetricGraph, Side, VertexCondition, VertexIx};
use crate::locality::{IsometryMap, SubdomainSpec};
use crate::math::{chi_square_sf, round};
use alloc::format;
use alloc::vec;
use alloc::vec::Vec;
use rand_chacha::ChaCha8Rng;
use rand_core::{RngCore, SeedableRng};

/// Default decimation of stored paths.
pub const DEFAULT_DECIMATION: u64 = 16;

/// Generator for path `index`, segment `segment` of a run with `seed`.
pub fn path_rng(seed: u64, index: u64, segment: u64) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(index.wrapping_mul(4).wrapping_add(segment));
    rng
}

fn binomial_half<R: RngCore>(rng: &mut R, m: u64) -> u64 {
    let mut left = m;
    let mut count = 0u64;
    while left >= 64 {
        count += rng.next_u64().count_ones() as u64;
        left -= 64;
    }
    if left > 0 {
        count += (rng.next_u64() & ((1u64 << left) - 1)).count_ones() as u64;
    }
    count
}

fn uniform_below<R: RngCore>(rng: &mut R, n: u64) -> u64 {
    // Rejection keeps the choice exactly uniform.
    let zone = u64::MAX - u64::MAX % n;
    loop {
        let x = rng.next_u64();
        if x < zone {
            return x % n;
        }
    }
}

/// Lattice position: edge and site index `0 ..= n_e`.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Site {
    pub edge: usize,
    pub i: u64,
}

/// The lattice of one graph for a step `h` and horizon `T`.
#[derive(Debug, Clone)]
pub struct Lattice<'g> {
    graph: &'g MetricGraph,
    sites: Vec<u64>,
    spacing: Vec<f64>,
    h: f64,
    steps: u64,
}

impl<'g> Lattice<'g> {
    pub fn new(graph: &'g MetricGraph, h: f64, horizon: f64) -> Result<Self> {
        if !(h > 0.0 && h < graph.min_length() / 4.0) {
            return Err(invalid("h", "must lie in (0, min edge length / 4)"));
        }
        if !(horizon > 0.0) {
            return Err(invalid("T", "horizon must be positive"));
        }
        let sites: Vec<u64> = graph.edges().map(|e| round(graph.length(e) / h) as u64).collect();
        let spacing = graph.edges().map(|e| graph.length(e) / sites[e.0] as f64).collect();
        let steps = round(horizon / (h * h / 2.0)) as u64;
        Ok(Self { graph, sites, spacing, h, steps })
    }

    pub fn graph(&self) -> &'g MetricGraph {
        self.graph
    }

    /// Time per step, `h² / 2`.
    pub fn dt(&self) -> f64 {
        self.h * self.h / 2.0
    }

    pub fn steps(&self) -> u64 {
        self.steps
    }

    pub fn h(&self) -> f64 {
        self.h
    }

    /// Nearest lattice site.
    pub fn site(&self, p: GraphPoint) -> Result<Site> {
        self.graph.check_point(p)?;
        let e = p.edge.0;
        Ok(Site { edge: e, i: (round(p.s / self.spacing[e]) as u64).min(self.sites[e]) })
    }

    pub fn point(&self, s: Site) -> GraphPoint {
        let l = self.graph.length(EdgeIx(s.edge));
        let x = if s.i == self.sites[s.edge] { l } else { s.i as f64 * self.spacing[s.edge] };
        GraphPoint::new(EdgeIx(s.edge), x)
    }

    fn vertex_at(&self, s: Site) -> Option<VertexIx> {
        let (u, v) = self.graph.endpoints(EdgeIx(s.edge));
        if s.i == 0 {
            Some(u)
        } else if s.i == self.sites[s.edge] {
            Some(v)
        } else {
            None
        }
    }

    fn leave_vertex<R: RngCore>(&self, rng: &mut R, v: VertexIx) -> Site {
        let ends = self.graph.incident(v);
        let h = ends[uniform_below(rng, ends.len() as u64) as usize];
        match h.side {
            Side::U => Site { edge: h.edge.0, i: 1 },
            Side::V => Site { edge: h.edge.0, i: self.sites[h.edge.0] - 1 },
        }
    }
}

/// Sites on each edge where a walker leaves `U`.
#[derive(Debug, Clone)]
pub struct CutSites {
    per_edge: Vec<Vec<u64>>,
}

impl CutSites {
    /// Lower cuts round down and upper cuts round up to the lattice.
    pub fn new(lattice: &Lattice<'_>, u: &SubdomainSpec) -> Self {
        let mut per_edge = vec![Vec::new(); lattice.sites.len()];
        let l = |e: EdgeIx| lattice.graph.length(e);
        for p in u.pieces() {
            let e = p.edge.0;
            let a = lattice.spacing[e];
            if p.lo > 0.0 {
                per_edge[e].push(crate::math::floor(p.lo / a + 1e-9) as u64);
            }
            if p.hi < l(p.edge) {
                per_edge[e].push(crate::math::ceil(p.hi / a - 1e-9) as u64);
            }
        }
        for v in per_edge.iter_mut() {
            v.sort_unstable();
        }
        Self { per_edge }
    }

    fn is_cut(&self, s: Site) -> bool {
        self.per_edge[s.edge].contains(&s.i)
    }
}

/// How a run segment ended.
#[derive(Debug, Clone, Copy, PartialEq)]
enum Stop {
    Horizon(Site),
    Killed(u64),
    Exit(u64, Site),
}

// Advance from `site` at step `start` until the horizon, a Dirichlet vertex,
// or (when watching) a cut site.
fn advance<R: RngCore>(lat: &Lattice<'_>, rng: &mut R, mut site: Site, mut step: u64, cuts: Option<&CutSites>) -> Stop {
    let total = lat.steps;
    loop {
        if let Some(c) = cuts {
            if c.is_cut(site) {
                return Stop::Exit(step, site);
            }
        }
        if step >= total {
            return Stop::Horizon(site);
        }
        if let Some(v) = lat.vertex_at(site) {
            if lat.graph.condition(v) == VertexCondition::Dirichlet {
                return Stop::Killed(step);
            }
            site = lat.leave_vertex(rng, v);
            step += 1;
            continue;
        }
        let n = lat.sites[site.edge];
        let mut lo = 0u64;
        let mut hi = n;
        if let Some(c) = cuts {
            for &k in &c.per_edge[site.edge] {
                if k < site.i {
                    lo = lo.max(k);
                } else if k > site.i {
                    hi = hi.min(k);
                }
            }
        }
        let m = (site.i - lo).min(hi - site.i).min(total - step);
        let up = binomial_half(rng, m);
        site.i = site.i + 2 * up - m;
        step += m;
    }
}

/// Fate of one path of an ensemble.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PathOutcome {
    /// Position at the horizon, `None` when killed.
    pub end: Option<GraphPoint>,
    pub killed_at: Option<f64>,
    /// First exit from the watched set as `(time, cut point)`.
    pub exit: Option<(f64, GraphPoint)>,
}

fn snap_to_cut(u: &SubdomainSpec, p: GraphPoint) -> GraphPoint {
    u.cut_points()
        .iter()
        .filter(|c| c.edge == p.edge)
        .min_by(|a, b| (a.s - p.s).abs().total_cmp(&(b.s - p.s).abs()))
        .copied()
        .unwrap_or(p)
}

/// One path on a single graph. With `watch`, the path runs on segment 0
/// until it leaves `U` and on segment 1 afterwards; without, segment 0
/// throughout.
pub fn direct_path(lat: &Lattice<'_>, x0: GraphPoint, seed: u64, index: u64, watch: Option<(&SubdomainSpec, &CutSites)>) -> Result<PathOutcome> {
    let start = lat.site(x0)?;
    let mut rng = path_rng(seed, index, 0);
    let dt = lat.dt();
    let first = advance(lat, &mut rng, start, 0, watch.map(|w| w.1));
    Ok(match first {
        Stop::Horizon(s) => PathOutcome { end: Some(lat.point(s)), killed_at: None, exit: None },
        Stop::Killed(n) => PathOutcome { end: None, killed_at: Some(n as f64 * dt), exit: None },
        Stop::Exit(n, s) => {
            let u = watch.unwrap().0;
            let exit = Some((n as f64 * dt, snap_to_cut(u, lat.point(s))));
            let mut rng = path_rng(seed, index, 1);
            match advance(lat, &mut rng, s, n, None) {
                Stop::Horizon(s) => PathOutcome { end: Some(lat.point(s)), killed_at: None, exit },
                Stop::Killed(k) => PathOutcome { end: None, killed_at: Some(k as f64 * dt), exit },
                Stop::Exit(..) => unreachable!(),
            }
        }
    })
}

/// Configuration of a spliced ensemble: law of `A` inside `U`, law of `B`
/// after the first exit.
#[derive(Debug, Clone)]
pub struct SpliceConfig {
    pub graph_a: MetricGraph,
    pub graph_b: MetricGraph,
    /// From `U ⊂ A` onto its image in `B`.
    pub map: IsometryMap,
    pub x0: GraphPoint,
    pub horizon: f64,
    pub h: f64,
    pub paths: u64,
    pub seed: u64,
}

/// Lattices and cut sites of a [`SpliceConfig`], shared by all paths.
pub struct SplicePlan<'c> {
    cfg: &'c SpliceConfig,
    lat_a: Lattice<'c>,
    lat_b: Lattice<'c>,
    cuts_a: CutSites,
}

impl<'c> SplicePlan<'c> {
    pub fn new(cfg: &'c SpliceConfig) -> Result<Self> {
        let lat_a = Lattice::new(&cfg.graph_a, cfg.h, cfg.horizon)?;
        let lat_b = Lattice::new(&cfg.graph_b, cfg.h, cfg.horizon)?;
        if !cfg.map.source().contains(cfg.x0) {
            return Err(Error::OutsideSubdomain(format!("start {}:{}", cfg.graph_a.edge_id(cfg.x0.edge), cfg.x0.s)));
        }
        let cuts_a = CutSites::new(&lat_a, cfg.map.source());
        Ok(Self { cfg, lat_a, lat_b, cuts_a })
    }

    /// Path `index` of the spliced ensemble, positions in `B` coordinates.
    pub fn path(&self, index: u64) -> Result<PathOutcome> {
        let cfg = self.cfg;
        let dt = self.lat_a.dt();
        let mut rng = path_rng(cfg.seed, index, 0);
        let start = self.lat_a.site(cfg.x0)?;
        match advance(&self.lat_a, &mut rng, start, 0, Some(&self.cuts_a)) {
            Stop::Horizon(s) => Ok(PathOutcome { end: Some(cfg.map.map(self.lat_a.point(s))?), killed_at: None, exit: None }),
            Stop::Killed(n) => Ok(PathOutcome { end: None, killed_at: Some(n as f64 * dt), exit: None }),
            Stop::Exit(n, s) => {
                let b = snap_to_cut(cfg.map.source(), self.lat_a.point(s));
                let image = cfg.map.map(b)?;
                let exit = Some((n as f64 * dt, image));
                let mut rng = path_rng(cfg.seed, index, 1);
                let site = self.lat_b.site(image)?;
                Ok(match advance(&self.lat_b, &mut rng, site, n, None) {
                    Stop::Horizon(s) => PathOutcome { end: Some(self.lat_b.point(s)), killed_at: None, exit },
                    Stop::Killed(k) => PathOutcome { end: None, killed_at: Some(k as f64 * dt), exit },
                    Stop::Exit(..) => unreachable!(),
                })
            }
        }
    }
}

/// The whole spliced ensemble, in path order.
pub fn splice(cfg: &SpliceConfig) -> Result<Vec<PathOutcome>> {
    let plan = SplicePlan::new(cfg)?;
    (0..cfg.paths).map(|i| plan.path(i)).collect()
}

/// Direct ensemble on one graph, optionally segmented at the exit from `U`.
pub fn ensemble(g: &MetricGraph, x0: GraphPoint, horizon: f64, h: f64, paths: u64, seed: u64, watch: Option<&SubdomainSpec>) -> Result<Vec<PathOutcome>> {
    let lat = Lattice::new(g, h, horizon)?;
    let cuts = watch.map(|u| CutSites::new(&lat, u));
    let w = watch.zip(cuts.as_ref());
    (0..paths).map(|i| direct_path(&lat, x0, seed, i, w)).collect()
}

/// A stored path: every `decimation`-th step plus the first exit from the
/// watched set and the killing step.
#[derive(Debug, Clone, PartialEq)]
pub struct PathSample {
    pub h: f64,
    pub dt: f64,
    pub seed: u64,
    pub decimation: u64,
    /// `(step, position)` pairs in increasing step order.
    pub samples: Vec<(u64, GraphPoint)>,
    pub killed_at: Option<u64>,
    pub exit: Option<(u64, GraphPoint)>,
}

impl PathSample {
    pub fn horizon(&self) -> f64 {
        self.samples.last().map_or(0.0, |s| s.0 as f64 * self.dt)
    }

    pub fn time(&self, step: u64) -> f64 {
        step as f64 * self.dt
    }
}

/// Step-by-step walk from `x0` up to `T`, watching `U` if given.
pub fn simulate(g: &MetricGraph, x0: GraphPoint, horizon: f64, h: f64, seed: u64, decimation: u64, watch: Option<&SubdomainSpec>) -> Result<PathSample> {
    let lat = Lattice::new(g, h, horizon)?;
    let cuts = watch.map(|u| CutSites::new(&lat, u));
    let decimation = decimation.max(1);
    let mut rng = path_rng(seed, 0, 0);
    let mut site = lat.site(x0)?;
    let mut out = PathSample { h, dt: lat.dt(), seed, decimation, samples: vec![(0, lat.point(site))], killed_at: None, exit: None };
    for step in 1..=lat.steps {
        site = match lat.vertex_at(site) {
            Some(v) if g.condition(v) == VertexCondition::Dirichlet => {
                out.killed_at = Some(step - 1);
                break;
            }
            Some(v) => lat.leave_vertex(&mut rng, v),
            None => {
                let up = rng.next_u64() >> 63 == 1;
                Site { edge: site.edge, i: if up { site.i + 1 } else { site.i - 1 } }
            }
        };
        let p = lat.point(site);
        if out.exit.is_none() {
            if let (Some(c), Some(u)) = (&cuts, watch) {
                if c.is_cut(site) {
                    out.exit = Some((step, snap_to_cut(u, p)));
                    if step % decimation != 0 {
                        out.samples.push((step, p));
                    }
                }
            }
        }
        if step % decimation == 0 || step == lat.steps {
            out.samples.push((step, p));
        }
    }
    Ok(out)
}

/// First exit of a stored path from `U`: `(time, cut point)` or `None`.
pub fn first_exit(path: &PathSample, u: &SubdomainSpec) -> Result<Option<(f64, GraphPoint)>> {
    let start = path.samples.first().ok_or_else(|| invalid("path", "empty"))?.1;
    if !u.contains(start) {
        return Err(Error::OutsideSubdomain("path start".into()));
    }
    if let Some((step, p)) = path.exit {
        if u.is_cut(p) {
            return Ok(Some((path.time(step), p)));
        }
    }
    let half = path.h / 2.0;
    for &(step, p) in &path.samples {
        if !u.contains(p) || u.cut_points().iter().any(|c| c.edge == p.edge && (c.s - p.s).abs() < half) {
            return Ok(Some((path.time(step), snap_to_cut(u, p))));
        }
    }
    Ok(None)
}

/// One histogram bin; `edge` is `None` for time bins.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Bin {
    pub edge: Option<EdgeIx>,
    pub lo: f64,
    pub hi: f64,
}

/// Counts per bin plus one extra category (killed paths, or paths that
/// never exit).
#[derive(Debug, Clone, PartialEq)]
pub struct Histogram {
    pub bins: Vec<Bin>,
    pub counts: Vec<u64>,
    pub extra: u64,
}

impl Histogram {
    pub fn total(&self) -> u64 {
        self.counts.iter().sum::<u64>() + self.extra
    }
}

/// Endpoint positions, `bins` equal bins per edge; killed paths go to the
/// extra category.
pub fn endpoint_histogram(g: &MetricGraph, outcomes: &[PathOutcome], bins: usize) -> Histogram {
    let mut hist = Histogram { bins: Vec::new(), counts: Vec::new(), extra: 0 };
    for e in g.edges() {
        let l = g.length(e);
        for k in 0..bins {
            hist.bins.push(Bin { edge: Some(e), lo: l * k as f64 / bins as f64, hi: l * (k + 1) as f64 / bins as f64 });
        }
    }
    hist.counts = vec![0; hist.bins.len()];
    for o in outcomes {
        match o.end {
            Some(p) => {
                let l = g.length(p.edge);
                let k = ((p.s / l * bins as f64) as usize).min(bins - 1);
                hist.counts[p.edge.0 * bins + k] += 1;
            }
            None => hist.extra += 1,
        }
    }
    hist
}

/// Exit times over `[0, T]`; paths that never exit go to the extra category.
pub fn exit_time_histogram(outcomes: &[PathOutcome], horizon: f64, bins: usize) -> Histogram {
    let mut hist = Histogram {
        bins: (0..bins).map(|k| Bin { edge: None, lo: horizon * k as f64 / bins as f64, hi: horizon * (k + 1) as f64 / bins as f64 }).collect(),
        counts: vec![0; bins],
        extra: 0,
    };
    for o in outcomes {
        match o.exit {
            Some((t, _)) => hist.counts[((t / horizon * bins as f64) as usize).min(bins - 1)] += 1,
            None => hist.extra += 1,
        }
    }
    hist
}

/// Which statistic [`compare_ensembles`] bins.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Statistic {
    Endpoint,
    ExitTime,
}

/// Two-sample Pearson chi-square on `(bins..., extra)` categories. Adjacent
/// categories are merged until both expected counts reach 5. Returns
/// `(statistic, p-value)`.
pub fn compare_histograms(a: &Histogram, b: &Histogram) -> Result<(f64, f64)> {
    if a.bins != b.bins {
        return Err(invalid("histograms", "bins differ"));
    }
    let (na, nb) = (a.total() as f64, b.total() as f64);
    if na == 0.0 || nb == 0.0 {
        return Err(Error::InsufficientCounts { bins: 0 });
    }
    let cats: Vec<(f64, f64)> = a.counts.iter().zip(&b.counts).map(|(&x, &y)| (x as f64, y as f64)).chain([(a.extra as f64, b.extra as f64)]).collect();
    let n = na + nb;
    let enough = |c: (f64, f64)| {
        let pooled = c.0 + c.1;
        pooled * na / n >= 5.0 && pooled * nb / n >= 5.0
    };
    let mut merged: Vec<(f64, f64)> = Vec::new();
    let mut acc = (0.0, 0.0);
    for c in cats {
        acc = (acc.0 + c.0, acc.1 + c.1);
        if enough(acc) {
            merged.push(acc);
            acc = (0.0, 0.0);
        }
    }
    if acc.0 + acc.1 > 0.0 {
        match merged.last_mut() {
            Some(last) => *last = (last.0 + acc.0, last.1 + acc.1),
            None => merged.push(acc),
        }
    }
    if merged.len() < 2 {
        return Err(Error::InsufficientCounts { bins: merged.len() });
    }
    let ka = crate::math::sqrt(nb / na);
    let kb = crate::math::sqrt(na / nb);
    let stat: f64 = merged.iter().map(|&(x, y)| (ka * x - kb * y) * (ka * x - kb * y) / (x + y)).sum();
    let dof = (merged.len() - 1) as f64;
    Ok((stat, chi_square_sf(stat, dof)))
}

pub fn compare_ensembles(g: &MetricGraph, e1: &[PathOutcome], e2: &[PathOutcome], statistic: Statistic, bins: usize, horizon: f64) -> Result<(f64, f64)> {
    let (a, b) = match statistic {
        Statistic::Endpoint => (endpoint_histogram(g, e1, bins), endpoint_histogram(g, e2, bins)),
        Statistic::ExitTime => (exit_time_histogram(e1, horizon, bins), exit_time_histogram(e2, horizon, bins)),
    };
    compare_histograms(&a, &b)
}
