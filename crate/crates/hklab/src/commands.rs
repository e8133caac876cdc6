//! One function per subcommand. Each writes its result files and returns
//! the summary line.

use crate::cli::*;
use crate::error::{CliError, CliResult};
use crate::io::{load_graph, parse_pieces, parse_point, parse_tgrid, read_json, subdomain, GraphDoc, MapDoc};
use crate::output::{jnum, jnums, num, Emitter};
use crate::{acceptance, parallel};
use hklab_core::dirichlet::{convergence_study, SampledFunction};
use hklab_core::kernel::{AdaptiveKernel, HeatKernel, KernelEval, PathSumKernel};
use hklab_core::locality::{decomposition_residual, locality_compare, KilledKernel, Piece, SubdomainSpec};
use hklab_core::math::{exp, sin, PI};
use hklab_core::mc::{compare_ensembles, endpoint_histogram, exit_time_histogram, simulate as simulate_path, Histogram, PathOutcome, SpliceConfig, Statistic};
use hklab_core::quadrature::simpson;
use hklab_core::spectral::{eigen_report, heat_trace_tail, SpectralKernel};
use hklab_core::two_particle::{
    asymptotic_fit, decomposition, predicted_exact, region_contributions, trace_series_eigen, trace_two_particle, AsymptoticFit, ExactCoefficients, Q2,
    Region, TraceSeries,
};
use hklab_core::{GraphPoint, MetricGraph};
use rayon::prelude::*;
use serde::Serialize;
use serde_json::{json, Value};
use std::path::Path;

fn config<A: Serialize>(command: &str, args: &A, graphs: &[(&str, &GraphDoc)]) -> Value {
    let mut v = json!({ "command": command, "args": args });
    for (name, doc) in graphs {
        v[*name] = json!(doc);
    }
    v
}

fn point_name(g: &MetricGraph, p: GraphPoint) -> String {
    format!("{}:{}", g.edge_id(p.edge), num(p.s))
}

fn pieces_json(g: &MetricGraph, pieces: &[Piece]) -> Value {
    Value::Array(pieces.iter().map(|p| json!({ "edge": g.edge_id(p.edge), "lo": jnum(p.lo), "hi": jnum(p.hi) })).collect())
}

pub fn validate(path: &Path) -> CliResult<Outcome> {
    let (_, g) = load_graph(path)?;
    Ok(Outcome::ok(format!(
        "valid graph: {} vertices, {} edges, total length {}",
        g.vertex_count(),
        g.edge_count(),
        num(g.total_length())
    )))
}

pub fn kernel(a: &KernelArgs, out: &Path) -> CliResult<Outcome> {
    let (doc, g) = load_graph(&a.graph)?;
    let times = parse_tgrid(&a.t)?;
    let (x, y) = (parse_point(&g, &a.x)?, parse_point(&g, &a.y)?);
    let t_min = times.iter().cloned().fold(f64::INFINITY, f64::min);
    let t_max = times.iter().cloned().fold(0.0, f64::max);
    let evals: Vec<KernelEval> = match a.method {
        KernelMethod::Pathsum => {
            let k = PathSumKernel::new(&g, a.tol)?;
            times.par_iter().map(|&t| k.eval(t, x, y)).collect::<Result<_, _>>()?
        }
        KernelMethod::Spectral => {
            let k = SpectralKernel::for_time(&g, t_min, a.tol)?;
            times.iter().map(|&t| k.eval(t, x, y)).collect::<Result<_, _>>()?
        }
        KernelMethod::Adaptive => {
            let k = AdaptiveKernel::new(g.clone(), a.tol, t_max)?;
            times.par_iter().map(|&t| k.eval(t, x, y)).collect::<Result<_, _>>()?
        }
    };
    let em = Emitter::new(out, config("kernel", a, &[("graph", &doc)]))?;
    let rows: Vec<Vec<String>> = evals
        .iter()
        .map(|e| {
            vec![num(e.t), g.edge_id(e.x.edge).into(), num(e.x.s), g.edge_id(e.y.edge).into(), num(e.y.s), num(e.value), num(e.tail_bound)]
        })
        .collect();
    em.csv("kernel.csv", &["t", "edge_x", "s_x", "edge_y", "s_y", "value", "tail_bound"], &rows)?;
    Ok(Outcome::ok(match evals.as_slice() {
        [e] => format!("value={} tail_bound={}", num(e.value), num(e.tail_bound)),
        _ => format!("{} kernel values written to kernel.csv", evals.len()),
    }))
}

pub fn trace(a: &TraceArgs, out: &Path) -> CliResult<Outcome> {
    let (doc, g) = load_graph(&a.graph)?;
    let times = parse_tgrid(&a.tgrid)?;
    let t_min = times.iter().cloned().fold(f64::INFINITY, f64::min);
    let k = SpectralKernel::for_time(&g, t_min, a.tol)?;
    let rows: Vec<Vec<String>> =
        times.iter().map(|&t| vec![num(t), num(k.trace(t)), num(heat_trace_tail(&g, k.k_max(), t))]).collect();
    let em = Emitter::new(out, config("trace", a, &[("graph", &doc)]))?;
    em.csv("trace.csv", &["t", "Z", "tail_bound"], &rows)?;
    Ok(Outcome::ok(format!("heat trace at {} times from {} modes written to trace.csv", times.len(), k.modes().len())))
}

pub fn eigen(a: &EigenArgs, out: &Path) -> CliResult<Outcome> {
    let (doc, g) = load_graph(&a.graph)?;
    let modes = hklab_core::spectral::eigen(&g, a.k_max)?;
    let report = eigen_report(&g, &modes);
    let rows: Vec<Vec<String>> = report
        .iter()
        .map(|r| vec![num(r.k), num(r.lambda), r.multiplicity.to_string(), num(r.continuity), num(r.kirchhoff)])
        .collect();
    let em = Emitter::new(out, config("eigen", a, &[("graph", &doc)]))?;
    em.csv("eigen.csv", &["k", "lambda", "multiplicity", "continuity_residual", "kirchhoff_residual"], &rows)?;
    Ok(Outcome::ok(format!("{} modes ({} distinct eigenvalues) up to k={} written to eigen.csv", modes.len(), report.len(), num(a.k_max))))
}

pub fn locality(a: &LocalityArgs, out: &Path) -> CliResult<Outcome> {
    let (doc_a, ga) = load_graph(&a.graph_a)?;
    let (doc_b, gb) = load_graph(&a.graph_b)?;
    let map_doc: MapDoc = read_json(&a.map)?;
    let map = map_doc.build(&ga, &gb)?;
    let v = subdomain(&ga, &parse_pieces(&ga, &a.v)?)?;
    let grid = parse_tgrid(&a.tgrid)?;
    let t_max = grid.iter().cloned().fold(0.0, f64::max);
    let (ka, kb) = rayon::join(|| AdaptiveKernel::new(ga.clone(), a.tol, t_max), || AdaptiveKernel::new(gb.clone(), a.tol, t_max));
    let cert = locality_compare(&ka?, &kb?, &map, &v, &grid)?;
    let mut cfg = config("locality", a, &[("graph_a", &doc_a), ("graph_b", &doc_b)]);
    cfg["map"] = json!(map_doc);
    let em = Emitter::new(out, cfg)?;
    em.json(
        "certificate.json",
        json!({
            "V": pieces_json(&ga, &cert.v),
            "U": pieces_json(&ga, &cert.u),
            "T": jnum(cert.horizon),
            "t_grid": jnums(&cert.t_grid),
            "sup_diffs": jnums(&cert.sup_diffs),
            "tails": jnums(&cert.tails),
            "argmax": cert.argmax.iter().map(|&(x, y)| json!([point_name(&ga, x), point_name(&ga, y)])).collect::<Vec<_>>(),
            "C": jnum(cert.big_c),
            "eps": jnum(cert.eps),
            "r2": jnum(cert.r2),
            "gap": jnum(cert.gap),
        }),
    )?;
    let rows: Vec<Vec<String>> = cert
        .t_grid
        .iter()
        .zip(&cert.sup_diffs)
        .zip(&cert.tails)
        .map(|((&t, &d), &tail)| vec![num(t), num(d), num(tail), num(cert.big_c * exp(-cert.eps / t))])
        .collect();
    em.csv("locality.csv", &["t", "sup_diff", "tail_bound", "envelope"], &rows)?;
    Ok(Outcome::ok(format!("certificate: C={} eps={} r2={} (certificate.json)", num(cert.big_c), num(cert.eps), num(cert.r2))))
}

pub fn decompose(a: &DecomposeArgs, out: &Path) -> CliResult<Outcome> {
    let (doc, g) = load_graph(&a.graph)?;
    let u = subdomain(&g, &parse_pieces(&g, &a.u)?)?;
    let (x, y) = (parse_point(&g, &a.x)?, parse_point(&g, &a.y)?);
    let killed = KilledKernel::new(u, a.tol, a.t)?;
    let parent = AdaptiveKernel::new(g.clone(), a.tol, a.t)?;
    let residual = decomposition_residual(&parent, &killed, a.t, x, y, a.time_step)?;
    let p = parent.value(a.t, x, y)?;
    let pu = killed.value(a.t, x, y)?;
    let em = Emitter::new(out, config("decompose", a, &[("graph", &doc)]))?;
    em.json(
        "decompose.json",
        json!({
            "t": jnum(a.t),
            "x": point_name(&g, x),
            "y": point_name(&g, y),
            "p": jnum(p),
            "p_killed": jnum(pu),
            "exit_part": jnum(p - pu),
            "residual": jnum(residual),
        }),
    )?;
    Ok(Outcome::ok(format!("p={} p_killed={} residual={}", num(p), num(pu), num(residual))))
}

fn histogram_rows(g: Option<&MetricGraph>, h: &Histogram, extra: &str) -> Vec<Vec<String>> {
    let mut rows: Vec<Vec<String>> = h
        .bins
        .iter()
        .zip(&h.counts)
        .map(|(b, &c)| {
            let mut r = Vec::new();
            if let (Some(g), Some(e)) = (g, b.edge) {
                r.push(g.edge_id(e).to_string());
            }
            r.extend([num(b.lo), num(b.hi), c.to_string()]);
            r
        })
        .collect();
    let mut last = vec![extra.to_string(), String::new(), String::new(), h.extra.to_string()];
    if g.is_none() {
        last.remove(0);
        last[0] = extra.to_string();
    }
    rows.push(last);
    rows
}

const ENDPOINT_HEADER: [&str; 4] = ["edge", "bin_lo", "bin_hi", "count"];
const EXIT_HEADER: [&str; 3] = ["bin_lo", "bin_hi", "count"];

/// Rendered `(name, text)` pairs of an ensemble summary.
fn ensemble_files(em: &Emitter, g: &MetricGraph, paths: &[PathOutcome], bins: usize, horizon: f64, watched: bool) -> Vec<(&'static str, String)> {
    let mut files = vec![("endpoints.csv", em.render_csv(&ENDPOINT_HEADER, &histogram_rows(Some(g), &endpoint_histogram(g, paths, bins), "killed")))];
    if watched {
        files.push(("exits.csv", em.render_csv(&EXIT_HEADER, &histogram_rows(None, &exit_time_histogram(paths, horizon, bins), "never"))));
    }
    files
}

fn write_all(out: &Path, files: &[(&str, String)]) -> CliResult<()> {
    for (name, text) in files {
        let path = out.join(name);
        std::fs::write(&path, text).map_err(|e| CliError::Io { path: path.display().to_string(), message: e.to_string() })?;
    }
    Ok(())
}

pub fn simulate(a: &SimulateArgs, out: &Path) -> CliResult<Outcome> {
    let (doc, g) = load_graph(&a.graph)?;
    let seed = effective_seed(a.seed)?;
    let x0 = parse_point(&g, &a.x0)?;
    let u = a.u.as_deref().map(|s| subdomain(&g, &parse_pieces(&g, s)?)).transpose()?;
    let paths = parallel::ensemble(&g, x0, a.horizon, a.h, a.paths, seed, u.as_ref())?;
    let mut cfg = config("mc simulate", a, &[("graph", &doc)]);
    cfg["seed"] = json!(seed);
    let em = Emitter::new(out, cfg.clone())?;
    write_all(out, &ensemble_files(&em, &g, &paths, a.bins, a.horizon, u.is_some()))?;
    em.json("config.json", json!({ "ensemble": cfg }))?;
    if a.store > 0 {
        let stored = (0..a.store.min(a.paths))
            .into_par_iter()
            .map(|i| simulate_path(&g, x0, a.horizon, a.h, seed.wrapping_add(i), a.decimation, u.as_ref()))
            .collect::<Result<Vec<_>, _>>()?;
        let mut rows = Vec::new();
        for (i, p) in stored.iter().enumerate() {
            for &(step, pt) in &p.samples {
                rows.push(vec![i.to_string(), step.to_string(), num(p.time(step)), g.edge_id(pt.edge).to_string(), num(pt.s)]);
            }
        }
        em.csv("paths.csv", &["path", "step", "time", "edge", "s"], &rows)?;
    }
    let killed = paths.iter().filter(|o| o.end.is_none()).count();
    let exited = paths.iter().filter(|o| o.exit.is_some()).count();
    Ok(Outcome::ok(format!("{} paths: {killed} killed, {exited} left U (endpoints.csv)", paths.len())))
}

/// Parsed splice configuration with its documents.
pub struct SpliceSetup {
    pub cfg: SpliceConfig,
    pub config: Value,
}

pub fn splice_setup(a: &SpliceArgs) -> CliResult<SpliceSetup> {
    let (doc_a, ga) = load_graph(&a.graph_a)?;
    let (doc_b, gb) = load_graph(&a.graph_b)?;
    let map_doc: MapDoc = read_json(&a.map)?;
    let map = map_doc.build(&ga, &gb)?;
    let seed = effective_seed(a.seed)?;
    let x0 = parse_point(&ga, &a.x0)?;
    let mut config = config("mc splice", a, &[("graph_a", &doc_a), ("graph_b", &doc_b)]);
    config["map"] = json!(map_doc);
    config["seed"] = json!(seed);
    let cfg = SpliceConfig { graph_a: ga, graph_b: gb, map, x0, horizon: a.horizon, h: a.h, paths: a.paths, seed };
    Ok(SpliceSetup { cfg, config })
}

/// Probability of staying in `U` up to the horizon, `∫_U p^U_T(x0, y) dy`.
pub fn stay_probability(u: &SubdomainSpec, x0: GraphPoint, horizon: f64) -> CliResult<f64> {
    let killed = KilledKernel::new(u.clone(), 1e-12, horizon)?;
    let mut total = 0.0;
    for p in u.pieces() {
        let step = (p.len() / 500.0).min(1e-3);
        let mut err = None;
        total += simpson(
            |s| killed.value(horizon, x0, GraphPoint::new(p.edge, s)).unwrap_or_else(|e| {
                err.get_or_insert(e);
                0.0
            }),
            p.lo,
            p.hi,
            step,
        );
        if let Some(e) = err {
            return Err(e.into());
        }
    }
    Ok(total)
}

/// Rendered files of a spliced run: both histograms and the configuration.
pub fn splice_files(setup: &SpliceSetup, paths: &[PathOutcome], bins: usize) -> CliResult<(Emitter, Vec<(&'static str, String)>)> {
    let em = Emitter::new_virtual(setup.config.clone());
    let mut files = ensemble_files(&em, &setup.cfg.graph_b, paths, bins, setup.cfg.horizon, true);
    files.push(("config.json", em.render_json(json!({ "splice": setup.config }))));
    Ok((em, files))
}

pub fn splice(a: &SpliceArgs, out: &Path) -> CliResult<Outcome> {
    let setup = splice_setup(a)?;
    let paths = parallel::splice(&setup.cfg)?;
    let (_, files) = splice_files(&setup, &paths, a.bins)?;
    let em = Emitter::new(out, setup.config.clone())?;
    write_all(out, &files)?;
    let stay = paths.iter().filter(|o| o.exit.is_none()).count() as f64 / paths.len().max(1) as f64;
    let mut summary = format!("{} spliced paths, stay fraction {}", paths.len(), num(stay));
    if a.compare {
        let cfg = &setup.cfg;
        let direct = parallel::ensemble(&cfg.graph_b, cfg.map.map(cfg.x0)?, cfg.horizon, cfg.h, cfg.paths, cfg.seed.wrapping_add(1), None)?;
        let (stat, p) = compare_ensembles(&cfg.graph_b, &paths, &direct, Statistic::Endpoint, a.bins, cfg.horizon)?;
        let predicted = stay_probability(cfg.map.source(), cfg.x0, cfg.horizon)?;
        let se = (predicted * (1.0 - predicted) / cfg.paths as f64).sqrt();
        em.json(
            "comparison.json",
            json!({
                "statistic": jnum(stat),
                "p_value": jnum(p),
                "direct_seed": cfg.seed.wrapping_add(1),
                "stay_fraction": jnum(stay),
                "stay_predicted": jnum(predicted),
                "stay_standard_error": jnum(se),
            }),
        )?;
        summary.push_str(&format!(", chi-square p={} vs direct ensemble (comparison.json)", num(p)));
    }
    Ok(Outcome::ok(summary))
}

fn fit_json(fit: &AsymptoticFit) -> Value {
    json!({ "a_minus1": jnum(fit.a_minus1), "a_half": jnum(fit.a_half), "a_0": jnum(fit.a_0) })
}

fn q2_string(x: &Q2) -> String {
    use hklab_core::two_particle::Q;
    let zero = Q::new(0, 1);
    match (x.r == zero, x.s == zero) {
        (_, true) => x.r.to_string(),
        (true, false) => format!("{}*sqrt2", x.s),
        (false, false) => format!("{} + {}*sqrt2", x.r, x.s),
    }
}

fn exact_json(c: &ExactCoefficients) -> Value {
    json!({
        "vol": q2_string(&c.vol),
        "half": q2_string(&c.half),
        "rational": q2_string(&c.rational),
        "inv_pi": q2_string(&c.inv_pi),
        "form": "a_minus1 = vol/(4 pi), a_half = half/(8 sqrt(pi)), a_0 = rational + inv_pi/pi",
    })
}

pub fn tp_trace(a: &TpTraceArgs, out: &Path) -> CliResult<Outcome> {
    let (doc, g) = load_graph(&a.graph)?;
    let grid = parse_tgrid(&a.tgrid)?;
    let series = match a.method {
        TraceMethod::Eigen => trace_series_eigen(&g, &grid, a.tol)?.0,
        TraceMethod::Quadrature => {
            let t_max = grid.iter().cloned().fold(0.0, f64::max);
            let k = AdaptiveKernel::new(g.clone(), a.tol, t_max)?;
            let pts = grid.par_iter().map(|&t| trace_two_particle(&k, t, a.step)).collect::<Result<Vec<_>, _>>()?;
            TraceSeries {
                t: grid.clone(),
                z: pts.iter().map(|p| p.z).collect(),
                step: a.step,
                error: pts.iter().map(|p| p.error).collect(),
            }
        }
    };
    let fit = asymptotic_fit(&series)?;
    let predicted = predicted_exact(&g).ok().map(|c| c.to_fit());
    let em = Emitter::new(out, config("twoparticle trace", a, &[("graph", &doc)]))?;
    let rows: Vec<Vec<String>> =
        series.t.iter().zip(&series.z).zip(&series.error).map(|((&t, &z), &e)| vec![num(t), num(z), num(e)]).collect();
    em.csv("tp_trace.csv", &["t", "Z", "quad_error"], &rows)?;
    let mut body = json!({
        "fit": fit_json(&fit),
        "fit_residual": jnum(fit.residual),
        "fit_values": jnums(&series.t.iter().map(|&t| fit.eval(t)).collect::<Vec<_>>()),
    });
    if let Some(p) = &predicted {
        body["predicted"] = fit_json(p);
        body["predicted_values"] = jnums(&series.t.iter().map(|&t| p.eval(t)).collect::<Vec<_>>());
        body["relative_errors"] = json!({
            "a_minus1": jnum(((fit.a_minus1 - p.a_minus1) / p.a_minus1).abs()),
            "a_half": jnum(((fit.a_half - p.a_half) / p.a_half).abs()),
            "a_0": jnum(((fit.a_0 - p.a_0) / p.a_0).abs()),
            "max": jnum(fit.max_rel_error(p)),
        });
        body["trace_relative_errors"] =
            jnums(&series.t.iter().zip(&series.z).map(|(&t, &z)| ((p.eval(t) - z) / z).abs()).collect::<Vec<_>>());
    }
    em.json("fit.json", body)?;
    let mut summary = format!("fit a_-1={} a_-1/2={} a_0={}", num(fit.a_minus1), num(fit.a_half), num(fit.a_0));
    if let Some(p) = &predicted {
        summary.push_str(&format!(", max relative error vs prediction {}", num(fit.max_rel_error(p))));
    }
    Ok(Outcome::ok(summary))
}

fn region_name(g: &MetricGraph, r: Region) -> String {
    let e = |x: hklab_core::EdgeIx| g.edge_id(x).to_string();
    let v = |x: hklab_core::VertexIx| g.vertex_id(x).to_string();
    match r {
        Region::A(a, b) => format!("A({},{})", e(a), e(b)),
        Region::B(a) => format!("B({})", e(a)),
        Region::C(a, b) => format!("C({},{})", v(a), e(b)),
        Region::D(a, b) => format!("D({},{})", v(a), v(b)),
        Region::E(a) => format!("E({})", v(a)),
    }
}

pub fn tp_predict(a: &PredictArgs, out: &Path) -> CliResult<Outcome> {
    let (doc, g) = load_graph(&a.graph)?;
    let total = predicted_exact(&g)?;
    let eps = a.eps.unwrap_or(g.min_length() / 8.0);
    let regions = decomposition(&g)
        .into_iter()
        .map(|r| {
            let c = region_contributions(&g, r, eps)?;
            Ok(json!({ "region": region_name(&g, r), "coefficients": fit_json(&c.to_fit()), "exact": exact_json(&c) }))
        })
        .collect::<CliResult<Vec<_>>>()?;
    let em = Emitter::new(out, config("twoparticle predict", a, &[("graph", &doc)]))?;
    let fit = total.to_fit();
    em.json(
        "prediction.json",
        json!({ "coefficients": fit_json(&fit), "exact": exact_json(&total), "eps": jnum(eps), "regions": regions }),
    )?;
    Ok(Outcome::ok(format!("predicted a_-1={} a_-1/2={} a_0={} (prediction.json)", num(fit.a_minus1), num(fit.a_half), num(fit.a_0))))
}

/// Test function by name: `sin:K` is `sin(2πK s/l)` on every edge, `dist:E:S`
/// the distance to a point, `bump:E:S:W` a Gaussian bump of width `W`.
pub fn parse_function<'g>(g: &'g MetricGraph, spec: &str) -> CliResult<Box<dyn Fn(GraphPoint) -> f64 + Sync + 'g>> {
    let fields: Vec<&str> = spec.split(':').collect();
    let num_at = |i: usize| -> CliResult<f64> {
        fields
            .get(i)
            .and_then(|s| s.parse::<f64>().ok())
            .ok_or_else(|| CliError::usage(format!("function '{spec}': bad or missing number")))
    };
    match fields[0] {
        "sin" if fields.len() == 2 => {
            let k = num_at(1)?;
            Ok(Box::new(move |p: GraphPoint| sin(2.0 * PI * k * p.s / g.length(p.edge))))
        }
        "dist" if fields.len() == 3 => {
            let c = g.point(fields[1], num_at(2)?)?;
            Ok(Box::new(move |p: GraphPoint| g.distance(c, p).unwrap_or(f64::NAN)))
        }
        "bump" if fields.len() == 4 => {
            let c = g.point(fields[1], num_at(2)?)?;
            let w = num_at(3)?;
            Ok(Box::new(move |p: GraphPoint| {
                let d = g.distance(c, p).unwrap_or(f64::NAN);
                exp(-d * d / (w * w))
            }))
        }
        _ => Err(CliError::usage(format!("unknown function '{spec}': use sin:K, dist:EDGE:S or bump:EDGE:S:W"))),
    }
}

pub fn parse_radii(s: &str) -> CliResult<Vec<f64>> {
    let bad = || CliError::usage(format!("radii '{s}' must be R0:N with R0 > 0 and N >= 2"));
    let (r0, n) = s.split_once(':').ok_or_else(bad)?;
    let r0: f64 = r0.parse().map_err(|_| bad())?;
    let n: u32 = n.parse().map_err(|_| bad())?;
    if r0.is_nan() || r0 <= 0.0 || n < 2 {
        return Err(bad());
    }
    Ok((0..n).map(|i| r0 / 2f64.powi(i as i32)).collect())
}

pub fn energy_study(a: &StudyArgs, out: &Path) -> CliResult<Outcome> {
    let (doc, g) = load_graph(&a.graph)?;
    let radii = parse_radii(&a.radii)?;
    let step = a.step.unwrap_or(radii[radii.len() - 1] / 20.0);
    let f = parse_function(&g, &a.function)?;
    let sf = SampledFunction::from_fn(&g, step, f)?;
    let study = convergence_study(&g, &sf, &radii)?;
    let em = Emitter::new(out, config("energy study", a, &[("graph", &doc)]))?;
    let rows: Vec<Vec<String>> = study.rows.iter().map(|r| vec![num(r.r), num(r.energy), num(r.ratio)]).collect();
    em.csv("study.csv", &["r", "E_r", "ratio"], &rows)?;
    em.json(
        "study.json",
        json!({
            "classical": jnum(study.classical),
            "kappa": jnum(study.kappa),
            "differences": jnums(&study.differences()),
            "converges": study.converges(),
        }),
    )?;
    Ok(Outcome::ok(format!("kappa={} converges={} (study.csv)", num(study.kappa), study.converges())))
}

pub fn selftest(a: &SelftestArgs, out: &Path) -> CliResult<Outcome> {
    let seed = effective_seed(a.seed)?;
    let only = match &a.only {
        Some(s) => Some(
            s.split(',')
                .map(|x| x.trim().parse::<u8>().map_err(|_| CliError::usage(format!("--only: bad criterion '{x}'"))))
                .collect::<CliResult<Vec<_>>>()?,
        ),
        None => None,
    };
    let results = acceptance::run(only.as_deref(), seed, |r| println!("{r}"));
    let passed = results.iter().filter(|r| r.pass).count();
    let em = Emitter::new(out, json!({ "command": "selftest", "seed": seed, "only": only }))?;
    em.json(
        "selftest.json",
        json!({
            "criteria": results.iter().map(|r| json!({ "id": r.id, "name": r.name, "pass": r.pass, "detail": r.detail })).collect::<Vec<_>>(),
        }),
    )?;
    Ok(Outcome { summary: format!("{passed}/{} criteria passed", results.len()), ok: passed == results.len() })
}
