use hklab_core::kernel::kernel_pathsum;
use hklab_core::graph::VertexCondition::*;
use hklab_core::{EdgeIx, GraphPoint, MetricGraph};
use serde_json::Value;
use std::path::{Path, PathBuf};
use std::process::{Command, Output};

fn graphs() -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR")).join("../../graphs")
}

fn g(name: &str) -> String {
    graphs().join(name).display().to_string()
}

fn hklab(args: &[&str], out: &Path, env: &[(&str, &str)]) -> Output {
    let mut cmd = Command::new(env!("CARGO_BIN_EXE_hklab"));
    cmd.args(args).arg("--out").arg(out).env_remove("HKLAB_SEED").env_remove("HKLAB_BREAK_SIGMA");
    for (k, v) in env {
        cmd.env(k, v);
    }
    cmd.output().unwrap()
}

fn stdout(o: &Output) -> String {
    String::from_utf8_lossy(&o.stdout).into_owned()
}

fn csv_rows(path: &Path) -> Vec<Vec<String>> {
    std::fs::read_to_string(path)
        .unwrap()
        .lines()
        .skip(2)
        .map(|l| l.split(',').map(String::from).collect())
        .collect()
}

fn json(path: &Path) -> Value {
    serde_json::from_str(&std::fs::read_to_string(path).unwrap()).unwrap()
}

#[test]
fn kernel_matches_the_library() {
    let dir = tempfile::tempdir().unwrap();
    let o = hklab(
        &["kernel", "--graph", &g("star3.json"), "--method", "pathsum", "--t", "0.02", "--x", "e1:0.5", "--y", "e1:0.5", "--tol", "1e-10"],
        dir.path(),
        &[],
    );
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    assert!(stdout(&o).contains("value=") && stdout(&o).contains("tail_bound="));
    let rows = csv_rows(&dir.path().join("kernel.csv"));
    assert_eq!(rows.len(), 1);
    let value: f64 = rows[0][5].parse().unwrap();
    let star = MetricGraph::star(&[1.0, 1.0, 1.0], Kirchhoff).unwrap();
    let x = GraphPoint::new(EdgeIx(0), 0.5);
    let want = kernel_pathsum(&star, 0.02, x, x, 1e-10).unwrap().value;
    assert!((value - want).abs() <= 1e-11 * want);
}

#[test]
fn every_file_carries_version_and_config_hash() {
    let a = tempfile::tempdir().unwrap();
    let b = tempfile::tempdir().unwrap();
    let args = ["kernel", "--graph", &g("nn.json"), "--method", "spectral", "--t", "0.01:0.1:4", "--x", "0.3", "--y", "0.6"];
    assert!(hklab(&args, a.path(), &[]).status.success());
    assert!(hklab(&args, b.path(), &[]).status.success());
    let text = std::fs::read_to_string(a.path().join("kernel.csv")).unwrap();
    let first = text.lines().next().unwrap();
    assert!(first.starts_with(&format!("# hklab {} config_sha256=", env!("CARGO_PKG_VERSION"))));
    assert_eq!(text, std::fs::read_to_string(b.path().join("kernel.csv")).unwrap());
    assert_eq!(csv_rows(&a.path().join("kernel.csv")).len(), 4);
}

#[test]
fn bad_graph_exits_2_and_names_the_edge() {
    let dir = tempfile::tempdir().unwrap();
    let o = hklab(&["graph", "validate", &g("bad.json")], dir.path(), &[]);
    assert_eq!(o.status.code(), Some(2));
    let err: Value = serde_json::from_slice(&o.stderr).unwrap();
    assert_eq!(err["error"], "invalid_graph");
    assert!(err["field"].as_str().unwrap().contains("e2"), "{err}");
    let ok = hklab(&["graph", "validate", &g("star3.json")], dir.path(), &[]);
    assert!(ok.status.success());
}

#[test]
fn usage_errors_are_json() {
    let dir = tempfile::tempdir().unwrap();
    for args in [&["frobnicate"][..], &["kernel", "--graph", "missing.json", "--t", "0.1", "--x", "0.1", "--y", "0.2"][..]] {
        let o = hklab(args, dir.path(), &[]);
        assert_eq!(o.status.code(), Some(2));
        let err: Value = serde_json::from_slice(&o.stderr).unwrap();
        assert!(err["error"].is_string() && err["message"].is_string());
    }
    let o = hklab(&["kernel", "--graph", &g("nn.json"), "--t", "0.1", "--x", "0.1", "--y", "2.0"], dir.path(), &[]);
    assert_eq!(o.status.code(), Some(2));
}

#[test]
fn locality_certificate_has_positive_eps() {
    let dir = tempfile::tempdir().unwrap();
    let o = hklab(
        &["locality", "--graph-a", &g("nn.json"), "--graph-b", &g("dd.json"), "--map", &g("map.json"), "--V", "0.4:0.6", "--tgrid", "0.01:0.05:8"],
        dir.path(),
        &[],
    );
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    let cert = json(&dir.path().join("certificate.json"));
    for key in ["V", "U", "T", "t_grid", "sup_diffs", "C", "eps", "r2"] {
        assert!(!cert[key].is_null(), "{key}");
    }
    assert!(cert["eps"].as_f64().unwrap() > 0.0);
    assert_eq!(csv_rows(&dir.path().join("locality.csv")).len(), 8);
}

#[test]
fn decompose_residual_is_small() {
    let dir = tempfile::tempdir().unwrap();
    let o = hklab(
        &["decompose", "--graph", &g("star3.json"), "--U", "e1:0:0.4,e2:0:0.4,e3:0:0.4", "--x", "e1:0", "--y", "e2:0.2", "--t", "0.02"],
        dir.path(),
        &[],
    );
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    assert!(json(&dir.path().join("decompose.json"))["residual"].as_f64().unwrap() < 1e-4);
}

#[test]
fn eigen_and_trace_reports() {
    let dir = tempfile::tempdir().unwrap();
    assert!(hklab(&["eigen", "--graph", &g("star3.json"), "--kmax", "10"], dir.path(), &[]).status.success());
    let rows = csv_rows(&dir.path().join("eigen.csv"));
    let count: usize = rows.iter().map(|r| r[2].parse::<usize>().unwrap()).sum();
    assert!((count as f64 - (30.0 / std::f64::consts::PI + 1.0)).abs() <= 2.0, "{count}");
    assert!(rows.iter().all(|r| r[4].parse::<f64>().unwrap() < 1e-8));
    assert!(hklab(&["trace", "--graph", &g("nn.json"), "--tgrid", "0.01:1:3"], dir.path(), &[]).status.success());
    let z: f64 = csv_rows(&dir.path().join("trace.csv"))[2][1].parse().unwrap();
    // Z(1) on the unit Neumann interval is 1 + Σ e^{-π²n²}.
    assert!((z - 1.0 - (-std::f64::consts::PI.powi(2)).exp()).abs() < 1e-8);
}

#[test]
fn spliced_runs_are_byte_identical_across_threads() {
    let a = tempfile::tempdir().unwrap();
    let b = tempfile::tempdir().unwrap();
    let c = tempfile::tempdir().unwrap();
    let args = |threads: &'static str| {
        vec![
            "mc", "splice", "--graph-a", "DD", "--graph-b", "NN", "--map", "MAP", "--x0", "0.5", "--T", "0.05", "--paths", "4000", "--seed", "11",
            "--threads", threads,
        ]
    };
    let (dd, nn, map) = (g("dd.json"), g("nn.json"), g("map.json"));
    let fill = |v: Vec<&'static str>| -> Vec<String> {
        v.into_iter().map(|s| match s { "DD" => dd.clone(), "NN" => nn.clone(), "MAP" => map.clone(), s => s.to_string() }).collect()
    };
    let run = |dir: &Path, threads, env: &[(&str, &str)]| {
        let v = fill(args(threads));
        let refs: Vec<&str> = v.iter().map(String::as_str).collect();
        let o = hklab(&refs, dir, env);
        assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    };
    run(a.path(), "1", &[]);
    run(b.path(), "3", &[]);
    run(c.path(), "2", &[("HKLAB_SEED", "12")]);
    for f in ["endpoints.csv", "exits.csv", "config.json"] {
        let x = std::fs::read(a.path().join(f)).unwrap();
        assert_eq!(x, std::fs::read(b.path().join(f)).unwrap(), "{f}");
        assert_ne!(x, std::fs::read(c.path().join(f)).unwrap(), "{f}");
    }
    assert_eq!(json(&c.path().join("config.json"))["splice"]["seed"], 12);
}

#[test]
fn simulate_writes_histograms_and_paths() {
    let dir = tempfile::tempdir().unwrap();
    let o = hklab(
        &["mc", "simulate", "--graph", &g("star3.json"), "--x0", "e1:0.5", "--T", "0.05", "--h", "0.01", "--paths", "2000", "--U", "e1:0.3:0.7", "--store", "2", "--bins", "5"],
        dir.path(),
        &[],
    );
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    let ends = csv_rows(&dir.path().join("endpoints.csv"));
    assert_eq!(ends.len(), 16);
    let total: u64 = ends.iter().map(|r| r[3].parse::<u64>().unwrap()).sum();
    assert_eq!(total, 2000);
    let exits = csv_rows(&dir.path().join("exits.csv"));
    assert_eq!(exits.iter().map(|r| r[2].parse::<u64>().unwrap()).sum::<u64>(), 2000);
    let paths = csv_rows(&dir.path().join("paths.csv"));
    assert!(paths.iter().any(|r| r[0] == "1"));
}

#[test]
fn twoparticle_commands() {
    let dir = tempfile::tempdir().unwrap();
    assert!(hklab(&["twoparticle", "predict", "--graph", &g("nn.json")], dir.path(), &[]).status.success());
    let p = json(&dir.path().join("prediction.json"));
    assert_eq!(p["exact"]["rational"], "3/8");
    assert!(p["regions"].as_array().unwrap().iter().any(|r| r["exact"]["rational"] == "5/32"));
    let o = hklab(&["twoparticle", "trace", "--graph", &g("nn.json")], dir.path(), &[]);
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    let fit = json(&dir.path().join("fit.json"));
    assert!(fit["relative_errors"]["max"].as_f64().unwrap() < 0.01);
    assert_eq!(csv_rows(&dir.path().join("tp_trace.csv")).len(), 8);
}

#[test]
fn energy_study_on_the_circle() {
    let dir = tempfile::tempdir().unwrap();
    let o = hklab(&["energy", "study", "--graph", &g("circle.json"), "--function", "sin:1"], dir.path(), &[]);
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    let s = json(&dir.path().join("study.json"));
    assert!((s["kappa"].as_f64().unwrap() - 2.0).abs() < 1e-3);
    assert_eq!(s["converges"], true);
    let bad = hklab(&["energy", "study", "--graph", &g("circle.json"), "--function", "cosh:2"], dir.path(), &[]);
    assert_eq!(bad.status.code(), Some(2));
}
