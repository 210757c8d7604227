use std::path::{Path, PathBuf};
use std::process::{Command, Output};

use serde_json::Value;
use tempfile::TempDir;
use torus_graph::circular::rayleigh_test;
use torus_graph::io::{default_channel_names, load_csv, write_angles_csv, CsvOptions};
use torus_graph::simulation::{gen_chain, ChainSpec};

fn torus(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_torus"))
        .args(args)
        .output()
        .expect("spawn torus")
}

fn code(out: &Output) -> i32 {
    out.status.code().expect("exit code")
}

fn path(dir: &TempDir, name: &str) -> PathBuf {
    dir.path().join(name)
}

fn s(p: &Path) -> &str {
    p.to_str().unwrap()
}

fn write_chain(dir: &TempDir, n: usize, seed: u64) -> PathBuf {
    let (x, _) = gen_chain(n, &ChainSpec::default(), seed).unwrap();
    let p = path(dir, "chain.csv");
    let mut f = std::fs::File::create(&p).unwrap();
    write_angles_csv(&mut f, &x, &default_channel_names(x.d())).unwrap();
    p
}

const ZERO_MODEL_D3: &str = r#"{"schema_version":1,"d":3,"family":"full",
 "marginals":[[0,0],[0,0],[0,0]],
 "couplings":[{"j":0,"k":1,"phi":[0,0,0,0]},{"j":0,"k":2,"phi":[0,0,0,0]},{"j":1,"k":2,"phi":[0,0,0,0]}]}"#;

#[test]
fn help_and_version_exit_zero() {
    assert_eq!(code(&torus(&["--help"])), 0);
    assert_eq!(code(&torus(&["--version"])), 0);
    assert_eq!(code(&torus(&["fit", "--help"])), 0);
}

#[test]
fn usage_errors_exit_one() {
    assert_eq!(code(&torus(&[])), 1);
    assert_eq!(code(&torus(&["fit", "--no-such-flag"])), 1);
    assert_eq!(code(&torus(&["fit", "x.csv", "--out", "m.json", "--family", "bogus"])), 1);
    assert_eq!(code(&torus(&["fit", "x.csv", "--out", "m.json", "--lasso", "1", "--cv", "5"])), 1);
}

#[test]
fn schema_mismatch_exits_one() {
    let dir = TempDir::new().unwrap();
    let data = write_chain(&dir, 100, 1);
    let bad = path(&dir, "bad.json");
    std::fs::write(&bad, r#"{"schema_version":1,"unexpected":true}"#).unwrap();
    let out = torus(&["test", s(&data), "--model", s(&bad)]);
    assert_eq!(code(&out), 1, "{}", String::from_utf8_lossy(&out.stderr));
    std::fs::write(&bad, "not json").unwrap();
    assert_eq!(code(&torus(&["sample", "--model", s(&bad), "-n", "5", "--seed", "1", "--out", s(&path(&dir, "o.csv"))])), 1);
}

#[test]
fn domain_and_io_errors_exit_two() {
    let dir = TempDir::new().unwrap();
    let out = path(&dir, "m.json");
    assert_eq!(code(&torus(&["fit", "/definitely/not/here.csv", "--out", s(&out)])), 2);

    let ragged = path(&dir, "ragged.csv");
    std::fs::write(&ragged, "0.1,0.2\n0.3\n").unwrap();
    let o = torus(&["fit", s(&ragged), "--out", s(&out)]);
    assert_eq!(code(&o), 2);
    assert!(String::from_utf8_lossy(&o.stderr).contains("row"));

    let data = write_chain(&dir, 100, 1);
    assert_eq!(code(&torus(&["fit", s(&data), "--out", s(&out), "--lasso=-1"])), 2);

    let model = path(&dir, "zero.json");
    std::fs::write(&model, ZERO_MODEL_D3).unwrap();
    // 5-node data against a 3-node model
    assert_eq!(code(&torus(&["test", s(&data), "--model", s(&model)])), 2);
}

#[test]
fn singular_moments_exit_three() {
    let dir = TempDir::new().unwrap();
    let data = path(&dir, "tiny.csv");
    std::fs::write(&data, "0.1,0.2,0.3\n0.4,0.5,0.6\n").unwrap();
    let o = torus(&["fit", s(&data), "--out", s(&path(&dir, "m.json"))]);
    assert_eq!(code(&o), 3, "{}", String::from_utf8_lossy(&o.stderr));
}

#[test]
fn fit_then_test_recovers_chain() {
    let dir = TempDir::new().unwrap();
    let data = write_chain(&dir, 500, 2024);
    let model = path(&dir, "model.json");
    let graph = path(&dir, "graph.json");
    let adj = path(&dir, "adj.csv");
    let o = torus(&["fit", s(&data), "--family", "full", "--out", s(&model)]);
    assert_eq!(code(&o), 0, "{}", String::from_utf8_lossy(&o.stderr));
    let o = torus(&[
        "test", s(&data), "--model", s(&model), "--alpha", "0.05", "--correction", "bonferroni", "--out", s(&graph),
        "--adjacency", s(&adj),
    ]);
    assert_eq!(code(&o), 0, "{}", String::from_utf8_lossy(&o.stderr));

    let g: Value = serde_json::from_str(&std::fs::read_to_string(&graph).unwrap()).unwrap();
    assert_eq!(g["schema_version"], 1);
    let present: Vec<(u64, u64)> = g["edges"]
        .as_array()
        .unwrap()
        .iter()
        .filter(|e| e["present"].as_bool().unwrap())
        .map(|e| (e["j"].as_u64().unwrap(), e["k"].as_u64().unwrap()))
        .collect();
    assert_eq!(present, vec![(0, 1), (1, 2), (2, 3), (3, 4)]);

    let adj = std::fs::read_to_string(&adj).unwrap();
    assert_eq!(adj.lines().count(), 6);
    assert!(adj.lines().nth(1).unwrap().starts_with("ch01,0,1,0,0,0"));
}

#[test]
fn seeded_commands_are_reproducible() {
    let dir = TempDir::new().unwrap();
    let data = write_chain(&dir, 300, 5);
    let model = path(&dir, "model.json");
    assert_eq!(code(&torus(&["fit", s(&data), "--cv", "3", "--grid-size", "4", "--seed", "9", "--out", s(&model)])), 0);
    let again = path(&dir, "model2.json");
    assert_eq!(code(&torus(&["fit", s(&data), "--cv", "3", "--grid-size", "4", "--seed", "9", "--out", s(&again)])), 0);
    assert_eq!(std::fs::read(&model).unwrap(), std::fs::read(&again).unwrap());

    let a = path(&dir, "a.csv");
    let b = path(&dir, "b.csv");
    for p in [&a, &b] {
        assert_eq!(code(&torus(&["sample", "--model", s(&model), "-n", "200", "--seed", "3", "--out", s(p)])), 0);
    }
    assert_eq!(std::fs::read(&a).unwrap(), std::fs::read(&b).unwrap());
}

#[test]
fn sampling_zero_model_is_uniform() {
    let dir = TempDir::new().unwrap();
    let model = path(&dir, "zero.json");
    std::fs::write(&model, ZERO_MODEL_D3).unwrap();
    let out = path(&dir, "x.csv");
    let o = torus(&["sample", "--model", s(&model), "-n", "2000", "--seed", "11", "--out", s(&out)]);
    assert_eq!(code(&o), 0, "{}", String::from_utf8_lossy(&o.stderr));
    let ds = load_csv(&out, &CsvOptions::default()).unwrap();
    assert_eq!((ds.angles.n(), ds.angles.d()), (2000, 3));
    for j in 0..3 {
        assert!(rayleigh_test(&ds.angles.column(j)).unwrap() > 0.001);
    }
}

#[test]
fn phase_density_integrates_to_one() {
    let dir = TempDir::new().unwrap();
    let out = path(&dir, "density.csv");
    let o = torus(&["phase-density", "--bivar", "--kappa", "0,0", "--coupling", "1,0", "--grid", "1024", "--out", s(&out)]);
    assert_eq!(code(&o), 0, "{}", String::from_utf8_lossy(&o.stderr));
    let v: Value = serde_json::from_slice(&o.stdout).unwrap();
    assert!((v["integral"].as_f64().unwrap() - 1.0).abs() < 1e-8);
    let text = std::fs::read_to_string(&out).unwrap();
    assert_eq!(text.lines().next().unwrap(), "w,p,f,g");
    assert_eq!(text.lines().count(), 1025);

    let o = torus(&["phase-density", "--trivar", "--c12", "1,0", "--c13", "1,0", "--grid", "64", "--out", s(&out)]);
    assert_eq!(code(&o), 0, "{}", String::from_utf8_lossy(&o.stderr));
}

#[test]
fn region_test_and_offset_summary() {
    let dir = TempDir::new().unwrap();
    let data = write_chain(&dir, 500, 2024);
    let model = path(&dir, "model.json");
    let graph = path(&dir, "graph.json");
    assert_eq!(code(&torus(&["fit", s(&data), "--out", s(&model)])), 0);
    assert_eq!(code(&torus(&["test", s(&data), "--model", s(&model), "--out", s(&graph)])), 0);
    let groups = path(&dir, "groups.json");
    std::fs::write(
        &groups,
        r#"{"schema_version":1,"groups":[{"name":"front","channels":["ch01","ch02"]},{"name":"back","channels":[2,3,4]}]}"#,
    )
    .unwrap();

    let o = torus(&["region-test", s(&data), "--model", s(&model), "--groups", s(&groups), "--alpha", "0.05"]);
    assert_eq!(code(&o), 0, "{}", String::from_utf8_lossy(&o.stderr));
    let v: Value = serde_json::from_slice(&o.stdout).unwrap();
    let t = &v["tests"][0];
    assert_eq!(t["n_edges"], 6);
    assert_eq!(t["significant"], true);

    let o = torus(&["summarize-diffs", s(&data), "--graph", s(&graph), "--groups", s(&groups), "--between", "front", "back"]);
    assert_eq!(code(&o), 0, "{}", String::from_utf8_lossy(&o.stderr));
    let v: Value = serde_json::from_slice(&o.stdout).unwrap();
    // only the (1, 2) link crosses the split
    assert_eq!(v["edges"].as_array().unwrap().len(), 1);
    let lo = v["ci_deg"][0].as_f64().unwrap();
    let hi = v["ci_deg"][1].as_f64().unwrap();
    assert!(lo < v["mean_deg"].as_f64().unwrap() && v["mean_deg"].as_f64().unwrap() < hi);

    let o = torus(&["summarize-diffs", s(&data), "--graph", s(&graph), "--groups", s(&groups), "--between", "front", "nowhere"]);
    assert_eq!(code(&o), 2);
}

#[test]
fn plv_graph_and_gof_run() {
    let dir = TempDir::new().unwrap();
    let data = write_chain(&dir, 300, 8);
    let o = torus(&["plv-graph", s(&data), "--alpha", "0.05", "--correction", "none"]);
    assert_eq!(code(&o), 0, "{}", String::from_utf8_lossy(&o.stderr));
    let v: Value = serde_json::from_slice(&o.stdout).unwrap();
    assert_eq!(v["edges"].as_array().unwrap().len(), 10);

    let model = path(&dir, "model.json");
    assert_eq!(code(&torus(&["fit", s(&data), "--out", s(&model)])), 0);
    let o = torus(&["gof", s(&data), "--model", s(&model), "--n-synth", "300", "--seed", "4"]);
    assert_eq!(code(&o), 0, "{}", String::from_utf8_lossy(&o.stderr));
    let v: Value = serde_json::from_slice(&o.stdout).unwrap();
    let p = v["p_marginal"].as_f64().unwrap();
    assert!((0.0..=1.0).contains(&p));
}

#[test]
fn bench_writes_outputs() {
    let dir = TempDir::new().unwrap();
    let cfg = path(&dir, "experiment.json");
    std::fs::write(
        &cfg,
        r#"{"schema_version":1,"generator":{"kind":"indirect_triple"},"n":300,"reps":3,"alpha":0.05,"correction":"none","seed":1}"#,
    )
    .unwrap();
    let out = path(&dir, "results");
    let o = torus(&["bench", "--config", s(&cfg), "--out", s(&out)]);
    assert_eq!(code(&o), 0, "{}", String::from_utf8_lossy(&o.stderr));
    for f in ["results.json", "summary.csv", "roc_plv.csv"] {
        assert!(out.join(f).exists(), "{f}");
    }
    let summary = std::fs::read_to_string(out.join("summary.csv")).unwrap();
    assert_eq!(summary.lines().count(), 3);

    std::fs::write(&cfg, r#"{"schema_version":1,"generator":{"kind":"chain"},"reps":3}"#).unwrap();
    assert_eq!(code(&torus(&["bench", "--config", s(&cfg), "--out", s(&out)])), 1);
}
