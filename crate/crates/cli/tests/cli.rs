use std::path::{Path, PathBuf};
use std::process::{Command, Output};

use peer_pressure::diagnostics::diagnose;
use peer_pressure::dynamics::read_profile;
use peer_pressure::graph::read_edge_list;
use peer_pressure::inference::{synthesize_panel, write_panel};
use peer_pressure::{simulate, PressureSchedule};
use serde_json::Value;
use tempfile::TempDir;

fn bin() -> Command {
    Command::new(env!("CARGO_BIN_EXE_peerpressure"))
}

fn run(args: &[&str]) -> Output {
    bin().args(args).output().expect("binary runs")
}

fn code(out: &Output) -> i32 {
    out.status.code().expect("exit code")
}

fn p(dir: &TempDir, name: &str) -> PathBuf {
    dir.path().join(name)
}

fn s(path: &Path) -> &str {
    path.to_str().unwrap()
}

fn write(path: &Path, text: &str) {
    std::fs::write(path, text).unwrap();
}

fn json_file(path: &Path) -> Value {
    serde_json::from_slice(&std::fs::read(path).unwrap()).unwrap()
}

fn two_node(dir: &TempDir, s0: f64, s1: f64) -> (PathBuf, PathBuf) {
    let g = p(dir, "two.csv");
    let prof = p(dir, "two_profile.csv");
    write(&g, "i,j,w\n0,1,1\n");
    write(&prof, &format!("id,x_plus,s\n0,0,{s0}\n1,1,{s1}\n"));
    (g, prof)
}

fn final_state(summary: &Value) -> Vec<f64> {
    summary["final_state"].as_array().unwrap().iter().map(|v| v.as_f64().unwrap()).collect()
}

#[test]
fn generate_ba_500() {
    let dir = TempDir::new().unwrap();
    let out = p(&dir, "ba.csv");
    let o = run(&["generate", "ba", "--n", "500", "--m", "2", "--seed", "42", "--out", s(&out)]);
    assert_eq!(code(&o), 0, "{}", String::from_utf8_lossy(&o.stderr));
    let g = read_edge_list(&out).unwrap();
    assert_eq!(g.n(), 500);
    let manifest: Value = serde_json::from_slice(&o.stdout).unwrap();
    assert_eq!(manifest["command"], "generate");
    assert_eq!(manifest["seed"], 42);
    assert_eq!(manifest["params"]["n"], 500);

    let again = p(&dir, "ba2.csv");
    run(&["generate", "ba", "--n", "500", "--m", "2", "--seed", "42", "--out", s(&again)]);
    assert_eq!(std::fs::read(&out).unwrap(), std::fs::read(&again).unwrap());
}

#[test]
fn generate_cliques_chain() {
    let o = run(&["generate", "cliques", "--sizes", "5,5,5", "--chain"]);
    assert_eq!(code(&o), 0);
    let g = peer_pressure::graph::parse_edge_list(o.stdout.as_slice()).unwrap();
    assert_eq!(g.n(), 15);
    assert_eq!(g.edge_count(), 3 * 10 + 2);
}

#[test]
fn generate_json_and_profile() {
    let o = run(&["generate", "cliques", "--sizes", "3,3", "--bridges", "2-3", "--format", "json"]);
    assert_eq!(code(&o), 0);
    let v: Value = serde_json::from_slice(&o.stdout).unwrap();
    assert_eq!(v["n"], 6);
    assert_eq!(v["edges"].as_array().unwrap().len(), 7);

    let dir = TempDir::new().unwrap();
    let out = p(&dir, "profile.csv");
    let o = run(&["generate", "profile", "--n", "12", "--seed", "3", "--out", s(&out)]);
    assert_eq!(code(&o), 0);
    assert_eq!(read_profile(&out).unwrap().n(), 12);
}

#[test]
fn generate_errors() {
    assert_eq!(code(&run(&["generate", "ba", "--n", "3", "--m", "3"])), 2);
    assert_eq!(code(&run(&["generate", "cliques", "--sizes", "5,5"])), 2, "disconnected cliques");
    assert_eq!(code(&run(&["generate", "cliques", "--sizes", "3,3", "--bridges", "2to3"])), 2);
    assert_eq!(code(&run(&["generate", "ba", "--n", "10"])), 2, "missing argument");
    let o = run(&["generate", "ba", "--n", "10", "--m", "2", "--out", "/nonexistent-dir/g.csv"]);
    assert_eq!(code(&o), 3);
}

#[test]
fn simulate_two_node_fixed_point() {
    let dir = TempDir::new().unwrap();
    let (g, prof) = two_node(&dir, 1.0, 1.0);
    let out = p(&dir, "traj.csv");
    let o = run(&[
        "simulate",
        "--graph",
        s(&g),
        "--profile",
        s(&prof),
        "--schedule",
        "constant:1",
        "--k-max",
        "200",
        "--out",
        s(&out),
    ]);
    assert_eq!(code(&o), 0, "{}", String::from_utf8_lossy(&o.stderr));
    let summary = json_file(&p(&dir, "traj.csv.summary.json"));
    let x = final_state(&summary);
    assert!((x[0] - 1.0 / 3.0).abs() < 1e-6 && (x[1] - 2.0 / 3.0).abs() < 1e-6);
    assert_eq!(summary["out_of_box_count"], 0);
    assert_eq!(summary["limit_kind"], "distribution");
    assert!(summary["distance_to_limit"].as_f64().unwrap() < 1e-6);
    let table = peer_pressure::opinion_csv::read_opinion_table(&out).unwrap();
    assert_eq!(table.len(), 201);
}

#[test]
fn simulate_unbounded_reaches_consensus() {
    let dir = TempDir::new().unwrap();
    let (g, prof) = two_node(&dir, 1.0, 3.0);
    let summary = p(&dir, "summary.json");
    let o = run(&[
        "simulate",
        "--graph",
        s(&g),
        "--profile",
        s(&prof),
        "--schedule",
        "linear:1,0",
        "--k-max",
        "2000",
        "--summary",
        s(&summary),
    ]);
    assert_eq!(code(&o), 0);
    let v = json_file(&summary);
    assert_eq!(v["limit_kind"], "consensus");
    for x in final_state(&v) {
        assert!((x - 0.75).abs() < 1e-3, "{x}");
    }
}

#[test]
fn simulate_errors() {
    let dir = TempDir::new().unwrap();
    let (g, prof) = two_node(&dir, 1.0, 1.0);
    let sim = |schedule: &str, graph: &Path| {
        code(&run(&["simulate", "--graph", s(graph), "--profile", s(&prof), "--schedule", schedule]))
    };
    assert_eq!(sim("linear:1", &g), 4);
    assert_eq!(sim("cubic:1", &g), 4);
    assert_eq!(sim("linear:-1,0", &g), 4);
    let bad = p(&dir, "bad.csv");
    write(&bad, "i,j,w\n0,1,-1\n");
    assert_eq!(sim("constant:1", &bad), 2);
    assert_eq!(sim("constant:1", &p(&dir, "missing.csv")), 3);
    let three = p(&dir, "three.csv");
    write(&three, "i,j\n0,1\n1,2\n");
    assert_eq!(sim("constant:1", &three), 2, "profile/graph size mismatch");
}

#[test]
fn simulate_repeat_is_deterministic() {
    let dir = TempDir::new().unwrap();
    let g = p(&dir, "g.csv");
    let prof = p(&dir, "prof.csv");
    run(&["generate", "ba", "--n", "30", "--m", "2", "--out", s(&g)]);
    run(&["generate", "profile", "--n", "30", "--out", s(&prof)]);
    let go = |name: &str| {
        let summary = p(&dir, name);
        let o = run(&[
            "simulate",
            "--graph",
            s(&g),
            "--profile",
            s(&prof),
            "--schedule",
            "saturating:0.5,3,0.1",
            "--k-max",
            "300",
            "--repeat",
            "4",
            "--seed",
            "9",
            "--summary",
            s(&summary),
        ]);
        assert_eq!(code(&o), 0);
        json_file(&summary)
    };
    let a = go("a.json");
    assert_eq!(a["repeats"].as_array().unwrap().len(), 4);
    assert_eq!(a, go("b.json"));
    for r in a["repeats"].as_array().unwrap() {
        assert!(r["distance_to_limit"].as_f64().unwrap() < 1e-6);
    }
}

#[test]
fn diagnose_matches_in_memory() {
    let dir = TempDir::new().unwrap();
    let g = p(&dir, "g.csv");
    let prof = p(&dir, "prof.csv");
    let traj = p(&dir, "traj.csv");
    run(&["generate", "ba", "--n", "100", "--m", "2", "--seed", "5", "--out", s(&g)]);
    run(&["generate", "profile", "--n", "100", "--seed", "6", "--out", s(&prof)]);
    let o = run(&[
        "simulate",
        "--graph",
        s(&g),
        "--profile",
        s(&prof),
        "--schedule",
        "linear:1,0",
        "--k-max",
        "600",
        "--out",
        s(&traj),
    ]);
    assert_eq!(code(&o), 0);
    let o = run(&[
        "diagnose",
        "--trajectory",
        s(&traj),
        "--graph",
        s(&g),
        "--profile",
        s(&prof),
        "--schedule",
        "linear:1,0",
        "--format",
        "json",
    ]);
    assert_eq!(code(&o), 0, "{}", String::from_utf8_lossy(&o.stderr));
    let report: Value = serde_json::from_slice(&o.stdout).unwrap();

    let graph = read_edge_list(&g).unwrap();
    let profile = read_profile(&prof).unwrap();
    let sch: PressureSchedule = "linear:1,0".parse().unwrap();
    let t = simulate(&graph, &profile, &sch, profile.x_plus(), 600, 0.0).unwrap();
    let mut expected = serde_json::to_vec_pretty(&diagnose(&graph, &t).unwrap()).unwrap();
    expected.push(b'\n');
    assert_eq!(String::from_utf8(o.stdout.clone()).unwrap(), String::from_utf8(expected).unwrap());

    assert!(report["residuals"]["gradient"].as_f64().unwrap() < 1e-9);
    assert_eq!(report["poa"], 1.0);
    let ratios: Vec<f64> = report["ratios"].as_array().unwrap().iter().map(|v| v.as_f64().unwrap()).collect();
    let tail = &ratios[ratios.len() - 100..];
    assert!(tail.iter().all(|r| (0.95..=1.001).contains(r)));
    assert!(tail[tail.len() - 1] > tail[0], "ratios rise toward 1");
}

#[test]
fn diagnose_errors() {
    let dir = TempDir::new().unwrap();
    let (g, prof) = two_node(&dir, 1.0, 1.0);
    let traj = p(&dir, "fixed.csv");
    write(&traj, "k,agent_id,opinion\n0,0,0.3333333333333333\n0,1,0.6666666666666666\n1,0,0.3333333333333333\n1,1,0.6666666666666666\n2,0,0.3333333333333333\n2,1,0.6666666666666666\n");
    let diag = |t: &Path, graph: &Path| {
        code(&run(&[
            "diagnose",
            "--trajectory",
            s(t),
            "--graph",
            s(graph),
            "--profile",
            s(&prof),
            "--schedule",
            "constant:1",
        ]))
    };
    assert_eq!(diag(&traj, &g), 5, "trajectory at the fixed point");

    let off = p(&dir, "off.csv");
    write(&off, "k,agent_id,opinion\n0,0,0\n0,1,1\n1,0,0.9\n1,1,0.1\n2,0,0.5\n2,1,0.5\n");
    assert_eq!(diag(&off, &g), 2, "states do not replay");

    let gap = p(&dir, "gap.csv");
    write(&gap, "k,agent_id,opinion\n0,0,0\n0,1,1\n2,0,0.5\n2,1,0.5\n");
    assert_eq!(diag(&gap, &g), 2);

    let three = p(&dir, "three.csv");
    write(&three, "i,j\n0,1\n1,2\n");
    assert_eq!(diag(&off, &three), 2);

    let bad = p(&dir, "bad.csv");
    write(&bad, "k,agent_id,opinion\n0,0,1.5\n0,1,0\n");
    assert_eq!(diag(&bad, &g), 2);
}

fn clique_inputs(dir: &TempDir) -> (PathBuf, PathBuf) {
    let g = p(dir, "cliques.csv");
    let prof = p(dir, "prof.csv");
    assert_eq!(code(&run(&["generate", "cliques", "--sizes", "5,5,5", "--chain", "--out", s(&g)])), 0);
    assert_eq!(code(&run(&["generate", "profile", "--n", "15", "--seed", "11", "--out", s(&prof)])), 0);
    (g, prof)
}

fn make_panel(dir: &TempDir, g: &Path, prof: &Path, rho: &[f64], name: &str) -> PathBuf {
    let graph = read_edge_list(g).unwrap();
    let profile = read_profile(prof).unwrap();
    let breaks: Vec<usize> = (1..=rho.len()).map(|j| 10 * j).collect();
    let panel = synthesize_panel(&graph, &profile, profile.x_plus(), &breaks, rho).unwrap();
    let path = p(dir, name);
    write_panel(&panel, &path).unwrap();
    path
}

#[test]
fn fit_recovers_increasing_trend() {
    let dir = TempDir::new().unwrap();
    let (g, prof) = clique_inputs(&dir);
    let panel = make_panel(&dir, &g, &prof, &[0.5, 1.0, 1.5, 2.0, 2.5], "panel.csv");
    let out = p(&dir, "fit.json");
    let o = run(&[
        "fit",
        "--graph",
        s(&g),
        "--profile",
        s(&prof),
        "--panel",
        s(&panel),
        "--budget",
        "3000",
        "--format",
        "json",
        "--out",
        s(&out),
    ]);
    assert_eq!(code(&o), 0, "{}", String::from_utf8_lossy(&o.stderr));
    let fit = json_file(&out);
    assert!(fit["trend"]["slope"].as_f64().unwrap() > 0.0);
    assert!(fit["trend"]["r2"].as_f64().unwrap() > 0.8);
    assert_eq!(fit["rho"].as_array().unwrap().len(), 5);
    assert!(fit["evaluations"].as_u64().unwrap() <= 3000);
    assert!(fit["budget_exhausted"].is_boolean());
    let manifest: Value = serde_json::from_slice(&o.stdout).unwrap();
    assert_eq!(manifest["inputs"].as_array().unwrap().len(), 3);
}

#[test]
fn fit_at_generating_schedule_has_zero_loss() {
    let dir = TempDir::new().unwrap();
    let (g, prof) = clique_inputs(&dir);
    let panel = make_panel(&dir, &g, &prof, &[1.0; 4], "panel.csv");
    let o = run(&[
        "fit",
        "--graph",
        s(&g),
        "--profile",
        s(&prof),
        "--panel",
        s(&panel),
        "--budget",
        "200",
        "--format",
        "json",
    ]);
    assert_eq!(code(&o), 0);
    let fit: Value = serde_json::from_slice(&o.stdout).unwrap();
    assert_eq!(fit["loss"], 0.0);
    assert!(fit["rho"].as_array().unwrap().iter().all(|v| v.as_f64() == Some(1.0)));
}

#[test]
fn fit_errors() {
    let dir = TempDir::new().unwrap();
    let (g, prof) = clique_inputs(&dir);
    let small = p(&dir, "small.csv");
    write(&small, "k,agent_id,opinion\n0,0,0.1\n0,1,0.2\n5,0,0.3\n5,1,0.4\n9,0,0.3\n9,1,0.4\n");
    let fit = |panel: &Path| code(&run(&["fit", "--graph", s(&g), "--profile", s(&prof), "--panel", s(panel)]));
    assert_eq!(fit(&small), 2, "panel/graph size mismatch");
    let unordered = p(&dir, "unordered.csv");
    write(&unordered, "k,agent_id,opinion\n5,0,0.1\n0,0,0.2\n");
    assert_eq!(fit(&unordered), 2);
    assert_eq!(fit(&p(&dir, "missing.csv")), 3);
}
