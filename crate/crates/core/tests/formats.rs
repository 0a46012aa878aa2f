use peer_pressure::dynamics::{read_profile, write_profile};
use peer_pressure::graph::{generate_barabasi_albert, read_edge_list, write_edge_list};
use peer_pressure::inference::{read_panel, synthesize_panel, write_panel};
use peer_pressure::opinion_csv::{read_opinion_table, write_opinion_table};
use peer_pressure::{simulate, AgentProfile, PressureSchedule};

#[test]
fn files_roundtrip_and_replay() {
    let dir = tempfile::tempdir().unwrap();
    let g = generate_barabasi_albert(40, 2, 1).unwrap();
    let p = AgentProfile::new(
        (0..40).map(|i| i as f64 / 39.0).collect(),
        (0..40).map(|i| 0.1 + (i % 7) as f64 / 7.0).collect(),
    )
    .unwrap();
    write_edge_list(&g, dir.path().join("g.csv")).unwrap();
    write_profile(&p, dir.path().join("p.csv")).unwrap();
    let g2 = read_edge_list(dir.path().join("g.csv")).unwrap();
    let p2 = read_profile(dir.path().join("p.csv")).unwrap();
    assert_eq!(g2, g);
    assert_eq!(p2, p);

    let sch: PressureSchedule = "saturating:0.2,4,0.05".parse().unwrap();
    let t = simulate(&g2, &p2, &sch, p2.x_plus(), 150, 0.0).unwrap();
    let path = dir.path().join("traj.csv");
    write_opinion_table(t.states.iter().enumerate().map(|(k, x)| (k, x.as_slice())), &path).unwrap();
    let back: Vec<Vec<f64>> = read_opinion_table(&path).unwrap().into_iter().map(|(_, x)| x).collect();
    assert_eq!(back, t.states, "trajectory CSV is bit-exact");

    let panel = synthesize_panel(&g, &p, p.x_plus(), &[30, 60, 90], &[0.5, 1.0, 2.0]).unwrap();
    write_panel(&panel, dir.path().join("panel.csv")).unwrap();
    assert_eq!(read_panel(dir.path().join("panel.csv")).unwrap(), panel);
}
