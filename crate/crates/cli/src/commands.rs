use std::io::Write;
use std::path::{Path, PathBuf};

use peer_pressure::diagnostics::diagnose;
use peer_pressure::dynamics::{format_profile, read_profile, schedule_limit, simulate};
use peer_pressure::graph::{
    chain_bridges, format_edge_list, generate_barabasi_albert, generate_clique_clusters, read_edge_list,
};
use peer_pressure::inference::{fit_schedule_with, read_panel, FitOptions, FitSetup, LossNorm};
use peer_pressure::numerics::{norm_inf, sub};
use peer_pressure::opinion_csv::{format_opinion_table, read_opinion_table};
use peer_pressure::{AgentProfile, LimitKind, LimitPoint, PressureSchedule, StopReason, Trajectory, WeightedGraph};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::Serialize;
use serde_json::{json, Value};

use crate::error::CliError;
use crate::manifest::RunManifest;
use crate::{Cli, Command, DiagnoseArgs, FitArgs, Format, GenerateKind, NormArg, SimulateArgs};

pub fn run(cli: &Cli) -> Result<(), CliError> {
    match &cli.command {
        Command::Generate { kind } => generate(cli, kind),
        Command::Simulate(args) => simulate_cmd(cli, args),
        Command::Diagnose(args) => diagnose_cmd(cli, args),
        Command::Fit(args) => fit_cmd(cli, args),
    }
}

fn format_name(f: Format) -> &'static str {
    match f {
        Format::Csv => "csv",
        Format::Json => "json",
    }
}

/// Writes the primary output to `--out`, or stdout.
fn emit(cli: &Cli, bytes: &[u8]) -> Result<(), CliError> {
    match &cli.out {
        Some(path) => std::fs::write(path, bytes).map_err(|e| CliError::io(&format!("writing {}", path.display()), e)),
        None => {
            let mut stdout = std::io::stdout().lock();
            stdout.write_all(bytes).and_then(|_| stdout.flush()).map_err(|e| CliError::io("writing stdout", e))
        }
    }
}

/// The manifest goes to stdout when the data went to a file, otherwise to
/// stderr so stdout stays parseable.
fn print_json(cli: &Cli, value: &impl Serialize) -> Result<(), CliError> {
    let text = serde_json::to_string(value)?;
    if cli.out.is_some() {
        println!("{text}");
    } else {
        eprintln!("{text}");
    }
    Ok(())
}

fn json_bytes(value: &impl Serialize) -> Result<Vec<u8>, CliError> {
    let mut bytes = serde_json::to_vec_pretty(value)?;
    bytes.push(b'\n');
    Ok(bytes)
}

fn graph_json(g: &WeightedGraph) -> Value {
    let edges: Vec<Value> = g.edges().iter().map(|e| json!({ "i": e.i, "j": e.j, "w": e.w })).collect();
    json!({ "n": g.n(), "edges": edges })
}

fn load_graph(path: &Path, manifest: &mut RunManifest) -> Result<WeightedGraph, CliError> {
    manifest.input("graph", path)?;
    Ok(read_edge_list(path)?)
}

fn load_profile(path: &Path, manifest: &mut RunManifest) -> Result<AgentProfile, CliError> {
    manifest.input("profile", path)?;
    Ok(read_profile(path)?)
}

fn parse_schedule(spec: &str) -> Result<PressureSchedule, CliError> {
    spec.parse().map_err(CliError::schedule)
}

/// A single-step opinion table holding an initial state.
fn load_state(path: &Path, role: &str, manifest: &mut RunManifest) -> Result<Vec<f64>, CliError> {
    manifest.input(role, path)?;
    let mut table = read_opinion_table(path)?;
    if table.len() != 1 {
        return Err(CliError::invalid(format!("{role}: expected exactly one step, found {}", table.len())));
    }
    Ok(table.remove(0).1)
}

fn generate(cli: &Cli, kind: &GenerateKind) -> Result<(), CliError> {
    let seed = cli.seed.unwrap_or(0);
    let mut manifest = RunManifest::new("generate", None);
    manifest.param("format", format_name(cli.format));
    let bytes = match kind {
        GenerateKind::Ba { n, m } => {
            manifest.seed = Some(seed);
            manifest.param("kind", "ba").param("n", n).param("m", m);
            graph_bytes(cli.format, &generate_barabasi_albert(*n, *m, seed)?)?
        }
        GenerateKind::Cliques { sizes, chain, bridges, intra_weight, bridge_weight } => {
            let mut edges = if *chain { chain_bridges(sizes, *bridge_weight) } else { Vec::new() };
            for b in bridges {
                let (i, j) = b
                    .split_once('-')
                    .and_then(|(i, j)| Some((i.trim().parse::<usize>().ok()?, j.trim().parse::<usize>().ok()?)))
                    .ok_or_else(|| CliError::invalid(format!("bridge `{b}` is not of the form i-j")))?;
                edges.push((i, j, *bridge_weight));
            }
            manifest
                .param("kind", "cliques")
                .param("sizes", sizes)
                .param("chain", chain)
                .param("bridges", bridges)
                .param("intra_weight", intra_weight)
                .param("bridge_weight", bridge_weight);
            graph_bytes(cli.format, &generate_clique_clusters(sizes, *intra_weight, &edges)?)?
        }
        GenerateKind::Profile { n, s_min, s_max, zero_fraction } => {
            manifest.seed = Some(seed);
            manifest
                .param("kind", "profile")
                .param("n", n)
                .param("s_min", s_min)
                .param("s_max", s_max)
                .param("zero_fraction", zero_fraction);
            let p = random_profile(*n, *s_min, *s_max, *zero_fraction, seed)?;
            match cli.format {
                Format::Csv => {
                    let mut buf = Vec::new();
                    format_profile(&p, &mut buf)?;
                    buf
                }
                Format::Json => json_bytes(&json!({ "x_plus": p.x_plus(), "s": p.stubbornness() }))?,
            }
        }
    };
    emit(cli, &bytes)?;
    print_json(cli, &manifest)
}

fn graph_bytes(format: Format, g: &WeightedGraph) -> Result<Vec<u8>, CliError> {
    match format {
        Format::Csv => {
            let mut buf = Vec::new();
            format_edge_list(g, &mut buf)?;
            Ok(buf)
        }
        Format::Json => json_bytes(&graph_json(g)),
    }
}

/// If every draw lands on zero stubbornness, agent 0 gets `s_max` so the
/// profile stays valid.
fn random_profile(n: usize, s_min: f64, s_max: f64, zero_fraction: f64, seed: u64) -> Result<AgentProfile, CliError> {
    if n == 0 || !(0.0 <= s_min && s_min <= s_max && s_max > 0.0) || !(0.0..1.0).contains(&zero_fraction) {
        return Err(CliError::invalid(format!(
            "profile needs n >= 1, 0 <= s_min <= s_max, s_max > 0 and zero_fraction in [0,1); \
             got n={n}, s_min={s_min}, s_max={s_max}, zero_fraction={zero_fraction}"
        )));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let x: Vec<f64> = (0..n).map(|_| rng.gen()).collect();
    let mut s: Vec<f64> = (0..n)
        .map(|_| if rng.gen::<f64>() < zero_fraction { 0.0 } else { s_min + (s_max - s_min) * rng.gen::<f64>() })
        .collect();
    if s.iter().all(|&v| v == 0.0) {
        s[0] = s_max;
    }
    Ok(AgentProfile::new(x, s)?)
}

#[derive(Debug, Serialize)]
struct RunSummary {
    steps: usize,
    stop: StopReason,
    final_state: Vec<f64>,
    limit_kind: LimitKind,
    /// Sup-norm distance from the final state to the schedule's theoretical limit.
    distance_to_limit: f64,
    out_of_box_count: usize,
}

fn summarize(t: &Trajectory, limit: &LimitPoint) -> RunSummary {
    RunSummary {
        steps: t.steps(),
        stop: t.stop,
        final_state: t.final_state().to_vec(),
        limit_kind: limit.kind,
        distance_to_limit: norm_inf(&sub(t.final_state(), &limit.value)),
        out_of_box_count: t.out_of_box_count(),
    }
}

fn trajectory_bytes(format: Format, t: &Trajectory) -> Result<Vec<u8>, CliError> {
    match format {
        Format::Csv => {
            let mut buf = Vec::new();
            format_opinion_table(t.states.iter().enumerate().map(|(k, x)| (k, x.as_slice())), &mut buf)?;
            Ok(buf)
        }
        Format::Json => {
            let states: Vec<Value> =
                t.states.iter().enumerate().map(|(k, x)| json!({ "k": k, "opinions": x })).collect();
            json_bytes(&json!({ "schedule": t.schedule.to_string(), "states": states }))
        }
    }
}

fn simulate_cmd(cli: &Cli, args: &SimulateArgs) -> Result<(), CliError> {
    if !(args.stop_tol >= 0.0) {
        return Err(CliError::invalid(format!("--stop-tol must be >= 0, got {}", args.stop_tol)));
    }
    if args.repeat == 0 {
        return Err(CliError::invalid("--repeat must be at least 1"));
    }
    let schedule = parse_schedule(&args.schedule)?;
    let mut manifest = RunManifest::new("simulate", None);
    let g = load_graph(&args.graph, &mut manifest)?;
    let p = load_profile(&args.profile, &mut manifest)?;
    let x0 = match &args.x0 {
        Some(path) => load_state(path, "x0", &mut manifest)?,
        None => p.x_plus().to_vec(),
    };
    if args.repeat > 1 {
        manifest.seed = Some(cli.seed.unwrap_or(0));
    }
    manifest
        .param("schedule", schedule.to_string())
        .param("k_max", args.k_max)
        .param("stop_tol", args.stop_tol)
        .param("repeat", args.repeat)
        .param("format", format_name(cli.format));

    let mut starts = vec![x0];
    for r in 1..args.repeat {
        let mut rng = ChaCha8Rng::seed_from_u64(cli.seed.unwrap_or(0).wrapping_add(r as u64));
        starts.push((0..g.n()).map(|_| rng.gen()).collect());
    }
    let runs: Vec<Result<Trajectory, _>> = std::thread::scope(|scope| {
        let handles: Vec<_> =
            starts.iter().map(|x| scope.spawn(|| simulate(&g, &p, &schedule, x, args.k_max, args.stop_tol))).collect();
        handles.into_iter().map(|h| h.join().expect("simulation thread panicked")).collect()
    });
    let runs = runs.into_iter().collect::<Result<Vec<_>, _>>()?;

    let limit = schedule_limit(&g, &p, &schedule)?;
    let summaries: Vec<RunSummary> = runs.iter().map(|t| summarize(t, &limit)).collect();
    let summary = if summaries.len() == 1 {
        serde_json::to_value(&summaries[0])?
    } else {
        let mut v = serde_json::to_value(&summaries[0])?;
        v["repeats"] = serde_json::to_value(&summaries)?;
        v
    };

    emit(cli, &trajectory_bytes(cli.format, &runs[0])?)?;
    let summary_path: Option<PathBuf> = args.summary.clone().or_else(|| {
        cli.out.as_ref().map(|o| {
            let mut name = o.as_os_str().to_owned();
            name.push(".summary.json");
            PathBuf::from(name)
        })
    });
    match &summary_path {
        Some(path) => std::fs::write(path, json_bytes(&summary)?)
            .map_err(|e| CliError::io(&format!("writing {}", path.display()), e))?,
        None => eprintln!("{}", serde_json::to_string(&summary)?),
    }
    print_json(cli, &manifest)
}

fn diagnose_cmd(cli: &Cli, args: &DiagnoseArgs) -> Result<(), CliError> {
    let schedule = parse_schedule(&args.schedule)?;
    let mut manifest = RunManifest::new("diagnose", None);
    manifest.input("trajectory", &args.trajectory)?;
    let g = load_graph(&args.graph, &mut manifest)?;
    let p = load_profile(&args.profile, &mut manifest)?;
    manifest.param("schedule", schedule.to_string()).param("format", format_name(cli.format));

    let table = read_opinion_table(&args.trajectory)?;
    if let Some((idx, (k, _))) = table.iter().enumerate().find(|(idx, (k, _))| *k != *idx) {
        return Err(CliError::invalid(format!("trajectory steps must run 0,1,2,...; row group {idx} has k={k}")));
    }
    let states: Vec<Vec<f64>> = table.into_iter().map(|(_, x)| x).collect();
    if states.len() < 2 {
        return Err(CliError::new(crate::error::EXIT_DEGENERATE, "trajectory has no steps"));
    }
    let step_diff = norm_inf(&sub(&states[states.len() - 1], &states[states.len() - 2]));
    let traj = Trajectory {
        states,
        schedule,
        profile: p,
        graph_id: g.fingerprint(),
        stop: StopReason::MaxSteps { step_diff },
    };
    let report = diagnose(&g, &traj)?;
    let bytes = match cli.format {
        Format::Json => json_bytes(&report)?,
        Format::Csv => {
            let mut out = String::from("k,ratio\n");
            for (k, r) in report.ratios.iter().enumerate() {
                out.push_str(&format!("{k},{r}\n"));
            }
            out.into_bytes()
        }
    };
    emit(cli, &bytes)?;
    print_json(cli, &manifest)
}

fn fit_cmd(cli: &Cli, args: &FitArgs) -> Result<(), CliError> {
    let mut manifest = RunManifest::new("fit", None);
    let g = load_graph(&args.graph, &mut manifest)?;
    let p = load_profile(&args.profile, &mut manifest)?;
    manifest.input("panel", &args.panel)?;
    let panel = read_panel(&args.panel)?;
    let x0 = match &args.x0 {
        Some(path) => Some(load_state(path, "x0", &mut manifest)?),
        None => None,
    };
    let setup = FitSetup::new(&panel, x0.as_deref())?;
    let init = if args.init_values.is_empty() { vec![args.init; setup.intervals()] } else { args.init_values.clone() };
    let norm = match args.norm {
        NormArg::Euclidean => LossNorm::Euclidean,
        NormArg::Sup => LossNorm::Sup,
    };
    manifest
        .param("budget", args.budget)
        .param("init", &init)
        .param("norm", norm)
        .param("format", format_name(cli.format));
    let opts = FitOptions { budget: args.budget, norm, x0, ..FitOptions::default() };
    let result = fit_schedule_with(&g, &p, &panel, &init, &opts)?;
    let bytes = match cli.format {
        Format::Json => json_bytes(&result)?,
        Format::Csv => {
            let mut out = String::from("interval,rho\n");
            for (j, r) in result.rho.iter().enumerate() {
                out.push_str(&format!("{},{r}\n", j + 1));
            }
            out.into_bytes()
        }
    };
    emit(cli, &bytes)?;
    print_json(cli, &manifest)
}
