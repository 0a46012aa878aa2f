//! Python bindings: graphs, agent profiles, pressure schedules, simulation,
//! limit points, diagnostics and schedule fitting.

// `!(x > 0.0)` style checks are deliberate: they also reject NaN
#![allow(clippy::neg_cmp_op_on_partial_ord)]

use peer_pressure::diagnostics::{self, DiagnosticsError};
use peer_pressure::dynamics::{self, DynamicsError};
use peer_pressure::graph::{self, GraphError};
use peer_pressure::inference::{self, FitOptions, InferenceError, LossNorm, ObservationPanel};
use peer_pressure::opinion_csv::OpinionCsvError;
use peer_pressure::{AgentProfile, LimitKind, PressureSchedule, StopReason, WeightedGraph};
use pyo3::exceptions::{PyIOError, PyValueError};
use pyo3::prelude::*;
use pyo3::types::PyDict;

fn graph_err(e: GraphError) -> PyErr {
    match e {
        GraphError::Io(e) => PyIOError::new_err(e.to_string()),
        other => PyValueError::new_err(other.to_string()),
    }
}

fn dynamics_err(e: DynamicsError) -> PyErr {
    match e {
        DynamicsError::Io(e) => PyIOError::new_err(e.to_string()),
        other => PyValueError::new_err(other.to_string()),
    }
}

fn diagnostics_err(e: DiagnosticsError) -> PyErr {
    match e {
        DiagnosticsError::Dynamics(d) => dynamics_err(d),
        other => PyValueError::new_err(other.to_string()),
    }
}

fn inference_err(e: InferenceError) -> PyErr {
    match e {
        InferenceError::Csv(OpinionCsvError::Io(e)) => PyIOError::new_err(e.to_string()),
        other => PyValueError::new_err(other.to_string()),
    }
}

/// Weighted undirected connected graph.
#[pyclass(name = "Graph", module = "peer_pressure", frozen)]
struct PyGraph {
    inner: WeightedGraph,
}

#[pymethods]
impl PyGraph {
    /// `edges` is a list of `(i, j, w)` triples.
    #[new]
    fn new(n: usize, edges: Vec<(usize, usize, f64)>) -> PyResult<Self> {
        Ok(Self { inner: WeightedGraph::new(n, &edges).map_err(graph_err)? })
    }

    #[staticmethod]
    fn barabasi_albert(n: usize, m: usize, seed: u64) -> PyResult<Self> {
        Ok(Self { inner: graph::generate_barabasi_albert(n, m, seed).map_err(graph_err)? })
    }

    #[staticmethod]
    #[pyo3(signature = (sizes, chain = true, intra_weight = 1.0, bridge_weight = 1.0))]
    fn cliques(sizes: Vec<usize>, chain: bool, intra_weight: f64, bridge_weight: f64) -> PyResult<Self> {
        let bridges = if chain { graph::chain_bridges(&sizes, bridge_weight) } else { Vec::new() };
        Ok(Self { inner: graph::generate_clique_clusters(&sizes, intra_weight, &bridges).map_err(graph_err)? })
    }

    #[staticmethod]
    fn read(path: &str) -> PyResult<Self> {
        Ok(Self { inner: graph::read_edge_list(path).map_err(graph_err)? })
    }

    fn write(&self, path: &str) -> PyResult<()> {
        graph::write_edge_list(&self.inner, path).map_err(graph_err)
    }

    #[getter]
    fn n(&self) -> usize {
        self.inner.n()
    }

    #[getter]
    fn edges(&self) -> Vec<(usize, usize, f64)> {
        self.inner.edges().iter().map(|e| (e.i, e.j, e.w)).collect()
    }

    #[getter]
    fn degrees(&self) -> Vec<f64> {
        self.inner.degrees().to_vec()
    }

    /// Dense Laplacian as a list of rows.
    fn laplacian(&self) -> Vec<Vec<f64>> {
        self.inner.matrices().laplacian.to_rows()
    }

    fn __len__(&self) -> usize {
        self.inner.n()
    }

    fn __repr__(&self) -> String {
        format!("Graph(n={}, edges={})", self.inner.n(), self.inner.edge_count())
    }
}

/// Innate preferences and stubbornness per agent.
#[pyclass(name = "Profile", module = "peer_pressure", frozen)]
struct PyProfile {
    inner: AgentProfile,
}

#[pymethods]
impl PyProfile {
    #[new]
    fn new(x_plus: Vec<f64>, s: Vec<f64>) -> PyResult<Self> {
        Ok(Self { inner: AgentProfile::new(x_plus, s).map_err(dynamics_err)? })
    }

    #[staticmethod]
    fn read(path: &str) -> PyResult<Self> {
        Ok(Self { inner: dynamics::read_profile(path).map_err(dynamics_err)? })
    }

    fn write(&self, path: &str) -> PyResult<()> {
        dynamics::write_profile(&self.inner, path).map_err(dynamics_err)
    }

    #[getter]
    fn n(&self) -> usize {
        self.inner.n()
    }

    #[getter]
    fn x_plus(&self) -> Vec<f64> {
        self.inner.x_plus().to_vec()
    }

    #[getter]
    fn s(&self) -> Vec<f64> {
        self.inner.stubbornness().to_vec()
    }

    fn __repr__(&self) -> String {
        format!("Profile(n={})", self.inner.n())
    }
}

/// Peer-pressure schedule parsed from `constant:<rho>`, `linear:<a>,<b>`,
/// `saturating:<rho0>,<rho_star>,<rate>` or `table:<v1>,...`.
#[pyclass(name = "Schedule", module = "peer_pressure", frozen)]
struct PySchedule {
    inner: PressureSchedule,
}

#[pymethods]
impl PySchedule {
    #[new]
    fn new(spec: &str) -> PyResult<Self> {
        Ok(Self { inner: spec.parse().map_err(dynamics_err)? })
    }

    fn eval(&self, k: usize) -> f64 {
        self.inner.eval(k)
    }

    /// `lim ρ(k)`, or `None` when unbounded.
    #[getter]
    fn limit(&self) -> Option<f64> {
        self.inner.limit()
    }

    fn __str__(&self) -> String {
        self.inner.to_string()
    }

    fn __repr__(&self) -> String {
        format!("Schedule('{}')", self.inner)
    }
}

fn check_n(g: &PyGraph, p: &PyProfile) -> PyResult<()> {
    if g.inner.n() != p.inner.n() {
        return Err(PyValueError::new_err(format!("graph has {} agents, profile has {}", g.inner.n(), p.inner.n())));
    }
    Ok(())
}

/// One synchronous update at pressure `rho`.
#[pyfunction]
fn step(g: &PyGraph, p: &PyProfile, rho: f64, x: Vec<f64>) -> PyResult<Vec<f64>> {
    check_n(g, p)?;
    dynamics::check_state(&x, g.inner.n()).map_err(dynamics_err)?;
    if !(rho > 0.0) {
        return Err(PyValueError::new_err(format!("rho must be positive, got {rho}")));
    }
    Ok(dynamics::step(&g.inner, &p.inner, rho, &x))
}

/// Runs the dynamics; returns a dict with `states`, `steps`, `stop_reason` and
/// `step_diff`.
#[pyfunction]
#[pyo3(signature = (g, p, schedule, x0 = None, k_max = 1000, stop_tol = 0.0))]
fn simulate<'py>(
    py: Python<'py>,
    g: &PyGraph,
    p: &PyProfile,
    schedule: &PySchedule,
    x0: Option<Vec<f64>>,
    k_max: usize,
    stop_tol: f64,
) -> PyResult<Bound<'py, PyDict>> {
    let x0 = x0.unwrap_or_else(|| p.inner.x_plus().to_vec());
    let t = dynamics::simulate(&g.inner, &p.inner, &schedule.inner, &x0, k_max, stop_tol).map_err(dynamics_err)?;
    let (reason, diff) = match t.stop {
        StopReason::Converged { step_diff } => ("converged", step_diff),
        StopReason::MaxSteps { step_diff } => ("max_steps", step_diff),
    };
    let out = PyDict::new(py);
    out.set_item("steps", t.steps())?;
    out.set_item("stop_reason", reason)?;
    out.set_item("step_diff", diff)?;
    out.set_item("out_of_box_count", t.out_of_box_count())?;
    out.set_item("states", t.states)?;
    Ok(out)
}

#[pyfunction]
fn fixed_point_at(g: &PyGraph, p: &PyProfile, rho: f64) -> PyResult<Vec<f64>> {
    dynamics::fixed_point_at(&g.inner, &p.inner, rho).map_err(dynamics_err)
}

#[pyfunction]
fn consensus_limit(p: &PyProfile) -> Vec<f64> {
    dynamics::consensus_limit(&p.inner).value
}

#[pyfunction]
fn bounded_limit(g: &PyGraph, p: &PyProfile, rho_star: f64) -> PyResult<Vec<f64>> {
    Ok(dynamics::bounded_limit(&g.inner, &p.inner, rho_star).map_err(dynamics_err)?.value)
}

/// Theoretical limit of a schedule and whether it is a consensus.
#[pyfunction]
fn schedule_limit(g: &PyGraph, p: &PyProfile, schedule: &PySchedule) -> PyResult<(Vec<f64>, bool)> {
    let l = dynamics::schedule_limit(&g.inner, &p.inner, &schedule.inner).map_err(dynamics_err)?;
    Ok((l.value, l.kind == LimitKind::Consensus))
}

/// Norm of the step's linear part in the `(S + ρD)`-weighted norm.
#[pyfunction]
fn contraction_factor(g: &PyGraph, p: &PyProfile, rho: f64) -> PyResult<f64> {
    check_n(g, p)?;
    dynamics::contraction_factor(&g.inner.matrices(), &p.inner, rho).map_err(|e| PyValueError::new_err(e.to_string()))
}

#[pyfunction]
fn global_utility(g: &PyGraph, p: &PyProfile, rho: f64, x: Vec<f64>) -> PyResult<f64> {
    check_n(g, p)?;
    dynamics::check_state(&x, g.inner.n()).map_err(dynamics_err)?;
    Ok(diagnostics::utility_quadratic(&g.inner, &p.inner, rho, &x))
}

/// Step written as a preconditioned gradient step: residual, finite-difference
/// error, `alpha` and the gradient.
#[pyfunction]
fn gradient_check<'py>(
    py: Python<'py>,
    g: &PyGraph,
    p: &PyProfile,
    rho: f64,
    x: Vec<f64>,
) -> PyResult<Bound<'py, PyDict>> {
    check_n(g, p)?;
    dynamics::check_state(&x, g.inner.n()).map_err(dynamics_err)?;
    let c = diagnostics::gradient_identity_check(&g.inner, &p.inner, rho, &x);
    let out = PyDict::new(py);
    out.set_item("residual", c.residual)?;
    out.set_item("fd_error", c.fd_error)?;
    out.set_item("social_residual", c.social_residual)?;
    out.set_item("alpha", c.decomposition.alpha)?;
    out.set_item("gradient", c.decomposition.grad_u)?;
    Ok(out)
}

#[pyfunction]
fn convergence_ratios(states: Vec<Vec<f64>>, x_star: Vec<f64>) -> PyResult<Vec<f64>> {
    Ok(diagnostics::convergence_ratio_series(&states, &x_star).map_err(diagnostics_err)?.ratios)
}

#[pyfunction]
fn price_of_anarchy(g: &PyGraph, p: &PyProfile, schedule: &PySchedule) -> PyResult<f64> {
    check_n(g, p)?;
    diagnostics::price_of_anarchy(&g.inner, &p.inner, &schedule.inner).map_err(dynamics_err)
}

/// Full diagnostics for a trajectory `states[0..]` produced under `schedule`.
#[pyfunction]
fn diagnose<'py>(
    py: Python<'py>,
    g: &PyGraph,
    p: &PyProfile,
    schedule: &PySchedule,
    states: Vec<Vec<f64>>,
) -> PyResult<Bound<'py, PyDict>> {
    if states.len() < 2 {
        return Err(PyValueError::new_err("trajectory needs at least two states"));
    }
    let step_diff = peer_pressure::numerics::norm_inf(&peer_pressure::numerics::sub(
        &states[states.len() - 1],
        &states[states.len() - 2],
    ));
    let t = peer_pressure::Trajectory {
        states,
        schedule: schedule.inner.clone(),
        profile: p.inner.clone(),
        graph_id: g.inner.fingerprint(),
        stop: StopReason::MaxSteps { step_diff },
    };
    let r = diagnostics::diagnose(&g.inner, &t).map_err(diagnostics_err)?;
    let residuals = PyDict::new(py);
    residuals.set_item("gradient", r.residuals.gradient)?;
    residuals.set_item("fixed_point", r.residuals.fixed_point)?;
    residuals.set_item("replay", r.residuals.replay)?;
    residuals.set_item("gradient_fd", r.residuals.gradient_fd)?;
    let out = PyDict::new(py);
    out.set_item("u_k", r.u_k)?;
    out.set_item("u_total", r.u_total)?;
    out.set_item("u_limit", r.u_limit)?;
    out.set_item("residuals", residuals)?;
    out.set_item("ratios", r.ratios)?;
    out.set_item("poa", r.poa)?;
    Ok(out)
}

fn panel_from(snapshots: Vec<(usize, Vec<f64>)>) -> PyResult<ObservationPanel> {
    ObservationPanel::from_states(snapshots).map_err(inference_err)
}

/// Fits one ρ per inter-snapshot interval. `snapshots` is a list of
/// `(k, opinions)` pairs with strictly increasing `k`.
#[pyfunction]
#[allow(clippy::too_many_arguments)]
#[pyo3(signature = (g, p, snapshots, init = None, budget = 2000, x0 = None, norm = "euclidean"))]
fn fit_schedule<'py>(
    py: Python<'py>,
    g: &PyGraph,
    p: &PyProfile,
    snapshots: Vec<(usize, Vec<f64>)>,
    init: Option<Vec<f64>>,
    budget: usize,
    x0: Option<Vec<f64>>,
    norm: &str,
) -> PyResult<Bound<'py, PyDict>> {
    let panel = panel_from(snapshots)?;
    let norm = match norm {
        "euclidean" => LossNorm::Euclidean,
        "sup" => LossNorm::Sup,
        other => return Err(PyValueError::new_err(format!("norm must be 'euclidean' or 'sup', got '{other}'"))),
    };
    let intervals = inference::FitSetup::new(&panel, x0.as_deref()).map_err(inference_err)?.intervals();
    let init = init.unwrap_or_else(|| vec![1.0; intervals]);
    let opts = FitOptions { budget, norm, x0, ..FitOptions::default() };
    let r = inference::fit_schedule_with(&g.inner, &p.inner, &panel, &init, &opts).map_err(inference_err)?;
    let trend = PyDict::new(py);
    trend.set_item("slope", r.trend.slope)?;
    trend.set_item("intercept", r.trend.intercept)?;
    trend.set_item("r2", r.trend.r_squared)?;
    let out = PyDict::new(py);
    out.set_item("rho", r.rho)?;
    out.set_item("loss", r.loss)?;
    out.set_item("trend", trend)?;
    out.set_item("evaluations", r.evaluations)?;
    out.set_item("budget_exhausted", r.budget_exhausted)?;
    Ok(out)
}

#[pyfunction]
#[pyo3(signature = (g, p, snapshots, rho, x0 = None))]
fn fit_loss(
    g: &PyGraph,
    p: &PyProfile,
    snapshots: Vec<(usize, Vec<f64>)>,
    rho: Vec<f64>,
    x0: Option<Vec<f64>>,
) -> PyResult<f64> {
    let panel = panel_from(snapshots)?;
    inference::fit_loss(&g.inner, &p.inner, &panel, &rho, x0.as_deref()).map_err(inference_err)
}

/// Simulated snapshots at `0` and each of `breaks` under per-interval `rho`.
#[pyfunction]
fn synthesize_panel(
    g: &PyGraph,
    p: &PyProfile,
    x0: Vec<f64>,
    breaks: Vec<usize>,
    rho: Vec<f64>,
) -> PyResult<Vec<(usize, Vec<f64>)>> {
    let panel = inference::synthesize_panel(&g.inner, &p.inner, &x0, &breaks, &rho).map_err(inference_err)?;
    Ok(panel.snapshots().iter().map(|s| (s.k, s.opinions.clone())).collect())
}

#[pyfunction]
fn read_panel(path: &str) -> PyResult<Vec<(usize, Vec<f64>)>> {
    let panel = inference::read_panel(path).map_err(inference_err)?;
    Ok(panel.snapshots().iter().map(|s| (s.k, s.opinions.clone())).collect())
}

#[pymodule]
#[pyo3(name = "peer_pressure")]
pub fn peer_pressure_module(m: &Bound<'_, PyModule>) -> PyResult<()> {
    m.add_class::<PyGraph>()?;
    m.add_class::<PyProfile>()?;
    m.add_class::<PySchedule>()?;
    m.add_function(wrap_pyfunction!(step, m)?)?;
    m.add_function(wrap_pyfunction!(simulate, m)?)?;
    m.add_function(wrap_pyfunction!(fixed_point_at, m)?)?;
    m.add_function(wrap_pyfunction!(consensus_limit, m)?)?;
    m.add_function(wrap_pyfunction!(bounded_limit, m)?)?;
    m.add_function(wrap_pyfunction!(schedule_limit, m)?)?;
    m.add_function(wrap_pyfunction!(contraction_factor, m)?)?;
    m.add_function(wrap_pyfunction!(global_utility, m)?)?;
    m.add_function(wrap_pyfunction!(gradient_check, m)?)?;
    m.add_function(wrap_pyfunction!(convergence_ratios, m)?)?;
    m.add_function(wrap_pyfunction!(price_of_anarchy, m)?)?;
    m.add_function(wrap_pyfunction!(diagnose, m)?)?;
    m.add_function(wrap_pyfunction!(fit_schedule, m)?)?;
    m.add_function(wrap_pyfunction!(fit_loss, m)?)?;
    m.add_function(wrap_pyfunction!(synthesize_panel, m)?)?;
    m.add_function(wrap_pyfunction!(read_panel, m)?)?;
    m.add("__version__", env!("CARGO_PKG_VERSION"))?;
    Ok(())
}
