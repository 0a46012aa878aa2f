//! Fitting a peer-pressure schedule to observed opinion snapshots.
//!
//! The schedule is piecewise constant: one ρ per interval between consecutive
//! snapshots. Given candidate values the dynamics are simulated step by step
//! and compared against every snapshot; the summed distance is minimized by a
//! Nelder–Mead search over `ln ρ`, which keeps every candidate positive.

use std::path::Path;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::dynamics::{self, AgentProfile};
use crate::graph::WeightedGraph;
use crate::numerics::{self, linear_regression, NumericsError, RegressionLine};
use crate::opinion_csv::{self, OpinionCsvError};
use crate::optim::{nelder_mead, NelderMeadOptions};

/// Search bounds on `ln ρ`; the optimizer itself is unconstrained.
const LOG_RHO_BOUND: f64 = 30.0;

#[derive(Debug, Error)]
pub enum InferenceError {
    #[error("dimension mismatch: {0}")]
    DimensionMismatch(String),
    #[error("invalid panel: {0}")]
    InvalidPanel(String),
    #[error("invalid pressure values: {0}")]
    InvalidRho(String),
    #[error(transparent)]
    Csv(#[from] OpinionCsvError),
    #[error(transparent)]
    Numerics(#[from] NumericsError),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Snapshot {
    pub k: usize,
    pub opinions: Vec<f64>,
}

/// Observed opinion vectors at strictly increasing steps.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ObservationPanel {
    n: usize,
    snapshots: Vec<Snapshot>,
}

impl ObservationPanel {
    pub fn new(snapshots: Vec<Snapshot>) -> Result<Self, InferenceError> {
        let n = snapshots
            .first()
            .map(|s| s.opinions.len())
            .ok_or_else(|| InferenceError::InvalidPanel("no snapshots".into()))?;
        if n == 0 {
            return Err(InferenceError::InvalidPanel("snapshots are empty".into()));
        }
        for w in snapshots.windows(2) {
            if w[1].k <= w[0].k {
                return Err(InferenceError::InvalidPanel(format!("step {} follows step {}", w[1].k, w[0].k)));
            }
        }
        for s in &snapshots {
            if s.opinions.len() != n {
                return Err(InferenceError::DimensionMismatch(format!(
                    "snapshot at step {} has {} agents, expected {n}",
                    s.k,
                    s.opinions.len()
                )));
            }
            if let Some(v) = s.opinions.iter().find(|v| !(0.0..=1.0).contains(*v)) {
                return Err(InferenceError::InvalidPanel(format!("opinion {v} at step {} outside [0,1]", s.k)));
            }
        }
        Ok(Self { n, snapshots })
    }

    pub fn from_states(states: impl IntoIterator<Item = (usize, Vec<f64>)>) -> Result<Self, InferenceError> {
        Self::new(states.into_iter().map(|(k, opinions)| Snapshot { k, opinions }).collect())
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn snapshots(&self) -> &[Snapshot] {
        &self.snapshots
    }
}

pub fn read_panel(path: impl AsRef<Path>) -> Result<ObservationPanel, InferenceError> {
    ObservationPanel::from_states(opinion_csv::read_opinion_table(path)?)
}

pub fn write_panel(panel: &ObservationPanel, path: impl AsRef<Path>) -> Result<(), InferenceError> {
    opinion_csv::write_opinion_table(panel.snapshots.iter().map(|s| (s.k, s.opinions.as_slice())), path)?;
    Ok(())
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum LossNorm {
    #[default]
    Euclidean,
    Sup,
}

impl LossNorm {
    fn distance(self, a: &[f64], b: &[f64]) -> f64 {
        let d = numerics::sub(a, b);
        match self {
            Self::Euclidean => numerics::norm2(&d),
            Self::Sup => numerics::norm_inf(&d),
        }
    }
}

/// Where the simulation starts and which snapshots bound the pressure
/// intervals.
///
/// With an explicit initial state the clock starts at step 0 and every snapshot
/// with `k > 0` closes one interval. Without one, the first snapshot is the
/// initial state and the remaining snapshots close the intervals.
#[derive(Debug, Clone)]
pub struct FitSetup {
    start_k: usize,
    start: Vec<f64>,
    /// Snapshot steps closing each interval, ascending.
    breaks: Vec<usize>,
}

impl FitSetup {
    pub fn new(panel: &ObservationPanel, x0: Option<&[f64]>) -> Result<Self, InferenceError> {
        let (start_k, start) = match x0 {
            Some(x) => {
                if x.len() != panel.n {
                    return Err(InferenceError::DimensionMismatch(format!(
                        "initial state has {} agents, panel has {}",
                        x.len(),
                        panel.n
                    )));
                }
                (0, x.to_vec())
            }
            None => (panel.snapshots[0].k, panel.snapshots[0].opinions.clone()),
        };
        let breaks = panel.snapshots.iter().map(|s| s.k).filter(|&k| k > start_k).collect();
        Ok(Self { start_k, start, breaks })
    }

    /// Number of pressure values the panel calls for.
    pub fn intervals(&self) -> usize {
        self.breaks.len()
    }

    pub fn breaks(&self) -> &[usize] {
        &self.breaks
    }

    /// ρ at step `k` for the piecewise-constant table `rho`.
    pub fn rho_at(&self, rho: &[f64], k: usize) -> f64 {
        let j = self.breaks.partition_point(|&b| b < k);
        rho[j.min(rho.len() - 1)]
    }

    /// Simulated states at every snapshot step at or after the start.
    pub fn simulate_snapshots(
        &self,
        g: &WeightedGraph,
        p: &AgentProfile,
        rho: &[f64],
        panel: &ObservationPanel,
    ) -> Vec<Vec<f64>> {
        let offsets: Vec<usize> =
            panel.snapshots.iter().filter(|s| s.k >= self.start_k).map(|s| s.k - self.start_k).collect();
        dynamics::evolve_to(g, p, |t| self.rho_at(rho, self.start_k + t), &self.start, &offsets)
    }
}

fn check_inputs(g: &WeightedGraph, p: &AgentProfile, panel: &ObservationPanel) -> Result<(), InferenceError> {
    if panel.n != g.n() || p.n() != g.n() {
        return Err(InferenceError::DimensionMismatch(format!(
            "graph has {} agents, profile {}, panel {}",
            g.n(),
            p.n(),
            panel.n
        )));
    }
    Ok(())
}

/// Summed Euclidean distance between simulated and observed snapshots.
pub fn fit_loss(
    g: &WeightedGraph,
    p: &AgentProfile,
    panel: &ObservationPanel,
    rho_values: &[f64],
    x0: Option<&[f64]>,
) -> Result<f64, InferenceError> {
    fit_loss_with(g, p, panel, rho_values, x0, LossNorm::Euclidean)
}

pub fn fit_loss_with(
    g: &WeightedGraph,
    p: &AgentProfile,
    panel: &ObservationPanel,
    rho_values: &[f64],
    x0: Option<&[f64]>,
    norm: LossNorm,
) -> Result<f64, InferenceError> {
    check_inputs(g, p, panel)?;
    let setup = FitSetup::new(panel, x0)?;
    if rho_values.len() != setup.intervals() {
        return Err(InferenceError::DimensionMismatch(format!(
            "{} pressure values for {} intervals",
            rho_values.len(),
            setup.intervals()
        )));
    }
    if let Some(v) = rho_values.iter().find(|v| !(v.is_finite() && **v > 0.0)) {
        return Err(InferenceError::InvalidRho(format!("{v} is not positive")));
    }
    Ok(loss_for(&setup, g, p, panel, rho_values, norm))
}

fn loss_for(
    setup: &FitSetup,
    g: &WeightedGraph,
    p: &AgentProfile,
    panel: &ObservationPanel,
    rho: &[f64],
    norm: LossNorm,
) -> f64 {
    let simulated = setup.simulate_snapshots(g, p, rho, panel);
    panel
        .snapshots
        .iter()
        .filter(|s| s.k >= setup.start_k)
        .zip(&simulated)
        .map(|(s, x)| norm.distance(x, &s.opinions))
        .sum()
}

#[derive(Debug, Clone)]
pub struct FitOptions {
    pub budget: usize,
    pub norm: LossNorm,
    /// Initial state; `None` starts from the first snapshot.
    pub x0: Option<Vec<f64>>,
    /// Simplex offset in `ln ρ`.
    pub initial_step: f64,
}

impl Default for FitOptions {
    fn default() -> Self {
        Self { budget: 2000, norm: LossNorm::Euclidean, x0: None, initial_step: 0.5 }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FitResult {
    /// Fitted ρ per interval.
    pub rho: Vec<f64>,
    pub loss: f64,
    /// Least-squares line of fitted ρ against the 1-based interval index.
    pub trend: RegressionLine,
    pub evaluations: usize,
    pub budget_exhausted: bool,
}

/// Fits per-interval pressures with the default options and the given budget.
pub fn fit_schedule(
    g: &WeightedGraph,
    p: &AgentProfile,
    panel: &ObservationPanel,
    init: &[f64],
    budget: usize,
) -> Result<FitResult, InferenceError> {
    fit_schedule_with(g, p, panel, init, &FitOptions { budget, ..FitOptions::default() })
}

pub fn fit_schedule_with(
    g: &WeightedGraph,
    p: &AgentProfile,
    panel: &ObservationPanel,
    init: &[f64],
    opts: &FitOptions,
) -> Result<FitResult, InferenceError> {
    check_inputs(g, p, panel)?;
    if opts.budget < 1 {
        return Err(InferenceError::InvalidRho("budget must be at least 1".into()));
    }
    let setup = FitSetup::new(panel, opts.x0.as_deref())?;
    if setup.intervals() < 2 {
        return Err(InferenceError::InvalidPanel(format!(
            "need at least 2 pressure intervals for a trend, panel gives {}",
            setup.intervals()
        )));
    }
    if init.len() != setup.intervals() {
        return Err(InferenceError::DimensionMismatch(format!(
            "{} initial values for {} intervals",
            init.len(),
            setup.intervals()
        )));
    }
    if let Some(v) = init.iter().find(|v| !(v.is_finite() && **v > 0.0)) {
        return Err(InferenceError::InvalidRho(format!("initial value {v} is not positive")));
    }
    let to_rho =
        |theta: &[f64]| -> Vec<f64> { theta.iter().map(|t| t.clamp(-LOG_RHO_BOUND, LOG_RHO_BOUND).exp()).collect() };
    let theta0: Vec<f64> = init.iter().map(|v| v.ln()).collect();
    let nm = NelderMeadOptions { max_evals: opts.budget, initial_step: opts.initial_step, ..Default::default() };
    let result = nelder_mead(|theta| loss_for(&setup, g, p, panel, &to_rho(theta), opts.norm), &theta0, &nm);
    let rho = to_rho(&result.x);
    let points: Vec<(f64, f64)> = rho.iter().enumerate().map(|(j, r)| ((j + 1) as f64, *r)).collect();
    Ok(FitResult {
        trend: linear_regression(&points)?,
        rho,
        loss: result.f,
        evaluations: result.evaluations,
        budget_exhausted: result.budget_exhausted,
    })
}

/// Simulates a panel with a piecewise-constant schedule, recording the state at
/// `0` and at each of `breaks`.
pub fn synthesize_panel(
    g: &WeightedGraph,
    p: &AgentProfile,
    x0: &[f64],
    breaks: &[usize],
    rho: &[f64],
) -> Result<ObservationPanel, InferenceError> {
    if rho.len() != breaks.len() {
        return Err(InferenceError::DimensionMismatch(format!("{} values for {} intervals", rho.len(), breaks.len())));
    }
    let mut steps = vec![0];
    steps.extend_from_slice(breaks);
    let setup = FitSetup { start_k: 0, start: x0.to_vec(), breaks: breaks.to_vec() };
    let states = dynamics::evolve_to(g, p, |k| setup.rho_at(rho, k), x0, &steps);
    ObservationPanel::from_states(steps.into_iter().zip(states))
}
