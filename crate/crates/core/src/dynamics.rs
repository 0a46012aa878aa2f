//! Opinion dynamics under a time-varying peer-pressure coefficient.
//!
//! Agent `i` discloses, at step `k`, the minimizer of its social stress
//!
//! ```text
//! J_i = s_i (x_i − x⁺_i)² + ρ(k) Σ_j w_ij (x_i − x_j^(k−1))²
//! ```
//!
//! which is the weighted average
//! `x_i^(k) = (s_i x⁺_i + ρ(k) Σ_j w_ij x_j^(k−1)) / (s_i + ρ(k) d_i)`.
//! For fixed ρ the map is a contraction with fixed point `(S + ρL)⁻¹ S x⁺`.
//! Unbounded ρ drives every agent to the stubbornness-weighted mean of the
//! innate preferences; bounded ρ → ρ* leads to `(S + ρ*L)⁻¹ S x⁺`.

use std::fmt;
use std::io::{BufRead, Write};
use std::path::Path;
use std::str::FromStr;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::graph::{GraphMatrices, WeightedGraph};
use crate::numerics::{self, Matrix, NumericsError, SymMatrix};

/// Floor applied to the linear schedule, which may dip non-positive for small k.
pub const RHO_FLOOR: f64 = 1e-6;

#[derive(Debug, Error)]
pub enum DynamicsError {
    #[error("invalid agent profile: {0}")]
    InvalidProfile(String),
    #[error("invalid schedule: {0}")]
    InvalidSchedule(String),
    #[error("dimension mismatch: expected {expected}, got {got}")]
    DimensionMismatch { expected: usize, got: usize },
    #[error("opinion {value} at agent {agent} is outside [0,1]")]
    OutOfRange { agent: usize, value: f64 },
    #[error("peer pressure must be positive, got {0}")]
    NonPositivePressure(f64),
    #[error(transparent)]
    Numerics(#[from] NumericsError),
    #[error("parse error at line {line}: {msg}")]
    Parse { line: usize, msg: String },
    #[error(transparent)]
    Io(#[from] std::io::Error),
}

/// Innate preferences `x⁺ ∈ [0,1]ⁿ` and stubbornness `s ≥ 0` with `Σ s > 0`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AgentProfile {
    x_plus: Vec<f64>,
    s: Vec<f64>,
}

impl AgentProfile {
    pub fn new(x_plus: Vec<f64>, s: Vec<f64>) -> Result<Self, DynamicsError> {
        if x_plus.len() != s.len() {
            return Err(DynamicsError::DimensionMismatch { expected: x_plus.len(), got: s.len() });
        }
        if let Some((i, v)) = x_plus.iter().enumerate().find(|(_, v)| !(0.0..=1.0).contains(*v)) {
            return Err(DynamicsError::InvalidProfile(format!("x_plus[{i}] = {v} outside [0,1]")));
        }
        if let Some((i, v)) = s.iter().enumerate().find(|(_, v)| !(**v >= 0.0 && v.is_finite())) {
            return Err(DynamicsError::InvalidProfile(format!("s[{i}] = {v} must be finite and >= 0")));
        }
        if s.iter().sum::<f64>() <= 0.0 {
            return Err(DynamicsError::InvalidProfile("all stubbornness values are zero".into()));
        }
        Ok(Self { x_plus, s })
    }

    pub fn n(&self) -> usize {
        self.s.len()
    }

    pub fn x_plus(&self) -> &[f64] {
        &self.x_plus
    }

    pub fn stubbornness(&self) -> &[f64] {
        &self.s
    }

    /// `S·x⁺`
    pub fn weighted_preferences(&self) -> Vec<f64> {
        self.s.iter().zip(&self.x_plus).map(|(s, x)| s * x).collect()
    }

    fn check_graph(&self, g_n: usize) -> Result<(), DynamicsError> {
        if self.n() != g_n {
            return Err(DynamicsError::DimensionMismatch { expected: g_n, got: self.n() });
        }
        Ok(())
    }
}

/// Peer-pressure schedule `k ↦ ρ(k)`, positive and nondecreasing.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "family", rename_all = "snake_case")]
pub enum PressureSchedule {
    Constant {
        rho: f64,
    },
    /// `max(RHO_FLOOR, a·k + b)`
    Linear {
        a: f64,
        b: f64,
    },
    /// `ρ* − (ρ* − ρ₀)·e^(−rate·k)`
    Saturating {
        rho0: f64,
        rho_star: f64,
        rate: f64,
    },
    /// `values[k−1]`, extended by the last value.
    Table {
        values: Vec<f64>,
    },
}

impl PressureSchedule {
    pub fn constant(rho: f64) -> Result<Self, DynamicsError> {
        Self::Constant { rho }.validated()
    }

    pub fn linear(a: f64, b: f64) -> Result<Self, DynamicsError> {
        Self::Linear { a, b }.validated()
    }

    pub fn saturating(rho0: f64, rho_star: f64, rate: f64) -> Result<Self, DynamicsError> {
        Self::Saturating { rho0, rho_star, rate }.validated()
    }

    pub fn table(values: Vec<f64>) -> Result<Self, DynamicsError> {
        Self::Table { values }.validated()
    }

    pub fn validated(self) -> Result<Self, DynamicsError> {
        let bad = |msg: String| Err(DynamicsError::InvalidSchedule(msg));
        let finite_pos = |v: f64| v.is_finite() && v > 0.0;
        match &self {
            Self::Constant { rho } if !finite_pos(*rho) => return bad(format!("constant rho must be > 0, got {rho}")),
            Self::Linear { a, b } if !(a.is_finite() && b.is_finite() && *a >= 0.0) => {
                return bad(format!("linear needs finite a >= 0 and finite b, got a={a}, b={b}"))
            }
            Self::Saturating { rho0, rho_star, rate } => {
                if !(finite_pos(*rho0) && finite_pos(*rho_star) && rho0 <= rho_star && finite_pos(*rate)) {
                    return bad(format!(
                        "saturating needs 0 < rho0 <= rho_star and rate > 0, got {rho0},{rho_star},{rate}"
                    ));
                }
            }
            Self::Table { values } => {
                if values.is_empty() {
                    return bad("table is empty".into());
                }
                if let Some(v) = values.iter().find(|v| !finite_pos(**v)) {
                    return bad(format!("table entry {v} is not positive"));
                }
                if values.windows(2).any(|w| w[1] < w[0]) {
                    return bad("table must be nondecreasing".into());
                }
            }
            _ => {}
        }
        Ok(self)
    }

    /// `ρ(k)` for `k ≥ 1`. `k = 0` is treated as `k = 1`.
    pub fn eval(&self, k: usize) -> f64 {
        let k = k.max(1);
        match self {
            Self::Constant { rho } => *rho,
            Self::Linear { a, b } => (a * k as f64 + b).max(RHO_FLOOR),
            Self::Saturating { rho0, rho_star, rate } => rho_star - (rho_star - rho0) * (-rate * k as f64).exp(),
            Self::Table { values } => values[(k - 1).min(values.len() - 1)],
        }
    }

    /// `lim ρ(k)`, or `None` when the schedule is unbounded.
    pub fn limit(&self) -> Option<f64> {
        match self {
            Self::Constant { rho } => Some(*rho),
            Self::Linear { a, b } => (*a == 0.0).then(|| b.max(RHO_FLOOR)),
            Self::Saturating { rho_star, .. } => Some(*rho_star),
            Self::Table { values } => values.last().copied(),
        }
    }

    pub fn is_unbounded(&self) -> bool {
        self.limit().is_none()
    }
}

impl FromStr for PressureSchedule {
    type Err = DynamicsError;

    /// `constant:<rho>` | `linear:<a>,<b>` | `saturating:<rho0>,<rho_star>,<rate>` |
    /// `table:<v1>,<v2>,...`
    fn from_str(spec: &str) -> Result<Self, Self::Err> {
        let bad = |msg: &str| DynamicsError::InvalidSchedule(format!("`{spec}`: {msg}"));
        let (family, args) = spec.trim().split_once(':').ok_or_else(|| bad("missing `family:` prefix"))?;
        let values = args
            .split(',')
            .map(|v| v.trim().parse::<f64>().map_err(|_| bad(&format!("`{v}` is not a number"))))
            .collect::<Result<Vec<_>, _>>()?;
        let arity = |n: usize| {
            if values.len() == n {
                Ok(())
            } else {
                Err(bad(&format!("expected {n} parameter(s), got {}", values.len())))
            }
        };
        match family.trim() {
            "constant" => {
                arity(1)?;
                Self::constant(values[0])
            }
            "linear" => {
                arity(2)?;
                Self::linear(values[0], values[1])
            }
            "saturating" => {
                arity(3)?;
                Self::saturating(values[0], values[1], values[2])
            }
            "table" => Self::table(values),
            other => Err(bad(&format!("unknown family `{other}`"))),
        }
    }
}

impl fmt::Display for PressureSchedule {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Self::Constant { rho } => write!(f, "constant:{rho}"),
            Self::Linear { a, b } => write!(f, "linear:{a},{b}"),
            Self::Saturating { rho0, rho_star, rate } => write!(f, "saturating:{rho0},{rho_star},{rate}"),
            Self::Table { values } => {
                let parts: Vec<String> = values.iter().map(|v| v.to_string()).collect();
                write!(f, "table:{}", parts.join(","))
            }
        }
    }
}

/// One synchronous best-response step.
///
/// The result lies in `[0,1]ⁿ` without clamping whenever `x_prev` and `x⁺` do:
/// the numerator sums the same terms as the denominator, each scaled by a value
/// at most one, and IEEE rounding is monotone.
pub fn step(g: &WeightedGraph, p: &AgentProfile, rho: f64, x_prev: &[f64]) -> Vec<f64> {
    let s = p.stubbornness();
    let x_plus = p.x_plus();
    let degrees = g.degrees();
    (0..g.n())
        .map(|i| {
            let pull: f64 = g.neighbors(i).iter().map(|&(j, w)| w * x_prev[j]).sum();
            (s[i] * x_plus[i] + rho * pull) / (s[i] + rho * degrees[i])
        })
        .collect()
}

/// The same step in matrix form, `(S + ρD)⁻¹(Sx⁺ + ρAx)`, for cross-checking.
pub fn step_dense(m: &GraphMatrices, p: &AgentProfile, rho: f64, x_prev: &[f64]) -> Vec<f64> {
    let ax = m.adjacency.mul_vec(x_prev);
    let d = m.degree.diagonal();
    (0..m.n())
        .map(|i| {
            let s = p.stubbornness()[i];
            (s * p.x_plus()[i] + rho * ax[i]) / (s + rho * d[i])
        })
        .collect()
}

/// `ρ(S + ρD)⁻¹A`, the linear part of the step map.
pub fn step_operator(m: &GraphMatrices, p: &AgentProfile, rho: f64) -> Matrix {
    let d = m.degree.diagonal();
    let left: Vec<f64> = p.stubbornness().iter().zip(&d).map(|(s, d)| rho / (s + rho * d)).collect();
    m.adjacency.scale_rows_cols(&left, &vec![1.0; m.n()])
}

/// Contraction factor of the step map at pressure `rho`.
///
/// The step operator `M = ρW⁻¹A` with `W = S + ρD` is self-adjoint in the
/// `W`-weighted inner product, so its induced operator norm equals the
/// spectral norm of `W^{-1/2} ρA W^{-1/2}`, which is also its spectral radius.
/// The plain Euclidean norm of `M` can exceed one on irregular graphs even
/// though `M` is convergent; see [`euclidean_step_norm`].
pub fn contraction_factor(m: &GraphMatrices, p: &AgentProfile, rho: f64) -> Result<f64, NumericsError> {
    let d = m.degree.diagonal();
    let inv_sqrt_w: Vec<f64> = p.stubbornness().iter().zip(&d).map(|(s, d)| 1.0 / (s + rho * d).sqrt()).collect();
    let sym = m.adjacency.scale(rho).scale_rows_cols(&inv_sqrt_w, &inv_sqrt_w);
    numerics::operator_norm(&sym)
}

/// Euclidean spectral norm of `ρ(S + ρD)⁻¹A`.
pub fn euclidean_step_norm(m: &GraphMatrices, p: &AgentProfile, rho: f64) -> Result<f64, NumericsError> {
    numerics::operator_norm(&step_operator(m, p, rho))
}

/// `(S + ρL)`
pub fn stress_matrix(m: &GraphMatrices, p: &AgentProfile, rho: f64) -> SymMatrix {
    let s = Matrix::from_diagonal(p.stubbornness());
    SymMatrix::new(s.add_scaled(rho, &m.laplacian)).expect("square")
}

/// Fixed point of the step map at pressure `rho`: `(S + ρL)⁻¹ S x⁺`.
pub fn fixed_point_at(g: &WeightedGraph, p: &AgentProfile, rho: f64) -> Result<Vec<f64>, DynamicsError> {
    p.check_graph(g.n())?;
    if !(rho > 0.0) {
        return Err(DynamicsError::NonPositivePressure(rho));
    }
    let m = g.matrices();
    Ok(numerics::solve_spd(&stress_matrix(&m, p, rho), &p.weighted_preferences())?)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum LimitKind {
    Consensus,
    Distribution,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LimitPoint {
    pub value: Vec<f64>,
    pub kind: LimitKind,
}

/// Limit under unbounded pressure: every entry is `Σ s_i x⁺_i / Σ s_i`.
pub fn consensus_limit(p: &AgentProfile) -> LimitPoint {
    let total: f64 = p.stubbornness().iter().sum();
    let c = p.weighted_preferences().iter().sum::<f64>() / total;
    LimitPoint { value: vec![c; p.n()], kind: LimitKind::Consensus }
}

/// Limit under pressure increasing to `rho_star`.
pub fn bounded_limit(g: &WeightedGraph, p: &AgentProfile, rho_star: f64) -> Result<LimitPoint, DynamicsError> {
    Ok(LimitPoint { value: fixed_point_at(g, p, rho_star)?, kind: LimitKind::Distribution })
}

/// The theoretical limit for a schedule: consensus when unbounded, otherwise
/// the fixed point at `lim ρ`.
pub fn schedule_limit(
    g: &WeightedGraph,
    p: &AgentProfile,
    sch: &PressureSchedule,
) -> Result<LimitPoint, DynamicsError> {
    match sch.limit() {
        None => Ok(consensus_limit(p)),
        Some(rho_star) => bounded_limit(g, p, rho_star),
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "reason", rename_all = "snake_case")]
pub enum StopReason {
    /// `‖x^(k) − x^(k−1)‖∞ < stop_tol`
    Converged {
        step_diff: f64,
    },
    MaxSteps {
        step_diff: f64,
    },
}

#[derive(Debug, Clone, PartialEq)]
pub struct Trajectory {
    /// `states[k]` is `x^(k)`; `states[0]` is the initial state.
    pub states: Vec<Vec<f64>>,
    pub schedule: PressureSchedule,
    pub profile: AgentProfile,
    pub graph_id: u64,
    pub stop: StopReason,
}

impl Trajectory {
    pub fn final_state(&self) -> &[f64] {
        self.states.last().expect("trajectory has at least x^(0)")
    }

    /// Number of steps taken.
    pub fn steps(&self) -> usize {
        self.states.len() - 1
    }

    /// Count of stored opinions outside `[0,1]`.
    pub fn out_of_box_count(&self) -> usize {
        self.states.iter().flatten().filter(|v| !(0.0..=1.0).contains(*v)).count()
    }
}

pub fn check_state(x: &[f64], n: usize) -> Result<(), DynamicsError> {
    if x.len() != n {
        return Err(DynamicsError::DimensionMismatch { expected: n, got: x.len() });
    }
    match x.iter().enumerate().find(|(_, v)| !(0.0..=1.0).contains(*v)) {
        Some((agent, &value)) => Err(DynamicsError::OutOfRange { agent, value }),
        None => Ok(()),
    }
}

/// Iterates the step map with `ρ = sch.eval(k)` for `k = 1, 2, …` up to
/// `k_max`, stopping early once the sup-norm step difference drops below
/// `stop_tol`.
pub fn simulate(
    g: &WeightedGraph,
    p: &AgentProfile,
    sch: &PressureSchedule,
    x0: &[f64],
    k_max: usize,
    stop_tol: f64,
) -> Result<Trajectory, DynamicsError> {
    p.check_graph(g.n())?;
    check_state(x0, g.n())?;
    let mut states = Vec::with_capacity(k_max.min(1 << 16) + 1);
    states.push(x0.to_vec());
    let mut step_diff = f64::INFINITY;
    let mut converged = false;
    for k in 1..=k_max {
        let prev = states.last().expect("nonempty");
        let next = step(g, p, sch.eval(k), prev);
        step_diff = numerics::norm_inf(&numerics::sub(&next, prev));
        states.push(next);
        if step_diff < stop_tol {
            converged = true;
            break;
        }
    }
    let stop = if converged { StopReason::Converged { step_diff } } else { StopReason::MaxSteps { step_diff } };
    Ok(Trajectory { states, schedule: sch.clone(), profile: p.clone(), graph_id: g.fingerprint(), stop })
}

/// Runs the step map without recording intermediate states, returning `x^(k)`
/// for each requested step in `checkpoints` (ascending).
pub fn evolve_to(
    g: &WeightedGraph,
    p: &AgentProfile,
    rho_at: impl Fn(usize) -> f64,
    x0: &[f64],
    checkpoints: &[usize],
) -> Vec<Vec<f64>> {
    let mut x = x0.to_vec();
    let mut k = 0;
    let mut out = Vec::with_capacity(checkpoints.len());
    for &target in checkpoints {
        while k < target {
            k += 1;
            x = step(g, p, rho_at(k), &x);
        }
        out.push(x.clone());
    }
    out
}

/// Reads the `id,x_plus,s` agent-profile CSV. Ids must cover `0..n` exactly once,
/// in any order.
pub fn read_profile(path: impl AsRef<Path>) -> Result<AgentProfile, DynamicsError> {
    parse_profile(std::io::BufReader::new(std::fs::File::open(path)?))
}

pub fn parse_profile(reader: impl BufRead) -> Result<AgentProfile, DynamicsError> {
    let mut rows: Vec<(usize, f64, f64)> = Vec::new();
    let mut header_seen = false;
    for (idx, line) in reader.lines().enumerate() {
        let line = line?;
        let lineno = idx + 1;
        let t = line.trim();
        if t.is_empty() {
            continue;
        }
        let fields: Vec<&str> = t.split(',').map(str::trim).collect();
        if !header_seen {
            if fields != ["id", "x_plus", "s"] {
                return Err(DynamicsError::Parse {
                    line: lineno,
                    msg: format!("expected header `id,x_plus,s`, got `{t}`"),
                });
            }
            header_seen = true;
            continue;
        }
        if fields.len() != 3 {
            return Err(DynamicsError::Parse { line: lineno, msg: format!("expected 3 fields, got {}", fields.len()) });
        }
        let err = |what: &str, v: &str| DynamicsError::Parse { line: lineno, msg: format!("bad {what} `{v}`") };
        let id = fields[0].parse::<usize>().map_err(|_| err("id", fields[0]))?;
        let x = fields[1].parse::<f64>().map_err(|_| err("x_plus", fields[1]))?;
        let s = fields[2].parse::<f64>().map_err(|_| err("s", fields[2]))?;
        rows.push((id, x, s));
    }
    if !header_seen {
        return Err(DynamicsError::Parse { line: 1, msg: "empty file".into() });
    }
    let n = rows.len();
    let mut x_plus = vec![f64::NAN; n];
    let mut s = vec![f64::NAN; n];
    let mut seen = vec![false; n];
    for (line_offset, &(id, x, si)) in rows.iter().enumerate() {
        if id >= n || seen[id] {
            return Err(DynamicsError::Parse {
                line: line_offset + 2,
                msg: format!("id {id} is out of range or repeated (ids must be 0..{n} exactly once)"),
            });
        }
        seen[id] = true;
        x_plus[id] = x;
        s[id] = si;
    }
    AgentProfile::new(x_plus, s)
}

pub fn write_profile(p: &AgentProfile, path: impl AsRef<Path>) -> Result<(), DynamicsError> {
    let mut out = std::io::BufWriter::new(std::fs::File::create(path)?);
    format_profile(p, &mut out)?;
    out.flush()?;
    Ok(())
}

pub fn format_profile(p: &AgentProfile, out: &mut impl Write) -> std::io::Result<()> {
    writeln!(out, "id,x_plus,s")?;
    for i in 0..p.n() {
        writeln!(out, "{},{},{}", i, p.x_plus[i], p.s[i])?;
    }
    Ok(())
}
