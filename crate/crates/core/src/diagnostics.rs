//! Numerical checks of the analytical claims on concrete instances.
//!
//! Two quadratic functions show up here and they are easy to mix up:
//!
//! - the *social utility* `U^(k)(x) = Σ_i J_i(x_i, x, k)`, the plain sum of
//!   every agent's stress at a common state. Each edge appears twice in the
//!   double sum, so `U^(k)(x) = (x − x⁺)ᵀS(x − x⁺) + 2ρ xᵀLx`.
//! - the *potential* `Φ^(k)(x) = (x − x⁺)ᵀS(x − x⁺) + ρ xᵀLx`, with each edge
//!   counted once. Its stationary point is the fixed point `(S + ρL)⁻¹Sx⁺`
//!   and the update rule is exactly `x − H∇Φ(x)` with `H = ½ diag(α)`.
//!
//! Utilities and the price of anarchy use `U`; the gradient-step identity uses
//! `Φ`. [`GradientCheck::social_residual`] reports how far the step is from
//! `x − H∇U(x)` for comparison.

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::dynamics::{self, AgentProfile, DynamicsError, PressureSchedule, Trajectory};
use crate::graph::WeightedGraph;
use crate::numerics::{self, norm2, norm_inf, sub};

/// Denominators below this end the ratio series.
pub const RATIO_DENOMINATOR_FLOOR: f64 = 1e-13;
/// Central-difference step for gradient cross-checks.
pub const FD_STEP: f64 = 1e-6;

#[derive(Debug, Error)]
pub enum DiagnosticsError {
    #[error("degenerate trajectory: {0}")]
    DegenerateTrajectory(String),
    #[error("trajectory inconsistent with graph/profile/schedule: {0}")]
    Inconsistent(String),
    #[error(transparent)]
    Dynamics(#[from] DynamicsError),
}

/// Stress of agent `i` disclosing `x_i` against the previous state `x_prev`.
pub fn social_stress(g: &WeightedGraph, p: &AgentProfile, rho: f64, i: usize, x_i: f64, x_prev: &[f64]) -> f64 {
    let own = p.stubbornness()[i] * (x_i - p.x_plus()[i]).powi(2);
    let peers: f64 = g.neighbors(i).iter().map(|&(j, w)| w * (x_i - x_prev[j]).powi(2)).sum();
    own + rho * peers
}

/// `U^(k)(x)` as the literal sum of stresses.
pub fn utility_stress_sum(g: &WeightedGraph, p: &AgentProfile, rho: f64, x: &[f64]) -> f64 {
    (0..g.n()).map(|i| social_stress(g, p, rho, i, x[i], x)).sum()
}

/// `U^(k)(x) = xᵀ(S + 2ρL)x − 2xᵀSx⁺ + x⁺ᵀSx⁺`
pub fn utility_quadratic(g: &WeightedGraph, p: &AgentProfile, rho: f64, x: &[f64]) -> f64 {
    let s = p.stubbornness();
    let xp = p.x_plus();
    let sxx: f64 = (0..x.len()).map(|i| s[i] * x[i] * x[i]).sum();
    let sxxp: f64 = (0..x.len()).map(|i| s[i] * x[i] * xp[i]).sum();
    let sxpxp: f64 = (0..x.len()).map(|i| s[i] * xp[i] * xp[i]).sum();
    sxx + 2.0 * rho * g.laplacian_form(x) - 2.0 * sxxp + sxpxp
}

/// `∇U^(k)(x) = 2S(x − x⁺) + 4ρLx`
pub fn utility_gradient(g: &WeightedGraph, p: &AgentProfile, rho: f64, x: &[f64]) -> Vec<f64> {
    gradient_with_pair_factor(g, p, rho, x, 4.0)
}

/// `Φ^(k)(x) = (x − x⁺)ᵀS(x − x⁺) + ρ xᵀLx`
pub fn potential(g: &WeightedGraph, p: &AgentProfile, rho: f64, x: &[f64]) -> f64 {
    let own: f64 = (0..x.len()).map(|i| p.stubbornness()[i] * (x[i] - p.x_plus()[i]).powi(2)).sum();
    own + rho * g.laplacian_form(x)
}

/// `∇Φ^(k)(x) = 2S(x − x⁺) + 2ρLx`
pub fn potential_gradient(g: &WeightedGraph, p: &AgentProfile, rho: f64, x: &[f64]) -> Vec<f64> {
    gradient_with_pair_factor(g, p, rho, x, 2.0)
}

fn gradient_with_pair_factor(g: &WeightedGraph, p: &AgentProfile, rho: f64, x: &[f64], factor: f64) -> Vec<f64> {
    let lx = g.laplacian_mul(x);
    (0..x.len()).map(|i| 2.0 * p.stubbornness()[i] * (x[i] - p.x_plus()[i]) + factor * rho * lx[i]).collect()
}

/// Limiting utility `lim U^(k)/ρ^(k) = 2xᵀLx`.
pub fn limiting_utility(g: &WeightedGraph, x: &[f64]) -> f64 {
    2.0 * g.laplacian_form(x)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct UtilityReport {
    /// `U^(k)(x)` at the supplied ρ.
    pub u_k: f64,
    /// Total utility `lim U^(k)(x)`: the quadratic at ρ* for bounded
    /// schedules; for unbounded schedules finite only at consensus states.
    pub u_total: Option<f64>,
    /// `2xᵀLx`
    pub u_limit: f64,
}

/// Social utility at `x` and pressure `rho`. `u_total` is left empty; see
/// [`utility_report`] for the schedule-aware version.
pub fn global_utility(g: &WeightedGraph, p: &AgentProfile, rho: f64, x: &[f64]) -> UtilityReport {
    UtilityReport { u_k: utility_quadratic(g, p, rho, x), u_total: None, u_limit: limiting_utility(g, x) }
}

pub fn utility_report(
    g: &WeightedGraph,
    p: &AgentProfile,
    sch: &PressureSchedule,
    k: usize,
    x: &[f64],
) -> UtilityReport {
    let mut report = global_utility(g, p, sch.eval(k), x);
    report.u_total = total_utility(g, p, sch, x);
    report
}

/// Relative tolerance under which `xᵀLx` counts as zero for consensus states.
const CONSENSUS_FORM_TOL: f64 = 1e-24;

/// `U_T(x) = lim_k U^(k)(x)`. `None` stands for +∞.
pub fn total_utility(g: &WeightedGraph, p: &AgentProfile, sch: &PressureSchedule, x: &[f64]) -> Option<f64> {
    match sch.limit() {
        Some(rho_star) => Some(utility_quadratic(g, p, rho_star, x)),
        None if g.laplacian_form(x) <= CONSENSUS_FORM_TOL * (1.0 + norm2(x).powi(2)) => {
            Some(utility_quadratic(g, p, 0.0, x))
        }
        None => None,
    }
}

/// Pieces of the update written as a preconditioned gradient step.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StepDecomposition {
    /// `α_i = 1/(s_i + ρ d_i)`
    pub alpha: Vec<f64>,
    /// Diagonal of `H = ½ diag(α)`.
    pub h_diag: Vec<f64>,
    /// `∇Φ^(k)(x_prev)`
    pub grad_u: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GradientCheck {
    pub decomposition: StepDecomposition,
    /// `‖step(x_prev) − (x_prev − H∇Φ(x_prev))‖∞`
    pub residual: f64,
    /// `‖∇Φ − central differences of Φ‖∞`
    pub fd_error: f64,
    /// `‖step(x_prev) − (x_prev − H∇U(x_prev))‖∞` with the double-counted
    /// social utility; nonzero away from consensus.
    pub social_residual: f64,
}

pub fn step_decomposition(g: &WeightedGraph, p: &AgentProfile, rho: f64, x_prev: &[f64]) -> StepDecomposition {
    let alpha: Vec<f64> = p.stubbornness().iter().zip(g.degrees()).map(|(s, d)| 1.0 / (s + rho * d)).collect();
    let h_diag = alpha.iter().map(|a| 0.5 * a).collect();
    StepDecomposition { alpha, h_diag, grad_u: potential_gradient(g, p, rho, x_prev) }
}

pub fn gradient_identity_check(g: &WeightedGraph, p: &AgentProfile, rho: f64, x_prev: &[f64]) -> GradientCheck {
    let decomposition = step_decomposition(g, p, rho, x_prev);
    let next = dynamics::step(g, p, rho, x_prev);
    let descend = |grad: &[f64]| -> Vec<f64> {
        x_prev.iter().zip(&decomposition.h_diag).zip(grad).map(|((x, h), gr)| x - h * gr).collect()
    };
    let residual = norm_inf(&sub(&next, &descend(&decomposition.grad_u)));
    let social_residual = norm_inf(&sub(&next, &descend(&utility_gradient(g, p, rho, x_prev))));
    let fd = central_difference(|x| potential(g, p, rho, x), x_prev, FD_STEP);
    let fd_error = norm_inf(&sub(&fd, &decomposition.grad_u));
    GradientCheck { decomposition, residual, fd_error, social_residual }
}

/// Central-difference gradient of `f` at `x`.
pub fn central_difference(f: impl Fn(&[f64]) -> f64, x: &[f64], h: f64) -> Vec<f64> {
    let mut probe = x.to_vec();
    (0..x.len())
        .map(|i| {
            probe[i] = x[i] + h;
            let up = f(&probe);
            probe[i] = x[i] - h;
            let down = f(&probe);
            probe[i] = x[i];
            (up - down) / (2.0 * h)
        })
        .collect()
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RateSeries {
    /// `‖x^(k+1) − x*‖ / ‖x^(k) − x*‖` for `k = 0, 1, …`
    pub ratios: Vec<f64>,
}

/// Euclidean error ratios of successive states against `x_star`. The series
/// stops at the first state whose error falls below
/// [`RATIO_DENOMINATOR_FLOOR`].
pub fn convergence_ratio_series(states: &[Vec<f64>], x_star: &[f64]) -> Result<RateSeries, DiagnosticsError> {
    if states.len() < 3 {
        return Err(DiagnosticsError::DegenerateTrajectory(format!("{} states, need at least 3", states.len())));
    }
    let errors: Vec<f64> = states.iter().map(|x| norm2(&sub(x, x_star))).collect();
    let ratios: Vec<f64> =
        errors.windows(2).take_while(|w| w[0] >= RATIO_DENOMINATOR_FLOOR).map(|w| w[1] / w[0]).collect();
    if ratios.len() < 2 {
        return Err(DiagnosticsError::DegenerateTrajectory(format!(
            "only {} ratio(s) before the error vanished",
            ratios.len()
        )));
    }
    Ok(RateSeries { ratios })
}

/// Ratio of total utility at the decentralized limit to its minimum.
///
/// Unbounded schedules return exactly 1. For a bounded schedule with limit ρ*
/// the decentralized limit is `(S + ρ*L)⁻¹Sx⁺` and the minimizer of the
/// quadratic `U_T` solves `(S + 2ρ*L)x = Sx⁺`.
pub fn price_of_anarchy(g: &WeightedGraph, p: &AgentProfile, sch: &PressureSchedule) -> Result<f64, DynamicsError> {
    let Some(rho_star) = sch.limit() else {
        return Ok(1.0);
    };
    let (nash, opt) = anarchy_points(g, p, rho_star)?;
    let u_nash = utility_quadratic(g, p, rho_star, &nash);
    let u_opt = utility_quadratic(g, p, rho_star, &opt);
    let scale = p.weighted_preferences().iter().map(|v| v.abs()).sum::<f64>().max(1.0);
    if u_opt <= 1e-14 * scale {
        // x⁺ already at consensus: both points coincide with it
        return Ok(1.0);
    }
    Ok(u_nash / u_opt)
}

/// `(x_nash, x_opt)` at limit pressure `rho_star`.
pub fn anarchy_points(
    g: &WeightedGraph,
    p: &AgentProfile,
    rho_star: f64,
) -> Result<(Vec<f64>, Vec<f64>), DynamicsError> {
    let nash = dynamics::fixed_point_at(g, p, rho_star)?;
    // (S + 2ρ*L) is the stress matrix at twice the pressure
    let opt = dynamics::fixed_point_at(g, p, 2.0 * rho_star)?;
    Ok((nash, opt))
}

/// Serialized diagnostics bundle.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DiagnosticReport {
    pub u_k: f64,
    pub u_total: Option<f64>,
    pub u_limit: f64,
    pub residuals: Residuals,
    pub ratios: Vec<f64>,
    pub poa: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Residuals {
    /// Max gradient-identity residual over all recorded steps.
    pub gradient: f64,
    /// `‖F(x̄) − x̄‖∞` at the limiting (or final) pressure.
    pub fixed_point: f64,
    /// Max `‖x^(k) − F_k(x^(k−1))‖∞`: how well the states replay.
    pub replay: f64,
    /// Max central-difference gradient error over the first, middle and last
    /// steps.
    pub gradient_fd: f64,
}

/// Replay tolerance above which a trajectory is rejected as inconsistent.
pub const REPLAY_TOL: f64 = 1e-9;

/// Full diagnostics for a trajectory. `x*` is the schedule's theoretical limit.
pub fn diagnose(g: &WeightedGraph, traj: &Trajectory) -> Result<DiagnosticReport, DiagnosticsError> {
    let p = &traj.profile;
    let sch = &traj.schedule;
    if p.n() != g.n() || traj.states.iter().any(|x| x.len() != g.n()) {
        return Err(DiagnosticsError::Inconsistent("state length differs from graph size".into()));
    }
    let mut gradient = 0.0f64;
    let mut gradient_fd = 0.0f64;
    let mut replay = 0.0f64;
    let steps = traj.steps();
    // finite differences cost n potential evaluations each; sample a few steps
    let fd_samples = [0, steps / 2, steps.saturating_sub(1)];
    for (k, w) in traj.states.windows(2).enumerate() {
        let rho = sch.eval(k + 1);
        let next = dynamics::step(g, p, rho, &w[0]);
        replay = replay.max(norm_inf(&sub(&w[1], &next)));
        if fd_samples.contains(&k) {
            let check = gradient_identity_check(g, p, rho, &w[0]);
            gradient = gradient.max(check.residual);
            gradient_fd = gradient_fd.max(check.fd_error);
        } else {
            let dec = step_decomposition(g, p, rho, &w[0]);
            let predicted: Vec<f64> =
                w[0].iter().zip(&dec.h_diag).zip(&dec.grad_u).map(|((x, h), gr)| x - h * gr).collect();
            gradient = gradient.max(norm_inf(&sub(&next, &predicted)));
        }
    }
    if replay > REPLAY_TOL {
        return Err(DiagnosticsError::Inconsistent(format!("states do not replay (max deviation {replay:e})")));
    }
    let limit = dynamics::schedule_limit(g, p, sch)?;
    let rate = convergence_ratio_series(&traj.states, &limit.value)?;
    let rho_fp = sch.limit().unwrap_or_else(|| sch.eval(traj.steps()));
    let fp = dynamics::fixed_point_at(g, p, rho_fp)?;
    let fixed_point = norm_inf(&sub(&dynamics::step(g, p, rho_fp, &fp), &fp));
    let utility = utility_report(g, p, sch, traj.steps(), traj.final_state());
    Ok(DiagnosticReport {
        u_k: utility.u_k,
        u_total: utility.u_total,
        u_limit: utility.u_limit,
        residuals: Residuals { gradient, fixed_point, replay, gradient_fd },
        ratios: rate.ratios,
        poa: price_of_anarchy(g, p, sch)?,
    })
}

/// Smallest value of `U_T` over a uniform grid on `[0,1]ⁿ` with `steps + 1`
/// points per axis. Exponential in `n`; intended for tiny instances.
pub fn grid_minimum(g: &WeightedGraph, p: &AgentProfile, rho_star: f64, steps: usize) -> (Vec<f64>, f64) {
    let n = g.n();
    let mut idx = vec![0usize; n];
    let mut best = (vec![0.0; n], f64::INFINITY);
    loop {
        let x: Vec<f64> = idx.iter().map(|&i| i as f64 / steps as f64).collect();
        let u = utility_quadratic(g, p, rho_star, &x);
        if u < best.1 {
            best = (x, u);
        }
        let mut pos = 0;
        loop {
            if pos == n {
                return best;
            }
            idx[pos] += 1;
            if idx[pos] <= steps {
                break;
            }
            idx[pos] = 0;
            pos += 1;
        }
    }
}

/// `dᵀ∇Φ` for the step direction `d = −H∇Φ`; never positive.
pub fn descent_slope(check: &GradientCheck) -> f64 {
    let d: Vec<f64> =
        check.decomposition.h_diag.iter().zip(&check.decomposition.grad_u).map(|(h, gr)| -h * gr).collect();
    numerics::dot(&d, &check.decomposition.grad_u)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::dynamics::{consensus_limit, fixed_point_at, simulate, step};
    use crate::graph::generate_random_connected;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn two_node() -> (WeightedGraph, AgentProfile) {
        let g = WeightedGraph::new(2, &[(0, 1, 1.0)]).unwrap();
        (g, AgentProfile::new(vec![0.0, 1.0], vec![1.0, 1.0]).unwrap())
    }

    fn random_instance(seed: u64, n: usize) -> (WeightedGraph, AgentProfile, Vec<f64>) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let g = generate_random_connected(n, 0.3, 2.0, seed).unwrap();
        let xp: Vec<f64> = (0..n).map(|_| rng.gen()).collect();
        let mut s: Vec<f64> = (0..n).map(|_| if rng.gen_bool(0.1) { 0.0 } else { rng.gen() }).collect();
        s[n - 1] += 0.05;
        let x: Vec<f64> = (0..n).map(|_| rng.gen()).collect();
        (g, AgentProfile::new(xp, s).unwrap(), x)
    }

    #[test]
    fn stress_hand_value() {
        let g = WeightedGraph::new(2, &[(0, 1, 1.0)]).unwrap();
        let p = AgentProfile::new(vec![0.4, 0.0], vec![2.0, 1.0]).unwrap();
        let j = social_stress(&g, &p, 3.0, 0, 0.6, &[0.0, 0.5]);
        assert!((j - 0.11).abs() < 1e-12);
        let p = AgentProfile::new(vec![0.6, 0.6], vec![2.0, 1.0]).unwrap();
        assert_eq!(social_stress(&g, &p, 3.0, 0, 0.6, &[0.6, 0.6]), 0.0);
    }

    #[test]
    fn step_minimizes_own_stress_on_grid() {
        let (g, p, x) = random_instance(21, 8);
        let rho = 1.7;
        let next = step(&g, &p, rho, &x);
        for (i, &stepped) in next.iter().enumerate() {
            let grid_step = 1e-4;
            let (mut arg, mut best) = (0.0, f64::INFINITY);
            for t in 0..=10_000 {
                let xi = t as f64 * grid_step;
                let j = social_stress(&g, &p, rho, i, xi, &x);
                if j < best {
                    best = j;
                    arg = xi;
                }
            }
            assert!((arg - stepped).abs() <= grid_step, "agent {i}: grid {arg} vs step {stepped}");
        }
    }

    #[test]
    fn utility_examples() {
        let (g, p) = two_node();
        let u = global_utility(&g, &p, 7.0, &[0.5, 0.5]);
        assert!((u.u_k - 0.5).abs() < 1e-15);
        assert_eq!(u.u_limit, 0.0);
        let flat = AgentProfile::new(vec![0.3, 0.3], vec![1.0, 2.0]).unwrap();
        assert_eq!(global_utility(&g, &flat, 5.0, &[0.3, 0.3]).u_k, 0.0);
    }

    #[test]
    fn total_utility_cases() {
        let (g, p) = two_node();
        let unbounded = PressureSchedule::linear(1.0, 0.0).unwrap();
        assert_eq!(total_utility(&g, &p, &unbounded, &[0.5, 0.5]), Some(0.5));
        assert_eq!(total_utility(&g, &p, &unbounded, &[0.4, 0.5]), None);
        let bounded = PressureSchedule::constant(1.0).unwrap();
        let u = total_utility(&g, &p, &bounded, &[0.4, 0.6]).unwrap();
        assert!((u - 0.4).abs() < 1e-15);
    }

    #[test]
    fn identity_at_fixed_point_is_stationary() {
        let (g, p, _) = random_instance(5, 12);
        let rho = 2.5;
        let fp = fixed_point_at(&g, &p, rho).unwrap();
        let check = gradient_identity_check(&g, &p, rho, &fp);
        let step_vec: Vec<f64> =
            check.decomposition.h_diag.iter().zip(&check.decomposition.grad_u).map(|(h, gr)| h * gr).collect();
        assert!(norm_inf(&step_vec) < 1e-9);
        assert!(check.residual < 1e-9);
    }

    #[test]
    fn double_counted_gradient_misses_the_step() {
        let (g, p) = two_node();
        let check = gradient_identity_check(&g, &p, 1.0, &[0.0, 1.0]);
        assert!(check.residual < 1e-15);
        // x − H∇U overshoots to (1, 0) instead of (0.5, 0.5)
        assert!((check.social_residual - 0.5).abs() < 1e-15);
    }

    #[test]
    fn rate_series_errors() {
        let (g, p) = two_node();
        let fp = fixed_point_at(&g, &p, 1.0).unwrap();
        let states = vec![fp.clone(), fp.clone(), fp.clone()];
        assert!(matches!(convergence_ratio_series(&states, &fp), Err(DiagnosticsError::DegenerateTrajectory(_))));
        assert!(matches!(convergence_ratio_series(&states[..2], &fp), Err(DiagnosticsError::DegenerateTrajectory(_))));
    }

    #[test]
    fn constant_pressure_ratios_settle_below_one() {
        let (g, p, x0) = random_instance(13, 10);
        let rho = 2.0;
        let sch = PressureSchedule::constant(rho).unwrap();
        let t = simulate(&g, &p, &sch, &x0, 400, 1e-9).unwrap();
        let fp = fixed_point_at(&g, &p, rho).unwrap();
        let series = convergence_ratio_series(&t.states, &fp).unwrap();
        let bound = crate::dynamics::contraction_factor(&g.matrices(), &p, rho).unwrap();
        let tail = &series.ratios[series.ratios.len() - 20..];
        // asymptotically the ratio approaches the dominant eigenvalue modulus
        for r in tail {
            assert!(*r < 1.0);
            assert!((r - bound).abs() < 1e-3, "ratio {r} vs contraction factor {bound}");
        }
    }

    #[test]
    fn poa_cases() {
        let (g, p) = two_node();
        assert_eq!(price_of_anarchy(&g, &p, &PressureSchedule::linear(1.0, 0.0).unwrap()).unwrap(), 1.0);
        let flat = AgentProfile::new(vec![0.7, 0.7], vec![1.0, 3.0]).unwrap();
        assert_eq!(price_of_anarchy(&g, &flat, &PressureSchedule::constant(2.0).unwrap()).unwrap(), 1.0);
        let (nash, opt) = anarchy_points(&g, &p, 1.0).unwrap();
        assert!((nash[0] - 1.0 / 3.0).abs() < 1e-12 && (opt[0] - 0.4).abs() < 1e-12 && (opt[1] - 0.6).abs() < 1e-12);
        // U_T(nash) = 4/9, U_T(opt) = 2/5
        let poa = price_of_anarchy(&g, &p, &PressureSchedule::constant(1.0).unwrap()).unwrap();
        assert!((poa - 10.0 / 9.0).abs() < 1e-12);
    }

    #[test]
    fn grid_minimum_two_node() {
        let (g, p) = two_node();
        let (x, u) = grid_minimum(&g, &p, 1.0, 1000);
        assert!((x[0] - 0.4).abs() < 1e-9 && (x[1] - 0.6).abs() < 1e-9);
        assert!((u - 0.4).abs() < 1e-12);
    }

    #[test]
    fn diagnose_bundle_serializes() {
        let (g, p, x0) = random_instance(2, 8);
        let sch = PressureSchedule::linear(1.0, 0.0).unwrap();
        let t = simulate(&g, &p, &sch, &x0, 300, 0.0).unwrap();
        let report = diagnose(&g, &t).unwrap();
        assert!(report.residuals.gradient < 1e-9);
        assert!(report.residuals.replay == 0.0);
        assert_eq!(report.poa, 1.0);
        let json = serde_json::to_value(&report).unwrap();
        for key in ["u_k", "u_total", "u_limit", "residuals", "ratios", "poa"] {
            assert!(json.get(key).is_some(), "{key}");
        }
        assert!(json["residuals"].get("gradient").is_some() && json["residuals"].get("fixed_point").is_some());
        let mut bad = t.clone();
        bad.states[5][0] = (bad.states[5][0] + 0.1).min(1.0) - 0.05;
        assert!(matches!(diagnose(&g, &bad), Err(DiagnosticsError::Inconsistent(_))));
        let _ = consensus_limit(&p);
    }

    proptest::proptest! {
        #[test]
        fn utility_forms_agree(seed in 0u64..10_000, n in 2usize..=30, rho in 1e-3f64..1e3) {
            let (g, p, x) = random_instance(seed, n);
            let a = utility_stress_sum(&g, &p, rho, &x);
            let b = utility_quadratic(&g, &p, rho, &x);
            proptest::prop_assert!((a - b).abs() <= 1e-10 * a.abs().max(1.0));
            proptest::prop_assert!(b >= 0.0);
        }

        #[test]
        fn gradient_identity_and_descent(seed in 0u64..10_000, n in 2usize..=30, rho in 1e-3f64..1e3) {
            let (g, p, x) = random_instance(seed, n);
            let check = gradient_identity_check(&g, &p, rho, &x);
            proptest::prop_assert!(check.residual < 1e-9);
            let scale = norm_inf(&check.decomposition.grad_u).max(1.0);
            proptest::prop_assert!(check.fd_error < 1e-4 * scale);
            proptest::prop_assert!(check.decomposition.h_diag.iter().all(|&h| h > 0.0));
            proptest::prop_assert!(descent_slope(&check) <= 0.0);
            let next = step(&g, &p, rho, &x);
            proptest::prop_assert!(potential(&g, &p, rho, &next) <= potential(&g, &p, rho, &x) * (1.0 + 1e-12) + 1e-15);
        }

        #[test]
        fn bounded_poa_at_least_one(seed in 0u64..5_000, n in 2usize..=20, rho in 1e-2f64..1e2) {
            let (g, p, _) = random_instance(seed, n);
            let poa = price_of_anarchy(&g, &p, &PressureSchedule::constant(rho).unwrap()).unwrap();
            proptest::prop_assert!(poa >= 1.0 - 1e-12);
            let (_, opt) = anarchy_points(&g, &p, rho).unwrap();
            proptest::prop_assert!(opt.iter().all(|v| (-1e-12..=1.0 + 1e-12).contains(v)));
        }

        #[test]
        fn nonconsensus_states_have_positive_laplacian_form(seed in 0u64..5_000, n in 2usize..=30) {
            let (g, _, x) = random_instance(seed, n);
            let spread = x.iter().cloned().fold(f64::MIN, f64::max) - x.iter().cloned().fold(f64::MAX, f64::min);
            proptest::prop_assume!(spread > 1e-6);
            proptest::prop_assert!(limiting_utility(&g, &x) > 0.0);
        }
    }
}
