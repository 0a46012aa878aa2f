//! Opinion dynamics on weighted connected graphs with time-varying peer
//! pressure.
//!
//! Each agent holds a fixed innate preference and a stubbornness weight, and
//! at every step discloses the opinion minimizing a quadratic social stress
//! that trades off its innate view against disagreement with neighbors, scaled
//! by a peer-pressure coefficient ρ(k). The crate provides:
//!
//! - [`graph`]: validated weighted graphs, Laplacians and generators
//! - [`numerics`]: the dense linear algebra the rest relies on
//! - [`dynamics`]: schedules, the update map, simulation and limit points
//! - [`diagnostics`]: utilities, the gradient-step identity, rate series and
//!   price of anarchy
//! - [`inference`]: fitting a pressure schedule to observed snapshots

// `!(x > 0.0)` style checks are deliberate: they also reject NaN
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod diagnostics;
pub mod dynamics;
pub mod graph;
pub mod inference;
pub mod numerics;
pub mod opinion_csv;
pub mod optim;

pub use dynamics::{
    bounded_limit, consensus_limit, fixed_point_at, simulate, step, AgentProfile, LimitKind, LimitPoint,
    PressureSchedule, StopReason, Trajectory,
};
pub use graph::{derive_matrices, GraphMatrices, WeightedGraph};
pub use numerics::{Matrix, RegressionLine, SymMatrix};
