//! Transmit beamforming design for dual-function MIMO radar-communication
//! systems.
//!
//! The design minimizes an upper bound on the asymptotic Cramér-Rao bound of
//! multi-target angle estimation subject to per-user SINR floors and a
//! transmit energy budget. Two solvers are provided ([`admm`] and [`mm4mm`]),
//! together with the Fisher information machinery ([`fisher`]) and a
//! Monte-Carlo evaluation harness ([`sim`]).

pub mod admm;
pub mod error;
pub mod fisher;
pub mod kernels;
pub mod linalg;
pub mod mm4mm;
pub mod model;
pub mod problem;
pub mod report;
pub mod sim;

pub use error::{Error, Result};
pub use model::{
    beampattern, comm_sinr, comm_sinrs, spatial_frequency, steering, steering_derivative, ArrayGeometry,
    BeamformerDesign, CommScenario, Scenario, Target, TargetScene,
};
pub use problem::{build_problem, FeasibilityReport, VectorizedProblem};
pub use report::{SolverReport, Start, Termination};
