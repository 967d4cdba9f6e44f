use std::time::Duration;

use serde::{Deserialize, Serialize};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Termination {
    /// Relative objective change fell below the stopping threshold.
    Tolerance,
    MaxIter,
}

/// Where a solver run starts.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Start {
    /// Seeded random point on the energy sphere (or the modulus torus).
    #[default]
    Random,
    /// Output of the feasibility finder for the same seed, so every SINR
    /// floor holds from the first iterate.
    Feasible,
}

/// Per-run diagnostics shared by both solvers.
#[derive(Debug, Clone, PartialEq)]
pub struct SolverReport {
    pub solver: String,
    /// Objective `h(w_r)` after each iteration.
    pub objective_trace: Vec<f64>,
    /// Largest splitting residual after each iteration (zero for MM4MM).
    pub primal_residuals: Vec<f64>,
    /// Final `w^H T̂_k w - Γ_k` per user.
    pub sinr_slacks: Vec<f64>,
    pub iterations: usize,
    pub wall_time: Duration,
    pub termination: Termination,
}

impl SolverReport {
    pub fn final_objective(&self) -> f64 {
        self.objective_trace.last().copied().unwrap_or(f64::NAN)
    }

    pub fn feasible(&self, tol: f64) -> bool {
        self.sinr_slacks.iter().all(|s| *s >= -tol)
    }
}

/// Relative-change stopping rule `|h_{r+1} - h_r| / h_r ≤ tol`.
pub(crate) fn relative_change_below(prev: f64, next: f64, tol: f64) -> bool {
    (next - prev).abs() <= tol * prev.abs()
}

/// Wall clock for solver reports. Browser wasm has no clock and reads zero.
pub(crate) struct Stopwatch {
    #[cfg(not(target_arch = "wasm32"))]
    start: std::time::Instant,
}

impl Stopwatch {
    pub(crate) fn start() -> Self {
        Self {
            #[cfg(not(target_arch = "wasm32"))]
            start: std::time::Instant::now(),
        }
    }

    pub(crate) fn elapsed(&self) -> Duration {
        #[cfg(not(target_arch = "wasm32"))]
        return self.start.elapsed();
        #[cfg(target_arch = "wasm32")]
        Duration::ZERO
    }
}
