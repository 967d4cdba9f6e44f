//! ADMM for the shifted design problem.
//!
//! The splitting introduces `z_p = A_p^{1/2} w` for each target and
//! `u_k = T_k^{1/2} w` for each user, with scaled duals `υ_p` and `ν_k`.
//! Each sweep updates `w` (a sphere-constrained quadratic), every `z_p`
//! (a scaled copy of its residual direction, scale from a quartic), every
//! `u_k` (projection onto the outside of a ball), then the duals.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::kernels::{self, EigCache};
use crate::linalg::{self, CMat, CVec, C64};
use crate::model::BeamformerDesign;
use crate::problem::VectorizedProblem;
use crate::mm4mm::{feasible_constant_modulus_point, feasible_point};
use crate::report::{relative_change_below, SolverReport, Start, Stopwatch, Termination};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct AdmmConfig {
    /// Augmented-Lagrangian penalty.
    pub mu: f64,
    /// Relative objective change that stops the run.
    pub tol: f64,
    pub max_iter: usize,
    pub seed: u64,
    pub constant_modulus: bool,
    /// Inner majorization steps of the constant-modulus `w`-update.
    pub cm_inner_iter: usize,
    pub start: Start,
}

impl Default for AdmmConfig {
    fn default() -> Self {
        Self { mu: 0.86, tol: 1e-3, max_iter: 10_000, seed: 0, constant_modulus: false, cm_inner_iter: 50, start: Start::Random }
    }
}

impl AdmmConfig {
    pub fn validate(&self) -> Result<()> {
        if !(self.mu > 0.0 && self.mu.is_finite()) {
            return Err(Error::invalid("ADMM penalty must be positive"));
        }
        if !(self.tol > 0.0) {
            return Err(Error::invalid("stopping threshold must be positive"));
        }
        if self.max_iter == 0 {
            return Err(Error::invalid("max_iter must be positive"));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct AdmmState {
    pub w: CVec,
    pub z: Vec<CVec>,
    pub u: Vec<CVec>,
    pub upsilon: Vec<CVec>,
    pub nu: Vec<CVec>,
    pub iter: usize,
}

/// Precomputed, iteration-independent data of one ADMM run.
#[derive(Debug, Clone)]
pub struct AdmmSolver<'a> {
    problem: &'a VectorizedProblem,
    config: AdmmConfig,
    a_sqrt: Vec<CMat>,
    t_sqrt: Vec<CMat>,
    eig: EigCache,
}

impl<'a> AdmmSolver<'a> {
    pub fn new(problem: &'a VectorizedProblem, config: AdmmConfig) -> Result<Self> {
        config.validate()?;
        let a_sqrt = problem.a_mats.iter().map(kernels::hermitian_sqrt).collect::<Result<Vec<_>>>()?;
        let t_sqrt = problem.t_shift.iter().map(kernels::hermitian_sqrt).collect::<Result<Vec<_>>>()?;
        let eig = EigCache::new(&problem.a_sum)?;
        Ok(Self { problem, config, a_sqrt, t_sqrt, eig })
    }

    pub fn config(&self) -> &AdmmConfig {
        &self.config
    }

    /// Seeded start on the energy sphere (or the constant-modulus torus)
    /// with consistent splitting variables and zero duals.
    pub fn initial_state(&self) -> Result<AdmmState> {
        let w = initial_point(self.problem, self.config.seed, self.config.constant_modulus, self.config.start)?;
        Ok(self.state_from(w))
    }

    /// State with `z`, `u` consistent with `w` and zero duals.
    pub fn state_from(&self, w: CVec) -> AdmmState {
        let n = w.len();
        let z = self.a_sqrt.iter().map(|s| s * &w).collect();
        let u = self.t_sqrt.iter().map(|s| s * &w).collect();
        AdmmState {
            w,
            z,
            u,
            upsilon: vec![CVec::zeros(n); self.a_sqrt.len()],
            nu: vec![CVec::zeros(n); self.t_sqrt.len()],
            iter: 0,
        }
    }

    /// `Σ A_p^{1/2} (z_p + υ_p) + Σ T_k^{1/2} (u_k + ν_k)`.
    pub fn linear_term(&self, state: &AdmmState) -> CVec {
        let mut g = CVec::zeros(self.problem.dim());
        for (s, (z, v)) in self.a_sqrt.iter().zip(state.z.iter().zip(&state.upsilon)) {
            g += s * (z + v);
        }
        for (s, (u, v)) in self.t_sqrt.iter().zip(state.u.iter().zip(&state.nu)) {
            g += s * (u + v);
        }
        g
    }

    /// Minimizes `w^H A w - 2 Re(g^H w)` on the sphere, or on the
    /// constant-modulus torus by majorization warm-started at `state.w`.
    pub fn w_update(&self, state: &AdmmState) -> Result<CVec> {
        let g = self.linear_term(state);
        if self.config.constant_modulus {
            Ok(self.constant_modulus_w(&g, &state.w))
        } else {
            Ok(kernels::sphere_quadratic_min(&self.eig, &g, self.problem.e_t)?.w)
        }
    }

    fn constant_modulus_w(&self, g: &CVec, start: &CVec) -> CVec {
        let a = &self.problem.a_sum;
        let lam_max = self.eig.max_eigenvalue();
        let a_s = self.problem.a_s;
        let objective = |w: &CVec| linalg::quad_form(a, w) - 2.0 * g.dotc(w).re;
        let mut w = project_modulus(start, a_s, None);
        let mut value = objective(&w);
        for _ in 0..self.config.cm_inner_iter {
            // majorize w^H A w by λ_max ||w||^2 - 2 Re(w_t^H (λ_max I - A) w) + const
            let target = &w * C64::from(lam_max) - a * &w + g;
            let next = project_modulus(&target, a_s, Some(&w));
            let next_value = objective(&next);
            let done = (value - next_value).abs() <= 1e-12 * value.abs().max(1.0);
            w = next;
            value = next_value;
            if done {
                break;
            }
        }
        w
    }

    /// `z_p = χ_p b_p` with `b_p = A_p^{1/2} w - υ_p`.
    pub fn z_update(&self, state: &AdmmState, w: &CVec) -> Result<Vec<CVec>> {
        let mu = self.config.mu;
        self.a_sqrt
            .iter()
            .zip(&state.upsilon)
            .zip(&self.problem.alpha_sq)
            .enumerate()
            .map(|(p, ((s, v), a2))| {
                let b = s * w - v;
                let eta = b.norm_squared();
                if !(eta > 0.0) {
                    return Err(Error::DegenerateDirection { iteration: state.iter, target: p });
                }
                let chi = kernels::positive_quartic_root(mu, 2.0 / (a2 * eta * eta))?;
                Ok(b * C64::from(chi))
            })
            .collect()
    }

    /// Projection of `c_k = T_k^{1/2} w - ν_k` onto `{u : ||u||^2 ≥ η_k}`.
    pub fn u_update(&self, state: &AdmmState, w: &CVec) -> Vec<CVec> {
        self.t_sqrt
            .iter()
            .zip(&state.nu)
            .zip(&self.problem.eta)
            .map(|((s, v), &eta)| project_outside_ball(&(s * w - v), eta))
            .collect()
    }

    /// One full sweep; returns the largest primal residual after the dual step.
    pub fn step(&self, state: &mut AdmmState) -> Result<f64> {
        let w = self.w_update(state)?;
        let z = self.z_update(state, &w)?;
        let u = self.u_update(state, &w);
        let mut residual = 0.0f64;
        for p in 0..z.len() {
            let r = &z[p] - &self.a_sqrt[p] * &w;
            residual = residual.max(r.norm());
            state.upsilon[p] += r;
        }
        for k in 0..u.len() {
            let r = &u[k] - &self.t_sqrt[k] * &w;
            residual = residual.max(r.norm());
            state.nu[k] += r;
        }
        state.w = w;
        state.z = z;
        state.u = u;
        state.iter += 1;
        Ok(residual)
    }

    pub fn run(&self) -> Result<(BeamformerDesign, SolverReport)> {
        self.run_from(self.initial_state()?)
    }

    pub fn run_from(&self, mut state: AdmmState) -> Result<(BeamformerDesign, SolverReport)> {
        let start = Stopwatch::start();
        let mut prev = self.problem.objective(&state.w);
        let mut trace = Vec::new();
        let mut residuals = Vec::new();
        let mut termination = Termination::MaxIter;
        for _ in 0..self.config.max_iter {
            let residual = self.step(&mut state)?;
            let h = self.problem.objective(&state.w);
            if !h.is_finite() {
                return Err(Error::NonFinite { iteration: state.iter, what: "objective" });
            }
            trace.push(h);
            residuals.push(residual);
            // From a consistent start the first w-update reproduces w_0, so
            // the first comparison says nothing unless z and u stayed put too.
            let vacuous = state.iter == 1 && residual > 0.0;
            if !vacuous && relative_change_below(prev, h, self.config.tol) {
                termination = Termination::Tolerance;
                break;
            }
            prev = h;
        }
        let label = if self.config.constant_modulus { "admm-cm" } else { "admm" };
        let design = BeamformerDesign::from_vec(state.w.clone(), self.problem.n_tx)?.labelled(label);
        let report = SolverReport {
            solver: label.into(),
            iterations: trace.len(),
            objective_trace: trace,
            primal_residuals: residuals,
            sinr_slacks: self.problem.check_feasibility(&state.w).sinr_slacks,
            wall_time: start.elapsed(),
            termination,
        };
        log::debug!(
            "{label}: {} iterations, objective {:.6e}, {:?}",
            report.iterations,
            report.final_objective(),
            report.termination
        );
        Ok((design, report))
    }
}

/// Starting point shared by both solvers.
pub(crate) fn initial_point(problem: &VectorizedProblem, seed: u64, constant_modulus: bool, start: Start) -> Result<CVec> {
    let n = problem.dim();
    let w = match start {
        Start::Feasible if constant_modulus => feasible_constant_modulus_point(problem, seed)?,
        Start::Feasible => feasible_point(problem, seed)?.w,
        Start::Random => {
            let mut rng = linalg::rng(seed);
            if constant_modulus {
                linalg::random_complex_vector(&mut rng, n, 1.0)
            } else {
                linalg::random_on_sphere(&mut rng, n, problem.e_t)
            }
        }
    };
    Ok(if constant_modulus { project_modulus(&w, problem.a_s, None) } else { w })
}

pub fn admm_run(problem: &VectorizedProblem, config: AdmmConfig) -> Result<(BeamformerDesign, SolverReport)> {
    AdmmSolver::new(problem, config)?.run()
}

/// Closest point to `c` with `||u||^2 ≥ eta`; a zero `c` maps to `sqrt(eta) e_1`.
pub fn project_outside_ball(c: &CVec, eta: f64) -> CVec {
    let n2 = c.norm_squared();
    if n2 >= eta {
        return c.clone();
    }
    if n2 == 0.0 {
        let mut e = CVec::zeros(c.len());
        e[0] = C64::from(eta.sqrt());
        return e;
    }
    c * C64::from((eta / n2).sqrt())
}

/// Entries of modulus `a_s` carrying the phases of `v`; zero entries keep
/// the phase of `fallback` (or phase zero).
pub(crate) fn project_modulus(v: &CVec, a_s: f64, fallback: Option<&CVec>) -> CVec {
    CVec::from_iterator(
        v.len(),
        v.iter().enumerate().map(|(n, z)| {
            let phase = if z.norm() > 0.0 {
                z.arg()
            } else {
                fallback.map(|f| f[n].arg()).unwrap_or(0.0)
            };
            C64::from_polar(a_s, phase)
        }),
    )
}
