//! MM4MM: majorization-minimization on the variational (minimax) form of
//! the design problem.
//!
//! Each reciprocal `1/x` is written as `max_γ 2√γ - γ x`, and the SINR
//! constraints enter through multipliers `λ_k`. With
//! `M = Σ |α_p|^2 γ_p A_p + Σ λ_k T_k` the inner function `-w^H M w` is
//! concave in `w`, so its tangent at `w_r` majorizes it. Minimizing the
//! tangent over the energy ball gives `w = sqrt(e_T) M w_r / ||M w_r||`, and
//! the multipliers are refreshed by a small concave maximization.

use serde::{Deserialize, Serialize};

use crate::admm::{initial_point, project_modulus};
use crate::error::{Error, Result};
use crate::kernels::{self, AscentOptions};
use crate::linalg::{self, CMat, CVec, RMat, C64};
use crate::model::BeamformerDesign;
use crate::problem::VectorizedProblem;
use crate::report::{relative_change_below, SolverReport, Start, Stopwatch, Termination};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct MmConfig {
    pub tol: f64,
    pub max_iter: usize,
    pub seed: u64,
    pub constant_modulus: bool,
    pub inner: AscentOptions,
    /// Used when no explicit initial point is passed.
    pub start: Start,
}

impl Default for MmConfig {
    fn default() -> Self {
        Self { tol: 1e-3, max_iter: 500, seed: 0, constant_modulus: false, inner: AscentOptions::default(), start: Start::Random }
    }
}

impl MmConfig {
    pub fn validate(&self) -> Result<()> {
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
pub struct MmState {
    pub w: CVec,
    pub gamma: Vec<f64>,
    pub lambda: Vec<f64>,
    pub m_mat: CMat,
}

impl MmState {
    /// State at `w` with `γ` at its variational maximizer and unit `λ`.
    pub fn new(problem: &VectorizedProblem, w: CVec) -> Result<Self> {
        let gamma = problem
            .target_responses(&w)
            .iter()
            .zip(&problem.alpha_sq)
            .enumerate()
            .map(|(p, (r, a2))| {
                let d = a2 * r;
                if d > 0.0 {
                    Ok(1.0 / (d * d))
                } else {
                    Err(Error::DegenerateBeampattern { target: p })
                }
            })
            .collect::<Result<Vec<_>>>()?;
        let lambda = vec![1.0; problem.users];
        let m_mat = assemble_majorizer(problem, &gamma, &lambda);
        Ok(Self { w, gamma, lambda, m_mat })
    }

    pub fn refresh_majorizer(&mut self, problem: &VectorizedProblem) {
        self.m_mat = assemble_majorizer(problem, &self.gamma, &self.lambda);
    }
}

/// `Σ |α_p|^2 γ_p A_p + Σ λ_k T_k`.
pub fn assemble_majorizer(problem: &VectorizedProblem, gamma: &[f64], lambda: &[f64]) -> CMat {
    let n = problem.dim();
    let mut m = CMat::zeros(n, n);
    for ((a, a2), g) in problem.a_mats.iter().zip(&problem.alpha_sq).zip(gamma) {
        m += a * C64::from(a2 * g);
    }
    for (t, l) in problem.t_shift.iter().zip(lambda) {
        m += t * C64::from(*l);
    }
    m
}

/// `sqrt(e_T) M w_r / ||M w_r||`, the maximizer of `Re(w_r^H M w)` on the ball.
pub fn mm_w_update(m_mat: &CMat, w_r: &CVec, e_t: f64, iteration: usize) -> Result<CVec> {
    let v = m_mat * w_r;
    let n = v.norm();
    if !(n > 0.0) {
        return Err(Error::DegenerateMajorizer { iteration });
    }
    Ok(v * C64::from(e_t.sqrt() / n))
}

/// Entries of modulus `a_s` with the phases of `M w_r`; a zero entry keeps
/// the phase of `w_r`.
pub fn mm_constant_modulus_step(m_mat: &CMat, w_r: &CVec, a_s: f64, iteration: usize) -> Result<CVec> {
    let v = m_mat * w_r;
    if v.norm() == 0.0 {
        return Err(Error::DegenerateMajorizer { iteration });
    }
    Ok(project_modulus(&v, a_s, Some(w_r)))
}

/// Gap between the tangent majorizer at `w_r` and the function it
/// majorizes, `(w - w_r)^H M (w - w_r)`.
pub fn mm_majorizer_gap(state: &MmState, w: &CVec) -> f64 {
    let m = &state.m_mat;
    let w_r = &state.w;
    // expanded form, matching the surrogate difference term by term
    linalg::quad_form(m, w) - 2.0 * w_r.dotc(&(m * w)).re + linalg::quad_form(m, w_r)
}

/// The inner concave program in `(γ, λ)` at a fixed `w_r`.
///
/// `M w_r` is linear in the multipliers, so the products `A_p w_r` and
/// `T_k w_r` are formed once and every evaluation is cheap.
#[derive(Debug, Clone)]
pub struct InnerProblem {
    /// Columns `|α_p|^2 A_p w_r` then `T_k w_r`.
    basis: CMat,
    gram: RMat,
    /// `w_r^H (column)`.
    linear: Vec<f64>,
    eta: Vec<f64>,
    targets: usize,
    e_t: f64,
    a_s: f64,
    constant_modulus: bool,
}

impl InnerProblem {
    pub fn new(problem: &VectorizedProblem, w_r: &CVec, constant_modulus: bool) -> Self {
        let cols: Vec<CVec> = problem
            .a_mats
            .iter()
            .zip(&problem.alpha_sq)
            .map(|(a, a2)| (a * w_r) * C64::from(*a2))
            .chain(problem.t_shift.iter().map(|t| t * w_r))
            .collect();
        let basis = CMat::from_columns(&cols);
        let gram = (basis.adjoint() * &basis).map(|z| z.re);
        let linear = cols.iter().map(|c| w_r.dotc(c).re).collect();
        Self {
            basis,
            gram,
            linear,
            eta: problem.eta.clone(),
            targets: problem.targets(),
            e_t: problem.e_t,
            a_s: problem.a_s,
            constant_modulus,
        }
    }

    pub fn dim(&self) -> usize {
        self.linear.len()
    }

    /// Value and supergradient at `x = (γ, λ)`.
    pub fn value_and_gradient(&self, x: &[f64]) -> (f64, Vec<f64>) {
        let p = self.targets;
        let mut value = 0.0;
        let mut grad = vec![0.0; x.len()];
        for i in 0..x.len() {
            value += self.linear[i] * x[i];
            grad[i] += self.linear[i];
        }
        for i in 0..p {
            value += 2.0 * x[i].sqrt();
            grad[i] += 1.0 / x[i].sqrt();
        }
        for k in 0..self.eta.len() {
            value += self.eta[k] * x[p + k];
            grad[p + k] += self.eta[k];
        }
        let xv = nalgebra::DVector::from_column_slice(x);
        if self.constant_modulus {
            let v = &self.basis * xv.map(C64::from);
            let l1: f64 = v.iter().map(|z| z.norm()).sum();
            value -= 2.0 * self.a_s * l1;
            let phases = CVec::from_iterator(
                v.len(),
                v.iter().map(|z| if z.norm() > 0.0 { *z / z.norm() } else { C64::from(0.0) }),
            );
            let proj = self.basis.adjoint() * phases;
            for i in 0..x.len() {
                grad[i] -= 2.0 * self.a_s * proj[i].re;
            }
        } else {
            let gx = &self.gram * &xv;
            let norm = xv.dot(&gx).max(0.0).sqrt();
            value -= 2.0 * self.e_t.sqrt() * norm;
            if norm > 0.0 {
                for i in 0..x.len() {
                    grad[i] -= 2.0 * self.e_t.sqrt() * gx[i] / norm;
                }
            }
        }
        (value, grad)
    }
}

/// Value and supergradient of the inner program at `(γ, λ)` for `w_r`.
pub fn mm_inner_objective(
    problem: &VectorizedProblem,
    w_r: &CVec,
    gamma: &[f64],
    lambda: &[f64],
    constant_modulus: bool,
) -> (f64, Vec<f64>) {
    let x: Vec<f64> = gamma.iter().chain(lambda).copied().collect();
    InnerProblem::new(problem, w_r, constant_modulus).value_and_gradient(&x)
}

pub struct MmSolver<'a> {
    problem: &'a VectorizedProblem,
    config: MmConfig,
}

impl<'a> MmSolver<'a> {
    pub fn new(problem: &'a VectorizedProblem, config: MmConfig) -> Result<Self> {
        config.validate()?;
        Ok(Self { problem, config })
    }

    pub fn initial_point(&self) -> Result<CVec> {
        initial_point(self.problem, self.config.seed, self.config.constant_modulus, self.config.start)
    }

    /// State at `w` with the multipliers refreshed for the first step.
    pub fn initial_state(&self, w: CVec) -> Result<MmState> {
        let mut state = MmState::new(self.problem, w)?;
        self.refresh_multipliers(&mut state, true)?;
        Ok(state)
    }

    /// Majorizer step followed by the multiplier refresh at the new point.
    pub fn step(&self, state: &mut MmState, iteration: usize) -> Result<()> {
        state.w = if self.config.constant_modulus {
            mm_constant_modulus_step(&state.m_mat, &state.w, self.problem.a_s, iteration)?
        } else {
            mm_w_update(&state.m_mat, &state.w, self.problem.e_t, iteration)?
        };
        let cold = state.gamma.iter().all(|g| *g == 0.0);
        self.refresh_multipliers(state, cold)
    }

    /// Maximizes the inner program at `state.w`. When the linearized SINR
    /// constraints admit no point, that program is unbounded above; the
    /// multipliers are then set to `γ = 0` and `λ` to the restoration
    /// weights, so the next step minimizes the worst linearized violation.
    fn refresh_multipliers(&self, state: &mut MmState, cold: bool) -> Result<()> {
        let cm = self.config.constant_modulus;
        let (worst, weights) = restoration_dual(self.problem, &state.w, cm, &self.config.inner)?;
        let scale = self.problem.eta.iter().fold(0.0f64, |m, e| m.max(e.abs()));
        if worst > 1e-12 * scale {
            state.gamma = vec![0.0; self.problem.targets()];
            state.lambda = weights;
            state.refresh_majorizer(self.problem);
            return Ok(());
        }
        if cold {
            let fresh = MmState::new(self.problem, state.w.clone())?;
            state.gamma = fresh.gamma;
            state.lambda = fresh.lambda;
        }
        let inner = InnerProblem::new(self.problem, &state.w, cm);
        let init: Vec<f64> = state.gamma.iter().chain(&state.lambda).copied().collect();
        let res = kernels::concave_orthant_max(|x| inner.value_and_gradient(x), &init, &self.config.inner)?;
        let p = self.problem.targets();
        // γ stays strictly positive so the reciprocal terms remain defined
        state.gamma = res.x[..p].iter().map(|g| g.max(self.config.inner.floor)).collect();
        state.lambda = res.x[p..].to_vec();
        state.refresh_majorizer(self.problem);
        Ok(())
    }

    pub fn run(&self, w0: Option<CVec>) -> Result<(BeamformerDesign, SolverReport)> {
        let start = Stopwatch::start();
        let w0 = match w0 {
            Some(w) => {
                if w.len() != self.problem.dim() {
                    return Err(Error::invalid("initial point has the wrong dimension"));
                }
                w
            }
            None => self.initial_point()?,
        };
        let mut state = self.initial_state(w0)?;
        let mut prev = self.problem.objective(&state.w);
        let mut trace = Vec::new();
        let mut termination = Termination::MaxIter;
        for r in 0..self.config.max_iter {
            self.step(&mut state, r)?;
            let h = self.problem.objective(&state.w);
            if !h.is_finite() {
                return Err(Error::NonFinite { iteration: r + 1, what: "objective" });
            }
            trace.push(h);
            // the objective plays no part in a restoration step
            let restoring = state.gamma.iter().all(|g| *g == 0.0);
            if !restoring && relative_change_below(prev, h, self.config.tol) {
                termination = Termination::Tolerance;
                break;
            }
            prev = h;
        }
        let label = if self.config.constant_modulus { "mm4mm-cm" } else { "mm4mm" };
        let design = BeamformerDesign::from_vec(state.w.clone(), self.problem.n_tx)?.labelled(label);
        let report = SolverReport {
            solver: label.into(),
            iterations: trace.len(),
            primal_residuals: vec![0.0; trace.len()],
            objective_trace: trace,
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

pub fn mm_run(
    problem: &VectorizedProblem,
    config: MmConfig,
    w0: Option<CVec>,
) -> Result<(BeamformerDesign, SolverReport)> {
    MmSolver::new(problem, config)?.run(w0)
}

/// Smallest worst-case violation of the SINR constraints linearized at
/// `w_r` over the energy ball (or the modulus box), with the simplex weights
/// attaining it. Positive exactly when the linearized constraints admit no
/// point; the MM step built from `M = Σ λ_k T_k` then reaches that minimum.
pub fn restoration_dual(
    problem: &VectorizedProblem,
    w_r: &CVec,
    constant_modulus: bool,
    opts: &AscentOptions,
) -> Result<(f64, Vec<f64>)> {
    let inner = InnerProblem::new(problem, w_r, constant_modulus);
    let p = problem.targets();
    let k = problem.users;
    let phi = |lambda: &[f64]| {
        let x: Vec<f64> = std::iter::repeat(0.0).take(p).chain(lambda.iter().copied()).collect();
        let (v, g) = inner.value_and_gradient(&x);
        (v, g[p..].to_vec())
    };
    let res = kernels::concave_simplex_max(phi, &vec![1.0 / k as f64; k], opts)?;
    Ok((res.value, res.x))
}

/// A point of the constant-modulus torus meeting every SINR floor.
///
/// Starts from the feasibility finder's output projected onto the torus and
/// repeatedly steps to the torus point minimizing the worst linearized
/// violation; the worst true violation can only shrink along the way.
pub fn feasible_constant_modulus_point(problem: &VectorizedProblem, seed: u64) -> Result<CVec> {
    const MAX_ITER: usize = 500;
    let start = match feasible_point(problem, seed) {
        Ok(f) => f.w,
        Err(_) => linalg::random_complex_vector(&mut linalg::rng(seed), problem.dim(), 1.0),
    };
    let mut w = project_modulus(&start, problem.a_s, None);
    let opts = AscentOptions::default();
    let worst = |w: &CVec| -problem.check_feasibility(w).shifted_slacks.iter().copied().fold(f64::INFINITY, f64::min);
    let mut best = worst(&w);
    let mut stalled = 0;
    for iteration in 0..MAX_ITER {
        if best <= 0.0 {
            return Ok(w);
        }
        let (_, weights) = restoration_dual(problem, &w, true, &opts)?;
        let m = assemble_majorizer(problem, &vec![0.0; problem.targets()], &weights);
        w = mm_constant_modulus_step(&m, &w, problem.a_s, iteration)?;
        let now = worst(&w);
        stalled = if now < best * (1.0 - 1e-9) { 0 } else { stalled + 1 };
        best = best.min(now);
        if stalled >= 20 {
            break;
        }
    }
    if best <= 0.0 {
        return Ok(w);
    }
    Err(Error::FeasibilityNotFound { iterations: MAX_ITER, best_energy: problem.e_t })
}

/// Result of [`feasible_point`].
#[derive(Debug, Clone)]
pub struct FeasiblePoint {
    pub w: CVec,
    /// `||w_t||^2` of every minorization iterate, starting with the scaled
    /// initial point.
    pub norm_trace: Vec<f64>,
}

/// Energy cap used by [`feasible_point`]: the surrogate problem is unbounded
/// for a single user, whose constraint set is a cylinder.
pub const FEASIBILITY_NORM_CAP: f64 = 4.0;

/// Finds `w` with `||w||^2 = e_T` meeting every SINR floor.
///
/// Maximizes `||w||^2` over `{w : w^H T̃_k w ≥ η̃_k}` (with
/// `T̃_k = T̂_k - ||h_k||^2 I ⪯ 0`) by minorization: each step maximizes
/// `Re(w_t^H w)` over the convex set. Once `||w_t||^2 ≥ e_T` the iterate is
/// scaled back onto the sphere, which keeps every constraint satisfied.
pub fn feasible_point(problem: &VectorizedProblem, seed: u64) -> Result<FeasiblePoint> {
    const MAX_ITER: usize = 200;
    let n = problem.dim();
    let e_t = problem.e_t;
    let t_tilde: Vec<CMat> = problem
        .t_hat
        .iter()
        .zip(&problem.channel_norm_sq)
        .map(|(t, h2)| t - CMat::identity(n, n) * C64::from(*h2))
        .collect();
    let eta_tilde: Vec<f64> =
        problem.gamma_abs.iter().zip(&problem.channel_norm_sq).map(|(g, h2)| g - h2 * e_t).collect();
    if let Some(k) = eta_tilde.iter().position(|e| *e >= 0.0) {
        return Err(Error::invalid(format!(
            "SINR floor of user {k} exceeds what the energy budget can deliver (||h||^2 e_T ≤ Γ)"
        )));
    }

    let mut rng = linalg::rng(seed);
    let mut w = linalg::random_complex_vector(&mut rng, n, 1.0);
    let ratio = t_tilde
        .iter()
        .zip(&eta_tilde)
        .map(|(t, e)| linalg::quad_form(t, &w) / e)
        .fold(0.0f64, f64::max);
    if ratio > 1.0 {
        w /= C64::from(ratio.sqrt());
    }
    let mut norm_trace = vec![w.norm_squared()];
    let cap = FEASIBILITY_NORM_CAP * e_t;
    for _ in 0..MAX_ITER {
        if w.norm_squared() >= e_t {
            let scaled = &w * C64::from((e_t / w.norm_squared()).sqrt());
            return Ok(FeasiblePoint { w: scaled, norm_trace });
        }
        let next = kernels::linear_max_concave_qcqp(&w, &t_tilde, &eta_tilde, Some(cap))?.w;
        let grown = next.norm_squared();
        norm_trace.push(grown);
        let stalled = grown <= norm_trace[norm_trace.len() - 2] * (1.0 + 1e-12);
        w = next;
        if stalled && grown < e_t {
            break;
        }
    }
    if w.norm_squared() >= e_t {
        let scaled = &w * C64::from((e_t / w.norm_squared()).sqrt());
        return Ok(FeasiblePoint { w: scaled, norm_trace });
    }
    Err(Error::FeasibilityNotFound { iterations: norm_trace.len() - 1, best_energy: w.norm_squared() })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::kernels::EigCache;
    use crate::model::{ArrayGeometry, CommScenario, Target, TargetScene};

    fn small_problem(users: usize, gamma_hat: f64) -> VectorizedProblem {
        let geom = ArrayGeometry::new(4, 4).unwrap();
        let scene = TargetScene::new(
            vec![Target::from_power_db(-10.0, 0.0).unwrap(), Target::from_power_db(20.0, 0.0).unwrap()],
            1.0,
        )
        .unwrap();
        let comm = CommScenario::rayleigh(4, users, 3, 0.1, vec![gamma_hat; users]).unwrap();
        VectorizedProblem::build(&geom, &scene, &comm, 1.0).unwrap()
    }

    fn random_state(prob: &VectorizedProblem, seed: u64) -> MmState {
        let mut r = linalg::rng(seed);
        let w = linalg::random_on_sphere(&mut r, prob.dim(), prob.e_t);
        let mut s = MmState::new(prob, w).unwrap();
        s.lambda = (0..prob.users).map(|_| rand::Rng::random::<f64>(&mut r)).collect();
        s.refresh_majorizer(prob);
        s
    }

    #[test]
    fn isotropic_majorizer_normalizes() {
        let w = linalg::random_complex_vector(&mut linalg::rng(1), 6, 3.0);
        let out = mm_w_update(&CMat::identity(6, 6), &w, 2.0, 0).unwrap();
        let expect = &w * C64::from(2f64.sqrt() / w.norm());
        assert!((out - expect).norm() < 1e-12);
        assert!(matches!(mm_w_update(&CMat::zeros(6, 6), &w, 1.0, 3), Err(Error::DegenerateMajorizer { iteration: 3 })));
    }

    #[test]
    fn gamma_starts_at_variational_maximizer() {
        let prob = small_problem(2, 2.0);
        let w = linalg::random_on_sphere(&mut linalg::rng(2), prob.dim(), 1.0);
        let s = MmState::new(&prob, w.clone()).unwrap();
        for p in 0..2 {
            let d = prob.alpha_sq[p] * linalg::quad_form(&prob.a_mats[p], &w);
            assert!((s.gamma[p] - 1.0 / (d * d)).abs() < 1e-12 * s.gamma[p]);
            // the reciprocal equals its variational form at this γ
            let variational = 2.0 * s.gamma[p].sqrt() - s.gamma[p] * d;
            assert!((variational - 1.0 / d).abs() < 1e-12 / d);
        }
    }

    #[test]
    fn touch_condition_and_majorization() {
        let prob = small_problem(2, 2.0);
        let s = random_state(&prob, 3);
        assert!(mm_majorizer_gap(&s, &s.w).abs() < 1e-12 * s.m_mat.norm());
        let mut r = linalg::rng(4);
        for _ in 0..1000 {
            let probe = linalg::random_complex_vector(&mut r, prob.dim(), 1.0);
            let gap = mm_majorizer_gap(&s, &probe);
            let diff = &probe - &s.w;
            assert!(gap >= -1e-10);
            assert!((gap - linalg::quad_form(&s.m_mat, &diff)).abs() < 1e-9 * gap.abs().max(1.0));
        }
        assert!(EigCache::new(&s.m_mat).unwrap().min_eigenvalue() >= -1e-10 * s.m_mat.norm());
    }

    #[test]
    fn w_update_maximizes_on_ball() {
        let prob = small_problem(2, 2.0);
        let s = random_state(&prob, 5);
        let w = mm_w_update(&s.m_mat, &s.w, 1.0, 0).unwrap();
        let best = s.w.dotc(&(&s.m_mat * &w)).re;
        let mut r = linalg::rng(6);
        for _ in 0..10_000 {
            let probe = linalg::random_on_sphere(&mut r, prob.dim(), 1.0);
            assert!(s.w.dotc(&(&s.m_mat * &probe)).re <= best + 1e-10);
        }
    }

    #[test]
    fn constant_modulus_step_cases() {
        let m = CMat::identity(3, 3);
        let w = CVec::from_vec(vec![C64::from(1.0), C64::from(2.0), C64::from(0.5)]);
        let out = mm_constant_modulus_step(&m, &w, 0.3, 0).unwrap();
        assert!(out.iter().all(|z| (*z - C64::from(0.3)).norm() < 1e-15));
        let prob = small_problem(2, 2.0);
        let s = random_state(&prob, 7);
        let out = mm_constant_modulus_step(&s.m_mat, &s.w, prob.a_s, 0).unwrap();
        assert!(out.iter().all(|z| (z.norm() - prob.a_s).abs() < 1e-15));
        let best = s.w.dotc(&(&s.m_mat * &out)).re;
        let mut r = linalg::rng(8);
        for _ in 0..100_000 {
            let v = linalg::random_complex_vector(&mut r, prob.dim(), 1.0);
            let probe = project_modulus(&v, prob.a_s, None);
            assert!(s.w.dotc(&(&s.m_mat * &probe)).re <= best + 1e-10);
        }
    }

    #[test]
    fn inner_gradient_matches_finite_differences() {
        let prob = small_problem(2, 2.0);
        for cm in [false, true] {
            let s = random_state(&prob, 9);
            let inner = InnerProblem::new(&prob, &s.w, cm);
            let mut r = linalg::rng(10);
            for _ in 0..20 {
                let x: Vec<f64> = (0..inner.dim()).map(|_| 0.1 + rand::Rng::random::<f64>(&mut r)).collect();
                let (_, g) = inner.value_and_gradient(&x);
                for i in 0..x.len() {
                    let h = 1e-6;
                    let (mut xp, mut xm) = (x.clone(), x.clone());
                    xp[i] += h;
                    xm[i] -= h;
                    let fd = (inner.value_and_gradient(&xp).0 - inner.value_and_gradient(&xm).0) / (2.0 * h);
                    assert!((fd - g[i]).abs() <= 1e-5 * g[i].abs().max(1.0), "{cm} {i}: {fd} vs {}", g[i]);
                }
            }
        }
    }

    #[test]
    fn inner_objective_is_concave_along_segments() {
        let prob = small_problem(2, 2.0);
        let s = random_state(&prob, 11);
        let inner = InnerProblem::new(&prob, &s.w, false);
        let mut r = linalg::rng(12);
        for _ in 0..200 {
            let a: Vec<f64> = (0..4).map(|_| rand::Rng::random::<f64>(&mut r)).collect();
            let b: Vec<f64> = (0..4).map(|_| rand::Rng::random::<f64>(&mut r)).collect();
            let t: f64 = rand::Rng::random(&mut r);
            let mid: Vec<f64> = a.iter().zip(&b).map(|(x, y)| t * x + (1.0 - t) * y).collect();
            let chord = t * inner.value_and_gradient(&a).0 + (1.0 - t) * inner.value_and_gradient(&b).0;
            assert!(inner.value_and_gradient(&mid).0 >= chord - 1e-9);
        }
    }

    #[test]
    fn empty_majorizer_limit() {
        let prob = small_problem(2, 2.0);
        let s = random_state(&prob, 13);
        let floor = 1e-12;
        let (v, _) = mm_inner_objective(&prob, &s.w, &[floor, floor], &[0.0, 0.0], false);
        assert!((v - 4.0 * floor.sqrt()).abs() < 1e-9);
    }

    #[test]
    fn feasible_point_is_feasible() {
        let prob = small_problem(2, 2.0);
        let f = feasible_point(&prob, 1).unwrap();
        assert!((f.w.norm_squared() - 1.0).abs() < 1e-9);
        assert!(prob.check_feasibility(&f.w).min_sinr_slack() >= -1e-9);
        assert!(f.norm_trace.windows(2).all(|w| w[1] >= w[0] * (1.0 - 1e-9)));
    }

    #[test]
    fn feasible_point_single_user() {
        let prob = small_problem(1, 2.0);
        let f = feasible_point(&prob, 2).unwrap();
        assert!(prob.check_feasibility(&f.w).min_sinr_slack() >= -1e-9);
    }

    fn linearized_violations(prob: &VectorizedProblem, w_r: &CVec, w: &CVec) -> Vec<f64> {
        (0..prob.users)
            .map(|k| {
                let tw = &prob.t_shift[k] * w_r;
                prob.eta[k] + w_r.dotc(&tw).re - 2.0 * tw.dotc(w).re
            })
            .collect()
    }

    #[test]
    fn restoration_dual_is_the_minimax_violation() {
        let prob = small_problem(3, 40.0);
        let mut r = linalg::rng(9);
        let w_r = linalg::random_on_sphere(&mut r, prob.dim(), prob.e_t);
        let (psi, weights) = restoration_dual(&prob, &w_r, false, &AscentOptions::default()).unwrap();
        assert!(psi > 0.0, "linearization should be infeasible here: {psi}");
        assert!((weights.iter().sum::<f64>() - 1.0).abs() < 1e-12);
        let worst = |w: &CVec| linearized_violations(&prob, &w_r, w).into_iter().fold(f64::NEG_INFINITY, f64::max);
        let scale = prob.eta.iter().map(|e| e.abs()).fold(0.0, f64::max);
        // the primal point recovered from the weights attains the dual value
        let m = assemble_majorizer(&prob, &vec![0.0; prob.targets()], &weights);
        let w_star = mm_w_update(&m, &w_r, prob.e_t, 0).unwrap();
        assert!((worst(&w_star) - psi).abs() < 1e-6 * scale, "{} vs {psi}", worst(&w_star));
        for _ in 0..2000 {
            let w = linalg::random_on_sphere(&mut r, prob.dim(), prob.e_t);
            assert!(worst(&w) >= psi - 1e-9 * scale);
        }
    }

    #[test]
    fn restoration_dual_nonpositive_at_feasible_points() {
        let prob = small_problem(2, 2.0);
        let f = feasible_point(&prob, 1).unwrap();
        let (psi, _) = restoration_dual(&prob, &f.w, false, &AscentOptions::default()).unwrap();
        assert!(psi <= 1e-12 * prob.eta.iter().map(|e| e.abs()).fold(0.0, f64::max), "{psi}");
    }

    #[test]
    fn run_stays_on_sphere() {
        let prob = small_problem(2, 2.0);
        let (design, report) = mm_run(&prob, MmConfig::default(), None).unwrap();
        assert!((design.energy() - 1.0).abs() < 1e-8);
        assert_eq!(report.objective_trace.len(), report.iterations);
    }
}
