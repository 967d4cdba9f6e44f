//! The vectorized design problem shared by both solvers.
//!
//! With `w = vec(conj(W))` the beampattern at target `p` is `w^H A_p w` and
//! the SINR constraint of user `k` is `w^H T̂_k w ≥ Γ_k`. The indefinite
//! `T̂_k` is shifted by a per-user `β_k` below its smallest eigenvalue so the
//! constraint becomes `w^H T_k w ≥ η_k` with `T_k` PSD on the energy sphere.

use crate::error::{Error, Result};
use crate::linalg::{self, CMat, CVec, C64};
use crate::model::{ArrayGeometry, CommScenario, Scenario, TargetScene};

/// Relative margin by which each shift sits below `λ_min(T̂_k)`.
pub const SHIFT_MARGIN: f64 = 1e-3;

/// `vec(conj(W))`, columns stacked in order.
pub fn vec_w(w: &CMat) -> CVec {
    CVec::from_iterator(w.len(), w.iter().map(|z| z.conj()))
}

/// Inverse of [`vec_w`].
pub fn unvec_w(w: &CVec, n_tx: usize) -> Result<CMat> {
    if n_tx == 0 || w.len() % n_tx != 0 {
        return Err(Error::invalid(format!(
            "vector length {} is not divisible by N_T = {n_tx}",
            w.len()
        )));
    }
    let cols = w.len() / n_tx;
    Ok(CMat::from_iterator(n_tx, cols, w.iter().map(|z| z.conj())))
}

#[derive(Debug, Clone)]
pub struct VectorizedProblem {
    pub n_tx: usize,
    pub users: usize,
    /// `A_p = I_K ⊗ (a_p a_p^H)`, one per target.
    pub a_mats: Vec<CMat>,
    pub alpha_sq: Vec<f64>,
    /// Unshifted SINR matrices `T̂_k`.
    pub t_hat: Vec<CMat>,
    /// Shifted PSD matrices `T_k = T̂_k - β_k I`.
    pub t_shift: Vec<CMat>,
    pub lambda_diag: Vec<Vec<f64>>,
    pub beta: Vec<f64>,
    /// Absolute SINR floors `Γ_k = Γ̂_k σ_C^2`.
    pub gamma_abs: Vec<f64>,
    pub sinr_thresholds: Vec<f64>,
    pub channel_norm_sq: Vec<f64>,
    /// Shifted bounds `η_k = Γ_k - β_k e_T`.
    pub eta: Vec<f64>,
    /// `Σ A_p + Σ T_k`.
    pub a_sum: CMat,
    pub e_t: f64,
    /// Constant-modulus amplitude `sqrt(e_T / (N_T K))`.
    pub a_s: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct FeasibilityReport {
    /// `w^H T̂_k w - Γ_k`.
    pub sinr_slacks: Vec<f64>,
    /// `w^H T_k w - η_k`; equal to `sinr_slacks` on the energy sphere.
    pub shifted_slacks: Vec<f64>,
    /// `e_T - w^H w`.
    pub energy_slack: f64,
}

impl FeasibilityReport {
    pub fn min_sinr_slack(&self) -> f64 {
        self.sinr_slacks.iter().copied().fold(f64::INFINITY, f64::min)
    }

    pub fn is_feasible(&self, tol: f64) -> bool {
        self.min_sinr_slack() >= -tol
    }
}

pub fn build_problem(scenario: &Scenario) -> Result<VectorizedProblem> {
    VectorizedProblem::build(&scenario.geometry, &scenario.scene, &scenario.comm, scenario.energy)
}

impl VectorizedProblem {
    pub fn build(geom: &ArrayGeometry, scene: &TargetScene, comm: &CommScenario, e_t: f64) -> Result<Self> {
        Self::build_with_shift_margin(geom, scene, comm, e_t, SHIFT_MARGIN)
    }

    /// Like [`build`](Self::build) with `β_k = λ_min(T̂_k) (1 + margin)`.
    pub fn build_with_shift_margin(
        geom: &ArrayGeometry,
        scene: &TargetScene,
        comm: &CommScenario,
        e_t: f64,
        margin: f64,
    ) -> Result<Self> {
        if !(margin > 0.0 && margin.is_finite()) {
            return Err(Error::invalid("shift margin must be positive"));
        }
        if !(e_t > 0.0 && e_t.is_finite()) {
            return Err(Error::invalid("energy budget must be positive"));
        }
        let n_tx = geom.n_tx;
        if comm.channel().nrows() != n_tx {
            return Err(Error::invalid("channel rows must equal N_T"));
        }
        let users = comm.users();
        let dim = n_tx * users;
        let eye_k = CMat::identity(users, users);

        let mut a_mats = Vec::with_capacity(scene.len());
        let mut alpha_sq = Vec::with_capacity(scene.len());
        for target in scene.targets() {
            let a = geom.tx_steering(target.omega());
            a_mats.push(linalg::kron(&eye_k, &(&a * a.adjoint())));
            alpha_sq.push(target.alpha_sq());
        }

        let mut t_hat = Vec::with_capacity(users);
        let mut t_shift = Vec::with_capacity(users);
        let mut lambda_diag = Vec::with_capacity(users);
        let mut beta = Vec::with_capacity(users);
        let mut gamma_abs = Vec::with_capacity(users);
        let mut channel_norm_sq = Vec::with_capacity(users);
        let mut eta = Vec::with_capacity(users);
        for k in 0..users {
            let h = comm.h(k);
            let h_norm_sq = h.norm_squared();
            if h_norm_sq == 0.0 {
                return Err(Error::invalid(format!("channel of user {k} is zero")));
            }
            let gamma_hat = comm.sinr_thresholds()[k];
            let diag: Vec<f64> =
                (0..users).map(|j| if j == k { 1.0 } else { -gamma_hat }).collect();
            let lambda = CMat::from_diagonal(&CVec::from_iterator(users, diag.iter().map(|d| C64::from(*d))));
            let h_conj = h.map(|z| z.conj());
            let th = linalg::kron(&lambda, &(&h_conj * h.transpose()));
            let b = -gamma_hat * h_norm_sq * (1.0 + margin);
            let ts = &th - CMat::identity(dim, dim) * C64::from(b);
            let gamma = gamma_hat * comm.sigma_c_sq;
            t_hat.push(th);
            t_shift.push(ts);
            lambda_diag.push(diag);
            beta.push(b);
            gamma_abs.push(gamma);
            channel_norm_sq.push(h_norm_sq);
            eta.push(gamma - b * e_t);
        }

        let mut a_sum = CMat::zeros(dim, dim);
        for m in a_mats.iter().chain(&t_shift) {
            a_sum += m;
        }
        Ok(Self {
            n_tx,
            users,
            a_mats,
            alpha_sq,
            t_hat,
            t_shift,
            lambda_diag,
            beta,
            gamma_abs,
            sinr_thresholds: comm.sinr_thresholds().to_vec(),
            channel_norm_sq,
            eta,
            a_sum,
            e_t,
            a_s: (e_t / dim as f64).sqrt(),
        })
    }

    pub fn dim(&self) -> usize {
        self.n_tx * self.users
    }

    pub fn targets(&self) -> usize {
        self.a_mats.len()
    }

    /// `w^H A_p w` for every target.
    pub fn target_responses(&self, w: &CVec) -> Vec<f64> {
        self.a_mats.iter().map(|a| linalg::quad_form(a, w)).collect()
    }

    /// `Σ_p 1 / (|α_p|^2 w^H A_p w)`; infinite when a target sits in a null.
    pub fn objective(&self, w: &CVec) -> f64 {
        self.objective_checked(w).unwrap_or(f64::INFINITY)
    }

    /// Like [`objective`](Self::objective) but names the offending target.
    pub fn objective_checked(&self, w: &CVec) -> Result<f64> {
        let mut total = 0.0;
        for (p, (resp, a2)) in self.target_responses(w).iter().zip(&self.alpha_sq).enumerate() {
            let denom = a2 * resp;
            if !(denom > 0.0) {
                return Err(Error::DegenerateBeampattern { target: p });
            }
            total += 1.0 / denom;
        }
        Ok(total)
    }

    pub fn check_feasibility(&self, w: &CVec) -> FeasibilityReport {
        let sinr_slacks =
            self.t_hat.iter().zip(&self.gamma_abs).map(|(t, g)| linalg::quad_form(t, w) - g).collect();
        let shifted_slacks =
            self.t_shift.iter().zip(&self.eta).map(|(t, e)| linalg::quad_form(t, w) - e).collect();
        FeasibilityReport { sinr_slacks, shifted_slacks, energy_slack: self.e_t - w.norm_squared() }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::kernels::EigCache;
    use crate::linalg::{random_complex_matrix, rng};
    use crate::model::{beampattern, BeamformerDesign, Target};
    use proptest::prelude::*;

    fn small_setup(seed: u64, users: usize, gamma_hat: f64) -> (ArrayGeometry, TargetScene, CommScenario) {
        let geom = ArrayGeometry::new(5, 4).unwrap();
        let scene = TargetScene::new(
            vec![
                Target::from_power_db(-20.0, 1.0).unwrap(),
                Target::from_power_db(30.0, -2.0).unwrap(),
            ],
            1.0,
        )
        .unwrap();
        let comm = CommScenario::rayleigh(5, users, seed, 0.7, vec![gamma_hat; users]).unwrap();
        (geom, scene, comm)
    }

    #[test]
    fn vec_examples() {
        let w = CMat::from_column_slice(2, 1, &[C64::new(1.0, 1.0), C64::new(2.0, 0.0)]);
        let v = vec_w(&w);
        assert_eq!(v.as_slice(), &[C64::new(1.0, -1.0), C64::new(2.0, 0.0)]);
        let w = random_complex_matrix(&mut rng(1), 16, 6, 1.0);
        assert_eq!(unvec_w(&vec_w(&w), 16).unwrap(), w);
        assert!(unvec_w(&CVec::zeros(7), 2).is_err());
    }

    #[test]
    fn lambda_for_two_users() {
        let (geom, scene, comm) = small_setup(2, 2, 1.0);
        let prob = VectorizedProblem::build(&geom, &scene, &comm, 1.0).unwrap();
        assert_eq!(prob.lambda_diag[0], vec![1.0, -1.0]);
        assert_eq!(prob.lambda_diag[1], vec![-1.0, 1.0]);
    }

    #[test]
    fn shift_sits_below_smallest_eigenvalue() {
        let (geom, scene, comm) = small_setup(3, 3, 4.0);
        let prob = VectorizedProblem::build(&geom, &scene, &comm, 1.0).unwrap();
        for k in 0..3 {
            let eig = EigCache::new(&prob.t_hat[k]).unwrap();
            let expect = -4.0 * prob.channel_norm_sq[k];
            assert!((eig.min_eigenvalue() - expect).abs() <= 1e-8 * expect.abs());
            assert!(prob.beta[k] < eig.min_eigenvalue());
            let shifted = EigCache::new(&prob.t_shift[k]).unwrap();
            assert!(shifted.min_eigenvalue() >= -1e-10 * prob.t_shift[k].norm());
            assert!(prob.eta[k] > 0.0);
        }
        assert!(EigCache::new(&prob.a_sum).unwrap().min_eigenvalue() >= -1e-9);
    }

    #[test]
    fn trace_identity_matches_quadratic_form() {
        let (geom, scene, comm) = small_setup(4, 3, 2.0);
        let prob = VectorizedProblem::build(&geom, &scene, &comm, 1.0).unwrap();
        let w_mat = random_complex_matrix(&mut rng(5), 5, 3, 1.0);
        let w = vec_w(&w_mat);
        for k in 0..3 {
            let h = comm.h(k);
            let hh = &h * h.adjoint();
            let lambda = CMat::from_diagonal(&CVec::from_iterator(
                3,
                prob.lambda_diag[k].iter().map(|d| C64::from(*d)),
            ));
            let trace = (lambda * w_mat.adjoint() * &hh * &w_mat).trace().re;
            let quad = linalg::quad_form(&prob.t_hat[k], &w);
            assert!((trace - quad).abs() <= 1e-10 * trace.abs().max(1.0));
        }
    }

    #[test]
    fn target_matrices_have_k_equal_eigenvalues() {
        let (geom, scene, comm) = small_setup(6, 3, 2.0);
        let prob = VectorizedProblem::build(&geom, &scene, &comm, 1.0).unwrap();
        for a in &prob.a_mats {
            let eig = EigCache::new(a).unwrap();
            let nonzero: Vec<f64> = eig.eigenvalues().iter().copied().filter(|l| l.abs() > 1e-8).collect();
            assert_eq!(nonzero.len(), 3);
            assert!(nonzero.iter().all(|l| (l - 5.0).abs() < 1e-8));
        }
    }

    #[test]
    fn objective_examples() {
        let geom = ArrayGeometry::new(2, 2).unwrap();
        let scene = TargetScene::new(vec![Target::new(0.0, C64::from(1.0)).unwrap()], 1.0).unwrap();
        let comm = CommScenario::rayleigh(2, 1, 1, 1.0, vec![1.0]).unwrap();
        let prob = VectorizedProblem::build(&geom, &scene, &comm, 1.0).unwrap();
        // a = [1, 1]; w = [1, 0] gives w^H A w = 1, scaled by sqrt(2) gives 2
        let w = CVec::from_vec(vec![C64::from(2f64.sqrt()), C64::from(0.0)]);
        assert!((prob.objective(&w) - 0.5).abs() < 1e-12);
        assert!((prob.objective(&(&w * C64::from(3.0))) - 0.5 / 9.0).abs() < 1e-12);
        let null = CVec::from_vec(vec![C64::from(1.0), C64::from(-1.0)]);
        assert!(prob.objective(&null).is_infinite());
        assert!(matches!(prob.objective_checked(&null), Err(Error::DegenerateBeampattern { target: 0 })));
    }

    #[test]
    fn objective_matches_beampattern() {
        let (geom, scene, comm) = small_setup(7, 3, 2.0);
        let prob = VectorizedProblem::build(&geom, &scene, &comm, 1.0).unwrap();
        let w_mat = random_complex_matrix(&mut rng(8), 5, 3, 1.0);
        let design = BeamformerDesign::from_matrix(w_mat);
        let thetas: Vec<f64> = scene.targets().iter().map(|t| t.theta()).collect();
        let bp = beampattern(&design, &geom, &thetas).unwrap();
        let expect: f64 = bp.iter().zip(&prob.alpha_sq).map(|(b, a)| 1.0 / (a * b)).sum();
        assert!((prob.objective(design.w_vec()) - expect).abs() < 1e-10 * expect);
    }

    #[test]
    fn feasibility_slacks() {
        let (geom, scene, comm) = small_setup(9, 3, 2.0);
        let prob = VectorizedProblem::build(&geom, &scene, &comm, 1.5).unwrap();
        let zero = prob.check_feasibility(&CVec::zeros(15));
        for (s, g) in zero.sinr_slacks.iter().zip(&prob.gamma_abs) {
            assert!((s + g).abs() < 1e-15);
        }
        let w = linalg::random_on_sphere(&mut rng(10), 15, 1.5);
        let rep = prob.check_feasibility(&w);
        for (a, b) in rep.sinr_slacks.iter().zip(&rep.shifted_slacks) {
            assert!((a - b).abs() < 1e-9);
        }
        assert!(rep.energy_slack.abs() < 1e-12);
    }

    #[test]
    fn quadratic_form_equals_sinr_inequality() {
        // w^H T̂_k w ≥ Γ_k  ⇔  SINR_k ≥ Γ̂_k
        let (geom, scene, comm) = small_setup(11, 3, 2.0);
        let prob = VectorizedProblem::build(&geom, &scene, &comm, 1.0).unwrap();
        let w_mat = random_complex_matrix(&mut rng(12), 5, 3, 1.0);
        let design = BeamformerDesign::from_matrix(w_mat);
        let rep = prob.check_feasibility(design.w_vec());
        for k in 0..3 {
            let sinr = crate::model::comm_sinr(&design, &comm, k).unwrap();
            assert_eq!(rep.sinr_slacks[k] >= 0.0, sinr >= 2.0);
        }
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(32))]
        #[test]
        fn objective_invariant_under_unitary_mixing(seed in 0u64..1000) {
            let (geom, scene, comm) = small_setup(13, 3, 2.0);
            let prob = VectorizedProblem::build(&geom, &scene, &comm, 1.0).unwrap();
            let mut r = rng(seed);
            let w_mat = random_complex_matrix(&mut r, 5, 3, 1.0);
            let q = random_complex_matrix(&mut r, 3, 3, 1.0).qr().q();
            let before = prob.objective(&vec_w(&w_mat));
            let after = prob.objective(&vec_w(&(&w_mat * q)));
            prop_assert!((before - after).abs() <= 1e-9 * before);
        }

        #[test]
        fn vectorization_consistency(seed in 0u64..1000) {
            let (geom, scene, comm) = small_setup(14, 2, 2.0);
            let prob = VectorizedProblem::build(&geom, &scene, &comm, 1.0).unwrap();
            let w_mat = random_complex_matrix(&mut rng(seed), 5, 2, 1.0);
            let w = vec_w(&w_mat);
            for (p, target) in scene.targets().iter().enumerate() {
                let a = geom.tx_steering(target.omega());
                let direct = (a.transpose() * &w_mat * w_mat.adjoint() * a.map(|z| z.conj()))[(0, 0)].re;
                let quad = linalg::quad_form(&prob.a_mats[p], &w);
                prop_assert!((direct - quad).abs() <= 1e-10 * direct.max(1.0));
            }
        }
    }
}
