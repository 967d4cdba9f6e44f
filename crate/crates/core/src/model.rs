//! Physical layer: array geometry, steering vectors, target scene,
//! downlink channel, transmit beampattern and user SINR.

use std::f64::consts::PI;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::linalg::{self, CMat, CVec, C64, J};

/// Spatial frequency of a half-wavelength ULA for an angle in degrees.
pub fn spatial_frequency(theta_deg: f64) -> f64 {
    PI * theta_deg.to_radians().sin()
}

/// Inverse of [`spatial_frequency`] on `[-π, π]`.
pub fn angle_from_frequency(omega: f64) -> f64 {
    (omega / PI).clamp(-1.0, 1.0).asin().to_degrees()
}

/// `a(ω)` with entries `exp(j m ω)`, phase reference at element 0.
pub fn steering(n: usize, omega: f64) -> Result<CVec> {
    if n == 0 {
        return Err(Error::invalid("steering vector length must be positive"));
    }
    Ok(steering_unchecked(n, omega))
}

/// `∂a(ω)/∂ω` with entries `j m exp(j m ω)`.
pub fn steering_derivative(n: usize, omega: f64) -> Result<CVec> {
    if n == 0 {
        return Err(Error::invalid("steering vector length must be positive"));
    }
    Ok(steering_derivative_unchecked(n, omega))
}

pub(crate) fn steering_unchecked(n: usize, omega: f64) -> CVec {
    CVec::from_iterator(n, (0..n).map(|m| C64::from_polar(1.0, m as f64 * omega)))
}

pub(crate) fn steering_derivative_unchecked(n: usize, omega: f64) -> CVec {
    CVec::from_iterator(
        n,
        (0..n).map(|m| J * m as f64 * C64::from_polar(1.0, m as f64 * omega)),
    )
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ArrayGeometry {
    pub n_tx: usize,
    pub n_rx: usize,
    /// Transmit inter-element spacing in wavelengths. The receive side is
    /// always a half-wavelength ULA.
    pub tx_spacing: f64,
}

impl ArrayGeometry {
    pub fn new(n_tx: usize, n_rx: usize) -> Result<Self> {
        Self::with_tx_spacing(n_tx, n_rx, 0.5)
    }

    pub fn with_tx_spacing(n_tx: usize, n_rx: usize, tx_spacing: f64) -> Result<Self> {
        if n_tx == 0 || n_rx == 0 {
            return Err(Error::invalid("array sizes must be positive"));
        }
        if !(tx_spacing > 0.0 && tx_spacing.is_finite()) {
            return Err(Error::invalid("transmit spacing must be positive"));
        }
        Ok(Self { n_tx, n_rx, tx_spacing })
    }

    fn tx_scale(&self) -> f64 {
        2.0 * self.tx_spacing
    }

    /// Transmit steering vector at half-wavelength spatial frequency `omega`.
    pub fn tx_steering(&self, omega: f64) -> CVec {
        steering_unchecked(self.n_tx, omega * self.tx_scale())
    }

    /// Derivative of [`tx_steering`](Self::tx_steering) with respect to `omega`.
    pub fn tx_steering_derivative(&self, omega: f64) -> CVec {
        steering_derivative_unchecked(self.n_tx, omega * self.tx_scale()) * C64::from(self.tx_scale())
    }

    pub fn rx_steering(&self, omega: f64) -> CVec {
        steering_unchecked(self.n_rx, omega)
    }

    pub fn rx_steering_derivative(&self, omega: f64) -> CVec {
        steering_derivative_unchecked(self.n_rx, omega)
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Target {
    theta: f64,
    omega: f64,
    pub alpha: C64,
}

impl Target {
    pub fn new(theta_deg: f64, alpha: C64) -> Result<Self> {
        if !theta_deg.is_finite() || theta_deg.abs() > 90.0 {
            return Err(Error::invalid(format!("target angle {theta_deg} outside [-90, 90] degrees")));
        }
        if !(alpha.norm() > 0.0) {
            return Err(Error::invalid("target amplitude must be nonzero"));
        }
        Ok(Self { theta: theta_deg, omega: spatial_frequency(theta_deg), alpha })
    }

    /// Real positive amplitude with the given power in dB.
    pub fn from_power_db(theta_deg: f64, power_db: f64) -> Result<Self> {
        Self::new(theta_deg, C64::from(linalg::db_to_linear(power_db).sqrt()))
    }

    pub fn theta(&self) -> f64 {
        self.theta
    }

    pub fn omega(&self) -> f64 {
        self.omega
    }

    pub fn alpha_sq(&self) -> f64 {
        self.alpha.norm_sqr()
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct TargetScene {
    targets: Vec<Target>,
    pub sigma_r_sq: f64,
}

impl TargetScene {
    pub fn new(targets: Vec<Target>, sigma_r_sq: f64) -> Result<Self> {
        if targets.is_empty() {
            return Err(Error::invalid("scene needs at least one target"));
        }
        if !(sigma_r_sq > 0.0) {
            return Err(Error::invalid("radar noise power must be positive"));
        }
        for (i, a) in targets.iter().enumerate() {
            for b in &targets[i + 1..] {
                if a.omega == b.omega {
                    return Err(Error::invalid("target spatial frequencies must be distinct"));
                }
            }
        }
        Ok(Self { targets, sigma_r_sq })
    }

    pub fn targets(&self) -> &[Target] {
        &self.targets
    }

    pub fn len(&self) -> usize {
        self.targets.len()
    }

    pub fn is_empty(&self) -> bool {
        self.targets.is_empty()
    }

    pub fn omegas(&self) -> Vec<f64> {
        self.targets.iter().map(Target::omega).collect()
    }

    pub fn with_sigma_r_sq(&self, sigma_r_sq: f64) -> Result<Self> {
        Self::new(self.targets.clone(), sigma_r_sq)
    }

    pub fn with_alphas(&self, alphas: &[C64]) -> Result<Self> {
        if alphas.len() != self.len() {
            return Err(Error::invalid("amplitude count does not match target count"));
        }
        let targets = self
            .targets
            .iter()
            .zip(alphas)
            .map(|(t, &a)| Target { alpha: a, ..*t })
            .collect();
        Ok(Self { targets, sigma_r_sq: self.sigma_r_sq })
    }

    /// Transmit steering matrix `A_T` (columns `a_T(ω_p)`).
    pub fn tx_steering_matrix(&self, geom: &ArrayGeometry) -> CMat {
        CMat::from_columns(&self.targets.iter().map(|t| geom.tx_steering(t.omega)).collect::<Vec<_>>())
    }

    pub fn tx_derivative_matrix(&self, geom: &ArrayGeometry) -> CMat {
        CMat::from_columns(
            &self.targets.iter().map(|t| geom.tx_steering_derivative(t.omega)).collect::<Vec<_>>(),
        )
    }

    pub fn rx_steering_matrix(&self, geom: &ArrayGeometry) -> CMat {
        CMat::from_columns(&self.targets.iter().map(|t| geom.rx_steering(t.omega)).collect::<Vec<_>>())
    }

    pub fn rx_derivative_matrix(&self, geom: &ArrayGeometry) -> CMat {
        CMat::from_columns(
            &self.targets.iter().map(|t| geom.rx_steering_derivative(t.omega)).collect::<Vec<_>>(),
        )
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct CommScenario {
    channel: CMat,
    pub sigma_c_sq: f64,
    sinr_thresholds: Vec<f64>,
}

impl CommScenario {
    /// `channel` is `N_T x K` with column `k` holding `h_k`; thresholds are linear.
    pub fn new(channel: CMat, sigma_c_sq: f64, sinr_thresholds: Vec<f64>) -> Result<Self> {
        let k = channel.ncols();
        if k == 0 {
            return Err(Error::invalid("at least one user is required"));
        }
        if sinr_thresholds.len() != k {
            return Err(Error::invalid(format!(
                "{} SINR thresholds for {k} users",
                sinr_thresholds.len()
            )));
        }
        if !(sigma_c_sq > 0.0) {
            return Err(Error::invalid("communication noise power must be positive"));
        }
        if let Some(bad) = sinr_thresholds.iter().position(|&g| !(g > 0.0 && g.is_finite())) {
            return Err(Error::invalid(format!("SINR threshold of user {} must be positive", bad + 1)));
        }
        for (i, col) in channel.column_iter().enumerate() {
            if col.norm() == 0.0 {
                return Err(Error::invalid(format!("channel of user {} is zero", i + 1)));
            }
        }
        Ok(Self { channel, sigma_c_sq, sinr_thresholds })
    }

    /// Flat Rayleigh channel with i.i.d. unit-variance entries.
    pub fn rayleigh(
        n_tx: usize,
        users: usize,
        seed: u64,
        sigma_c_sq: f64,
        sinr_thresholds: Vec<f64>,
    ) -> Result<Self> {
        let mut rng = linalg::rng(seed);
        let h = linalg::random_complex_matrix(&mut rng, n_tx, users, 1.0);
        Self::new(h, sigma_c_sq, sinr_thresholds)
    }

    pub fn channel(&self) -> &CMat {
        &self.channel
    }

    pub fn users(&self) -> usize {
        self.channel.ncols()
    }

    pub fn h(&self, k: usize) -> CVec {
        self.channel.column(k).into_owned()
    }

    pub fn sinr_thresholds(&self) -> &[f64] {
        &self.sinr_thresholds
    }

    /// The first `users` columns with their thresholds.
    pub fn truncated(&self, users: usize) -> Result<Self> {
        if users == 0 || users > self.users() {
            return Err(Error::invalid("truncated user count out of range"));
        }
        Self::new(
            self.channel.columns(0, users).into_owned(),
            self.sigma_c_sq,
            self.sinr_thresholds[..users].to_vec(),
        )
    }

    pub fn with_thresholds(&self, thresholds: Vec<f64>) -> Result<Self> {
        Self::new(self.channel.clone(), self.sigma_c_sq, thresholds)
    }
}

/// Beamforming matrix `W` (`N_T x K`) together with `w = vec(conj(W))`.
#[derive(Debug, Clone, PartialEq)]
pub struct BeamformerDesign {
    w_matrix: CMat,
    w_vec: CVec,
    energy: f64,
    /// Which solver (and mode) produced the design.
    pub label: String,
}

impl BeamformerDesign {
    pub fn from_matrix(w_matrix: CMat) -> Self {
        let w_vec = crate::problem::vec_w(&w_matrix);
        let energy = w_vec.norm_squared();
        Self { w_matrix, w_vec, energy, label: "manual".into() }
    }

    pub fn from_vec(w_vec: CVec, n_tx: usize) -> Result<Self> {
        let w_matrix = crate::problem::unvec_w(&w_vec, n_tx)?;
        let energy = w_vec.norm_squared();
        Ok(Self { w_matrix, w_vec, energy, label: "manual".into() })
    }

    pub fn labelled(mut self, label: impl Into<String>) -> Self {
        self.label = label.into();
        self
    }

    pub fn w_matrix(&self) -> &CMat {
        &self.w_matrix
    }

    pub fn w_vec(&self) -> &CVec {
        &self.w_vec
    }

    /// `tr(W W^H)`.
    pub fn energy(&self) -> f64 {
        self.energy
    }

    pub fn n_tx(&self) -> usize {
        self.w_matrix.nrows()
    }

    pub fn users(&self) -> usize {
        self.w_matrix.ncols()
    }
}

/// Transmit beampattern `a_T(θ)^T W W^H a_T(θ)^*` at each angle (degrees).
pub fn beampattern(design: &BeamformerDesign, geom: &ArrayGeometry, thetas_deg: &[f64]) -> Result<Vec<f64>> {
    if design.n_tx() != geom.n_tx {
        return Err(Error::invalid("design and geometry disagree on N_T"));
    }
    thetas_deg
        .iter()
        .map(|&theta| {
            if !theta.is_finite() {
                return Err(Error::invalid("beampattern angle must be finite"));
            }
            Ok(beampattern_at_omega(design.w_matrix(), geom, spatial_frequency(theta)))
        })
        .collect()
}

pub(crate) fn beampattern_at_omega(w: &CMat, geom: &ArrayGeometry, omega: f64) -> f64 {
    let a = geom.tx_steering(omega);
    // a^T W is a row; its squared norm is the beampattern
    (a.transpose() * w).norm_squared()
}

/// SINR of user `k` (0-based).
pub fn comm_sinr(design: &BeamformerDesign, comm: &CommScenario, k: usize) -> Result<f64> {
    if k >= comm.users() {
        return Err(Error::invalid(format!("user index {k} out of range (K = {})", comm.users())));
    }
    if design.n_tx() != comm.channel().nrows() || design.users() != comm.users() {
        return Err(Error::invalid("design and channel dimensions disagree"));
    }
    let h = comm.channel().column(k);
    let gains = h.adjoint() * design.w_matrix();
    let signal = gains[(0, k)].norm_sqr();
    let interference: f64 = (0..comm.users()).filter(|&j| j != k).map(|j| gains[(0, j)].norm_sqr()).sum();
    Ok(signal / (interference + comm.sigma_c_sq))
}

pub fn comm_sinrs(design: &BeamformerDesign, comm: &CommScenario) -> Result<Vec<f64>> {
    (0..comm.users()).map(|k| comm_sinr(design, comm, k)).collect()
}

/// Noise power of the reference scenario relative to a unit energy budget:
/// 0 dBm against 0 dBW, i.e. -30 dB. With unit noise a 15 dB SINR floor is
/// out of reach, since `SINR_k ≤ ||h_k||^2 e_T / σ_C^2` and `||h_k||^2 ≈ N_T`.
pub const REFERENCE_NOISE_POWER: f64 = 1e-3;

/// The single input record every solver and evaluator consumes.
#[derive(Debug, Clone, PartialEq)]
pub struct Scenario {
    pub geometry: ArrayGeometry,
    pub scene: TargetScene,
    pub comm: CommScenario,
    /// Per-snapshot energy budget `e_T`.
    pub energy: f64,
    /// Code length `L`.
    pub code_length: usize,
}

impl Scenario {
    pub fn new(
        geometry: ArrayGeometry,
        scene: TargetScene,
        comm: CommScenario,
        energy: f64,
        code_length: usize,
    ) -> Result<Self> {
        if comm.channel().nrows() != geometry.n_tx {
            return Err(Error::invalid("channel rows must equal N_T"));
        }
        if comm.users() > geometry.n_tx {
            return Err(Error::invalid(format!(
                "K = {} users exceeds N_T = {} transmit antennas",
                comm.users(),
                geometry.n_tx
            )));
        }
        if !(energy > 0.0 && energy.is_finite()) {
            return Err(Error::invalid("energy budget must be positive"));
        }
        if code_length == 0 {
            return Err(Error::invalid("code length must be positive"));
        }
        Ok(Self { geometry, scene, comm, energy, code_length })
    }

    /// The reference configuration used throughout the evaluation: 16 x 20
    /// arrays, targets at -5 and 15 degrees with unit power, six users at a
    /// 15 dB SINR floor over a seeded Rayleigh channel, unit energy and
    /// noise powers of [`REFERENCE_NOISE_POWER`].
    pub fn reference(channel_seed: u64) -> Self {
        Self::reference_with(channel_seed, 6, 15.0)
    }

    pub fn reference_with(channel_seed: u64, users: usize, sinr_db: f64) -> Self {
        let geometry = ArrayGeometry::new(16, 20).expect("valid geometry");
        let scene = TargetScene::new(
            vec![
                Target::from_power_db(-5.0, 0.0).expect("valid target"),
                Target::from_power_db(15.0, 0.0).expect("valid target"),
            ],
            REFERENCE_NOISE_POWER,
        )
        .expect("valid scene");
        let comm = CommScenario::rayleigh(
            16,
            users,
            channel_seed,
            REFERENCE_NOISE_POWER,
            vec![linalg::db_to_linear(sinr_db); users],
        )
            .expect("valid channel");
        Self::new(geometry, scene, comm, 1.0, 30).expect("valid scenario")
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn close(a: C64, b: C64, tol: f64) -> bool {
        (a - b).norm() <= tol
    }

    #[test]
    fn steering_trivial_cases() {
        let a = steering(4, 0.0).unwrap();
        assert!(a.iter().all(|&z| z == C64::new(1.0, 0.0)));
        let a = steering(4, PI).unwrap();
        let expect = [1.0, -1.0, 1.0, -1.0];
        for (z, e) in a.iter().zip(expect) {
            assert!(close(*z, C64::from(e), 1e-12));
        }
        assert!(steering(0, 0.3).is_err());
        assert!(steering_derivative(0, 0.3).is_err());
    }

    #[test]
    fn steering_matches_elementwise_exponential() {
        let a = steering(3, 0.7).unwrap();
        for m in 0..3 {
            let angle = 0.7 * m as f64;
            let oracle = C64::new(angle.cos(), angle.sin());
            assert!(close(a[m], oracle, 1e-15));
        }
        assert_eq!(a[0], C64::new(1.0, 0.0));
    }

    #[test]
    fn steering_derivative_trivial_cases() {
        let d = steering_derivative(4, 0.0).unwrap();
        for m in 0..4 {
            assert!(close(d[m], C64::new(0.0, m as f64), 1e-15));
        }
        let d = steering_derivative(2, PI / 2.0).unwrap();
        assert_eq!(d[0], C64::new(0.0, 0.0));
        assert!(close(d[1], C64::new(-1.0, 0.0), 1e-15));
    }

    fn finite_difference(n: usize, omega: f64) -> CVec {
        let h = 1e-6;
        (steering(n, omega + h).unwrap() - steering(n, omega - h).unwrap()) / C64::from(2.0 * h)
    }

    #[test]
    fn steering_derivative_matches_finite_difference() {
        let d = steering_derivative(8, 0.3).unwrap();
        let fd = finite_difference(8, 0.3);
        assert!((&d - &fd).norm() <= 1e-6 * d.norm());
    }

    #[test]
    fn spatial_frequency_values() {
        assert_eq!(spatial_frequency(0.0), 0.0);
        assert!((spatial_frequency(90.0) - PI).abs() < 1e-15);
        // π·sin(15°) evaluated independently
        assert!((spatial_frequency(15.0) - 0.813_104_010_7).abs() < 1e-9);
        assert!((angle_from_frequency(spatial_frequency(-37.0)) + 37.0).abs() < 1e-12);
    }

    #[test]
    fn beampattern_trivial_designs() {
        let geom = ArrayGeometry::new(4, 4).unwrap();
        let mut w = CMat::zeros(4, 1);
        w[(0, 0)] = C64::from(1.0);
        let design = BeamformerDesign::from_matrix(w);
        let grid: Vec<f64> = (-90..=90).step_by(15).map(f64::from).collect();
        for v in beampattern(&design, &geom, &grid).unwrap() {
            assert!((v - 1.0).abs() < 1e-12);
        }
        let design = BeamformerDesign::from_matrix(CMat::identity(4, 4));
        for v in beampattern(&design, &geom, &grid).unwrap() {
            assert!((v - 4.0).abs() < 1e-12);
        }
    }

    #[test]
    fn beampattern_is_column_sum() {
        let geom = ArrayGeometry::new(6, 4).unwrap();
        let mut rng = linalg::rng(11);
        let w = linalg::random_complex_matrix(&mut rng, 6, 3, 1.0);
        let design = BeamformerDesign::from_matrix(w.clone());
        let grid: Vec<f64> = (0..=360).map(|i| -90.0 + 0.5 * i as f64).collect();
        let values = beampattern(&design, &geom, &grid).unwrap();
        for (theta, v) in grid.iter().zip(values) {
            let omega = spatial_frequency(*theta);
            let mut oracle = 0.0;
            for k in 0..3 {
                let mut acc = C64::new(0.0, 0.0);
                for m in 0..6 {
                    acc += C64::from_polar(1.0, m as f64 * omega) * w[(m, k)];
                }
                oracle += acc.norm_sqr();
            }
            assert!(v >= 0.0);
            assert!((v - oracle).abs() <= 1e-10 * oracle.max(1.0));
        }
    }

    #[test]
    fn sinr_single_user_and_zero_numerator() {
        let mut rng = linalg::rng(5);
        let h = linalg::random_complex_matrix(&mut rng, 4, 1, 1.0);
        let comm = CommScenario::new(h.clone(), 0.5, vec![1.0]).unwrap();
        let w = linalg::random_complex_matrix(&mut rng, 4, 1, 1.0);
        let design = BeamformerDesign::from_matrix(w.clone());
        let expect = (h.adjoint() * &w)[(0, 0)].norm_sqr() / 0.5;
        assert!((comm_sinr(&design, &comm, 0).unwrap() - expect).abs() < 1e-12 * expect);

        // column orthogonal to h_k
        let hk = h.column(0);
        let mut w0 = CVec::zeros(4);
        w0[0] = hk[1].conj();
        w0[1] = -hk[0].conj();
        let design = BeamformerDesign::from_matrix(CMat::from_columns(&[w0]));
        assert!(comm_sinr(&design, &comm, 0).unwrap().abs() < 1e-14);
        assert!(comm_sinr(&design, &comm, 1).is_err());
    }

    #[test]
    fn sinr_matches_direct_formula() {
        let mut rng = linalg::rng(8);
        let h = linalg::random_complex_matrix(&mut rng, 5, 3, 1.0);
        let w = linalg::random_complex_matrix(&mut rng, 5, 3, 1.0);
        let comm = CommScenario::new(h.clone(), 0.7, vec![2.0; 3]).unwrap();
        let design = BeamformerDesign::from_matrix(w.clone());
        for k in 0..3 {
            let gain = |j: usize| -> f64 {
                let mut acc = C64::new(0.0, 0.0);
                for m in 0..5 {
                    acc += h[(m, k)].conj() * w[(m, j)];
                }
                acc.norm_sqr()
            };
            let interference: f64 = (0..3).filter(|&j| j != k).map(gain).sum();
            let oracle = gain(k) / (interference + 0.7);
            let got = comm_sinr(&design, &comm, k).unwrap();
            assert!((got - oracle).abs() <= 1e-12 * oracle);
        }
    }

    #[test]
    fn scenario_rejects_too_many_users() {
        let geom = ArrayGeometry::new(2, 4).unwrap();
        let scene = TargetScene::new(vec![Target::from_power_db(0.0, 0.0).unwrap()], 1.0).unwrap();
        let comm = CommScenario::rayleigh(2, 3, 1, 1.0, vec![1.0; 3]).unwrap();
        let err = Scenario::new(geom, scene, comm, 1.0, 30).unwrap_err();
        assert!(err.to_string().contains("exceeds N_T"));
    }

    #[test]
    fn scene_rejects_duplicate_frequencies() {
        let t = Target::from_power_db(10.0, 0.0).unwrap();
        assert!(TargetScene::new(vec![t, t], 1.0).is_err());
        assert!(TargetScene::new(vec![], 1.0).is_err());
        assert!(Target::new(5.0, C64::new(0.0, 0.0)).is_err());
    }

    proptest! {
        #[test]
        fn steering_has_unit_modulus_entries(n in 1usize..32, omega in -10.0f64..10.0) {
            let a = steering(n, omega).unwrap();
            prop_assert!((a.norm_squared() - n as f64).abs() < 1e-9 * n as f64);
        }

        #[test]
        fn derivative_tracks_finite_differences(n in 1usize..16, omega in -3.0f64..3.0) {
            let d = steering_derivative(n, omega).unwrap();
            let fd = finite_difference(n, omega);
            prop_assert!((&d - &fd).norm() <= 1e-6 * d.norm().max(1e-3));
        }

        #[test]
        fn sinr_ignores_channel_phase(seed in 0u64..500, phase in -3.0f64..3.0) {
            let mut rng = linalg::rng(seed);
            let h = linalg::random_complex_matrix(&mut rng, 4, 2, 1.0);
            let w = linalg::random_complex_matrix(&mut rng, 4, 2, 1.0);
            let design = BeamformerDesign::from_matrix(w);
            let a = CommScenario::new(h.clone(), 1.0, vec![1.0, 1.0]).unwrap();
            let rotated = h.map(|z| z * C64::from_polar(1.0, phase));
            let b = CommScenario::new(rotated, 1.0, vec![1.0, 1.0]).unwrap();
            for k in 0..2 {
                let x = comm_sinr(&design, &a, k).unwrap();
                let y = comm_sinr(&design, &b, k).unwrap();
                prop_assert!((x - y).abs() <= 1e-10 * x.max(1e-12));
            }
        }
    }
}
