//! Monte-Carlo evaluation: 16-QAM data, radar snapshots, maximum-likelihood
//! angle estimation with RMSE, and symbol error rates at the users.

use rand::Rng as _;
use rayon::prelude::*;
use statrs::function::erf::erfc;

use crate::error::{Error, Result};
use crate::fisher::{covariance_from_beamformer, crb_report, CrbReport};
use crate::linalg::{self, CMat, CVec, C64};
use crate::model::{ArrayGeometry, BeamformerDesign, CommScenario, TargetScene};

const QAM_LEVELS: [f64; 4] = [-3.0, -1.0, 1.0, 3.0];

fn qam_scale() -> f64 {
    10f64.sqrt().recip()
}

/// The 16 points of the unit-power square constellation.
pub fn qam16_constellation() -> Vec<C64> {
    let s = qam_scale();
    QAM_LEVELS.iter().flat_map(|&re| QAM_LEVELS.iter().map(move |&im| C64::new(re * s, im * s))).collect()
}

fn nearest_level(x: f64) -> f64 {
    // odd integer closest to x, clipped to ±3
    let odd = 2.0 * ((x - 1.0) / 2.0).round() + 1.0;
    odd.clamp(-3.0, 3.0)
}

/// Minimum-distance 16-QAM decision.
pub fn qam16_detect(z: C64) -> C64 {
    let s = qam_scale();
    C64::new(nearest_level(z.re / s) * s, nearest_level(z.im / s) * s)
}

/// Closed-form symbol error rate of 16-QAM in AWGN at `E|s|^2 / σ^2 = snr`.
pub fn qam16_ser_awgn(snr: f64) -> f64 {
    let q = 0.5 * erfc((snr / 5.0).sqrt() / std::f64::consts::SQRT_2);
    // 1 - (1 - 1.5 q)^2 without the cancellation at high SNR
    q * (3.0 - 2.25 * q)
}

#[derive(Debug, Clone, PartialEq)]
pub struct QamStream {
    /// `K x L` symbols, unit average power per stream.
    pub symbols: CMat,
    pub seed: u64,
}

pub fn gen_qam(k: usize, l: usize, seed: u64) -> Result<QamStream> {
    if k == 0 || l == 0 {
        return Err(Error::invalid("QAM stream needs at least one user and one symbol"));
    }
    let points = qam16_constellation();
    let mut rng = linalg::rng(seed);
    let mut symbols = CMat::zeros(k, l);
    for c in 0..l {
        for r in 0..k {
            symbols[(r, c)] = points[rng.random_range(0..points.len())];
        }
    }
    Ok(QamStream { symbols, seed })
}

/// Noise-free echo `A_R diag(α) A_T^T X`.
pub fn radar_mean(scene: &TargetScene, geom: &ArrayGeometry, x: &CMat) -> Result<CMat> {
    if x.nrows() != geom.n_tx {
        return Err(Error::invalid("waveform rows must equal the number of transmit antennas"));
    }
    let a_r = scene.rx_steering_matrix(geom);
    let a_t = scene.tx_steering_matrix(geom);
    let b = CMat::from_diagonal(&CVec::from_iterator(scene.len(), scene.targets().iter().map(|t| t.alpha)));
    Ok(a_r * b * a_t.transpose() * x)
}

/// Received radar block for `X = W S` plus circular Gaussian noise of
/// variance `sigma_r_sq` per entry.
pub fn radar_snapshot(
    scene: &TargetScene,
    geom: &ArrayGeometry,
    design: &BeamformerDesign,
    data: &QamStream,
    sigma_r_sq: f64,
    seed: u64,
) -> Result<CMat> {
    if design.users() != data.symbols.nrows() {
        return Err(Error::invalid("stream count must equal the number of beamformer columns"));
    }
    if !(sigma_r_sq >= 0.0) {
        return Err(Error::invalid("noise power must be nonnegative"));
    }
    let x = design.w_matrix() * &data.symbols;
    let mean = radar_mean(scene, geom, &x)?;
    if sigma_r_sq == 0.0 {
        return Ok(mean);
    }
    let mut rng = linalg::rng(seed);
    Ok(mean + linalg::random_complex_matrix(&mut rng, geom.n_rx, x.ncols(), sigma_r_sq))
}

/// Search settings for [`mle_angles`].
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct MleGrid {
    /// Coarse grid points over `ω ∈ [-π, π)`.
    pub points: usize,
    /// Alternating refinement sweeps.
    pub rounds: usize,
}

impl Default for MleGrid {
    fn default() -> Self {
        Self { points: 256, rounds: 3 }
    }
}

impl MleGrid {
    pub fn cell(&self) -> f64 {
        2.0 * std::f64::consts::PI / self.points as f64
    }

    pub fn omega(&self, i: usize) -> f64 {
        -std::f64::consts::PI + i as f64 * self.cell()
    }
}

/// Concentrated likelihood of the echo model with amplitudes solved out.
///
/// Column `p` of the regressor is `(X^T a_T(ω_p)) ⊗ a_R(ω_p)`; its inner
/// products with the data and with each other reduce to `Y X^H` and `X X^H`.
struct Concentrated<'a> {
    geom: &'a ArrayGeometry,
    y_x: CMat,
    r_conj: CMat,
    energy: f64,
}

impl<'a> Concentrated<'a> {
    fn new(y: &CMat, x: &CMat, geom: &'a ArrayGeometry) -> Self {
        Self {
            geom,
            y_x: y * x.adjoint(),
            r_conj: (x * x.adjoint()).map(|z| z.conj()),
            energy: y.norm_squared(),
        }
    }

    fn projection(&self, a_r: &CVec, a_t: &CVec) -> C64 {
        a_r.dotc(&(&self.y_x * a_t.map(|z| z.conj())))
    }

    fn gram(&self, a_r: &[CVec], a_t: &[CVec]) -> CMat {
        let p = a_r.len();
        CMat::from_fn(p, p, |i, j| a_r[i].dotc(&a_r[j]) * a_t[i].dotc(&(&self.r_conj * &a_t[j])))
    }

    /// Fitted energy `c^H G^{-1} c`; `None` when the regressor is rank
    /// deficient.
    fn fit(&self, omegas: &[f64]) -> Option<f64> {
        let a_r: Vec<CVec> = omegas.iter().map(|w| self.geom.rx_steering(*w)).collect();
        let a_t: Vec<CVec> = omegas.iter().map(|w| self.geom.tx_steering(*w)).collect();
        let c = CVec::from_iterator(omegas.len(), a_r.iter().zip(&a_t).map(|(r, t)| self.projection(r, t)));
        let gram = self.gram(&a_r, &a_t);
        let scale = gram.diagonal().iter().map(|z| z.re).fold(0.0, f64::max);
        let chol = gram.cholesky()?;
        let diag_min = chol.l_dirty().diagonal().iter().map(|z| z.re).fold(f64::INFINITY, f64::min);
        if !(diag_min * diag_min > 1e-12 * scale) {
            return None;
        }
        Some(c.dotc(&chol.solve(&c)).re)
    }

    fn cost(&self, omegas: &[f64]) -> f64 {
        self.fit(omegas).map_or(f64::INFINITY, |f| self.energy - f)
    }
}

fn wrap(omega: f64) -> f64 {
    let two_pi = 2.0 * std::f64::consts::PI;
    (omega + std::f64::consts::PI).rem_euclid(two_pi) - std::f64::consts::PI
}

/// Maximum-likelihood spatial frequencies of `p` targets from one snapshot
/// `y` of the known waveform `x`; returned sorted.
///
/// A coarse joint grid (pairs for two targets, greedy beyond that) seeds
/// alternating one-dimensional refinements that walk downhill and finish
/// with a parabolic fit, the bracket shrinking tenfold every round.
pub fn mle_angles(y: &CMat, x: &CMat, geom: &ArrayGeometry, p: usize, grid: &MleGrid) -> Result<Vec<f64>> {
    if p == 0 {
        return Err(Error::invalid("need at least one target"));
    }
    if grid.points < 2 * p || grid.rounds == 0 {
        return Err(Error::invalid("MLE grid too coarse"));
    }
    if y.nrows() != geom.n_rx || x.nrows() != geom.n_tx || y.ncols() != x.ncols() {
        return Err(Error::invalid("snapshot and waveform dimensions disagree"));
    }
    let conc = Concentrated::new(y, x, geom);
    let mut est = coarse_search(&conc, p, grid)?;

    let mut delta = grid.cell() / 2.0;
    for _ in 0..grid.rounds {
        for i in 0..p {
            refine_one(&conc, &mut est, i, delta);
        }
        delta /= 10.0;
    }
    if conc.fit(&est).is_none() {
        return Err(Error::EstimationDegenerate("regressor is rank deficient at the estimate".into()));
    }
    est.sort_by(f64::total_cmp);
    Ok(est)
}

fn coarse_search(conc: &Concentrated<'_>, p: usize, grid: &MleGrid) -> Result<Vec<f64>> {
    let n = grid.points;
    let a_r: Vec<CVec> = (0..n).map(|i| conc.geom.rx_steering(grid.omega(i))).collect();
    let a_t: Vec<CVec> = (0..n).map(|i| conc.geom.tx_steering(grid.omega(i))).collect();
    let c: Vec<C64> = (0..n).map(|i| conc.projection(&a_r[i], &a_t[i])).collect();
    let ra: Vec<CVec> = a_t.iter().map(|t| &conc.r_conj * t).collect();
    let d: Vec<f64> = (0..n).map(|i| a_r[i].norm_squared() * a_t[i].dotc(&ra[i]).re).collect();
    let single = |i: usize| if d[i] > 0.0 { c[i].norm_sqr() / d[i] } else { 0.0 };

    let degenerate = || Error::EstimationDegenerate("no resolvable grid point".into());
    if p == 1 {
        let best = (0..n).max_by(|&a, &b| single(a).total_cmp(&single(b))).ok_or_else(degenerate)?;
        return Ok(vec![grid.omega(best)]);
    }
    if p == 2 {
        let mut best = (f64::NEG_INFINITY, 0, 0);
        for i in 0..n {
            for j in (i + 1)..n {
                let off = a_r[i].dotc(&a_r[j]) * a_t[i].dotc(&ra[j]);
                let det = d[i] * d[j] - off.norm_sqr();
                if !(det > 1e-9 * d[i] * d[j]) {
                    continue;
                }
                // c^H G^{-1} c for the 2x2 Gram matrix
                let fit = (d[j] * c[i].norm_sqr() + d[i] * c[j].norm_sqr() - 2.0 * (c[i].conj() * off * c[j]).re) / det;
                if fit > best.0 {
                    best = (fit, i, j);
                }
            }
        }
        if !best.0.is_finite() {
            return Err(degenerate());
        }
        return Ok(vec![grid.omega(best.1), grid.omega(best.2)]);
    }
    // greedy: add one target at a time against those already placed
    let mut est: Vec<f64> = Vec::with_capacity(p);
    for _ in 0..p {
        let mut best = (f64::NEG_INFINITY, 0.0);
        for i in 0..n {
            let w = grid.omega(i);
            if est.iter().any(|e| (e - w).abs() < 0.5 * grid.cell()) {
                continue;
            }
            let mut trial = est.clone();
            trial.push(w);
            if let Some(f) = conc.fit(&trial) {
                if f > best.0 {
                    best = (f, w);
                }
            }
        }
        if !best.0.is_finite() {
            return Err(degenerate());
        }
        est.push(best.1);
    }
    Ok(est)
}

fn refine_one(conc: &Concentrated<'_>, est: &mut [f64], i: usize, delta: f64) {
    const MAX_WALK: usize = 64;
    let at = |w: f64, est: &mut [f64]| {
        let keep = est[i];
        est[i] = wrap(w);
        let c = conc.cost(est);
        est[i] = keep;
        c
    };
    let mut center = est[i];
    let mut f0 = at(center, est);
    for _ in 0..MAX_WALK {
        let fm = at(center - delta, est);
        let fp = at(center + delta, est);
        if fm < f0 && fm <= fp {
            center -= delta;
            f0 = fm;
        } else if fp < f0 {
            center += delta;
            f0 = fp;
        } else {
            let curvature = fm - 2.0 * f0 + fp;
            if curvature > 0.0 {
                let cand = center + 0.5 * delta * (fm - fp) / curvature;
                let fc = at(cand, est);
                if fc < f0 {
                    center = cand;
                }
            }
            break;
        }
    }
    est[i] = wrap(center);
}

#[derive(Debug, Clone, PartialEq)]
pub struct TrialResult {
    pub omega_estimates: Vec<f64>,
    pub omega_truth: Vec<f64>,
    pub seed: u64,
}

impl TrialResult {
    /// Squared error under the pairing of estimates to truths that
    /// minimizes it.
    pub fn matched_squared_error(&self) -> f64 {
        let est = &self.omega_estimates;
        let truth = &self.omega_truth;
        let mut order: Vec<usize> = (0..est.len()).collect();
        let mut best = f64::INFINITY;
        permute(&mut order, 0, &mut |perm| {
            let e: f64 = perm.iter().zip(truth).map(|(&j, t)| (est[j] - t).powi(2)).sum();
            best = best.min(e);
        });
        best
    }
}

fn permute(v: &mut [usize], k: usize, visit: &mut impl FnMut(&[usize])) {
    if k == v.len() {
        visit(v);
        return;
    }
    for i in k..v.len() {
        v.swap(k, i);
        permute(v, k + 1, visit);
        v.swap(k, i);
    }
}

/// `sqrt(Σ_j Σ_p (ω̂_{j,p} - ω_p)^2 / J)`.
pub fn rmse(trials: &[TrialResult]) -> Result<f64> {
    if trials.is_empty() {
        return Err(Error::invalid("RMSE needs at least one trial"));
    }
    if trials.iter().any(|t| t.omega_estimates.len() != t.omega_truth.len()) {
        return Err(Error::invalid("estimate and truth counts differ"));
    }
    let total: f64 = trials.iter().map(TrialResult::matched_squared_error).sum();
    Ok((total / trials.len() as f64).sqrt())
}

/// Independent estimation trials; trial `j` draws data and noise from seeds
/// derived from `(seed, j)`, so the result does not depend on scheduling.
pub fn rmse_trials(
    scene: &TargetScene,
    geom: &ArrayGeometry,
    design: &BeamformerDesign,
    code_length: usize,
    trials: usize,
    grid: &MleGrid,
    seed: u64,
) -> Result<Vec<TrialResult>> {
    let truth = scene.omegas();
    (0..trials as u64)
        .into_par_iter()
        .map(|j| {
            let trial_seed = linalg::derive_seed(seed, j);
            let data = gen_qam(design.users(), code_length, linalg::derive_seed(trial_seed, 0))?;
            let y = radar_snapshot(scene, geom, design, &data, scene.sigma_r_sq, linalg::derive_seed(trial_seed, 1))?;
            let x = design.w_matrix() * &data.symbols;
            let est = mle_angles(&y, &x, geom, scene.len(), grid)?;
            Ok(TrialResult { omega_estimates: est, omega_truth: truth.clone(), seed: trial_seed })
        })
        .collect()
}

#[derive(Debug, Clone, PartialEq)]
pub struct RmsePoint {
    pub sigma_r_db: f64,
    pub rmse: f64,
    pub root_crb_exact: f64,
    pub root_crb_asymptotic: f64,
}

/// RMSE against the root of the summed exact and asymptotic bounds over a
/// sweep of radar noise powers.
#[allow(clippy::too_many_arguments)]
pub fn rmse_curve(
    scene: &TargetScene,
    geom: &ArrayGeometry,
    design: &BeamformerDesign,
    code_length: usize,
    sigma_r_db: &[f64],
    trials: usize,
    grid: &MleGrid,
    seed: u64,
) -> Result<Vec<RmsePoint>> {
    let r_x = covariance_from_beamformer(design, code_length)?;
    sigma_r_db
        .iter()
        .enumerate()
        .map(|(i, &db)| {
            let s = scene.with_sigma_r_sq(linalg::db_to_linear(db))?;
            let crb = crb_report(&s, geom, &r_x)?;
            let runs = rmse_trials(&s, geom, design, code_length, trials, grid, linalg::derive_seed(seed, i as u64))?;
            Ok(RmsePoint {
                sigma_r_db: db,
                rmse: rmse(&runs)?,
                root_crb_exact: CrbReport::root_sum(&crb.exact_diag),
                root_crb_asymptotic: CrbReport::root_sum(&crb.asymptotic),
            })
        })
        .collect()
}

/// Symbol error rates at one SNR.
#[derive(Debug, Clone, PartialEq)]
pub struct SerPoint {
    pub snr_db: f64,
    /// Per user, through the designed beamformer.
    pub ser: Vec<f64>,
    /// Per user, the same symbols and noise without channel or interference.
    pub ser_mui_free: Vec<f64>,
    /// Symbols per user behind each rate.
    pub symbols: usize,
}

/// SER of every user versus `SNR = E|s|^2 / σ_C^2`, the design held fixed.
///
/// Each trial sends one symbol to every user. The receiver divides by its
/// known gain `h_k^H w_k` and makes a minimum-distance decision. The SNR is
/// taken after that division, so a link with no interference behaves exactly
/// like the benchmark `s_k + n`, which reuses the same symbols and noise.
pub fn ser_curve(
    design: &BeamformerDesign,
    comm: &CommScenario,
    snr_db: &[f64],
    trials: usize,
    seed: u64,
) -> Result<Vec<SerPoint>> {
    if trials == 0 {
        return Err(Error::invalid("SER needs at least one trial"));
    }
    if design.n_tx() != comm.channel().nrows() || design.users() != comm.users() {
        return Err(Error::invalid("design and channel dimensions disagree"));
    }
    let k = comm.users();
    // gains[(k, j)] = h_k^H w_j
    let gains = comm.channel().adjoint() * design.w_matrix();
    for user in 0..k {
        if gains[(user, user)].norm() == 0.0 {
            return Err(Error::DetectionDegenerate { user });
        }
    }
    snr_db
        .iter()
        .enumerate()
        .map(|(i, &db)| {
            let sigma_sq = linalg::db_to_linear(-db);
            let point_seed = linalg::derive_seed(seed, i as u64);
            let counts = (0..trials as u64)
                .into_par_iter()
                .map(|t| -> Result<(Vec<u32>, Vec<u32>)> {
                    let trial_seed = linalg::derive_seed(point_seed, t);
                    let s = gen_qam(k, 1, linalg::derive_seed(trial_seed, 0))?.symbols.column(0).into_owned();
                    let mut rng = linalg::rng(linalg::derive_seed(trial_seed, 1));
                    let received = &gains * &s;
                    let mut designed = vec![0u32; k];
                    let mut free = vec![0u32; k];
                    for user in 0..k {
                        let n = linalg::complex_normal(&mut rng, sigma_sq);
                        let g = gains[(user, user)];
                        designed[user] += u32::from(qam16_detect(received[user] / g + n) != s[user]);
                        free[user] += u32::from(qam16_detect(s[user] + n) != s[user]);
                    }
                    Ok((designed, free))
                })
                .try_reduce(
                    || (vec![0; k], vec![0; k]),
                    |mut a, b| {
                        for u in 0..k {
                            a.0[u] += b.0[u];
                            a.1[u] += b.1[u];
                        }
                        Ok(a)
                    },
                )?;
            let n = trials as f64;
            Ok(SerPoint {
                snr_db: db,
                ser: counts.0.iter().map(|c| f64::from(*c) / n).collect(),
                ser_mui_free: counts.1.iter().map(|c| f64::from(*c) / n).collect(),
                symbols: trials,
            })
        })
        .collect()
}
