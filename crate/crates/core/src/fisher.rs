//! Fisher information for the target parameters `(ω, Re α, Im α)` and the
//! resulting Cramér-Rao bounds: exact, large-array asymptotic, and the
//! upper bound used as the design objective.

use nalgebra::DMatrix;

use crate::error::{Error, Result};
use crate::linalg::{CMat, RMat, C64};
use crate::model::{ArrayGeometry, BeamformerDesign, TargetScene};

/// `L W W^H`, the idealized sample covariance of `X = W S`.
pub fn covariance_from_beamformer(design: &BeamformerDesign, code_length: usize) -> Result<CMat> {
    if code_length == 0 {
        return Err(Error::invalid("code length must be positive"));
    }
    let w = design.w_matrix();
    Ok(w * w.adjoint() * C64::from(code_length as f64))
}

/// `X X^H` of a realized waveform.
pub fn covariance_from_waveform(x: &CMat) -> CMat {
    x * x.adjoint()
}

#[derive(Debug, Clone, PartialEq)]
pub struct FimBlocks {
    pub f11: CMat,
    pub f12: CMat,
    pub f22: CMat,
}

fn check_covariance(geom: &ArrayGeometry, r_x: &CMat) -> Result<()> {
    if r_x.shape() != (geom.n_tx, geom.n_tx) {
        return Err(Error::invalid(format!(
            "covariance is {}x{}, expected {}x{}",
            r_x.nrows(),
            r_x.ncols(),
            geom.n_tx,
            geom.n_tx
        )));
    }
    Ok(())
}

/// Complex FIM blocks, built term by term from the Hadamard-product formulas.
pub fn fim_blocks(scene: &TargetScene, geom: &ArrayGeometry, r_x: &CMat) -> Result<FimBlocks> {
    check_covariance(geom, r_x)?;
    let a_r = scene.rx_steering_matrix(geom);
    let da_r = scene.rx_derivative_matrix(geom);
    let a_t = scene.tx_steering_matrix(geom);
    let da_t = scene.tx_derivative_matrix(geom);
    let alphas: Vec<C64> = scene.targets().iter().map(|t| t.alpha).collect();
    Ok(blocks_with_amplitudes(&a_r, &da_r, &a_t, &da_t, &alphas, r_x))
}

fn blocks_with_amplitudes(a_r: &CMat, da_r: &CMat, a_t: &CMat, da_t: &CMat, alphas: &[C64], r_x: &CMat) -> FimBlocks {
    let b = CMat::from_diagonal(&nalgebra::DVector::from_column_slice(alphas));
    let b_conj = b.map(|z| z.conj());
    let r_conj = r_x.map(|z| z.conj());

    let rr_dd = da_r.adjoint() * da_r;
    let rr_d0 = da_r.adjoint() * a_r;
    let rr_0d = a_r.adjoint() * da_r;
    let rr_00 = a_r.adjoint() * a_r;

    let tt_00 = a_t.adjoint() * &r_conj * a_t;
    let tt_0d = a_t.adjoint() * &r_conj * da_t;
    let tt_d0 = da_t.adjoint() * &r_conj * a_t;
    let tt_dd = da_t.adjoint() * &r_conj * da_t;

    let f11 = rr_dd.component_mul(&(&b_conj * &tt_00 * &b))
        + rr_d0.component_mul(&(&b_conj * &tt_0d * &b))
        + rr_0d.component_mul(&(&b_conj * &tt_d0 * &b))
        + rr_00.component_mul(&(&b_conj * &tt_dd * &b));
    let f12 = rr_d0.component_mul(&(&b_conj * &tt_00)) + rr_00.component_mul(&(&b_conj * &tt_d0));
    let f22 = rr_00.component_mul(&tt_00);
    FimBlocks { f11, f12, f22 }
}

fn re(m: &CMat) -> RMat {
    m.map(|z| z.re)
}

fn im(m: &CMat) -> RMat {
    m.map(|z| z.im)
}

/// Real `3P x 3P` FIM ordered as `(ω, Re α, Im α)`.
pub fn assemble_fim(blocks: &FimBlocks, sigma_r_sq: f64) -> Result<RMat> {
    if !(sigma_r_sq > 0.0) {
        return Err(Error::invalid("radar noise power must be positive"));
    }
    let p = blocks.f11.nrows();
    let scale = 2.0 / sigma_r_sq;
    let mut out = RMat::zeros(3 * p, 3 * p);
    let f12r = re(&blocks.f12);
    let f12i = im(&blocks.f12);
    let f22r = re(&blocks.f22);
    let f22i = im(&blocks.f22);
    out.view_mut((0, 0), (p, p)).copy_from(&re(&blocks.f11));
    out.view_mut((0, p), (p, p)).copy_from(&f12r);
    out.view_mut((0, 2 * p), (p, p)).copy_from(&(-&f12i));
    out.view_mut((p, p), (p, p)).copy_from(&f22r);
    out.view_mut((p, 2 * p), (p, p)).copy_from(&(-&f22i));
    out.view_mut((2 * p, 2 * p), (p, p)).copy_from(&f22r);
    // lower blocks mirror the upper ones so the result is symmetric exactly
    for i in 0..3 * p {
        for j in 0..i {
            out[(i, j)] = out[(j, i)];
        }
    }
    // diagonal blocks are symmetric only up to roundoff
    for blk in 0..3 {
        for i in 0..p {
            for j in 0..i {
                let (a, b) = (blk * p + i, blk * p + j);
                let avg = 0.5 * (out[(a, b)] + out[(b, a)]);
                out[(a, b)] = avg;
                out[(b, a)] = avg;
            }
        }
    }
    Ok(out * scale)
}

/// Inverse of a symmetric matrix, falling back to a pseudo-inverse with a
/// warning when it is numerically singular.
fn symmetric_inverse_or_pinv(m: &RMat, name: &'static str) -> Result<RMat> {
    if let Some(ch) = m.clone().cholesky() {
        let inv = ch.inverse();
        if inv.iter().all(|v| v.is_finite()) {
            return Ok(inv);
        }
    }
    log::warn!("{name} is singular or ill-conditioned; using a pseudo-inverse");
    let tol = 1e-12 * m.norm().max(f64::MIN_POSITIVE);
    m.clone()
        .pseudo_inverse(tol)
        .map_err(|_| Error::SingularInformation { matrix: name })
}

/// Diagonal of `(σ_R^2 / 2) F_ω^{-1}` with `F_ω` the Schur complement of the
/// amplitude block.
pub fn exact_crb_diag(blocks: &FimBlocks, sigma_r_sq: f64) -> Result<Vec<f64>> {
    if !(sigma_r_sq > 0.0) {
        return Err(Error::invalid("radar noise power must be positive"));
    }
    let p = blocks.f11.nrows();
    let f12r = re(&blocks.f12);
    let f12i = im(&blocks.f12);
    let f22r = re(&blocks.f22);
    let f22i = im(&blocks.f22);
    let mut f12t = RMat::zeros(p, 2 * p);
    f12t.view_mut((0, 0), (p, p)).copy_from(&f12r);
    f12t.view_mut((0, p), (p, p)).copy_from(&(-&f12i));
    let mut f22t = RMat::zeros(2 * p, 2 * p);
    f22t.view_mut((0, 0), (p, p)).copy_from(&f22r);
    f22t.view_mut((0, p), (p, p)).copy_from(&(-&f22i));
    f22t.view_mut((p, 0), (p, p)).copy_from(&(-f22i.transpose()));
    f22t.view_mut((p, p), (p, p)).copy_from(&f22r);
    let f22t = (&f22t + f22t.transpose()) * 0.5;
    let f22_inv = symmetric_inverse_or_pinv(&f22t, "amplitude information block")?;
    let f_omega = re(&blocks.f11) - &f12t * f22_inv * f12t.transpose();
    let f_omega = (&f_omega + f_omega.transpose()) * 0.5;
    let chol = f_omega
        .clone()
        .cholesky()
        .ok_or(Error::SingularInformation { matrix: "angle information (Schur complement)" })?;
    let inv = chol.inverse();
    let diag: Vec<f64> = (0..p).map(|i| 0.5 * sigma_r_sq * inv[(i, i)]).collect();
    if diag.iter().any(|v| !(v.is_finite() && *v > 0.0)) {
        return Err(Error::SingularInformation { matrix: "angle information (Schur complement)" });
    }
    Ok(diag)
}

/// `b = a^H R^* a`, `ḃ = a^H R^* ȧ` and `b̈ = ȧ^H R^* ȧ` for one target.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct BeamScalars {
    pub b: f64,
    pub b_dot: C64,
    pub b_ddot: f64,
}

pub fn beam_scalars(scene: &TargetScene, geom: &ArrayGeometry, r_x: &CMat) -> Result<Vec<BeamScalars>> {
    check_covariance(geom, r_x)?;
    let r_conj = r_x.map(|z| z.conj());
    Ok(scene
        .targets()
        .iter()
        .map(|t| {
            let a = geom.tx_steering(t.omega());
            let da = geom.tx_steering_derivative(t.omega());
            let ra = &r_conj * &a;
            let rda = &r_conj * &da;
            BeamScalars { b: a.dotc(&ra).re, b_dot: a.dotc(&rda), b_ddot: da.dotc(&rda).re }
        })
        .collect())
}

fn check_beams(scalars: &[BeamScalars]) -> Result<()> {
    for (p, s) in scalars.iter().enumerate() {
        if !(s.b > 0.0) {
            return Err(Error::DegenerateBeampattern { target: p });
        }
    }
    Ok(())
}

/// Large-receive-array limit of the CRB diagonal.
pub fn asymptotic_crb(scene: &TargetScene, geom: &ArrayGeometry, r_x: &CMat) -> Result<Vec<f64>> {
    let scalars = beam_scalars(scene, geom, r_x)?;
    check_beams(&scalars)?;
    let n = geom.n_rx as f64;
    Ok(scene
        .targets()
        .iter()
        .zip(&scalars)
        .map(|(t, s)| {
            let curvature = (s.b_ddot - s.b_dot.norm_sqr() / s.b).max(0.0);
            let info = n.powi(3) * s.b / 12.0 + n * curvature;
            scene.sigma_r_sq / (2.0 * t.alpha_sq() * info)
        })
        .collect())
}

/// `6 σ^2 / (|α|^2 N_R^3 b)`, an upper bound on [`asymptotic_crb`].
pub fn crb_upper_bound(scene: &TargetScene, geom: &ArrayGeometry, r_x: &CMat) -> Result<Vec<f64>> {
    let scalars = beam_scalars(scene, geom, r_x)?;
    check_beams(&scalars)?;
    let n = geom.n_rx as f64;
    Ok(scene
        .targets()
        .iter()
        .zip(&scalars)
        .map(|(t, s)| 6.0 * scene.sigma_r_sq / (t.alpha_sq() * n.powi(3) * s.b))
        .collect())
}

#[derive(Debug, Clone, PartialEq)]
pub struct CrbReport {
    pub exact_diag: Vec<f64>,
    pub asymptotic: Vec<f64>,
    pub upper_bound: Vec<f64>,
    pub scalars: Vec<BeamScalars>,
}

impl CrbReport {
    pub fn root_sum(values: &[f64]) -> f64 {
        values.iter().sum::<f64>().sqrt()
    }
}

pub fn crb_report(scene: &TargetScene, geom: &ArrayGeometry, r_x: &CMat) -> Result<CrbReport> {
    let blocks = fim_blocks(scene, geom, r_x)?;
    Ok(CrbReport {
        exact_diag: exact_crb_diag(&blocks, scene.sigma_r_sq)?,
        asymptotic: asymptotic_crb(scene, geom, r_x)?,
        upper_bound: crb_upper_bound(scene, geom, r_x)?,
        scalars: beam_scalars(scene, geom, r_x)?,
    })
}

/// Slepian-Bangs FIM of the mean `vec(A_R B A_T^T X)` by central finite
/// differences in `(ω, Re α, Im α)`. Independent of the block formulas, used
/// to validate them.
pub fn slepian_bangs_fd(scene: &TargetScene, geom: &ArrayGeometry, x: &CMat, step: f64) -> Result<RMat> {
    let p = scene.len();
    let omegas = scene.omegas();
    let alphas: Vec<C64> = scene.targets().iter().map(|t| t.alpha).collect();
    let mean = |om: &[f64], al: &[C64]| -> CMat {
        let mut m = CMat::zeros(geom.n_rx, x.ncols());
        for i in 0..p {
            let ar = geom.rx_steering(om[i]);
            let at = geom.tx_steering(om[i]);
            m += &ar * (at.transpose() * x) * al[i];
        }
        m
    };
    let mut derivs: Vec<CMat> = Vec::with_capacity(3 * p);
    for kind in 0..3 {
        for i in 0..p {
            let (mut om_p, mut om_m) = (omegas.clone(), omegas.clone());
            let (mut al_p, mut al_m) = (alphas.clone(), alphas.clone());
            match kind {
                0 => {
                    om_p[i] += step;
                    om_m[i] -= step;
                }
                1 => {
                    al_p[i] += step;
                    al_m[i] -= step;
                }
                _ => {
                    al_p[i] += C64::new(0.0, step);
                    al_m[i] -= C64::new(0.0, step);
                }
            }
            derivs.push((mean(&om_p, &al_p) - mean(&om_m, &al_m)) / C64::from(2.0 * step));
        }
    }
    let n = 3 * p;
    let mut fim = DMatrix::zeros(n, n);
    for i in 0..n {
        for j in 0..n {
            fim[(i, j)] = 2.0 / scene.sigma_r_sq * derivs[i].dotc(&derivs[j]).re;
        }
    }
    Ok(fim)
}
