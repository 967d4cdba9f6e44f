//! Numerical building blocks used by both solvers: Hermitian square roots,
//! the sphere-constrained quadratic (trust-region) subproblem, the positive
//! root of the ADMM quartic, concave maximization over the nonnegative
//! orthant and a small interior-point solver for linear objectives over
//! intersections of ellipsoids.

use nalgebra::{DMatrix, DVector};

use crate::error::{Error, Result};
use crate::linalg::{self, CMat, CVec, C64};

/// Eigendecomposition of a Hermitian matrix with ascending eigenvalues.
#[derive(Debug, Clone)]
pub struct EigCache {
    eigenvalues: Vec<f64>,
    eigenvectors: CMat,
}

impl EigCache {
    pub fn new(m: &CMat) -> Result<Self> {
        if !linalg::is_hermitian(m, 1e-10) {
            return Err(Error::invalid("matrix is not Hermitian"));
        }
        let sym = (m + m.adjoint()) * C64::from(0.5);
        let eig = sym.symmetric_eigen();
        let n = eig.eigenvalues.len();
        let mut order: Vec<usize> = (0..n).collect();
        order.sort_by(|&a, &b| eig.eigenvalues[a].total_cmp(&eig.eigenvalues[b]));
        let eigenvalues = order.iter().map(|&i| eig.eigenvalues[i]).collect();
        let eigenvectors =
            CMat::from_columns(&order.iter().map(|&i| eig.eigenvectors.column(i)).collect::<Vec<_>>());
        Ok(Self { eigenvalues, eigenvectors })
    }

    pub fn eigenvalues(&self) -> &[f64] {
        &self.eigenvalues
    }

    pub fn eigenvectors(&self) -> &CMat {
        &self.eigenvectors
    }

    pub fn dim(&self) -> usize {
        self.eigenvalues.len()
    }

    pub fn min_eigenvalue(&self) -> f64 {
        self.eigenvalues[0]
    }

    pub fn max_eigenvalue(&self) -> f64 {
        *self.eigenvalues.last().expect("nonempty")
    }

    pub fn reconstruct(&self) -> CMat {
        self.apply_spectral(|l| l)
    }

    /// `V f(Λ) V^H`.
    pub fn apply_spectral(&self, f: impl Fn(f64) -> f64) -> CMat {
        let v = &self.eigenvectors;
        let mut scaled = v.clone();
        for (j, &l) in self.eigenvalues.iter().enumerate() {
            let s = C64::from(f(l));
            scaled.column_mut(j).iter_mut().for_each(|z| *z *= s);
        }
        let out = scaled * v.adjoint();
        (&out + out.adjoint()) * C64::from(0.5)
    }
}

/// Principal square root of a Hermitian PSD matrix; eigenvalues slightly
/// below zero (roundoff) are clipped.
pub fn hermitian_sqrt(m: &CMat) -> Result<CMat> {
    let eig = EigCache::new(m)?;
    let scale = eig.eigenvalues().iter().fold(0.0f64, |a, l| a.max(l.abs()));
    if eig.min_eigenvalue() < -1e-10 * scale.max(f64::MIN_POSITIVE) {
        return Err(Error::invalid(format!(
            "matrix is not positive semidefinite (min eigenvalue {:.3e})",
            eig.min_eigenvalue()
        )));
    }
    Ok(eig.apply_spectral(|l| l.max(0.0).sqrt()))
}

#[derive(Debug, Clone)]
pub struct SphereSolution {
    pub w: CVec,
    /// Lagrange multiplier ϖ of the sphere constraint.
    pub multiplier: f64,
    pub hard_case: bool,
}

/// Minimizes `w^H A w - 2 Re(g^H w)` over `||w||^2 = energy`, given the
/// eigendecomposition of `A`.
///
/// The minimizer is `(A + ϖ I)^{-1} g` where ϖ ≥ -λ_min(A) solves the secular
/// equation `g^H (A + ϖ I)^{-2} g = energy`. When `g` has no component in the
/// minimal eigenspace and the secular equation has no root above `-λ_min`, the
/// missing energy is put on the first minimal eigenvector with a positive real
/// coefficient.
pub fn sphere_quadratic_min(eig: &EigCache, g: &CVec, energy: f64) -> Result<SphereSolution> {
    if !(energy > 0.0) {
        return Err(Error::invalid("sphere energy must be positive"));
    }
    if g.len() != eig.dim() {
        return Err(Error::invalid("gradient dimension mismatch"));
    }
    let lam = eig.eigenvalues();
    let v = eig.eigenvectors();
    let lam0 = lam[0];
    let coef = v.adjoint() * g;
    let weights: Vec<f64> = coef.iter().map(|z| z.norm_sqr()).collect();
    let gap: Vec<f64> = lam.iter().map(|&l| l - lam0).collect();
    let g_norm = g.norm();

    let spread = lam.iter().fold(0.0f64, |a, l| a.max(l.abs())).max(f64::MIN_POSITIVE);
    let in_min_space = |i: usize| gap[i] <= 1e-12 * spread;
    let min_weight: f64 = (0..lam.len()).filter(|&i| in_min_space(i)).map(|i| weights[i]).sum();

    // Hard case: the secular function stays finite at σ = 0.
    if min_weight <= (1e-14 * g_norm).powi(2) {
        let rest: f64 = (0..lam.len())
            .filter(|&i| !in_min_space(i))
            .map(|i| weights[i] / (gap[i] * gap[i]))
            .sum();
        if rest <= energy {
            let mut c = CVec::zeros(lam.len());
            for i in (0..lam.len()).filter(|&i| !in_min_space(i)) {
                c[i] = coef[i] / gap[i];
            }
            c[0] = C64::from((energy - rest).max(0.0).sqrt());
            let mut w = v * c;
            let n = w.norm();
            if n > 0.0 {
                w *= C64::from(energy.sqrt() / n);
            }
            return Ok(SphereSolution { w, multiplier: -lam0, hard_case: true });
        }
    }

    // Secular equation in σ = ϖ + λ_min, σ > 0.
    let secular = |sigma: f64| -> (f64, f64) {
        let mut f = 0.0;
        let mut df = 0.0;
        for i in 0..lam.len() {
            let d = gap[i] + sigma;
            let w2 = weights[i] / (d * d);
            f += w2;
            df -= 2.0 * w2 / d;
        }
        (f, df)
    };
    let target = 1.0 / energy.sqrt();
    let mut lo = 0.0;
    let mut hi = g_norm / energy.sqrt();
    let mut sigma = hi;
    for _ in 0..300 {
        let (f, df) = secular(sigma);
        let phi = 1.0 / f.sqrt() - target;
        if (f - energy).abs() <= 1e-15 * energy {
            break;
        }
        if phi < 0.0 {
            lo = sigma;
        } else {
            hi = sigma;
        }
        // Newton on 1/sqrt(f), which is nearly linear in σ
        let dphi = -0.5 * df / (f * f.sqrt());
        let mut next = sigma - phi / dphi;
        if !(next > lo && next < hi) || !next.is_finite() {
            next = 0.5 * (lo + hi);
        }
        if (next - sigma).abs() <= 1e-17 * (1.0 + sigma.abs()) || hi - lo <= 1e-300 {
            sigma = next;
            break;
        }
        sigma = next;
    }
    let c = CVec::from_iterator(lam.len(), (0..lam.len()).map(|i| coef[i] / (gap[i] + sigma)));
    let mut w = v * c;
    let n = w.norm();
    w *= C64::from(energy.sqrt() / n);
    Ok(SphereSolution { w, multiplier: sigma - lam0, hard_case: false })
}

/// Number of sign changes in a coefficient sequence (zeros skipped).
pub fn sign_changes(coeffs: &[f64]) -> usize {
    let signs: Vec<f64> = coeffs.iter().copied().filter(|c| *c != 0.0).map(f64::signum).collect();
    signs.windows(2).filter(|w| w[0] != w[1]).count()
}

/// Unique positive root of `μ χ^4 - μ χ^3 - c = 0` (always > 1).
///
/// Ferrari's resolvent gives the root in closed form; a few Newton steps
/// polish it to working precision.
pub fn positive_quartic_root(mu: f64, c: f64) -> Result<f64> {
    if !(mu > 0.0 && c > 0.0) || !mu.is_finite() || !c.is_finite() {
        return Err(Error::invalid(format!("quartic needs μ > 0 and c > 0 (got μ = {mu}, c = {c})")));
    }
    let k = c / mu;
    let poly = |x: f64| x * x * x * (x - 1.0) - k;
    let dpoly = |x: f64| x * x * (4.0 * x - 3.0);
    let hi_bound = 1.0 + k.cbrt();

    let mut x = match ferrari_positive_root(k) {
        Some(r) if r > 1.0 && r <= hi_bound * (1.0 + 1e-9) => r,
        _ => bisect(poly, 1.0, hi_bound, 200),
    };
    for _ in 0..8 {
        let step = poly(x) / dpoly(x);
        let next = x - step;
        if !(next > 1.0) || !next.is_finite() {
            break;
        }
        x = next;
        if step.abs() <= 1e-16 * x {
            break;
        }
    }
    Ok(x)
}

fn bisect(f: impl Fn(f64) -> f64, mut lo: f64, mut hi: f64, iters: usize) -> f64 {
    for _ in 0..iters {
        let mid = 0.5 * (lo + hi);
        if f(mid) < 0.0 {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    0.5 * (lo + hi)
}

/// Ferrari's method for `x^4 - x^3 - k = 0`, returning the positive real root.
fn ferrari_positive_root(k: f64) -> Option<f64> {
    // x = y + 1/4 gives y^4 + p y^2 + q y + r = 0
    let p = -3.0 / 8.0;
    let q = -1.0 / 8.0;
    let r = -3.0 / 256.0 - k;
    // resolvent 8m^3 + 8p m^2 + (2p^2 - 8r) m - q^2 = 0 has a positive root
    let m = largest_real_cubic_root(8.0, 8.0 * p, 2.0 * p * p - 8.0 * r, -q * q)?;
    if !(m > 0.0) {
        return None;
    }
    let s = (2.0 * m).sqrt();
    let mut best: Option<f64> = None;
    for (sign, shift) in [(1.0, q / (2.0 * s)), (-1.0, -q / (2.0 * s))] {
        // y^2 - sign*s*y + (p/2 + m + shift) = 0
        let b = -sign * s;
        let c0 = p / 2.0 + m + shift;
        let disc = b * b - 4.0 * c0;
        if disc < 0.0 {
            continue;
        }
        // cancellation-free pair of roots
        let qq = -0.5 * (b + b.signum() * disc.sqrt());
        let roots = if qq == 0.0 { [0.0, 0.0] } else { [qq, c0 / qq] };
        for y in roots {
            let x = y + 0.25;
            if x > 0.0 {
                best = Some(best.map_or(x, |b: f64| b.max(x)));
            }
        }
    }
    best
}

/// Largest real root of `a m^3 + b m^2 + c m + d` (Cardano / trigonometric form).
fn largest_real_cubic_root(a: f64, b: f64, c: f64, d: f64) -> Option<f64> {
    let (b, c, d) = (b / a, c / a, d / a);
    // m = t - b/3 gives t^3 + p t + q = 0
    let p = c - b * b / 3.0;
    let q = 2.0 * b * b * b / 27.0 - b * c / 3.0 + d;
    let shift = -b / 3.0;
    let disc = (q / 2.0).powi(2) + (p / 3.0).powi(3);
    let t = if disc > 0.0 {
        let sq = disc.sqrt();
        (-q / 2.0 + sq).cbrt() + (-q / 2.0 - sq).cbrt()
    } else if p == 0.0 {
        (-q).cbrt()
    } else {
        let rho = (-(p / 3.0).powi(3)).sqrt();
        let cos_arg = (-q / (2.0 * rho)).clamp(-1.0, 1.0);
        let theta = cos_arg.acos();
        2.0 * (-p / 3.0).sqrt() * (theta / 3.0).cos()
    };
    let mut m = t + shift;
    // Cardano loses digits when the coefficients span many magnitudes
    for _ in 0..4 {
        let f = ((m + b) * m + c) * m + d;
        let df = (3.0 * m + 2.0 * b) * m + c;
        if df == 0.0 || !f.is_finite() {
            break;
        }
        m -= f / df;
    }
    m.is_finite().then_some(m)
}

/// Step rule for [`concave_orthant_max`].
#[derive(Debug, Clone, Copy, PartialEq, Eq, serde::Serialize, serde::Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum AscentMethod {
    /// Normalized supergradient steps of length `a / (sqrt(t) + 1)`.
    Supergradient,
    /// Projected gradient with Barzilai-Borwein steps and a nonmonotone
    /// Armijo search along the projection arc. Needs `phi` differentiable
    /// almost everywhere.
    SpectralProjected,
}

#[derive(Debug, Clone, Copy, PartialEq, serde::Serialize, serde::Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct AscentOptions {
    pub method: AscentMethod,
    pub max_iter: usize,
    /// Stop when the best value improved by less than `rel_tol` (relative)
    /// over the last `patience` iterations.
    pub rel_tol: f64,
    pub patience: usize,
    /// Coordinates are floored at this value before calling `phi`.
    pub floor: f64,
}

impl Default for AscentOptions {
    fn default() -> Self {
        Self {
            method: AscentMethod::SpectralProjected,
            max_iter: 2000,
            rel_tol: 1e-6,
            patience: 50,
            floor: 1e-12,
        }
    }
}

#[derive(Debug, Clone)]
pub struct AscentResult {
    pub x: Vec<f64>,
    pub value: f64,
    pub iterations: usize,
    /// Best value seen after each iteration (non-decreasing).
    pub best_trace: Vec<f64>,
}

/// Maximizes a concave `phi` over `x ≥ 0` starting from `init`.
///
/// `phi` returns the value and a supergradient. The best iterate seen is
/// returned, so `phi(result) ≥ phi(init)`.
pub fn concave_orthant_max<F>(phi: F, init: &[f64], opts: &AscentOptions) -> Result<AscentResult>
where
    F: FnMut(&[f64]) -> (f64, Vec<f64>),
{
    if init.iter().any(|v| *v < 0.0 || !v.is_finite()) {
        return Err(Error::invalid("initial point must be finite and nonnegative"));
    }
    maximize_over(phi, init, opts, project)
}

/// Maximizes a concave `phi` over the probability simplex. Same contract as
/// [`concave_orthant_max`]; `init` is projected onto the simplex first.
pub fn concave_simplex_max<F>(phi: F, init: &[f64], opts: &AscentOptions) -> Result<AscentResult>
where
    F: FnMut(&[f64]) -> (f64, Vec<f64>),
{
    if init.is_empty() || init.iter().any(|v| !v.is_finite()) {
        return Err(Error::invalid("initial point must be finite and nonempty"));
    }
    let mut start = init.to_vec();
    project_simplex(&mut start);
    maximize_over(phi, &start, &AscentOptions { floor: 0.0, ..*opts }, project_simplex)
}

fn maximize_over<F>(mut phi: F, init: &[f64], opts: &AscentOptions, proj: fn(&mut [f64])) -> Result<AscentResult>
where
    F: FnMut(&[f64]) -> (f64, Vec<f64>),
{
    let floor = opts.floor;
    let mut eval = |x: &[f64], it: usize| -> Result<(f64, Vec<f64>)> {
        let xf: Vec<f64> = x.iter().map(|v| v.max(floor)).collect();
        let (v, g) = phi(&xf);
        if !v.is_finite() || g.iter().any(|c| !c.is_finite()) {
            return Err(Error::NonFinite { iteration: it, what: "concave objective or supergradient" });
        }
        Ok((v, g))
    };
    match opts.method {
        AscentMethod::Supergradient => supergradient_ascent(&mut eval, init, opts, proj),
        AscentMethod::SpectralProjected => spectral_projected_ascent(&mut eval, init, opts, proj),
    }
}

/// Euclidean projection onto `{x ≥ 0, Σx = 1}` by the sorting method.
pub fn project_simplex(x: &mut [f64]) {
    let mut sorted = x.to_vec();
    sorted.sort_by(|a, b| b.total_cmp(a));
    let mut cumulative = 0.0;
    let mut shift = 0.0;
    for (i, v) in sorted.iter().enumerate() {
        cumulative += v;
        let candidate = (cumulative - 1.0) / (i + 1) as f64;
        if v - candidate > 0.0 {
            shift = candidate;
        }
    }
    x.iter_mut().for_each(|v| *v = (*v - shift).max(0.0));
}

fn project(x: &mut [f64]) {
    x.iter_mut().for_each(|v| *v = v.max(0.0));
}

fn stalled(trace: &[f64], opts: &AscentOptions) -> bool {
    let n = trace.len();
    if n <= opts.patience {
        return false;
    }
    let now = trace[n - 1];
    let then = trace[n - 1 - opts.patience];
    (now - then).abs() <= opts.rel_tol * now.abs().max(1e-300)
}

fn supergradient_ascent<E>(eval: &mut E, init: &[f64], opts: &AscentOptions, proj: fn(&mut [f64])) -> Result<AscentResult>
where
    E: FnMut(&[f64], usize) -> Result<(f64, Vec<f64>)>,
{
    let mut x = init.to_vec();
    let (v0, g0) = eval(&x, 0)?;
    let mut best_x = x.clone();
    let mut best = v0;
    let g0n = norm(&g0);
    // initial step length: a fraction of the point's scale, or of the
    // gradient when starting at the origin
    let a = {
        let xn = norm(&x);
        if xn > 0.0 {
            0.5 * xn
        } else {
            0.5 * g0n.max(1.0).recip()
        }
    };
    let mut g = g0;
    let mut trace = Vec::with_capacity(opts.max_iter);
    let mut iterations = 0;
    for t in 0..opts.max_iter {
        iterations = t + 1;
        let gn = norm(&g);
        if gn == 0.0 {
            trace.push(best);
            break;
        }
        let step = a / ((t as f64).sqrt() + 1.0) / gn;
        for (xi, gi) in x.iter_mut().zip(&g) {
            *xi += step * gi;
        }
        proj(&mut x);
        let (v, gn_next) = eval(&x, t + 1)?;
        if v > best {
            best = v;
            best_x.clone_from(&x);
        }
        g = gn_next;
        trace.push(best);
        if stalled(&trace, opts) {
            break;
        }
    }
    Ok(AscentResult { x: best_x, value: best, iterations, best_trace: trace })
}

fn spectral_projected_ascent<E>(
    eval: &mut E,
    init: &[f64],
    opts: &AscentOptions,
    proj: fn(&mut [f64]),
) -> Result<AscentResult>
where
    E: FnMut(&[f64], usize) -> Result<(f64, Vec<f64>)>,
{
    const MEMORY: usize = 10;
    const ARMIJO: f64 = 1e-4;
    let n = init.len();
    let mut x = init.to_vec();
    let (mut fx, mut gx) = eval(&x, 0)?;
    let mut best_x = x.clone();
    let mut best = fx;
    let mut recent = vec![fx];
    let mut trace = Vec::with_capacity(opts.max_iter);
    // first step: unit projected-gradient length relative to the point
    let mut alpha = {
        let gn = norm(&gx).max(f64::MIN_POSITIVE);
        (norm(&x).max(1e-8) / gn).min(1e10)
    };
    let mut iterations = 0;
    for t in 0..opts.max_iter {
        iterations = t + 1;
        let direction = |step: f64| -> Vec<f64> {
            let mut p: Vec<f64> = (0..n).map(|i| x[i] + step * gx[i]).collect();
            proj(&mut p);
            (0..n).map(|i| p[i] - x[i]).collect()
        };
        // projected direction d = P(x + α g) - x
        let mut d = direction(alpha);
        let mut slope: f64 = d.iter().zip(&gx).map(|(a, b)| a * b).sum();
        if slope <= 0.0 || norm(&d) <= 1e-15 * (1.0 + norm(&x)) {
            // retry once with a short step before declaring stationarity
            let gn = norm(&gx).max(f64::MIN_POSITIVE);
            let short = 1e-6 * (1.0 + norm(&x)) / gn;
            d = direction(short);
            slope = d.iter().zip(&gx).map(|(a, b)| a * b).sum();
            if slope <= 0.0 || norm(&d) <= 1e-15 * (1.0 + norm(&x)) {
                trace.push(best);
                break;
            }
        }
        let reference = recent.iter().copied().fold(f64::INFINITY, f64::min);
        let mut lambda = 1.0;
        let mut accepted = None;
        for _ in 0..60 {
            // convex combination of two feasible points; the projection only
            // cleans rounding
            let mut trial: Vec<f64> = (0..n).map(|i| x[i] + lambda * d[i]).collect();
            proj(&mut trial);
            let (ft, gt) = eval(&trial, t + 1)?;
            if ft >= reference.min(fx) + ARMIJO * lambda * slope {
                accepted = Some((trial, ft, gt));
                break;
            }
            lambda *= 0.5;
        }
        let Some((xn, fnew, gnew)) = accepted else {
            trace.push(best);
            break;
        };
        let s: Vec<f64> = (0..n).map(|i| xn[i] - x[i]).collect();
        let y: Vec<f64> = (0..n).map(|i| gnew[i] - gx[i]).collect();
        // concave: s^T y < 0 along a proper step
        let sy: f64 = s.iter().zip(&y).map(|(a, b)| a * b).sum();
        let ss: f64 = s.iter().map(|a| a * a).sum();
        alpha = if sy < 0.0 { (ss / -sy).clamp(1e-14, 1e14) } else { (alpha * 4.0).min(1e14) };
        x = xn;
        fx = fnew;
        gx = gnew;
        if fx > best {
            best = fx;
            best_x.clone_from(&x);
        }
        recent.push(fx);
        if recent.len() > MEMORY {
            recent.remove(0);
        }
        trace.push(best);
        if stalled(&trace, opts) {
            break;
        }
    }
    Ok(AscentResult { x: best_x, value: best, iterations, best_trace: trace })
}

fn norm(v: &[f64]) -> f64 {
    v.iter().map(|a| a * a).sum::<f64>().sqrt()
}

#[derive(Debug, Clone)]
pub struct QcqpSolution {
    pub w: CVec,
    /// Multipliers of the constraints `w^H T̃_k w ≥ η̃_k`, then of the norm cap.
    pub multipliers: Vec<f64>,
}

/// Maximizes `Re(w_ref^H w)` subject to `w^H T̃_k w ≥ η̃_k` with every
/// `T̃_k ⪯ 0` and `η̃_k < 0`, plus an optional cap `||w||^2 ≤ norm_cap`.
///
/// Log-barrier interior-point method with damped Newton centering on the
/// real embedding. The origin is strictly feasible, so every iterate is. A
/// zero `w_ref` returns the origin.
pub fn linear_max_concave_qcqp(
    w_ref: &CVec,
    t_tilde: &[CMat],
    eta_tilde: &[f64],
    norm_cap: Option<f64>,
) -> Result<QcqpSolution> {
    let n = w_ref.len();
    if t_tilde.len() != eta_tilde.len() {
        return Err(Error::invalid("constraint matrix and bound counts differ"));
    }
    let mut quads: Vec<DMatrix<f64>> = Vec::with_capacity(t_tilde.len() + 1);
    let mut radii: Vec<f64> = Vec::with_capacity(t_tilde.len() + 1);
    for (t, &eta) in t_tilde.iter().zip(eta_tilde) {
        if t.shape() != (n, n) {
            return Err(Error::invalid("constraint matrix dimension mismatch"));
        }
        if !(eta < 0.0) {
            return Err(Error::invalid("constraint bounds must be strictly negative"));
        }
        quads.push(linalg::real_embedding(&(-t)));
        radii.push(-eta);
    }
    if let Some(cap) = norm_cap {
        if !(cap > 0.0) {
            return Err(Error::invalid("norm cap must be positive"));
        }
        quads.push(DMatrix::identity(2 * n, 2 * n));
        radii.push(cap);
    }
    let m = quads.len();
    let r_norm = w_ref.norm();
    if r_norm == 0.0 {
        return Ok(QcqpSolution { w: CVec::zeros(n), multipliers: vec![0.0; m] });
    }
    if m == 0 {
        return Err(Error::invalid("objective unbounded without constraints"));
    }
    let r = linalg::to_real_vec(w_ref) / r_norm;
    let dim = 2 * n;

    let slacks = |x: &DVector<f64>| -> Vec<f64> {
        quads.iter().zip(&radii).map(|(q, &rho)| rho - x.dot(&(q * x))).collect()
    };
    let barrier_value = |x: &DVector<f64>, t: f64| -> Option<f64> {
        let s = slacks(x);
        if s.iter().any(|v| *v <= 0.0) {
            return None;
        }
        Some(t * r.dot(x) + s.iter().map(|v| v.ln()).sum::<f64>())
    };

    let mut x = DVector::<f64>::zeros(dim);
    // initial weight balances objective and barrier at the scale of the
    // smallest ellipsoid
    let scale = quads
        .iter()
        .zip(&radii)
        .map(|(q, &rho)| (rho / q.diagonal().max().max(f64::MIN_POSITIVE)).sqrt())
        .fold(f64::INFINITY, f64::min);
    let mut t = 1.0 / scale.max(f64::MIN_POSITIVE);
    for _outer in 0..60 {
        for _newton in 0..100 {
            let s = slacks(&x);
            let qx: Vec<DVector<f64>> = quads.iter().map(|q| q * &x).collect();
            let mut grad = &r * t;
            let mut neg_hess = DMatrix::<f64>::zeros(dim, dim);
            for k in 0..m {
                grad -= &qx[k] * (2.0 / s[k]);
                neg_hess += &quads[k] * (2.0 / s[k]);
                neg_hess.ger(4.0 / (s[k] * s[k]), &qx[k], &qx[k], 1.0);
            }
            let chol = match neg_hess.clone().cholesky() {
                Some(c) => c,
                None => {
                    // ridge for a (numerically) singular Hessian
                    let ridge = 1e-12 * neg_hess.diagonal().max().max(1.0);
                    let shifted = neg_hess + DMatrix::<f64>::identity(dim, dim) * ridge;
                    shifted.cholesky().ok_or_else(|| Error::NonFinite {
                        iteration: 0,
                        what: "barrier Hessian",
                    })?
                }
            };
            let step = chol.solve(&grad);
            let decrement = grad.dot(&step);
            if decrement / 2.0 <= 1e-17 {
                break;
            }
            // inside the quadratic-convergence region a feasible full step
            // is taken without comparing barrier values, which lose
            // precision once t is large
            if decrement < 0.05 {
                let trial = &x + &step;
                if barrier_value(&trial, t).is_some() {
                    x = trial;
                    continue;
                }
            }
            let f0 = barrier_value(&x, t).expect("iterate strictly feasible");
            let mut size = 1.0;
            let mut moved = false;
            for _ in 0..80 {
                let trial = &x + &step * size;
                if let Some(ft) = barrier_value(&trial, t) {
                    if ft >= f0 + 0.25 * size * decrement {
                        x = trial;
                        moved = true;
                        break;
                    }
                }
                size *= 0.5;
            }
            if !moved {
                break;
            }
        }
        let gap = m as f64 / t;
        let objective = r.dot(&x).abs();
        if gap <= 1e-9 * objective.max(1e-300) || gap <= 1e-14 {
            break;
        }
        t *= 20.0;
    }
    let s = slacks(&x);
    // multipliers for the original (unnormalized) objective
    let multipliers = s.iter().map(|sk| r_norm / (t * sk)).collect();
    Ok(QcqpSolution { w: linalg::from_real_vec(&x), multipliers })
}
