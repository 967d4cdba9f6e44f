//! Dense complex linear-algebra helpers shared across the crate.

use nalgebra::{DMatrix, DVector};
use num_complex::Complex64;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};

pub type C64 = Complex64;
pub type CMat = DMatrix<Complex64>;
pub type CVec = DVector<Complex64>;
pub type RMat = DMatrix<f64>;

pub const J: C64 = C64::new(0.0, 1.0);

pub type Rng = ChaCha8Rng;

pub fn rng(seed: u64) -> Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

/// Derives an independent stream seed from a master seed and an index
/// (splitmix64 finalizer).
pub fn derive_seed(master: u64, index: u64) -> u64 {
    let mut z = master ^ index.wrapping_add(1).wrapping_mul(0x9E37_79B9_7F4A_7C15);
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

/// Circularly-symmetric complex Gaussian sample with `E|x|^2 = variance`.
pub fn complex_normal(rng: &mut Rng, variance: f64) -> C64 {
    let s = (variance / 2.0).sqrt();
    let re: f64 = StandardNormal.sample(rng);
    let im: f64 = StandardNormal.sample(rng);
    C64::new(re * s, im * s)
}

pub fn random_complex_matrix(rng: &mut Rng, rows: usize, cols: usize, variance: f64) -> CMat {
    // column-major fill keeps the draw order independent of nalgebra internals
    let mut m = CMat::zeros(rows, cols);
    for c in 0..cols {
        for r in 0..rows {
            m[(r, c)] = complex_normal(rng, variance);
        }
    }
    m
}

pub fn random_complex_vector(rng: &mut Rng, n: usize, variance: f64) -> CVec {
    CVec::from_iterator(n, (0..n).map(|_| complex_normal(rng, variance)))
}

/// Uniform point on the complex sphere `{w : ||w||^2 = energy}`.
pub fn random_on_sphere(rng: &mut Rng, n: usize, energy: f64) -> CVec {
    loop {
        let v = random_complex_vector(rng, n, 1.0);
        let norm = v.norm();
        if norm > 1e-12 {
            return v * C64::from(energy.sqrt() / norm);
        }
    }
}

/// Kronecker product `a ⊗ b`.
pub fn kron(a: &CMat, b: &CMat) -> CMat {
    let (ar, ac) = a.shape();
    let (br, bc) = b.shape();
    let mut out = CMat::zeros(ar * br, ac * bc);
    for i in 0..ar {
        for j in 0..ac {
            let s = a[(i, j)];
            if s == C64::new(0.0, 0.0) {
                continue;
            }
            for k in 0..br {
                for l in 0..bc {
                    out[(i * br + k, j * bc + l)] = s * b[(k, l)];
                }
            }
        }
    }
    out
}

/// `x^H m x`, real part only (exact for Hermitian `m`).
pub fn quad_form(m: &CMat, x: &CVec) -> f64 {
    x.dotc(&(m * x)).re
}

pub fn hermitian_defect(m: &CMat) -> f64 {
    (m - m.adjoint()).norm()
}

pub fn is_hermitian(m: &CMat, rel_tol: f64) -> bool {
    m.is_square() && hermitian_defect(m) <= rel_tol * m.norm().max(f64::MIN_POSITIVE)
}

pub fn db_to_linear(db: f64) -> f64 {
    10f64.powf(db / 10.0)
}

pub fn linear_to_db(x: f64) -> f64 {
    10.0 * x.log10()
}

/// Real embedding `[[Re, -Im], [Im, Re]]` so that `x^H m x = v^T M v` with `v = [Re x; Im x]`.
pub fn real_embedding(m: &CMat) -> RMat {
    let (r, c) = m.shape();
    let mut out = RMat::zeros(2 * r, 2 * c);
    for i in 0..r {
        for j in 0..c {
            let z = m[(i, j)];
            out[(i, j)] = z.re;
            out[(i, j + c)] = -z.im;
            out[(i + r, j)] = z.im;
            out[(i + r, j + c)] = z.re;
        }
    }
    out
}

pub fn to_real_vec(x: &CVec) -> DVector<f64> {
    let n = x.len();
    DVector::from_iterator(2 * n, x.iter().map(|z| z.re).chain(x.iter().map(|z| z.im)))
}

pub fn from_real_vec(v: &DVector<f64>) -> CVec {
    let n = v.len() / 2;
    CVec::from_iterator(n, (0..n).map(|i| C64::new(v[i], v[i + n])))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn kron_matches_definition() {
        let a = CMat::from_row_slice(2, 1, &[C64::new(1.0, 0.0), C64::new(0.0, 2.0)]);
        let b = CMat::from_row_slice(1, 2, &[C64::new(3.0, 0.0), C64::new(1.0, 1.0)]);
        let k = kron(&a, &b);
        assert_eq!(k.shape(), (2, 2));
        assert_eq!(k[(1, 1)], C64::new(0.0, 2.0) * C64::new(1.0, 1.0));
        assert_eq!(k[(0, 0)], C64::new(3.0, 0.0));
    }

    #[test]
    fn real_embedding_preserves_quadratic_forms() {
        let mut rng = rng(3);
        let a = random_complex_matrix(&mut rng, 5, 5, 1.0);
        let h = &a + a.adjoint();
        let x = random_complex_vector(&mut rng, 5, 1.0);
        let v = to_real_vec(&x);
        let lhs = quad_form(&h, &x);
        let rhs = v.dot(&(real_embedding(&h) * &v));
        assert!((lhs - rhs).abs() < 1e-10 * lhs.abs().max(1.0));
        assert_eq!(from_real_vec(&v), x);
    }

    #[test]
    fn sphere_sample_has_requested_energy() {
        let mut rng = rng(9);
        let w = random_on_sphere(&mut rng, 12, 2.5);
        assert!((w.norm_squared() - 2.5).abs() < 1e-12);
    }

    #[test]
    fn derived_seeds_differ() {
        assert_ne!(derive_seed(1, 0), derive_seed(1, 1));
        assert_ne!(derive_seed(1, 0), derive_seed(2, 0));
        assert_eq!(derive_seed(5, 7), derive_seed(5, 7));
    }
}
