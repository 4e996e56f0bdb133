//! Small dense complex linear-algebra helpers shared by the solver modules.

use crate::{C64, CMat, CVec, Error, Result};
use nalgebra::linalg::SymmetricEigen;

/// Frobenius inner product `<A, B> = sum conj(a_ij) b_ij = tr(A^H B)`.
pub fn cdot(a: &CMat, b: &CMat) -> C64 {
    debug_assert_eq!(a.shape(), b.shape());
    let mut acc = C64::new(0.0, 0.0);
    for (x, y) in a.iter().zip(b.iter()) {
        acc += x.conj() * y;
    }
    acc
}

/// Vector inner product `x^H y`.
pub fn vdot(x: &CVec, y: &CVec) -> C64 {
    debug_assert_eq!(x.len(), y.len());
    let mut acc = C64::new(0.0, 0.0);
    for (a, b) in x.iter().zip(y.iter()) {
        acc += a.conj() * b;
    }
    acc
}

/// Squared Frobenius norm.
pub fn fro_norm2(a: &CMat) -> f64 {
    a.iter().map(|z| z.norm_sqr()).sum()
}

/// `(A + A^H) / 2`, removing rounding drift from a nominally Hermitian matrix.
pub fn hermitianize(a: &CMat) -> CMat {
    (a + a.adjoint()).scale(0.5)
}

/// Eigendecomposition of a Hermitian matrix: `(eigenvalues, eigenvectors)`.
pub fn herm_eigen(a: &CMat) -> (Vec<f64>, CMat) {
    let se = SymmetricEigen::new(hermitianize(a));
    (se.eigenvalues.iter().copied().collect(), se.eigenvectors)
}

/// Hermitian fractional power `A^s` via eigendecomposition.
///
/// Eigenvalues are clamped at zero; for negative exponents, eigenvalues below
/// `floor_rel * lambda_max` are floored to that level so rank-deficient
/// matrices stay invertible. Zero eigenvalues with `floor_rel == 0` map to
/// zero (pseudo-inverse semantics).
pub fn herm_power(a: &CMat, exp: f64, floor_rel: f64) -> CMat {
    let (mut w, v) = herm_eigen(a);
    let wmax = w.iter().cloned().fold(0.0f64, f64::max);
    for x in w.iter_mut() {
        *x = x.max(0.0);
        if floor_rel > 0.0 {
            *x = x.max(floor_rel * wmax);
        }
    }
    let powed: Vec<f64> = w
        .iter()
        .map(|&x| {
            if x == 0.0 {
                0.0
            } else {
                x.powf(exp)
            }
        })
        .collect();
    scaled_outer(&v, &powed)
}

/// `V diag(d) V^H` for real `d`.
pub fn scaled_outer(v: &CMat, d: &[f64]) -> CMat {
    let mut scaled = v.clone();
    for (j, &dj) in d.iter().enumerate() {
        let mut col = scaled.column_mut(j);
        for x in col.iter_mut() {
            *x *= dj;
        }
    }
    &scaled * v.adjoint()
}

/// Hermitian PSD square-root factor for sampling, with the PSD check from the
/// covariance contract: eigenvalues below `-1e-10 * trace/n` are rejected.
pub fn psd_sqrt_checked(a: &CMat) -> Result<CMat> {
    let n = a.nrows();
    let (w, v) = herm_eigen(a);
    let tr: f64 = w.iter().sum();
    let tol = 1e-10 * tr.abs().max(1e-300) / n as f64;
    if let Some(&wmin) = w
        .iter()
        .min_by(|a, b| a.partial_cmp(b).unwrap())
        .filter(|&&x| x < -tol)
    {
        return Err(Error::InvalidCovariance(format!(
            "matrix has eigenvalue {wmin:.3e} below PSD tolerance -{tol:.3e}"
        )));
    }
    let sq: Vec<f64> = w.iter().map(|&x| x.max(0.0).sqrt()).collect();
    Ok(scaled_outer(&v, &sq))
}

/// Relative difference `|a - b| / max(|a|, |b|, floor)`.
pub fn rel_diff(a: f64, b: f64) -> f64 {
    (a - b).abs() / a.abs().max(b.abs()).max(1e-300)
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::prelude::*;
    use rand_chacha::ChaCha8Rng;

    fn rand_cmat(rng: &mut impl Rng, r: usize, c: usize) -> CMat {
        CMat::from_fn(r, c, |_, _| C64::new(rng.gen::<f64>() - 0.5, rng.gen::<f64>() - 0.5))
    }

    fn rand_psd(rng: &mut impl Rng, n: usize) -> CMat {
        let b = rand_cmat(rng, n, n);
        &b * b.adjoint()
    }

    #[test]
    fn herm_power_squares_back() {
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let a = rand_psd(&mut rng, 5);
        let s = herm_power(&a, 0.5, 0.0);
        let back = &s * &s;
        assert!((&back - &a).iter().map(|z| z.norm()).fold(0.0, f64::max) < 1e-10);
    }

    #[test]
    fn herm_power_inverse_root() {
        let mut rng = ChaCha8Rng::seed_from_u64(2);
        let a = rand_psd(&mut rng, 4);
        let si = herm_power(&a, -0.5, 0.0);
        let prod = &si * &a * &si;
        let eye = CMat::identity(4, 4);
        assert!((&prod - &eye).iter().map(|z| z.norm()).fold(0.0, f64::max) < 1e-9);
    }

    #[test]
    fn herm_power_floors_rank_deficient() {
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let b = rand_cmat(&mut rng, 6, 2);
        let a = &b * b.adjoint(); // rank 2
        let si = herm_power(&a, -0.5, 1e-10);
        assert!(si.iter().all(|z| z.is_finite()));
        // floored directions got eigenvalue (1e-10 * lmax)^{-1/2}, so the
        // operator norm is large but finite
        let (w, _) = herm_eigen(&a);
        let lmax = w.iter().cloned().fold(0.0f64, f64::max);
        let expect = (1e-10 * lmax).powf(-0.5);
        let (wi, _) = herm_eigen(&si);
        let got = wi.iter().cloned().fold(0.0f64, f64::max);
        assert!(rel_diff(got, expect) < 1e-6);
    }

    #[test]
    fn psd_sqrt_rejects_indefinite() {
        let mut a = CMat::identity(3, 3);
        a[(2, 2)] = C64::new(-1.0, 0.0);
        assert!(psd_sqrt_checked(&a).is_err());
    }

    #[test]
    fn cdot_is_trace_form() {
        let mut rng = ChaCha8Rng::seed_from_u64(4);
        let a = rand_cmat(&mut rng, 3, 4);
        let b = rand_cmat(&mut rng, 3, 4);
        let direct = cdot(&a, &b);
        let tr = (a.adjoint() * &b).trace();
        assert!((direct - tr).norm() < 1e-12);
    }
}
