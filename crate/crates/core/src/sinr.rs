//! Closed-form hardening-bound SINRs and the Kronecker-structured operators
//! behind them.
//!
//! With `a_{p,k} = vec(A_{p,k})` and `a_c = vec(A_c)` the relevant operators
//! are
//!
//! - `q_k = vec(C_k Phi)`, so `q_k^H a_{p,k} = <C_k Phi, A_{p,k}>`,
//! - `Q_{i,k} = C_{y_i}^T (x) C_k` applied as `X -> C_k X C_{y_i}`,
//! - `z_k`: zero except `C_k Phi` in user `k`'s block of the `M x K T_dl`
//!   reshape,
//! - `Z_k = C_y^T (x) C_k` applied as `X -> C_k X C_y`,
//! - `F_{p,k} = C_{y_k}^T (x) I_M`, `F_c = C_y^T (x) I_M`.
//!
//! All applications run on the matrix reshape; nothing of Kronecker size is
//! ever materialized. Fractional powers `Z_k^{+-1/2}` use the factorized
//! eigenbases of `C_k` (floored for the inverse root) and of each `C_{y_i}`.

use crate::channel::CovarianceSet;
use crate::linalg::{cdot, herm_power, hermitianize};
use crate::training::ObservationModel;
use crate::{C64, CMat, CVec, Error, Result};

/// Relative eigenvalue floor used when inverting rank-deficient covariances.
pub const EIG_FLOOR_REL: f64 = 1e-10;

/// Deterministic bilinear transforms plus the common power fraction.
#[derive(Debug, Clone)]
pub struct PrecoderTransforms {
    /// Private transforms `A_{p,k}`, each `M x T_dl`.
    pub a_p: Vec<CMat>,
    /// Common transform `A_c`, `M x (K T_dl)`.
    pub a_c: CMat,
    /// Power fraction allocated to the common stream.
    pub alpha_c: f64,
}

impl PrecoderTransforms {
    pub fn zeros(m: usize, k: usize, t_dl: usize) -> Self {
        PrecoderTransforms {
            a_p: vec![CMat::zeros(m, t_dl); k],
            a_c: CMat::zeros(m, k * t_dl),
            alpha_c: 0.0,
        }
    }
}

/// First and second moments of the effective channels seen by each user.
#[derive(Debug, Clone)]
pub struct EffectiveChannelStats {
    /// `E[h_k^H p_c]` per user.
    pub mean_c: Vec<C64>,
    /// `E[h_k^H p_{p,k}]` per user (cross means vanish).
    pub mean_p: Vec<C64>,
    /// `var(h_k^H p_c)` per user.
    pub var_c: Vec<f64>,
    /// `var(h_k^H p_{p,k})` per user.
    pub var_p: Vec<f64>,
    /// `E[|h_k^H p_{p,i}|^2]`, indexed `[k][i]`.
    pub cross_power: Vec<Vec<f64>>,
}

/// Immutable operator workspace for one `(covariances, pilot, sigma_n2)` set.
pub struct SinrOperators {
    m: usize,
    k: usize,
    t_dl: usize,
    /// `C_k`.
    c: Vec<CMat>,
    /// `C_k Phi` (the matrix form of `q_k` and of `z_k`'s only block).
    q_mat: Vec<CMat>,
    /// Observation covariances `C_{y_k}` and cached powers.
    c_yk: Vec<CMat>,
    c_yk_inv: Vec<CMat>,
    c_yk_sqrt: Vec<CMat>,
    c_yk_inv_sqrt: Vec<CMat>,
    /// `C_k^{1/2}` (eigenvalues clamped at zero).
    c_sqrt: Vec<CMat>,
    /// `C_k^{-1/2}` with the relative eigenvalue floor.
    c_inv_sqrt: Vec<CMat>,
    phi: CMat,
    sigma_n2: f64,
}

impl SinrOperators {
    pub fn new(cov: &CovarianceSet, obs: &ObservationModel) -> Result<Self> {
        if obs.m() != cov.m() || obs.k() != cov.k() {
            return Err(Error::DimensionMismatch(
                "observation model does not match covariance set".into(),
            ));
        }
        let c: Vec<CMat> = cov.iter().map(hermitianize).collect();
        let q_mat = c.iter().map(|ck| ck * &obs.phi).collect();
        let c_yk = obs.c_yk.clone();
        let c_yk_inv = c_yk.iter().map(|x| herm_power(x, -1.0, 0.0)).collect();
        let c_yk_sqrt = c_yk.iter().map(|x| herm_power(x, 0.5, 0.0)).collect();
        let c_yk_inv_sqrt = c_yk.iter().map(|x| herm_power(x, -0.5, 0.0)).collect();
        let c_sqrt = c.iter().map(|x| herm_power(x, 0.5, 0.0)).collect();
        let c_inv_sqrt = c
            .iter()
            .map(|x| herm_power(x, -0.5, EIG_FLOOR_REL))
            .collect();
        Ok(SinrOperators {
            m: cov.m(),
            k: cov.k(),
            t_dl: obs.t_dl,
            c,
            q_mat,
            c_yk,
            c_yk_inv,
            c_yk_sqrt,
            c_yk_inv_sqrt,
            c_sqrt,
            c_inv_sqrt,
            phi: obs.phi.clone(),
            sigma_n2: obs.sigma_n2,
        })
    }

    pub fn m(&self) -> usize {
        self.m
    }
    pub fn k(&self) -> usize {
        self.k
    }
    pub fn t_dl(&self) -> usize {
        self.t_dl
    }
    pub fn sigma_n2(&self) -> f64 {
        self.sigma_n2
    }
    pub fn phi(&self) -> &CMat {
        &self.phi
    }
    pub fn c(&self, k: usize) -> &CMat {
        &self.c[k]
    }
    pub fn c_yk(&self, k: usize) -> &CMat {
        &self.c_yk[k]
    }
    /// `C_k Phi`, i.e. the matrix whose vectorization is `q_k`.
    pub fn q_mat(&self, k: usize) -> &CMat {
        &self.q_mat[k]
    }
    /// `C_{y_k}^{-1}`.
    pub fn c_yk_inv(&self, k: usize) -> &CMat {
        &self.c_yk_inv[k]
    }

    fn check_private(&self, a: &CMat) -> Result<()> {
        if a.nrows() != self.m || a.ncols() != self.t_dl {
            return Err(Error::DimensionMismatch(format!(
                "private transform must be {}x{}, got {}x{}",
                self.m,
                self.t_dl,
                a.nrows(),
                a.ncols()
            )));
        }
        Ok(())
    }

    fn check_common(&self, a: &CMat) -> Result<()> {
        if a.nrows() != self.m || a.ncols() != self.k * self.t_dl {
            return Err(Error::DimensionMismatch(format!(
                "common transform must be {}x{}, got {}x{}",
                self.m,
                self.k * self.t_dl,
                a.nrows(),
                a.ncols()
            )));
        }
        Ok(())
    }

    /// `q_k^H a_{p,k}` = the mean effective private channel of user `k`.
    pub fn q_dot(&self, k: usize, a_pk: &CMat) -> C64 {
        cdot(&self.q_mat[k], a_pk)
    }

    /// `a_{p,i}^H Q_{i,k} a_{p,i} = tr(A_i C_{y_i} A_i^H C_k)`.
    pub fn q_quad(&self, i: usize, k: usize, a_pi: &CMat) -> f64 {
        // <C_k A, A C_{y_i}>
        cdot(&(&self.c[k] * a_pi), &(a_pi * &self.c_yk[i])).re
    }

    /// `z_k^H a_c` (only user `k`'s block contributes).
    pub fn z_dot(&self, k: usize, a_c: &CMat) -> C64 {
        let block = a_c.view((0, k * self.t_dl), (self.m, self.t_dl));
        let mut acc = C64::new(0.0, 0.0);
        for (x, y) in self.q_mat[k].iter().zip(block.iter()) {
            acc += x.conj() * y;
        }
        acc
    }

    /// `X C_y` through the diagonal blocks.
    pub fn right_cy(&self, x: &CMat) -> CMat {
        self.right_blocks(x, &self.c_yk)
    }

    /// `X C_y^{1/2}`.
    pub fn right_cy_sqrt(&self, x: &CMat) -> CMat {
        self.right_blocks(x, &self.c_yk_sqrt)
    }

    /// `X C_y^{-1/2}`.
    pub fn right_cy_inv_sqrt(&self, x: &CMat) -> CMat {
        self.right_blocks(x, &self.c_yk_inv_sqrt)
    }

    /// `X C_y^{-1}`.
    pub fn right_cy_inv(&self, x: &CMat) -> CMat {
        self.right_blocks(x, &self.c_yk_inv)
    }

    fn right_blocks(&self, x: &CMat, blocks: &[CMat]) -> CMat {
        debug_assert_eq!(x.ncols(), self.k * self.t_dl);
        let mut out = CMat::zeros(x.nrows(), x.ncols());
        for (i, b) in blocks.iter().enumerate() {
            let src = x.view((0, i * self.t_dl), (x.nrows(), self.t_dl));
            let prod = src * b;
            out.view_mut((0, i * self.t_dl), (x.nrows(), self.t_dl))
                .copy_from(&prod);
        }
        out
    }

    /// `Z_k` applied to the reshape: `C_k X C_y`.
    pub fn z_apply(&self, k: usize, x: &CMat) -> CMat {
        &self.c[k] * self.right_cy(x)
    }

    /// `Z_k^{1/2}` applied: `C_k^{1/2} X C_y^{1/2}`.
    pub fn z_sqrt_apply(&self, k: usize, x: &CMat) -> CMat {
        &self.c_sqrt[k] * self.right_cy_sqrt(x)
    }

    /// `Z_k^{-1/2}` applied (floored inverse root of `C_k`).
    pub fn z_inv_sqrt_apply(&self, k: usize, x: &CMat) -> CMat {
        &self.c_inv_sqrt[k] * self.right_cy_inv_sqrt(x)
    }

    /// `a_c^H Z_k a_c = tr(A_c C_y A_c^H C_k)`.
    pub fn z_quad(&self, k: usize, a_c: &CMat) -> f64 {
        cdot(&(&self.c[k] * a_c), &self.right_cy(a_c)).re
    }

    /// Same, reusing a precomputed `A_c C_y`.
    pub fn z_quad_with(&self, k: usize, a_c: &CMat, a_c_cy: &CMat) -> f64 {
        cdot(&(&self.c[k] * a_c), a_c_cy).re
    }

    /// `a^H F_{p,k} a = tr(A C_{y_k} A^H)`.
    pub fn f_p_quad(&self, k: usize, a: &CMat) -> f64 {
        cdot(a, &(a * &self.c_yk[k])).re
    }

    /// Total private transmit power `sum_k a_{p,k}^H F_{p,k} a_{p,k}`.
    pub fn private_power(&self, a_p: &[CMat]) -> f64 {
        a_p.iter()
            .enumerate()
            .map(|(k, a)| self.f_p_quad(k, a))
            .sum()
    }

    /// `a_c^H F_c a_c = tr(A_c C_y A_c^H)`.
    pub fn f_c_quad(&self, a_c: &CMat) -> f64 {
        cdot(a_c, &self.right_cy(a_c)).re
    }

    /// `F_c` applied: `X C_y`.
    pub fn f_c_apply(&self, x: &CMat) -> CMat {
        self.right_cy(x)
    }

    /// `F_c^{1/2}` applied: `X C_y^{1/2}`.
    pub fn f_c_sqrt_apply(&self, x: &CMat) -> CMat {
        self.right_cy_sqrt(x)
    }

    /// Private interference-plus-noise constants
    /// `sigma_k^2 = sum_i a_{p,i}^H Q_{i,k} a_{p,i} + 1`.
    pub fn sigma2(&self, a_p: &[CMat]) -> Vec<f64> {
        let cy_a: Vec<CMat> = a_p
            .iter()
            .enumerate()
            .map(|(i, a)| a * &self.c_yk[i])
            .collect();
        (0..self.k)
            .map(|k| {
                1.0 + a_p
                    .iter()
                    .zip(cy_a.iter())
                    .map(|(a, acy)| cdot(&(&self.c[k] * a), acy).re)
                    .sum::<f64>()
            })
            .collect()
    }

    /// Private hardening SINRs `gamma_{p,k}` for a full transform set.
    pub fn private_sinrs(&self, a_p: &[CMat]) -> Result<Vec<f64>> {
        if a_p.len() != self.k {
            return Err(Error::DimensionMismatch("need one A_{p,k} per user".into()));
        }
        for a in a_p {
            self.check_private(a)?;
        }
        let s2 = self.sigma2(a_p);
        Ok((0..self.k)
            .map(|k| self.q_dot(k, &a_p[k]).norm_sqr() / s2[k])
            .collect())
    }

    /// Common hardening SINRs `gamma_{c,k}` given the private constants.
    pub fn common_sinrs(&self, a_c: &CMat, sigma2: &[f64]) -> Result<Vec<f64>> {
        self.check_common(a_c)?;
        let a_c_cy = self.right_cy(a_c);
        Ok((0..self.k)
            .map(|k| {
                let num = self.z_dot(k, a_c).norm_sqr();
                num / (self.z_quad_with(k, a_c, &a_c_cy) + sigma2[k])
            })
            .collect())
    }

    /// Effective-channel statistics for diagnostics and oracle tests.
    pub fn effective_stats(&self, tf: &PrecoderTransforms) -> Result<EffectiveChannelStats> {
        self.check_common(&tf.a_c)?;
        let mean_c: Vec<C64> = (0..self.k).map(|k| self.z_dot(k, &tf.a_c)).collect();
        let mean_p: Vec<C64> = (0..self.k).map(|k| self.q_dot(k, &tf.a_p[k])).collect();
        let var_c: Vec<f64> = (0..self.k).map(|k| self.z_quad(k, &tf.a_c)).collect();
        let var_p: Vec<f64> = (0..self.k)
            .map(|k| self.q_quad(k, k, &tf.a_p[k]))
            .collect();
        let cross_power = (0..self.k)
            .map(|k| {
                (0..self.k)
                    .map(|i| {
                        let base = self.q_quad(i, k, &tf.a_p[i]);
                        if i == k {
                            base + mean_p[k].norm_sqr()
                        } else {
                            base
                        }
                    })
                    .collect()
            })
            .collect();
        Ok(EffectiveChannelStats {
            mean_c,
            mean_p,
            var_c,
            var_p,
            cross_power,
        })
    }
}

/// Gaussian quartic moment `E[|h^H A Phi^H h|^2]` for `h ~ CN(0, C)`:
/// `|tr(A Phi^H C)|^2 + tr(A Phi^H C Phi A^H C)`.
pub fn quartic_moment(a: &CMat, phi: &CMat, c: &CMat) -> f64 {
    let b = a * phi.adjoint(); // M x M
    let first = (&b * c).trace().norm_sqr();
    let second = (&b * c * phi * a.adjoint() * c).trace().re;
    first + second
}

/// Hardening lower-bound rates: `(per-user common, per-user private)` in
/// bits/channel use. The deliverable common rate is `min_k` of the first.
pub fn hardening_rates(gamma_c: &[f64], gamma_p: &[f64]) -> (Vec<f64>, Vec<f64>) {
    let rc = gamma_c.iter().map(|g| (1.0 + g).log2()).collect();
    let rp = gamma_p.iter().map(|g| (1.0 + g).log2()).collect();
    (rc, rp)
}

/// Instantaneous rate breakdown for one channel realization.
#[derive(Debug, Clone)]
pub struct InstantRates {
    /// `min_k` of the per-user instantaneous common SINRs.
    pub gamma_c_min: f64,
    /// Per-user instantaneous private SINRs.
    pub gamma_p: Vec<f64>,
    /// Common rate `log2(1 + gamma_c_min)`.
    pub r_c: f64,
    /// Per-user private rates.
    pub r_p: Vec<f64>,
    /// `r_c + sum_k r_p[k]`.
    pub r_sum_rs: f64,
    /// `sum_k r_p[k]` (what the same precoders achieve without the common
    /// stream).
    pub r_sum_nors: f64,
}

/// Evaluate the realized SINRs for concrete `h_k`, `p_c`, `p_{p,k}`.
///
/// `gamma_{c,k} = |h_k^H p_c|^2 / (sum_j |h_k^H p_{p,j}|^2 + 1)`;
/// the private SINR excludes the self term from the denominator.
pub fn instantaneous_rates(h: &[CVec], p_c: &CVec, p_p: &[CVec]) -> InstantRates {
    let k = h.len();
    let mut cross = vec![vec![0.0; k]; k];
    let mut common = vec![0.0; k];
    for (kk, hk) in h.iter().enumerate() {
        common[kk] = crate::linalg::vdot(hk, p_c).norm_sqr();
        for (j, pj) in p_p.iter().enumerate() {
            cross[kk][j] = crate::linalg::vdot(hk, pj).norm_sqr();
        }
    }
    let mut gamma_c_min = f64::INFINITY;
    let mut gamma_p = vec![0.0; k];
    for kk in 0..k {
        let tot: f64 = cross[kk].iter().sum();
        let gc = common[kk] / (tot + 1.0);
        gamma_c_min = gamma_c_min.min(gc);
        gamma_p[kk] = cross[kk][kk] / (tot - cross[kk][kk] + 1.0);
    }
    if k == 0 {
        gamma_c_min = 0.0;
    }
    let r_c = (1.0 + gamma_c_min).log2();
    let r_p: Vec<f64> = gamma_p.iter().map(|g| (1.0 + g).log2()).collect();
    let r_sum_nors: f64 = r_p.iter().sum();
    InstantRates {
        gamma_c_min,
        gamma_p,
        r_c,
        r_p,
        r_sum_rs: r_c + r_sum_nors,
        r_sum_nors,
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::channel::{standard_cn, CovarianceSet};
    use crate::kron::{kron_dense, mat_of, vec_of};
    use crate::linalg::rel_diff;
    use crate::training::{build_pilot_matrix, observation_covariances};
    use rand::prelude::*;
    use rand_chacha::ChaCha8Rng;

    fn rand_psd(rng: &mut impl Rng, n: usize) -> CMat {
        let b = CMat::from_fn(n, n, |_, _| standard_cn(rng));
        (&b * b.adjoint()).scale(1.0 / n as f64)
    }

    fn small_ops(rng: &mut impl Rng, m: usize, k: usize, t: usize, sn2: f64) -> SinrOperators {
        let cov = CovarianceSet::from_matrices((0..k).map(|_| rand_psd(rng, m)).collect()).unwrap();
        let pilot = build_pilot_matrix(m, t).unwrap();
        let obs = observation_covariances(&cov, &pilot, sn2).unwrap();
        SinrOperators::new(&cov, &obs).unwrap()
    }

    fn rand_cmat(rng: &mut impl Rng, r: usize, c: usize) -> CMat {
        CMat::from_fn(r, c, |_, _| standard_cn(rng))
    }

    #[test]
    fn quartic_trivial_cases() {
        let a = CMat::zeros(2, 2);
        let phi = CMat::identity(2, 2);
        let c = CMat::identity(2, 2);
        assert_eq!(quartic_moment(&a, &phi, &c), 0.0);
        let a = CMat::identity(2, 2);
        assert!((quartic_moment(&a, &phi, &c) - 6.0).abs() < 1e-12);
    }

    #[test]
    fn quartic_matches_sampling_oracle() {
        let mut rng = ChaCha8Rng::seed_from_u64(10);
        let m = 3;
        let t = 2;
        let c = rand_psd(&mut rng, m);
        let pilot = build_pilot_matrix(m, t).unwrap();
        let a = rand_cmat(&mut rng, m, t);
        let formula = quartic_moment(&a, &pilot.phi, &c);
        let root = crate::linalg::psd_sqrt_checked(&c).unwrap();
        let n = 1_000_000;
        let b = &a * pilot.phi.adjoint();
        let mut acc = 0.0;
        for _ in 0..n {
            let w = CVec::from_fn(m, |_, _| standard_cn(&mut rng));
            let h = &root * w;
            acc += crate::linalg::vdot(&h, &(&b * &h)).norm_sqr();
        }
        acc /= n as f64;
        assert!(rel_diff(acc, formula) < 0.02, "MC {acc} vs formula {formula}");
    }

    #[test]
    fn private_sinr_zero_transforms() {
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let ops = small_ops(&mut rng, 4, 2, 2, 0.1);
        let a_p = vec![CMat::zeros(4, 2); 2];
        let g = ops.private_sinrs(&a_p).unwrap();
        assert!(g.iter().all(|&x| x == 0.0));
    }

    #[test]
    fn private_sinr_identity_case_analytic() {
        // M = T, Phi = I, C = I, A = c*I, K = 1:
        // gamma = c^2 M^2 / (c^2 M (1+sn2) + 1)
        let m = 4;
        let sn2 = 0.3;
        let cval = 0.7;
        let cov = CovarianceSet::from_matrices(vec![CMat::identity(m, m)]).unwrap();
        let pilot = build_pilot_matrix(m, m).unwrap();
        let obs = observation_covariances(&cov, &pilot, sn2).unwrap();
        let ops = SinrOperators::new(&cov, &obs).unwrap();
        let a = CMat::identity(m, m).scale(cval);
        let g = ops.private_sinrs(&[a]).unwrap()[0];
        let mf = m as f64;
        let want = cval * cval * mf * mf / (cval * cval * mf * (1.0 + sn2) + 1.0);
        assert!(rel_diff(g, want) < 1e-12, "{g} vs {want}");
    }

    #[test]
    fn common_sinr_zero_and_k1_reduction() {
        let mut rng = ChaCha8Rng::seed_from_u64(2);
        let ops = small_ops(&mut rng, 4, 1, 2, 0.2);
        let a_p = vec![CMat::zeros(4, 2)];
        let s2 = ops.sigma2(&a_p);
        let zero = CMat::zeros(4, 2);
        assert_eq!(ops.common_sinrs(&zero, &s2).unwrap()[0], 0.0);
        // K=1: numerator of common equals numerator of private for same block
        let a = rand_cmat(&mut rng, 4, 2);
        let num_c = ops.z_dot(0, &a).norm_sqr();
        let num_p = ops.q_dot(0, &a).norm_sqr();
        assert!(rel_diff(num_c, num_p) < 1e-14);
    }

    #[test]
    fn hardening_rate_values() {
        let (rc, rp) = hardening_rates(&[0.0, 1.0], &[3.0]);
        assert_eq!(rc[0], 0.0);
        assert!((rc[1] - 1.0).abs() < 1e-15);
        assert!((rp[0] - 2.0).abs() < 1e-15);
    }

    #[test]
    fn operators_match_dense_kron() {
        // Q_{i,k}, Z_k, F_{p,k}, F_c and Z^{+-1/2} against materialized
        // Kronecker products at M<=4, K<=2, T<=2.
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let (m, k, t) = (4, 2, 2);
        let ops = small_ops(&mut rng, m, k, t, 0.15);
        let eye_m = CMat::identity(m, m);
        let cy = {
            let kt = k * t;
            let mut out = CMat::zeros(kt, kt);
            for i in 0..k {
                out.view_mut((i * t, i * t), (t, t)).copy_from(&ops.c_yk[i]);
            }
            out
        };

        // F_c
        let x = rand_cmat(&mut rng, m, k * t);
        let dense = kron_dense(&eye_m, &cy) * vec_of(&x);
        let fast = vec_of(&ops.f_c_apply(&x));
        assert!((&dense - &fast).iter().map(|z| z.norm()).fold(0.0, f64::max) < 1e-10);

        for kk in 0..k {
            // Z_k
            let dense = kron_dense(ops.c(kk), &cy) * vec_of(&x);
            let fast = vec_of(&ops.z_apply(kk, &x));
            assert!((&dense - &fast).iter().map(|z| z.norm()).fold(0.0, f64::max) < 1e-10);

            // Q_{i,k} quadratic form via dense operator
            for i in 0..k {
                let xa = rand_cmat(&mut rng, m, t);
                let qd = kron_dense(ops.c(kk), &ops.c_yk[i].clone());
                let v = vec_of(&xa);
                let dense_q = crate::linalg::vdot(&v, &(&qd * &v)).re;
                assert!(rel_diff(dense_q, ops.q_quad(i, kk, &xa)) < 1e-10);
            }

            // F_{p,k} quadratic form
            let xa = rand_cmat(&mut rng, m, t);
            let fd = kron_dense(&eye_m, &ops.c_yk[kk].clone());
            let v = vec_of(&xa);
            let dense_f = crate::linalg::vdot(&v, &(&fd * &v)).re;
            assert!(rel_diff(dense_f, ops.f_p_quad(kk, &xa)) < 1e-10);

            // Z^{1/2}, Z^{-1/2} against factorized dense roots
            let c_sq = herm_power(ops.c(kk), 0.5, 0.0);
            let c_isq = herm_power(ops.c(kk), -0.5, EIG_FLOOR_REL);
            let cy_sq = herm_power(&cy, 0.5, 0.0);
            let cy_isq = herm_power(&cy, -0.5, 0.0);
            let dense_sqrt = kron_dense(&c_sq, &cy_sq) * vec_of(&x);
            let fast_sqrt = vec_of(&ops.z_sqrt_apply(kk, &x));
            assert!(
                (&dense_sqrt - &fast_sqrt).iter().map(|z| z.norm()).fold(0.0, f64::max) < 1e-10
            );
            let dense_isqrt = kron_dense(&c_isq, &cy_isq) * vec_of(&x);
            let fast_isqrt = vec_of(&ops.z_inv_sqrt_apply(kk, &x));
            assert!(
                (&dense_isqrt - &fast_isqrt).iter().map(|z| z.norm()).fold(0.0, f64::max) < 1e-10
            );
        }
    }

    #[test]
    fn operator_vec_roundtrip() {
        let v = CVec::from_fn(6, |i, _| C64::new(i as f64, -(i as f64)));
        let m = mat_of(&v, 2, 3);
        assert_eq!(vec_of(&m), v);
    }

    #[test]
    fn private_scaling_law() {
        // scaling all private transforms by real c with a_c = 0 multiplies
        // every numerator and interference term by c^2
        let mut rng = ChaCha8Rng::seed_from_u64(4);
        let ops = small_ops(&mut rng, 4, 2, 2, 0.2);
        let a_p: Vec<CMat> = (0..2).map(|_| rand_cmat(&mut rng, 4, 2)).collect();
        let c = 1.7;
        let scaled: Vec<CMat> = a_p.iter().map(|a| a.scale(c)).collect();
        for k in 0..2 {
            let n0 = ops.q_dot(k, &a_p[k]).norm_sqr();
            let n1 = ops.q_dot(k, &scaled[k]).norm_sqr();
            assert!(rel_diff(n1, c * c * n0) < 1e-12);
            for i in 0..2 {
                let t0 = ops.q_quad(i, k, &a_p[i]);
                let t1 = ops.q_quad(i, k, &scaled[i]);
                assert!(rel_diff(t1, c * c * t0) < 1e-12);
            }
        }
    }

    #[test]
    fn instantaneous_rates_trivial_cases() {
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        let h: Vec<CVec> = (0..2).map(|_| CVec::from_fn(4, |_, _| standard_cn(&mut rng))).collect();
        let p_p: Vec<CVec> = (0..2).map(|_| CVec::from_fn(4, |_, _| standard_cn(&mut rng))).collect();
        // p_c = 0 -> RS equals noRS
        let r = instantaneous_rates(&h, &CVec::zeros(4), &p_p);
        assert_eq!(r.r_sum_rs, r.r_sum_nors);
        assert_eq!(r.gamma_c_min, 0.0);
        // K=1 matched filter: gamma = P * ||h||^2
        let h1 = CVec::from_fn(4, |_, _| standard_cn(&mut rng));
        let p = 3.0f64;
        let nh = h1.iter().map(|z| z.norm_sqr()).sum::<f64>().sqrt();
        let pp1 = h1.scale(p.sqrt() / nh);
        let r1 = instantaneous_rates(std::slice::from_ref(&h1), &CVec::zeros(4), &[pp1]);
        assert!(rel_diff(r1.gamma_p[0], p * nh * nh) < 1e-12);
        // common part is nonnegative
        let pc = CVec::from_fn(4, |_, _| standard_cn(&mut rng));
        let r2 = instantaneous_rates(&h, &pc, &p_p);
        assert!(r2.r_sum_rs >= r2.r_sum_nors);
    }

    #[test]
    fn closed_forms_match_joint_monte_carlo() {
        // every expectation term in gamma_p / gamma_c vs 1e5 joint draws
        let mut rng = ChaCha8Rng::seed_from_u64(6);
        let (m, k, t) = (4, 2, 2);
        let cov =
            CovarianceSet::from_matrices((0..k).map(|_| rand_psd(&mut rng, m)).collect()).unwrap();
        let pilot = build_pilot_matrix(m, t).unwrap();
        let sn2 = 0.1;
        let obs = observation_covariances(&cov, &pilot, sn2).unwrap();
        let ops = SinrOperators::new(&cov, &obs).unwrap();
        // transforms with solid means: matched blocks plus a perturbation
        let mut a_p: Vec<CMat> = (0..k).map(|kk| ops.q_mat(kk).clone()).collect();
        for a in a_p.iter_mut() {
            *a += rand_cmat(&mut rng, m, t).scale(0.2);
        }
        let mut a_c = CMat::zeros(m, k * t);
        for kk in 0..k {
            a_c.view_mut((0, kk * t), (m, t))
                .copy_from(&(ops.q_mat(kk) + rand_cmat(&mut rng, m, t).scale(0.2)));
        }
        let tf = PrecoderTransforms {
            a_p: a_p.clone(),
            a_c: a_c.clone(),
            alpha_c: 0.5,
        };
        let stats = ops.effective_stats(&tf).unwrap();

        let sampler = cov.sampler().unwrap();
        let n = 100_000;
        let mut mean_p = vec![C64::new(0.0, 0.0); k];
        let mut mean_c = vec![C64::new(0.0, 0.0); k];
        let mut pow_c = vec![0.0; k];
        let mut pow_cross = vec![vec![0.0; k]; k];
        for _ in 0..n {
            let h = sampler.sample(&mut rng);
            let batch =
                crate::training::ObservationBatch::collect(&h, &pilot.phi, sn2, &mut rng);
            let y = batch.stacked();
            let p_c = &a_c * &y;
            let p_p: Vec<CVec> = (0..k).map(|i| &a_p[i] * &batch.per_user[i]).collect();
            for kk in 0..k {
                mean_p[kk] += crate::linalg::vdot(&h[kk], &p_p[kk]);
                let hc = crate::linalg::vdot(&h[kk], &p_c);
                mean_c[kk] += hc;
                pow_c[kk] += hc.norm_sqr();
                for i in 0..k {
                    pow_cross[kk][i] += crate::linalg::vdot(&h[kk], &p_p[i]).norm_sqr();
                }
            }
        }
        let nf = n as f64;
        for kk in 0..k {
            let mp = mean_p[kk] / nf;
            let mc = mean_c[kk] / nf;
            assert!(
                rel_diff(mp.norm_sqr(), stats.mean_p[kk].norm_sqr()) < 0.02,
                "private mean user {kk}"
            );
            assert!(
                rel_diff(mc.norm_sqr(), stats.mean_c[kk].norm_sqr()) < 0.02,
                "common mean user {kk}"
            );
            let var_c = pow_c[kk] / nf - mc.norm_sqr();
            assert!(rel_diff(var_c, stats.var_c[kk]) < 0.02, "common var user {kk}");
            for i in 0..k {
                assert!(
                    rel_diff(pow_cross[kk][i] / nf, stats.cross_power[kk][i]) < 0.02,
                    "cross power ({kk},{i})"
                );
            }
        }
    }
}
