//! Private precoder optimization: Lagrangian dual transform (slacks `alpha`),
//! quadratic transform (auxiliaries `beta`), closed-form `a_{p,k}(lambda)`,
//! and bisection on the power multiplier `lambda`.
//!
//! The `lambda`-system `(|beta_k|^2 q_k q_k^H + sum_i |beta_i|^2 Q_{k,i}
//! + lambda F_{p,k}) a = q_k` has Kronecker structure: everything except the
//! rank-one term collapses to `C_{y_k}^T (x) (G + lambda I)` with
//! `G = sum_i |beta_i|^2 C_i`. One Hermitian eigendecomposition of `G` per
//! outer iteration plus Sherman-Morrison gives every `a_{p,k}(lambda)`
//! evaluation in `O(M^2 T_dl)`, which makes the bisection essentially free.
//! Equivalence with the dense solve is pinned by tests.

use crate::linalg::cdot;
use crate::sinr::SinrOperators;
use crate::{C64, CMat, Error, Result};

/// Convergence controls for [`optimize_private`].
#[derive(Debug, Clone)]
pub struct PrivateOptParams {
    /// Relative tolerance on the objective trace.
    pub tol: f64,
    /// Outer iteration cap.
    pub max_iter: usize,
    /// Relative power tolerance of the lambda bisection.
    pub bisect_eps: f64,
}

impl Default for PrivateOptParams {
    fn default() -> Self {
        PrivateOptParams {
            tol: 1e-5,
            max_iter: 200,
            bisect_eps: 1e-6,
        }
    }
}

/// Result of one private optimization run.
#[derive(Debug, Clone)]
pub struct PrivateSolution {
    pub a_p: Vec<CMat>,
    /// Objective value per outer iteration, recorded right after the alpha
    /// update (equals the lower-bound sum rate in bits at that iterate).
    pub f1a_trace: Vec<f64>,
    /// Transmit power of the returned transforms.
    pub power: f64,
    pub iterations: usize,
}

/// Objective of the Lagrangian dual transform, in bits:
/// `[sum ln(1+alpha_k) - sum alpha_k + sum (1+alpha_k) g_k/(1+g_k)] / ln 2`.
///
/// At `alpha_k = gamma_k` this equals `sum log2(1+gamma_k)`, the hardening
/// lower-bound sum rate, and `alpha = gamma` is its exact maximizer over the
/// slacks.
pub fn f1a(ops: &SinrOperators, a_p: &[CMat], alpha: &[f64]) -> Result<f64> {
    let gamma = ops.private_sinrs(a_p)?;
    Ok(f1a_from(&gamma, alpha))
}

pub(crate) fn f1a_from(gamma: &[f64], alpha: &[f64]) -> f64 {
    let nats: f64 = gamma
        .iter()
        .zip(alpha.iter())
        .map(|(&g, &a)| (1.0 + a).ln() - a + (1.0 + a) * g / (1.0 + g))
        .sum();
    nats / std::f64::consts::LN_2
}

/// Optimal slacks: `alpha_k = gamma_{p,k}`.
pub fn update_alpha(ops: &SinrOperators, a_p: &[CMat]) -> Result<Vec<f64>> {
    ops.private_sinrs(a_p)
}

/// Optimal quadratic-transform auxiliaries
/// `beta_k = sqrt(1+alpha_k) q_k^H a_{p,k} / (sigma_k^2 + |q_k^H a_{p,k}|^2)`.
pub fn update_beta(ops: &SinrOperators, a_p: &[CMat], alpha: &[f64]) -> Result<Vec<C64>> {
    if a_p.len() != ops.k() || alpha.len() != ops.k() {
        return Err(Error::DimensionMismatch(
            "need K transforms and K slacks".into(),
        ));
    }
    let s2 = ops.sigma2(a_p);
    Ok((0..ops.k())
        .map(|k| {
            let num = ops.q_dot(k, &a_p[k]);
            let den = s2[k] + num.norm_sqr();
            num.scale((1.0 + alpha[k]).sqrt() / den)
        })
        .collect())
}

/// Quadratic-transform surrogate
/// `f_{2a} = sum_k 2 sqrt(1+alpha_k) Re{beta_k^* q_k^H a_{p,k}}
///  - sum_k |beta_k|^2 (|q_k^H a_{p,k}|^2 + sigma_k^2)`.
pub fn f2a(ops: &SinrOperators, a_p: &[CMat], alpha: &[f64], beta: &[C64]) -> Result<f64> {
    if a_p.len() != ops.k() {
        return Err(Error::DimensionMismatch("need K transforms".into()));
    }
    let s2 = ops.sigma2(a_p);
    Ok((0..ops.k())
        .map(|k| {
            let qa = ops.q_dot(k, &a_p[k]);
            2.0 * (1.0 + alpha[k]).sqrt() * (beta[k].conj() * qa).re
                - beta[k].norm_sqr() * (qa.norm_sqr() + s2[k])
        })
        .sum())
}

/// The sum of ratios `f_2 = sum_k (1+alpha_k) gamma_k / (1+gamma_k)` that
/// `f_{2a}` majorizes (tight at `beta = beta_opt`).
pub fn f2(ops: &SinrOperators, a_p: &[CMat], alpha: &[f64]) -> Result<f64> {
    let gamma = ops.private_sinrs(a_p)?;
    Ok(gamma
        .iter()
        .zip(alpha.iter())
        .map(|(&g, &a)| (1.0 + a) * g / (1.0 + g))
        .sum())
}

/// Factorized solver for `a_{p,k}(lambda)` at fixed `(alpha, beta)`.
pub struct LambdaSolver<'a> {
    ops: &'a SinrOperators,
    alpha: Vec<f64>,
    beta: Vec<C64>,
    /// Eigenvectors of `G = sum_i |beta_i|^2 C_i`.
    g_vecs: CMat,
    /// Eigenvalues of `G`, clamped at zero.
    g_vals: Vec<f64>,
    /// `U^H (C_k Phi) C_{y_k}^{-1}` per user.
    rhs: Vec<CMat>,
    all_beta_zero: bool,
}

impl<'a> LambdaSolver<'a> {
    pub fn new(ops: &'a SinrOperators, alpha: &[f64], beta: &[C64]) -> Result<Self> {
        if alpha.len() != ops.k() || beta.len() != ops.k() {
            return Err(Error::DimensionMismatch(
                "need K slacks and K auxiliaries".into(),
            ));
        }
        let m = ops.m();
        let mut g = CMat::zeros(m, m);
        let mut all_beta_zero = true;
        for (i, b) in beta.iter().enumerate() {
            let w = b.norm_sqr();
            if w > 0.0 {
                all_beta_zero = false;
                g += ops.c(i).scale(w);
            }
        }
        let (g_vals, g_vecs) = crate::linalg::herm_eigen(&g);
        let g_vals: Vec<f64> = g_vals.iter().map(|&x| x.max(0.0)).collect();
        let rhs = (0..ops.k())
            .map(|k| (g_vecs.adjoint() * ops.q_mat(k)) * ops.c_yk_inv(k))
            .collect();
        Ok(LambdaSolver {
            ops,
            alpha: alpha.to_vec(),
            beta: beta.to_vec(),
            g_vals,
            g_vecs,
            rhs,
            all_beta_zero,
        })
    }

    fn g_max(&self) -> f64 {
        self.g_vals.iter().cloned().fold(0.0, f64::max)
    }

    /// Whether the system matrix is positive definite at `lambda = 0`.
    pub fn invertible_at_zero(&self) -> bool {
        let gmax = self.g_max();
        !self.all_beta_zero && self.g_vals.iter().all(|&x| x > 1e-12 * gmax.max(1e-300))
    }

    /// All `a_{p,k}(lambda)` via Sherman-Morrison on the factorized system.
    pub fn solve(&self, lambda: f64) -> Result<Vec<CMat>> {
        if lambda < 0.0 {
            return Err(Error::InvalidConfig("lambda must be >= 0".into()));
        }
        if lambda == 0.0 && self.all_beta_zero {
            return Err(Error::DegenerateState(
                "all beta vanish and lambda = 0: system matrix is singular".into(),
            ));
        }
        if lambda == 0.0 && !self.invertible_at_zero() {
            return Err(Error::DegenerateState("G is singular at lambda = 0".into()));
        }
        let inv: Vec<f64> = self.g_vals.iter().map(|&x| 1.0 / (x + lambda)).collect();
        let mut out = Vec::with_capacity(self.ops.k());
        for k in 0..self.ops.k() {
            if self.beta[k].norm_sqr() == 0.0 {
                out.push(CMat::zeros(self.ops.m(), self.ops.t_dl()));
                continue;
            }
            // W = (G + lambda I)^{-1} (C_k Phi) C_{y_k}^{-1}
            let mut scaled = self.rhs[k].clone();
            for (r, &iv) in inv.iter().enumerate() {
                for c in 0..scaled.ncols() {
                    scaled[(r, c)] *= iv;
                }
            }
            let w = &self.g_vecs * scaled;
            // Sherman-Morrison against the rank-one |beta_k|^2 q_k q_k^H
            let qw = cdot(self.ops.q_mat(k), &w);
            let denom = C64::new(1.0, 0.0) + qw.scale(self.beta[k].norm_sqr());
            let coef = self.beta[k].scale((1.0 + self.alpha[k]).sqrt()) / denom;
            out.push(w.map(|z| z * coef));
        }
        Ok(out)
    }

    /// Transmit power of the solution at `lambda`.
    pub fn power(&self, lambda: f64) -> Result<f64> {
        Ok(self.ops.private_power(&self.solve(lambda)?))
    }
}

/// Standalone closed-form solve at a given multiplier.
pub fn solve_ap_given_lambda(
    ops: &SinrOperators,
    alpha: &[f64],
    beta: &[C64],
    lambda: f64,
) -> Result<Vec<CMat>> {
    LambdaSolver::new(ops, alpha, beta)?.solve(lambda)
}

/// Bisection on `lambda` until the private power meets the budget.
///
/// Returns `(lambda, a_p)`. If `lambda = 0` is already feasible it is
/// returned directly (inactive constraint).
pub fn bisect_lambda(
    ops: &SinrOperators,
    alpha: &[f64],
    beta: &[C64],
    budget: f64,
    eps: f64,
) -> Result<(f64, Vec<CMat>)> {
    if !(budget > 0.0) {
        return Err(Error::InvalidConfig("bisection budget must be > 0".into()));
    }
    let solver = LambdaSolver::new(ops, alpha, beta)?;
    if beta.iter().all(|b| b.norm_sqr() == 0.0) {
        // zero numerators: the zero solution is feasible (degenerate state)
        return Ok((0.0, vec![CMat::zeros(ops.m(), ops.t_dl()); ops.k()]));
    }
    if solver.invertible_at_zero() && solver.power(0.0)? <= budget {
        return Ok((0.0, solver.solve(0.0)?));
    }
    // power(lambda) is monotone decreasing; expand the bracket upward
    let mut hi = 1.0f64;
    let mut doublings = 0;
    while solver.power(hi)? > budget {
        hi *= 2.0;
        doublings += 1;
        if doublings > 200 {
            return Err(Error::NumericalBreakdown(
                "lambda bracket expansion failed after 200 doublings".into(),
            ));
        }
    }
    let mut lo = if hi > 1.0 { hi / 2.0 } else { 0.0 };
    // tighten well past eps so downstream monotonicity checks have headroom
    let target = (eps * 1e-5).max(1e-13);
    let mut best = hi;
    let mut last_power = solver.power(best)?;
    for _ in 0..300 {
        if (last_power - budget).abs() <= target * budget {
            break;
        }
        let mid = 0.5 * (lo + hi);
        if mid <= lo || mid >= hi {
            break;
        }
        if solver.power(mid)? > budget {
            lo = mid;
        } else {
            hi = mid;
            best = mid;
            last_power = solver.power(best)?;
        }
    }
    let a_p = solver.solve(best)?;
    let p = ops.private_power(&a_p);
    if (p - budget).abs() > eps * budget {
        return Err(Error::NumericalBreakdown(format!(
            "lambda bisection left power {p:.6e} vs budget {budget:.6e}"
        )));
    }
    Ok((best, a_p))
}

/// Default initialization `A_{p,k} = Phi` (scaled to the budget by the
/// caller).
pub fn default_private_init(ops: &SinrOperators) -> Vec<CMat> {
    vec![ops.phi().clone(); ops.k()]
}

/// Full private optimization loop: alpha, beta, lambda bisection, transform
/// update, until the objective trace converges.
///
/// `init` (if given) is rescaled to meet the budget with equality; a zero or
/// missing init falls back to the pilot-based default.
pub fn optimize_private(
    ops: &SinrOperators,
    budget: f64,
    init: Option<&[CMat]>,
    params: &PrivateOptParams,
) -> Result<PrivateSolution> {
    let (m, t) = (ops.m(), ops.t_dl());
    let zeros = || PrivateSolution {
        a_p: vec![CMat::zeros(m, t); ops.k()],
        f1a_trace: vec![0.0],
        power: 0.0,
        iterations: 0,
    };
    if budget <= 0.0 {
        return Ok(zeros());
    }

    // degenerate users (covariance orthogonal to the pilots) stay at zero
    let qnorm: Vec<f64> = (0..ops.k())
        .map(|k| crate::linalg::fro_norm2(ops.q_mat(k)).sqrt())
        .collect();
    let qmax = qnorm.iter().cloned().fold(0.0, f64::max);
    if qmax == 0.0 {
        return Ok(zeros());
    }
    let active: Vec<bool> = qnorm.iter().map(|&n| n > 1e-12 * qmax).collect();

    let mut a_p: Vec<CMat> = match init {
        Some(warm) if warm.len() == ops.k() && ops.private_power(warm) > 0.0 => warm.to_vec(),
        _ => default_private_init(ops),
    };
    for (k, act) in active.iter().enumerate() {
        if !act {
            a_p[k] = CMat::zeros(m, t);
        }
    }
    if ops.private_power(&a_p) <= 0.0 {
        a_p = default_private_init(ops);
    }
    let scale = (budget / ops.private_power(&a_p)).sqrt();
    for a in a_p.iter_mut() {
        *a *= C64::new(scale, 0.0);
    }

    let mut trace = Vec::new();
    let mut iterations = 0;
    for it in 0..params.max_iter {
        iterations = it + 1;
        let gamma = ops.private_sinrs(&a_p)?;
        let alpha = gamma;
        let f = f1a_from(&alpha, &alpha);
        trace.push(f);
        if it > 0 {
            let prev = trace[it - 1];
            if (f - prev).abs() < params.tol * prev.abs().max(1e-12) {
                break;
            }
        }
        let mut beta = update_beta(ops, &a_p, &alpha)?;
        for (k, act) in active.iter().enumerate() {
            if !act {
                beta[k] = C64::new(0.0, 0.0);
            }
        }
        let (_, next) = bisect_lambda(ops, &alpha, &beta, budget, params.bisect_eps)?;
        a_p = next;
    }
    let power = ops.private_power(&a_p);
    Ok(PrivateSolution {
        a_p,
        f1a_trace: trace,
        power,
        iterations,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::channel::{standard_cn, CovarianceSet};
    use crate::kron::{kron_dense, vec_of};
    use crate::linalg::rel_diff;
    use crate::training::{build_pilot_matrix, observation_covariances};
    use crate::CVec;
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

    fn rand_transforms(rng: &mut impl Rng, ops: &SinrOperators) -> Vec<CMat> {
        (0..ops.k())
            .map(|_| CMat::from_fn(ops.m(), ops.t_dl(), |_, _| standard_cn(rng)))
            .collect()
    }

    #[test]
    fn f1a_zero_state() {
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let ops = small_ops(&mut rng, 4, 2, 2, 0.1);
        let zeros = vec![CMat::zeros(4, 2); 2];
        assert_eq!(f1a(&ops, &zeros, &[0.0, 0.0]).unwrap(), 0.0);
    }

    #[test]
    fn f1a_at_alpha_gamma_recovers_lb_objective() {
        let mut rng = ChaCha8Rng::seed_from_u64(2);
        let ops = small_ops(&mut rng, 4, 2, 2, 0.1);
        let a_p = rand_transforms(&mut rng, &ops);
        let gamma = ops.private_sinrs(&a_p).unwrap();
        let lb: f64 = gamma.iter().map(|g| (1.0 + g).log2()).sum();
        let f = f1a(&ops, &a_p, &gamma).unwrap();
        assert!(rel_diff(f, lb) < 1e-12);
    }

    #[test]
    fn alpha_equals_gamma_is_argmax() {
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let ops = small_ops(&mut rng, 4, 2, 2, 0.1);
        let a_p = rand_transforms(&mut rng, &ops);
        let gamma = ops.private_sinrs(&a_p).unwrap();
        let base = f1a(&ops, &a_p, &gamma).unwrap();
        for _ in 0..100 {
            let pert: Vec<f64> = gamma
                .iter()
                .map(|&g| {
                    (g * (1.0 + 0.5 * (rng.gen::<f64>() - 0.5)) + 0.01 * rng.gen::<f64>()).max(0.0)
                })
                .collect();
            assert!(f1a(&ops, &a_p, &pert).unwrap() <= base + 1e-12);
        }
    }

    #[test]
    fn update_alpha_is_gamma_and_single_user_analytic() {
        let m = 4;
        let sn2 = 0.3;
        let cval = 0.7;
        let cov = CovarianceSet::from_matrices(vec![CMat::identity(m, m)]).unwrap();
        let pilot = build_pilot_matrix(m, m).unwrap();
        let obs = observation_covariances(&cov, &pilot, sn2).unwrap();
        let ops = SinrOperators::new(&cov, &obs).unwrap();
        let a = CMat::identity(m, m).scale(cval);
        let alpha = update_alpha(&ops, &[a]).unwrap();
        let mf = m as f64;
        let want = cval * cval * mf * mf / (cval * cval * mf * (1.0 + sn2) + 1.0);
        assert!(rel_diff(alpha[0], want) < 1e-12);
        let z = update_alpha(&ops, &[CMat::zeros(m, m)]).unwrap();
        assert_eq!(z[0], 0.0);
    }

    #[test]
    fn beta_update_stationarity_and_tightness() {
        let mut rng = ChaCha8Rng::seed_from_u64(4);
        let ops = small_ops(&mut rng, 4, 3, 2, 0.15);
        let a_p = rand_transforms(&mut rng, &ops);
        let alpha = update_alpha(&ops, &a_p).unwrap();
        let beta = update_beta(&ops, &a_p, &alpha).unwrap();

        // tightness: f2a(beta_opt) == f2
        let s_tight = f2a(&ops, &a_p, &alpha, &beta).unwrap();
        let s_f2 = f2(&ops, &a_p, &alpha).unwrap();
        assert!((s_tight - s_f2).abs() < 1e-10 * s_f2.abs().max(1.0));

        // stationarity: numeric derivative of f2a wrt each beta_k vanishes
        let h = 1e-6;
        for k in 0..3 {
            for dir in [C64::new(h, 0.0), C64::new(0.0, h)] {
                let mut bp = beta.clone();
                bp[k] += dir;
                let mut bm = beta.clone();
                bm[k] -= dir;
                let d = (f2a(&ops, &a_p, &alpha, &bp).unwrap()
                    - f2a(&ops, &a_p, &alpha, &bm).unwrap())
                    / (2.0 * h);
                assert!(d.abs() < 1e-6, "derivative {d} at user {k}");
            }
            // perturbing beta_k strictly decreases f2a
            let mut bp = beta.clone();
            bp[k] += C64::new(1e-3, -1e-3);
            assert!(f2a(&ops, &a_p, &alpha, &bp).unwrap() < s_tight);
        }

        // beta vanishes with the numerator
        let mut zp = a_p.clone();
        zp[1] = CMat::zeros(4, 2);
        let alpha2 = update_alpha(&ops, &zp).unwrap();
        let beta2 = update_beta(&ops, &zp, &alpha2).unwrap();
        assert_eq!(beta2[1], C64::new(0.0, 0.0));
    }

    #[test]
    fn lambda_solve_matches_dense_system() {
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        let (m, k, t) = (3, 2, 2);
        let ops = small_ops(&mut rng, m, k, t, 0.2);
        let a_p = rand_transforms(&mut rng, &ops);
        let alpha = update_alpha(&ops, &a_p).unwrap();
        let beta = update_beta(&ops, &a_p, &alpha).unwrap();
        let lambda = 0.37;
        let fast = solve_ap_given_lambda(&ops, &alpha, &beta, lambda).unwrap();
        let eye_m = CMat::identity(m, m);
        for kk in 0..k {
            let q: CVec = vec_of(ops.q_mat(kk));
            let mut sys = CMat::zeros(m * t, m * t);
            for i in 0..k {
                sys += kron_dense(ops.c(i), ops.c_yk(kk)).scale(beta[i].norm_sqr());
            }
            sys += kron_dense(&eye_m, ops.c_yk(kk)).scale(lambda);
            sys += (&q * q.adjoint()).scale(beta[kk].norm_sqr());
            let rhs = q.scale((1.0 + alpha[kk]).sqrt()) * beta[kk];
            let dense = sys.clone().lu().solve(&rhs).unwrap();
            let err = (&dense - &vec_of(&fast[kk]))
                .iter()
                .map(|z| z.norm())
                .fold(0.0, f64::max);
            assert!(err < 1e-8, "user {kk}: max err {err}");
            // residual of the linear system
            let resid = &sys * vec_of(&fast[kk]) - &rhs;
            let rn = resid.iter().map(|z| z.norm_sqr()).sum::<f64>().sqrt();
            let bn = rhs.iter().map(|z| z.norm_sqr()).sum::<f64>().sqrt();
            assert!(rn <= 1e-8 * bn.max(1e-300));
        }
    }

    #[test]
    fn lambda_solve_single_user_identity_direction() {
        // K=1, T=M, Phi=I, C=I: solution is a scaled vec(I)
        let m = 3;
        let cov = CovarianceSet::from_matrices(vec![CMat::identity(m, m)]).unwrap();
        let pilot = build_pilot_matrix(m, m).unwrap();
        let obs = observation_covariances(&cov, &pilot, 0.2).unwrap();
        let ops = SinrOperators::new(&cov, &obs).unwrap();
        let alpha = [1.3];
        let beta = [C64::new(0.4, 0.1)];
        let sol = solve_ap_given_lambda(&ops, &alpha, &beta, 0.5).unwrap();
        let d00 = sol[0][(0, 0)];
        for i in 0..m {
            for j in 0..m {
                if i == j {
                    assert!((sol[0][(i, j)] - d00).norm() < 1e-12);
                } else {
                    assert!(sol[0][(i, j)].norm() < 1e-12);
                }
            }
        }
    }

    #[test]
    fn large_lambda_shrinks_solution() {
        let mut rng = ChaCha8Rng::seed_from_u64(6);
        let ops = small_ops(&mut rng, 4, 2, 2, 0.1);
        let a_p = rand_transforms(&mut rng, &ops);
        let alpha = update_alpha(&ops, &a_p).unwrap();
        let beta = update_beta(&ops, &a_p, &alpha).unwrap();
        let solver = LambdaSolver::new(&ops, &alpha, &beta).unwrap();
        let mut prev = f64::INFINITY;
        for lam in [1e-6, 1e-3, 1.0, 1e3, 1e6, 1e9, 1e12] {
            let p = solver.power(lam).unwrap();
            assert!(p <= prev * (1.0 + 1e-12), "power not decreasing at {lam}");
            prev = p;
        }
        assert!(prev < 1e-12);
    }

    #[test]
    fn degenerate_all_zero_beta_is_signaled() {
        let mut rng = ChaCha8Rng::seed_from_u64(7);
        let ops = small_ops(&mut rng, 4, 2, 2, 0.1);
        let beta = vec![C64::new(0.0, 0.0); 2];
        let err = solve_ap_given_lambda(&ops, &[0.0, 0.0], &beta, 0.0);
        assert!(matches!(err, Err(Error::DegenerateState(_))));
    }

    #[test]
    fn bisection_meets_budget() {
        let mut rng = ChaCha8Rng::seed_from_u64(8);
        let ops = small_ops(&mut rng, 4, 2, 2, 0.1);
        let a_p = rand_transforms(&mut rng, &ops);
        let alpha = update_alpha(&ops, &a_p).unwrap();
        let beta = update_beta(&ops, &a_p, &alpha).unwrap();
        let budget = 2.5;
        let (lam, sol) = bisect_lambda(&ops, &alpha, &beta, budget, 1e-6).unwrap();
        assert!(lam > 0.0);
        let p = ops.private_power(&sol);
        assert!(rel_diff(p, budget) <= 1e-6);
        // huge budget -> inactive constraint
        let (lam0, _) = bisect_lambda(&ops, &alpha, &beta, 1e12, 1e-6).unwrap();
        assert_eq!(lam0, 0.0);
    }

    #[test]
    fn optimize_zero_budget_returns_zeros() {
        let mut rng = ChaCha8Rng::seed_from_u64(9);
        let ops = small_ops(&mut rng, 4, 2, 2, 0.1);
        let sol = optimize_private(&ops, 0.0, None, &PrivateOptParams::default()).unwrap();
        assert_eq!(sol.power, 0.0);
        assert!(sol.a_p.iter().all(|a| a.iter().all(|z| z.norm() == 0.0)));
    }

    #[test]
    fn optimize_monotone_trace_and_feasible() {
        let mut rng = ChaCha8Rng::seed_from_u64(10);
        for _ in 0..10 {
            let ops = small_ops(&mut rng, 5, 2, 3, 0.1);
            let budget = 4.0;
            let sol = optimize_private(&ops, budget, None, &PrivateOptParams::default()).unwrap();
            for w in sol.f1a_trace.windows(2) {
                assert!(
                    w[1] >= w[0] - 1e-9 * w[0].abs().max(1.0),
                    "trace dipped: {} -> {}",
                    w[0],
                    w[1]
                );
            }
            assert!(sol.power <= budget * (1.0 + 1e-6));
            // at convergence the trace end equals the achieved LB rate
            let gamma = ops.private_sinrs(&sol.a_p).unwrap();
            let lb: f64 = gamma.iter().map(|g| (1.0 + g).log2()).sum();
            assert!(rel_diff(lb, *sol.f1a_trace.last().unwrap()) < 1e-3);
        }
    }

    #[test]
    fn optimize_beats_scaled_init_single_user() {
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        let ops = small_ops(&mut rng, 5, 1, 2, 0.2);
        let budget = 3.0;
        let sol = optimize_private(&ops, budget, None, &PrivateOptParams::default()).unwrap();
        let mut init = default_private_init(&ops);
        let s = (budget / ops.private_power(&init)).sqrt();
        init[0] *= C64::new(s, 0.0);
        let g_init = ops.private_sinrs(&init).unwrap()[0];
        let g_fin = ops.private_sinrs(&sol.a_p).unwrap()[0];
        assert!((1.0 + g_fin).log2() >= (1.0 + g_init).log2() - 1e-12);
    }

    #[test]
    fn optimize_beats_random_search() {
        let mut rng = ChaCha8Rng::seed_from_u64(12);
        let ops = small_ops(&mut rng, 8, 2, 4, 0.05);
        let budget = 5.0;
        let sol = optimize_private(&ops, budget, None, &PrivateOptParams::default()).unwrap();
        let lb: f64 = ops
            .private_sinrs(&sol.a_p)
            .unwrap()
            .iter()
            .map(|g| (1.0 + g).log2())
            .sum();
        let mut best = 0.0f64;
        for _ in 0..200 {
            let mut cand = rand_transforms(&mut rng, &ops);
            let s = (budget / ops.private_power(&cand)).sqrt();
            for a in cand.iter_mut() {
                *a *= C64::new(s, 0.0);
            }
            let v: f64 = ops
                .private_sinrs(&cand)
                .unwrap()
                .iter()
                .map(|g| (1.0 + g).log2())
                .sum();
            best = best.max(v);
        }
        assert!(lb >= best, "optimized {lb} vs random best {best}");
    }

    #[test]
    fn grid_monotonicity_of_power() {
        let mut rng = ChaCha8Rng::seed_from_u64(13);
        let ops = small_ops(&mut rng, 4, 2, 2, 0.2);
        let a_p = rand_transforms(&mut rng, &ops);
        let alpha = update_alpha(&ops, &a_p).unwrap();
        let beta = update_beta(&ops, &a_p, &alpha).unwrap();
        let solver = LambdaSolver::new(&ops, &alpha, &beta).unwrap();
        let mut lam = 1e-6;
        let mut prev = f64::INFINITY;
        while lam <= 1e6 {
            let p = solver.power(lam).unwrap();
            assert!(p <= prev * (1.0 + 1e-10));
            prev = p;
            lam *= 10.0;
        }
    }

    #[test]
    fn stationarity_of_returned_solution() {
        let mut rng = ChaCha8Rng::seed_from_u64(14);
        let (m, k, t) = (3, 2, 2);
        let ops = small_ops(&mut rng, m, k, t, 0.3);
        let a_p = rand_transforms(&mut rng, &ops);
        let alpha = update_alpha(&ops, &a_p).unwrap();
        let beta = update_beta(&ops, &a_p, &alpha).unwrap();
        let (lam, sol) = bisect_lambda(&ops, &alpha, &beta, 1.5, 1e-6).unwrap();
        let eye_m = CMat::identity(m, m);
        for kk in 0..k {
            let q: CVec = vec_of(ops.q_mat(kk));
            let mut sys = CMat::zeros(m * t, m * t);
            for i in 0..k {
                sys += kron_dense(ops.c(i), ops.c_yk(kk)).scale(beta[i].norm_sqr());
            }
            sys += kron_dense(&eye_m, ops.c_yk(kk)).scale(lam);
            sys += (&q * q.adjoint()).scale(beta[kk].norm_sqr());
            let rhs = q.scale((1.0 + alpha[kk]).sqrt()) * beta[kk];
            let resid = &sys * vec_of(&sol[kk]) - rhs.clone();
            let rn = resid.iter().map(|z| z.norm_sqr()).sum::<f64>().sqrt();
            let bn = rhs.iter().map(|z| z.norm_sqr()).sum::<f64>().sqrt();
            assert!(rn <= 1e-8 * bn, "relative residual {}", rn / bn);
        }
    }
}
