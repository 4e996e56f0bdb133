//! Common precoder max-min optimization.
//!
//! The core update (one step of the SINR-increasing algorithm) moves the
//! transform along a projected direction that targets the worst user while
//! keeping the power constraint met with equality:
//!
//! `x_temp = (1-u) x + v Z_l^{-1/2} x_perp`
//!
//! with `x_perp` orthogonal to `t = Z_l^{-1/2} F^H x` and normalized so
//! `||F^{1/2} Z_l^{-1/2} x_perp|| = 1`, and `|v| = sqrt(budget (2u - u^2))`.
//! A candidate is accepted only if it strictly raises the minimum per-user
//! metric; the step size `u` doubles on accept (capped) and halves on
//! reject.
//!
//! At a multi-user tie the single-user direction cannot move along the tie
//! ridge, so [`tie_escape_run`] adds steepest-ascent steps using the
//! minimum-norm supergradient over the near-tied active set, under the same
//! strict acceptance and power-equality rules. Both phases work on any
//! [`MaxMinProblem`]; the bilinear statistical problem and the per-
//! realization weighted-MSE problem implement the trait.

use crate::linalg::cdot;
use crate::sinr::SinrOperators;
use crate::{C64, CMat, Error, Result};

/// Controls for [`optimize_common`].
#[derive(Debug, Clone)]
pub struct CommonOptParams {
    /// Initial and maximal step size of the SINR-increasing loop.
    pub u_max: f64,
    /// Step cap per sweep.
    pub n_max: usize,
    /// Relative tolerance on the min-user rate across sweeps.
    pub outer_tol: f64,
    /// Sweep cap.
    pub max_sweeps: usize,
    /// Step cap of each tie-escape phase.
    pub tie_steps: usize,
    /// Record per-step trace rows.
    pub collect_trace: bool,
}

impl Default for CommonOptParams {
    fn default() -> Self {
        CommonOptParams {
            u_max: 1.0,
            n_max: 500,
            outer_tol: 1e-4,
            max_sweeps: 50,
            tie_steps: 300,
            collect_trace: false,
        }
    }
}

/// Step size below which the adaptive loops give up.
const U_FLOOR: f64 = 1e-13;
/// Relative width of the near-tie active set used by the escape phase.
const TIE_BAND: f64 = 1e-3;

/// One accepted or attempted step, for the diagnostic trace.
#[derive(Debug, Clone)]
pub struct StepTrace {
    pub step: usize,
    pub worst_user: usize,
    pub metric_min: f64,
    pub u: f64,
    pub power: f64,
    pub accepted: bool,
}

/// A max-min problem the projection machinery can run on:
/// maximize `min_k metric_k(x)` over `x^H F x = budget`, where each metric
/// has the quadratic-transform surrogate
/// `2 Re{eta_k^* z_k^H x} - |eta_k|^2 (x^H Z_k x + sigma_k^2) + const_k`.
pub trait MaxMinProblem {
    /// Reshape dimensions of the optimization variable.
    fn shape(&self) -> (usize, usize);
    fn num_users(&self) -> usize;
    /// True per-user metrics used by the acceptance tests.
    fn metrics(&self, x: &CMat) -> Vec<f64>;
    /// Matrix form of `z_k`.
    fn z_mat(&self, k: usize) -> CMat;
    fn z_dot(&self, k: usize, x: &CMat) -> C64;
    fn z_quad(&self, k: usize, x: &CMat) -> f64;
    fn z_apply(&self, k: usize, x: &CMat) -> CMat;
    fn z_sqrt(&self, k: usize, x: &CMat) -> CMat;
    fn z_inv_sqrt(&self, k: usize, x: &CMat) -> CMat;
    fn f_apply(&self, x: &CMat) -> CMat;
    fn f_sqrt(&self, x: &CMat) -> CMat;
    fn f_inv(&self, x: &CMat) -> CMat;
    fn f_quad(&self, x: &CMat) -> f64;
    fn sigma2(&self, k: usize) -> f64;
}

/// The statistical common-precoder problem over `A_c`.
pub struct BilinearCommon<'a> {
    pub ops: &'a SinrOperators,
    /// `sigma_k^2` from the fixed private transforms.
    pub sigma2: Vec<f64>,
}

impl<'a> BilinearCommon<'a> {
    pub fn new(ops: &'a SinrOperators, a_p: &[CMat]) -> Self {
        BilinearCommon {
            sigma2: ops.sigma2(a_p),
            ops,
        }
    }
}

impl MaxMinProblem for BilinearCommon<'_> {
    fn shape(&self) -> (usize, usize) {
        (self.ops.m(), self.ops.k() * self.ops.t_dl())
    }
    fn num_users(&self) -> usize {
        self.ops.k()
    }
    fn metrics(&self, x: &CMat) -> Vec<f64> {
        let x_cy = self.ops.f_c_apply(x);
        (0..self.ops.k())
            .map(|k| {
                let num = self.ops.z_dot(k, x).norm_sqr();
                num / (self.ops.z_quad_with(k, x, &x_cy) + self.sigma2[k])
            })
            .collect()
    }
    fn z_mat(&self, k: usize) -> CMat {
        let (m, cols) = self.shape();
        let t = self.ops.t_dl();
        let mut z = CMat::zeros(m, cols);
        z.view_mut((0, k * t), (m, t)).copy_from(self.ops.q_mat(k));
        z
    }
    fn z_dot(&self, k: usize, x: &CMat) -> C64 {
        self.ops.z_dot(k, x)
    }
    fn z_quad(&self, k: usize, x: &CMat) -> f64 {
        self.ops.z_quad(k, x)
    }
    fn z_apply(&self, k: usize, x: &CMat) -> CMat {
        self.ops.z_apply(k, x)
    }
    fn z_sqrt(&self, k: usize, x: &CMat) -> CMat {
        self.ops.z_sqrt_apply(k, x)
    }
    fn z_inv_sqrt(&self, k: usize, x: &CMat) -> CMat {
        self.ops.z_inv_sqrt_apply(k, x)
    }
    fn f_apply(&self, x: &CMat) -> CMat {
        self.ops.f_c_apply(x)
    }
    fn f_sqrt(&self, x: &CMat) -> CMat {
        self.ops.f_c_sqrt_apply(x)
    }
    fn f_inv(&self, x: &CMat) -> CMat {
        self.ops.right_cy_inv(x)
    }
    fn f_quad(&self, x: &CMat) -> f64 {
        self.ops.f_c_quad(x)
    }
    fn sigma2(&self, k: usize) -> f64 {
        self.sigma2[k]
    }
}

/// Optimal quadratic-transform auxiliaries
/// `eta_k = z_k^H x / (x^H Z_k x + sigma_k^2)`.
pub fn update_eta<P: MaxMinProblem>(problem: &P, x: &CMat) -> Vec<C64> {
    (0..problem.num_users())
        .map(|k| {
            let den = problem.z_quad(k, x) + problem.sigma2(k);
            problem.z_dot(k, x) / C64::new(den, 0.0)
        })
        .collect()
}

/// Surrogate constraint left-hand side
/// `2 Re{eta_k^* z_k^H x} - |eta_k|^2 (x^H Z_k x + sigma_k^2)`.
pub fn surrogate_lhs<P: MaxMinProblem>(problem: &P, x: &CMat, eta: &[C64], k: usize) -> f64 {
    2.0 * (eta[k].conj() * problem.z_dot(k, x)).re
        - eta[k].norm_sqr() * (problem.z_quad(k, x) + problem.sigma2(k))
}

fn argmin(vals: &[f64]) -> usize {
    let mut idx = 0;
    for (i, v) in vals.iter().enumerate() {
        if *v < vals[idx] {
            idx = i;
        }
    }
    idx
}

/// One step of the projected SINR-increasing update at fixed step size.
///
/// Returns the accepted `(x, metrics)` or `None` if the candidate failed the
/// strict min-improvement test (including a vanishing projected direction).
pub fn sinr_increase_step<P: MaxMinProblem>(
    problem: &P,
    eta: &[C64],
    x: &CMat,
    metrics: &[f64],
    budget: f64,
    u: f64,
) -> Option<(CMat, Vec<f64>)> {
    let l = argmin(metrics);
    let metric_min = metrics[l];
    if eta[l].norm_sqr() == 0.0 {
        return None;
    }
    // t = Z_l^{-1/2} F^H x  (all factors Hermitian)
    let fx = problem.f_apply(x);
    let t = problem.z_inv_sqrt(l, &fx);
    let tn2 = crate::linalg::fro_norm2(&t);
    if tn2 <= 0.0 || !tn2.is_finite() {
        return None;
    }
    // raw direction eta_l Z^{-1/2} z_l - |eta_l|^2 (1-u) Z^{1/2} x
    let zl = problem.z_mat(l);
    let d = problem.z_inv_sqrt(l, &zl).map(|v| v * eta[l])
        - problem.z_sqrt(l, x).scale(eta[l].norm_sqr() * (1.0 - u));
    // project onto the nullspace of t
    let coef = cdot(&t, &d) / C64::new(tn2, 0.0);
    let dp = &d - t.map(|v| v * coef);
    let dp_norm = crate::linalg::fro_norm2(&dp).sqrt();
    let d_scale = crate::linalg::fro_norm2(&d).sqrt();
    if !dp_norm.is_finite() || dp_norm < 1e-14 || dp_norm < 1e-14 * d_scale {
        return None;
    }
    // normalize so ||F^{1/2} Z^{-1/2} x_perp|| = 1
    let y = problem.z_inv_sqrt(l, &dp);
    let norm = problem.f_quad(&y).sqrt();
    if !(norm > 0.0) || !norm.is_finite() {
        return None;
    }
    // |v| from the power-equality expansion; the phase keeps the cross term
    // real-positive (zero by construction of the projected direction)
    let vmag = (budget * (2.0 * u - u * u)).max(0.0).sqrt();
    let cross = cdot(&d, &dp).scale(1.0 / dp_norm);
    let phase = if cross.norm() > 0.0 {
        (cross / C64::new(cross.norm(), 0.0)).conj()
    } else {
        C64::new(1.0, 0.0)
    };
    let v = phase.scale(vmag / norm);
    let cand = x.scale(1.0 - u) + y.map(|z| z * v);
    let cand_metrics = problem.metrics(&cand);
    if cand_metrics[argmin(&cand_metrics)] > metric_min {
        Some((cand, cand_metrics))
    } else {
        None
    }
}

/// Adaptive-step loop of the SINR-increasing algorithm (one sweep at fixed
/// auxiliaries).
#[allow(clippy::too_many_arguments)]
fn alg3_run<P: MaxMinProblem>(
    problem: &P,
    eta: &[C64],
    x: &mut CMat,
    metrics: &mut Vec<f64>,
    budget: f64,
    params: &CommonOptParams,
    trace: &mut Vec<StepTrace>,
    step_base: usize,
) -> usize {
    let mut u = params.u_max;
    let mut n = 0;
    while n < params.n_max && u > U_FLOOR {
        n += 1;
        let accepted = match sinr_increase_step(problem, eta, x, metrics, budget, u) {
            Some((cand, cand_metrics)) => {
                *x = cand;
                *metrics = cand_metrics;
                true
            }
            None => false,
        };
        if params.collect_trace {
            trace.push(StepTrace {
                step: step_base + n,
                worst_user: argmin(metrics),
                metric_min: metrics[argmin(metrics)],
                u,
                power: problem.f_quad(x),
                accepted,
            });
        }
        if accepted {
            u = (2.0 * u).min(params.u_max);
        } else {
            u /= 2.0;
        }
    }
    n
}

/// Minimum-norm convex combination of gradient directions given their Gram
/// matrix (steepest-ascent weights over the simplex). Subset enumeration;
/// the active sets here have at most `K` elements.
fn min_norm_simplex(g: &[Vec<f64>]) -> Vec<f64> {
    let n = g.len();
    let mut best_val = f64::INFINITY;
    let mut best: Option<Vec<f64>> = None;
    for mask in 1u32..(1 << n) {
        let idx: Vec<usize> = (0..n).filter(|i| mask >> i & 1 == 1).collect();
        let s = idx.len();
        // solve G_S c = 1, normalize to the simplex
        let gs = nalgebra::DMatrix::<f64>::from_fn(s, s, |r, c| g[idx[r]][idx[c]]);
        let ones = nalgebra::DVector::<f64>::from_element(s, 1.0);
        let Some(c) = gs.lu().solve(&ones) else {
            continue;
        };
        if c.iter().any(|&x| x <= 0.0) {
            continue;
        }
        let sum: f64 = c.iter().sum();
        let c: Vec<f64> = c.iter().map(|&x| x / sum).collect();
        let mut val = 0.0;
        for (a, &ia) in idx.iter().enumerate() {
            for (b, &ib) in idx.iter().enumerate() {
                val += c[a] * c[b] * g[ia][ib];
            }
        }
        if val < best_val - 1e-15 {
            // optimality over the full simplex: all coordinates of G c >= val
            let mut full = vec![0.0; n];
            for (a, &ia) in idx.iter().enumerate() {
                full[ia] = c[a];
            }
            let ok = (0..n).all(|i| {
                let gi: f64 = (0..n).map(|j| g[i][j] * full[j]).sum();
                gi >= val - 1e-9 * val.abs().max(1.0)
            });
            if ok {
                best_val = val;
                best = Some(full);
            }
        }
    }
    best.unwrap_or_else(|| {
        let mut e = vec![0.0; n];
        let mut idx = 0;
        for i in 0..n {
            if g[i][i] < g[idx][idx] {
                idx = i;
            }
        }
        e[idx] = 1.0;
        e
    })
}

/// Steepest-ascent escape for multi-user ties.
///
/// Candidates move along the minimum-norm supergradient of the surrogate
/// over the near-tied users, are rescaled to power equality, and pass the
/// same strict `min_k metric` acceptance as the main loop.
pub fn tie_escape_run<P: MaxMinProblem>(
    problem: &P,
    eta: &[C64],
    x: &mut CMat,
    metrics: &mut Vec<f64>,
    budget: f64,
    params: &CommonOptParams,
) -> bool {
    let kk = problem.num_users();
    let mut t_rel = 0.5;
    let mut improved = false;
    let sqrt_budget = budget.sqrt();
    for _ in 0..params.tie_steps {
        if t_rel < 1e-12 {
            break;
        }
        let min_val = metrics[argmin(metrics)];
        let band = TIE_BAND * min_val.abs() + 1e-15;
        let active: Vec<usize> = (0..kk).filter(|&k| metrics[k] <= min_val + band).collect();
        // supergradients of the surrogate, mapped through F^{-1}
        let grads: Vec<CMat> = active
            .iter()
            .map(|&k| {
                let g = problem.z_mat(k).map(|v| v * eta[k])
                    - problem.z_apply(k, x).scale(eta[k].norm_sqr());
                g.scale(2.0)
            })
            .collect();
        let nat: Vec<CMat> = grads.iter().map(|g| problem.f_inv(g)).collect();
        let gram: Vec<Vec<f64>> = grads
            .iter()
            .map(|gi| nat.iter().map(|nj| cdot(gi, nj).re).collect())
            .collect();
        let w = min_norm_simplex(&gram);
        let mut dir = CMat::zeros(x.nrows(), x.ncols());
        for (i, wi) in w.iter().enumerate() {
            if *wi > 0.0 {
                dir += nat[i].scale(*wi);
            }
        }
        let dn = problem.f_quad(&dir).sqrt();
        if !(dn > 0.0) || !dn.is_finite() {
            break;
        }
        let cand_raw = &*x + dir.scale(t_rel * sqrt_budget / dn);
        let cp = problem.f_quad(&cand_raw);
        if !(cp > 0.0) {
            t_rel /= 2.0;
            continue;
        }
        let cand = cand_raw.scale((budget / cp).sqrt());
        let cand_metrics = problem.metrics(&cand);
        if cand_metrics[argmin(&cand_metrics)] > min_val {
            *x = cand;
            *metrics = cand_metrics;
            t_rel = (2.0 * t_rel).min(1.0);
            improved = true;
        } else {
            t_rel /= 2.0;
        }
    }
    improved
}

/// Result of the common optimization.
#[derive(Debug, Clone)]
pub struct CommonSolution {
    pub a_c: CMat,
    /// Minimum metric at the returned transform.
    pub min_metric: f64,
    pub sweeps: usize,
    pub trace: Vec<StepTrace>,
}

/// Default initialization: `A_{c,k} = Phi` in every user block, scaled to
/// power equality by the caller. Every user then has a nonzero mean
/// effective channel, which the worst-user update direction requires to
/// make progress.
pub fn default_common_init(ops: &SinrOperators) -> CMat {
    let (m, t) = (ops.m(), ops.t_dl());
    let mut a_c = CMat::zeros(m, ops.k() * t);
    for k in 0..ops.k() {
        a_c.view_mut((0, k * t), (m, t)).copy_from(ops.phi());
    }
    a_c
}

/// Alternate auxiliary updates with SINR-increasing sweeps (plus tie
/// escapes) until the min-user rate stops improving.
pub fn optimize_common(
    ops: &SinrOperators,
    a_p: &[CMat],
    budget: f64,
    init: Option<&CMat>,
    params: &CommonOptParams,
) -> Result<CommonSolution> {
    let (m, cols) = (ops.m(), ops.k() * ops.t_dl());
    if budget <= 0.0 {
        return Ok(CommonSolution {
            a_c: CMat::zeros(m, cols),
            min_metric: 0.0,
            sweeps: 0,
            trace: Vec::new(),
        });
    }
    let problem = BilinearCommon::new(ops, a_p);
    let mut a_c = match init {
        Some(warm) if warm.nrows() == m && warm.ncols() == cols && ops.f_c_quad(warm) > 0.0 => {
            warm.clone()
        }
        _ => default_common_init(ops),
    };
    let p0 = ops.f_c_quad(&a_c);
    if !(p0 > 0.0) {
        return Err(Error::DegenerateState(
            "common initialization has zero transmit power".into(),
        ));
    }
    a_c *= C64::new((budget / p0).sqrt(), 0.0);

    let mut metrics = problem.metrics(&a_c);
    let mut trace = Vec::new();
    let mut last_rate: Option<f64> = None;
    let mut sweeps = 0;
    let mut steps_done = 0;
    for _ in 0..params.max_sweeps {
        sweeps += 1;
        let eta = update_eta(&problem, &a_c);
        steps_done += alg3_run(
            &problem,
            &eta,
            &mut a_c,
            &mut metrics,
            budget,
            params,
            &mut trace,
            steps_done,
        );
        tie_escape_run(&problem, &eta, &mut a_c, &mut metrics, budget, params);
        let rate = (1.0 + metrics[argmin(&metrics)]).log2();
        if let Some(prev) = last_rate {
            if rate - prev < params.outer_tol * prev.abs().max(1e-12) {
                break;
            }
        }
        last_rate = Some(rate);
    }
    Ok(CommonSolution {
        min_metric: metrics[argmin(&metrics)],
        a_c,
        sweeps,
        trace,
    })
}
