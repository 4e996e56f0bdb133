//! Iterative weighted-MMSE rate-splitting baseline, solved once per channel
//! realization on the MMSE channel estimates.
//!
//! Alternates MMSE equalizers and weights, quadratic-transform auxiliaries,
//! and precoder updates. The per-iteration convex program is solved with
//! closed-form KKT updates: the private columns come from a rank-`K`
//! factorized solve plus a power-multiplier bisection, the common column
//! from the same projection-based max-min machinery as the statistical
//! common solver, applied to estimate-based operators, preceded by a radial
//! power line search (the weighted-MSE objective is a parabola in the common
//! amplitude, so full power is not automatically optimal). Every block
//! update must not increase the augmented objective; candidates that fail
//! are backtracked or dropped, which keeps the objective trace monotone.

use crate::common_opt::{tie_escape_run, CommonOptParams, MaxMinProblem};
use crate::linalg::vdot;
use crate::power_split::{golden_max, GoldenParams};
use crate::{C64, CMat, CVec, Error, Result};

/// Controls for [`run_iwmmse`].
#[derive(Debug, Clone)]
pub struct IwmmseParams {
    /// Relative tolerance on the augmented objective.
    pub tol: f64,
    /// Outer iteration cap.
    pub max_iter: usize,
}

impl Default for IwmmseParams {
    fn default() -> Self {
        IwmmseParams {
            tol: 1e-4,
            max_iter: 100,
        }
    }
}

/// MMSE channel estimate
/// `h_hat = C_k Phi (Phi^H C_k Phi + sigma_n2 I)^{-1} y_k`.
pub fn mmse_channel_estimate(
    y_k: &CVec,
    c_k: &CMat,
    phi: &CMat,
    sigma_n2: f64,
) -> Result<CVec> {
    let t = phi.ncols();
    if y_k.len() != t {
        return Err(Error::DimensionMismatch(
            "observation length must equal pilot count".into(),
        ));
    }
    let c_yk = phi.adjoint() * c_k * phi + CMat::identity(t, t).scale(sigma_n2);
    let sol = c_yk
        .lu()
        .solve(y_k)
        .ok_or_else(|| Error::InvalidConfig("singular observation covariance".into()))?;
    Ok(c_k * phi * sol)
}

/// Solver state for one channel realization.
#[derive(Debug, Clone)]
pub struct IwmmseState {
    pub p_c: CVec,
    pub p_p: Vec<CVec>,
    pub g_c: Vec<C64>,
    pub g_p: Vec<C64>,
    /// Received-power denominators `T_{c,k}`, `T_{p,k}`.
    pub t_c: Vec<f64>,
    pub t_p: Vec<f64>,
    pub eps_c: Vec<f64>,
    pub eps_p: Vec<f64>,
    pub u_c: Vec<f64>,
    pub u_p: Vec<f64>,
    pub w_c: Vec<C64>,
    pub w_p: Vec<C64>,
    pub with_rs: bool,
}

impl IwmmseState {
    fn k(&self) -> usize {
        self.p_p.len()
    }

    /// Total transmit power `tr(P P^H)`.
    pub fn power(&self) -> f64 {
        self.p_c.iter().map(|z| z.norm_sqr()).sum::<f64>()
            + self
                .p_p
                .iter()
                .map(|p| p.iter().map(|z| z.norm_sqr()).sum::<f64>())
                .sum::<f64>()
    }

    /// Precoding matrix `[p_c, p_{p,1}, ..., p_{p,K}]`.
    pub fn precoder_matrix(&self) -> CMat {
        let m = self.p_c.len();
        let mut p = CMat::zeros(m, self.k() + 1);
        p.column_mut(0).copy_from(&self.p_c);
        for (j, col) in self.p_p.iter().enumerate() {
            p.column_mut(j + 1).copy_from(col);
        }
        p
    }
}

/// Effective gains `b_ck = h_hat_k^H p_c` and `b[k][j] = h_hat_k^H p_pj`.
fn gains(h_hats: &[CVec], p_c: &CVec, p_p: &[CVec]) -> (Vec<C64>, Vec<Vec<C64>>) {
    let b_c = h_hats.iter().map(|h| vdot(h, p_c)).collect();
    let b = h_hats
        .iter()
        .map(|h| p_p.iter().map(|p| vdot(h, p)).collect())
        .collect();
    (b_c, b)
}

/// MMSE equalizers, MSEs, and weights from the current precoders.
pub fn update_equalizers_weights(state: &mut IwmmseState, h_hats: &[CVec]) {
    let k = state.k();
    let (b_c, b) = gains(h_hats, &state.p_c, &state.p_p);
    for i in 0..k {
        let t_p = b[i].iter().map(|z| z.norm_sqr()).sum::<f64>() + 1.0;
        let t_c = b_c[i].norm_sqr() + t_p;
        state.t_p[i] = t_p;
        state.t_c[i] = t_c;
        state.g_c[i] = b_c[i].conj() / C64::new(t_c, 0.0);
        state.g_p[i] = b[i][i].conj() / C64::new(t_p, 0.0);
        state.eps_c[i] = 1.0 - b_c[i].norm_sqr() / t_c;
        state.eps_p[i] = 1.0 - b[i][i].norm_sqr() / t_p;
        state.u_c[i] = 1.0 / state.eps_c[i];
        state.u_p[i] = 1.0 / state.eps_p[i];
    }
}

/// Quadratic-transform auxiliaries `w = h_hat^H p / T`.
pub fn update_auxiliaries(state: &mut IwmmseState, h_hats: &[CVec]) {
    let (b_c, b) = gains(h_hats, &state.p_c, &state.p_p);
    for i in 0..state.k() {
        state.w_c[i] = b_c[i] / C64::new(state.t_c[i], 0.0);
        state.w_p[i] = b[i][i] / C64::new(state.t_p[i], 0.0);
    }
}

/// Augmented objective at fixed weights and auxiliaries, in nats (the
/// majorizer the precoder block updates must not increase; natural-log
/// weight terms keep the worst-user comparison consistent with the descent
/// argument).
pub fn majorizer(state: &IwmmseState, h_hats: &[CVec], p_c: &CVec, p_p: &[CVec]) -> f64 {
    let k = state.k();
    let (b_c, b) = gains(h_hats, p_c, p_p);
    let mut total = 0.0;
    let mut xi_c_max = f64::NEG_INFINITY;
    for i in 0..k {
        let t_p = b[i].iter().map(|z| z.norm_sqr()).sum::<f64>() + 1.0;
        let f_p = state.u_p[i]
            * (1.0 - 2.0 * (state.w_p[i].conj() * b[i][i]).re + state.w_p[i].norm_sqr() * t_p)
            - state.u_p[i].ln();
        total += f_p;
        if state.with_rs {
            let t_c = b_c[i].norm_sqr() + t_p;
            let f_c = state.u_c[i]
                * (1.0 - 2.0 * (state.w_c[i].conj() * b_c[i]).re + state.w_c[i].norm_sqr() * t_c)
                - state.u_c[i].ln();
            xi_c_max = xi_c_max.max(f_c);
        }
    }
    if state.with_rs {
        total += xi_c_max;
    }
    total
}

/// Augmented objective at MMSE weights (through the identity
/// `xi^MMSE = 1 - R^inst`): `(K+1) - (min_k R_c + sum_k R_p)` with rate
/// splitting, `K - sum_k R_p` without.
pub fn augmented_objective(h_hats: &[CVec], p_c: &CVec, p_p: &[CVec], with_rs: bool) -> f64 {
    let rates = crate::sinr::instantaneous_rates(h_hats, p_c, p_p);
    let k = p_p.len() as f64;
    if with_rs {
        (k + 1.0) - rates.r_sum_rs
    } else {
        k - rates.r_sum_nors
    }
}

/// Rank-revealing factorization of `G = sum_k c_k h_k h_k^H` through the
/// `K x K` Gram matrix: returns orthonormal `U` (columns spanning the range)
/// and positive eigenvalues.
fn thin_eig(h_hats: &[CVec], coeffs: &[f64]) -> (CMat, Vec<f64>) {
    let m = h_hats[0].len();
    let k = h_hats.len();
    let mut b = CMat::zeros(m, k);
    for (j, h) in h_hats.iter().enumerate() {
        let s = coeffs[j].max(0.0).sqrt();
        b.column_mut(j).copy_from(&h.scale(s));
    }
    let gram = b.adjoint() * &b;
    let (vals, vecs) = crate::linalg::herm_eigen(&gram);
    let vmax = vals.iter().cloned().fold(0.0, f64::max);
    let mut cols = Vec::new();
    let mut eigs = Vec::new();
    for (j, &v) in vals.iter().enumerate() {
        if v > 1e-12 * vmax.max(1e-300) {
            let col = (&b * vecs.column(j)).scale(1.0 / v.sqrt());
            cols.push(col);
            eigs.push(v);
        }
    }
    let mut u = CMat::zeros(m, cols.len());
    for (j, c) in cols.iter().enumerate() {
        u.column_mut(j).copy_from(c);
    }
    (u, eigs)
}

/// Private columns `p_pj(mu) = (G + mu I)^{-1} u_pj w_pj h_hat_j` with the
/// multiplier chosen by bisection on the power budget.
fn solve_private_columns(
    state: &IwmmseState,
    h_hats: &[CVec],
    budget: f64,
) -> Result<Vec<CVec>> {
    let k = state.k();
    let m = h_hats[0].len();
    let coeffs: Vec<f64> = (0..k)
        .map(|i| state.u_p[i] * state.w_p[i].norm_sqr())
        .collect();
    let rhs_scale: Vec<C64> = (0..k)
        .map(|i| state.w_p[i].scale(state.u_p[i]))
        .collect();
    if coeffs.iter().all(|&c| c <= 0.0) || budget <= 0.0 {
        return Ok(vec![CVec::zeros(m); k]);
    }
    let (u, eigs) = thin_eig(h_hats, &coeffs);
    // spectral coordinates of each right-hand side
    let proj: Vec<CVec> = h_hats.iter().map(|h| u.adjoint() * h).collect();
    let solve = |mu: f64| -> Vec<CVec> {
        (0..k)
            .map(|j| {
                if rhs_scale[j].norm_sqr() == 0.0 {
                    return CVec::zeros(m);
                }
                let mut coords = proj[j].clone();
                for (i, &e) in eigs.iter().enumerate() {
                    coords[i] /= C64::new(e + mu, 0.0);
                }
                (&u * coords).map(|z| z * rhs_scale[j])
            })
            .collect()
    };
    let power_of = |cols: &[CVec]| -> f64 {
        cols.iter()
            .map(|p| p.iter().map(|z| z.norm_sqr()).sum::<f64>())
            .sum()
    };
    let p0 = power_of(&solve(0.0));
    if p0 <= budget {
        return Ok(solve(0.0));
    }
    let mut hi = 1.0f64;
    let mut doublings = 0;
    while power_of(&solve(hi)) > budget {
        hi *= 2.0;
        doublings += 1;
        if doublings > 200 {
            return Err(Error::NumericalBreakdown(
                "power multiplier bracket expansion failed".into(),
            ));
        }
    }
    let mut lo = if hi > 1.0 { hi / 2.0 } else { 0.0 };
    let mut best = hi;
    for _ in 0..200 {
        let mid = 0.5 * (lo + hi);
        if mid <= lo || mid >= hi {
            break;
        }
        if power_of(&solve(mid)) > budget {
            lo = mid;
        } else {
            hi = mid;
            best = mid;
        }
        let p = power_of(&solve(best));
        if (p - budget).abs() <= 1e-9 * budget {
            break;
        }
    }
    let cols = solve(best);
    let p = power_of(&cols);
    if (p - budget).abs() > 1e-6 * budget {
        return Err(Error::NumericalBreakdown(format!(
            "power multiplier bisection left power {p:.6e} vs budget {budget:.6e}"
        )));
    }
    Ok(cols)
}

/// Estimate-based max-min problem for the common column at fixed weights.
struct IwmmseCommon<'a> {
    h_hats: &'a [CVec],
    u_c: Vec<f64>,
    w_c: Vec<C64>,
    t_p: Vec<f64>,
    /// Tikhonov level per user for the direction operators.
    delta: Vec<f64>,
    h_norm2: Vec<f64>,
}

impl<'a> IwmmseCommon<'a> {
    fn new(state: &IwmmseState, h_hats: &'a [CVec]) -> Self {
        let h_norm2: Vec<f64> = h_hats
            .iter()
            .map(|h| h.iter().map(|z| z.norm_sqr()).sum())
            .collect();
        let delta = h_norm2.iter().map(|&n| 1e-6 * n.max(1e-300)).collect();
        IwmmseCommon {
            h_hats,
            u_c: state.u_c.clone(),
            w_c: state.w_c.clone(),
            t_p: state.t_p.clone(),
            delta,
            h_norm2,
        }
    }

    fn col(x: &CMat) -> CVec {
        CVec::from_column_slice(x.as_slice())
    }

    /// `(h h^H + delta I)^s x` in closed form.
    fn rank1_power(&self, k: usize, x: &CMat, s: f64) -> CMat {
        let h = &self.h_hats[k];
        let n2 = self.h_norm2[k];
        let d = self.delta[k];
        let xv = Self::col(x);
        if n2 <= 0.0 {
            return x.scale(d.powf(s));
        }
        let coef = vdot(h, &xv) / C64::new(n2, 0.0);
        let par = h.map(|z| z * coef);
        let perp = &xv - &par;
        let out = par.scale((n2 + d).powf(s)) + perp.scale(d.powf(s));
        CMat::from_column_slice(x.nrows(), 1, out.as_slice())
    }
}

impl MaxMinProblem for IwmmseCommon<'_> {
    fn shape(&self) -> (usize, usize) {
        (self.h_hats[0].len(), 1)
    }
    fn num_users(&self) -> usize {
        self.h_hats.len()
    }
    /// Per-user utility `-f_ck` (higher is better), at fixed `(u, w)`.
    fn metrics(&self, x: &CMat) -> Vec<f64> {
        let xv = Self::col(x);
        (0..self.num_users())
            .map(|i| {
                let b = vdot(&self.h_hats[i], &xv);
                let t_c = b.norm_sqr() + self.t_p[i];
                let f = self.u_c[i]
                    * (1.0 - 2.0 * (self.w_c[i].conj() * b).re
                        + self.w_c[i].norm_sqr() * t_c)
                    - self.u_c[i].ln();
                -f
            })
            .collect()
    }
    fn z_mat(&self, k: usize) -> CMat {
        let h = &self.h_hats[k];
        let s = self.u_c[k].sqrt();
        CMat::from_column_slice(h.len(), 1, h.scale(s).as_slice())
    }
    fn z_dot(&self, k: usize, x: &CMat) -> C64 {
        vdot(&self.h_hats[k], &Self::col(x)).scale(self.u_c[k].sqrt())
    }
    fn z_quad(&self, k: usize, x: &CMat) -> f64 {
        let xv = Self::col(x);
        let n2: f64 = xv.iter().map(|z| z.norm_sqr()).sum();
        vdot(&self.h_hats[k], &xv).norm_sqr() + self.delta[k] * n2
    }
    fn z_apply(&self, k: usize, x: &CMat) -> CMat {
        self.rank1_power(k, x, 1.0)
    }
    fn z_sqrt(&self, k: usize, x: &CMat) -> CMat {
        self.rank1_power(k, x, 0.5)
    }
    fn z_inv_sqrt(&self, k: usize, x: &CMat) -> CMat {
        self.rank1_power(k, x, -0.5)
    }
    fn f_apply(&self, x: &CMat) -> CMat {
        x.clone()
    }
    fn f_sqrt(&self, x: &CMat) -> CMat {
        x.clone()
    }
    fn f_inv(&self, x: &CMat) -> CMat {
        x.clone()
    }
    fn f_quad(&self, x: &CMat) -> f64 {
        x.iter().map(|z| z.norm_sqr()).sum()
    }
    fn sigma2(&self, k: usize) -> f64 {
        self.t_p[k]
    }
}

/// One precoder update: private columns (guarded), then the common column
/// (radial line search plus projection machinery, guarded). The final
/// precoders satisfy `tr(P P^H) <= P_dl`.
pub fn solve_precoders(state: &mut IwmmseState, h_hats: &[CVec], p_dl: f64) -> Result<()> {
    let m = h_hats[0].len();
    // --- private block ---
    let pc_power: f64 = state.p_c.iter().map(|z| z.norm_sqr()).sum();
    let budget_p = (p_dl - pc_power).max(0.0);
    let candidate = solve_private_columns(state, h_hats, budget_p)?;
    let base = majorizer(state, h_hats, &state.p_c, &state.p_p);
    let mut accepted = false;
    let mut tau = 1.0;
    for _ in 0..5 {
        let blend: Vec<CVec> = state
            .p_p
            .iter()
            .zip(candidate.iter())
            .map(|(old, new)| old.scale(1.0 - tau) + new.scale(tau))
            .collect();
        if majorizer(state, h_hats, &state.p_c, &blend) <= base + 1e-12 * base.abs().max(1.0) {
            state.p_p = blend;
            accepted = true;
            break;
        }
        tau /= 2.0;
    }
    let _ = accepted;

    // --- common block ---
    if state.with_rs {
        let priv_power: f64 = state
            .p_p
            .iter()
            .map(|p| p.iter().map(|z| z.norm_sqr()).sum::<f64>())
            .sum();
        let budget_c = (p_dl - priv_power).max(0.0);
        let problem = IwmmseCommon::new(state, h_hats);
        let pc_now: f64 = state.p_c.iter().map(|z| z.norm_sqr()).sum();
        // radial line search: max_k f_ck along t * p_c is a max of
        // parabolas, minimized on [0, t_max]
        if pc_now > 0.0 && budget_c > 0.0 {
            let t_max = (budget_c / pc_now).sqrt();
            let xmat = CMat::from_column_slice(m, 1, state.p_c.as_slice());
            let gp = GoldenParams {
                tol: 1e-4,
                max_eval: 40,
                collect_trace: false,
            };
            let worst = |t: f64| -> Result<f64> {
                let cand = xmat.scale(t);
                let met = problem.metrics(&cand);
                Ok(met.iter().cloned().fold(f64::INFINITY, f64::min))
            };
            let (t_star, r_star, _) = golden_max(worst, 0.0, t_max, &gp)?;
            // keep the current point unless the search strictly improved it
            if r_star > worst(1.0)? {
                state.p_c = state.p_c.scale(t_star);
            }
        }
        let sphere: f64 = state.p_c.iter().map(|z| z.norm_sqr()).sum();
        if sphere > 0.0 {
            let mut x = CMat::from_column_slice(m, 1, state.p_c.as_slice());
            let mut metrics = problem.metrics(&x);
            // fixed auxiliaries: eta_k = sqrt(u_ck) w_ck
            let eta: Vec<C64> = (0..state.k())
                .map(|i| state.w_c[i].scale(state.u_c[i].sqrt()))
                .collect();
            let params = CommonOptParams {
                n_max: 200,
                tie_steps: 100,
                ..CommonOptParams::default()
            };
            let mut u = params.u_max;
            let mut n = 0;
            while n < params.n_max && u > 1e-13 {
                n += 1;
                match crate::common_opt::sinr_increase_step(
                    &problem, &eta, &x, &metrics, sphere, u,
                ) {
                    Some((cand, cm)) => {
                        x = cand;
                        metrics = cm;
                        u = (2.0 * u).min(params.u_max);
                    }
                    None => u /= 2.0,
                }
            }
            tie_escape_run(&problem, &eta, &mut x, &mut metrics, sphere, &params);
            state.p_c = CVec::from_column_slice(x.as_slice());
        }
    }

    // final guard: total power within the constraint
    let total = state.power();
    if total > p_dl * (1.0 + 1e-12) {
        let s = (p_dl / total).sqrt();
        state.p_c = state.p_c.scale(s);
        for p in state.p_p.iter_mut() {
            *p = p.scale(s);
        }
    }
    Ok(())
}

/// Result of one per-realization solve.
#[derive(Debug, Clone)]
pub struct IwmmseSolution {
    pub p_c: CVec,
    pub p_p: Vec<CVec>,
    /// Augmented objective per outer iteration (monotone non-increasing).
    pub objective_trace: Vec<f64>,
    pub iterations: usize,
}

/// Initialize from the estimates (matched private columns, summed-estimate
/// common column at power fraction `alpha_c`), then alternate equalizer,
/// weight, auxiliary, and precoder updates until the augmented objective
/// converges.
pub fn run_iwmmse(
    h_hats: &[CVec],
    p_dl: f64,
    with_rs: bool,
    params: &IwmmseParams,
) -> Result<IwmmseSolution> {
    if h_hats.is_empty() {
        return Err(Error::InvalidConfig("need at least one user".into()));
    }
    if !(p_dl > 0.0) {
        return Err(Error::InvalidConfig("P_dl must be > 0".into()));
    }
    let k = h_hats.len();
    let m = h_hats[0].len();
    let alpha_c = if with_rs { 0.5 } else { 0.0 };

    let mut p_p: Vec<CVec> = h_hats
        .iter()
        .map(|h| {
            let n2: f64 = h.iter().map(|z| z.norm_sqr()).sum();
            if n2 > 0.0 {
                h.scale(((1.0 - alpha_c) * p_dl / (k as f64 * n2)).sqrt())
            } else {
                CVec::zeros(m)
            }
        })
        .collect();
    let mut p_c = CVec::zeros(m);
    if with_rs {
        let mut sum = CVec::zeros(m);
        for h in h_hats {
            sum += h;
        }
        let n2: f64 = sum.iter().map(|z| z.norm_sqr()).sum();
        if n2 > 0.0 {
            p_c = sum.scale((alpha_c * p_dl / n2).sqrt());
        }
    }
    // users with zero estimates transmit nothing; keep power feasible
    let total: f64 = p_c.iter().map(|z| z.norm_sqr()).sum::<f64>()
        + p_p
            .iter()
            .map(|p| p.iter().map(|z| z.norm_sqr()).sum::<f64>())
            .sum::<f64>();
    if total > p_dl {
        let s = (p_dl / total).sqrt();
        p_c = p_c.scale(s);
        for p in p_p.iter_mut() {
            *p = p.scale(s);
        }
    }

    let mut state = IwmmseState {
        p_c,
        p_p,
        g_c: vec![C64::new(0.0, 0.0); k],
        g_p: vec![C64::new(0.0, 0.0); k],
        t_c: vec![1.0; k],
        t_p: vec![1.0; k],
        eps_c: vec![1.0; k],
        eps_p: vec![1.0; k],
        u_c: vec![1.0; k],
        u_p: vec![1.0; k],
        w_c: vec![C64::new(0.0, 0.0); k],
        w_p: vec![C64::new(0.0, 0.0); k],
        with_rs,
    };

    let mut trace = Vec::new();
    let mut iterations = 0;
    for it in 0..params.max_iter {
        iterations = it + 1;
        let obj = augmented_objective(h_hats, &state.p_c, &state.p_p, with_rs);
        trace.push(obj);
        if it > 0 {
            let prev = trace[it - 1];
            if (prev - obj).abs() < params.tol * prev.abs().max(1e-12) {
                break;
            }
        }
        update_equalizers_weights(&mut state, h_hats);
        update_auxiliaries(&mut state, h_hats);
        solve_precoders(&mut state, h_hats, p_dl)?;
    }
    Ok(IwmmseSolution {
        p_c: state.p_c,
        p_p: state.p_p,
        objective_trace: trace,
        iterations,
    })
}
