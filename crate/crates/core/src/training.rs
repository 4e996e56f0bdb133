//! Downlink training with pilot reuse among antennas, and the statistics of
//! the resulting contaminated observations.

use crate::channel::{standard_cn, CovarianceSet};
use crate::linalg::hermitianize;
use crate::{C64, CMat, CVec, Error, Result};
use rand::Rng;

/// Orthonormal pilot matrix with `T_dl < M` reuse structure.
#[derive(Debug, Clone)]
pub struct PilotMatrix {
    pub phi: CMat,
    pub t_dl: usize,
}

/// Stack `ceil(M/T_dl)` copies of `I_{T_dl}`, truncate to `M` rows, normalize
/// columns. Antenna `i` carries pilot `i mod T_dl`.
pub fn build_pilot_matrix(m: usize, t_dl: usize) -> Result<PilotMatrix> {
    if t_dl == 0 || t_dl > m {
        return Err(Error::InvalidConfig(format!(
            "T_dl must satisfy 1 <= T_dl <= M (got T_dl={t_dl}, M={m})"
        )));
    }
    let mut phi = CMat::zeros(m, t_dl);
    for i in 0..m {
        phi[(i, i % t_dl)] = C64::new(1.0, 0.0);
    }
    for j in 0..t_dl {
        let norm = phi.column(j).iter().map(|z| z.norm_sqr()).sum::<f64>().sqrt();
        let mut col = phi.column_mut(j);
        for z in col.iter_mut() {
            *z /= norm;
        }
    }
    Ok(PilotMatrix { phi, t_dl })
}

/// Training-plus-feedback noise variance `1 / (P_dl * T_dl)`.
pub fn training_noise_variance(p_dl: f64, t_dl: usize) -> Result<f64> {
    if !(p_dl > 0.0) || t_dl == 0 {
        return Err(Error::InvalidConfig(
            "training noise variance needs P_dl > 0 and T_dl >= 1".into(),
        ));
    }
    Ok(1.0 / (p_dl * t_dl as f64))
}

/// One noisy observation `y_k = Phi^H h_k + n_k`, `n_k ~ CN(0, sigma_n2 I)`.
pub fn observe(h_k: &CVec, phi: &CMat, sigma_n2: f64, rng: &mut impl Rng) -> CVec {
    let mut y = phi.adjoint() * h_k;
    if sigma_n2 > 0.0 {
        let s = sigma_n2.sqrt();
        for z in y.iter_mut() {
            *z += standard_cn(rng) * s;
        }
    }
    y
}

/// Observation second-order statistics shared by all solvers.
#[derive(Debug, Clone)]
pub struct ObservationModel {
    pub phi: CMat,
    pub t_dl: usize,
    pub sigma_n2: f64,
    /// `C_{y_k} = Phi^H C_k Phi + sigma_n2 I`, per user.
    pub c_yk: Vec<CMat>,
}

/// Build `C_{y_k}` for every user. `C_y` is their block-diagonal stacking and
/// `D = I_K (x) Phi^H` is kept implicit through `phi`.
pub fn observation_covariances(
    cov: &CovarianceSet,
    pilot: &PilotMatrix,
    sigma_n2: f64,
) -> Result<ObservationModel> {
    if pilot.phi.nrows() != cov.m() {
        return Err(Error::DimensionMismatch(
            "pilot rows must equal antenna count".into(),
        ));
    }
    if sigma_n2 < 0.0 {
        return Err(Error::InvalidConfig("sigma_n2 must be >= 0".into()));
    }
    let eye = CMat::identity(pilot.t_dl, pilot.t_dl);
    let c_yk = cov
        .iter()
        .map(|ck| {
            let base = pilot.phi.adjoint() * ck * &pilot.phi;
            hermitianize(&(base + eye.scale(sigma_n2)))
        })
        .collect();
    Ok(ObservationModel {
        phi: pilot.phi.clone(),
        t_dl: pilot.t_dl,
        sigma_n2,
        c_yk,
    })
}

impl ObservationModel {
    pub fn k(&self) -> usize {
        self.c_yk.len()
    }

    pub fn m(&self) -> usize {
        self.phi.nrows()
    }

    /// Dense block-diagonal `C_y` (small instances and tests; the solvers use
    /// the blocks directly).
    pub fn c_y(&self) -> CMat {
        let kt = self.k() * self.t_dl;
        let mut out = CMat::zeros(kt, kt);
        for (k, b) in self.c_yk.iter().enumerate() {
            out.view_mut((k * self.t_dl, k * self.t_dl), (self.t_dl, self.t_dl))
                .copy_from(b);
        }
        out
    }

    /// Index range of user `k` inside stacked observation vectors (the
    /// selection map `E_k`).
    pub fn user_range(&self, k: usize) -> std::ops::Range<usize> {
        k * self.t_dl..(k + 1) * self.t_dl
    }
}

/// Stacked observations for one channel realization.
#[derive(Debug, Clone)]
pub struct ObservationBatch {
    pub per_user: Vec<CVec>,
}

impl ObservationBatch {
    /// Observe every user's channel.
    pub fn collect(
        h: &[CVec],
        phi: &CMat,
        sigma_n2: f64,
        rng: &mut impl Rng,
    ) -> ObservationBatch {
        ObservationBatch {
            per_user: h.iter().map(|hk| observe(hk, phi, sigma_n2, rng)).collect(),
        }
    }

    /// Concatenation `y = [y_1; ...; y_K]` in user order.
    pub fn stacked(&self) -> CVec {
        let total: usize = self.per_user.iter().map(|y| y.len()).sum();
        let mut out = CVec::zeros(total);
        let mut off = 0;
        for y in &self.per_user {
            out.rows_mut(off, y.len()).copy_from(y);
            off += y.len();
        }
        out
    }
}
