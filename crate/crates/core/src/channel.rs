//! Multi-cluster spatial channel model: user geometry, per-user downlink
//! covariance matrices, and channel sampling.
//!
//! Urban-microcell style: each user sees `N_path` clusters of `N_rays` rays.
//! The covariance of user `k` is
//! `C_k = p_k * sum_n (beta_n / N_rays) * sum_m a(theta_knm) a(theta_knm)^H`
//! with unit-magnitude ULA steering vectors evaluated at the downlink
//! carrier.

use crate::linalg::{hermitianize, psd_sqrt_checked};
use crate::{C64, CMat, CVec, Error, Result};
use rand::Rng;
use rand_distr::StandardNormal;
use std::f64::consts::{FRAC_1_SQRT_2, PI};

/// Static scenario parameters.
#[derive(Debug, Clone, PartialEq)]
pub struct ScenarioConfig {
    /// BS antenna count.
    pub m: usize,
    /// User count.
    pub k: usize,
    /// Cell radius in meters.
    pub cell_radius: f64,
    /// Cluster count per user.
    pub n_path: usize,
    /// Rays per cluster.
    pub n_rays: usize,
    /// DL/UL carrier frequency ratio.
    pub nu: f64,
    /// Base RNG seed.
    pub seed: u64,
}

impl ScenarioConfig {
    pub fn validate(&self) -> Result<()> {
        if self.m < 2 {
            return Err(Error::InvalidConfig("M must be >= 2".into()));
        }
        if self.k < 1 {
            return Err(Error::InvalidConfig("K must be >= 1".into()));
        }
        if self.n_path < 1 || self.n_rays < 1 {
            return Err(Error::InvalidConfig("N_path and N_rays must be >= 1".into()));
        }
        if !(self.nu > 0.0) {
            return Err(Error::InvalidConfig("nu must be > 0".into()));
        }
        if !(self.cell_radius > 0.0) {
            return Err(Error::InvalidConfig("cell radius must be > 0".into()));
        }
        Ok(())
    }
}

/// One random user drop: distances, path gains, cluster powers, ray angles.
#[derive(Debug, Clone)]
pub struct UserGeometry {
    /// BS-to-user distance in meters, per user.
    pub distances: Vec<f64>,
    /// Linear path gains, normalized so `max_k p_k = 1`.
    pub path_gains: Vec<f64>,
    /// Cluster power profile, `sum_n beta_n = 1`.
    pub cluster_powers: Vec<f64>,
    /// Ray angles in radians, `angles[user][cluster][ray]`.
    pub angles: Vec<Vec<Vec<f64>>>,
}

/// Per-user covariance matrices and their block-diagonal stacking.
#[derive(Debug, Clone)]
pub struct CovarianceSet {
    mats: Vec<CMat>,
    m: usize,
}

/// Reference distance of the path-loss law, meters.
const PATHLOSS_REF_M: f64 = 100.0;
/// Path-loss exponent (UMi NLOS).
const PATHLOSS_EXP: f64 = 3.7;
/// Half-width of the per-user central azimuth range.
const AZIMUTH_HALF: f64 = PI / 3.0;
/// Half-width of the cluster-center offset around the user azimuth.
const CLUSTER_HALF: f64 = PI / 12.0;
/// Half-width of the ray offset around the cluster center (2 degrees).
const RAY_HALF: f64 = PI / 90.0;

/// ULA steering vector at the DL carrier: component `i` (1-based) is
/// `exp(j*pi*nu*(i-1)*sin(theta))`.
pub fn steering_vector(theta: f64, nu: f64, m: usize) -> CVec {
    let s = theta.sin();
    CVec::from_fn(m, |i, _| {
        let phase = PI * nu * i as f64 * s;
        C64::new(phase.cos(), phase.sin())
    })
}

/// Draw one user drop: area-uniform positions on the disk, path gains from
/// the distance law, exponentially decaying cluster powers, and per-ray
/// angles around the user azimuth.
pub fn drop_users(cfg: &ScenarioConfig, rng: &mut impl Rng) -> Result<UserGeometry> {
    cfg.validate()?;
    let mut distances = Vec::with_capacity(cfg.k);
    let mut path_gains = Vec::with_capacity(cfg.k);
    let mut angles = Vec::with_capacity(cfg.k);

    let mut beta: Vec<f64> = (1..=cfg.n_path).map(|n| (-(n as f64) / 2.0).exp()).collect();
    let bsum: f64 = beta.iter().sum();
    beta.iter_mut().for_each(|b| *b /= bsum);

    for _ in 0..cfg.k {
        let u: f64 = rng.gen();
        let d = cfg.cell_radius * u.sqrt();
        distances.push(d);
        path_gains.push((d / PATHLOSS_REF_M).powf(-PATHLOSS_EXP));

        let center = rng.gen_range(-AZIMUTH_HALF..AZIMUTH_HALF);
        let mut user_angles = Vec::with_capacity(cfg.n_path);
        for _ in 0..cfg.n_path {
            let cluster = center + rng.gen_range(-CLUSTER_HALF..CLUSTER_HALF);
            let rays = (0..cfg.n_rays)
                .map(|_| cluster + rng.gen_range(-RAY_HALF..RAY_HALF))
                .collect();
            user_angles.push(rays);
        }
        angles.push(user_angles);
    }

    let pmax = path_gains.iter().cloned().fold(f64::MIN, f64::max);
    path_gains.iter_mut().for_each(|p| *p /= pmax);

    Ok(UserGeometry {
        distances,
        path_gains,
        cluster_powers: beta,
        angles,
    })
}

/// Accumulate the cluster/ray double sum into per-user covariances.
pub fn build_covariance(geom: &UserGeometry, cfg: &ScenarioConfig) -> CovarianceSet {
    let m = cfg.m;
    let mats = (0..geom.angles.len())
        .map(|k| {
            let mut c = CMat::zeros(m, m);
            for (n, rays) in geom.angles[k].iter().enumerate() {
                let w = geom.path_gains[k] * geom.cluster_powers[n] / cfg.n_rays as f64;
                for &theta in rays {
                    let a = steering_vector(theta, cfg.nu, m);
                    // rank-1 accumulation w * a a^H
                    for col in 0..m {
                        let ac = a[col].conj() * w;
                        for row in 0..m {
                            c[(row, col)] += a[row] * ac;
                        }
                    }
                }
            }
            hermitianize(&c)
        })
        .collect();
    CovarianceSet { mats, m }
}

impl CovarianceSet {
    pub fn from_matrices(mats: Vec<CMat>) -> Result<Self> {
        if mats.is_empty() {
            return Err(Error::InvalidCovariance("empty covariance set".into()));
        }
        let m = mats[0].nrows();
        for c in &mats {
            if c.nrows() != m || c.ncols() != m {
                return Err(Error::DimensionMismatch(
                    "covariance matrices must share one square size".into(),
                ));
            }
        }
        Ok(CovarianceSet { mats, m })
    }

    /// Antenna count `M`.
    pub fn m(&self) -> usize {
        self.m
    }

    /// User count `K`.
    pub fn k(&self) -> usize {
        self.mats.len()
    }

    /// Per-user covariance `C_k`.
    pub fn user(&self, k: usize) -> &CMat {
        &self.mats[k]
    }

    pub fn iter(&self) -> impl Iterator<Item = &CMat> {
        self.mats.iter()
    }

    /// `vec(C_k)`.
    pub fn c_vec(&self, k: usize) -> CVec {
        crate::kron::vec_of(&self.mats[k])
    }

    /// Block-diagonal `C_h` of size `KM x KM`.
    pub fn c_h(&self) -> CMat {
        let km = self.k() * self.m;
        let mut out = CMat::zeros(km, km);
        for (k, c) in self.mats.iter().enumerate() {
            out.view_mut((k * self.m, k * self.m), (self.m, self.m))
                .copy_from(c);
        }
        out
    }

    /// `vec(C_h)`.
    pub fn c_h_vec(&self) -> CVec {
        crate::kron::vec_of(&self.c_h())
    }

    /// Factorize every `C_k` for sampling. Fails on non-PSD input.
    pub fn sampler(&self) -> Result<ChannelSampler> {
        let roots = self
            .mats
            .iter()
            .map(psd_sqrt_checked)
            .collect::<Result<Vec<_>>>()?;
        Ok(ChannelSampler { roots })
    }
}

/// Cached square-root factors for drawing `h_k ~ CN(0, C_k)`.
pub struct ChannelSampler {
    roots: Vec<CMat>,
}

/// One standard circularly-symmetric complex Gaussian scalar.
pub fn standard_cn(rng: &mut impl Rng) -> C64 {
    let re: f64 = rng.sample(StandardNormal);
    let im: f64 = rng.sample(StandardNormal);
    C64::new(re * FRAC_1_SQRT_2, im * FRAC_1_SQRT_2)
}

impl ChannelSampler {
    /// Draw independent `h_k = C_k^{1/2} w` for every user.
    pub fn sample(&self, rng: &mut impl Rng) -> Vec<CVec> {
        self.roots
            .iter()
            .map(|r| {
                let w = CVec::from_fn(r.nrows(), |_, _| standard_cn(rng));
                r * w
            })
            .collect()
    }
}

/// Convenience wrapper: factorize and draw once.
pub fn sample_channels(cov: &CovarianceSet, rng: &mut impl Rng) -> Result<Vec<CVec>> {
    Ok(cov.sampler()?.sample(rng))
}
