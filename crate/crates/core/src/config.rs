//! Sweep configuration: plain-text `key=value` files, built-in profiles,
//! and validation.

use crate::channel::ScenarioConfig;
use crate::iwmmse::IwmmseParams;
use crate::power_split::PipelineParams;
use crate::{Error, Result};
use std::collections::BTreeMap;
use std::fmt;
use std::path::PathBuf;
use std::str::FromStr;

/// Simulation method selector.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, serde::Serialize)]
#[serde(rename_all = "snake_case")]
pub enum Method {
    BilinearRs,
    BilinearNoRs,
    IwmmseRs,
    IwmmseNoRs,
}

impl Method {
    pub const ALL: [Method; 4] = [
        Method::BilinearRs,
        Method::BilinearNoRs,
        Method::IwmmseRs,
        Method::IwmmseNoRs,
    ];

    pub fn name(&self) -> &'static str {
        match self {
            Method::BilinearRs => "bilinear_rs",
            Method::BilinearNoRs => "bilinear_nors",
            Method::IwmmseRs => "iwmmse_rs",
            Method::IwmmseNoRs => "iwmmse_nors",
        }
    }
}

impl fmt::Display for Method {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for Method {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        match s.trim() {
            "bilinear_rs" => Ok(Method::BilinearRs),
            "bilinear_nors" => Ok(Method::BilinearNoRs),
            "iwmmse_rs" => Ok(Method::IwmmseRs),
            "iwmmse_nors" => Ok(Method::IwmmseNoRs),
            other => Err(Error::InvalidConfig(format!("unknown method '{other}'"))),
        }
    }
}

/// Built-in parameter profiles.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Profile {
    /// Full scale: M=64, K=5, T_dl=8, 300 trials.
    Paper,
    /// CI scale: M=16, K=3, T_dl=4, 50 trials.
    Desk,
}

impl FromStr for Profile {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        match s {
            "paper" => Ok(Profile::Paper),
            "desk" => Ok(Profile::Desk),
            other => Err(Error::InvalidConfig(format!("unknown profile '{other}'"))),
        }
    }
}

/// Full sweep configuration.
#[derive(Debug, Clone)]
pub struct SweepConfig {
    pub scenario: ScenarioConfig,
    pub t_dl: usize,
    /// Channel coherence interval in symbols (recorded with the results).
    pub t_ch: usize,
    pub p_dl_db: Vec<f64>,
    /// Monte-Carlo trials per power point.
    pub n_iter: usize,
    /// Instantaneous-rate evaluation draws per trial.
    pub n_eval: usize,
    pub methods: Vec<Method>,
    /// Reuse trial 0's user drop for every trial.
    pub fixed_geometry: bool,
    /// Fixed training noise variance instead of `1/(P_dl T_dl)`.
    pub sigma_n2_override: Option<f64>,
    /// Worker threads (defaults to the rayon global pool).
    pub threads: Option<usize>,
    pub out_dir: PathBuf,
    /// Load covariances from a matrix file instead of drawing geometry.
    pub covariance_in: Option<PathBuf>,
    pub pipeline: PipelineParams,
    pub iwmmse: IwmmseParams,
}

impl SweepConfig {
    pub fn profile(profile: Profile) -> Self {
        let (m, k, t_dl, n_iter) = match profile {
            Profile::Paper => (64, 5, 8, 300),
            Profile::Desk => (16, 3, 4, 50),
        };
        SweepConfig {
            scenario: ScenarioConfig {
                m,
                k,
                cell_radius: 250.0,
                n_path: 6,
                n_rays: 20,
                nu: 1.1,
                seed: 1,
            },
            t_dl,
            t_ch: 200,
            p_dl_db: (0..=8).map(|i| 5.0 * i as f64).collect(),
            n_iter,
            n_eval: 1,
            methods: Method::ALL.to_vec(),
            fixed_geometry: false,
            sigma_n2_override: None,
            threads: None,
            out_dir: PathBuf::from("out"),
            covariance_in: None,
            pipeline: PipelineParams::default(),
            iwmmse: IwmmseParams::default(),
        }
    }

    pub fn validate(&self) -> Result<()> {
        self.scenario.validate()?;
        if self.t_dl >= self.scenario.m {
            return Err(Error::InvalidConfig(format!(
                "T_dl must be < M for pilot reuse (got T_dl={}, M={})",
                self.t_dl, self.scenario.m
            )));
        }
        if self.t_dl == 0 {
            return Err(Error::InvalidConfig("T_dl must be >= 1".into()));
        }
        if self.p_dl_db.is_empty() {
            return Err(Error::InvalidConfig("P_dl grid must be nonempty".into()));
        }
        if self.n_iter == 0 {
            return Err(Error::InvalidConfig("n_iter must be >= 1".into()));
        }
        if self.n_eval == 0 {
            return Err(Error::InvalidConfig("n_eval must be >= 1".into()));
        }
        if self.methods.is_empty() {
            return Err(Error::InvalidConfig("methods must be nonempty".into()));
        }
        if let Some(s) = self.sigma_n2_override {
            if !(s > 0.0) {
                return Err(Error::InvalidConfig("sigma_n2 override must be > 0".into()));
            }
        }
        Ok(())
    }

    /// Canonical key=value map of all resolved settings (JSON echo and
    /// determinism checks).
    pub fn echo(&self) -> BTreeMap<String, String> {
        let mut map = BTreeMap::new();
        map.insert("M".into(), self.scenario.m.to_string());
        map.insert("K".into(), self.scenario.k.to_string());
        map.insert("T_dl".into(), self.t_dl.to_string());
        map.insert("T_ch".into(), self.t_ch.to_string());
        map.insert("radius_m".into(), self.scenario.cell_radius.to_string());
        map.insert("N_path".into(), self.scenario.n_path.to_string());
        map.insert("N_rays".into(), self.scenario.n_rays.to_string());
        map.insert("nu".into(), self.scenario.nu.to_string());
        map.insert("seed".into(), self.scenario.seed.to_string());
        map.insert(
            "p_dl_db".into(),
            self.p_dl_db
                .iter()
                .map(|x| x.to_string())
                .collect::<Vec<_>>()
                .join(","),
        );
        map.insert("n_iter".into(), self.n_iter.to_string());
        map.insert("n_eval".into(), self.n_eval.to_string());
        map.insert(
            "methods".into(),
            self.methods
                .iter()
                .map(|m| m.name().to_string())
                .collect::<Vec<_>>()
                .join(","),
        );
        map.insert("fixed_geometry".into(), self.fixed_geometry.to_string());
        if let Some(s) = self.sigma_n2_override {
            map.insert("sigma_n2".into(), s.to_string());
        }
        map.insert("private_tol".into(), self.pipeline.private.tol.to_string());
        map.insert(
            "private_max_iter".into(),
            self.pipeline.private.max_iter.to_string(),
        );
        map.insert(
            "bisect_eps".into(),
            self.pipeline.private.bisect_eps.to_string(),
        );
        map.insert("common_u_max".into(), self.pipeline.common.u_max.to_string());
        map.insert("common_n_max".into(), self.pipeline.common.n_max.to_string());
        map.insert(
            "common_outer_tol".into(),
            self.pipeline.common.outer_tol.to_string(),
        );
        map.insert(
            "common_max_sweeps".into(),
            self.pipeline.common.max_sweeps.to_string(),
        );
        map.insert("golden_tol".into(), self.pipeline.golden.tol.to_string());
        map.insert(
            "golden_max_eval".into(),
            self.pipeline.golden.max_eval.to_string(),
        );
        map.insert("iwmmse_tol".into(), self.iwmmse.tol.to_string());
        map.insert("iwmmse_max_iter".into(), self.iwmmse.max_iter.to_string());
        map
    }

    /// Apply one `key=value` assignment.
    pub fn set(&mut self, key: &str, value: &str) -> Result<()> {
        fn parse<T: FromStr>(key: &str, value: &str) -> Result<T> {
            value.trim().parse::<T>().map_err(|_| {
                Error::InvalidConfig(format!("malformed value '{value}' for key '{key}'"))
            })
        }
        let v = value.trim();
        match key {
            "M" => self.scenario.m = parse(key, v)?,
            "K" => self.scenario.k = parse(key, v)?,
            "T_dl" => self.t_dl = parse(key, v)?,
            "T_ch" => self.t_ch = parse(key, v)?,
            "radius_m" => self.scenario.cell_radius = parse(key, v)?,
            "N_path" => self.scenario.n_path = parse(key, v)?,
            "N_rays" => self.scenario.n_rays = parse(key, v)?,
            "nu" => self.scenario.nu = parse(key, v)?,
            "seed" => self.scenario.seed = parse(key, v)?,
            "p_dl_db" => {
                self.p_dl_db = v
                    .split(',')
                    .filter(|s| !s.trim().is_empty())
                    .map(|s| parse::<f64>(key, s))
                    .collect::<Result<Vec<_>>>()?;
            }
            "n_iter" => self.n_iter = parse(key, v)?,
            "n_eval" => self.n_eval = parse(key, v)?,
            "methods" => {
                let mut methods = v
                    .split(',')
                    .filter(|s| !s.trim().is_empty())
                    .map(Method::from_str)
                    .collect::<Result<Vec<_>>>()?;
                methods.sort();
                methods.dedup();
                self.methods = methods;
            }
            "fixed_geometry" => self.fixed_geometry = parse(key, v)?,
            "sigma_n2" => self.sigma_n2_override = Some(parse(key, v)?),
            "threads" => self.threads = Some(parse(key, v)?),
            "out_dir" => self.out_dir = PathBuf::from(v),
            "covariance_in" => self.covariance_in = Some(PathBuf::from(v)),
            "private_tol" => self.pipeline.private.tol = parse(key, v)?,
            "private_max_iter" => self.pipeline.private.max_iter = parse(key, v)?,
            "bisect_eps" => self.pipeline.private.bisect_eps = parse(key, v)?,
            "common_u_max" => self.pipeline.common.u_max = parse(key, v)?,
            "common_n_max" => self.pipeline.common.n_max = parse(key, v)?,
            "common_outer_tol" => self.pipeline.common.outer_tol = parse(key, v)?,
            "common_max_sweeps" => self.pipeline.common.max_sweeps = parse(key, v)?,
            "golden_tol" => self.pipeline.golden.tol = parse(key, v)?,
            "golden_max_eval" => self.pipeline.golden.max_eval = parse(key, v)?,
            "iwmmse_tol" => self.iwmmse.tol = parse(key, v)?,
            "iwmmse_max_iter" => self.iwmmse.max_iter = parse(key, v)?,
            other => {
                return Err(Error::InvalidConfig(format!("unknown key '{other}'")));
            }
        }
        Ok(())
    }
}

/// Parse a `key=value` config text (comments with `#`, blank lines ignored)
/// on top of the given profile defaults.
pub fn parse_config_str(text: &str, base: Profile) -> Result<SweepConfig> {
    let mut cfg = SweepConfig::profile(base);
    for (idx, raw) in text.lines().enumerate() {
        let line = raw.split('#').next().unwrap_or("").trim();
        if line.is_empty() {
            continue;
        }
        let Some((key, value)) = line.split_once('=') else {
            return Err(Error::ConfigParse {
                line: idx + 1,
                msg: format!("expected key=value, got '{line}'"),
            });
        };
        cfg.set(key.trim(), value).map_err(|e| Error::ConfigParse {
            line: idx + 1,
            msg: e.to_string(),
        })?;
    }
    cfg.validate()?;
    Ok(cfg)
}

/// Read and parse a config file.
pub fn parse_config(path: &std::path::Path, base: Profile) -> Result<SweepConfig> {
    let text = std::fs::read_to_string(path)
        .map_err(|e| Error::io(path.display().to_string(), e))?;
    parse_config_str(&text, base)
}
