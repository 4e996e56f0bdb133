//! Aggregated sweep results and their CSV / JSON / gnuplot emission.

use crate::config::Method;
use crate::{Error, Result};
use std::collections::BTreeMap;
use std::fmt::Write as _;
use std::path::Path;

/// Aggregates for one `(method, power)` cell.
#[derive(Debug, Clone, serde::Serialize)]
pub struct ReportRow {
    pub method: Method,
    pub p_dl_db: f64,
    /// Mean instantaneous sum rate (RS or no-RS form depending on method).
    pub mean_sum_rate: f64,
    /// Sample standard deviation / sqrt(trials).
    pub stderr: f64,
    /// Mean lower-bound sum rate (bilinear methods only).
    pub mean_lb: Option<f64>,
    /// Mean common power fraction.
    pub alpha_c: Option<f64>,
    /// Mean instantaneous common rate `log2(1 + min_k gamma_c)`.
    pub common_rate: f64,
    /// Mean per-user instantaneous private rates.
    pub user_rates: Vec<f64>,
    pub trials_ok: usize,
    pub trials_failed: usize,
}

/// Full Monte-Carlo report.
#[derive(Debug, Clone, serde::Serialize)]
pub struct RateReport {
    /// User count (fixes the CSV column layout).
    pub k: usize,
    pub rows: Vec<ReportRow>,
}

fn fmt_f64(x: f64) -> String {
    if x.is_nan() {
        "nan".to_string()
    } else {
        format!("{x}")
    }
}

impl RateReport {
    pub fn total_failed(&self) -> usize {
        self.rows.iter().map(|r| r.trials_failed).sum()
    }

    /// CSV body with the fixed header
    /// `method,P_dl_dB,mean_sum_rate,stderr,mean_lb,alpha_c,common_rate,user_1..user_K`.
    pub fn to_csv(&self) -> String {
        let mut out = String::new();
        out.push_str("method,P_dl_dB,mean_sum_rate,stderr,mean_lb,alpha_c,common_rate");
        for i in 1..=self.k {
            let _ = write!(out, ",user_{i}");
        }
        out.push('\n');
        for row in &self.rows {
            let _ = write!(
                out,
                "{},{},{},{},{},{},{}",
                row.method,
                fmt_f64(row.p_dl_db),
                fmt_f64(row.mean_sum_rate),
                fmt_f64(row.stderr),
                fmt_f64(row.mean_lb.unwrap_or(f64::NAN)),
                fmt_f64(row.alpha_c.unwrap_or(f64::NAN)),
                fmt_f64(row.common_rate),
            );
            for i in 0..self.k {
                let v = row.user_rates.get(i).copied().unwrap_or(f64::NAN);
                let _ = write!(out, ",{}", fmt_f64(v));
            }
            out.push('\n');
        }
        out
    }

    /// JSON mirror with a config echo and version stamp. The timestamp is
    /// the only non-deterministic field.
    pub fn to_json(&self, config_echo: &BTreeMap<String, String>) -> String {
        #[derive(serde::Serialize)]
        struct Envelope<'a> {
            version: &'static str,
            git: Option<&'static str>,
            timestamp_unix: u64,
            config: &'a BTreeMap<String, String>,
            trials_failed_total: usize,
            report: &'a RateReport,
        }
        let env = Envelope {
            version: env!("CARGO_PKG_VERSION"),
            git: option_env!("GIT_HASH"),
            timestamp_unix: std::time::SystemTime::now()
                .duration_since(std::time::UNIX_EPOCH)
                .map(|d| d.as_secs())
                .unwrap_or(0),
            config: config_echo,
            trials_failed_total: self.total_failed(),
            report: self,
        };
        serde_json::to_string_pretty(&env).expect("report serialization cannot fail")
    }

    /// Two-column gnuplot data per curve: `<method>.dat` with the mean sum
    /// rate and `<method>_lb.dat` with the lower bound where present.
    pub fn curve_files(&self) -> Vec<(String, String)> {
        let mut files = Vec::new();
        let methods: Vec<Method> = {
            let mut seen = Vec::new();
            for r in &self.rows {
                if !seen.contains(&r.method) {
                    seen.push(r.method);
                }
            }
            seen
        };
        for m in methods {
            let mut dat = String::new();
            let mut lb = String::new();
            for row in self.rows.iter().filter(|r| r.method == m) {
                let _ = writeln!(dat, "{} {}", fmt_f64(row.p_dl_db), fmt_f64(row.mean_sum_rate));
                if let Some(v) = row.mean_lb {
                    let _ = writeln!(lb, "{} {}", fmt_f64(row.p_dl_db), fmt_f64(v));
                }
            }
            files.push((format!("{m}.dat"), dat));
            if !lb.is_empty() {
                files.push((format!("{m}_lb.dat"), lb));
            }
        }
        files
    }

    /// Write `report.csv`, `report.json`, and the curve files into `dir`.
    pub fn emit(&self, dir: &Path, config_echo: &BTreeMap<String, String>) -> Result<()> {
        std::fs::create_dir_all(dir).map_err(|e| Error::io(dir.display().to_string(), e))?;
        let write = |name: &str, body: &str| -> Result<()> {
            let path = dir.join(name);
            std::fs::write(&path, body).map_err(|e| Error::io(path.display().to_string(), e))
        };
        write("report.csv", &self.to_csv())?;
        write("report.json", &self.to_json(config_echo))?;
        for (name, body) in self.curve_files() {
            write(&name, &body)?;
        }
        Ok(())
    }
}
