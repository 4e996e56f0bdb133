//! Text matrix file exchange for covariance sets and pilot matrices.
//!
//! Format: one header line `rows cols count`, then `count` matrices, each as
//! `rows` lines of `cols` complex entries written row-major as `re im`
//! pairs. Whitespace separated, `#` comments allowed.

use crate::channel::CovarianceSet;
use crate::{C64, CMat, Error, Result};
use std::fmt::Write as _;
use std::path::Path;

/// Serialize matrices (all of one shape) to the text format.
pub fn matrices_to_string(mats: &[CMat]) -> Result<String> {
    let Some(first) = mats.first() else {
        return Err(Error::InvalidConfig("no matrices to write".into()));
    };
    let (r, c) = first.shape();
    let mut out = String::new();
    let _ = writeln!(out, "{} {} {}", r, c, mats.len());
    for m in mats {
        if m.shape() != (r, c) {
            return Err(Error::DimensionMismatch(
                "matrices in one file must share a shape".into(),
            ));
        }
        for i in 0..r {
            let mut line = String::new();
            for j in 0..c {
                if j > 0 {
                    line.push(' ');
                }
                let z = m[(i, j)];
                let _ = write!(line, "{:e} {:e}", z.re, z.im);
            }
            out.push_str(&line);
            out.push('\n');
        }
    }
    Ok(out)
}

/// Parse the text format back into matrices.
pub fn matrices_from_str(text: &str, origin: &str) -> Result<Vec<CMat>> {
    let mut tokens = text
        .lines()
        .map(|l| l.split('#').next().unwrap_or(""))
        .flat_map(|l| l.split_whitespace())
        .map(|t| t.to_string())
        .collect::<Vec<_>>()
        .into_iter();
    let mut next_usize = |what: &str| -> Result<usize> {
        tokens
            .next()
            .ok_or_else(|| Error::MatrixFile {
                path: origin.to_string(),
                msg: format!("missing {what}"),
            })?
            .parse()
            .map_err(|_| Error::MatrixFile {
                path: origin.to_string(),
                msg: format!("malformed {what}"),
            })
    };
    let r = next_usize("row count")?;
    let c = next_usize("column count")?;
    let n = next_usize("matrix count")?;
    if r == 0 || c == 0 || n == 0 {
        return Err(Error::MatrixFile {
            path: origin.to_string(),
            msg: "header must be positive".into(),
        });
    }
    let rest: Vec<String> = tokens.collect();
    let need = 2 * r * c * n;
    if rest.len() != need {
        return Err(Error::MatrixFile {
            path: origin.to_string(),
            msg: format!("expected {need} value tokens, found {}", rest.len()),
        });
    }
    let vals: Vec<f64> = rest
        .iter()
        .map(|t| {
            t.parse::<f64>().map_err(|_| Error::MatrixFile {
                path: origin.to_string(),
                msg: format!("malformed float '{t}'"),
            })
        })
        .collect::<Result<Vec<_>>>()?;
    let mut mats = Vec::with_capacity(n);
    let mut idx = 0;
    for _ in 0..n {
        let mut m = CMat::zeros(r, c);
        for i in 0..r {
            for j in 0..c {
                m[(i, j)] = C64::new(vals[idx], vals[idx + 1]);
                idx += 2;
            }
        }
        mats.push(m);
    }
    Ok(mats)
}

/// Write a covariance set (`M M K` header).
pub fn write_covariances(path: &Path, cov: &CovarianceSet) -> Result<()> {
    let mats: Vec<CMat> = cov.iter().cloned().collect();
    let text = matrices_to_string(&mats)?;
    std::fs::write(path, text).map_err(|e| Error::io(path.display().to_string(), e))
}

/// Read a covariance set back.
pub fn read_covariances(path: &Path) -> Result<CovarianceSet> {
    let text =
        std::fs::read_to_string(path).map_err(|e| Error::io(path.display().to_string(), e))?;
    let mats = matrices_from_str(&text, &path.display().to_string())?;
    let first = &mats[0];
    if first.nrows() != first.ncols() {
        return Err(Error::MatrixFile {
            path: path.display().to_string(),
            msg: "covariance matrices must be square".into(),
        });
    }
    CovarianceSet::from_matrices(mats)
}

/// Write an arbitrary single matrix (for example the pilot matrix).
pub fn write_matrix(path: &Path, m: &CMat) -> Result<()> {
    let text = matrices_to_string(std::slice::from_ref(m))?;
    std::fs::write(path, text).map_err(|e| Error::io(path.display().to_string(), e))
}
