//! Golden-section search over the common power fraction `alpha_c`, wrapping
//! the private and common solvers as the objective.

use crate::common_opt::{optimize_common, CommonOptParams};
use crate::private_opt::{optimize_private, PrivateOptParams};
use crate::sinr::{PrecoderTransforms, SinrOperators};
use crate::{CMat, Error, Result};

/// Inverse golden ratio `(sqrt(5) - 1) / 2`.
pub const INV_GOLDEN: f64 = 0.618_033_988_749_894_9;

/// Controls for [`golden_section`].
#[derive(Debug, Clone)]
pub struct GoldenParams {
    /// Interval-width stopping tolerance.
    pub tol: f64,
    /// Cap on pipeline evaluations.
    pub max_eval: usize,
    /// Record the per-iteration search trace.
    pub collect_trace: bool,
}

impl Default for GoldenParams {
    fn default() -> Self {
        GoldenParams {
            tol: 0.02,
            max_eval: 12,
            collect_trace: false,
        }
    }
}

/// One golden-section iteration for the diagnostic trace.
#[derive(Debug, Clone)]
pub struct GoldenTrace {
    pub iteration: usize,
    pub a: f64,
    pub b: f64,
    pub x1: f64,
    pub x2: f64,
    pub r1: f64,
    pub r2: f64,
}

/// Generic golden-section maximization on `[a, b]`.
///
/// Keeps `[a, x2]` when `f(x1) > f(x2)`, else `[x1, b]`; the surviving
/// interior probe is reused so each iteration costs one evaluation. Returns
/// the best probe evaluated (not the midpoint), which also guards against
/// mild non-unimodality.
pub fn golden_max<F: FnMut(f64) -> Result<f64>>(
    mut f: F,
    a0: f64,
    b0: f64,
    params: &GoldenParams,
) -> Result<(f64, f64, Vec<GoldenTrace>)> {
    if !(params.tol > 0.0 && params.tol < 1.0) {
        return Err(Error::InvalidConfig("golden tol must be in (0,1)".into()));
    }
    let g = INV_GOLDEN;
    let (mut a, mut b) = (a0, b0);
    let mut x1 = a + (1.0 - g) * (b - a);
    let mut x2 = a + g * (b - a);
    let mut r1 = f(x1)?;
    let mut r2 = f(x2)?;
    let mut evals = 2usize;
    let (mut best_x, mut best_r) = if r1 >= r2 { (x1, r1) } else { (x2, r2) };
    let mut trace = Vec::new();
    let mut iteration = 0;
    loop {
        if params.collect_trace {
            trace.push(GoldenTrace {
                iteration,
                a,
                b,
                x1,
                x2,
                r1,
                r2,
            });
        }
        iteration += 1;
        if (b - a).abs() < params.tol || evals >= params.max_eval {
            break;
        }
        if r1 > r2 {
            b = x2;
            x2 = x1;
            r2 = r1;
            x1 = a + (1.0 - g) * (b - a);
            r1 = f(x1)?;
        } else {
            a = x1;
            x1 = x2;
            r1 = r2;
            x2 = a + g * (b - a);
            r2 = f(x2)?;
        }
        evals += 1;
        if r1 > best_r {
            best_r = r1;
            best_x = x1;
        }
        if r2 > best_r {
            best_r = r2;
            best_x = x2;
        }
    }
    Ok((best_x, best_r, trace))
}

/// Lower-bound rates of one evaluated split.
#[derive(Debug, Clone)]
pub struct SplitSolution {
    pub transforms: PrecoderTransforms,
    /// `min_k R_{c,k}^LB`.
    pub common_rate: f64,
    /// `R_{p,k}^LB` per user.
    pub private_rates: Vec<f64>,
    /// `common_rate + sum(private_rates)`.
    pub sum_rate: f64,
}

/// Solver parameter bundle threaded through the pipeline.
#[derive(Debug, Clone, Default)]
pub struct PipelineParams {
    pub private: PrivateOptParams,
    pub common: CommonOptParams,
    pub golden: GoldenParams,
}

/// Run the private solver on `(1-alpha_c) P_dl`, then the common solver on
/// `alpha_c P_dl`, and report the lower-bound rates.
pub fn evaluate_split(
    ops: &SinrOperators,
    p_dl: f64,
    alpha_c: f64,
    warm: Option<&PrecoderTransforms>,
    params: &PipelineParams,
) -> Result<SplitSolution> {
    if !(0.0..=1.0).contains(&alpha_c) {
        return Err(Error::InvalidConfig("alpha_c must be in [0,1]".into()));
    }
    let private = optimize_private(
        ops,
        (1.0 - alpha_c) * p_dl,
        warm.map(|w| w.a_p.as_slice()),
        &params.private,
    )?;
    let common = optimize_common(
        ops,
        &private.a_p,
        alpha_c * p_dl,
        warm.map(|w| &w.a_c),
        &params.common,
    )?;
    let gamma_p = ops.private_sinrs(&private.a_p)?;
    let private_rates: Vec<f64> = gamma_p.iter().map(|g| (1.0 + g).log2()).collect();
    let common_rate = if alpha_c > 0.0 {
        (1.0 + common.min_metric).log2()
    } else {
        0.0
    };
    let sum_rate = common_rate + private_rates.iter().sum::<f64>();
    Ok(SplitSolution {
        transforms: PrecoderTransforms {
            a_p: private.a_p,
            a_c: common.a_c,
            alpha_c,
        },
        common_rate,
        private_rates,
        sum_rate,
    })
}

/// Rescale a warm start to the budgets of a new split so the solvers start
/// from feasible, full-power points.
fn rescaled_warm(
    ops: &SinrOperators,
    prev: &PrecoderTransforms,
    p_dl: f64,
    alpha_c: f64,
) -> PrecoderTransforms {
    let mut w = prev.clone();
    let pp = ops.private_power(&w.a_p);
    if pp > 0.0 {
        let s = ((1.0 - alpha_c) * p_dl / pp).sqrt();
        for a in w.a_p.iter_mut() {
            *a *= crate::C64::new(s, 0.0);
        }
    }
    let pc = ops.f_c_quad(&w.a_c);
    if pc > 0.0 && alpha_c > 0.0 {
        let s = (alpha_c * p_dl / pc).sqrt();
        w.a_c *= crate::C64::new(s, 0.0);
    }
    w.alpha_c = alpha_c;
    w
}

/// Result of the full power-split search.
#[derive(Debug, Clone)]
pub struct GoldenSolution {
    pub alpha_c: f64,
    pub split: SplitSolution,
    pub trace: Vec<GoldenTrace>,
}

/// Golden-section search of `alpha_c` on `[0, 1]`, warm-starting each
/// pipeline evaluation from the previous probe's transforms.
pub fn golden_section(
    ops: &SinrOperators,
    p_dl: f64,
    params: &PipelineParams,
) -> Result<GoldenSolution> {
    let mut warm: Option<PrecoderTransforms> = None;
    let mut best_split: Option<(f64, SplitSolution)> = None;
    let objective = |alpha: f64| -> Result<f64> {
        let start = warm.as_ref().map(|w| rescaled_warm(ops, w, p_dl, alpha));
        let split = evaluate_split(ops, p_dl, alpha, start.as_ref(), params)?;
        let rate = split.sum_rate;
        warm = Some(split.transforms.clone());
        if best_split.as_ref().map_or(true, |(r, _)| rate > *r) {
            best_split = Some((rate, split));
        }
        Ok(rate)
    };
    let (alpha_c, _, trace) = golden_max(objective, 0.0, 1.0, &params.golden)?;
    let (_, split) = best_split.expect("golden search evaluated at least two probes");
    debug_assert!((split.transforms.alpha_c - alpha_c).abs() < 1e-12);
    Ok(GoldenSolution {
        alpha_c,
        split,
        trace,
    })
}

/// The no-rate-splitting solution: all power on private streams.
pub fn no_rs_solution(
    ops: &SinrOperators,
    p_dl: f64,
    warm: Option<&[CMat]>,
    params: &PipelineParams,
) -> Result<SplitSolution> {
    let private = optimize_private(ops, p_dl, warm, &params.private)?;
    let gamma_p = ops.private_sinrs(&private.a_p)?;
    let private_rates: Vec<f64> = gamma_p.iter().map(|g| (1.0 + g).log2()).collect();
    let sum_rate = private_rates.iter().sum::<f64>();
    Ok(SplitSolution {
        transforms: PrecoderTransforms {
            a_p: private.a_p,
            a_c: CMat::zeros(ops.m(), ops.k() * ops.t_dl()),
            alpha_c: 0.0,
        },
        common_rate: 0.0,
        private_rates,
        sum_rate,
    })
}
